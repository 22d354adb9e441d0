#include "gaal/surgery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gaal/errors.hpp"
#include "gaal/matrix.hpp"

namespace gaal {

double cosine_similarity(std::span<const double> g, std::span<const double> g_p,
                         double delta) {
  const double ng = norm2(g);
  const double ngp = norm2(g_p);
  if (ng < delta || ngp < delta) return 0.0;
  return dot(g, g_p) / (ng * ngp);
}

SurgeryResult project_gradient(std::span<const double> g,
                               std::span<const double> g_p, double epsilon,
                               double delta) {
  if (g.size() != g_p.size()) {
    throw ShapeError("project_gradient: length mismatch " +
                     std::to_string(g.size()) + " vs " +
                     std::to_string(g_p.size()));
  }
  if (!all_finite(g) || !all_finite(g_p) || !std::isfinite(epsilon)) {
    throw NumericError("project_gradient: non-finite input");
  }
  SurgeryResult result;
  result.g_tilde.assign(g.begin(), g.end());
  result.cos_raw = cosine_similarity(g, g_p, delta);
  const double gp_sq = dot(g_p, g_p);
  if (gp_sq < delta) return result;  // degenerate reference: keep g untouched
  const double v = std::max(0.0, (epsilon - dot(g_p, g)) / gp_sq);
  result.dual = v;
  if (v > 0.0) {
    result.applied = true;
    for (std::size_t k = 0; k < g.size(); ++k) result.g_tilde[k] += v * g_p[k];
  }
  return result;
}

double sample_entropy(std::span<const double> p) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) {
      throw NumericError("sample_entropy: negative or non-finite probability");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw NumericError("sample_entropy: probabilities sum to " +
                       std::to_string(sum));
  }
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

std::vector<std::size_t> select_hard(std::span<const double> entropies,
                                     double lambda) {
  const std::size_t batch = entropies.size();
  if (batch == 0) throw DataError("select_hard: empty batch");
  if (!(lambda > 0.0) || lambda > 1.0) {
    throw ConfigError("select_hard: lambda must be in (0,1], got " +
                      std::to_string(lambda));
  }
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(lambda * static_cast<double>(batch))));
  std::vector<std::size_t> order(batch);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entropies[a] != entropies[b]) return entropies[a] > entropies[b];
    return a < b;
  });
  order.resize(std::min(k, batch));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace gaal
