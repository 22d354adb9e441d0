#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gaal {

struct SurgeryConfig {
  double epsilon = 0.01;      // alignment margin, >= 0
  double lambda_image = 0.5;  // hard-sample fraction per modality, in (0,1]
  double lambda_tabular = 0.5;
  bool enable_cgs = true;  // cross-modal gradient surgery
  bool enable_ugg = true;  // uncertainty-based hard-sample selection
  double gp_norm_floor = 1e-12;

  double lambda(bool image) const { return image ? lambda_image : lambda_tabular; }
};

struct SurgeryResult {
  std::vector<double> g_tilde;
  double dual = 0.0;     // v >= 0
  double cos_raw = 0.0;  // cosine between g and g_p before surgery
  bool applied = false;
};

/// Cosine similarity between two gradients; 0 when either norm is below the
/// floor delta.
double cosine_similarity(std::span<const double> g, std::span<const double> g_p,
                         double delta = 1e-12);

/// Nearest point to g (Euclidean) satisfying g_p·g̃ >= epsilon:
/// v = max(0, (epsilon − g_p·g)/‖g_p‖²), g̃ = g + v·g_p.
/// Surgery is skipped (g̃ = g bit-exactly) when ‖g_p‖² < delta.
SurgeryResult project_gradient(std::span<const double> g,
                               std::span<const double> g_p, double epsilon,
                               double delta = 1e-12);

/// Shannon entropy −Σ p ln p of one predicted class distribution, with
/// 0·ln 0 := 0. Result lies in [0, ln Y].
double sample_entropy(std::span<const double> p);

/// Indices of the k = max(1, ⌈lambda·B⌉) largest entropies, ties broken by
/// smaller index, returned sorted ascending.
std::vector<std::size_t> select_hard(std::span<const double> entropies,
                                     double lambda);

}  // namespace gaal
