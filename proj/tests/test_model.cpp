#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "gaal/errors.hpp"
#include "gaal/model.hpp"
#include "gaal/rng.hpp"

using namespace gaal;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& rng, double s = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal() * s;
  return m;
}

std::vector<int> random_labels(std::size_t n, int n_classes, RngStream& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.uniform_int(n_classes));
  return y;
}

ModelDims small_dims() {
  ModelDims d;
  d.d_img = 5;
  d.d_tab = 4;
  d.hidden = {6, 3};
  d.n_classes = 3;
  return d;
}

// Loss as a function of a single perturbed parameter, for finite differences.
double loss_at(ModelState state, Modality m, const Matrix& x,
               std::span<const int> labels) {
  return cross_entropy(forward_logits(state, m, x), labels);
}

struct ParamRef {
  double* value;
  double* grad;
};

// Pair up every encoder+head parameter with its analytic gradient slot.
std::vector<ParamRef> param_refs(ModelState& state, Modality m,
                                 BackwardResult& bw) {
  std::vector<ParamRef> refs;
  MlpParams& enc = state.encoder(m);
  for (std::size_t k = 0; k < enc.layers.size(); ++k) {
    auto& layer = enc.layers[k];
    auto& grad = bw.encoder_grads.layers[k];
    for (std::size_t i = 0; i < layer.weight.data.size(); ++i) {
      refs.push_back({&layer.weight.data[i], &grad.weight.data[i]});
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      refs.push_back({&layer.bias[i], &grad.bias[i]});
    }
  }
  const std::size_t nw = state.head.weight.data.size();
  for (std::size_t i = 0; i < nw; ++i) {
    refs.push_back({&state.head.weight.data[i], &bw.head_grad[i]});
  }
  for (std::size_t i = 0; i < state.head.bias.size(); ++i) {
    refs.push_back({&state.head.bias[i], &bw.head_grad[nw + i]});
  }
  return refs;
}

void check_gradients(ModelState state, Modality m, const Matrix& x,
                     std::span<const int> labels) {
  BackwardResult bw = backward(state, m, x, labels);
  auto refs = param_refs(state, m, bw);
  const double h = 1e-5;
  for (const ParamRef& ref : refs) {
    const double saved = *ref.value;
    *ref.value = saved + h;
    const double up = loss_at(state, m, x, labels);
    *ref.value = saved - h;
    const double down = loss_at(state, m, x, labels);
    *ref.value = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(*ref.grad), 1e-4});
    CHECK(std::abs(fd - *ref.grad) / denom <= 1e-6);
  }
}

}  // namespace

TEST_CASE("encode basics") {
  RngStream rng(1);
  ModelState state = init_params(small_dims(), rng);

  SUBCASE("zero weights give zero latents") {
    for (auto& l : state.encoder_image.layers) {
      std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
    }
    Matrix x = random_matrix(3, 5, rng);
    Matrix u = encode(state.encoder_image, x);
    for (double v : u.data) CHECK(v == 0.0);
  }

  SUBCASE("single identity layer is a pass-through") {
    MlpParams id;
    Matrix w(4, 4);
    for (std::size_t i = 0; i < 4; ++i) w(i, i) = 1.0;
    id.layers.push_back({w, std::vector<double>(4, 0.0)});
    Matrix x = random_matrix(2, 4, rng);
    CHECK(encode(id, x) == x);
  }

  SUBCASE("matches a straight-line forward oracle") {
    Matrix x = random_matrix(3, 5, rng);
    Matrix u = encode(state.encoder_image, x);
    const auto& l0 = state.encoder_image.layers[0];
    const auto& l1 = state.encoder_image.layers[1];
    for (std::size_t i = 0; i < 3; ++i) {
      std::vector<double> hidden(6);
      for (std::size_t c = 0; c < 6; ++c) {
        double z = l0.bias[c];
        for (std::size_t j = 0; j < 5; ++j) z += l0.weight(c, j) * x(i, j);
        hidden[c] = std::max(0.0, z);
      }
      for (std::size_t c = 0; c < 3; ++c) {
        double z = l1.bias[c];
        for (std::size_t j = 0; j < 6; ++j) z += l1.weight(c, j) * hidden[j];
        CHECK(u(i, c) == doctest::Approx(z).epsilon(1e-12));
      }
    }
  }

  SUBCASE("shape mismatch throws") {
    Matrix bad = random_matrix(2, 7, rng);
    CHECK_THROWS_AS(encode(state.encoder_image, bad), ShapeError);
  }
}

TEST_CASE("forward_logits") {
  RngStream rng(2);
  ModelState state = init_params(small_dims(), rng);
  Matrix x = random_matrix(4, 5, rng);

  Matrix logits = forward_logits(state, Modality::Image, x);
  CHECK(logits.rows == 4);
  CHECK(logits.cols == 3);

  std::fill(state.head.weight.data.begin(), state.head.weight.data.end(), 0.0);
  state.head.bias = {0.5, -1.0, 2.0};
  Matrix z = forward_logits(state, Modality::Image, x);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(z(i, 0) == 0.5);
    CHECK(z(i, 1) == -1.0);
    CHECK(z(i, 2) == 2.0);
  }
}

TEST_CASE("cross entropy values") {
  Matrix favoring(1, 3);
  favoring.data = {50.0, 0.0, 0.0};
  CHECK(cross_entropy(favoring, std::vector<int>{0}) ==
        doctest::Approx(0.0).epsilon(1e-12));

  Matrix uniform(2, 5);
  CHECK(cross_entropy(uniform, std::vector<int>{1, 4}) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));

  Matrix z(1, 3);
  z.data = {1.0, 0.0, 0.0};
  const double expected = -(1.0 - std::log(std::exp(1.0) + 2.0));
  CHECK(cross_entropy(z, std::vector<int>{0}) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(cross_entropy(z, std::vector<int>{0}) == doctest::Approx(0.5514).epsilon(1e-4));

  CHECK_THROWS_AS(cross_entropy(z, std::vector<int>{3}), DataError);
}

TEST_CASE("backward matches central finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RngStream rng(100 + seed);
    ModelState state = init_params(small_dims(), rng);
    Matrix x_img = random_matrix(4, 5, rng);
    Matrix x_tab = random_matrix(4, 4, rng);
    auto labels = random_labels(4, 3, rng);
    check_gradients(state, Modality::Image, x_img, labels);
    check_gradients(state, Modality::Tabular, x_tab, labels);
  }
}

TEST_CASE("backward structural identities") {
  RngStream rng(5);
  ModelState state = init_params(small_dims(), rng);

  SUBCASE("per-sample head gradients average to the batch gradient") {
    Matrix x = random_matrix(6, 5, rng);
    auto labels = random_labels(6, 3, rng);
    BackwardResult bw = backward(state, Modality::Image, x, labels);
    std::vector<double> mean(bw.head_grad.size(), 0.0);
    for (const auto& g : bw.head_grad_per_sample) {
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += g[k];
    }
    for (std::size_t k = 0; k < mean.size(); ++k) {
      CHECK(mean[k] / 6.0 == doctest::Approx(bw.head_grad[k]).epsilon(1e-12));
    }
  }

  SUBCASE("B copies of one sample equal the single-sample gradient") {
    Matrix one = random_matrix(1, 5, rng);
    Matrix many(5, 5);
    for (std::size_t i = 0; i < 5; ++i) {
      std::copy(one.row(0).begin(), one.row(0).end(), many.row(i).begin());
    }
    std::vector<int> y1{2}, y5(5, 2);
    BackwardResult a = backward(state, Modality::Image, one, y1);
    BackwardResult b = backward(state, Modality::Image, many, y5);
    for (std::size_t k = 0; k < a.head_grad.size(); ++k) {
      CHECK(a.head_grad[k] == doctest::Approx(b.head_grad[k]).epsilon(1e-12));
    }
  }

  SUBCASE("saturated correct predictions give (near) zero gradient") {
    // Blow up the head so the true class probability is 1 to double precision.
    Matrix x(2, 5, 1.0);
    std::vector<int> labels{0, 0};
    Matrix u = encode(state.encoder_image, x);
    for (std::size_t j = 0; j < state.head.weight.cols; ++j) {
      state.head.weight(0, j) = 1e3 * (u(0, j) >= 0 ? 1.0 : -1.0);
      state.head.weight(1, j) = -state.head.weight(0, j);
      state.head.weight(2, j) = -state.head.weight(0, j);
    }
    BackwardResult bw = backward(state, Modality::Image, x, labels);
    for (double g : bw.head_grad) CHECK(std::abs(g) <= 1e-12);
    for (const auto& l : bw.encoder_grads.layers) {
      for (double g : l.weight.data) CHECK(std::abs(g) <= 1e-9);
    }
  }
}

TEST_CASE("init_params determinism and bounds") {
  ModelDims dims = small_dims();
  RngStream a(77), b(77), c(78);
  ModelState s1 = init_params(dims, a);
  ModelState s2 = init_params(dims, b);
  ModelState s3 = init_params(dims, c);
  CHECK(s1.encoder_image.layers[0].weight == s2.encoder_image.layers[0].weight);
  CHECK(s1.head.weight == s2.head.weight);
  CHECK(s1.encoder_image.layers[0].weight != s3.encoder_image.layers[0].weight);

  for (const auto& l : s1.encoder_image.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weight.cols));
    for (double w : l.weight.data) CHECK(std::abs(w) <= bound);
    for (double bval : l.bias) CHECK(bval == 0.0);
  }
}

TEST_CASE("checkpoint round trip") {
  RngStream rng(31);
  ModelState state = init_params(small_dims(), rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / "gaal_test.ckpt").string();
  save_checkpoint(state, path);
  ModelState loaded = load_checkpoint(path);
  CHECK(loaded.encoder_image.layers[0].weight == state.encoder_image.layers[0].weight);
  CHECK(loaded.encoder_tabular.layers[1].bias == state.encoder_tabular.layers[1].bias);
  CHECK(loaded.head.weight == state.head.weight);
  CHECK(loaded.head.bias == state.head.bias);
  std::filesystem::remove(path);
}
