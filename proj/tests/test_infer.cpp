#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gaal/errors.hpp"
#include "gaal/infer.hpp"
#include "gaal/train.hpp"

using namespace gaal;

namespace {

// Both encoders and the head are identity maps, so logits equal raw inputs.
// Single-layer encoders skip the ReLU (hidden activations only), which keeps
// negative inputs intact.
ModelState passthrough_model(std::size_t d) {
  ModelState s;
  Matrix eye(d, d);
  for (std::size_t i = 0; i < d; ++i) eye(i, i) = 1.0;
  s.encoder_image.layers.push_back({eye, std::vector<double>(d, 0.0)});
  s.encoder_tabular.layers.push_back({eye, std::vector<double>(d, 0.0)});
  s.head.weight = eye;
  s.head.bias.assign(d, 0.0);
  return s;
}

Features random_features(std::size_t n, std::uint64_t seed, int n_classes = 3,
                         std::size_t d_img = 6, std::size_t d_tab = 5) {
  RngStream rng(seed);
  Features f;
  f.n_classes = n_classes;
  f.image = Matrix(n, d_img);
  f.tabular = Matrix(n, d_tab);
  for (double& v : f.image.data) v = rng.normal();
  for (double& v : f.tabular.data) v = rng.normal();
  f.labels.resize(n);
  for (auto& y : f.labels) y = static_cast<int>(rng.uniform_int(n_classes));
  return f;
}

}  // namespace

TEST_CASE("unimodal_predict") {
  RngStream rng(4);
  ModelDims dims{6, 5, {8, 4}, 3};
  ModelState state = init_params(dims, rng);
  Features f = random_features(7, 11);

  SUBCASE("is exactly softmax of the forward logits") {
    Matrix p = unimodal_predict(state, Modality::Image, f.image);
    Matrix want = softmax_rows(forward_logits(state, Modality::Image, f.image));
    CHECK(p == want);
  }

  SUBCASE("zero head gives the uniform distribution") {
    std::fill(state.head.weight.data.begin(), state.head.weight.data.end(), 0.0);
    std::fill(state.head.bias.begin(), state.head.bias.end(), 0.0);
    Matrix p = unimodal_predict(state, Modality::Tabular, f.tabular);
    for (double v : p.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("fused_predict hand values") {
  ModelState s = passthrough_model(2);
  Matrix xi(1, 2), xt(1, 2);
  xi.data = {1.0, 0.0};
  xt.data = {0.0, 0.0};

  // w = 0.5: fused logits (0.5, 0), softmax = (0.6225, 0.3775).
  Matrix p = fused_predict(s, xi, xt, 0.5);
  const double e = std::exp(0.5);
  CHECK(p(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
  CHECK(p(0, 0) == doctest::Approx(0.6225).epsilon(1e-4));
  CHECK(p(0, 1) == doctest::Approx(0.3775).epsilon(1e-4));

  // w = 1 ignores the tabular logits entirely, w = 0 the image logits.
  Matrix p1 = fused_predict(s, xi, xt, 1.0);
  CHECK(p1 == unimodal_predict(s, Modality::Image, xi));
  Matrix p0 = fused_predict(s, xi, xt, 0.0);
  CHECK(p0 == unimodal_predict(s, Modality::Tabular, xt));

  // Symmetric weight with swapped modality inputs gives the same fusion.
  Matrix swapped = fused_predict(s, xt, xi, 0.5);
  CHECK(swapped == p);

  Matrix wrong(2, 2);
  CHECK_THROWS_AS(fused_predict(s, xi, wrong, 0.5), ShapeError);
}

TEST_CASE("fused_predict is invariant to per-row logit shifts") {
  ModelState s = passthrough_model(3);
  RngStream rng(6);
  Matrix xi(4, 3), xt(4, 3);
  for (double& v : xi.data) v = rng.normal();
  for (double& v : xt.data) v = rng.normal();
  Matrix base = fused_predict(s, xi, xt, 0.5);

  Matrix xi_shift = xi, xt_shift = xt;
  for (std::size_t i = 0; i < 4; ++i) {
    const double c = rng.uniform(-10, 10);
    for (std::size_t j = 0; j < 3; ++j) {
      xi_shift(i, j) += c;
      xt_shift(i, j) += c;
    }
  }
  Matrix shifted = fused_predict(s, xi_shift, xt_shift, 0.5);
  for (std::size_t k = 0; k < base.data.size(); ++k) {
    CHECK(shifted.data[k] == doctest::Approx(base.data[k]).epsilon(1e-9));
  }
}

TEST_CASE("accuracy and argmax") {
  Matrix p(4, 3);
  p.data = {0.7, 0.2, 0.1,   // -> 0
            0.1, 0.8, 0.1,   // -> 1
            0.3, 0.3, 0.4,   // -> 2
            0.5, 0.5, 0.0};  // tie -> 0
  CHECK(accuracy(p, std::vector<int>{0, 1, 2, 1}) == 0.75);
  CHECK(accuracy(p, std::vector<int>{0, 1, 2, 0}) == 1.0);
  CHECK(argmax_row(p.row(3)) == 0);

  CHECK_THROWS_AS(accuracy(p, std::vector<int>{0, 1}), ShapeError);
  CHECK_THROWS_AS(accuracy(Matrix(0, 3), std::vector<int>{}), DataError);
}

TEST_CASE("predict_all composes the unimodal and fused paths") {
  RngStream rng(8);
  ModelDims dims{6, 5, {8, 4}, 3};
  ModelState state = init_params(dims, rng);
  Features f = random_features(9, 12);
  PredictionSet ps = predict_all(state, f, 0.5);
  CHECK(ps.p_image == unimodal_predict(state, Modality::Image, f.image));
  CHECK(ps.p_tabular == unimodal_predict(state, Modality::Tabular, f.tabular));
  CHECK(ps.p_fused == fused_predict(state, f.image, f.tabular, 0.5));
  CHECK(ps.labels == f.labels);
}

TEST_CASE("evaluate per-class accuracies") {
  ModelState s = passthrough_model(2);
  Features f;
  f.n_classes = 2;
  f.image = Matrix(4, 2);
  f.image.data = {3, 0, 3, 0, 0, 3, 0, 3};  // predicts 0,0,1,1
  f.tabular = f.image;
  f.labels = {0, 1, 1, 1};
  EvalReport rep = evaluate(s, f, 0.5);
  CHECK(rep.n_test == 4);
  CHECK(rep.acc_multi == 0.75);
  REQUIRE(rep.per_class.size() == 2);
  CHECK(rep.per_class[0] == 1.0);
  CHECK(rep.per_class[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("joint predictions") {
  // Fused head of width 4 over two 2-wide latents.
  ModelState s = passthrough_model(2);
  s.head.weight = Matrix(2, 4);
  s.head.weight.data = {1, 0, 0, 1,
                        0, 1, 1, 0};
  s.head.bias = {0.0, 0.0};
  Matrix xi(1, 2), xt(1, 2);
  xi.data = {2.0, 0.0};
  xt.data = {0.0, 1.0};

  // logits = (xi0 + xt1, xi1 + xt0) = (3, 0).
  Matrix p = joint_predict(s, xi, xt);
  const double e3 = std::exp(3.0);
  CHECK(p(0, 0) == doctest::Approx(e3 / (e3 + 1.0)).epsilon(1e-12));

  // Image branch alone: logits = (xi0, xi1) = (2, 0).
  Matrix pb = joint_predict_branch(s, Modality::Image, xi);
  const double e2 = std::exp(2.0);
  CHECK(pb(0, 0) == doctest::Approx(e2 / (e2 + 1.0)).epsilon(1e-12));

  // Tabular branch alone occupies the trailing block: logits = (xt1, xt0).
  Matrix pt = joint_predict_branch(s, Modality::Tabular, xt);
  const double e1 = std::exp(1.0);
  CHECK(pt(0, 0) == doctest::Approx(e1 / (e1 + 1.0)).epsilon(1e-12));
}

TEST_CASE("joint_conflict_cosine") {
  SUBCASE("zeroed tabular block makes both objectives coincide") {
    RngStream rng(14);
    ModelDims dims{6, 5, {8, 4}, 3};
    ModelState s = init_params(dims, rng);
    s.head.weight = Matrix(3, 8);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < 4; ++j) s.head.weight(c, j) = rng.normal();
    }
    Features f = random_features(12, 15);
    CHECK(joint_conflict_cosine(s, f) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("fully symmetric duplicated modalities stay near one") {
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      RngStream rng(900 + trial);
      ModelDims dims{10, 10, {12, 6}, 4};
      ModelState s = init_params(dims, rng);
      s.encoder_tabular = s.encoder_image;
      s.head.weight = Matrix(4, 12);
      for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t j = 0; j < 6; ++j) {
          const double w = rng.uniform(-0.7, 0.7);
          s.head.weight(c, j) = w;
          s.head.weight(c, 6 + j) = w;
        }
      }
      for (double& bv : s.head.bias) bv = rng.uniform(-0.3, 0.3);

      Features f;
      f.n_classes = 4;
      f.image = Matrix(32, 10);
      for (double& v : f.image.data) v = rng.normal();
      f.tabular = f.image;
      f.labels.resize(32);
      for (auto& y : f.labels) y = static_cast<int>(rng.uniform_int(4));
      CHECK(joint_conflict_cosine(s, f) > 0.9);
    }
  }

  SUBCASE("rejects non-joint heads and empty batches") {
    RngStream rng(16);
    ModelDims dims{6, 5, {8, 4}, 3};
    ModelState s = init_params(dims, rng);  // head width 4, not 8
    Features f = random_features(4, 17);
    CHECK_THROWS_AS(joint_conflict_cosine(s, f), ShapeError);
    Features empty;
    CHECK_THROWS_AS(joint_conflict_cosine(s, empty), DataError);
  }
}

TEST_CASE("conflict exists on asymmetric data but not single-signal data") {
  // Pinned seed and scale where the separation is clear.
  SyntheticSpec spec;
  spec.schema = default_schema();
  spec.n = 1000;
  TrainConfig tc;
  tc.seed = 2;
  tc.epochs = 10;
  Features empty;

  RngStream rng_a = RngStream(2).child(1);
  MultimodalDataset asym = generate_synthetic(spec, rng_a);
  Features f_asym = featurize(asym, compute_stats(asym));
  ConflictTrace t_asym = conflict_trace(f_asym, empty, tc);
  CHECK(t_asym.negative_fraction > 0.0);

  spec.informativeness_tabular = 0.0;
  RngStream rng_u = RngStream(2).child(1);
  MultimodalDataset uninf = generate_synthetic(spec, rng_u);
  Features f_uninf = featurize(uninf, compute_stats(uninf));
  ConflictTrace t_uninf = conflict_trace(f_uninf, empty, tc);
  CHECK(t_uninf.negative_fraction <= 0.02);
  CHECK(t_uninf.negative_fraction < t_asym.negative_fraction);
}

TEST_CASE("conflict_trace structure") {
  Features tr = random_features(48, 31);
  Features empty_val;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.hidden = {8, 4};
  cfg.seed = 5;

  ConflictTrace trace = conflict_trace(tr, empty_val, cfg, 10);
  // 3 batches per epoch, 3 epochs, one joint step per batch.
  REQUIRE(trace.cosines.size() == 9);
  CHECK(trace.bin_width == doctest::Approx(0.2).epsilon(1e-12));
  std::size_t total = 0;
  for (std::size_t c : trace.histogram) total += c;
  CHECK(total == trace.cosines.size());
  std::size_t negatives = 0;
  for (double c : trace.cosines) {
    CHECK(c >= -1.0 - 1e-12);
    CHECK(c <= 1.0 + 1e-12);
    if (c < 0.0) ++negatives;
  }
  CHECK(trace.negative_fraction ==
        doctest::Approx(static_cast<double>(negatives) / 9.0).epsilon(1e-12));

  // The trace is a pure function of (data, config).
  ConflictTrace again = conflict_trace(tr, empty_val, cfg, 10);
  CHECK(again.cosines == trace.cosines);
}

TEST_CASE("report text and csv") {
  EvalReport rep;
  rep.n_test = 10;
  rep.acc_multi = 0.9;
  rep.acc_image = 0.8;
  rep.acc_tabular = 0.7;
  rep.per_class = {1.0, 0.8};

  const std::string text = report_text(rep);
  CHECK(text.find("n_test=10\n") != std::string::npos);
  CHECK(text.find("acc_multi=0.9\n") != std::string::npos);
  CHECK(text.find("acc_class_1=0.8\n") != std::string::npos);

  const auto path =
      (std::filesystem::temp_directory_path() / "gaal_report.csv").string();
  std::filesystem::remove(path);
  append_report_csv(rep, "gaal", path);
  append_report_csv(rep, "joint", path);
  std::ifstream in(path);
  std::string header, r1, r2;
  std::getline(in, header);
  std::getline(in, r1);
  std::getline(in, r2);
  CHECK(header == "tag,n_test,acc_multi,acc_image,acc_tabular");
  CHECK(r1 == "gaal,10,0.9,0.8,0.7");
  CHECK(r2 == "joint,10,0.9,0.8,0.7");
  std::filesystem::remove(path);
}
