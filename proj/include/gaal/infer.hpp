#pragma once

#include <map>
#include <string>
#include <vector>

#include "gaal/matrix.hpp"
#include "gaal/model.hpp"

namespace gaal {

struct TrainConfig;  // train.hpp
struct Features;

/// Unimodal and fused predictions over one evaluation set.
struct PredictionSet {
  Matrix logits_image;
  Matrix logits_tabular;
  Matrix p_image;
  Matrix p_tabular;
  Matrix p_fused;
  std::vector<int> labels;
};

struct EvalReport {
  double acc_multi = 0.0;
  double acc_image = 0.0;
  double acc_tabular = 0.0;
  std::vector<double> per_class;  // fused accuracy per class
  std::size_t n_test = 0;
};

/// Softmax of the modality's logits; also serves the test-time-tabular-missing
/// mode (image branch alone).
Matrix unimodal_predict(const ModelState& state, Modality m, const Matrix& x);

/// softmax(w·f_I + (1−w)·f_T); the written form fixes w at 1/2.
Matrix fused_predict(const ModelState& state, const Matrix& x_image,
                     const Matrix& x_tabular, double weight_image = 0.5);

/// Mean of [argmax(pᵢ) == yᵢ]; argmax ties break toward the lowest class.
double accuracy(const Matrix& probs, std::span<const int> labels);

std::size_t argmax_row(std::span<const double> row);

PredictionSet predict_all(const ModelState& state, const Features& data,
                          double weight_image = 0.5);

EvalReport evaluate(const ModelState& state, const Features& data,
                    double weight_image = 0.5);

/// Joint-baseline model (fused head over concatenated latents) predictions.
Matrix joint_predict(const ModelState& joint, const Matrix& x_image,
                     const Matrix& x_tabular);
/// Joint model restricted to one branch (other latent zeroed).
Matrix joint_predict_branch(const ModelState& joint, Modality m, const Matrix& x);
EvalReport evaluate_joint(const ModelState& joint, const Features& data);

/// Conflict measure at one joint-model state: cosine between the head
/// gradient the image branch alone would produce (tabular latent zeroed) and
/// the multimodal head gradient, compared over the coordinates the two
/// objectives share (the image weight block plus the bias).
double joint_conflict_cosine(const ModelState& joint, const Features& batch);

/// Conflict diagnostic over a naive joint-learning run: per-step cosine
/// between the image-branch head gradient and the multimodal head gradient.
struct ConflictTrace {
  std::vector<double> cosines;
  std::vector<std::size_t> histogram;  // bins over [-1, 1]
  double bin_width = 0.0;
  double negative_fraction = 0.0;
};

ConflictTrace conflict_trace(const Features& train_set, const Features& val_set,
                             const TrainConfig& cfg, std::size_t n_bins = 40);

std::string report_text(const EvalReport& report);
void append_report_csv(const EvalReport& report, const std::string& tag,
                       const std::string& path);

}  // namespace gaal
