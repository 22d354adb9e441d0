#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gaal/data.hpp"
#include "gaal/model.hpp"
#include "gaal/surgery.hpp"

namespace gaal {

enum class BaselineMode { Gaal, Joint, AltNoSurgery, Orthogonal };

std::string baseline_name(BaselineMode mode);
BaselineMode parse_baseline(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch_size = 64;
  double lr_encoder = 1e-2;
  double lr_head = 1e-2;
  double momentum = 0.9;  // encoders only; the head uses plain SGD so the
                          // projected direction is applied unblended
  SurgeryConfig surgery;
  std::uint64_t seed = 42;
  BaselineMode baseline = BaselineMode::Gaal;
  std::size_t patience = 8;
  bool image_first = true;
  std::vector<std::size_t> hidden = {64, 32};
  double fusion_weight = 0.5;  // weight on the image logits in fused inference
};

/// Featurized view of a dataset split: image features pass through, tabular
/// raw columns become one-hot + z-scored.
struct Features {
  Matrix image;
  Matrix tabular;
  std::vector<int> labels;
  int n_classes = 0;

  std::size_t size() const { return labels.size(); }
  const Matrix& modality(Modality m) const {
    return m == Modality::Image ? image : tabular;
  }
  Features gather(std::span<const std::size_t> indices) const;
};

Features featurize(const MultimodalDataset& ds, const FeaturizeStats& stats);

/// One diagnostic row per optimization step.
struct StepDiag {
  std::size_t t = 0;
  char modality = 'I';  // 'I', 'T', or 'J' for the joint baseline
  double loss = 0.0;
  double cos_raw = 0.0;
  double dual = 0.0;
  bool applied = false;
  std::size_t n_hard = 0;
  double g_norm = 0.0;
  double gp_norm = 0.0;
  bool has_surgery_columns = true;  // false for joint-baseline rows
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double acc_multi = 0.0;
  double acc_image = 0.0;
  double acc_tabular = 0.0;
  double loss_image = 0.0;
  double loss_tabular = 0.0;
};

struct TrainResult {
  ModelState state;
  std::vector<StepDiag> diag;
  std::vector<EpochMetrics> epoch_metrics;
  /// Joint baseline only: per-step cosine between the image-branch head
  /// gradient and the full multimodal head gradient.
  std::vector<double> conflict_cos;
  bool stopped_early = false;
};

/// Momentum buffers for the two encoders.
struct OptState {
  MlpGrads velocity_image;
  MlpGrads velocity_tabular;

  MlpGrads& velocity(Modality m) {
    return m == Modality::Image ? velocity_image : velocity_tabular;
  }
};

OptState make_opt_state(const ModelState& state);

/// Mean per-sample shared-head gradient over the chosen hard samples of the
/// given modality, at the current parameters.
std::vector<double> reference_gradient(const ModelState& state, Modality m,
                                       const Features& batch,
                                       std::span<const std::size_t> hard_idx);

struct GaalStepResult {
  ModelState state;
  OptState opt;
  StepDiag diag;
};

/// One alternating step for modality m: encoder update with the raw encoder
/// gradient, then shared-head update with the (possibly projected) gradient.
GaalStepResult gaal_step(const ModelState& state, const OptState& opt,
                         const Features& batch, Modality m,
                         const TrainConfig& cfg, std::size_t t);

/// Full training run. Alternates image/tabular steps over shared batches for
/// the alternating modes; the joint baseline optimizes one fused head over
/// concatenated latents. Early stopping on validation fused accuracy when a
/// validation split is provided.
TrainResult train(const Features& train_set, const Features& val_set,
                  const TrainConfig& cfg);

/// Single-modality reference run (encoder + own head on one modality).
ModelState train_unimodal(const Features& train_set, Modality m,
                          const TrainConfig& cfg);

void write_diag_csv(const std::vector<StepDiag>& diag, const std::string& path);
void write_metrics_csv(const std::vector<EpochMetrics>& metrics,
                       const std::string& path);

}  // namespace gaal
