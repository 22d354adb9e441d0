#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "gaal/matrix.hpp"
#include "gaal/rng.hpp"

namespace gaal {

struct CatColumn {
  std::string name;
  int cardinality = 0;  // >= 2
};

struct TabularSchema {
  std::vector<CatColumn> categorical;
  std::vector<std::string> continuous;

  /// D' = sum of cardinalities + number of continuous columns.
  std::size_t featurized_dim() const;
  void validate() const;
};

/// Paired image-vector + raw tabular rows + labels.
struct MultimodalDataset {
  Matrix image;                 // N × d_img
  std::vector<int> cat_values;  // row-major N × schema.categorical.size()
  Matrix cont_values;           // N × schema.continuous.size()
  std::vector<int> labels;      // each in [0, n_classes)
  TabularSchema schema;
  int n_classes = 0;

  std::size_t size() const { return labels.size(); }
  int cat(std::size_t row, std::size_t col) const {
    return cat_values[row * schema.categorical.size() + col];
  }
  MultimodalDataset subset(std::span<const std::size_t> indices) const;
};

struct SyntheticSpec {
  std::size_t n = 2500;
  int n_classes = 4;
  std::size_t d_img = 64;
  TabularSchema schema;
  double informativeness_image = 0.9;  // in [0,1]
  double informativeness_tabular = 0.6;
  double noise = 1.0;
};

TabularSchema default_schema();

/// Class-prototype generator: each modality view mixes a projected class
/// prototype (scaled by informativeness) with Gaussian noise; categorical
/// columns follow class-conditional distributions whose sharpness scales
/// with the tabular informativeness.
MultimodalDataset generate_synthetic(const SyntheticSpec& spec, RngStream& rng);

/// Per-continuous-column mean/stddev, computed on the training split only.
struct FeaturizeStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

FeaturizeStats compute_stats(const MultimodalDataset& train);

/// One-hot categoricals followed by z-scored continuous columns; columns
/// with stddev below 1e-12 map to zero.
Matrix featurize_tabular(const MultimodalDataset& raw, const FeaturizeStats& stats);

void save_csv(const MultimodalDataset& ds, const std::string& csv_path,
              const std::string& schema_path);
TabularSchema load_schema(const std::string& schema_path);
MultimodalDataset load_csv(const std::string& csv_path, const TabularSchema& schema);

struct SplitResult {
  MultimodalDataset train;
  MultimodalDataset val;
  MultimodalDataset test;
  bool stratified = true;  // false signals the unstratified fallback fired
};

/// Disjoint exhaustive split, stratified by label when every class has at
/// least as many samples as nonzero fractions. Fractions are (train,val,test)
/// and must sum to 1 within 1e-9.
SplitResult split(const MultimodalDataset& ds, std::array<double, 3> fractions,
                  RngStream& rng);

/// Seeded epoch-wise batch order; the permutation for a given (stream, epoch)
/// is stable across calls.
struct BatchPlan {
  std::size_t n = 0;
  std::size_t batch_size = 1;
  bool drop_last = false;
  RngStream base;

  BatchPlan(std::size_t n_, std::size_t batch_size_, RngStream base_,
            bool drop_last_ = false)
      : n(n_), batch_size(batch_size_), drop_last(drop_last_), base(base_) {}

  std::vector<std::size_t> permutation(std::size_t epoch) const;
  std::vector<std::vector<std::size_t>> batches(std::size_t epoch) const;
};

}  // namespace gaal
