#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gaal/data.hpp"
#include "gaal/train.hpp"

namespace gaal {

/// Everything an experiment run needs: data spec, split fractions, training
/// hyperparameters, sweep grids, and repeat seeds. Loaded from a flat
/// key=value file with dotted keys; CLI flags override file values.
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  std::string dataset_path;  // CSV path; schema sits next to it (.schema)

  SyntheticSpec data;
  std::array<double, 3> split_fractions = {0.8, 0.0, 0.2};

  TrainConfig train;

  std::vector<double> sweep_epsilon = {0.0, 0.005, 0.01, 0.02, 0.05};
  std::vector<double> sweep_lambda = {0.1, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  std::string checkpoint_path() const { return out_dir + "/checkpoint.ckpt"; }
  std::string default_dataset_csv() const { return out_dir + "/dataset.csv"; }
  std::string schema_path_for(const std::string& csv) const;

  void validate() const;
};

ExperimentConfig default_config();

/// Parse a key=value config file. Unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

}  // namespace gaal
