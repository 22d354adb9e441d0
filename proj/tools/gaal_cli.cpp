// Experiment CLI: dataset generation, training, evaluation, ablations,
// hyperparameter sweeps, and the joint-learning conflict diagnostic.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gaal/config.hpp"
#include "gaal/data.hpp"
#include "gaal/errors.hpp"
#include "gaal/infer.hpp"
#include "gaal/model.hpp"
#include "gaal/train.hpp"

namespace {

using namespace gaal;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct Prepared {
  Features train;
  Features val;
  Features test;
};

std::string dataset_csv(const ExperimentConfig& cfg) {
  return cfg.dataset_path.empty() ? cfg.default_dataset_csv() : cfg.dataset_path;
}

Prepared prepare_data(const ExperimentConfig& cfg) {
  const std::string csv = dataset_csv(cfg);
  const std::string schema_file = cfg.schema_path_for(csv);
  if (!std::filesystem::exists(csv)) {
    throw DataError("dataset file " + csv + " not found; run `generate` first");
  }
  TabularSchema schema = load_schema(schema_file);
  MultimodalDataset ds = load_csv(csv, schema);
  RngStream split_rng = RngStream(cfg.seed).child(4);
  SplitResult parts = split(ds, cfg.split_fractions, split_rng);
  if (!parts.stratified) {
    std::cerr << "warning: class too small for stratified split, "
                 "fell back to unstratified\n";
  }
  FeaturizeStats stats = compute_stats(parts.train);
  Prepared out;
  out.train = featurize(parts.train, stats);
  if (parts.val.size() > 0) out.val = featurize(parts.val, stats);
  if (parts.test.size() > 0) out.test = featurize(parts.test, stats);
  out.val.n_classes = out.train.n_classes;
  out.test.n_classes = out.train.n_classes;
  return out;
}

EvalReport train_and_eval(const ExperimentConfig& cfg, const Prepared& data,
                          const TrainConfig& tc) {
  TrainResult run = train(data.train, data.val, tc);
  const Features& eval_set = data.test.size() > 0 ? data.test : data.train;
  return tc.baseline == BaselineMode::Joint
             ? evaluate_joint(run.state, eval_set)
             : evaluate(run.state, eval_set, tc.fusion_weight);
}

int cmd_generate(const ExperimentConfig& cfg) {
  const std::string csv = dataset_csv(cfg);
  std::filesystem::create_directories(
      std::filesystem::path(csv).parent_path().empty()
          ? "."
          : std::filesystem::path(csv).parent_path().string());
  RngStream data_rng = RngStream(cfg.seed).child(1);
  MultimodalDataset ds = generate_synthetic(cfg.data, data_rng);
  save_csv(ds, csv, cfg.schema_path_for(csv));
  std::cout << "generated " << csv << "\n"
            << "N=" << ds.size() << " Y=" << ds.n_classes
            << " d_img=" << ds.image.cols
            << " D'=" << ds.schema.featurized_dim() << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  Prepared data = prepare_data(cfg);
  TrainResult run = train(data.train, data.val, cfg.train);
  std::filesystem::create_directories(cfg.out_dir);
  save_checkpoint(run.state, cfg.checkpoint_path());
  write_diag_csv(run.diag, cfg.out_dir + "/diag.csv");
  write_metrics_csv(run.epoch_metrics, cfg.out_dir + "/metrics.csv");
  std::cout << "trained " << baseline_name(cfg.train.baseline) << " for "
            << run.epoch_metrics.size() << " epochs"
            << (run.stopped_early ? " (early stop)" : "") << "\n"
            << "checkpoint: " << cfg.checkpoint_path() << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg) {
  Prepared data = prepare_data(cfg);
  ModelState state = load_checkpoint(cfg.checkpoint_path());
  const Features& eval_set = data.test.size() > 0 ? data.test : data.train;
  const bool joint =
      state.head.latent_dim() == 2 * state.encoder_image.output_dim();
  EvalReport rep = joint ? evaluate_joint(state, eval_set)
                         : evaluate(state, eval_set, cfg.train.fusion_weight);
  const std::string text = report_text(rep);
  std::ofstream(cfg.out_dir + "/eval.txt") << text;
  append_report_csv(rep, baseline_name(cfg.train.baseline),
                    cfg.out_dir + "/results.csv");
  std::cout << text;
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
  Prepared data = prepare_data(cfg);
  struct Row {
    bool cgs, ugg;
  };
  const Row rows[] = {{false, false}, {true, false}, {true, true}};
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/ablation.csv");
  out << "cgs,ugg,acc_multi,acc_image,acc_tabular\n";
  for (const Row& row : rows) {
    std::vector<double> multi, image, tabular;
    for (std::uint64_t seed : cfg.seeds) {
      TrainConfig tc = cfg.train;
      tc.baseline = BaselineMode::Gaal;
      tc.seed = seed;
      tc.surgery.enable_cgs = row.cgs;
      tc.surgery.enable_ugg = row.ugg;
      EvalReport rep = train_and_eval(cfg, data, tc);
      multi.push_back(rep.acc_multi);
      image.push_back(rep.acc_image);
      tabular.push_back(rep.acc_tabular);
    }
    out << (row.cgs ? 1 : 0) << ',' << (row.ugg ? 1 : 0) << ','
        << fmt(median(multi)) << ',' << fmt(median(image)) << ','
        << fmt(median(tabular)) << '\n';
    std::cout << "cgs=" << row.cgs << " ugg=" << row.ugg
              << " acc_multi=" << fmt(median(multi)) << "\n";
  }
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& param) {
  Prepared data = prepare_data(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/sweep_" + param + ".csv";
  std::ofstream out(path);
  out << "param_value,seed,acc_multi,acc_image,acc_tabular\n";
  auto emit = [&](const std::string& value, std::uint64_t seed,
                  const EvalReport& rep) {
    out << value << ',' << seed << ',' << fmt(rep.acc_multi) << ','
        << fmt(rep.acc_image) << ',' << fmt(rep.acc_tabular) << '\n';
  };
  if (param == "epsilon") {
    if (cfg.sweep_epsilon.empty()) throw ConfigError("sweep.epsilon grid is empty");
    for (double eps : cfg.sweep_epsilon) {
      for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        tc.surgery.epsilon = eps;
        emit(fmt(eps), seed, train_and_eval(cfg, data, tc));
      }
    }
  } else if (param == "lambda") {
    if (cfg.sweep_lambda.empty()) throw ConfigError("sweep.lambda grid is empty");
    // 2-D surface over (lambda_I, lambda_T).
    for (double li : cfg.sweep_lambda) {
      for (double lt : cfg.sweep_lambda) {
        for (std::uint64_t seed : cfg.seeds) {
          TrainConfig tc = cfg.train;
          tc.seed = seed;
          tc.surgery.lambda_image = li;
          tc.surgery.lambda_tabular = lt;
          emit(fmt(li) + ":" + fmt(lt), seed, train_and_eval(cfg, data, tc));
        }
      }
    }
  } else {
    throw ConfigError("sweep: unknown parameter '" + param + "'");
  }
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg) {
  Prepared data = prepare_data(cfg);
  ConflictTrace trace = conflict_trace(data.train, data.val, cfg.train);
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream hist(cfg.out_dir + "/conflict_hist.csv");
  hist << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < trace.histogram.size(); ++b) {
    const double lo = -1.0 + static_cast<double>(b) * trace.bin_width;
    hist << fmt(lo) << ',' << fmt(lo + trace.bin_width) << ','
         << trace.histogram[b] << '\n';
  }
  std::ofstream summary(cfg.out_dir + "/conflict_summary.txt");
  summary << "steps=" << trace.cosines.size() << '\n'
          << "negative_fraction=" << fmt(trace.negative_fraction) << '\n';
  std::cout << "negative_fraction=" << fmt(trace.negative_fraction) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-aligned alternating learning experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, baseline, sweep_param;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--seed", seed, "root seed (overrides config)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--baseline", baseline,
                    "gaal|joint|alt_no_surgery|orthogonal");
  };
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  CLI::App* ablate = app.add_subcommand("ablate", "CGS/UGG toggle comparison");
  CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter sweep");
  CLI::App* diagnose = app.add_subcommand("diagnose", "joint-learning conflict trace");
  for (CLI::App* sub : {generate, train_cmd, evaluate_cmd, ablate, sweep, diagnose}) {
    add_common(sub);
  }
  sweep->add_option("--param", sweep_param, "epsilon|lambda")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    gaal::ExperimentConfig cfg =
        config_path.empty() ? gaal::default_config() : gaal::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!baseline.empty()) cfg.train.baseline = gaal::parse_baseline(baseline);
    cfg.validate();

    if (generate->parsed()) return cmd_generate(cfg);
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg);
    if (ablate->parsed()) return cmd_ablate(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg, sweep_param);
    if (diagnose->parsed()) return cmd_diagnose(cfg);
    return 2;
  } catch (const gaal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const gaal::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const gaal::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
