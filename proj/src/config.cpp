#include "gaal/config.hpp"

#include <fstream>
#include <sstream>

#include "gaal/errors.hpp"

namespace gaal {
namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) parts.push_back(item);
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError("config key '" + key + "': bad flag '" + value + "'");
}

}  // namespace

std::string ExperimentConfig::schema_path_for(const std::string& csv) const {
  const auto dot = csv.rfind('.');
  const std::string stem = (dot == std::string::npos) ? csv : csv.substr(0, dot);
  return stem + ".schema";
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.data.schema = default_schema();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (data.n == 0) throw ConfigError("data.n must be >= 1");
  if (data.n_classes < 2) throw ConfigError("data.y must be >= 2");
  if (data.d_img == 0) throw ConfigError("data.d_img must be >= 1");
  for (double v : {data.informativeness_image, data.informativeness_tabular}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError("informativeness values must lie in [0,1]");
    }
  }
  if (!(data.noise >= 0.0)) throw ConfigError("data.noise must be >= 0");
  data.schema.validate();
  double total = 0.0;
  for (double f : split_fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be >= 0");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(train.lr_encoder > 0.0) || !(train.lr_head > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (!(train.momentum >= 0.0 && train.momentum < 1.0)) {
    throw ConfigError("train.momentum must lie in [0,1)");
  }
  if (!(train.surgery.epsilon >= 0.0)) {
    throw ConfigError("surgery.epsilon must be >= 0");
  }
  for (double lam : {train.surgery.lambda_image, train.surgery.lambda_tabular}) {
    if (!(lam > 0.0) || lam > 1.0) {
      throw ConfigError("surgery lambdas must lie in (0,1]");
    }
  }
  if (!(train.fusion_weight >= 0.0 && train.fusion_weight <= 1.0)) {
    throw ConfigError("fusion.weight must lie in [0,1]");
  }
  if (train.hidden.empty()) throw ConfigError("model.hidden must be nonempty");
  if (seeds.empty()) throw ConfigError("seeds list must be nonempty");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg = default_config();
  bool schema_overridden = false;
  TabularSchema schema;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);

    if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "baseline") cfg.train.baseline = parse_baseline(value);
    else if (key == "data.path") cfg.dataset_path = value;
    else if (key == "data.n") cfg.data.n = parse_u64(key, value);
    else if (key == "data.y") cfg.data.n_classes = static_cast<int>(parse_u64(key, value));
    else if (key == "data.d_img") cfg.data.d_img = parse_u64(key, value);
    else if (key == "data.informativeness_i") cfg.data.informativeness_image = parse_double(key, value);
    else if (key == "data.informativeness_t") cfg.data.informativeness_tabular = parse_double(key, value);
    else if (key == "data.noise") cfg.data.noise = parse_double(key, value);
    else if (key.rfind("data.categorical.", 0) == 0) {
      schema.categorical.push_back(
          {key.substr(17), static_cast<int>(parse_u64(key, value))});
      schema_overridden = true;
    } else if (key.rfind("data.continuous.", 0) == 0) {
      schema.continuous.push_back(key.substr(16));
      schema_overridden = true;
    }
    else if (key == "split.train") cfg.split_fractions[0] = parse_double(key, value);
    else if (key == "split.val") cfg.split_fractions[1] = parse_double(key, value);
    else if (key == "split.test") cfg.split_fractions[2] = parse_double(key, value);
    else if (key == "model.hidden") {
      cfg.train.hidden.clear();
      for (const auto& h : split_list(value)) {
        cfg.train.hidden.push_back(parse_u64(key, h));
      }
    }
    else if (key == "train.epochs") cfg.train.epochs = parse_u64(key, value);
    else if (key == "train.batch_size") cfg.train.batch_size = parse_u64(key, value);
    else if (key == "train.lr_encoder") cfg.train.lr_encoder = parse_double(key, value);
    else if (key == "train.lr_head") cfg.train.lr_head = parse_double(key, value);
    else if (key == "train.momentum") cfg.train.momentum = parse_double(key, value);
    else if (key == "train.patience") cfg.train.patience = parse_u64(key, value);
    else if (key == "train.image_first") cfg.train.image_first = parse_bool(key, value);
    else if (key == "surgery.epsilon") cfg.train.surgery.epsilon = parse_double(key, value);
    else if (key == "surgery.lambda_i") cfg.train.surgery.lambda_image = parse_double(key, value);
    else if (key == "surgery.lambda_t") cfg.train.surgery.lambda_tabular = parse_double(key, value);
    else if (key == "surgery.enable_cgs") cfg.train.surgery.enable_cgs = parse_bool(key, value);
    else if (key == "surgery.enable_ugg") cfg.train.surgery.enable_ugg = parse_bool(key, value);
    else if (key == "surgery.gp_norm_floor") cfg.train.surgery.gp_norm_floor = parse_double(key, value);
    else if (key == "fusion.weight") cfg.train.fusion_weight = parse_double(key, value);
    else if (key == "sweep.epsilon") {
      cfg.sweep_epsilon.clear();
      for (const auto& v : split_list(value)) {
        cfg.sweep_epsilon.push_back(parse_double(key, v));
      }
    }
    else if (key == "sweep.lambda") {
      cfg.sweep_lambda.clear();
      for (const auto& v : split_list(value)) {
        cfg.sweep_lambda.push_back(parse_double(key, v));
      }
    }
    else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& v : split_list(value)) {
        cfg.seeds.push_back(parse_u64(key, v));
      }
    }
    else {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (schema_overridden) {
    cfg.data.schema = schema;
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace gaal
