#include "gaal/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gaal/errors.hpp"

namespace gaal {
namespace {

constexpr std::size_t kGenLatentDim = 16;
// Spacing between class prototypes relative to unit noise; chosen so the
// default dataset is learnable but not saturated.
constexpr double kPrototypeScale = 0.55;

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

std::size_t TabularSchema::featurized_dim() const {
  std::size_t d = continuous.size();
  for (const auto& c : categorical) d += static_cast<std::size_t>(c.cardinality);
  return d;
}

void TabularSchema::validate() const {
  for (const auto& c : categorical) {
    if (c.cardinality < 2) {
      throw ConfigError("schema: categorical column '" + c.name +
                        "' needs cardinality >= 2");
    }
    if (c.name.empty()) throw ConfigError("schema: unnamed categorical column");
  }
  for (const auto& name : continuous) {
    if (name.empty()) throw ConfigError("schema: unnamed continuous column");
  }
}

MultimodalDataset MultimodalDataset::subset(
    std::span<const std::size_t> indices) const {
  MultimodalDataset out;
  out.schema = schema;
  out.n_classes = n_classes;
  const std::size_t n_cat = schema.categorical.size();
  out.image = Matrix(indices.size(), image.cols);
  out.cont_values = Matrix(indices.size(), cont_values.cols);
  out.cat_values.resize(indices.size() * n_cat);
  out.labels.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    std::copy(image.row(src).begin(), image.row(src).end(),
              out.image.row(r).begin());
    std::copy(cont_values.row(src).begin(), cont_values.row(src).end(),
              out.cont_values.row(r).begin());
    for (std::size_t c = 0; c < n_cat; ++c) {
      out.cat_values[r * n_cat + c] = cat_values[src * n_cat + c];
    }
    out.labels[r] = labels[src];
  }
  return out;
}

TabularSchema default_schema() {
  TabularSchema schema;
  schema.categorical = {{"c0", 4}, {"c1", 6}};
  schema.continuous = {"k0", "k1", "k2", "k3"};
  return schema;
}

MultimodalDataset generate_synthetic(const SyntheticSpec& spec, RngStream& rng) {
  spec.schema.validate();
  if (spec.n_classes < 2) throw ConfigError("generate: need at least 2 classes");
  if (spec.n < static_cast<std::size_t>(spec.n_classes)) {
    throw ConfigError("generate: N must be >= class count");
  }
  if (spec.d_img == 0) throw ConfigError("generate: d_img must be positive");
  auto check01 = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string("generate: ") + what +
                        " must lie in [0,1]");
    }
  };
  check01(spec.informativeness_image, "informativeness_image");
  check01(spec.informativeness_tabular, "informativeness_tabular");
  if (!(spec.noise >= 0.0)) throw ConfigError("generate: noise must be >= 0");

  const std::size_t n_cat = spec.schema.categorical.size();
  const std::size_t n_cont = spec.schema.continuous.size();
  const std::size_t n_classes = static_cast<std::size_t>(spec.n_classes);

  // Structural draws (prototypes, projections) come from a dedicated child
  // stream; each sample gets its own child so generation order is immaterial.
  RngStream structure = rng.child(0);
  std::vector<std::vector<double>> prototypes(n_classes);
  for (auto& proto : prototypes) {
    proto.resize(kGenLatentDim);
    double sq = 0.0;
    for (double& v : proto) {
      v = structure.normal();
      sq += v * v;
    }
    const double scale =
        kPrototypeScale * std::sqrt(static_cast<double>(kGenLatentDim)) /
        std::max(std::sqrt(sq), 1e-300);
    for (double& v : proto) v *= scale;
  }
  auto make_projection = [&](std::size_t out_dim) {
    Matrix p(out_dim, kGenLatentDim);
    const double s = 1.0 / std::sqrt(static_cast<double>(kGenLatentDim));
    for (double& v : p.data) v = structure.normal() * s;
    return p;
  };
  const Matrix proj_img = make_projection(spec.d_img);
  const Matrix proj_cont = make_projection(std::max<std::size_t>(n_cont, 1));

  MultimodalDataset ds;
  ds.schema = spec.schema;
  ds.n_classes = spec.n_classes;
  ds.image = Matrix(spec.n, spec.d_img);
  ds.cont_values = Matrix(spec.n, n_cont);
  ds.cat_values.resize(spec.n * n_cat);
  ds.labels.resize(spec.n);

  for (std::size_t i = 0; i < spec.n; ++i) {
    RngStream sample = rng.child(i + 1);
    const std::size_t y = sample.uniform_int(n_classes);
    ds.labels[i] = static_cast<int>(y);
    const auto& proto = prototypes[y];

    for (std::size_t j = 0; j < spec.d_img; ++j) {
      ds.image(i, j) = spec.informativeness_image * dot(proj_img.row(j), proto) +
                       spec.noise * sample.normal();
    }
    for (std::size_t j = 0; j < n_cont; ++j) {
      ds.cont_values(i, j) =
          spec.informativeness_tabular * dot(proj_cont.row(j), proto) +
          spec.noise * sample.normal();
    }
    for (std::size_t j = 0; j < n_cat; ++j) {
      const int card = spec.schema.categorical[j].cardinality;
      const std::size_t preferred = (y + j) % static_cast<std::size_t>(card);
      const double uniform_mass = 1.0 / static_cast<double>(card);
      const double p_pref =
          uniform_mass + spec.informativeness_tabular * (1.0 - uniform_mass);
      const double u = sample.uniform();
      int value;
      if (u < p_pref) {
        value = static_cast<int>(preferred);
      } else {
        // Remaining mass spread uniformly over the other categories.
        const double rest = (u - p_pref) / (1.0 - p_pref);
        int slot = std::min(card - 2, static_cast<int>(rest * (card - 1)));
        value = slot >= static_cast<int>(preferred) ? slot + 1 : slot;
      }
      ds.cat_values[i * n_cat + j] = value;
    }
  }
  return ds;
}

FeaturizeStats compute_stats(const MultimodalDataset& train) {
  const std::size_t n = train.size();
  const std::size_t n_cont = train.cont_values.cols;
  if (n == 0) throw DataError("compute_stats: empty dataset");
  FeaturizeStats stats;
  stats.mean.assign(n_cont, 0.0);
  stats.stddev.assign(n_cont, 0.0);
  for (std::size_t j = 0; j < n_cont; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += train.cont_values(i, j);
    const double mu = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = train.cont_values(i, j) - mu;
      sq += d * d;
    }
    stats.mean[j] = mu;
    stats.stddev[j] = std::sqrt(sq / static_cast<double>(n));
  }
  return stats;
}

Matrix featurize_tabular(const MultimodalDataset& raw,
                         const FeaturizeStats& stats) {
  const std::size_t n = raw.size();
  const std::size_t n_cat = raw.schema.categorical.size();
  const std::size_t n_cont = raw.schema.continuous.size();
  if (stats.mean.size() != n_cont) {
    throw ShapeError("featurize: stats cover " +
                     std::to_string(stats.mean.size()) + " columns, schema has " +
                     std::to_string(n_cont));
  }
  Matrix out(n, raw.schema.featurized_dim());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t col = 0;
    for (std::size_t j = 0; j < n_cat; ++j) {
      const auto& spec = raw.schema.categorical[j];
      const int v = raw.cat(i, j);
      if (v < 0 || v >= spec.cardinality) {
        throw DataError("featurize: column '" + spec.name +
                        "' has unknown category " + std::to_string(v));
      }
      out(i, col + static_cast<std::size_t>(v)) = 1.0;
      col += static_cast<std::size_t>(spec.cardinality);
    }
    for (std::size_t j = 0; j < n_cont; ++j) {
      if (stats.stddev[j] < 1e-12) {
        out(i, col + j) = 0.0;  // constant column
      } else {
        out(i, col + j) = (raw.cont_values(i, j) - stats.mean[j]) / stats.stddev[j];
      }
    }
  }
  return out;
}

void save_csv(const MultimodalDataset& ds, const std::string& csv_path,
              const std::string& schema_path) {
  std::ofstream schema_out(schema_path);
  if (!schema_out) throw DataError("cannot write schema file " + schema_path);
  for (const auto& c : ds.schema.categorical) {
    schema_out << "categorical." << c.name << '=' << c.cardinality << '\n';
  }
  for (const auto& name : ds.schema.continuous) {
    schema_out << "continuous." << name << "=1\n";
  }

  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot write dataset file " + csv_path);
  out << "id,label";
  for (std::size_t j = 0; j < ds.image.cols; ++j) out << ",img_" << j;
  for (const auto& c : ds.schema.categorical) out << ',' << c.name;
  for (const auto& name : ds.schema.continuous) out << ',' << name;
  out << '\n';
  const std::size_t n_cat = ds.schema.categorical.size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << i << ',' << ds.labels[i];
    for (std::size_t j = 0; j < ds.image.cols; ++j) {
      out << ',' << fmt_full(ds.image(i, j));
    }
    for (std::size_t j = 0; j < n_cat; ++j) out << ',' << ds.cat(i, j);
    for (std::size_t j = 0; j < ds.cont_values.cols; ++j) {
      out << ',' << fmt_full(ds.cont_values(i, j));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + csv_path);
}

TabularSchema load_schema(const std::string& schema_path) {
  std::ifstream in(schema_path);
  if (!in) throw DataError("cannot read schema file " + schema_path);
  TabularSchema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw DataError("schema file line " + std::to_string(line_no) +
                      ": expected <kind>.<name>=<value>");
    }
    const std::string kind = line.substr(0, dot);
    const std::string name = line.substr(dot + 1, eq - dot - 1);
    const std::string value = line.substr(eq + 1);
    if (kind == "categorical") {
      schema.categorical.push_back({name, std::stoi(value)});
    } else if (kind == "continuous") {
      schema.continuous.push_back(name);
    } else {
      throw DataError("schema file line " + std::to_string(line_no) +
                      ": unknown kind '" + kind + "'");
    }
  }
  schema.validate();
  return schema;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

MultimodalDataset load_csv(const std::string& csv_path,
                           const TabularSchema& schema) {
  schema.validate();
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot read dataset file " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset file is empty");
  const auto header = split_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw DataError("dataset header must start with id,label");
  }
  std::size_t d_img = 0;
  while (2 + d_img < header.size() &&
         header[2 + d_img] == "img_" + std::to_string(d_img)) {
    ++d_img;
  }
  if (d_img == 0) throw DataError("dataset header has no img_ columns");
  const std::size_t n_cat = schema.categorical.size();
  const std::size_t n_cont = schema.continuous.size();
  const std::size_t expected_cols = 2 + d_img + n_cat + n_cont;
  if (header.size() != expected_cols) {
    throw DataError("dataset header has " + std::to_string(header.size()) +
                    " columns, schema expects " + std::to_string(expected_cols));
  }
  for (std::size_t j = 0; j < n_cat; ++j) {
    if (header[2 + d_img + j] != schema.categorical[j].name) {
      throw DataError("dataset header column '" + header[2 + d_img + j] +
                      "' does not match schema categorical '" +
                      schema.categorical[j].name + "'");
    }
  }
  for (std::size_t j = 0; j < n_cont; ++j) {
    if (header[2 + d_img + n_cat + j] != schema.continuous[j]) {
      throw DataError("dataset header column '" + header[2 + d_img + n_cat + j] +
                      "' does not match schema continuous '" +
                      schema.continuous[j] + "'");
    }
  }

  MultimodalDataset ds;
  ds.schema = schema;
  std::vector<double> image_flat;
  std::vector<double> cont_flat;
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != expected_cols) {
      throw DataError("dataset line " + std::to_string(line_no) + ": expected " +
                      std::to_string(expected_cols) + " columns, got " +
                      std::to_string(fields.size()));
    }
    try {
      const int label = std::stoi(fields[1]);
      if (label < 0) throw DataError("negative label");
      ds.labels.push_back(label);
      max_label = std::max(max_label, label);
      for (std::size_t j = 0; j < d_img; ++j) {
        image_flat.push_back(std::stod(fields[2 + j]));
      }
      for (std::size_t j = 0; j < n_cat; ++j) {
        ds.cat_values.push_back(std::stoi(fields[2 + d_img + j]));
      }
      for (std::size_t j = 0; j < n_cont; ++j) {
        cont_flat.push_back(std::stod(fields[2 + d_img + n_cat + j]));
      }
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError("dataset line " + std::to_string(line_no) +
                      ": malformed numeric field");
    }
  }
  const std::size_t n = ds.labels.size();
  if (n == 0) throw DataError("dataset has no data rows; N >= 1 required");
  ds.image = Matrix(n, d_img);
  ds.image.data = std::move(image_flat);
  ds.cont_values = Matrix(n, n_cont);
  ds.cont_values.data = std::move(cont_flat);
  ds.n_classes = max_label + 1;
  if (!all_finite(ds.image.data)) {
    throw DataError("dataset contains non-finite image features");
  }
  return ds;
}

SplitResult split(const MultimodalDataset& ds, std::array<double, 3> fractions,
                  RngStream& rng) {
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split: negative fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split: fractions sum to " + std::to_string(total));
  }
  std::size_t n_parts = 0;
  for (double f : fractions) n_parts += (f > 0.0) ? 1 : 0;

  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(std::max(ds.n_classes, 1)));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  bool stratified = true;
  for (const auto& members : by_class) {
    if (!members.empty() && members.size() < n_parts) stratified = false;
  }

  // Largest-remainder allocation of n items over the three fractions.
  auto allocate = [&](std::size_t n) {
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
      const double exact = fractions[static_cast<std::size_t>(p)] *
                           static_cast<double>(n);
      counts[static_cast<std::size_t>(p)] =
          static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainder[static_cast<std::size_t>(p)] =
          exact - static_cast<double>(counts[static_cast<std::size_t>(p)]);
      assigned += counts[static_cast<std::size_t>(p)];
    }
    while (assigned < n) {
      int best = 0;
      for (int p = 1; p < 3; ++p) {
        if (remainder[static_cast<std::size_t>(p)] >
            remainder[static_cast<std::size_t>(best)]) {
          best = p;
        }
      }
      ++counts[static_cast<std::size_t>(best)];
      remainder[static_cast<std::size_t>(best)] = -1.0;
      ++assigned;
    }
    return counts;
  };

  std::array<std::vector<std::size_t>, 3> parts;
  auto distribute = [&](std::vector<std::size_t>& pool) {
    shuffle_indices(pool, rng);
    const auto counts = allocate(pool.size());
    std::size_t cursor = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < counts[p]; ++k) {
        parts[p].push_back(pool[cursor++]);
      }
    }
  };
  if (stratified) {
    for (auto& members : by_class) {
      if (!members.empty()) distribute(members);
    }
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    distribute(all);
  }

  SplitResult result;
  result.stratified = stratified;
  for (std::size_t p = 0; p < 3; ++p) {
    std::sort(parts[p].begin(), parts[p].end());  // keep original row order
  }
  result.train = ds.subset(parts[0]);
  result.val = ds.subset(parts[1]);
  result.test = ds.subset(parts[2]);
  return result;
}

std::vector<std::size_t> BatchPlan::permutation(std::size_t epoch) const {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  RngStream rng = base.child(epoch);
  shuffle_indices(idx, rng);
  return idx;
}

std::vector<std::vector<std::size_t>> BatchPlan::batches(std::size_t epoch) const {
  if (batch_size == 0) throw ConfigError("batch plan: batch size must be >= 1");
  const auto perm = permutation(epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (drop_last && end - start < batch_size) break;
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace gaal
