#include "gaal/infer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gaal/errors.hpp"
#include "gaal/train.hpp"

namespace gaal {

Matrix unimodal_predict(const ModelState& state, Modality m, const Matrix& x) {
  return softmax_rows(forward_logits(state, m, x));
}

Matrix fused_predict(const ModelState& state, const Matrix& x_image,
                     const Matrix& x_tabular, double weight_image) {
  if (x_image.rows != x_tabular.rows) {
    throw ShapeError("fused_predict: row mismatch " +
                     std::to_string(x_image.rows) + " vs " +
                     std::to_string(x_tabular.rows));
  }
  Matrix z_i = forward_logits(state, Modality::Image, x_image);
  Matrix z_t = forward_logits(state, Modality::Tabular, x_tabular);
  for (std::size_t k = 0; k < z_i.data.size(); ++k) {
    z_i.data[k] = weight_image * z_i.data[k] + (1.0 - weight_image) * z_t.data[k];
  }
  return softmax_rows(z_i);
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

double accuracy(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows == 0) throw DataError("accuracy: empty prediction set");
  if (probs.rows != labels.size()) {
    throw ShapeError("accuracy: " + std::to_string(probs.rows) + " rows vs " +
                     std::to_string(labels.size()) + " labels");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    if (argmax_row(probs.row(i)) == static_cast<std::size_t>(labels[i])) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows);
}

PredictionSet predict_all(const ModelState& state, const Features& data,
                          double weight_image) {
  PredictionSet ps;
  ps.logits_image = forward_logits(state, Modality::Image, data.image);
  ps.logits_tabular = forward_logits(state, Modality::Tabular, data.tabular);
  ps.p_image = softmax_rows(ps.logits_image);
  ps.p_tabular = softmax_rows(ps.logits_tabular);
  Matrix fused = ps.logits_image;
  for (std::size_t k = 0; k < fused.data.size(); ++k) {
    fused.data[k] = weight_image * ps.logits_image.data[k] +
                    (1.0 - weight_image) * ps.logits_tabular.data[k];
  }
  ps.p_fused = softmax_rows(fused);
  ps.labels = data.labels;
  return ps;
}

namespace {

EvalReport report_from(const Matrix& p_fused, const Matrix& p_image,
                       const Matrix& p_tabular, std::span<const int> labels,
                       int n_classes) {
  EvalReport rep;
  rep.n_test = labels.size();
  rep.acc_multi = accuracy(p_fused, labels);
  rep.acc_image = accuracy(p_image, labels);
  rep.acc_tabular = accuracy(p_tabular, labels);
  rep.per_class.assign(static_cast<std::size_t>(n_classes), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    ++counts[y];
    if (argmax_row(p_fused.row(i)) == y) rep.per_class[y] += 1.0;
  }
  for (std::size_t c = 0; c < rep.per_class.size(); ++c) {
    if (counts[c] > 0) rep.per_class[c] /= static_cast<double>(counts[c]);
  }
  return rep;
}

}  // namespace

EvalReport evaluate(const ModelState& state, const Features& data,
                    double weight_image) {
  PredictionSet ps = predict_all(state, data, weight_image);
  return report_from(ps.p_fused, ps.p_image, ps.p_tabular, data.labels,
                     data.n_classes);
}

Matrix joint_predict(const ModelState& joint, const Matrix& x_image,
                     const Matrix& x_tabular) {
  Matrix u_i = encode(joint.encoder_image, x_image);
  Matrix u_t = encode(joint.encoder_tabular, x_tabular);
  Matrix concat(u_i.rows, u_i.cols + u_t.cols);
  for (std::size_t i = 0; i < u_i.rows; ++i) {
    std::copy(u_i.row(i).begin(), u_i.row(i).end(), concat.row(i).begin());
    std::copy(u_t.row(i).begin(), u_t.row(i).end(),
              concat.row(i).begin() + static_cast<std::ptrdiff_t>(u_i.cols));
  }
  return softmax_rows(head_logits(joint.head, concat));
}

Matrix joint_predict_branch(const ModelState& joint, Modality m,
                            const Matrix& x) {
  Matrix u = encode(joint.encoder(m), x);
  const std::size_t d = u.cols;
  Matrix concat(u.rows, joint.head.latent_dim());
  const std::size_t offset = (m == Modality::Image) ? 0 : joint.head.latent_dim() - d;
  for (std::size_t i = 0; i < u.rows; ++i) {
    std::copy(u.row(i).begin(), u.row(i).end(),
              concat.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
  }
  return softmax_rows(head_logits(joint.head, concat));
}

EvalReport evaluate_joint(const ModelState& joint, const Features& data) {
  Matrix p_multi = joint_predict(joint, data.image, data.tabular);
  Matrix p_image = joint_predict_branch(joint, Modality::Image, data.image);
  Matrix p_tab = joint_predict_branch(joint, Modality::Tabular, data.tabular);
  return report_from(p_multi, p_image, p_tab, data.labels, data.n_classes);
}

namespace {

// Residual matrix (softmax - one-hot)/B for a given logit matrix.
Matrix residuals(Matrix logits, std::span<const int> labels) {
  Matrix r = softmax_rows(logits);
  for (std::size_t i = 0; i < r.rows; ++i) {
    r(i, static_cast<std::size_t>(labels[i])) -= 1.0;
  }
  for (double& v : r.data) v /= static_cast<double>(r.rows);
  return r;
}

}  // namespace

double joint_conflict_cosine(const ModelState& joint, const Features& batch) {
  const std::size_t b = batch.size();
  if (b == 0) throw DataError("joint_conflict_cosine: empty batch");
  Matrix u_i = encode(joint.encoder_image, batch.image);
  Matrix u_t = encode(joint.encoder_tabular, batch.tabular);
  const std::size_t d_i = u_i.cols;
  if (joint.head.latent_dim() != d_i + u_t.cols) {
    throw ShapeError("joint_conflict_cosine: head expects latent width " +
                     std::to_string(joint.head.latent_dim()) + ", got " +
                     std::to_string(d_i + u_t.cols));
  }
  const std::size_t n_classes = joint.head.n_classes();

  // Multimodal logits, and the logits the image branch alone would produce
  // (tabular latent zeroed).
  Matrix logits(b, n_classes), logits_img(b, n_classes);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      double z_img = joint.head.bias[c];
      for (std::size_t j = 0; j < d_i; ++j) {
        z_img += joint.head.weight(c, j) * u_i(i, j);
      }
      double z = z_img;
      for (std::size_t j = 0; j < u_t.cols; ++j) {
        z += joint.head.weight(c, d_i + j) * u_t(i, j);
      }
      logits_img(i, c) = z_img;
      logits(i, c) = z;
    }
  }
  Matrix r_total = residuals(std::move(logits), batch.labels);
  Matrix r_img = residuals(std::move(logits_img), batch.labels);

  // Both objectives share the image weight block and the bias; compare their
  // gradients over exactly those coordinates.
  const std::size_t shared = n_classes * d_i + n_classes;
  std::vector<double> g_image(shared, 0.0), g_total(shared, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double ri = r_img(i, c);
      const double rt = r_total(i, c);
      for (std::size_t j = 0; j < d_i; ++j) {
        g_image[c * d_i + j] += ri * u_i(i, j);
        g_total[c * d_i + j] += rt * u_i(i, j);
      }
      g_image[n_classes * d_i + c] += ri;
      g_total[n_classes * d_i + c] += rt;
    }
  }
  return cosine_similarity(g_image, g_total);
}

ConflictTrace conflict_trace(const Features& train_set, const Features& val_set,
                             const TrainConfig& cfg, std::size_t n_bins) {
  TrainConfig joint_cfg = cfg;
  joint_cfg.baseline = BaselineMode::Joint;
  TrainResult run = train(train_set, val_set, joint_cfg);
  ConflictTrace trace;
  trace.cosines = run.conflict_cos;
  trace.histogram.assign(n_bins, 0);
  trace.bin_width = 2.0 / static_cast<double>(n_bins);
  std::size_t negatives = 0;
  for (double c : trace.cosines) {
    auto bin = static_cast<std::size_t>((c + 1.0) / trace.bin_width);
    if (bin >= n_bins) bin = n_bins - 1;  // c == 1.0 lands in the top bin
    ++trace.histogram[bin];
    if (c < 0.0) ++negatives;
  }
  trace.negative_fraction =
      trace.cosines.empty()
          ? 0.0
          : static_cast<double>(negatives) / static_cast<double>(trace.cosines.size());
  return trace;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string report_text(const EvalReport& report) {
  std::ostringstream out;
  out << "n_test=" << report.n_test << '\n';
  out << "acc_multi=" << fmt(report.acc_multi) << '\n';
  out << "acc_image=" << fmt(report.acc_image) << '\n';
  out << "acc_tabular=" << fmt(report.acc_tabular) << '\n';
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    out << "acc_class_" << c << '=' << fmt(report.per_class[c]) << '\n';
  }
  return out.str();
}

void append_report_csv(const EvalReport& report, const std::string& tag,
                       const std::string& path) {
  const bool exists = static_cast<bool>(std::ifstream(path));
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot append results to " + path);
  if (!exists) out << "tag,n_test,acc_multi,acc_image,acc_tabular\n";
  out << tag << ',' << report.n_test << ',' << fmt(report.acc_multi) << ','
      << fmt(report.acc_image) << ',' << fmt(report.acc_tabular) << '\n';
}

}  // namespace gaal
