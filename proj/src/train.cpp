#include "gaal/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "gaal/errors.hpp"
#include "gaal/infer.hpp"

namespace gaal {

std::string baseline_name(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::Gaal: return "gaal";
    case BaselineMode::Joint: return "joint";
    case BaselineMode::AltNoSurgery: return "alt_no_surgery";
    case BaselineMode::Orthogonal: return "orthogonal";
  }
  return "gaal";
}

BaselineMode parse_baseline(const std::string& name) {
  if (name == "gaal") return BaselineMode::Gaal;
  if (name == "joint") return BaselineMode::Joint;
  if (name == "alt_no_surgery") return BaselineMode::AltNoSurgery;
  if (name == "orthogonal") return BaselineMode::Orthogonal;
  throw ConfigError("unknown baseline mode '" + name + "'");
}

Features Features::gather(std::span<const std::size_t> indices) const {
  Features out;
  out.n_classes = n_classes;
  out.image = Matrix(indices.size(), image.cols);
  out.tabular = Matrix(indices.size(), tabular.cols);
  out.labels.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    std::copy(image.row(src).begin(), image.row(src).end(),
              out.image.row(r).begin());
    std::copy(tabular.row(src).begin(), tabular.row(src).end(),
              out.tabular.row(r).begin());
    out.labels[r] = labels[src];
  }
  return out;
}

Features featurize(const MultimodalDataset& ds, const FeaturizeStats& stats) {
  Features f;
  f.image = ds.image;
  f.tabular = featurize_tabular(ds, stats);
  f.labels = ds.labels;
  f.n_classes = ds.n_classes;
  return f;
}

OptState make_opt_state(const ModelState& state) {
  return {zero_like(state.encoder_image), zero_like(state.encoder_tabular)};
}

namespace {

void apply_encoder_update(MlpParams& params, MlpGrads& velocity,
                          const MlpGrads& grads, double lr, double momentum) {
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& vel = velocity.layers[k];
    const auto& g = grads.layers[k];
    auto& layer = params.layers[k];
    for (std::size_t i = 0; i < vel.weight.data.size(); ++i) {
      vel.weight.data[i] = momentum * vel.weight.data[i] + g.weight.data[i];
      layer.weight.data[i] -= lr * vel.weight.data[i];
    }
    for (std::size_t i = 0; i < vel.bias.size(); ++i) {
      vel.bias[i] = momentum * vel.bias[i] + g.bias[i];
      layer.bias[i] -= lr * vel.bias[i];
    }
  }
}

void check_finite_loss(double loss, std::size_t t) {
  if (!std::isfinite(loss)) {
    throw NumericError("non-finite loss at iteration t=" + std::to_string(t));
  }
}

}  // namespace

std::vector<double> reference_gradient(const ModelState& state, Modality m,
                                       const Features& batch,
                                       std::span<const std::size_t> hard_idx) {
  if (hard_idx.empty()) throw DataError("reference_gradient: empty hard set");
  BackwardResult bw = backward(state, m, batch.modality(m), batch.labels);
  std::vector<double> g_p(state.head.flat_size(), 0.0);
  for (std::size_t idx : hard_idx) {
    if (idx >= bw.head_grad_per_sample.size()) {
      throw DataError("reference_gradient: index " + std::to_string(idx) +
                      " outside batch of " +
                      std::to_string(bw.head_grad_per_sample.size()));
    }
    const auto& g = bw.head_grad_per_sample[idx];
    for (std::size_t k = 0; k < g_p.size(); ++k) g_p[k] += g[k];
  }
  for (double& v : g_p) v /= static_cast<double>(hard_idx.size());
  return g_p;
}

GaalStepResult gaal_step(const ModelState& state, const OptState& opt,
                         const Features& batch, Modality m,
                         const TrainConfig& cfg, std::size_t t) {
  if (cfg.baseline == BaselineMode::Joint) {
    throw ConfigError("gaal_step is not used by the joint baseline");
  }
  GaalStepResult out{state, opt, {}};
  StepDiag& diag = out.diag;
  diag.t = t;
  diag.modality = modality_tag(m);

  // Loss and encoder gradient at the incoming parameters.
  BackwardResult bw = backward(state, m, batch.modality(m), batch.labels);
  check_finite_loss(bw.loss, t);
  diag.loss = bw.loss;
  apply_encoder_update(out.state.encoder(m), out.opt.velocity(m),
                       bw.encoder_grads, cfg.lr_encoder, cfg.momentum);

  // Head gradient g for modality m at the just-updated encoder.
  BackwardResult bw_head =
      backward(out.state, m, batch.modality(m), batch.labels);
  const std::vector<double>& g = bw_head.head_grad;
  diag.g_norm = norm2(g);

  // Cross-modal reference gradient from the other modality's predictions at
  // the current parameters. Computed in every alternating mode so the diag
  // log carries the conflict cosine even when surgery is disabled.
  const Modality om = other(m);
  Matrix probs_other = unimodal_predict(out.state, om, batch.modality(om));
  std::vector<std::size_t> hard;
  if (cfg.surgery.enable_ugg) {
    std::vector<double> entropies(probs_other.rows);
    for (std::size_t i = 0; i < probs_other.rows; ++i) {
      entropies[i] = sample_entropy(probs_other.row(i));
    }
    hard = select_hard(entropies, cfg.surgery.lambda(om == Modality::Image));
  } else {
    hard.resize(batch.size());
    std::iota(hard.begin(), hard.end(), 0);
  }
  diag.n_hard = hard.size();
  std::vector<double> g_p = reference_gradient(out.state, om, batch, hard);
  diag.gp_norm = norm2(g_p);
  diag.cos_raw = cosine_similarity(g, g_p, cfg.surgery.gp_norm_floor);

  const bool cgs_on =
      cfg.surgery.enable_cgs && cfg.baseline != BaselineMode::AltNoSurgery;
  std::vector<double> g_tilde;
  if (cfg.baseline == BaselineMode::Orthogonal) {
    // Simplified orthogonalization baseline: always remove the g_p component,
    // even when the gradients already agree.
    g_tilde.assign(g.begin(), g.end());
    const double gp_sq = dot(g_p, g_p);
    if (gp_sq >= cfg.surgery.gp_norm_floor) {
      const double v = -dot(g_p, g) / gp_sq;
      for (std::size_t k = 0; k < g_tilde.size(); ++k) g_tilde[k] += v * g_p[k];
      diag.dual = v;
      diag.applied = true;
    }
  } else if (cgs_on) {
    SurgeryResult res = project_gradient(g, g_p, cfg.surgery.epsilon,
                                         cfg.surgery.gp_norm_floor);
    g_tilde = std::move(res.g_tilde);
    diag.dual = res.dual;
    diag.applied = res.applied;
  } else {
    g_tilde = g;
  }

  apply_head_update(out.state.head, g_tilde, cfg.lr_head);
  return out;
}

namespace {

struct JointStepOutcome {
  double loss = 0.0;
  double conflict_cos = 0.0;
};

JointStepOutcome joint_step(ModelState& state, OptState& opt,
                            const Features& batch, const TrainConfig& cfg,
                            std::size_t t) {
  const std::size_t b = batch.size();
  const std::size_t n_classes = state.head.n_classes();
  ForwardCache cache_i, cache_t;
  Matrix u_i = encode(state.encoder_image, batch.image, &cache_i);
  Matrix u_t = encode(state.encoder_tabular, batch.tabular, &cache_t);
  const std::size_t d_i = u_i.cols;
  const std::size_t d_t = u_t.cols;
  Matrix concat(b, d_i + d_t);
  for (std::size_t i = 0; i < b; ++i) {
    std::copy(u_i.row(i).begin(), u_i.row(i).end(), concat.row(i).begin());
    std::copy(u_t.row(i).begin(), u_t.row(i).end(),
              concat.row(i).begin() + static_cast<std::ptrdiff_t>(d_i));
  }
  Matrix logits = head_logits(state.head, concat);
  const double loss = cross_entropy(logits, batch.labels);
  check_finite_loss(loss, t);

  Matrix dlogits = softmax_rows(logits);
  for (std::size_t i = 0; i < b; ++i) {
    dlogits(i, static_cast<std::size_t>(batch.labels[i])) -= 1.0;
  }
  for (double& v : dlogits.data) v /= static_cast<double>(b);

  // Full fused-head gradient (weight blocks for both latents, plus bias).
  const std::size_t flat = state.head.flat_size();
  std::vector<double> g_total(flat, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double d = dlogits(i, c);
      if (d == 0.0) continue;
      for (std::size_t j = 0; j < concat.cols; ++j) {
        g_total[c * concat.cols + j] += d * concat(i, j);
      }
      g_total[n_classes * concat.cols + c] += d;
    }
  }

  const double conflict = joint_conflict_cosine(state, batch);

  // Encoder gradients: split dL/dconcat into the two latent blocks.
  Matrix dconcat = matmul(dlogits, state.head.weight);
  Matrix delta_i(b, d_i), delta_t(b, d_t);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < d_i; ++j) delta_i(i, j) = dconcat(i, j);
    for (std::size_t j = 0; j < d_t; ++j) delta_t(i, j) = dconcat(i, d_i + j);
  }
  MlpGrads grads_i = encoder_backward(state.encoder_image, cache_i, std::move(delta_i));
  MlpGrads grads_t = encoder_backward(state.encoder_tabular, cache_t, std::move(delta_t));

  apply_encoder_update(state.encoder_image, opt.velocity_image, grads_i,
                       cfg.lr_encoder, cfg.momentum);
  apply_encoder_update(state.encoder_tabular, opt.velocity_tabular, grads_t,
                       cfg.lr_encoder, cfg.momentum);
  apply_head_update(state.head, g_total, cfg.lr_head);
  return {loss, conflict};
}

void validate_train_config(const TrainConfig& cfg, const Features& train_set) {
  if (train_set.size() == 0) throw DataError("train: empty training set");
  if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(cfg.lr_encoder > 0.0) || !(cfg.lr_head > 0.0)) {
    throw ConfigError("train: learning rates must be positive");
  }
  if (!(cfg.surgery.epsilon >= 0.0)) {
    throw ConfigError("train: epsilon must be >= 0");
  }
  for (double lam : {cfg.surgery.lambda_image, cfg.surgery.lambda_tabular}) {
    if (!(lam > 0.0) || lam > 1.0) {
      throw ConfigError("train: lambda must lie in (0,1]");
    }
  }
}

}  // namespace

TrainResult train(const Features& train_set, const Features& val_set,
                  const TrainConfig& cfg) {
  validate_train_config(cfg, train_set);
  const bool joint = (cfg.baseline == BaselineMode::Joint);

  ModelDims dims;
  dims.d_img = train_set.image.cols;
  dims.d_tab = train_set.tabular.cols;
  dims.hidden = cfg.hidden;
  dims.n_classes = static_cast<std::size_t>(train_set.n_classes);

  RngStream root(cfg.seed);
  RngStream init_rng = root.child(2);
  TrainResult result;
  result.state = init_params(dims, init_rng);
  if (joint) {
    // Fused head over concatenated latents.
    const std::size_t d_latent = dims.hidden.back();
    result.state.head.weight = Matrix(dims.n_classes, 2 * d_latent);
    result.state.head.bias.assign(dims.n_classes, 0.0);
    RngStream head_rng = root.child(5);
    const double bound = std::sqrt(6.0 / static_cast<double>(2 * d_latent));
    for (double& w : result.state.head.weight.data) {
      w = head_rng.uniform(-bound, bound);
    }
  }
  if (cfg.epochs == 0) return result;

  OptState opt = make_opt_state(result.state);
  BatchPlan plan(train_set.size(), cfg.batch_size, root.child(3));

  const bool use_val = val_set.size() > 0;
  ModelState best_state = result.state;
  double best_val = -1.0;
  std::size_t epochs_since_best = 0;
  std::size_t t = 1;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_i_sum = 0.0, loss_t_sum = 0.0;
    std::size_t steps_i = 0, steps_t = 0;
    for (const auto& idx : plan.batches(epoch)) {
      Features batch = train_set.gather(idx);
      if (joint) {
        JointStepOutcome step = joint_step(result.state, opt, batch, cfg, t);
        result.conflict_cos.push_back(step.conflict_cos);
        StepDiag diag;
        diag.t = t;
        diag.modality = 'J';
        diag.loss = step.loss;
        diag.cos_raw = step.conflict_cos;
        diag.has_surgery_columns = false;
        result.diag.push_back(diag);
        loss_i_sum += step.loss;
        loss_t_sum += step.loss;
        ++steps_i;
        ++steps_t;
        ++t;
      } else {
        const Modality first = cfg.image_first ? Modality::Image : Modality::Tabular;
        for (Modality m : {first, other(first)}) {
          GaalStepResult step = gaal_step(result.state, opt, batch, m, cfg, t);
          result.state = std::move(step.state);
          opt = std::move(step.opt);
          if (m == Modality::Image) {
            loss_i_sum += step.diag.loss;
            ++steps_i;
          } else {
            loss_t_sum += step.diag.loss;
            ++steps_t;
          }
          result.diag.push_back(std::move(step.diag));
          ++t;
        }
      }
    }

    EpochMetrics em;
    em.epoch = epoch + 1;
    em.loss_image = steps_i ? loss_i_sum / static_cast<double>(steps_i) : 0.0;
    em.loss_tabular = steps_t ? loss_t_sum / static_cast<double>(steps_t) : 0.0;
    const Features& eval_set = use_val ? val_set : train_set;
    EvalReport rep = joint ? evaluate_joint(result.state, eval_set)
                           : evaluate(result.state, eval_set, cfg.fusion_weight);
    em.acc_multi = rep.acc_multi;
    em.acc_image = rep.acc_image;
    em.acc_tabular = rep.acc_tabular;
    result.epoch_metrics.push_back(em);

    if (use_val) {
      if (em.acc_multi > best_val) {
        best_val = em.acc_multi;
        best_state = result.state;
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
        if (epochs_since_best >= cfg.patience) {
          result.stopped_early = true;
          break;
        }
      }
    }
  }
  if (use_val) result.state = best_state;
  return result;
}

ModelState train_unimodal(const Features& train_set, Modality m,
                          const TrainConfig& cfg) {
  validate_train_config(cfg, train_set);
  ModelDims dims;
  dims.d_img = train_set.image.cols;
  dims.d_tab = train_set.tabular.cols;
  dims.hidden = cfg.hidden;
  dims.n_classes = static_cast<std::size_t>(train_set.n_classes);

  RngStream root(cfg.seed);
  RngStream init_rng = root.child(2);
  ModelState state = init_params(dims, init_rng);
  OptState opt = make_opt_state(state);
  BatchPlan plan(train_set.size(), cfg.batch_size, root.child(3));
  std::size_t t = 1;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : plan.batches(epoch)) {
      Features batch = train_set.gather(idx);
      BackwardResult bw = backward(state, m, batch.modality(m), batch.labels);
      check_finite_loss(bw.loss, t);
      apply_encoder_update(state.encoder(m), opt.velocity(m), bw.encoder_grads,
                           cfg.lr_encoder, cfg.momentum);
      apply_head_update(state.head, bw.head_grad, cfg.lr_head);
      ++t;
    }
  }
  return state;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_diag_csv(const std::vector<StepDiag>& diag, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write diag log " + path);
  out << "t,modality,loss,cos_raw,v,applied,n_hard,g_norm,gp_norm\n";
  for (const auto& d : diag) {
    out << d.t << ',' << d.modality << ',' << fmt(d.loss) << ','
        << fmt(d.cos_raw) << ',';
    if (d.has_surgery_columns) {
      out << fmt(d.dual) << ',' << (d.applied ? 1 : 0) << ',' << d.n_hard << ','
          << fmt(d.g_norm) << ',' << fmt(d.gp_norm);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics " + path);
  out << "epoch,acc_multi,acc_image,acc_tabular,loss_I,loss_T\n";
  for (const auto& m : metrics) {
    out << m.epoch << ',' << fmt(m.acc_multi) << ',' << fmt(m.acc_image) << ','
        << fmt(m.acc_tabular) << ',' << fmt(m.loss_image) << ','
        << fmt(m.loss_tabular) << '\n';
  }
}

}  // namespace gaal
