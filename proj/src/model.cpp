#include "gaal/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "gaal/errors.hpp"

namespace gaal {

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.data.size() + l.bias.size();
  return n;
}

Matrix encode(const MlpParams& params, const Matrix& x, ForwardCache* cache) {
  if (x.cols != params.input_dim()) {
    throw ShapeError("encode: input has " + std::to_string(x.cols) +
                     " features, encoder expects " +
                     std::to_string(params.input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_act.clear();
  }
  Matrix a = x;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const DenseLayer& layer = params.layers[k];
    Matrix z = matmul_transposed(a, layer.weight);
    for (std::size_t i = 0; i < z.rows; ++i) {
      for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += layer.bias[j];
    }
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre_act.push_back(z);
    }
    const bool is_last = (k + 1 == params.layers.size());
    if (!is_last) {
      for (double& v : z.data) v = relu(v);
    }
    a = std::move(z);
  }
  return a;
}

Matrix head_logits(const SharedClassifier& head, const Matrix& latents) {
  if (latents.cols != head.latent_dim()) {
    throw ShapeError("head: latent dim " + std::to_string(latents.cols) +
                     " does not match head input " +
                     std::to_string(head.latent_dim()));
  }
  Matrix z = matmul_transposed(latents, head.weight);
  for (std::size_t i = 0; i < z.rows; ++i) {
    for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += head.bias[j];
  }
  return z;
}

Matrix forward_logits(const ModelState& state, Modality m, const Matrix& x) {
  return head_logits(state.head, encode(state.encoder(m), x));
}

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows) {
    throw ShapeError("cross_entropy: " + std::to_string(logits.rows) +
                     " rows vs " + std::to_string(labels.size()) + " labels");
  }
  static const double kLogFloor = std::log(1e-12);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols) {
      throw DataError("cross_entropy: label " + std::to_string(y) +
                      " out of range [0," + std::to_string(logits.cols) + ")");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits.row(i)) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits.row(i)) sum += std::exp(v - mx);
    const double logp = logits(i, static_cast<std::size_t>(y)) - mx - std::log(sum);
    total -= std::max(logp, kLogFloor);
  }
  return total / static_cast<double>(logits.rows);
}

MlpGrads zero_like(const MlpParams& params) {
  MlpGrads g;
  g.layers.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    g.layers.push_back({Matrix(l.weight.rows, l.weight.cols),
                        std::vector<double>(l.bias.size(), 0.0)});
  }
  return g;
}

MlpGrads encoder_backward(const MlpParams& params, const ForwardCache& cache,
                          Matrix delta) {
  MlpGrads grads = zero_like(params);
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    // delta holds dL/d(post-activation of layer k).
    const bool is_last = (k + 1 == params.layers.size());
    if (!is_last) {
      for (std::size_t i = 0; i < delta.rows; ++i) {
        for (std::size_t j = 0; j < delta.cols; ++j) {
          delta(i, j) *= relu_grad(cache.pre_act[k](i, j));
        }
      }
    }
    DenseLayer& grad = grads.layers[k];
    const Matrix& input = cache.inputs[k];
    // dW = deltaᵀ · input, db = column sums of delta.
    for (std::size_t i = 0; i < delta.rows; ++i) {
      for (std::size_t c = 0; c < delta.cols; ++c) {
        const double d = delta(i, c);
        if (d == 0.0) continue;
        for (std::size_t j = 0; j < input.cols; ++j) {
          grad.weight(c, j) += d * input(i, j);
        }
        grad.bias[c] += d;
      }
    }
    if (k > 0) delta = matmul(delta, params.layers[k].weight);
  }
  return grads;
}

BackwardResult backward(const ModelState& state, Modality m, const Matrix& x,
                        std::span<const int> labels) {
  const MlpParams& enc = state.encoder(m);
  const std::size_t batch = x.rows;
  const std::size_t n_classes = state.head.n_classes();
  const std::size_t d_latent = state.head.latent_dim();

  ForwardCache cache;
  Matrix latents = encode(enc, x, &cache);
  Matrix logits = head_logits(state.head, latents);
  const double loss = cross_entropy(logits, labels);
  Matrix probs = softmax_rows(logits);

  BackwardResult result;
  result.loss = loss;

  // dlogits per sample: pᵢ − onehot(yᵢ). Head gradient of −log p_{i,yᵢ}:
  // weight block dlogits ⊗ latent, bias block dlogits.
  Matrix dlogits = probs;
  result.head_grad_per_sample.resize(batch);
  const std::size_t flat = state.head.flat_size();
  for (std::size_t i = 0; i < batch; ++i) {
    dlogits(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    std::vector<double>& g = result.head_grad_per_sample[i];
    g.resize(flat);
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double d = dlogits(i, c);
      for (std::size_t j = 0; j < d_latent; ++j) {
        g[c * d_latent + j] = d * latents(i, j);
      }
      g[n_classes * d_latent + c] = d;
    }
  }
  result.head_grad.assign(flat, 0.0);
  for (const auto& g : result.head_grad_per_sample) {
    for (std::size_t k = 0; k < flat; ++k) result.head_grad[k] += g[k];
  }
  for (double& v : result.head_grad) v /= static_cast<double>(batch);

  // Backprop into the encoder: dL/dlatent = (dlogits/B)·W.
  for (double& v : dlogits.data) v /= static_cast<double>(batch);
  Matrix delta = matmul(dlogits, state.head.weight);
  result.encoder_grads = encoder_backward(enc, cache, std::move(delta));
  return result;
}

ModelState init_params(const ModelDims& dims, RngStream& rng) {
  if (dims.hidden.empty() || dims.d_img == 0 || dims.d_tab == 0 ||
      dims.n_classes == 0) {
    throw ConfigError("init_params: invalid model dimensions");
  }
  auto make_mlp = [&](std::size_t d_in) {
    MlpParams mlp;
    std::size_t prev = d_in;
    for (std::size_t h : dims.hidden) {
      if (h == 0) throw ConfigError("init_params: zero hidden dim");
      DenseLayer layer{Matrix(h, prev), std::vector<double>(h, 0.0)};
      const double bound = std::sqrt(6.0 / static_cast<double>(prev));
      for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
      mlp.layers.push_back(std::move(layer));
      prev = h;
    }
    return mlp;
  };
  ModelState state;
  state.encoder_image = make_mlp(dims.d_img);
  state.encoder_tabular = make_mlp(dims.d_tab);
  const std::size_t d_latent = dims.hidden.back();
  state.head.weight = Matrix(dims.n_classes, d_latent);
  state.head.bias.assign(dims.n_classes, 0.0);
  const double bound = std::sqrt(6.0 / static_cast<double>(d_latent));
  for (double& w : state.head.weight.data) w = rng.uniform(-bound, bound);
  return state;
}

void apply_head_update(SharedClassifier& head, std::span<const double> grad,
                       double lr) {
  if (grad.size() != head.flat_size()) {
    throw ShapeError("head update: gradient length " +
                     std::to_string(grad.size()) + " vs head size " +
                     std::to_string(head.flat_size()));
  }
  const std::size_t nw = head.weight.data.size();
  for (std::size_t k = 0; k < nw; ++k) head.weight.data[k] -= lr * grad[k];
  for (std::size_t c = 0; c < head.bias.size(); ++c) {
    head.bias[c] -= lr * grad[nw + c];
  }
}

namespace {

void write_doubles(std::ofstream& out, std::span<const double> v) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::span<double> v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw DataError("checkpoint: truncated parameter data");
}

void append_mlp_dims(std::ostringstream& hdr, const MlpParams& mlp) {
  hdr << ' ' << mlp.layers.size();
  for (const auto& l : mlp.layers) {
    hdr << ' ' << l.weight.cols << ' ' << l.weight.rows;
  }
}

MlpParams read_mlp_dims(std::istringstream& hdr) {
  std::size_t n_layers = 0;
  if (!(hdr >> n_layers) || n_layers == 0) {
    throw DataError("checkpoint: bad encoder layer count");
  }
  MlpParams mlp;
  for (std::size_t k = 0; k < n_layers; ++k) {
    std::size_t d_in = 0, d_out = 0;
    if (!(hdr >> d_in >> d_out) || d_in == 0 || d_out == 0) {
      throw DataError("checkpoint: bad layer dims");
    }
    mlp.layers.push_back({Matrix(d_out, d_in), std::vector<double>(d_out, 0.0)});
  }
  return mlp;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path);
  std::ostringstream hdr;
  hdr << "GAALCKPT v1";
  append_mlp_dims(hdr, state.encoder_image);
  append_mlp_dims(hdr, state.encoder_tabular);
  hdr << ' ' << state.head.latent_dim() << ' ' << state.head.n_classes();
  out << hdr.str() << '\n';
  for (const auto* enc : {&state.encoder_image, &state.encoder_tabular}) {
    for (const auto& l : enc->layers) {
      write_doubles(out, l.weight.data);
      write_doubles(out, l.bias);
    }
  }
  write_doubles(out, state.head.weight.data);
  write_doubles(out, state.head.bias);
  if (!out) throw DataError("checkpoint: write failed for " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot read " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hdr(header);
  std::string magic, version;
  hdr >> magic >> version;
  if (magic != "GAALCKPT" || version != "v1") {
    throw DataError("checkpoint: bad header in " + path);
  }
  ModelState state;
  state.encoder_image = read_mlp_dims(hdr);
  state.encoder_tabular = read_mlp_dims(hdr);
  std::size_t d_latent = 0, n_classes = 0;
  if (!(hdr >> d_latent >> n_classes) || d_latent == 0 || n_classes == 0) {
    throw DataError("checkpoint: bad head dims");
  }
  state.head.weight = Matrix(n_classes, d_latent);
  state.head.bias.assign(n_classes, 0.0);
  for (auto* enc : {&state.encoder_image, &state.encoder_tabular}) {
    for (auto& l : enc->layers) {
      read_doubles(in, l.weight.data);
      read_doubles(in, l.bias);
    }
  }
  read_doubles(in, state.head.weight.data);
  read_doubles(in, state.head.bias);
  return state;
}

}  // namespace gaal
