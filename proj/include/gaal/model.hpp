#pragma once

#include <span>
#include <string>
#include <vector>

#include "gaal/matrix.hpp"
#include "gaal/rng.hpp"

namespace gaal {

enum class Modality { Image, Tabular };

inline char modality_tag(Modality m) { return m == Modality::Image ? 'I' : 'T'; }
inline Modality other(Modality m) {
  return m == Modality::Image ? Modality::Tabular : Modality::Image;
}

/// One dense layer, weight stored out×in.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
};

/// MLP encoder parameters. ReLU on all hidden layers, identity on the last.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().weight.cols; }
  std::size_t output_dim() const { return layers.back().weight.rows; }
  std::size_t param_count() const;
};

/// The shared linear classifier head consuming either modality's latent.
struct SharedClassifier {
  Matrix weight;  // Y × d_latent
  std::vector<double> bias;

  std::size_t n_classes() const { return weight.rows; }
  std::size_t latent_dim() const { return weight.cols; }
  /// Flattened (weight row-major, then bias) parameter count.
  std::size_t flat_size() const { return weight.data.size() + bias.size(); }
};

struct ModelState {
  MlpParams encoder_image;
  MlpParams encoder_tabular;
  SharedClassifier head;

  const MlpParams& encoder(Modality m) const {
    return m == Modality::Image ? encoder_image : encoder_tabular;
  }
  MlpParams& encoder(Modality m) {
    return m == Modality::Image ? encoder_image : encoder_tabular;
  }
};

/// Per-layer inputs and pre-activations retained by encode() for backprop.
struct ForwardCache {
  std::vector<Matrix> inputs;   // inputs[k] feeds layer k
  std::vector<Matrix> pre_act;  // pre_act[k] = inputs[k]·Wᵀ + b
};

Matrix encode(const MlpParams& params, const Matrix& x, ForwardCache* cache = nullptr);

Matrix head_logits(const SharedClassifier& head, const Matrix& latents);

Matrix forward_logits(const ModelState& state, Modality m, const Matrix& x);

/// Mean negative log-likelihood; log-probabilities clamped at ln(1e-12).
double cross_entropy(const Matrix& logits, std::span<const int> labels);

struct MlpGrads {
  std::vector<DenseLayer> layers;  // same shapes as the encoder
};

MlpGrads zero_like(const MlpParams& params);

/// Backprop a loss gradient w.r.t. the encoder output through the cached
/// forward pass; delta is dL/d(output), batch-scaled by the caller.
MlpGrads encoder_backward(const MlpParams& params, const ForwardCache& cache,
                          Matrix delta);

struct BackwardResult {
  MlpGrads encoder_grads;
  /// Per-sample gradient of −log p_{i,yᵢ} w.r.t. the head, flattened
  /// (weight row-major, then bias). Their mean is the batch head gradient.
  std::vector<std::vector<double>> head_grad_per_sample;
  std::vector<double> head_grad;  // batch mean, same layout
  double loss = 0.0;
};

/// Exact gradients of the cross-entropy w.r.t. the active modality's encoder
/// and the shared head, with per-sample head gradients exposed.
BackwardResult backward(const ModelState& state, Modality m, const Matrix& x,
                        std::span<const int> labels);

struct ModelDims {
  std::size_t d_img = 64;
  std::size_t d_tab = 14;
  std::vector<std::size_t> hidden = {64, 32};  // last entry is d_latent
  std::size_t n_classes = 4;
};

/// Fan-in-scaled uniform init, biases zero, deterministic under the stream.
ModelState init_params(const ModelDims& dims, RngStream& rng);

void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

void apply_head_update(SharedClassifier& head, std::span<const double> grad, double lr);

}  // namespace gaal
