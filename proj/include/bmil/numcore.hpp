#pragma once

#include <span>
#include <string>
#include <vector>

#include "bmil/rng.hpp"

namespace bmil {

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

// Feed-forward network parameters. ReLU on hidden layers, identity output.
// weights[l] is row-major, shape layer_dims[l+1] x layer_dims[l].
struct NetParams {
  std::vector<int> layer_dims;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t parameter_count() const;
  bool all_finite() const;
};

// Diagonal Gaussian over R^d. Plain value type; net_forward clamps the
// log_std head to [kLogStdMin, kLogStdMax], derived distributions (widened,
// denormalized) may fall outside the clamp range.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> log_std;

  int dim() const { return static_cast<int>(mean.size()); }
};

struct AdamState {
  std::vector<std::vector<double>> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Row-major batch of vectors.
struct Batch {
  int n = 0;
  int dim = 0;
  std::vector<double> data;

  Batch() = default;
  Batch(int n_, int dim_) : n(n_), dim(dim_), data(static_cast<std::size_t>(n_) * dim_, 0.0) {}
  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * dim; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * dim; }
};

// Per-dimension affine standardization fit once on demonstration data.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stdev;

  static Normalizer identity(int dim);
  static Normalizer fit(const Batch& rows);  // stdev floored at 1e-6

  int dim() const { return static_cast<int>(mean.size()); }
  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> invert(std::span<const double> z) const;
  void apply_rows(Batch& rows) const;
  // Push the affine map through a Gaussian in normalized space.
  DiagGaussian denormalize(const DiagGaussian& g) const;
};

// Glorot-uniform weights, zero biases.
NetParams make_net(const std::vector<int>& layer_dims, Rng& rng);

AdamState make_adam(const NetParams& params, double lr = 1e-3,
                    double beta1 = 0.9, double beta2 = 0.999,
                    double eps = 1e-8);

// Forward pass; output layer width must be 2d, split into mean and clamped
// log_std halves.
DiagGaussian net_forward(const NetParams& params, std::span<const double> input);

// Batched forward returning the raw (pre-split, pre-clamp) output rows.
Batch net_forward_raw(const NetParams& params, const Batch& inputs);

double gaussian_nll(const DiagGaussian& dist, std::span<const double> x);
std::vector<double> gaussian_sample(const DiagGaussian& dist, Rng& rng);
double gaussian_entropy(const DiagGaussian& dist);

// Mean negative log-likelihood of `targets` under the network heads at
// `inputs`. Used directly as the finite-difference probe.
double nll_loss(const NetParams& params, const Batch& inputs, const Batch& targets);

// Exact reverse-mode gradient of nll_loss. Returns the loss; `grad` is
// resized/overwritten to the shape of `params`.
double grad_nll(const NetParams& params, const Batch& inputs,
                const Batch& targets, NetParams& grad);

// In-place Adam update with bias correction. Throws TrainingError if any
// parameter goes non-finite.
void adam_step(NetParams& params, const NetParams& grad, AdamState& state);

// Checkpoint format: magic "BMILNET1", layer_dims as little-endian int32,
// input/output normalizer vectors, then all weights then biases as
// little-endian float64 in layer order. Round-trips are bit-exact.
void save_net(const std::string& path, const NetParams& params,
              const Normalizer& in_norm, const Normalizer& out_norm);
void load_net(const std::string& path, NetParams& params, Normalizer& in_norm,
              Normalizer& out_norm);

}  // namespace bmil
