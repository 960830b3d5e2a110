#include "bmil/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bmil/errors.hpp"

namespace bmil {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Fixed-association dot product with four independent chains; deterministic
// and wide enough for the vector units.
double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

void axpy(double alpha, const double* x, double* y, int n) {
  for (int k = 0; k < n; ++k) y[k] += alpha * x[k];
}

// out = x * W^T + b, W row-major dout x din.
void linear_forward(const Batch& x, const std::vector<double>& w,
                    const std::vector<double>& b, int din, int dout,
                    Batch& out) {
  out.n = x.n;
  out.dim = dout;
  out.data.resize(static_cast<std::size_t>(x.n) * dout);
  for (int i = 0; i < x.n; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (int o = 0; o < dout; ++o) {
      oi[o] = b[o] + dot(xi, w.data() + static_cast<std::size_t>(o) * din, din);
    }
  }
}

void relu_inplace(Batch& z) {
  for (double& v : z.data) v = v > 0.0 ? v : 0.0;
}

struct ForwardCache {
  std::vector<Batch> acts;  // acts[0] = input, acts[l+1] = post-activation
  std::vector<Batch> pre;   // pre-activation of hidden layers (for relu mask)
};

void forward_cached(const NetParams& p, const Batch& inputs, ForwardCache& c) {
  const int n_layers = static_cast<int>(p.weights.size());
  c.acts.resize(n_layers + 1);
  c.pre.resize(n_layers);
  c.acts[0] = inputs;
  for (int l = 0; l < n_layers; ++l) {
    linear_forward(c.acts[l], p.weights[l], p.biases[l], p.layer_dims[l],
                   p.layer_dims[l + 1], c.pre[l]);
    c.acts[l + 1] = c.pre[l];
    if (l + 1 < n_layers) relu_inplace(c.acts[l + 1]);
  }
}

// Mean-NLL head value and (optionally) the gradient wrt the raw output rows.
double head_loss(const Batch& raw, const Batch& targets, Batch* draw) {
  const int d = targets.dim;
  const int n = raw.n;
  if (raw.dim != 2 * d) throw ContractError("network output width must be 2x target dim");
  if (draw) {
    draw->n = n;
    draw->dim = raw.dim;
    draw->data.assign(static_cast<std::size_t>(n) * raw.dim, 0.0);
  }
  double total = 0.0;
  const double inv_n = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const double* out = raw.row(i);
    const double* t = targets.row(i);
    double* g = draw ? draw->row(i) : nullptr;
    double row = 0.5 * d * kLog2Pi;
    for (int j = 0; j < d; ++j) {
      const double mu = out[j];
      const double r = out[d + j];
      const double l = std::clamp(r, kLogStdMin, kLogStdMax);
      const double inv_var = std::exp(-2.0 * l);
      const double diff = t[j] - mu;
      row += l + 0.5 * diff * diff * inv_var;
      if (g) {
        g[j] = -diff * inv_var * inv_n;
        g[d + j] = (r > kLogStdMin && r < kLogStdMax)
                       ? (1.0 - diff * diff * inv_var) * inv_n
                       : 0.0;
      }
    }
    total += row;
  }
  return total * inv_n;
}

void check_batch_pair(const NetParams& p, const Batch& inputs, const Batch& targets) {
  if (inputs.n == 0) throw ContractError("empty batch");
  if (inputs.n != targets.n) throw ContractError("input/target batch sizes differ");
  if (inputs.dim != p.input_dim()) throw ContractError("batch input dim mismatch");
  if (2 * targets.dim != p.output_dim()) throw ContractError("batch target dim mismatch");
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_i32(std::ostream& os, std::int32_t v) {
  write_u32(os, static_cast<std::uint32_t>(v));
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ParseError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::int32_t read_i32(std::istream& is) { return static_cast<std::int32_t>(read_u32(is)); }

double read_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw ParseError("checkpoint truncated");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

void write_vec(std::ostream& os, const std::vector<double>& v) {
  write_u32(os, static_cast<std::uint32_t>(v.size()));
  for (double x : v) write_f64(os, x);
}

std::vector<double> read_vec(std::istream& is) {
  std::uint32_t n = read_u32(is);
  if (n > (1u << 28)) throw ParseError("checkpoint vector length implausible");
  std::vector<double> v(n);
  for (auto& x : v) x = read_f64(is);
  return v;
}

}  // namespace

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

bool NetParams::all_finite() const {
  for (const auto& w : weights)
    for (double v : w)
      if (!std::isfinite(v)) return false;
  for (const auto& b : biases)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

Normalizer Normalizer::identity(int dim) {
  Normalizer n;
  n.mean.assign(dim, 0.0);
  n.stdev.assign(dim, 1.0);
  return n;
}

Normalizer Normalizer::fit(const Batch& rows) {
  if (rows.n == 0) throw ContractError("cannot fit normalizer on empty batch");
  Normalizer n;
  n.mean.assign(rows.dim, 0.0);
  n.stdev.assign(rows.dim, 0.0);
  for (int i = 0; i < rows.n; ++i) {
    const double* r = rows.row(i);
    for (int j = 0; j < rows.dim; ++j) n.mean[j] += r[j];
  }
  for (double& m : n.mean) m /= rows.n;
  for (int i = 0; i < rows.n; ++i) {
    const double* r = rows.row(i);
    for (int j = 0; j < rows.dim; ++j) {
      const double d = r[j] - n.mean[j];
      n.stdev[j] += d * d;
    }
  }
  for (double& s : n.stdev) s = std::max(std::sqrt(s / rows.n), 1e-6);
  return n;
}

std::vector<double> Normalizer::apply(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) throw ContractError("normalizer dim mismatch");
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / stdev[j];
  return z;
}

std::vector<double> Normalizer::invert(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != dim()) throw ContractError("normalizer dim mismatch");
  std::vector<double> x(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) x[j] = z[j] * stdev[j] + mean[j];
  return x;
}

void Normalizer::apply_rows(Batch& rows) const {
  if (rows.dim != dim()) throw ContractError("normalizer dim mismatch");
  for (int i = 0; i < rows.n; ++i) {
    double* r = rows.row(i);
    for (int j = 0; j < rows.dim; ++j) r[j] = (r[j] - mean[j]) / stdev[j];
  }
}

DiagGaussian Normalizer::denormalize(const DiagGaussian& g) const {
  if (g.dim() != dim()) throw ContractError("normalizer dim mismatch");
  DiagGaussian out;
  out.mean.resize(g.mean.size());
  out.log_std.resize(g.log_std.size());
  for (int j = 0; j < g.dim(); ++j) {
    out.mean[j] = g.mean[j] * stdev[j] + mean[j];
    out.log_std[j] = g.log_std[j] + std::log(stdev[j]);
  }
  return out;
}

NetParams make_net(const std::vector<int>& layer_dims, Rng& rng) {
  if (layer_dims.size() < 2) throw ContractError("network needs at least one layer");
  for (int d : layer_dims)
    if (d <= 0) throw ContractError("layer dims must be positive");
  NetParams p;
  p.layer_dims = layer_dims;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
    for (double& x : w) x = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0);
  }
  return p;
}

AdamState make_adam(const NetParams& params, double lr, double beta1,
                    double beta2, double eps) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (const auto& w : params.weights) {
    s.m_weights.emplace_back(w.size(), 0.0);
    s.v_weights.emplace_back(w.size(), 0.0);
  }
  for (const auto& b : params.biases) {
    s.m_biases.emplace_back(b.size(), 0.0);
    s.v_biases.emplace_back(b.size(), 0.0);
  }
  return s;
}

DiagGaussian net_forward(const NetParams& params, std::span<const double> input) {
  if (static_cast<int>(input.size()) != params.input_dim())
    throw ContractError("net_forward: input dim mismatch");
  if (params.output_dim() % 2 != 0)
    throw ContractError("net_forward: output layer width must be even");
  const int n_layers = static_cast<int>(params.weights.size());
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  for (int l = 0; l < n_layers; ++l) {
    const int din = params.layer_dims[l];
    const int dout = params.layer_dims[l + 1];
    next.assign(dout, 0.0);
    for (int o = 0; o < dout; ++o) {
      next[o] = params.biases[l][o] +
                dot(cur.data(), params.weights[l].data() + static_cast<std::size_t>(o) * din, din);
    }
    if (l + 1 < n_layers)
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    cur.swap(next);
  }
  const int d = params.output_dim() / 2;
  DiagGaussian g;
  g.mean.assign(cur.begin(), cur.begin() + d);
  g.log_std.resize(d);
  for (int j = 0; j < d; ++j) g.log_std[j] = std::clamp(cur[d + j], kLogStdMin, kLogStdMax);
  return g;
}

Batch net_forward_raw(const NetParams& params, const Batch& inputs) {
  if (inputs.dim != params.input_dim())
    throw ContractError("net_forward_raw: input dim mismatch");
  ForwardCache c;
  forward_cached(params, inputs, c);
  return c.acts.back();
}

double gaussian_nll(const DiagGaussian& dist, std::span<const double> x) {
  if (static_cast<int>(x.size()) != dist.dim())
    throw ContractError("gaussian_nll: dim mismatch");
  double v = 0.5 * dist.dim() * kLog2Pi;
  for (int j = 0; j < dist.dim(); ++j) {
    const double diff = x[j] - dist.mean[j];
    v += dist.log_std[j] + 0.5 * diff * diff * std::exp(-2.0 * dist.log_std[j]);
  }
  return v;
}

std::vector<double> gaussian_sample(const DiagGaussian& dist, Rng& rng) {
  std::vector<double> x(dist.dim());
  for (int j = 0; j < dist.dim(); ++j)
    x[j] = dist.mean[j] + std::exp(dist.log_std[j]) * rng.normal();
  return x;
}

double gaussian_entropy(const DiagGaussian& dist) {
  double h = 0.5 * dist.dim() * (1.0 + kLog2Pi);
  for (double l : dist.log_std) h += l;
  return h;
}

double nll_loss(const NetParams& params, const Batch& inputs, const Batch& targets) {
  check_batch_pair(params, inputs, targets);
  ForwardCache c;
  forward_cached(params, inputs, c);
  return head_loss(c.acts.back(), targets, nullptr);
}

double grad_nll(const NetParams& params, const Batch& inputs,
                const Batch& targets, NetParams& grad) {
  check_batch_pair(params, inputs, targets);
  ForwardCache c;
  forward_cached(params, inputs, c);

  Batch delta;
  const double loss = head_loss(c.acts.back(), targets, &delta);
  if (!std::isfinite(loss)) throw TrainingError("non-finite training loss");

  grad.layer_dims = params.layer_dims;
  grad.weights.resize(params.weights.size());
  grad.biases.resize(params.biases.size());

  const int n_layers = static_cast<int>(params.weights.size());
  Batch dx;
  for (int l = n_layers - 1; l >= 0; --l) {
    const int din = params.layer_dims[l];
    const int dout = params.layer_dims[l + 1];
    auto& dw = grad.weights[l];
    auto& db = grad.biases[l];
    dw.assign(static_cast<std::size_t>(dout) * din, 0.0);
    db.assign(dout, 0.0);
    const Batch& x = c.acts[l];
    for (int o = 0; o < dout; ++o) {
      double* dwo = dw.data() + static_cast<std::size_t>(o) * din;
      double bsum = 0.0;
      for (int i = 0; i < delta.n; ++i) {
        const double dz = delta.row(i)[o];
        if (dz != 0.0) axpy(dz, x.row(i), dwo, din);
        bsum += dz;
      }
      db[o] = bsum;
    }
    if (l > 0) {
      dx.n = delta.n;
      dx.dim = din;
      dx.data.assign(static_cast<std::size_t>(delta.n) * din, 0.0);
      for (int i = 0; i < delta.n; ++i) {
        double* dxi = dx.row(i);
        const double* di = delta.row(i);
        for (int o = 0; o < dout; ++o) {
          if (di[o] != 0.0)
            axpy(di[o], params.weights[l].data() + static_cast<std::size_t>(o) * din, dxi, din);
        }
      }
      // ReLU mask of the previous hidden layer.
      const Batch& pre = c.pre[l - 1];
      for (std::size_t k = 0; k < dx.data.size(); ++k)
        if (pre.data[k] <= 0.0) dx.data[k] = 0.0;
      delta = dx;
    }
  }
  return loss;
}

void adam_step(NetParams& params, const NetParams& grad, AdamState& state) {
  if (grad.layer_dims != params.layer_dims)
    throw ContractError("adam_step: gradient shape mismatch");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l)
    update(params.weights[l], grad.weights[l], state.m_weights[l], state.v_weights[l]);
  for (std::size_t l = 0; l < params.biases.size(); ++l)
    update(params.biases[l], grad.biases[l], state.m_biases[l], state.v_biases[l]);
  if (!params.all_finite()) throw TrainingError("non-finite parameter after optimizer step");
}

void save_net(const std::string& path, const NetParams& params,
              const Normalizer& in_norm, const Normalizer& out_norm) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open checkpoint for writing: " + path);
  os.write("BMILNET1", 8);
  write_u32(os, static_cast<std::uint32_t>(params.layer_dims.size()));
  for (int d : params.layer_dims) write_i32(os, d);
  write_vec(os, in_norm.mean);
  write_vec(os, in_norm.stdev);
  write_vec(os, out_norm.mean);
  write_vec(os, out_norm.stdev);
  for (const auto& w : params.weights)
    for (double v : w) write_f64(os, v);
  for (const auto& b : params.biases)
    for (double v : b) write_f64(os, v);
  if (!os) throw ValidationError("checkpoint write failed: " + path);
}

void load_net(const std::string& path, NetParams& params, Normalizer& in_norm,
              Normalizer& out_norm) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "BMILNET1", 8) != 0)
    throw ParseError("bad checkpoint magic: " + path);
  const std::uint32_t n_dims = read_u32(is);
  if (n_dims < 2 || n_dims > 64) throw ParseError("bad checkpoint layer count");
  params.layer_dims.resize(n_dims);
  for (auto& d : params.layer_dims) {
    d = read_i32(is);
    if (d <= 0) throw ParseError("bad checkpoint layer dim");
  }
  in_norm.mean = read_vec(is);
  in_norm.stdev = read_vec(is);
  out_norm.mean = read_vec(is);
  out_norm.stdev = read_vec(is);
  params.weights.clear();
  params.biases.clear();
  for (std::size_t l = 0; l + 1 < params.layer_dims.size(); ++l) {
    std::vector<double> w(static_cast<std::size_t>(params.layer_dims[l + 1]) * params.layer_dims[l]);
    for (auto& v : w) v = read_f64(is);
    params.weights.push_back(std::move(w));
  }
  for (std::size_t l = 0; l + 1 < params.layer_dims.size(); ++l) {
    std::vector<double> b(params.layer_dims[l + 1]);
    for (auto& v : b) v = read_f64(is);
    params.biases.push_back(std::move(b));
  }
  is.peek();
  if (!is.eof()) throw ParseError("trailing bytes in checkpoint: " + path);
}

}  // namespace bmil
