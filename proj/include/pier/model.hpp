// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal pre-norm causal transformer over byte tokens, with exact
// forward loss and hand-written backward pass over a flat parameter vector.
//
// Parameter layout (row-major, weights stored as [in, out]):
//   wte[V, C]  wpe[L, C]
//   per block: ln1.g[C] ln1.b[C] qkv.w[C, 3C] qkv.b[3C] o.w[C, C] o.b[C]
//              ln2.g[C] ln2.b[C] fc.w[C, 4C] fc.b[4C] proj.w[4C, C] proj.b[C]
//   lnf.g[C] lnf.b[C]
// The output head is tied to wte.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pier/error.hpp"

namespace pier {

enum class Precision { Single, Double };

inline std::string_view to_string(Precision p) {
  return p == Precision::Single ? "single" : "double";
}

inline Precision parse_precision(std::string_view s) {
  if (s == "single" || s == "float" || s == "f32") return Precision::Single;
  if (s == "double" || s == "f64") return Precision::Double;
  throw ConfigError("precision: expected 'single' or 'double', got '" + std::string(s) + "'");
}

// Flat vector of model parameters or gradients.
template <class T>
using ParamVector = std::vector<T>;

template <class T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t embed_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t seq_len = 32;
  Precision precision = Precision::Double;

  void validate() const {
    if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
    if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
    if (num_layers == 0) throw ConfigError("num_layers must be positive");
    if (num_heads == 0) throw ConfigError("num_heads must be positive");
    if (seq_len == 0) throw ConfigError("seq_len must be positive");
    if (embed_dim % num_heads != 0) throw ConfigError("embed_dim must be divisible by num_heads");
  }

  std::size_t head_dim() const { return embed_dim / num_heads; }

  std::size_t block_param_count() const {
    const std::size_t c = embed_dim;
    return 12 * c * c + 13 * c;
  }

  std::size_t param_count() const {
    const std::size_t c = embed_dim;
    return vocab_size * c + seq_len * c + num_layers * block_param_count() + 2 * c;
  }

  bool operator==(const ModelConfig&) const = default;
};

// Offsets of every tensor inside the flat parameter vector.
struct ParamLayout {
  struct Block {
    std::size_t ln1_g, ln1_b, qkv_w, qkv_b, o_w, o_b, ln2_g, ln2_b, fc_w, fc_b, proj_w, proj_b;
  };

  std::size_t wte = 0, wpe = 0, lnf_g = 0, lnf_b = 0, total = 0;
  std::vector<Block> blocks;

  explicit ParamLayout(const ModelConfig& cfg) {
    const std::size_t c = cfg.embed_dim;
    std::size_t off = 0;
    auto take = [&off](std::size_t n) {
      const std::size_t at = off;
      off += n;
      return at;
    };
    wte = take(cfg.vocab_size * c);
    wpe = take(cfg.seq_len * c);
    blocks.resize(cfg.num_layers);
    for (auto& b : blocks) {
      b.ln1_g = take(c);
      b.ln1_b = take(c);
      b.qkv_w = take(c * 3 * c);
      b.qkv_b = take(3 * c);
      b.o_w = take(c * c);
      b.o_b = take(c);
      b.ln2_g = take(c);
      b.ln2_b = take(c);
      b.fc_w = take(c * 4 * c);
      b.fc_b = take(4 * c);
      b.proj_w = take(4 * c * c);
      b.proj_b = take(c);
    }
    lnf_g = take(c);
    lnf_b = take(c);
    total = off;
  }
};

// Token matrix of shape (batch_size, seq_len + 1); targets are inputs shifted by one.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> tokens;

  std::size_t row_stride() const { return seq_len + 1; }
  std::int32_t input(std::size_t b, std::size_t i) const { return tokens[b * row_stride() + i]; }
  std::int32_t target(std::size_t b, std::size_t i) const { return tokens[b * row_stride() + i + 1]; }

  // Rows [first, first + count) as a new batch.
  Batch slice(std::size_t first, std::size_t count) const {
    Batch out{count, seq_len, {}};
    const auto begin = tokens.begin() + static_cast<std::ptrdiff_t>(first * row_stride());
    out.tokens.assign(begin, begin + static_cast<std::ptrdiff_t>(count * row_stride()));
    return out;
  }
};

inline Batch concat(const Batch& a, const Batch& b) {
  if (a.seq_len != b.seq_len) throw ConfigError("concat: seq_len mismatch");
  Batch out{a.batch_size + b.batch_size, a.seq_len, a.tokens};
  out.tokens.insert(out.tokens.end(), b.tokens.begin(), b.tokens.end());
  return out;
}

// GPT-2 style init: N(0, 0.02) for matrices and embeddings, zero biases, unit LN gains.
template <class T>
ParamVector<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const ParamLayout lay(cfg);
  const std::size_t c = cfg.embed_dim;
  ParamVector<T> p(lay.total, T(0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto fill_normal = [&](std::size_t off, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[off + i] = static_cast<T>(normal(rng));
  };
  auto fill_ones = [&](std::size_t off, std::size_t n) { std::fill_n(p.begin() + off, n, T(1)); };
  fill_normal(lay.wte, cfg.vocab_size * c);
  fill_normal(lay.wpe, cfg.seq_len * c);
  for (const auto& b : lay.blocks) {
    fill_ones(b.ln1_g, c);
    fill_normal(b.qkv_w, c * 3 * c);
    fill_normal(b.o_w, c * c);
    fill_ones(b.ln2_g, c);
    fill_normal(b.fc_w, c * 4 * c);
    fill_normal(b.proj_w, 4 * c * c);
  }
  fill_ones(lay.lnf_g, c);
  return p;
}

template <class T>
struct LossAndGrad {
  T loss;
  ParamVector<T> grad;
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using CMatMap = Eigen::Map<const RowMat<T>>;
template <class T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using CStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <class T>
using CVecMap = Eigen::Map<const RowVec<T>>;
template <class T>
using VecMap = Eigen::Map<RowVec<T>>;

constexpr double kLayerNormEps = 1e-5;

constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC = 0.044715;

// tanh(z) = 1 - 2 / (exp(2z) + 1), evaluated with Eigen's vectorized exp.
template <class T>
void tanh_inner(const T* x, T* th, std::size_t n) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  Eigen::Map<const Arr> xa(x, static_cast<Eigen::Index>(n));
  Eigen::Map<Arr> out(th, static_cast<Eigen::Index>(n));
  const Arr z = T(2 * kGeluK) * (xa + T(kGeluC) * xa.cube());
  out = T(1) - T(2) / (z.exp() + T(1));
}

// act = gelu(x); th receives the inner tanh for reuse in backward.
template <class T>
void gelu_forward(const T* x, T* act, T* th, std::size_t n) {
  tanh_inner(x, th, n);
  for (std::size_t i = 0; i < n; ++i) act[i] = T(0.5) * x[i] * (T(1) + th[i]);
}

template <class T>
void gelu_backward(const T* x, const T* th, T* d, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const T sech2 = T(1) - th[i] * th[i];
    const T inner = T(kGeluK) * (T(1) + T(3 * kGeluC) * x[i] * x[i]);
    d[i] *= T(0.5) * (T(1) + th[i]) + T(0.5) * x[i] * sech2 * inner;
  }
}

// out = LN(in) * g + b, row-wise; caches mean and reciprocal std.
template <class T>
void layernorm_forward(const T* in, const T* g, const T* b, T* out, T* mean, T* rstd,
                       std::size_t rows, std::size_t c) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = in + r * c;
    T m = 0;
    for (std::size_t i = 0; i < c; ++i) m += x[i];
    m /= T(c);
    T v = 0;
    for (std::size_t i = 0; i < c; ++i) v += (x[i] - m) * (x[i] - m);
    v /= T(c);
    const T s = T(1) / std::sqrt(v + T(kLayerNormEps));
    T* y = out + r * c;
    for (std::size_t i = 0; i < c; ++i) y[i] = (x[i] - m) * s * g[i] + b[i];
    mean[r] = m;
    rstd[r] = s;
  }
}

// Accumulates into din, dg, db.
template <class T>
void layernorm_backward(const T* dout, const T* in, const T* g, const T* mean, const T* rstd,
                        T* din, T* dg, T* db, std::size_t rows, std::size_t c) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dy = dout + r * c;
    const T* x = in + r * c;
    const T m = mean[r];
    const T s = rstd[r];
    T dnorm_mean = 0;
    T dnorm_norm_mean = 0;
    for (std::size_t i = 0; i < c; ++i) {
      const T norm = (x[i] - m) * s;
      const T dnorm = g[i] * dy[i];
      dnorm_mean += dnorm;
      dnorm_norm_mean += dnorm * norm;
    }
    dnorm_mean /= T(c);
    dnorm_norm_mean /= T(c);
    T* dx = din + r * c;
    for (std::size_t i = 0; i < c; ++i) {
      const T norm = (x[i] - m) * s;
      const T dnorm = g[i] * dy[i];
      db[i] += dy[i];
      dg[i] += norm * dy[i];
      dx[i] += s * (dnorm - dnorm_mean - norm * dnorm_norm_mean);
    }
  }
}

// out[rows, n_out] = in[rows, n_in] * w[n_in, n_out] + bias
template <class T>
void linear_forward(const T* in, const T* w, const T* bias, T* out, std::size_t rows,
                    std::size_t n_in, std::size_t n_out) {
  MatMap<T> y(out, rows, n_out);
  y.noalias() = CMatMap<T>(in, rows, n_in) * CMatMap<T>(w, n_in, n_out);
  y.rowwise() += CVecMap<T>(bias, n_out);
}

// Accumulates dw, dbias and din (din may be null).
template <class T>
void linear_backward(const T* dout, const T* in, const T* w, T* din, T* dw, T* dbias,
                     std::size_t rows, std::size_t n_in, std::size_t n_out) {
  CMatMap<T> dy(dout, rows, n_out);
  MatMap<T>(dw, n_in, n_out).noalias() += CMatMap<T>(in, rows, n_in).transpose() * dy;
  VecMap<T>(dbias, n_out) += dy.colwise().sum();
  if (din != nullptr) {
    MatMap<T>(din, rows, n_in).noalias() += dy * CMatMap<T>(w, n_in, n_out).transpose();
  }
}

// Scratch storage aligned for full-width packets, so vectorized kernels take
// the same code path (and produce the same bits) wherever the buffer lives.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

template <class T>
struct BlockActs {
  Buffer<T> x_in, ln1, ln1_mean, ln1_rstd, qkv, att, y, x_mid, ln2, ln2_mean, ln2_rstd,
      fc, fc_tanh, fc_act;
};

template <class T>
struct Activations {
  std::vector<BlockActs<T>> blocks;
  Buffer<T> x_out, lnf, lnf_mean, lnf_rstd, probs;
  // scratch reused across calls
  Buffer<T> grad, branch_out, dlogits, dlnf, dx, dtmp, dfc_act, dy, dqkv;
};

template <class T>
void check_inputs(std::span<const T> params, const ModelConfig& cfg, const Batch& batch) {
  cfg.validate();
  if (params.size() != cfg.param_count()) {
    throw ConfigError("parameter length " + std::to_string(params.size()) +
                      " does not match model parameter count " + std::to_string(cfg.param_count()));
  }
  if (batch.seq_len != cfg.seq_len) throw ConfigError("batch seq_len does not match model seq_len");
  if (batch.batch_size == 0) throw ConfigError("batch is empty");
  if (batch.tokens.size() != batch.batch_size * batch.row_stride()) {
    throw ConfigError("batch token matrix has wrong shape");
  }
  for (auto tok : batch.tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= cfg.vocab_size) {
      throw ConfigError("token id " + std::to_string(tok) + " outside vocabulary");
    }
  }
}

template <class T>
T forward(std::span<const T> params, const ModelConfig& cfg, const Batch& batch,
          Activations<T>& acts) {
  const ParamLayout lay(cfg);
  const std::size_t B = batch.batch_size, L = cfg.seq_len, C = cfg.embed_dim;
  const std::size_t V = cfg.vocab_size, NH = cfg.num_heads, HS = cfg.head_dim();
  const std::size_t N = B * L;
  const T* p = params.data();
  const T scale = T(1) / std::sqrt(T(HS));

  Buffer<T> x = std::move(acts.x_out);
  x.resize(N * C);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < L; ++t) {
      const T* te = p + lay.wte + static_cast<std::size_t>(batch.input(b, t)) * C;
      const T* pe = p + lay.wpe + t * C;
      T* out = x.data() + (b * L + t) * C;
      for (std::size_t i = 0; i < C; ++i) out[i] = te[i] + pe[i];
    }
  }

  acts.blocks.resize(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const auto& w = lay.blocks[l];
    auto& a = acts.blocks[l];
    std::swap(a.x_in, x);
    a.ln1.resize(N * C);
    a.ln1_mean.resize(N);
    a.ln1_rstd.resize(N);
    layernorm_forward(a.x_in.data(), p + w.ln1_g, p + w.ln1_b, a.ln1.data(), a.ln1_mean.data(),
                      a.ln1_rstd.data(), N, C);
    a.qkv.resize(N * 3 * C);
    linear_forward(a.ln1.data(), p + w.qkv_w, p + w.qkv_b, a.qkv.data(), N, C, 3 * C);

    a.att.assign(B * NH * L * L, T(0));
    a.y.resize(N * C);
    for (std::size_t b = 0; b < B; ++b) {
      const T* base = a.qkv.data() + b * L * 3 * C;
      for (std::size_t h = 0; h < NH; ++h) {
        CStridedMap<T> q(base + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        CStridedMap<T> k(base + C + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        CStridedMap<T> v(base + 2 * C + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        MatMap<T> att(a.att.data() + (b * NH + h) * L * L, L, L);
        att.noalias() = (q * k.transpose()) * scale;
        for (std::size_t i = 0; i < L; ++i) {
          auto row = att.row(static_cast<Eigen::Index>(i)).array();
          auto live = row.head(static_cast<Eigen::Index>(i + 1));
          const T mx = live.maxCoeff();
          live = (live - mx).exp();
          T sum = 0;
          for (std::size_t j = 0; j <= i; ++j) sum += att(i, j);
          live *= T(1) / sum;
          row.tail(static_cast<Eigen::Index>(L - i - 1)).setZero();
        }
        StridedMap<T> y(a.y.data() + b * L * C + h * HS, L, HS, Eigen::OuterStride<>(C));
        y.noalias() = att * v;
      }
    }

    auto& att_out = acts.branch_out;
    att_out.resize(N * C);
    linear_forward(a.y.data(), p + w.o_w, p + w.o_b, att_out.data(), N, C, C);
    a.x_mid.resize(N * C);
    for (std::size_t i = 0; i < N * C; ++i) a.x_mid[i] = a.x_in[i] + att_out[i];

    a.ln2.resize(N * C);
    a.ln2_mean.resize(N);
    a.ln2_rstd.resize(N);
    layernorm_forward(a.x_mid.data(), p + w.ln2_g, p + w.ln2_b, a.ln2.data(), a.ln2_mean.data(),
                      a.ln2_rstd.data(), N, C);
    a.fc.resize(N * 4 * C);
    linear_forward(a.ln2.data(), p + w.fc_w, p + w.fc_b, a.fc.data(), N, C, 4 * C);
    a.fc_act.resize(N * 4 * C);
    a.fc_tanh.resize(N * 4 * C);
    gelu_forward(a.fc.data(), a.fc_act.data(), a.fc_tanh.data(), a.fc.size());

    auto& mlp_out = acts.branch_out;
    linear_forward(a.fc_act.data(), p + w.proj_w, p + w.proj_b, mlp_out.data(), N, 4 * C, C);
    x.resize(N * C);
    for (std::size_t i = 0; i < N * C; ++i) x[i] = a.x_mid[i] + mlp_out[i];
  }

  acts.x_out = std::move(x);
  acts.lnf.resize(N * C);
  acts.lnf_mean.resize(N);
  acts.lnf_rstd.resize(N);
  layernorm_forward(acts.x_out.data(), p + lay.lnf_g, p + lay.lnf_b, acts.lnf.data(),
                    acts.lnf_mean.data(), acts.lnf_rstd.data(), N, C);

  acts.probs.resize(N * V);
  MatMap<T> logits(acts.probs.data(), N, V);
  logits.noalias() = CMatMap<T>(acts.lnf.data(), N, C) * CMatMap<T>(p + lay.wte, V, C).transpose();

  T loss = 0;
  for (std::size_t n = 0; n < N; ++n) {
    T* row = acts.probs.data() + n * V;
    const T mx = *std::max_element(row, row + V);
    const auto tgt = static_cast<std::size_t>(batch.target(n / L, n % L));
    const T shifted_tgt = row[tgt] - mx;
    Eigen::Map<Eigen::Array<T, 1, Eigen::Dynamic>> r(row, static_cast<Eigen::Index>(V));
    r = (r - mx).exp();
    T sum = 0;
    for (std::size_t j = 0; j < V; ++j) sum += row[j];
    r *= T(1) / sum;
    loss += std::log(sum) - shifted_tgt;
  }
  return loss / T(N);
}

// Writes d(loss)/d(params) into grad (resized and zeroed here).
template <class T>
void backward(std::span<const T> params, const ModelConfig& cfg, const Batch& batch,
              Activations<T>& acts, ParamVector<T>& grad) {
  const ParamLayout lay(cfg);
  const std::size_t B = batch.batch_size, L = cfg.seq_len, C = cfg.embed_dim;
  const std::size_t V = cfg.vocab_size, NH = cfg.num_heads, HS = cfg.head_dim();
  const std::size_t N = B * L;
  const T* p = params.data();
  const T scale = T(1) / std::sqrt(T(HS));

  auto& gbuf = acts.grad;
  gbuf.assign(params.size(), T(0));
  T* g = gbuf.data();

  auto& dlogits = acts.dlogits;
  dlogits = acts.probs;
  const T inv_n = T(1) / T(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto tgt = static_cast<std::size_t>(batch.target(n / L, n % L));
    dlogits[n * V + tgt] -= T(1);
  }
  for (auto& d : dlogits) d *= inv_n;

  CMatMap<T> dl(dlogits.data(), N, V);
  MatMap<T>(g + lay.wte, V, C).noalias() += dl.transpose() * CMatMap<T>(acts.lnf.data(), N, C);
  acts.dlnf.resize(N * C);
  MatMap<T>(acts.dlnf.data(), N, C).noalias() = dl * CMatMap<T>(p + lay.wte, V, C);

  auto& dx = acts.dx;
  dx.assign(N * C, T(0));
  layernorm_backward(acts.dlnf.data(), acts.x_out.data(), p + lay.lnf_g, acts.lnf_mean.data(),
                     acts.lnf_rstd.data(), dx.data(), g + lay.lnf_g, g + lay.lnf_b, N, C);

  auto& dtmp = acts.dtmp;
  auto& dfc_act = acts.dfc_act;
  auto& dy = acts.dy;
  auto& dqkv = acts.dqkv;
  RowMat<T> datt(L, L);
  for (std::size_t li = cfg.num_layers; li-- > 0;) {
    const auto& w = lay.blocks[li];
    const auto& a = acts.blocks[li];

    // MLP branch; dx holds the gradient w.r.t. this block's output.
    dfc_act.assign(N * 4 * C, T(0));
    linear_backward(dx.data(), a.fc_act.data(), p + w.proj_w, dfc_act.data(), g + w.proj_w,
                    g + w.proj_b, N, 4 * C, C);
    gelu_backward(a.fc.data(), a.fc_tanh.data(), dfc_act.data(), dfc_act.size());
    dtmp.assign(N * C, T(0));
    linear_backward(dfc_act.data(), a.ln2.data(), p + w.fc_w, dtmp.data(), g + w.fc_w,
                    g + w.fc_b, N, C, 4 * C);
    layernorm_backward(dtmp.data(), a.x_mid.data(), p + w.ln2_g, a.ln2_mean.data(),
                       a.ln2_rstd.data(), dx.data(), g + w.ln2_g, g + w.ln2_b, N, C);

    // Attention branch.
    dy.assign(N * C, T(0));
    linear_backward(dx.data(), a.y.data(), p + w.o_w, dy.data(), g + w.o_w, g + w.o_b, N, C, C);
    dqkv.assign(N * 3 * C, T(0));
    for (std::size_t b = 0; b < B; ++b) {
      const T* base = a.qkv.data() + b * L * 3 * C;
      T* dbase = dqkv.data() + b * L * 3 * C;
      for (std::size_t h = 0; h < NH; ++h) {
        CStridedMap<T> q(base + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        CStridedMap<T> k(base + C + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        CStridedMap<T> v(base + 2 * C + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        StridedMap<T> dq(dbase + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        StridedMap<T> dk(dbase + C + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        StridedMap<T> dv(dbase + 2 * C + h * HS, L, HS, Eigen::OuterStride<>(3 * C));
        CStridedMap<T> dyh(dy.data() + b * L * C + h * HS, L, HS, Eigen::OuterStride<>(C));
        CMatMap<T> att(a.att.data() + (b * NH + h) * L * L, L, L);

        dv.noalias() += att.transpose() * dyh;
        datt.noalias() = dyh * v.transpose();
        // softmax backward; masked entries have att == 0 and stay zero
        for (std::size_t i = 0; i < L; ++i) {
          T dot = 0;
          for (std::size_t j = 0; j <= i; ++j) dot += datt(i, j) * att(i, j);
          for (std::size_t j = 0; j <= i; ++j) datt(i, j) = att(i, j) * (datt(i, j) - dot) * scale;
          for (std::size_t j = i + 1; j < L; ++j) datt(i, j) = T(0);
        }
        dq.noalias() += datt * k;
        dk.noalias() += datt.transpose() * q;
      }
    }
    dtmp.assign(N * C, T(0));
    linear_backward(dqkv.data(), a.ln1.data(), p + w.qkv_w, dtmp.data(), g + w.qkv_w,
                    g + w.qkv_b, N, C, 3 * C);
    layernorm_backward(dtmp.data(), a.x_in.data(), p + w.ln1_g, a.ln1_mean.data(),
                       a.ln1_rstd.data(), dx.data(), g + w.ln1_g, g + w.ln1_b, N, C);
  }

  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < L; ++t) {
      const T* d = dx.data() + (b * L + t) * C;
      T* te = g + lay.wte + static_cast<std::size_t>(batch.input(b, t)) * C;
      T* pe = g + lay.wpe + t * C;
      for (std::size_t i = 0; i < C; ++i) {
        te[i] += d[i];
        pe[i] += d[i];
      }
    }
  }
  grad.assign(gbuf.begin(), gbuf.end());
}

}  // namespace detail

// Reusable forward/backward buffers. One per concurrent caller.
template <class T>
using ForwardCache = detail::Activations<T>;

// Mean next-token cross-entropy in nats.
template <class T>
T forward_loss(std::span<const T> params, const ModelConfig& cfg, const Batch& batch,
               ForwardCache<T>& cache) {
  detail::check_inputs(params, cfg, batch);
  return detail::forward(params, cfg, batch, cache);
}

template <class T>
T forward_loss(std::span<const T> params, const ModelConfig& cfg, const Batch& batch) {
  ForwardCache<T> cache;
  return forward_loss(params, cfg, batch, cache);
}

// Loss plus gradient; grad is overwritten.
template <class T>
T loss_and_grad(std::span<const T> params, const ModelConfig& cfg, const Batch& batch,
                ForwardCache<T>& cache, ParamVector<T>& grad) {
  detail::check_inputs(params, cfg, batch);
  const T loss = detail::forward(params, cfg, batch, cache);
  detail::backward(params, cfg, batch, cache, grad);
  return loss;
}

template <class T>
LossAndGrad<T> loss_and_grad(std::span<const T> params, const ModelConfig& cfg,
                             const Batch& batch) {
  ForwardCache<T> cache;
  LossAndGrad<T> out;
  out.loss = loss_and_grad(params, cfg, batch, cache, out.grad);
  return out;
}

template <class T>
ParamVector<T> backward(std::span<const T> params, const ModelConfig& cfg, const Batch& batch) {
  return loss_and_grad(params, cfg, batch).grad;
}

}  // namespace pier
