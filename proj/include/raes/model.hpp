/*
 * Copyright 2026 raes authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "raes/encoder.hpp"
#include "raes/error.hpp"
#include "raes/matrix.hpp"
#include "raes/param.hpp"
#include "raes/rng.hpp"

namespace raes {

// Scoring network: response self-attention with relative position tables,
// response-prompt cross-attention, and a linear head reading the CLS row of
// both attention outputs. Backward passes are hand-derived reverse-mode and
// accumulate into ParamTensor::grad.

/// Row of the relative position tables for query i attending key j.
inline std::size_t rel_index(std::size_t i, std::size_t j, int k_max) {
  const long long offset =
      static_cast<long long>(j) - static_cast<long long>(i);
  const long long clipped =
      std::max<long long>(-k_max, std::min<long long>(k_max, offset));
  return static_cast<std::size_t>(clipped + k_max);
}

struct SelfAttnParams {
  int d = 0;
  int k_max = 0;
  ParamTensor wq, wk, wv;
  ParamTensor rk, rv;  // (2*k_max+1) x d, indexed by rel_index

  SelfAttnParams(int dim, int clip)
      : d(dim),
        k_max(clip),
        wq("self_attn.wq", static_cast<std::size_t>(dim),
           static_cast<std::size_t>(dim)),
        wk("self_attn.wk", static_cast<std::size_t>(dim),
           static_cast<std::size_t>(dim)),
        wv("self_attn.wv", static_cast<std::size_t>(dim),
           static_cast<std::size_t>(dim)),
        rk("self_attn.rk", static_cast<std::size_t>(2 * clip + 1),
           static_cast<std::size_t>(dim)),
        rv("self_attn.rv", static_cast<std::size_t>(2 * clip + 1),
           static_cast<std::size_t>(dim)) {
    if (dim < 2 || clip < 1) {
      throw ConfigError("self-attention needs d >= 2 and k_max >= 1");
    }
  }

  std::vector<ParamTensor*> params() { return {&wq, &wk, &wv, &rk, &rv}; }
};

struct CrossAttnParams {
  int d = 0;
  ParamTensor wq, wk, wv;

  explicit CrossAttnParams(int dim)
      : d(dim),
        wq("cross_attn.wq", static_cast<std::size_t>(dim),
           static_cast<std::size_t>(dim)),
        wk("cross_attn.wk", static_cast<std::size_t>(dim),
           static_cast<std::size_t>(dim)),
        wv("cross_attn.wv", static_cast<std::size_t>(dim),
           static_cast<std::size_t>(dim)) {}

  std::vector<ParamTensor*> params() { return {&wq, &wk, &wv}; }
};

struct RegressionParams {
  int d = 0;
  ParamTensor w;  // (2d) x 1, reading concat(z1, r1)
  ParamTensor b;  // 1 x 1

  explicit RegressionParams(int dim)
      : d(dim),
        w("reg.w", static_cast<std::size_t>(2 * dim), 1),
        b("reg.b", 1, 1) {}

  std::vector<ParamTensor*> params() { return {&w, &b}; }
};

struct ModelParams {
  int d = 0;
  int k_max = 0;
  ParamTensor embedding;  // vocab_size x d
  SelfAttnParams self_attn;
  CrossAttnParams cross_attn;
  RegressionParams reg;

  ModelParams(int vocab_size, int dim, int clip)
      : d(dim),
        k_max(clip),
        embedding("embedding", static_cast<std::size_t>(vocab_size),
                  static_cast<std::size_t>(dim)),
        self_attn(dim, clip),
        cross_attn(dim),
        reg(dim) {}

  /// Stable order shared by the optimizer and the checkpoint format.
  std::vector<ParamTensor*> all() {
    std::vector<ParamTensor*> out = {&embedding};
    for (ParamTensor* p : self_attn.params()) out.push_back(p);
    for (ParamTensor* p : cross_attn.params()) out.push_back(p);
    for (ParamTensor* p : reg.params()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (ParamTensor* p : all()) p->zero_grad();
  }

  void init(Rng& rng) {
    embedding.init_uniform(rng, 0.5);
    const double wb = 1.0 / std::sqrt(static_cast<double>(d));
    self_attn.wq.init_uniform(rng, wb);
    self_attn.wk.init_uniform(rng, wb);
    self_attn.wv.init_uniform(rng, wb);
    self_attn.rk.init_uniform(rng, 0.1);
    self_attn.rv.init_uniform(rng, 0.1);
    cross_attn.wq.init_uniform(rng, wb);
    cross_attn.wk.init_uniform(rng, wb);
    cross_attn.wv.init_uniform(rng, wb);
    reg.w.init_uniform(rng, 1.0 / std::sqrt(2.0 * d));
    // bias starts at zero
  }
};

/// Forward intermediates needed by the matching backward pass.
struct AttnCache {
  Matrix Q, K, V;
  Matrix logits;  // pre-mask scaled logits
  Matrix A;       // post-softmax weights, exact zeros at masked keys
};

/// Self-attention over the response sequence. Keys at masked positions get
/// -inf logits; relative-position terms enter both logits and values.
inline Matrix response_self_attention(const Matrix& X, SelfAttnParams& p,
                                      const std::vector<bool>& pad,
                                      AttnCache* cache = nullptr) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  if (d != static_cast<std::size_t>(p.d)) {
    throw ShapeError("self-attention d mismatch: input " + X.shape_str() +
                     " vs params d=" + std::to_string(p.d));
  }
  if (pad.size() != n) {
    throw ShapeError("pad mask length " + std::to_string(pad.size()) +
                     " != n " + std::to_string(n));
  }
  const Matrix Q = matmul(X, p.wq.value);
  const Matrix K = matmul(X, p.wk.value);
  const Matrix V = matmul(X, p.wv.value);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix logits(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t r = rel_index(i, j, p.k_max);
      double e = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        e += Q(i, c) * (K(j, c) + p.rk.value(r, c));
      }
      logits(i, j) = e * scale;
    }
  }
  const Matrix A = softmax_rows_masked(logits, pad);

  Matrix Z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = A(i, j);
      if (a == 0.0) continue;
      const std::size_t r = rel_index(i, j, p.k_max);
      for (std::size_t c = 0; c < d; ++c) {
        Z(i, c) += a * (V(j, c) + p.rv.value(r, c));
      }
    }
  }
  if (cache) {
    cache->Q = Q;
    cache->K = K;
    cache->V = V;
    cache->logits = logits;
    cache->A = A;
  }
  return Z;
}

namespace detail {

/// Row-wise softmax backward: de_ij = a_ij (dA_ij - sum_k a_ik dA_ik).
inline Matrix softmax_backward_rows(const Matrix& A, const Matrix& dA) {
  Matrix de(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double inner = 0.0;
    for (std::size_t k = 0; k < A.cols(); ++k) inner += A(i, k) * dA(i, k);
    for (std::size_t j = 0; j < A.cols(); ++j) {
      de(i, j) = A(i, j) * (dA(i, j) - inner);
    }
  }
  return de;
}

}  // namespace detail

/// Accumulates parameter gradients and returns dX.
inline Matrix self_attention_backward(const Matrix& X, SelfAttnParams& p,
                                      const std::vector<bool>& pad,
                                      const AttnCache& cache,
                                      const Matrix& dZ) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const Matrix& A = cache.A;

  // dA_ij = dZ_i . (V_j + Rv_ij); dV = A^T dZ; dRv accumulates A_ij dZ_i.
  Matrix dA(n, n);
  Matrix dV(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (pad[j]) continue;
      const std::size_t r = rel_index(i, j, p.k_max);
      double s = 0.0;
      const double a = A(i, j);
      for (std::size_t c = 0; c < d; ++c) {
        const double g = dZ(i, c);
        s += g * (cache.V(j, c) + p.rv.value(r, c));
        dV(j, c) += a * g;
        p.rv.grad(r, c) += a * g;
      }
      dA(i, j) = s;
    }
  }
  const Matrix de = detail::softmax_backward_rows(A, dA);

  Matrix dQ(n, d);
  Matrix dK(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (pad[j]) continue;
      const double g = de(i, j) * scale;
      if (g == 0.0) continue;
      const std::size_t r = rel_index(i, j, p.k_max);
      for (std::size_t c = 0; c < d; ++c) {
        dQ(i, c) += g * (cache.K(j, c) + p.rk.value(r, c));
        dK(j, c) += g * cache.Q(i, c);
        p.rk.grad(r, c) += g * cache.Q(i, c);
      }
    }
  }

  const Matrix Xt = transpose(X);
  accumulate(p.wq.grad, matmul(Xt, dQ));
  accumulate(p.wk.grad, matmul(Xt, dK));
  accumulate(p.wv.grad, matmul(Xt, dV));

  Matrix dX = matmul(dQ, transpose(p.wq.value));
  accumulate(dX, matmul(dK, transpose(p.wk.value)));
  accumulate(dX, matmul(dV, transpose(p.wv.value)));
  return dX;
}

/// Cross-attention: queries from the response representation Z, keys and
/// values from the prompt matrix P.
inline Matrix response_prompt_attention(const Matrix& Z, const Matrix& P,
                                        CrossAttnParams& p,
                                        const std::vector<bool>& prompt_pad,
                                        AttnCache* cache = nullptr) {
  const std::size_t d = Z.cols();
  if (P.rows() < 1) throw ShapeError("empty prompt matrix");
  if (P.cols() != d || d != static_cast<std::size_t>(p.d)) {
    throw ShapeError("cross-attention d mismatch: Z " + Z.shape_str() +
                     " vs P " + P.shape_str());
  }
  if (prompt_pad.size() != P.rows()) {
    throw ShapeError("prompt pad mask length " +
                     std::to_string(prompt_pad.size()) + " != m " +
                     std::to_string(P.rows()));
  }
  const Matrix Q = matmul(Z, p.wq.value);
  const Matrix K = matmul(P, p.wk.value);
  const Matrix V = matmul(P, p.wv.value);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix logits(Z.rows(), P.rows());
  for (std::size_t i = 0; i < Z.rows(); ++i) {
    for (std::size_t j = 0; j < P.rows(); ++j) {
      double e = 0.0;
      for (std::size_t c = 0; c < d; ++c) e += Q(i, c) * K(j, c);
      logits(i, j) = e * scale;
    }
  }
  const Matrix A = softmax_rows_masked(logits, prompt_pad);
  Matrix R = matmul(A, V);
  if (cache) {
    cache->Q = Q;
    cache->K = K;
    cache->V = V;
    cache->logits = logits;
    cache->A = A;
  }
  return R;
}

/// Returns {dZ, dP} and accumulates parameter gradients.
inline std::pair<Matrix, Matrix> cross_attention_backward(
    const Matrix& Z, const Matrix& P, CrossAttnParams& p,
    const std::vector<bool>& prompt_pad, const AttnCache& cache,
    const Matrix& dR) {
  const std::size_t d = Z.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix dA = matmul(dR, transpose(cache.V));
  for (std::size_t i = 0; i < dA.rows(); ++i) {
    for (std::size_t j = 0; j < dA.cols(); ++j) {
      if (prompt_pad[j]) dA(i, j) = 0.0;
    }
  }
  const Matrix dVm = matmul(transpose(cache.A), dR);
  Matrix de = detail::softmax_backward_rows(cache.A, dA);
  for (auto& v : de.data()) v *= scale;

  const Matrix dQ = matmul(de, cache.K);
  const Matrix dK = matmul(transpose(de), cache.Q);

  accumulate(p.wq.grad, matmul(transpose(Z), dQ));
  accumulate(p.wk.grad, matmul(transpose(P), dK));
  accumulate(p.wv.grad, matmul(transpose(P), dVm));

  Matrix dZ = matmul(dQ, transpose(p.wq.value));
  Matrix dP = matmul(dK, transpose(p.wk.value));
  accumulate(dP, matmul(dVm, transpose(p.wv.value)));
  return {std::move(dZ), std::move(dP)};
}

/// Linear head over concat(z1, r1); raw real output, no activation.
inline double regress(std::span<const double> z1, std::span<const double> r1,
                      RegressionParams& p) {
  const std::size_t d = static_cast<std::size_t>(p.d);
  if (z1.size() != d || r1.size() != d) {
    throw ShapeError("regress expects two vectors of length " +
                     std::to_string(p.d));
  }
  double out = p.b.value(0, 0);
  for (std::size_t c = 0; c < d; ++c) {
    out += z1[c] * p.w.value(c, 0) + r1[c] * p.w.value(d + c, 0);
  }
  return out;
}

inline void regress_backward(std::span<const double> z1,
                             std::span<const double> r1, RegressionParams& p,
                             double d_out, std::span<double> dz1,
                             std::span<double> dr1) {
  const std::size_t d = static_cast<std::size_t>(p.d);
  p.b.grad(0, 0) += d_out;
  for (std::size_t c = 0; c < d; ++c) {
    p.w.grad(c, 0) += d_out * z1[c];
    p.w.grad(d + c, 0) += d_out * r1[c];
    dz1[c] += d_out * p.w.value(c, 0);
    dr1[c] += d_out * p.w.value(d + c, 0);
  }
}

inline double mse_loss(std::span<const double> preds,
                       std::span<const double> labels) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw ConfigError("mse_loss needs equal-length nonempty inputs");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double diff = preds[i] - labels[i];
    sum += diff * diff;
  }
  return sum / static_cast<double>(preds.size());
}

/// Encoded prompt shared across the samples of one prompt id.
struct PromptCache {
  std::vector<int> ids;
  std::vector<bool> mask;
  Matrix P;
};

inline PromptCache encode_prompt(const std::string& prompt_text,
                                 ModelParams& params, const Vocabulary& vocab,
                                 const EncoderConfig& config) {
  const TokenSequence seq = tokenize(prompt_text, vocab, Source::prompt);
  if (seq.ids.empty()) throw ValidationError("empty prompt text");
  const WindowStack stack = segment_windows(seq, config.window_len);
  LookupProvider provider(params.embedding.value);
  PromptCache cache;
  cache.ids = collapse_ids(stack);
  cache.mask = pad_mask(stack);
  cache.P = collapse_segments(encode(stack, provider));
  return cache;
}

/// Everything backward_sample needs from one response forward pass.
struct SampleCache {
  std::vector<int> ids;
  std::vector<bool> mask;
  Matrix X, Z, R;
  AttnCache self_cache, cross_cache;
  std::vector<double> z1, r1;
  double out = 0.0;
};

/// Full pipeline for one response: tokenize, window, embed, collapse,
/// self-attention, cross-attention, regression.
inline double forward_sample(const std::string& response_text,
                             const PromptCache& prompt, ModelParams& params,
                             const Vocabulary& vocab,
                             const EncoderConfig& config,
                             SampleCache* cache = nullptr) {
  if (response_text.empty()) throw ValidationError("empty response text");
  const TokenSequence seq = tokenize(response_text, vocab, Source::response);
  const WindowStack stack = segment_windows(seq, config.window_len);
  LookupProvider provider(params.embedding.value);

  SampleCache local;
  SampleCache& c = cache ? *cache : local;
  c.ids = collapse_ids(stack);
  c.mask = pad_mask(stack);
  c.X = collapse_segments(encode(stack, provider));
  c.Z = response_self_attention(c.X, params.self_attn, c.mask, &c.self_cache);
  c.R = response_prompt_attention(c.Z, prompt.P, params.cross_attn,
                                  prompt.mask, &c.cross_cache);
  c.z1.assign(c.Z.row(0).begin(), c.Z.row(0).end());
  c.r1.assign(c.R.row(0).begin(), c.R.row(0).end());
  c.out = regress(c.z1, c.r1, params.reg);
  return c.out;
}

/// Reverse pass for one sample. d_out is dLoss/d(out); d_z1_extra, when
/// nonempty, is an additional gradient on z1 from batch-level loss terms.
/// Prompt-side gradients scatter into the shared embedding rows.
inline void backward_sample(const SampleCache& c, const PromptCache& prompt,
                            ModelParams& params, double d_out,
                            std::span<const double> d_z1_extra = {}) {
  const std::size_t d = static_cast<std::size_t>(params.d);
  std::vector<double> dz1(d, 0.0);
  std::vector<double> dr1(d, 0.0);
  regress_backward(c.z1, c.r1, params.reg, d_out, dz1, dr1);
  if (!d_z1_extra.empty()) {
    if (d_z1_extra.size() != d) {
      throw ShapeError("d_z1_extra length " +
                       std::to_string(d_z1_extra.size()) + " != d " +
                       std::to_string(d));
    }
    for (std::size_t i = 0; i < d; ++i) dz1[i] += d_z1_extra[i];
  }

  Matrix dR(c.R.rows(), d);
  for (std::size_t i = 0; i < d; ++i) dR(0, i) = dr1[i];
  auto [dZ, dP] = cross_attention_backward(c.Z, prompt.P, params.cross_attn,
                                           prompt.mask, c.cross_cache, dR);
  for (std::size_t i = 0; i < d; ++i) dZ(0, i) += dz1[i];

  const Matrix dX =
      self_attention_backward(c.X, params.self_attn, c.mask, c.self_cache, dZ);

  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    const std::size_t row = static_cast<std::size_t>(c.ids[i]);
    for (std::size_t col = 0; col < d; ++col) {
      params.embedding.grad(row, col) += dX(i, col);
    }
  }
  for (std::size_t j = 0; j < prompt.ids.size(); ++j) {
    const std::size_t row = static_cast<std::size_t>(prompt.ids[j]);
    for (std::size_t col = 0; col < d; ++col) {
      params.embedding.grad(row, col) += dP(j, col);
    }
  }
}

/// One-call scoring path used by evaluation.
inline double forward_pipeline(const std::string& response_text,
                               const std::string& prompt_text,
                               ModelParams& params, const Vocabulary& vocab,
                               const EncoderConfig& config) {
  PromptCache prompt = encode_prompt(prompt_text, params, vocab, config);
  return forward_sample(response_text, prompt, params, vocab, config);
}

}  // namespace raes
