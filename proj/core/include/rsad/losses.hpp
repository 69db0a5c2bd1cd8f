#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rsad/errors.hpp"
#include "rsad/tensor.hpp"

namespace rsad {

/// Clamp applied to distributions inside logs; keeps the declared example
/// values exact while never producing NaN.
inline constexpr double kLogEps = 1e-8;

template <typename T>
void softmax_inplace(std::span<T> row) {
  T mx = row[0];
  for (T v : row) mx = std::max(mx, v);
  T sum = 0;
  for (T& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (T& v : row) v /= sum;
}

/// Row-wise softmax of (Q,N) logits.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  Tensor<T> probs = logits;
  const std::int64_t q = logits.dim(0), n = logits.dim(1);
  for (std::int64_t j = 0; j < q; ++j)
    softmax_inplace(std::span<T>(probs.data() + j * n, static_cast<std::size_t>(n)));
  return probs;
}

/// Cosine similarity; either vector having zero norm yields 0.
template <typename T>
T cosine(std::span<const T> u, std::span<const T> v) {
  T uu = 0, vv = 0, uv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu <= T(0) || vv <= T(0)) return T(0);
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

/// P(y=c) = softmax over classes of tau * cos(query, prototype_c).
template <typename T>
std::vector<T> classify(std::span<const T> query_emb,
                        const std::vector<std::vector<T>>& proto_embs, T tau) {
  if (proto_embs.empty()) throw InputError("classify: no prototypes");
  std::vector<T> probs(proto_embs.size());
  for (std::size_t c = 0; c < proto_embs.size(); ++c) {
    if (proto_embs[c].size() != query_emb.size())
      throw InputError("classify: embedding length mismatch");
    probs[c] = tau * cosine(query_emb, std::span<const T>(proto_embs[c]));
  }
  softmax_inplace(std::span<T>(probs));
  return probs;
}

/// Mean over queries of -log P(true class), probabilities eps-clamped.
template <typename T>
T cross_entropy(const Tensor<T>& probs, std::span<const int> labels) {
  const std::int64_t q = probs.dim(0), n = probs.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != q)
    throw InputError("cross_entropy: label count mismatch");
  T loss = 0;
  for (std::int64_t j = 0; j < q; ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= n) throw InputError("cross_entropy: label out of range");
    T p = probs.at(j, y);
    loss -= std::log(std::max(p, static_cast<T>(kLogEps)));
  }
  return loss / static_cast<T>(q);
}

/// d(mean CE)/d(logits) = (softmax - onehot) / Q.
template <typename T>
Tensor<T> cross_entropy_grad(const Tensor<T>& probs,
                             std::span<const int> labels) {
  const std::int64_t q = probs.dim(0), n = probs.dim(1);
  Tensor<T> grad = probs;
  const T inv_q = T(1) / static_cast<T>(q);
  for (std::int64_t j = 0; j < q; ++j) {
    grad.at(j, labels[static_cast<std::size_t>(j)]) -= T(1);
    for (std::int64_t c = 0; c < n; ++c) grad.at(j, c) *= inv_q;
  }
  return grad;
}

/// Sum_i p_i log(p_i / q_i) with 0 log(0/q) = 0 and q eps-clamped.
template <typename T>
T kl_div(std::span<const T> p, std::span<const T> q) {
  if (p.size() != q.size()) throw InputError("kl_div: size mismatch");
  T sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= T(0)) continue;
    sum += p[i] * (std::log(p[i]) -
                   std::log(std::max(q[i], static_cast<T>(kLogEps))));
  }
  return sum;
}

/// Per-query KL averaged over the batch (rows of (Q,N) distributions).
template <typename T>
T kl_div_mean(const Tensor<T>& p, const Tensor<T>& q) {
  if (!p.same_shape(q)) throw InputError("kl_div_mean: batch mismatch");
  const std::int64_t rows = p.dim(0), n = p.dim(1);
  T sum = 0;
  for (std::int64_t j = 0; j < rows; ++j)
    sum += kl_div(
        std::span<const T>(p.data() + j * n, static_cast<std::size_t>(n)),
        std::span<const T>(q.data() + j * n, static_cast<std::size_t>(n)));
  return sum / static_cast<T>(rows);
}

/// Bidirectional distribution alignment, KL(p_I||p_S) + KL(p_S||p_I); for
/// gradients each direction treats the peer distribution as constant.
template <typename T>
T sag_loss(const Tensor<T>& p_raw, const Tensor<T>& p_prior) {
  return kl_div_mean(p_raw, p_prior) + kl_div_mean(p_prior, p_raw);
}

template <typename T>
T total_loss(T cls1, T cls2, T sag, T alpha) {
  if (alpha < T(0)) throw ConfigError("total_loss: alpha must be >= 0");
  return cls1 + cls2 + alpha * sag;
}

/// Unidirectional variant: cls + alpha * KL(p_main || p_prior).
template <typename T>
T ud_kd_loss(T cls, const Tensor<T>& p_main, const Tensor<T>& p_prior,
             T alpha) {
  if (alpha < T(0)) throw ConfigError("ud_kd_loss: alpha must be >= 0");
  return cls + alpha * kl_div_mean(p_main, p_prior);
}

/// d(mean_j KL(p_j || const q_j))/d(p logits):
/// row_k = p_k * ((log p_k - log q_k) - KL_j) / Q.
template <typename T>
Tensor<T> kl_forward_grad(const Tensor<T>& p, const Tensor<T>& q) {
  if (!p.same_shape(q)) throw InputError("kl_forward_grad: batch mismatch");
  const std::int64_t rows = p.dim(0), n = p.dim(1);
  Tensor<T> grad(p.shape());
  const T inv_rows = T(1) / static_cast<T>(rows);
  for (std::int64_t j = 0; j < rows; ++j) {
    std::span<const T> pj(p.data() + j * n, static_cast<std::size_t>(n));
    std::span<const T> qj(q.data() + j * n, static_cast<std::size_t>(n));
    T kl = kl_div(pj, qj);
    for (std::int64_t k = 0; k < n; ++k) {
      const T pk = pj[static_cast<std::size_t>(k)];
      if (pk <= T(0)) continue;
      T log_ratio =
          std::log(pk) -
          std::log(std::max(qj[static_cast<std::size_t>(k)],
                            static_cast<T>(kLogEps)));
      grad.at(j, k) = pk * (log_ratio - kl) * inv_rows;
    }
  }
  return grad;
}

}  // namespace rsad
