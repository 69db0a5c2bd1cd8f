#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "rsad/errors.hpp"
#include "rsad/nn/conv2d.hpp"  // matrix aliases
#include "rsad/nn/module.hpp"
#include "rsad/rng.hpp"
#include "rsad/tensor.hpp"

namespace rsad {

template <typename T>
using RowMat = nn::RowMat<T>;

enum class RhsMode { none, rhs, cross_attention };

inline RhsMode parse_rhs_mode(const std::string& s) {
  if (s == "none") return RhsMode::none;
  if (s == "rhs") return RhsMode::rhs;
  if (s == "cross_attention") return RhsMode::cross_attention;
  throw ConfigError("unknown rhs mode: " + s);
}

inline std::string to_string(RhsMode mode) {
  switch (mode) {
    case RhsMode::none: return "none";
    case RhsMode::rhs: return "rhs";
    default: return "cross_attention";
  }
}

/// Square 1x1 projections (c' = c) so the residual addition onto the
/// unprojected prototype stays well-typed. The plain rhs mode has key and
/// query projections only; cross_attention adds the value projection.
template <typename T>
struct RhsParams {
  RhsMode mode = RhsMode::rhs;
  int channels = 0;
  nn::Param<T> key_w, key_b, query_w, query_b, value_w, value_b;

  void init(int c, RhsMode m, Rng& rng) {
    mode = m;
    channels = c;
    if (mode == RhsMode::none) return;
    const double stddev = std::sqrt(2.0 / static_cast<double>(c));
    auto init_proj = [&](nn::Param<T>& w, nn::Param<T>& b) {
      w.resize({c, c});
      for (std::int64_t i = 0; i < w.value.size(); ++i)
        w.value[i] = static_cast<T>(rng.normal(0.0, stddev));
      b.resize({c});
    };
    init_proj(key_w, key_b);
    init_proj(query_w, query_b);
    if (mode == RhsMode::cross_attention) init_proj(value_w, value_b);
  }

  void collect_params(const std::string& prefix,
                      std::vector<nn::NamedParam<T>>& out) {
    if (mode == RhsMode::none) return;
    out.push_back({nn::join_name(prefix, "key.weight"), &key_w});
    out.push_back({nn::join_name(prefix, "key.bias"), &key_b});
    out.push_back({nn::join_name(prefix, "query.weight"), &query_w});
    out.push_back({nn::join_name(prefix, "query.bias"), &query_b});
    if (mode == RhsMode::cross_attention) {
      out.push_back({nn::join_name(prefix, "value.weight"), &value_w});
      out.push_back({nn::join_name(prefix, "value.bias"), &value_b});
    }
  }
};

namespace detail {

/// (C,H,W) or (C,S) tensor viewed as a C x S matrix.
template <typename T>
std::pair<std::int64_t, std::int64_t> map_dims(const Tensor<T>& map) {
  if (map.ndim() == 2) return {map.dim(0), map.dim(1)};
  if (map.ndim() == 3) return {map.dim(0), map.dim(1) * map.dim(2)};
  throw InputError("feature map must be (C,S) or (C,H,W)");
}

template <typename T>
nn::ConstMatMap<T> as_matrix(const Tensor<T>& map) {
  auto [c, s] = map_dims(map);
  return nn::ConstMatMap<T>(map.data(), c, s);
}

}  // namespace detail

/// Per-class elementwise mean of support feature maps.
template <typename T>
std::vector<Tensor<T>> compute_prototypes(
    const std::vector<std::vector<Tensor<T>>>& class_maps) {
  if (class_maps.empty()) throw InputError("compute_prototypes: no classes");
  std::vector<Tensor<T>> prototypes;
  prototypes.reserve(class_maps.size());
  for (const auto& maps : class_maps) {
    if (maps.empty())
      throw InputError("compute_prototypes: empty support class");
    Tensor<T> proto(maps.front().shape());
    for (const auto& m : maps) {
      if (!m.same_shape(proto))
        throw InputError("compute_prototypes: support map shapes differ");
      for (std::int64_t i = 0; i < proto.size(); ++i) proto[i] += m[i];
    }
    const T inv = T(1) / static_cast<T>(maps.size());
    for (std::int64_t i = 0; i < proto.size(); ++i) proto[i] *= inv;
    prototypes.push_back(std::move(proto));
  }
  return prototypes;
}

template <typename T>
struct RelationCache {
  RowMat<T> qn, kn;  // (S,C) row-normalized descriptors; zero rows stay zero
  std::vector<T> q_norms, k_norms;
  RowMat<T> m;  // (S,S) row-stochastic
};

namespace detail {

template <typename T>
void normalized_descriptors(const nn::ConstMatMap<T>& map, RowMat<T>& rows,
                            std::vector<T>& norms) {
  const std::int64_t c = map.rows(), s = map.cols();
  rows = map.transpose();
  norms.assign(static_cast<std::size_t>(s), T(0));
  for (std::int64_t i = 0; i < s; ++i) {
    T norm = rows.row(i).norm();
    norms[static_cast<std::size_t>(i)] = norm;
    if (norm > T(0))
      rows.row(i) /= norm;
    else
      rows.row(i).setZero();
  }
  (void)c;
}

template <typename T>
void softmax_rows_inplace(RowMat<T>& m) {
  for (std::int64_t i = 0; i < m.rows(); ++i) {
    T mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

}  // namespace detail

/// M_ij = softmax over prototype positions j of cos(q_i, k_j). Zero-norm
/// descriptors contribute cosine 0.
template <typename T>
Tensor<T> relation_matrix(const Tensor<T>& q_map, const Tensor<T>& k_map,
                          RelationCache<T>* cache = nullptr) {
  auto [cq, sq] = detail::map_dims(q_map);
  auto [ck, sk] = detail::map_dims(k_map);
  if (cq != ck || sq != sk)
    throw InputError("relation_matrix: query/key shape mismatch");

  RelationCache<T> local;
  RelationCache<T>& rc = cache ? *cache : local;
  detail::normalized_descriptors(detail::as_matrix(q_map), rc.qn, rc.q_norms);
  detail::normalized_descriptors(detail::as_matrix(k_map), rc.kn, rc.k_norms);
  rc.m.noalias() = rc.qn * rc.kn.transpose();
  detail::softmax_rows_inplace(rc.m);

  Tensor<T> out({sq, sq});
  nn::MatMap<T>(out.data(), sq, sq) = rc.m;
  return out;
}

/// Accumulates gradients of a scalar through M into the projected maps
/// (both C x S). dm is the gradient w.r.t. M. The pieces form lets callers
/// share per-entity descriptor caches across many matrices.
template <typename T>
void relation_backward_core(const RowMat<T>& qn, const RowMat<T>& kn,
                            const std::vector<T>& q_norms,
                            const std::vector<T>& k_norms, const RowMat<T>& m,
                            const RowMat<T>& dm, RowMat<T>& dq_map,
                            RowMat<T>& dk_map) {
  const std::int64_t s = m.rows();
  RowMat<T> da(s, s);
  for (std::int64_t i = 0; i < s; ++i) {
    T dot = m.row(i).cwiseProduct(dm.row(i)).sum();
    da.row(i) = m.row(i).cwiseProduct((dm.row(i).array() - dot).matrix());
  }
  RowMat<T> dqn = da * kn;              // (S,C)
  RowMat<T> dkn = da.transpose() * qn;  // (S,C)
  for (std::int64_t i = 0; i < s; ++i) {
    if (q_norms[static_cast<std::size_t>(i)] > T(0)) {
      T proj = dqn.row(i).cwiseProduct(qn.row(i)).sum();
      dq_map.col(i) += ((dqn.row(i) - proj * qn.row(i)) /
                        q_norms[static_cast<std::size_t>(i)])
                           .transpose();
    }
    if (k_norms[static_cast<std::size_t>(i)] > T(0)) {
      T proj = dkn.row(i).cwiseProduct(kn.row(i)).sum();
      dk_map.col(i) += ((dkn.row(i) - proj * kn.row(i)) /
                        k_norms[static_cast<std::size_t>(i)])
                           .transpose();
    }
  }
}

template <typename T>
void relation_matrix_backward(const RelationCache<T>& cache,
                              const RowMat<T>& dm, RowMat<T>& dq_map,
                              RowMat<T>& dk_map) {
  relation_backward_core(cache.qn, cache.kn, cache.q_norms, cache.k_norms,
                         cache.m, dm, dq_map, dk_map);
}

template <typename T>
struct SummarizeCache {
  std::vector<std::int64_t> argmax;  // per channel; ties take the first index
  std::int64_t spatial = 0;
};

/// Per-channel global average plus global max.
template <typename T>
std::vector<T> summarize(const Tensor<T>& map,
                         SummarizeCache<T>* cache = nullptr) {
  auto [c, s] = detail::map_dims(map);
  if (cache) {
    cache->argmax.assign(static_cast<std::size_t>(c), 0);
    cache->spatial = s;
  }
  std::vector<T> emb(static_cast<std::size_t>(c));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const T* row = map.data() + ch * s;
    T sum = 0, mx = row[0];
    std::int64_t arg = 0;
    for (std::int64_t i = 0; i < s; ++i) {
      sum += row[i];
      if (row[i] > mx) {
        mx = row[i];
        arg = i;
      }
    }
    emb[static_cast<std::size_t>(ch)] = sum / static_cast<T>(s) + mx;
    if (cache) cache->argmax[static_cast<std::size_t>(ch)] = arg;
  }
  return emb;
}

template <typename T>
void summarize_backward(const SummarizeCache<T>& cache,
                        const std::vector<T>& demb, RowMat<T>& dmap) {
  const std::int64_t s = cache.spatial;
  for (std::int64_t ch = 0; ch < dmap.rows(); ++ch) {
    const T g = demb[static_cast<std::size_t>(ch)];
    dmap.row(ch).array() += g / static_cast<T>(s);
    dmap(ch, cache.argmax[static_cast<std::size_t>(ch)]) += g;
  }
}

template <typename T>
struct HighlightCache {
  RhsMode mode = RhsMode::rhs;
  RowMat<T> pt, fq;           // inputs as (C,S)
  RowMat<T> khat, qhat, vhat;
  RelationCache<T> rel;
};

/// Query-conditioned refinement: each query position mixes the projected
/// prototype descriptors through its relation-matrix row, and the result is
/// added back onto the raw prototype map.
template <typename T>
Tensor<T> highlight(const Tensor<T>& pt_map, const Tensor<T>& fq_map,
                    const RhsParams<T>& params,
                    HighlightCache<T>* cache = nullptr) {
  auto [c, s] = detail::map_dims(pt_map);
  auto [cq, sq] = detail::map_dims(fq_map);
  if (c != cq || s != sq)
    throw InputError("highlight: prototype/query shape mismatch");
  if (params.mode == RhsMode::none) return pt_map;
  if (params.channels != static_cast<int>(c))
    throw ConfigError("highlight: params built for " +
                      std::to_string(params.channels) + " channels");

  HighlightCache<T> local;
  HighlightCache<T>& hc = cache ? *cache : local;
  hc.mode = params.mode;
  hc.pt = detail::as_matrix(pt_map);
  hc.fq = detail::as_matrix(fq_map);

  auto project = [&](const nn::Param<T>& w, const nn::Param<T>& b,
                     const RowMat<T>& x) {
    RowMat<T> y = nn::ConstMatMap<T>(w.value.data(), c, c) * x;
    y.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(
        b.value.data(), c);
    return y;
  };
  hc.khat = project(params.key_w, params.key_b, hc.pt);
  hc.qhat = project(params.query_w, params.query_b, hc.fq);

  Tensor<T> qhat_t({c, s}), khat_t({c, s});
  nn::MatMap<T>(qhat_t.data(), c, s) = hc.qhat;
  nn::MatMap<T>(khat_t.data(), c, s) = hc.khat;
  relation_matrix(qhat_t, khat_t, &hc.rel);

  const RowMat<T>* mixed = &hc.khat;
  if (params.mode == RhsMode::cross_attention) {
    hc.vhat = project(params.value_w, params.value_b, hc.pt);
    mixed = &hc.vhat;
  }

  Tensor<T> out(pt_map.shape());
  nn::MatMap<T> om(out.data(), c, s);
  om.noalias() = (*mixed) * hc.rel.m.transpose();
  om += hc.pt;
  return out;
}

/// Backward of highlight: accumulates into dpt/dfq (C,S) and the projection
/// parameter grads. drefined is the gradient w.r.t. the refined map.
template <typename T>
void highlight_backward(const HighlightCache<T>& cache, RhsParams<T>& params,
                        const RowMat<T>& drefined, RowMat<T>& dpt,
                        RowMat<T>& dfq) {
  if (params.mode == RhsMode::none) {
    dpt += drefined;
    return;
  }
  const std::int64_t c = cache.pt.rows();

  dpt += drefined;  // residual term

  RowMat<T> dkhat = RowMat<T>::Zero(c, cache.pt.cols());
  RowMat<T> dqhat = RowMat<T>::Zero(c, cache.pt.cols());
  RowMat<T> dm;
  if (params.mode == RhsMode::cross_attention) {
    RowMat<T> dvhat = drefined * cache.rel.m;
    dm = drefined.transpose() * cache.vhat;
    relation_matrix_backward(cache.rel, dm, dqhat, dkhat);
    // value projection
    nn::MatMap<T>(params.value_w.grad.data(), c, c).noalias() +=
        dvhat * cache.pt.transpose();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(params.value_b.grad.data(),
                                                    c) += dvhat.rowwise().sum();
    dpt.noalias() +=
        nn::ConstMatMap<T>(params.value_w.value.data(), c, c).transpose() *
        dvhat;
  } else {
    dkhat = drefined * cache.rel.m;  // mixing term
    dm = drefined.transpose() * cache.khat;
    relation_matrix_backward(cache.rel, dm, dqhat, dkhat);
  }

  nn::MatMap<T>(params.key_w.grad.data(), c, c).noalias() +=
      dkhat * cache.pt.transpose();
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(params.key_b.grad.data(),
                                                  c) += dkhat.rowwise().sum();
  dpt.noalias() +=
      nn::ConstMatMap<T>(params.key_w.value.data(), c, c).transpose() * dkhat;

  nn::MatMap<T>(params.query_w.grad.data(), c, c).noalias() +=
      dqhat * cache.fq.transpose();
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(params.query_b.grad.data(),
                                                  c) += dqhat.rowwise().sum();
  dfq.noalias() +=
      nn::ConstMatMap<T>(params.query_w.value.data(), c, c).transpose() *
      dqhat;
}

}  // namespace rsad
