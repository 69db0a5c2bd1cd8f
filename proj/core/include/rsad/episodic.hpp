#pragma once

#include <utility>
#include <vector>

#include "rsad/losses.hpp"
#include "rsad/rhs.hpp"

namespace rsad {

struct EpisodeShape {
  int way = 0;
  int shot = 0;
  int query_per_class = 0;

  int n_support() const { return way * shot; }
  int n_query() const { return way * query_per_class; }
};

/// Episodic classifier head: prototypes from support features, per-(query,
/// class) RHS refinement, avg+max summaries, and tau-scaled cosine logits.
/// Support and query batches are label-major. Forward caches what backward
/// needs; one backward per forward.
template <typename T>
class EpisodicHead {
 public:
  void init(int channels, RhsMode mode, T tau, Rng& rng) {
    rhs_.init(channels, mode, rng);
    tau_ = tau;
  }

  RhsParams<T>& rhs() { return rhs_; }
  const RhsParams<T>& rhs() const { return rhs_; }
  T tau() const { return tau_; }

  void collect_params(const std::string& prefix,
                      std::vector<nn::NamedParam<T>>& out) {
    rhs_.collect_params(nn::join_name(prefix, "rhs"), out);
  }

  /// support (N*K,C,h,w), query (N*Q,C,h,w) -> logits (N*Q, N).
  Tensor<T> forward(const Tensor<T>& support_feats,
                    const Tensor<T>& query_feats, EpisodeShape shape,
                    bool keep_caches = true) {
    if (support_feats.ndim() != 4 || query_feats.ndim() != 4)
      throw InputError("EpisodicHead: expected 4-D feature batches");
    if (support_feats.dim(0) != shape.n_support() ||
        query_feats.dim(0) != shape.n_query())
      throw InputError("EpisodicHead: batch sizes disagree with shape");

    shape_ = shape;
    c_ = support_feats.dim(1);
    s_ = support_feats.dim(2) * support_feats.dim(3);
    feat_dims_ = {support_feats.dim(1), support_feats.dim(2),
                  support_feats.dim(3)};
    const int way = shape.way, qn = shape.n_query();
    const bool refine = rhs_.mode != RhsMode::none;

    // Prototypes: per-class mean of support maps.
    protos_.assign(static_cast<std::size_t>(way), RowMat<T>());
    for (int cls = 0; cls < way; ++cls) {
      RowMat<T>& proto = protos_[static_cast<std::size_t>(cls)];
      proto = RowMat<T>::Zero(c_, s_);
      for (int k = 0; k < shape.shot; ++k) {
        const T* base =
            support_feats.data() + (static_cast<std::int64_t>(cls) * shape.shot + k) * c_ * s_;
        proto += nn::ConstMatMap<T>(base, c_, s_);
      }
      proto /= static_cast<T>(shape.shot);
    }

    if (refine) {
      khat_.assign(static_cast<std::size_t>(way), RowMat<T>());
      kn_.assign(static_cast<std::size_t>(way), RowMat<T>());
      k_norms_.assign(static_cast<std::size_t>(way), {});
      if (rhs_.mode == RhsMode::cross_attention)
        vhat_.assign(static_cast<std::size_t>(way), RowMat<T>());
      for (int cls = 0; cls < way; ++cls) {
        auto& kh = khat_[static_cast<std::size_t>(cls)];
        kh = project(rhs_.key_w, rhs_.key_b, protos_[static_cast<std::size_t>(cls)]);
        row_normalize(kh, kn_[static_cast<std::size_t>(cls)],
                      k_norms_[static_cast<std::size_t>(cls)]);
        if (rhs_.mode == RhsMode::cross_attention)
          vhat_[static_cast<std::size_t>(cls)] = project(
              rhs_.value_w, rhs_.value_b, protos_[static_cast<std::size_t>(cls)]);
      }
    }

    // Query-side caches.
    query_feats_ = query_feats;
    qhat_.assign(static_cast<std::size_t>(refine ? qn : 0), RowMat<T>());
    qn_.assign(static_cast<std::size_t>(refine ? qn : 0), RowMat<T>());
    q_norms_.assign(static_cast<std::size_t>(refine ? qn : 0), {});
    qsum_.assign(static_cast<std::size_t>(qn), SummarizeCache<T>{});
    qemb_.assign(static_cast<std::size_t>(qn), {});
    for (int j = 0; j < qn; ++j) {
      Tensor<T> fq = query_map(j);
      qemb_[static_cast<std::size_t>(j)] =
          summarize(fq, &qsum_[static_cast<std::size_t>(j)]);
      if (refine) {
        auto& qh = qhat_[static_cast<std::size_t>(j)];
        qh = project(rhs_.query_w, rhs_.query_b, detail::as_matrix(fq));
        row_normalize(qh, qn_[static_cast<std::size_t>(j)],
                      q_norms_[static_cast<std::size_t>(j)]);
      }
    }

    // Pairwise logits.
    keep_ = keep_caches;
    m_.assign(keep_caches && refine ? static_cast<std::size_t>(qn) * way : 0,
              RowMat<T>());
    psum_.assign(static_cast<std::size_t>(qn) * way, SummarizeCache<T>{});
    pemb_.assign(static_cast<std::size_t>(qn) * way, {});
    cls_emb_.clear();
    cls_sum_.clear();

    Tensor<T> logits({qn, way});
    if (!refine) {
      // Prototype summaries are query-independent.
      cls_emb_.assign(static_cast<std::size_t>(way), {});
      cls_sum_.assign(static_cast<std::size_t>(way), SummarizeCache<T>{});
      for (int cls = 0; cls < way; ++cls) {
        Tensor<T> pm({c_, s_});
        nn::MatMap<T>(pm.data(), c_, s_) = protos_[static_cast<std::size_t>(cls)];
        cls_emb_[static_cast<std::size_t>(cls)] =
            summarize(pm, &cls_sum_[static_cast<std::size_t>(cls)]);
      }
      for (int j = 0; j < qn; ++j)
        for (int cls = 0; cls < way; ++cls)
          logits.at(j, cls) =
              tau_ * cosine(std::span<const T>(qemb_[static_cast<std::size_t>(j)]),
                            std::span<const T>(cls_emb_[static_cast<std::size_t>(cls)]));
      logits_ = logits;
      return logits;
    }

    RowMat<T> m, refined;
    for (int j = 0; j < qn; ++j) {
      for (int cls = 0; cls < way; ++cls) {
        const std::size_t pair = static_cast<std::size_t>(j) * way + cls;
        m.noalias() = qn_[static_cast<std::size_t>(j)] *
                      kn_[static_cast<std::size_t>(cls)].transpose();
        detail::softmax_rows_inplace(m);
        const RowMat<T>& mixed = rhs_.mode == RhsMode::cross_attention
                                     ? vhat_[static_cast<std::size_t>(cls)]
                                     : khat_[static_cast<std::size_t>(cls)];
        refined.noalias() = mixed * m.transpose();
        refined += protos_[static_cast<std::size_t>(cls)];

        Tensor<T> rm({c_, s_});
        nn::MatMap<T>(rm.data(), c_, s_) = refined;
        pemb_[pair] = summarize(rm, &psum_[pair]);
        logits.at(j, cls) =
            tau_ * cosine(std::span<const T>(qemb_[static_cast<std::size_t>(j)]),
                          std::span<const T>(pemb_[pair]));
        if (keep_caches) m_[pair] = m;
      }
    }
    logits_ = logits;
    return logits;
  }

  /// dlogits (N*Q, N) -> (dsupport (N*K,C,h,w), dquery (N*Q,C,h,w)),
  /// accumulating RHS parameter gradients.
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dlogits) {
    const int way = shape_.way, qn = shape_.n_query();
    const bool refine = rhs_.mode != RhsMode::none;
    if (refine && !keep_)
      throw Error("EpisodicHead: forward ran without caches");

    std::vector<RowMat<T>> dproto(static_cast<std::size_t>(way),
                                  RowMat<T>::Zero(c_, s_));
    std::vector<RowMat<T>> dkhat, dvhat, dqhat;
    std::vector<std::vector<T>> dqemb(
        static_cast<std::size_t>(qn),
        std::vector<T>(static_cast<std::size_t>(c_), T(0)));
    if (refine) {
      dkhat.assign(static_cast<std::size_t>(way), RowMat<T>::Zero(c_, s_));
      dqhat.assign(static_cast<std::size_t>(qn), RowMat<T>::Zero(c_, s_));
      if (rhs_.mode == RhsMode::cross_attention)
        dvhat.assign(static_cast<std::size_t>(way), RowMat<T>::Zero(c_, s_));
    }

    if (!refine) {
      std::vector<std::vector<T>> dcls_emb(
          static_cast<std::size_t>(way),
          std::vector<T>(static_cast<std::size_t>(c_), T(0)));
      for (int j = 0; j < qn; ++j)
        for (int cls = 0; cls < way; ++cls)
          cosine_backward(qemb_[static_cast<std::size_t>(j)],
                          cls_emb_[static_cast<std::size_t>(cls)],
                          tau_ * dlogits.at(j, cls),
                          dqemb[static_cast<std::size_t>(j)],
                          dcls_emb[static_cast<std::size_t>(cls)]);
      for (int cls = 0; cls < way; ++cls)
        summarize_backward(cls_sum_[static_cast<std::size_t>(cls)],
                           dcls_emb[static_cast<std::size_t>(cls)],
                           dproto[static_cast<std::size_t>(cls)]);
    } else {
      RowMat<T> drefined(c_, s_), dm;
      std::vector<T> dpemb(static_cast<std::size_t>(c_));
      for (int j = 0; j < qn; ++j) {
        for (int cls = 0; cls < way; ++cls) {
          const std::size_t pair = static_cast<std::size_t>(j) * way + cls;
          const T g = tau_ * dlogits.at(j, cls);
          std::fill(dpemb.begin(), dpemb.end(), T(0));
          cosine_backward(qemb_[static_cast<std::size_t>(j)], pemb_[pair], g,
                          dqemb[static_cast<std::size_t>(j)], dpemb);

          drefined.setZero();
          summarize_backward(psum_[pair], dpemb, drefined);

          dproto[static_cast<std::size_t>(cls)] += drefined;  // residual
          const RowMat<T>& mixed = rhs_.mode == RhsMode::cross_attention
                                       ? vhat_[static_cast<std::size_t>(cls)]
                                       : khat_[static_cast<std::size_t>(cls)];
          if (rhs_.mode == RhsMode::cross_attention)
            dvhat[static_cast<std::size_t>(cls)].noalias() +=
                drefined * m_[pair];
          else
            dkhat[static_cast<std::size_t>(cls)].noalias() +=
                drefined * m_[pair];
          dm.noalias() = drefined.transpose() * mixed;
          relation_backward_core(qn_[static_cast<std::size_t>(j)],
                                 kn_[static_cast<std::size_t>(cls)],
                                 q_norms_[static_cast<std::size_t>(j)],
                                 k_norms_[static_cast<std::size_t>(cls)],
                                 m_[pair], dm,
                                 dqhat[static_cast<std::size_t>(j)],
                                 dkhat[static_cast<std::size_t>(cls)]);
        }
      }
    }

    // Query-side: summaries always; projections when refining.
    Tensor<T> dquery({qn, feat_dims_[0], feat_dims_[1], feat_dims_[2]});
    for (int j = 0; j < qn; ++j) {
      RowMat<T> dfq = RowMat<T>::Zero(c_, s_);
      summarize_backward(qsum_[static_cast<std::size_t>(j)],
                         dqemb[static_cast<std::size_t>(j)], dfq);
      if (refine) {
        accumulate_projection_grads(rhs_.query_w, rhs_.query_b,
                                    detail::as_matrix(query_map(j)),
                                    dqhat[static_cast<std::size_t>(j)], dfq);
      }
      nn::MatMap<T>(dquery.data() + static_cast<std::int64_t>(j) * c_ * s_, c_,
                    s_) = dfq;
    }

    // Prototype-side projections, then distribute means to support maps.
    if (refine) {
      for (int cls = 0; cls < way; ++cls) {
        accumulate_projection_grads(rhs_.key_w, rhs_.key_b,
                                    protos_[static_cast<std::size_t>(cls)],
                                    dkhat[static_cast<std::size_t>(cls)],
                                    dproto[static_cast<std::size_t>(cls)]);
        if (rhs_.mode == RhsMode::cross_attention)
          accumulate_projection_grads(rhs_.value_w, rhs_.value_b,
                                      protos_[static_cast<std::size_t>(cls)],
                                      dvhat[static_cast<std::size_t>(cls)],
                                      dproto[static_cast<std::size_t>(cls)]);
      }
    }

    Tensor<T> dsupport({static_cast<std::int64_t>(shape_.n_support()),
                        feat_dims_[0], feat_dims_[1], feat_dims_[2]});
    const T inv_shot = T(1) / static_cast<T>(shape_.shot);
    for (int cls = 0; cls < way; ++cls)
      for (int k = 0; k < shape_.shot; ++k)
        nn::MatMap<T>(dsupport.data() +
                          (static_cast<std::int64_t>(cls) * shape_.shot + k) *
                              c_ * s_,
                      c_, s_) = dproto[static_cast<std::size_t>(cls)] * inv_shot;
    return {std::move(dsupport), std::move(dquery)};
  }

  const Tensor<T>& logits() const { return logits_; }

 private:
  Tensor<T> query_map(int j) const {
    Tensor<T> fq({c_, s_});
    const T* base = query_feats_.data() + static_cast<std::int64_t>(j) * c_ * s_;
    std::copy(base, base + c_ * s_, fq.data());
    return fq;
  }

  RowMat<T> project(const nn::Param<T>& w, const nn::Param<T>& b,
                    const Eigen::Ref<const RowMat<T>>& x) const {
    RowMat<T> y = nn::ConstMatMap<T>(w.value.data(), c_, c_) * x;
    y.colwise() +=
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(b.value.data(),
                                                              c_);
    return y;
  }

  void accumulate_projection_grads(nn::Param<T>& w, nn::Param<T>& b,
                                   const Eigen::Ref<const RowMat<T>>& x,
                                   const RowMat<T>& dy, RowMat<T>& dx) {
    nn::MatMap<T>(w.grad.data(), c_, c_).noalias() += dy * x.transpose();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(b.grad.data(), c_) +=
        dy.rowwise().sum();
    dx.noalias() +=
        nn::ConstMatMap<T>(w.value.data(), c_, c_).transpose() * dy;
  }

  static void row_normalize(const RowMat<T>& feat, RowMat<T>& rows,
                            std::vector<T>& norms) {
    rows = feat.transpose();
    norms.assign(static_cast<std::size_t>(rows.rows()), T(0));
    for (std::int64_t i = 0; i < rows.rows(); ++i) {
      T n = rows.row(i).norm();
      norms[static_cast<std::size_t>(i)] = n;
      if (n > T(0))
        rows.row(i) /= n;
      else
        rows.row(i).setZero();
    }
  }

  /// d(g * cos(u,v)) accumulated into du, dv; zero-norm pairs contribute 0.
  static void cosine_backward(const std::vector<T>& u, const std::vector<T>& v,
                              T g, std::vector<T>& du, std::vector<T>& dv) {
    T uu = 0, vv = 0, uv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      uu += u[i] * u[i];
      vv += v[i] * v[i];
      uv += u[i] * v[i];
    }
    if (uu <= T(0) || vv <= T(0)) return;
    const T nu = std::sqrt(uu), nv = std::sqrt(vv);
    const T c = uv / (nu * nv);
    for (std::size_t i = 0; i < u.size(); ++i) {
      du[i] += g * (v[i] / (nu * nv) - c * u[i] / uu);
      dv[i] += g * (u[i] / (nu * nv) - c * v[i] / vv);
    }
  }

  RhsParams<T> rhs_;
  T tau_ = T(10);

  // forward caches
  EpisodeShape shape_;
  std::vector<std::int64_t> feat_dims_;
  std::int64_t c_ = 0, s_ = 0;
  bool keep_ = true;
  Tensor<T> query_feats_;
  std::vector<RowMat<T>> protos_, khat_, vhat_, kn_, qhat_, qn_;
  std::vector<std::vector<T>> k_norms_, q_norms_;
  std::vector<SummarizeCache<T>> qsum_, psum_, cls_sum_;
  std::vector<std::vector<T>> qemb_, pemb_, cls_emb_;
  std::vector<RowMat<T>> m_;
  Tensor<T> logits_;
};

}  // namespace rsad
