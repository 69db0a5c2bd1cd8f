#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rsad/rhs.hpp"
#include "testutil.hpp"

using namespace rsad;

namespace {

RhsParams<double> random_params(int channels, RhsMode mode, Rng& rng) {
  RhsParams<double> params;
  params.init(channels, mode, rng);
  if (mode != RhsMode::none) {
    for (std::int64_t i = 0; i < params.key_b.value.size(); ++i) {
      params.key_b.value[i] = rng.normal(0, 0.3);
      params.query_b.value[i] = rng.normal(0, 0.3);
    }
  }
  return params;
}

oracle::RhsInstance to_oracle(const TensorD& pt, const TensorD& fq,
                              const RhsParams<double>& params) {
  oracle::RhsInstance in;
  in.c = static_cast<int>(params.channels);
  in.s = static_cast<int>(pt.size() / params.channels);
  in.pt.assign(pt.data(), pt.data() + pt.size());
  in.fq.assign(fq.data(), fq.data() + fq.size());
  in.wk.assign(params.key_w.value.data(),
               params.key_w.value.data() + params.key_w.value.size());
  in.bk.assign(params.key_b.value.data(),
               params.key_b.value.data() + params.key_b.value.size());
  in.wq.assign(params.query_w.value.data(),
               params.query_w.value.data() + params.query_w.value.size());
  in.bq.assign(params.query_b.value.data(),
               params.query_b.value.data() + params.query_b.value.size());
  return in;
}

}  // namespace

TEST_CASE("prototypes: K=1 identity, means, and permutation invariance") {
  Rng rng(1);
  TensorD a = testutil::random_tensor<double>({3, 2, 2}, rng);
  std::vector<std::vector<TensorD>> single{{a}};
  auto protos = compute_prototypes(single);
  REQUIRE(protos.size() == 1);
  for (std::int64_t i = 0; i < a.size(); ++i) CHECK(protos[0][i] == a[i]);

  TensorD zero({3, 2, 2});
  TensorD two = TensorD::full({3, 2, 2}, 2.0);
  std::vector<std::vector<TensorD>> pair{{zero, two}};
  auto mean = compute_prototypes(pair);
  for (std::int64_t i = 0; i < mean[0].size(); ++i) CHECK(mean[0][i] == 1.0);

  TensorD b = testutil::random_tensor<double>({3, 2, 2}, rng);
  std::vector<std::vector<TensorD>> fwd{{a, b}}, rev{{b, a}};
  auto p1 = compute_prototypes(fwd);
  auto p2 = compute_prototypes(rev);
  for (std::int64_t i = 0; i < p1[0].size(); ++i)
    CHECK(p1[0][i] == doctest::Approx(p2[0][i]));

  std::vector<std::vector<TensorD>> empty_class{{}};
  CHECK_THROWS_AS(compute_prototypes(empty_class), InputError);
}

TEST_CASE("relation matrix rows sum to 1 on random instances") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    TensorD q = testutil::random_tensor<double>({8, 9}, rng);
    TensorD k = testutil::random_tensor<double>({8, 9}, rng);
    TensorD m = relation_matrix(q, k);
    for (int i = 0; i < 9; ++i) {
      double row = 0;
      for (int j = 0; j < 9; ++j) {
        CHECK(m.at(i, j) >= 0.0);
        row += m.at(i, j);
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("relation matrix hand case: identical and orthogonal descriptors") {
  // hw = 2: q_1 == k_1, q_1 orthogonal to k_2 -> row 1 = softmax(1, 0).
  TensorD q({2, 2}), k({2, 2});
  q.at(0, 0) = 1.0;  // q_1 = (1,0)
  q.at(1, 1) = 1.0;  // q_2 = (0,1)
  k.at(0, 0) = 1.0;  // k_1 = (1,0)
  k.at(1, 1) = 1.0;  // k_2 = (0,1)
  TensorD m = relation_matrix(q, k);
  const double e = std::exp(1.0);
  CHECK(m.at(0, 0) == doctest::Approx(e / (e + 1)).epsilon(1e-4));
  CHECK(m.at(0, 1) == doctest::Approx(1 / (e + 1)).epsilon(1e-4));
  CHECK(m.at(0, 0) == doctest::Approx(0.7311).epsilon(1e-3));
  CHECK(m.at(0, 1) == doctest::Approx(0.2689).epsilon(1e-3));
}

TEST_CASE("relation matrix is invariant to positive descriptor rescaling") {
  Rng rng(3);
  TensorD q = testutil::random_tensor<double>({4, 6}, rng);
  TensorD k = testutil::random_tensor<double>({4, 6}, rng);
  TensorD m0 = relation_matrix(q, k);

  TensorD qs = q, ks = k;
  for (int i = 0; i < 6; ++i) {
    double sq = rng.uniform(0.2, 5.0), sk = rng.uniform(0.2, 5.0);
    for (int c = 0; c < 4; ++c) {
      qs.at(c, i) *= sq;
      ks.at(c, i) *= sk;
    }
  }
  TensorD m1 = relation_matrix(qs, ks);
  for (std::int64_t i = 0; i < m0.size(); ++i)
    CHECK(m1[i] == doctest::Approx(m0[i]).epsilon(1e-9));
}

TEST_CASE("relation matrix shape mismatch is an input error") {
  Rng rng(4);
  TensorD q = testutil::random_tensor<double>({4, 6}, rng);
  TensorD k = testutil::random_tensor<double>({4, 5}, rng);
  CHECK_THROWS_AS(relation_matrix(q, k), InputError);
}

TEST_CASE("zero-norm descriptors contribute cosine 0 (uniform row)") {
  TensorD q({2, 2}), k({2, 2});
  // q_1 is the zero descriptor; its cosines are all 0 -> uniform softmax row.
  q.at(0, 1) = 1.0;
  k.at(0, 0) = 1.0;
  k.at(1, 1) = 1.0;
  TensorD m = relation_matrix(q, k);
  CHECK(m.at(0, 0) == doctest::Approx(0.5));
  CHECK(m.at(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("highlight with zero key projection returns the prototype") {
  Rng rng(5);
  RhsParams<double> params;
  params.init(3, RhsMode::rhs, rng);
  params.key_w.value.zero();  // proj_k output identically zero
  params.key_b.value.zero();
  TensorD pt = testutil::random_tensor<double>({3, 2, 2}, rng);
  TensorD fq = testutil::random_tensor<double>({3, 2, 2}, rng);
  TensorD refined = highlight(pt, fq, params);
  for (std::int64_t i = 0; i < pt.size(); ++i)
    CHECK(refined[i] == doctest::Approx(pt[i]).epsilon(1e-12));
}

TEST_CASE("hw=1 forces the identity relation: refined = khat + pt") {
  Rng rng(6);
  RhsParams<double> params = random_params(3, RhsMode::rhs, rng);
  TensorD pt = testutil::random_tensor<double>({3, 1, 1}, rng);
  TensorD fq = testutil::random_tensor<double>({3, 1, 1}, rng);
  TensorD refined = highlight(pt, fq, params);
  for (int c = 0; c < 3; ++c) {
    double k = params.key_b.value[c];
    for (int j = 0; j < 3; ++j) k += params.key_w.value.at(c, j) * pt[j];
    CHECK(refined[c] == doctest::Approx(k + pt[c]).epsilon(1e-12));
  }
}

TEST_CASE("highlight+summarize matches the brute-force oracle to 1e-9") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    RhsParams<double> params = random_params(4, RhsMode::rhs, rng);
    TensorD pt = testutil::random_tensor<double>({4, 3, 3}, rng);
    TensorD fq = testutil::random_tensor<double>({4, 3, 3}, rng);

    TensorD refined = highlight(pt, fq, params);
    std::vector<double> emb = summarize(refined);

    oracle::RhsInstance in = to_oracle(pt, fq, params);
    std::vector<double> oracle_refined = oracle::highlight(in);
    std::vector<double> oracle_emb =
        oracle::summarize(oracle_refined, in.c, in.s);

    for (std::int64_t i = 0; i < refined.size(); ++i)
      CHECK(refined[i] ==
            doctest::Approx(oracle_refined[static_cast<std::size_t>(i)])
                .epsilon(1e-9));
    for (std::size_t i = 0; i < emb.size(); ++i)
      CHECK(emb[i] == doctest::Approx(oracle_emb[i]).epsilon(1e-9));
  }
}

TEST_CASE("highlight mode none is the identity") {
  Rng rng(8);
  RhsParams<double> params;
  params.init(3, RhsMode::none, rng);
  TensorD pt = testutil::random_tensor<double>({3, 2, 2}, rng);
  TensorD fq = testutil::random_tensor<double>({3, 2, 2}, rng);
  TensorD refined = highlight(pt, fq, params);
  for (std::int64_t i = 0; i < pt.size(); ++i) CHECK(refined[i] == pt[i]);
}

TEST_CASE("summarize: constant, arithmetic, and permutation cases") {
  TensorD constant = TensorD::full({2, 4}, 3.0);
  auto emb = summarize(constant);
  CHECK(emb[0] == doctest::Approx(6.0));  // mean 3 + max 3

  TensorD two({1, 2});
  two.at(0, 0) = 0.0;
  two.at(0, 1) = 4.0;
  CHECK(summarize(two)[0] == doctest::Approx(6.0));  // mean 2 + max 4

  Rng rng(9);
  TensorD map = testutil::random_tensor<double>({3, 6}, rng);
  TensorD permuted({3, 6});
  const int perm[6] = {4, 2, 0, 5, 1, 3};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 6; ++i) permuted.at(c, i) = map.at(c, perm[i]);
  auto e1 = summarize(map);
  auto e2 = summarize(permuted);
  for (std::size_t i = 0; i < e1.size(); ++i)
    CHECK(e1[i] == doctest::Approx(e2[i]).epsilon(1e-12));
}

TEST_CASE(
    "joint spatial permutation permutes M columns and preserves summaries") {
  Rng rng(10);
  RhsParams<double> params = random_params(3, RhsMode::rhs, rng);
  TensorD pt = testutil::random_tensor<double>({3, 4}, rng);
  TensorD fq = testutil::random_tensor<double>({3, 4}, rng);
  const int perm[4] = {2, 0, 3, 1};

  TensorD ptp({3, 4}), fqp({3, 4});
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i) {
      ptp.at(c, i) = pt.at(c, perm[i]);
      fqp.at(c, i) = fq.at(c, perm[i]);
    }

  // Prototype-side permutation permutes the relation matrix's columns.
  auto project = [&](const nn::Param<double>& w, const nn::Param<double>& b,
                     const TensorD& x) {
    TensorD y({3, 4});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        double acc = b.value[i];
        for (int k = 0; k < 3; ++k) acc += w.value.at(i, k) * x.at(k, j);
        y.at(i, j) = acc;
      }
    return y;
  };
  TensorD qhat = project(params.query_w, params.query_b, fq);
  TensorD khat = project(params.key_w, params.key_b, pt);
  TensorD khat_p = project(params.key_w, params.key_b, ptp);
  TensorD m = relation_matrix(qhat, khat);
  TensorD m_cols = relation_matrix(qhat, khat_p);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(m_cols.at(i, j) ==
            doctest::Approx(m.at(i, perm[j])).epsilon(1e-12));

  // Jointly permuting both maps permutes the refined map's positions, so
  // the summarized embedding is unchanged.
  TensorD r0 = highlight(pt, fq, params);
  TensorD r1 = highlight(ptp, fqp, params);
  auto e0 = summarize(r0);
  auto e1 = summarize(r1);
  for (std::size_t i = 0; i < e0.size(); ++i)
    CHECK(e0[i] == doctest::Approx(e1[i]).epsilon(1e-9));
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i)
      CHECK(r1.at(c, i) == doctest::Approx(r0.at(c, perm[i])).epsilon(1e-9));
}

TEST_CASE("query-conditioning: distinct queries refine differently") {
  Rng rng(11);
  RhsParams<double> params = random_params(4, RhsMode::rhs, rng);
  TensorD pt = testutil::random_tensor<double>({4, 3, 3}, rng);
  TensorD fq1 = testutil::random_tensor<double>({4, 3, 3}, rng);
  TensorD fq2 = testutil::random_tensor<double>({4, 3, 3}, rng);

  TensorD r1 = highlight(pt, fq1, params);
  TensorD r1_again = highlight(pt, fq1, params);
  TensorD r2 = highlight(pt, fq2, params);
  bool identical = true, distinct = false;
  for (std::int64_t i = 0; i < r1.size(); ++i) {
    if (r1[i] != r1_again[i]) identical = false;
    if (std::abs(r1[i] - r2[i]) > 1e-12) distinct = true;
  }
  CHECK(identical);
  CHECK(distinct);
}

TEST_CASE("highlight backward matches central differences") {
  Rng rng(12);
  RhsParams<double> params = random_params(4, RhsMode::rhs, rng);
  TensorD pt = testutil::random_tensor<double>({4, 3, 3}, rng);
  TensorD fq = testutil::random_tensor<double>({4, 3, 3}, rng);
  std::vector<double> proj(4);
  for (auto& v : proj) v = rng.normal();

  auto loss = [&]() {
    TensorD refined = highlight(pt, fq, params);
    auto emb = summarize(refined);
    double sum = 0;
    for (std::size_t i = 0; i < emb.size(); ++i) sum += emb[i] * proj[i];
    return sum;
  };

  HighlightCache<double> cache;
  TensorD refined = highlight(pt, fq, params, &cache);
  SummarizeCache<double> scache;
  summarize(refined, &scache);
  RowMat<double> drefined = RowMat<double>::Zero(4, 9);
  summarize_backward(scache, proj, drefined);

  params.key_w.grad.zero();
  params.key_b.grad.zero();
  params.query_w.grad.zero();
  params.query_b.grad.zero();
  RowMat<double> dpt = RowMat<double>::Zero(4, 9);
  RowMat<double> dfq = RowMat<double>::Zero(4, 9);
  highlight_backward(cache, params, drefined, dpt, dfq);

  std::vector<double> analytic;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 9; ++i) analytic.push_back(dpt(c, i));
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 9; ++i) analytic.push_back(dfq(c, i));
  for (std::int64_t i = 0; i < params.key_w.grad.size(); ++i)
    analytic.push_back(params.key_w.grad[i]);
  for (std::int64_t i = 0; i < params.key_b.grad.size(); ++i)
    analytic.push_back(params.key_b.grad[i]);
  for (std::int64_t i = 0; i < params.query_w.grad.size(); ++i)
    analytic.push_back(params.query_w.grad[i]);
  for (std::int64_t i = 0; i < params.query_b.grad.size(); ++i)
    analytic.push_back(params.query_b.grad[i]);

  std::vector<double> numeric;
  const double h = 1e-6;
  auto push_fd = [&](double& slot) {
    const double saved = slot;
    slot = saved + h;
    double fp = loss();
    slot = saved - h;
    double fm = loss();
    slot = saved;
    numeric.push_back((fp - fm) / (2 * h));
  };
  for (std::int64_t i = 0; i < pt.size(); ++i) push_fd(pt[i]);
  for (std::int64_t i = 0; i < fq.size(); ++i) push_fd(fq[i]);
  for (std::int64_t i = 0; i < params.key_w.value.size(); ++i)
    push_fd(params.key_w.value[i]);
  for (std::int64_t i = 0; i < params.key_b.value.size(); ++i)
    push_fd(params.key_b.value[i]);
  for (std::int64_t i = 0; i < params.query_w.value.size(); ++i)
    push_fd(params.query_w.value[i]);
  for (std::int64_t i = 0; i < params.query_b.value.size(); ++i)
    push_fd(params.query_b.value[i]);

  CHECK(oracle::max_rel_error(analytic, numeric) < 1e-4);
}

TEST_CASE("cross-attention mode uses the value projection") {
  Rng rng(13);
  RhsParams<double> params = random_params(3, RhsMode::cross_attention, rng);
  std::vector<nn::NamedParam<double>> named;
  params.collect_params("rhs", named);
  CHECK(named.size() == 6);  // key, query, value weights + biases
  bool has_value = false;
  for (auto& np : named)
    if (np.name == "rhs.value.weight") has_value = true;
  CHECK(has_value);

  TensorD pt = testutil::random_tensor<double>({3, 2, 2}, rng);
  TensorD fq = testutil::random_tensor<double>({3, 2, 2}, rng);
  TensorD with_value = highlight(pt, fq, params);
  // Zero value projection leaves only the residual.
  params.value_w.value.zero();
  params.value_b.value.zero();
  TensorD residual_only = highlight(pt, fq, params);
  for (std::int64_t i = 0; i < pt.size(); ++i)
    CHECK(residual_only[i] == doctest::Approx(pt[i]).epsilon(1e-12));
  bool differs = false;
  for (std::int64_t i = 0; i < pt.size(); ++i)
    if (std::abs(with_value[i] - pt[i]) > 1e-9) differs = true;
  CHECK(differs);
}
