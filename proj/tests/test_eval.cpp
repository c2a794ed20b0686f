#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "inflrank/error.hpp"
#include "inflrank/eval.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace inflrank;
using testing_support::account;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!l[i] || l[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

std::vector<ScoredCandidate> ranked_from(const std::vector<std::string>& ids, const std::vector<double>& s) {
  return rank_scores(ids, s);
}

}  // namespace

TEST_CASE("rank_scores orders by score then id") {
  const auto r = rank_scores(std::vector<std::string>{"b", "a"}, std::vector<double>{0.1, 0.9});
  CHECK(r[0].influencer_id == "a");
  CHECK(r[1].influencer_id == "b");
  const auto t = rank_scores(std::vector<std::string>{"c", "a", "b"}, std::vector<double>{1, 1, 1});
  CHECK(t[0].influencer_id == "a");
  CHECK(t[1].influencer_id == "b");
  CHECK(t[2].influencer_id == "c");
}

TEST_CASE("rank_scores matches a brute-force sort") {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + gen() % 20;
    std::vector<std::string> ids;
    std::vector<double> s;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("x" + std::to_string(gen() % 1000) + "_" + std::to_string(i));
      s.push_back(level(gen) * 0.5);
    }
    const auto r = rank_scores(ids, s);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    // Selection sort oracle.
    for (std::size_t a = 0; a < n; ++a) {
      std::size_t best = a;
      for (std::size_t b = a + 1; b < n; ++b) {
        const bool better = s[idx[b]] > s[idx[best]] || (s[idx[b]] == s[idx[best]] && ids[idx[b]] < ids[idx[best]]);
        if (better) best = b;
      }
      std::swap(idx[a], idx[best]);
      CHECK(r[a].influencer_id == ids[idx[a]]);
    }
  }
}

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{3, 2, 1}, {true, false, true}) == 0.5);
  CHECK(auc(std::vector<double>{3, 2, 1}, {true, true, false}) == 1.0);
  CHECK(auc(std::vector<double>{3, 2, 1}, {false, false, true}) == 0.0);
  CHECK(auc(std::vector<double>{1, 1}, {true, false}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{1, 2}, {true, true}), MetricError);
}

TEST_CASE("auc is invariant under increasing transforms") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> s(40), t(40);
  std::vector<bool> l(40);
  for (std::size_t i = 0; i < 40; ++i) {
    s[i] = std::round(n(gen) * 3.0) / 3.0;
    t[i] = std::exp(2.0 * s[i]) + 5.0;
    l[i] = i % 3 == 0;
  }
  CHECK(auc(s, l) == auc(t, l));
  CHECK(auc(s, l) == pairwise_auc(s, l));
}

TEST_CASE("recall_at_k") {
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  const auto r = ranked_from(ids, {4, 3, 2, 1});
  CHECK(recall_at_k(r, {"a", "b"}, 2) == 1.0);
  CHECK(recall_at_k(r, {"a", "d"}, 2) == 0.5);
  CHECK(recall_at_k(r, {"c", "d"}, 10) == 1.0);
  CHECK_THROWS_AS(recall_at_k(r, {}, 2), MetricError);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 4; ++k) {
    const double v = recall_at_k(r, {"b", "d"}, k);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("random recall@10 expectation") {
  // 10 positives among 200 candidates: E[Recall@10] = 10/200.
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.push_back("c" + std::to_string(i));
  const std::set<std::string> positives(ids.begin(), ids.begin() + 10);
  const PooledAccount brand = account("b", AccountKind::brand, 0, {1}, {1});
  std::vector<PooledAccount> cands;
  for (const auto& id : ids) cands.push_back(account(id, AccountKind::influencer, 0, {1}, {1}));
  std::vector<const PooledAccount*> ptrs;
  for (const auto& c : cands) ptrs.push_back(&c);
  double total = 0.0;
  const int seeds = 2000;
  for (int s = 0; s < seeds; ++s) total += recall_at_k(rank_brand(random_scorer(s), brand, ptrs), positives, 10);
  CHECK(total / seeds == doctest::Approx(0.05).epsilon(0.1));
}

TEST_CASE("medr") {
  CHECK(medr(std::vector<std::size_t>{1, 3, 2}) == 2.0);
  CHECK(medr(std::vector<std::size_t>{1, 1, 1, 1}) == 1.0);
  CHECK(medr(std::vector<std::size_t>{4, 1, 3, 2}) == 2.0);
  CHECK_THROWS_AS(medr(std::vector<std::size_t>{}), MetricError);
}

TEST_CASE("metric oracles on random instances") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + gen() % 19;
    std::vector<double> s(n);
    std::vector<bool> l(n);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(gen() % 6);
      l[i] = gen() % 2 == 0;
      ids[i] = "c" + std::to_string(100 + i);
    }
    l[0] = true;
    l[1] = false;
    CHECK(auc(s, l) == pairwise_auc(s, l));

    const auto r = rank_scores(ids, s);
    std::set<std::string> pos;
    for (std::size_t i = 0; i < n; ++i) if (l[i]) pos.insert(ids[i]);
    const std::size_t k = 1 + gen() % n;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += pos.contains(r[i].influencer_id);
    CHECK(recall_at_k(r, pos, k) == static_cast<double>(hits) / static_cast<double>(pos.size()));

    std::vector<std::size_t> ranks(1 + gen() % 9);
    for (auto& x : ranks) x = 1 + gen() % 50;
    std::vector<std::size_t> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    CHECK(medr(ranks) == static_cast<double>(sorted[(sorted.size() - 1) / 2]));
  }
}

TEST_CASE("simcos baseline") {
  const auto a = account("a", AccountKind::brand, 0, {1, 0}, {1});
  const auto b = account("b", AccountKind::influencer, 0, {1, 0}, {1});
  const auto c = account("c", AccountKind::influencer, 0, {0, 1}, {0});
  CHECK(baseline_simcos(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(baseline_simcos(a, c) == 0.0);
  const auto w = account("w", AccountKind::influencer, 0, {0.3, -2}, {5});
  auto a2 = a;
  for (double& x : a2.text_pooled) x *= 2;
  for (double& x : a2.visual_pooled) x *= 2;
  CHECK(baseline_simcos(a2, w) == doctest::Approx(baseline_simcos(a, w)).epsilon(1e-15));
  const auto z = account("z", AccountKind::influencer, 0, {0, 0}, {0});
  CHECK_THROWS_AS(baseline_simcos(a, z), MetricError);
}

TEST_CASE("random baseline near one half and seeded") {
  SyntheticSpec spec;
  spec.seed = 4;
  const Dataset d = generate_synthetic(spec);
  const FoldMetrics m = evaluate_brands(random_scorer(7), d, d.brand_ids());
  CHECK(m.n_brands >= 50);
  CHECK(m.auc >= 0.45);
  CHECK(m.auc <= 0.55);
  const FoldMetrics again = evaluate_brands(random_scorer(7), d, d.brand_ids());
  CHECK(again.auc == m.auc);
  CHECK(again.medr == m.medr);
}

TEST_CASE("cross_validate with injected scorers") {
  SyntheticSpec spec;
  spec.seed = 5;
  const Dataset d = generate_synthetic(spec);
  ScorerFactory perfect = [&](const FoldSplit&) {
    Scorer s = [&](const PooledAccount& b, std::span<const PooledAccount* const> cs) {
      std::vector<double> out;
      for (const PooledAccount* c : cs) out.push_back(d.is_positive(b.id, c->id) ? 1.0 : 0.0);
      return out;
    };
    return FoldScorer{s, 0};
  };
  const MetricsReport r = cross_validate(d, 5, 1, perfect, "perfect", 0);
  CHECK(r.folds.size() == 5);
  CHECK(r.auc.mean == 1.0);
  CHECK(r.auc.std == 0.0);
  CHECK(r.medr.mean == 1.0);

  CvConfig cv;
  cv.model = "random";
  const MetricsReport rr = cross_validate(d, cv);
  CHECK(std::abs(rr.auc.mean - 0.5) < 0.05);

  ScorerFactory broken = [](const FoldSplit& s) -> FoldScorer {
    if (s.fold == 2) throw NumericError("boom");
    return FoldScorer{simcos_scorer(), 0};
  };
  CHECK_THROWS_WITH_AS(cross_validate(d, 5, 1, broken, "x", 0), doctest::Contains("fold 2"), NumericError);
}

TEST_CASE("candidate universe") {
  const Dataset d = testing_support::random_dataset(2, 1, 1, 1, 2, 2, 6, 2, 3);
  // b0_0 -> i0_0, i0_1; unassociated: i0_3..5, i1_3..5.
  const auto u = candidate_universe(d, {"b0_0"});
  CHECK(u == std::vector<std::string>{"i0_0", "i0_1", "i0_3", "i0_4", "i0_5", "i1_3", "i1_4", "i1_5"});
}

TEST_CASE("report formats carry the table columns") {
  FoldMetrics a;
  a.auc = 0.8;
  a.recall_at_10 = 0.5;
  a.recall_at_50 = 0.9;
  a.medr = 3;
  FoldMetrics b = a;
  b.auc = 0.6;
  const MetricsReport r = make_report("wsim", 4, {a, b}, 67);
  CHECK(r.auc.mean == doctest::Approx(0.7));
  CHECK(r.auc.std == doctest::Approx(std::sqrt(0.02)));
  const std::vector<MetricsReport> rs{r};
  const std::string csv = report_csv(rs);
  CHECK(csv.rfind("model,k,AUC,AUC_std,Recall@10,Recall@10_std,Recall@50,Recall@50_std,MedR,MedR_std,N.Params\n", 0) ==
        0);
  const auto j = nlohmann::json::parse(report_json(rs));
  const auto& row = j.at("reports").at(0);
  for (const char* key : {"AUC", "Recall@10", "Recall@50", "MedR", "N.Params"}) CHECK(row.contains(key));
  CHECK(row.at("N.Params") == 67);
}
