// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "inflrank/error.hpp"
#include "inflrank/eval.hpp"
#include "inflrank/interpret.hpp"
#include "inflrank/models.hpp"
#include "inflrank/sampler.hpp"
#include "inflrank/train.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace inflrank;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

template <typename P>
std::vector<Tensor*> tensors_of(P& p) {
  std::vector<Tensor*> out;
  p.for_each_tensor([&](Tensor& t) { out.push_back(&t); });
  return out;
}

// 1. Analytic gradients agree with finite differences for both models.
Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  for (unsigned trial = 0; trial < 3; ++trial) {
    // d_t = 8, d_v = 2 * 2 * 3 = 12.
    const Dataset d = testing_support::random_dataset(8, 2, 2, 3, 3, 2, 8, 4, 100 + trial);
    Rng rng(trial + 1);

    WSimParams w = WSimParams::init(8, 12);
    for (Tensor* t : tensors_of(w)) {
      for (double& v : t->values()) v = rng.uniform(-1.0, 1.0);
    }
    const Architecture arch{6, {10}, {9}};
    WSimMTParams m = WSimMTParams::init(8, 12, 3, arch, 0.0, rng);
    for (Tensor* t : tensors_of(m)) {
      for (double& v : t->values()) v += rng.uniform(-0.3, 0.3);
    }

    for (const std::string& brand : d.brand_ids()) {
      for (const Pool& pool : build_pools(d, brand, PoolPlan{4, PoolMode::partial_sequence}, rng)) {
        const auto wr = wsim_loss_and_grads(w, pool, d);
        WSimParams wg = wr.grads;
        const auto wt = tensors_of(w);
        const auto wa = tensors_of(wg);
        for (std::size_t i = 0; i < wt.size(); ++i) {
          auto f = [&](const Tensor& x) {
            WSimParams q = w;
            *tensors_of(q)[i] = x;
            return wsim_loss_and_grads(q, pool, d).loss;
          };
          worst = std::max(worst, grad_check(f, *wt[i], *wa[i]));
          ++checked;
        }

        Rng off(0);
        MultitaskLoss ml = multitask_loss(m, pool, d, 0.5, 0.5, false, off);
        const auto mt = tensors_of(m);
        const auto ma = tensors_of(ml.grads);
        for (std::size_t i = 0; i < mt.size(); ++i) {
          auto f = [&](const Tensor& x) {
            WSimMTParams q = m;
            *tensors_of(q)[i] = x;
            Rng r(0);
            return multitask_loss(q, pool, d, 0.5, 0.5, false, r).loss;
          };
          worst = std::max(worst, grad_check(f, *mt[i], *ma[i]));
          ++checked;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          "max rel error " + fmt(worst) + " over " + std::to_string(checked) + " tensors, " + fmt(secs) + " s"};
}

// 2. Pool construction law.
Outcome pool_law() {
  const PooledAccount brand = testing_support::account("b", AccountKind::brand, 0, {1}, {1});
  auto ids = [](const std::string& prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
  };
  Rng rng(1);
  const auto five = build_pools(brand, ids("p", 5), ids("n", 12), PoolPlan{3, PoolMode::partial_sequence}, rng);
  std::map<std::size_t, int> levels;
  for (const Pool& p : five) ++levels[p.positive_count()];
  bool ok = five.size() == 15 && levels == std::map<std::size_t, int>{{1, 5}, {2, 5}, {3, 5}};

  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t k = 2; k <= 8; ++k) {
      const auto pos = ids("p", n);
      const std::set<std::string> pos_set(pos.begin(), pos.end());
      const auto pools = build_pools(brand, pos, ids("n", 16), PoolPlan{k, PoolMode::partial_sequence}, rng);
      ok = ok && pools.size() == n * std::min(k, n);
      std::map<std::size_t, std::set<std::string>> seen;
      for (const Pool& p : pools) {
        ok = ok && p.candidate_ids.size() == k;
        std::set<std::string> distinct(p.candidate_ids.begin(), p.candidate_ids.end());
        ok = ok && distinct.size() == k;
        for (std::size_t i = 0; i < k; ++i) {
          ok = ok && p.positive_mask[i] == pos_set.contains(p.candidate_ids[i]);
          if (p.positive_mask[i]) seen[p.positive_count()].insert(p.candidate_ids[i]);
        }
      }
      ok = ok && seen.size() == std::min(k, n);
      for (const auto& [level, members] : seen) ok = ok && members == pos_set;
      ++cases;
    }
  }
  return {ok, "n=5 K=3 gives " + std::to_string(five.size()) + " pools; " + std::to_string(cases) +
                  " (n, K) cases enumerated"};
}

// 3. Metrics against brute-force oracles.
Outcome metric_oracles() {
  std::mt19937_64 gen(2024);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + gen() % 19;
    std::vector<double> s(n);
    std::vector<bool> l(n);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(gen() % 7) * 0.25;
      l[i] = gen() % 3 == 0;
      ids[i] = "c" + std::to_string(gen() % 1000) + "_" + std::to_string(i);
    }
    // At least one positive and one negative.
    const std::size_t p0 = gen() % n;
    l[p0] = true;
    l[(p0 + 1 + gen() % (n - 1)) % n] = false;

    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!l[i] || l[j]) continue;
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
    mismatches += auc(s, l) != wins / pairs;

    // Sort oracle: score descending, id ascending.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return s[a] != s[b] ? s[a] > s[b] : ids[a] < ids[b];
    });
    const auto ranked = rank_scores(ids, s);
    std::set<std::string> pos;
    for (std::size_t i = 0; i < n; ++i) {
      if (l[i]) pos.insert(ids[i]);
      mismatches += ranked[i].influencer_id != ids[order[i]];
    }
    const std::size_t k = 1 + gen() % n;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += l[order[i]];
    mismatches += recall_at_k(ranked, pos, k) != static_cast<double>(hits) / static_cast<double>(pos.size());

    std::size_t first = 0;
    while (!l[order[first]]) ++first;
    mismatches += best_positive_rank(ranked, pos) != first + 1;

    std::vector<std::size_t> ranks(1 + gen() % 12);
    for (auto& r : ranks) r = 1 + gen() % 20;
    std::vector<std::size_t> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    mismatches += medr(ranks) != static_cast<double>(sorted[(sorted.size() - 1) / 2]);
  }
  return {mismatches == 0, "1000 instances, " + std::to_string(mismatches) + " mismatches"};
}

// 4. Random near one half, SimCos above it.
Outcome baselines() {
  SyntheticSpec spec;
  spec.noise_sigma = 1.0;
  spec.seed = 41;
  const Dataset d = generate_synthetic(spec);
  CvConfig random_cv;
  random_cv.model = "random";
  random_cv.seed = 1;
  CvConfig simcos_cv = random_cv;
  simcos_cv.model = "simcos";
  const double r = cross_validate(d, random_cv).auc.mean;
  const double s = cross_validate(d, simcos_cv).auc.mean;
  return {r >= 0.45 && r <= 0.55 && s > r, "Random AUC " + fmt(r) + ", SimCos AUC " + fmt(s)};
}

// 5. WSim learns, and beats SimCos when the signal is in few channels.
Outcome learning() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec easy;
  easy.noise_sigma = 0.0;
  easy.seed = 51;
  CvConfig cv;
  cv.seed = 1;
  cv.train.seed = 1;
  const double easy_auc = cross_validate(generate_synthetic(easy), cv).auc.mean;

  // One of ten channels (10% of d_v) carries the categories.
  SyntheticSpec diluted;
  diluted.f_n = 10;
  diluted.signal_channels = 1;
  diluted.background_sigma = 2.0;
  diluted.noise_sigma = 0.3;
  diluted.seed = 52;
  const Dataset dd = generate_synthetic(diluted);
  const double wsim_auc = cross_validate(dd, cv).auc.mean;
  CvConfig simcos = cv;
  simcos.model = "simcos";
  const double simcos_auc = cross_validate(dd, simcos).auc.mean;
  const double secs = seconds_since(t0);
  return {easy_auc >= 0.95 && wsim_auc > simcos_auc && secs < 300.0,
          "zero-noise WSim AUC " + fmt(easy_auc) + "; diluted WSim " + fmt(wsim_auc) + " vs SimCos " +
              fmt(simcos_auc) + "; " + fmt(secs) + " s"};
}

// 6. WSim-MT(K=6) at least as good as WSim(K=6) over five seeds.
Outcome multitask_ordering() {
  double mt_sum = 0.0, wsim_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // Categories decide the positives; a shared low-rank nuisance that is not
    // axis aligned hides them from a diagonal similarity.
    SyntheticSpec spec;
    spec.noise_sigma = 1.0;
    spec.nuisance_rank = 4;
    spec.nuisance_sigma = 1.0;
    spec.seed = 60 + seed;
    const Dataset d = generate_synthetic(spec);

    CvConfig w;
    w.seed = seed;
    w.train.k = 6;
    w.train.seed = seed;
    CvConfig m = w;
    m.model = "wsim_mt";
    m.train.model = ModelType::wsim_mt;
    m.train.lr = 3e-3;
    m.train.dropout = 0.1;
    m.train.epochs = 15;
    m.train.patience = 3;
    const double a = cross_validate(d, w).auc.mean;
    const double b = cross_validate(d, m).auc.mean;
    wsim_sum += a;
    mt_sum += b;
    per_seed += (seed > 1 ? ", " : "") + fmt(b) + "/" + fmt(a);
  }
  const double mt = mt_sum / 5.0, ws = wsim_sum / 5.0;
  return {mt >= ws, "mean AUC WSim-MT " + fmt(mt) + " vs WSim " + fmt(ws) + " (per seed MT/WSim: " + per_seed + ")"};
}

// 7. Loss identities.
Outcome loss_identities() {
  double worst = 0.0;
  for (double c : {-3.0, 0.0, 0.7, 12.5}) {
    const std::vector<double> z(4, c);
    for (std::size_t pos = 0; pos < 4; ++pos) {
      std::vector<double> y(4, 0.0);
      y[pos] = 1.0;
      worst = std::max(worst, std::abs(listwise_loss(z, y) - std::log(4.0)));
    }
  }
  const Dataset d = testing_support::random_dataset(8, 2, 2, 3, 3, 2, 8, 4, 7);
  Rng rng(3);
  const WSimMTParams p = WSimMTParams::init(8, 12, 3, Architecture{6, {10}, {9}}, 0.0, rng);
  bool exact = true;
  for (const std::string& brand : d.brand_ids()) {
    for (const Pool& pool : build_pools(d, brand, PoolPlan{4, PoolMode::partial_sequence}, rng)) {
      Rng off(0);
      const MultitaskLoss ml = multitask_loss(p, pool, d, 0.0, 0.0, false, off);
      std::vector<double> z;
      for (const std::string& id : pool.candidate_ids) z.push_back(wsimmt_score(p, d.at(brand), d.at(id), false, off));
      exact = exact && ml.loss == listwise_loss(z, pool.y) && ml.loss == ml.main;
    }
  }
  return {worst <= 1e-12 && exact, "uniform pool |loss - ln4| = " + fmt(worst) +
                                       (exact ? "; lambda=gamma=0 matches listwise exactly" : "; multitask mismatch")};
}

// 8. Heatmap oracle, linearity and brand switching.
Outcome interpretability() {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  double oracle_err = 0.0, linear_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t s1 = 1 + gen() % 7, s2 = 1 + gen() % 7, fn = 1 + gen() % 5;
    const std::size_t n = s1 * s2 * fn;
    Tensor i1({n}), i2({n});
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
      i1[k] = normal(gen);
      i2[k] = normal(gen);
      x[k] = normal(gen);
    }
    const FeatureMap f = FeatureMap::from_unrolled(s1, s2, fn, x);
    const Heatmap h1 = heatmap(i1, f);
    const Heatmap h2 = heatmap(i2, f);
    for (std::size_t r = 0; r < s1; ++r) {
      for (std::size_t c = 0; c < s2; ++c) {
        double sum = 0.0;
        for (std::size_t ch = 0; ch < fn; ++ch) sum += i1[(r * s2 + c) * fn + ch] * x[(r * s2 + c) * fn + ch];
        oracle_err = std::max(oracle_err, std::abs(h1.raw(r, c) - sum));
      }
    }
    const double a = normal(gen), b = normal(gen);
    Tensor mix({n});
    for (std::size_t k = 0; k < n; ++k) mix[k] = a * i1[k] + b * i2[k];
    const Heatmap hm = heatmap(mix, f);
    for (std::size_t k = 0; k < s1 * s2; ++k) {
      linear_err = std::max(linear_err, std::abs(hm.raw[k] - (a * h1.raw[k] + b * h2.raw[k])));
    }
  }

  // Two categories whose visual concepts live on disjoint channel groups.
  SyntheticSpec spec;
  spec.n_categories = 2;
  spec.concept_groups = 2;
  spec.noise_sigma = 0.3;
  spec.seed = 12;
  const Dataset d = generate_synthetic(spec);
  TrainConfig c;
  c.epochs = 20;
  c.seed = 1;
  const TrainResult trained = train(d, FoldSplit{0, d.brand_ids(), {}}, c);
  const auto& p = std::get<WSimParams>(trained.params);
  const DatasetHeader& h = d.header();
  const PooledAccount& brand0 = d.at(d.brand_ids().front());
  const PooledAccount& brand1 = d.at(d.brand_ids().back());
  const PooledAccount& left = d.at(*d.positives(brand0.id).begin());
  const PooledAccount& right = d.at(*d.positives(brand1.id).begin());
  // Left half of the image from a brand0 positive, right half from a brand1 positive.
  std::vector<double> x(h.d_v);
  for (std::size_t r = 0; r < h.s1; ++r) {
    for (std::size_t col = 0; col < h.s2; ++col) {
      const PooledAccount& src = col < h.s2 / 2 ? left : right;
      for (std::size_t ch = 0; ch < h.f_n; ++ch) {
        const std::size_t i = visual_offset(h, r, col, ch);
        x[i] = src.visual_pooled[i];
      }
    }
  }
  const FeatureMap mixed = FeatureMap::from_unrolled(h.s1, h.s2, h.f_n, x);
  const Heatmap for0 = heatmap(importance_account(p, brand0), mixed);
  const Heatmap for1 = heatmap(importance_account(p, brand1), mixed);
  const double left0 = positive_mass_share(for0.raw, 0, h.s1, 0, h.s2 / 2);
  const double right1 = positive_mass_share(for1.raw, 0, h.s1, h.s2 / 2, h.s2);

  const bool ok = brand0.category != brand1.category && oracle_err <= 1e-12 && linear_err <= 1e-12 && left0 > 0.5 &&
                  right1 > 0.5;
  return {ok, "oracle err " + fmt(oracle_err) + ", linearity err " + fmt(linear_err) + "; positive mass on own half " +
                  fmt(left0) + " / " + fmt(right1)};
}

// 9. Parameter count at the full embedding sizes.
Outcome parameter_count_check() {
  const std::size_t n = parameter_count(ModelParams{WSimParams::init(300, 25088)});
  return {n == 25391, std::to_string(n) + " trainable parameters"};
}

// 10. Two runs of the command line tool give identical bytes.
int run_cli(const std::string& args) {
  const std::string cmd = std::string(INFLRANK_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> pipeline(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string r = root.string();
  int failures = 0;
  failures += run_cli("synth --out " + r + "/data --seed 7 --n-categories 4") != 0;
  failures += run_cli("train --data " + r + "/data --out " + r + "/wsim --epochs 6 --seed 3") != 0;
  failures += run_cli("train --data " + r + "/data --out " + r + "/mt --model wsim_mt --epochs 2 --seed 3") != 0;
  failures += run_cli("eval --data " + r + "/data --out " + r + "/eval --sweep-k 2,4 --epochs 3 --folds 3 --seed 5") != 0;
  const Dataset d = load_dataset(root / "data");
  const nlohmann::json post = {{"visual_embedding", d.at(d.influencer_ids().front()).visual_pooled}};
  testing_support::write_file(root / "post.json", post.dump());
  failures += run_cli("explain --checkpoint " + r + "/wsim/checkpoint.json --post " + r + "/post.json --out " + r +
                      "/global.pgm --upsample 16x16") != 0;
  failures += run_cli("explain --checkpoint " + r + "/wsim/checkpoint.json --post " + r + "/post.json --out " + r +
                      "/brand.pgm --brand " + d.brand_ids().front() + " --data " + r + "/data") != 0;
  if (failures != 0) throw UsageError(std::to_string(failures) + " command(s) failed");

  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = testing_support::read_file(e.path());
  }
  return files;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "inflrank_acceptance_determinism";
  const auto first = pipeline(root);
  const auto second = pipeline(root);
  if (first.size() != second.size()) return {false, "runs produced different file sets"};
  std::size_t differing = 0;
  std::string which;
  for (const auto& [name, bytes] : first) {
    if (second.at(name) != bytes) {
      ++differing;
      which += " " + name;
    }
  }
  const bool has_all = first.contains("wsim/checkpoint.json") && first.contains("mt/checkpoint.json") &&
                       first.contains("eval/metrics_report.json") && first.contains("global.pgm") &&
                       first.contains("brand.pgm");
  fs::remove_all(root);
  return {differing == 0 && has_all, std::to_string(first.size()) + " files compared, " + std::to_string(differing) +
                                         " differ" + which};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"pool construction law", pool_law},
      {"metric oracles", metric_oracles},
      {"baseline sanity", baselines},
      {"learning works", learning},
      {"multi-task ordering", multitask_ordering},
      {"loss identities", loss_identities},
      {"interpretability", interpretability},
      {"parameter count", parameter_count_check},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " -- "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
