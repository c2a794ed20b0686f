#include "inflrank/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <type_traits>
#include <utility>
#include <variant>

#include "inflrank/error.hpp"
#include "inflrank/eval.hpp"

namespace inflrank {

namespace {

// Stream ids for the independent generators of one run.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPoolStream = 2;
constexpr std::uint64_t kOrderStream = 3;
constexpr std::uint64_t kDropoutStream = 4;
constexpr std::uint64_t kHoldoutStream = 5;
constexpr std::uint64_t kValidationStream = 6;

template <typename Params>
std::vector<Tensor*> tensors_of(Params& params) {
  std::vector<Tensor*> out;
  params.for_each_tensor([&](Tensor& t) { out.push_back(&t); });
  return out;
}

template <typename Params>
std::vector<const Tensor*> tensors_of(const Params& params) {
  std::vector<const Tensor*> out;
  params.for_each_tensor([&](const Tensor& t) { out.push_back(&t); });
  return out;
}

std::string norm_summary(const ModelParams& params) {
  std::ostringstream out;
  out << "param norms [";
  bool first = true;
  std::visit(
      [&](const auto& p) {
        p.for_each_tensor([&](const Tensor& t) {
          if (!first) out << ", ";
          first = false;
          out << l2_norm(t.values());
        });
      },
      params);
  out << "]";
  return out.str();
}

std::vector<Pool> build_epoch_pools(const Dataset& dataset, const std::vector<std::string>& brands,
                                    const PoolPlan& plan, Rng& rng) {
  std::vector<Pool> pools;
  for (const std::string& id : brands) {
    if (dataset.positives(id).empty()) continue;
    auto some = build_pools(dataset, id, plan, rng);
    pools.insert(pools.end(), std::make_move_iterator(some.begin()), std::make_move_iterator(some.end()));
  }
  return pools;
}

}  // namespace

void TrainConfig::validate() const {
  if (k < 2) throw ConfigError("k must be >= 2");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw ConfigError("lambda and gamma must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (arch.d_r == 0) throw ConfigError("d_r must be >= 1");
}

ModelParams init_model(const Dataset& dataset, const TrainConfig& config) {
  const DatasetHeader& h = dataset.header();
  if (config.model == ModelType::wsim) return WSimParams::init(h.d_t, h.d_v);
  Rng rng = Rng(config.seed).fork(kInitStream);
  return WSimMTParams::init(h.d_t, h.d_v, h.categories.size(), config.arch, config.dropout, rng);
}

Holdout holdout_split(const Dataset& dataset, const std::vector<std::string>& brands, double fraction,
                      std::uint64_t seed) {
  std::vector<std::vector<std::string>> by_category(dataset.header().categories.size());
  std::vector<std::string> sorted = brands;
  std::sort(sorted.begin(), sorted.end());
  for (const std::string& id : sorted) by_category[dataset.at(id).category].push_back(id);
  Rng rng(seed);
  Holdout out;
  for (auto& group : by_category) {
    rng.shuffle(std::span<std::string>(group));
    std::size_t n_val = 0;
    if (group.size() >= 2) {
      n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(group.size())));
      n_val = std::clamp<std::size_t>(n_val, 1, group.size() - 1);
    }
    out.val.insert(out.val.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.insert(out.train.end(), group.begin() + static_cast<std::ptrdiff_t>(n_val), group.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

Validation validate(const ModelParams& params, const std::vector<std::string>& brands, const Dataset& dataset,
                    const PoolPlan& plan, std::uint64_t pool_seed) {
  if (brands.empty()) throw UsageError("validate: no validation brands");
  Rng rng(pool_seed);
  std::vector<std::string> sorted = brands;
  std::sort(sorted.begin(), sorted.end());
  const std::vector<Pool> pools = build_epoch_pools(dataset, sorted, plan, rng);

  Validation result;
  if (!pools.empty()) {
    double total = 0.0;
    for (const Pool& pool : pools) {
      std::vector<const PooledAccount*> members;
      for (const std::string& id : pool.candidate_ids) members.push_back(&dataset.at(id));
      const std::vector<double> z = score_candidates(params, dataset.at(pool.brand_id), members);
      total += listwise_loss(z, pool.y);
    }
    result.loss = total / static_cast<double>(pools.size());
  }
  result.auc = evaluate_brands(model_scorer(params), dataset, sorted).auc;
  return result;
}

TrainResult train(const Dataset& dataset, const FoldSplit& split, const TrainConfig& config) {
  config.validate();
  if (split.train.empty()) throw UsageError("train: split has no training brands");
  for (const std::string& id : split.train) {
    if (dataset.at(id).kind != AccountKind::brand) throw DataError("train: '" + id + "' is not a brand");
  }

  const Rng root(config.seed);
  TrainResult result;
  Holdout holdout = holdout_split(dataset, split.train, config.val_fraction, root.fork(kHoldoutStream).next());
  if (holdout.val.empty() || holdout.train.empty()) {
    throw UsageError("train: need at least two brands in some category to hold out a validation set");
  }
  result.train_brands = holdout.train;
  result.val_brands = holdout.val;

  const PoolPlan plan{config.k, config.mode};
  const std::uint64_t val_seed = root.fork(kValidationStream).next();
  Rng pool_rng = root.fork(kPoolStream);
  Rng order_rng = root.fork(kOrderStream);
  Rng dropout_rng = root.fork(kDropoutStream);

  ModelParams params = init_model(dataset, config);
  std::vector<AdamState> adam;
  std::visit(
      [&](auto& p) {
        for (Tensor* t : tensors_of(p)) adam.push_back(AdamState::for_params(*t, config.lr));
      },
      params);

  ModelParams best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<Pool> pools;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (epoch == 1 || !config.freeze_pools) pools = build_epoch_pools(dataset, holdout.train, plan, pool_rng);
    if (pools.empty()) throw DataError("train: no training brand has positives");
    std::vector<std::size_t> order(pools.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(std::span<std::size_t>(order));

    double epoch_loss = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const Pool& pool = pools[order[step]];
      double loss = 0.0;
      const auto fail = [&](const std::string& why) {
        return NumericError("train: " + why + " at epoch " + std::to_string(epoch) + ", pool " +
                            std::to_string(step) + " (brand " + pool.brand_id + "); " + norm_summary(params));
      };
      std::visit(
          [&](auto& p) {
            using P = std::decay_t<decltype(p)>;
            P grads;
            try {
              if constexpr (std::is_same_v<P, WSimParams>) {
                auto r = wsim_loss_and_grads(p, pool, dataset);
                loss = r.loss;
                grads = std::move(r.grads);
              } else {
                auto r = multitask_loss(p, pool, dataset, config.lambda, config.gamma, true, dropout_rng);
                loss = r.loss;
                grads = std::move(r.grads);
              }
            } catch (const NumericError& e) {
              throw fail(e.what());
            }
            if (!std::isfinite(loss)) throw fail("non-finite loss");
            const auto targets = tensors_of(p);
            const auto gs = tensors_of(std::as_const(grads));
            for (std::size_t i = 0; i < targets.size(); ++i) adam_step(*targets[i], *gs[i], adam[i]);
          },
          params);
      epoch_loss += loss;
    }

    Validation val;
    try {
      val = validate(params, holdout.val, dataset, plan, val_seed);
    } catch (const NumericError& e) {
      throw NumericError("train: validation at epoch " + std::to_string(epoch) + ": " + e.what() + "; " +
                         norm_summary(params));
    }
    if (!std::isfinite(val.loss)) {
      throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch) + "; " +
                         norm_summary(params));
    }
    result.history.epochs.push_back({epoch, epoch_loss / static_cast<double>(pools.size()), val.loss, val.auc});
    result.history.stopped_epoch = epoch;
    if (val.loss < best_loss) {
      best_loss = val.loss;
      best = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > config.patience) {
      break;
    }
  }
  result.params = std::move(best);
  return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "epoch,train_loss,val_loss,val_auc\n";
  char buf[160];
  for (const EpochRecord& r : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss, r.val_auc);
    out << buf;
  }
}

}  // namespace inflrank
