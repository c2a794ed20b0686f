#include "inflrank/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "inflrank/dataset.hpp"
#include "inflrank/error.hpp"
#include "inflrank/eval.hpp"
#include "inflrank/interpret.hpp"
#include "inflrank/models.hpp"
#include "inflrank/rng.hpp"
#include "inflrank/train.hpp"
#include "json.hpp"

namespace inflrank {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Config keys of one subcommand. Each key is settable from the --config JSON
// file and from a flag of the same name (underscores become dashes); flags win.
class KeyedOptions {
 public:
  KeyedOptions(CLI::App* sub, json defaults) : sub_(sub), defaults_(std::move(defaults)) {
    sub_->add_option("--config", config_path_, "JSON config file; flags override its values");
    for (auto it = defaults_.begin(); it != defaults_.end(); ++it) {
      const std::string flag = "--" + dashed(it.key());
      if (it->is_boolean()) {
        options_[it.key()] = sub_->add_flag(flag);
      } else {
        options_[it.key()] = sub_->add_option(flag, raw_[it.key()]);
      }
    }
  }

  void describe(const std::string& key, const std::string& text) { options_.at(key)->description(text); }

  json resolve() const {
    json values = defaults_;
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw ConfigError("cannot open config '" + config_path_ + "'");
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("config '" + config_path_ + "': " + e.what());
      }
      if (!file.is_object()) throw ConfigError("config '" + config_path_ + "' must be a JSON object");
      for (auto it = file.begin(); it != file.end(); ++it) {
        if (!defaults_.contains(it.key())) throw ConfigError("config '" + config_path_ + "': unknown key '" + it.key() + "'");
        if (!compatible(defaults_[it.key()], *it)) {
          throw ConfigError("config '" + config_path_ + "': key '" + it.key() + "' has the wrong type");
        }
        values[it.key()] = *it;
      }
    }
    for (const auto& [key, option] : options_) {
      if (option->count() == 0) continue;
      const json& def = defaults_.at(key);
      values[key] = def.is_boolean() ? json(true) : parse_flag(key, def, raw_.at(key));
    }
    return values;
  }

 private:
  static bool compatible(const json& def, const json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_string()) return v.is_string();
    if (def.is_number_float()) return v.is_number();
    if (def.is_number_unsigned()) return v.is_number_unsigned();
    if (def.is_array()) return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number_unsigned(); });
    return false;
  }

  static std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      if (!text.empty() && text[0] != '-') v = std::stoull(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) {
      throw ConfigError("--" + dashed(key) + ": expected a non-negative integer, got '" + text + "'");
    }
    return v;
  }

  static json parse_flag(const std::string& key, const json& def, const std::string& text) {
    if (def.is_string()) return text;
    if (def.is_number_unsigned()) return parse_unsigned(key, text);
    if (def.is_number_float()) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != text.size()) throw ConfigError("--" + dashed(key) + ": expected a number, got '" + text + "'");
      return v;
    }
    json list = json::array();
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) list.push_back(parse_unsigned(key, item));
    if (list.empty()) throw ConfigError("--" + dashed(key) + ": empty list");
    return list;
  }

  CLI::App* sub_;
  json defaults_;
  std::string config_path_;
  std::map<std::string, std::string> raw_;
  std::map<std::string, CLI::Option*> options_;
};

json train_defaults() {
  const TrainConfig d;
  return {{"data", ""},
          {"out", ""},
          {"force", false},
          {"model", to_string(d.model)},
          {"k", d.k},
          {"mode", to_string(d.mode)},
          {"lr", d.lr},
          {"epochs", d.epochs},
          {"patience", d.patience},
          {"val_fraction", d.val_fraction},
          {"lambda", d.lambda},
          {"gamma", d.gamma},
          {"dropout", d.dropout},
          {"seed", d.seed},
          {"freeze_pools", d.freeze_pools},
          {"preset", "desk"}};
}

TrainConfig train_config(const json& v) {
  TrainConfig c;
  c.model = model_type_from_string(v.at("model").get<std::string>());
  c.k = v.at("k").get<std::size_t>();
  c.mode = pool_mode_from_string(v.at("mode").get<std::string>());
  c.lr = v.at("lr").get<double>();
  c.epochs = v.at("epochs").get<std::size_t>();
  c.patience = v.at("patience").get<std::size_t>();
  c.val_fraction = v.at("val_fraction").get<double>();
  c.lambda = v.at("lambda").get<double>();
  c.gamma = v.at("gamma").get<double>();
  c.dropout = v.at("dropout").get<double>();
  c.seed = v.at("seed").get<std::uint64_t>();
  c.freeze_pools = v.at("freeze_pools").get<bool>();
  const std::string preset = v.at("preset").get<std::string>();
  if (preset == "desk") {
    c.arch = Architecture::desk();
  } else if (preset == "full") {
    c.arch = Architecture::full();
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk or full)");
  }
  c.validate();
  return c;
}

std::string required(const json& v, const std::string& key) {
  const std::string s = v.at(key).get<std::string>();
  if (s.empty()) throw ConfigError("--" + dashed(key) + " is required");
  return s;
}

fs::path existing_dataset(const json& v) {
  const fs::path dir = required(v, "data");
  if (!fs::is_directory(dir)) throw ConfigError("--data: '" + dir.string() + "' is not a directory");
  if (!fs::exists(dir / "header.json")) throw ConfigError("--data: '" + dir.string() + "' has no header.json");
  return dir;
}

fs::path existing_file(const json& v, const std::string& key) {
  const fs::path p = required(v, key);
  if (!fs::is_regular_file(p)) throw ConfigError("--" + dashed(key) + ": '" + p.string() + "' does not exist");
  return p;
}

// Refuses a non-empty directory unless forced.
fs::path output_dir(const json& v) {
  const fs::path dir = required(v, "out");
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError("--out: '" + dir.string() + "' is not a directory");
    if (!fs::is_empty(dir) && !v.at("force").get<bool>()) {
      throw ConfigError("--out: '" + dir.string() + "' is not empty (pass --force to overwrite)");
    }
  }
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_manifest(const fs::path& dir, const std::string& command, json config, const std::vector<std::string>& files) {
  config.erase("force");
  const std::string canonical = config.dump();
  json manifest = {{"command", command},
                   {"config", config},
                   {"config_hash", hex64(fnv1a(canonical))},
                   {"seed", config.value("seed", json(0))},
                   {"files", files}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

void check_dims(const DatasetHeader& model, const DatasetHeader& data) {
  if (model.d_t != data.d_t || model.d_v != data.d_v) {
    throw ShapeError("checkpoint dims (d_t " + std::to_string(model.d_t) + ", d_v " + std::to_string(model.d_v) +
                     ") do not match the dataset (d_t " + std::to_string(data.d_t) + ", d_v " +
                     std::to_string(data.d_v) + ")");
  }
}

int cmd_synth(const json& v, std::ostream& out) {
  const fs::path dir = output_dir(v);
  SyntheticSpec s;
  s.n_categories = v.at("n_categories").get<std::size_t>();
  s.brands_per_cat = v.at("brands_per_cat").get<std::size_t>();
  s.influencers_per_cat = v.at("influencers_per_cat").get<std::size_t>();
  s.d_t = v.at("d_t").get<std::size_t>();
  s.s1 = v.at("s1").get<std::size_t>();
  s.s2 = v.at("s2").get<std::size_t>();
  s.f_n = v.at("f_n").get<std::size_t>();
  s.positives_per_brand = v.at("positives_per_brand").get<std::size_t>();
  s.noise_sigma = v.at("noise_sigma").get<double>();
  s.signal_channels = v.at("signal_channels").get<std::size_t>();
  s.background_sigma = v.at("background_sigma").get<double>();
  s.concept_groups = v.at("concept_groups").get<std::size_t>();
  s.text_signal = v.at("text_signal").get<double>();
  s.nuisance_rank = v.at("nuisance_rank").get<std::size_t>();
  s.nuisance_sigma = v.at("nuisance_sigma").get<double>();
  s.seed = v.at("seed").get<std::uint64_t>();
  const Dataset dataset = generate_synthetic(s);
  fs::create_directories(dir);
  save_dataset(dataset, dir);
  write_manifest(dir, "synth", v, {"header.json", "accounts.jsonl", "associations.jsonl"});
  out << "wrote " << dataset.brand_ids().size() << " brands and " << dataset.influencer_ids().size()
      << " influencers to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const json& v, std::ostream& out) {
  const TrainConfig config = train_config(v);
  const fs::path data = existing_dataset(v);
  const fs::path dir = output_dir(v);
  const Dataset dataset = load_dataset(data);
  const FoldSplit all{0, dataset.brand_ids(), {}};
  const TrainResult result = train(dataset, all, config);
  fs::create_directories(dir);
  save_checkpoint(Checkpoint{result.params, dataset.header()}, dir / "checkpoint.json");
  write_history_csv(result.history, dir / "history.csv");
  write_manifest(dir, "train", v, {"checkpoint.json", "history.csv"});
  const EpochRecord& best = result.history.epochs.at(result.history.best_epoch - 1);
  out << "trained " << to_string(config.model) << " for " << result.history.stopped_epoch << " epochs (best "
      << result.history.best_epoch << ", val_loss " << number(best.val_loss) << ", val_auc " << number(best.val_auc)
      << ", " << parameter_count(result.params) << " params)\n";
  return 0;
}

int cmd_eval(const json& v, std::ostream& out) {
  const std::string model = v.at("model").get<std::string>();
  const std::string checkpoint = v.at("checkpoint").get<std::string>();
  const std::vector<std::size_t> sweep = v.at("sweep_k").get<std::vector<std::size_t>>();
  const bool baseline = model == "simcos" || model == "random";
  TrainConfig config;
  if (!baseline) {
    json tv = v;
    if (!checkpoint.empty()) tv["model"] = "wsim";
    config = train_config(tv);
  }
  if (!checkpoint.empty() && !sweep.empty()) throw ConfigError("--sweep-k cross-validates from scratch; drop --checkpoint");
  if (!checkpoint.empty()) existing_file(v, "checkpoint");
  const fs::path data = existing_dataset(v);
  const fs::path dir = output_dir(v);
  const std::size_t folds = v.at("folds").get<std::size_t>();
  for (std::size_t k : sweep) {
    if (k < 2) throw ConfigError("--sweep-k: every K must be >= 2");
  }

  const Dataset dataset = load_dataset(data);
  std::vector<MetricsReport> reports;
  if (!checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    check_dims(ck.dims, dataset.header());
    const std::size_t n = parameter_count(ck.params);
    FoldMetrics m = evaluate_brands(model_scorer(ck.params), dataset, dataset.brand_ids());
    reports.push_back(make_report(to_string(model_type(ck.params)), 0, {std::move(m)}, n));
  } else {
    const std::vector<std::size_t> ks = sweep.empty() || baseline ? std::vector<std::size_t>{config.k} : sweep;
    for (std::size_t k : ks) {
      CvConfig cv;
      cv.model = model;
      cv.folds = folds;
      cv.seed = v.at("seed").get<std::uint64_t>();
      cv.train = config;
      cv.train.k = k;
      reports.push_back(cross_validate(dataset, cv));
    }
  }
  fs::create_directories(dir);
  write_reports(reports, dir / "metrics_report.json", dir / "metrics_report.csv");
  write_manifest(dir, "eval", v, {"metrics_report.json", "metrics_report.csv"});
  out << report_csv(reports);
  return 0;
}

int cmd_rank(const json& v, std::ostream& out) {
  const fs::path ck_path = existing_file(v, "checkpoint");
  const fs::path data = existing_dataset(v);
  const std::string brand_id = required(v, "brand");
  const std::size_t top = v.at("top").get<std::size_t>();
  if (top == 0) throw ConfigError("--top must be >= 1");

  const Checkpoint ck = load_checkpoint(ck_path);
  const Dataset dataset = load_dataset(data);
  check_dims(ck.dims, dataset.header());
  const PooledAccount* brand = dataset.find(brand_id);
  if (brand == nullptr || brand->kind != AccountKind::brand) throw DataError("unknown brand id '" + brand_id + "'");
  std::vector<const PooledAccount*> candidates;
  for (const std::string& id : dataset.influencer_ids()) candidates.push_back(&dataset.at(id));
  const std::vector<ScoredCandidate> ranked = rank_brand(model_scorer(ck.params), *brand, candidates);
  const std::size_t n = std::min(top, ranked.size());

  if (v.at("json").get<bool>()) {
    json rows = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({{"rank", i + 1},
                      {"influencer_id", ranked[i].influencer_id},
                      {"score", ranked[i].score},
                      {"positive", dataset.is_positive(brand_id, ranked[i].influencer_id)}});
    }
    out << json{{"brand_id", brand_id}, {"ranking", rows}}.dump(2) << "\n";
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out << i + 1 << '\t' << ranked[i].influencer_id << '\t' << number(ranked[i].score) << '\n';
    }
  }
  return 0;
}

std::vector<double> read_post_features(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const char* key = doc.contains("visual_embedding") ? "visual_embedding" : "visual_pooled";
  if (!doc.is_object() || !doc.contains(key) || !doc[key].is_array()) {
    throw DataError(path.string() + ": expected an object with a visual_embedding array");
  }
  try {
    return doc[key].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

int cmd_explain(const json& v, std::ostream& out) {
  const fs::path ck_path = existing_file(v, "checkpoint");
  const fs::path post = existing_file(v, "post");
  const fs::path pgm = required(v, "out");
  const std::string brand_id = v.at("brand").get<std::string>();
  if (!brand_id.empty()) existing_dataset(v);
  std::size_t rows_out = 0;
  std::size_t cols_out = 0;
  const std::string size = v.at("upsample").get<std::string>();
  if (!size.empty()) {
    char tail = 0;
    unsigned long long r = 0, c = 0;
    if (std::sscanf(size.c_str(), "%llux%llu%c", &r, &c, &tail) != 2 || r == 0 || c == 0) {
      throw ConfigError("--upsample: expected ROWSxCOLS, got '" + size + "'");
    }
    rows_out = r;
    cols_out = c;
  }

  const Checkpoint ck = load_checkpoint(ck_path);
  const WSimParams* params = std::get_if<WSimParams>(&ck.params);
  if (params == nullptr) throw ConfigError("explain needs a wsim checkpoint");
  const std::vector<double> features = read_post_features(post);
  const DatasetHeader& h = ck.dims;
  const FeatureMap fmap = FeatureMap::from_unrolled(h.s1, h.s2, h.f_n, features);

  Tensor importance;
  if (brand_id.empty()) {
    importance = importance_global(*params);
  } else {
    const Dataset dataset = load_dataset(v.at("data").get<std::string>());
    check_dims(h, dataset.header());
    const PooledAccount* brand = dataset.find(brand_id);
    if (brand == nullptr || brand->kind != AccountKind::brand) throw DataError("unknown brand id '" + brand_id + "'");
    importance = importance_account(*params, *brand);
  }
  const Heatmap map = heatmap(importance, fmap);
  if (rows_out != 0 && (rows_out < h.s1 || cols_out < h.s2)) {
    throw ConfigError("--upsample: " + size + " is smaller than the " + std::to_string(h.s1) + "x" +
                      std::to_string(h.s2) + " feature map");
  }
  const Tensor image = rows_out == 0 ? map.normalized : upsample(map.normalized, rows_out, cols_out);
  if (pgm.has_parent_path()) fs::create_directories(pgm.parent_path());
  write_pgm(image, pgm);
  const std::string csv = v.at("csv").get<std::string>();
  if (!csv.empty()) write_matrix_csv(map.raw, csv);
  out << "wrote " << image.dim(0) << "x" << image.dim(1) << " heatmap to " << pgm.string() << "\n";
  return 0;
}

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config:
      return "config";
    case ErrorCategory::data:
      return "data";
    case ErrorCategory::numeric:
      return "numeric";
  }
  return "data";
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config:
      return 2;
    case ErrorCategory::data:
      return 3;
    case ErrorCategory::numeric:
      return 4;
  }
  return 3;
}

void diagnose(std::ostream& err, const std::string& category, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  err << "error[" << category << "]: " << message << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rank micro-influencers for brands from precomputed embeddings", "inflrank"};
  app.require_subcommand(1);

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic planted-structure dataset");
  const SyntheticSpec sd;
  KeyedOptions synth_opts(synth, {{"out", ""},
                                  {"force", false},
                                  {"n_categories", sd.n_categories},
                                  {"brands_per_cat", sd.brands_per_cat},
                                  {"influencers_per_cat", sd.influencers_per_cat},
                                  {"d_t", sd.d_t},
                                  {"s1", sd.s1},
                                  {"s2", sd.s2},
                                  {"f_n", sd.f_n},
                                  {"positives_per_brand", sd.positives_per_brand},
                                  {"noise_sigma", sd.noise_sigma},
                                  {"signal_channels", sd.signal_channels},
                                  {"background_sigma", sd.background_sigma},
                                  {"concept_groups", sd.concept_groups},
                                  {"text_signal", sd.text_signal},
                                  {"nuisance_rank", sd.nuisance_rank},
                                  {"nuisance_sigma", sd.nuisance_sigma},
                                  {"seed", sd.seed}});
  synth_opts.describe("out", "Output dataset directory");

  CLI::App* train_cmd = app.add_subcommand("train", "Train one model on every brand of a dataset");
  KeyedOptions train_opts(train_cmd, train_defaults());
  train_opts.describe("model", "wsim or wsim_mt");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Cross-validate a model or baseline, or score a checkpoint");
  json eval_defaults = train_defaults();
  eval_defaults["checkpoint"] = "";
  eval_defaults["folds"] = 5u;
  eval_defaults["sweep_k"] = json::array();
  KeyedOptions eval_opts(eval_cmd, eval_defaults);
  eval_opts.describe("model", "wsim, wsim_mt, simcos or random");
  eval_opts.describe("sweep_k", "Comma-separated pool sizes, one report row each");

  CLI::App* rank_cmd = app.add_subcommand("rank", "Rank every influencer for one brand");
  KeyedOptions rank_opts(rank_cmd, {{"checkpoint", ""}, {"data", ""}, {"brand", ""}, {"top", 10u}, {"json", false}});

  CLI::App* explain_cmd = app.add_subcommand("explain", "Write a visual importance heatmap for one post");
  KeyedOptions explain_opts(explain_cmd, {{"checkpoint", ""},
                                          {"post", ""},
                                          {"brand", ""},
                                          {"data", ""},
                                          {"out", ""},
                                          {"csv", ""},
                                          {"upsample", ""}});
  explain_opts.describe("post", "JSON file with the post's unrolled visual_embedding");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    diagnose(err, "config", e.what());
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_opts.resolve(), out);
    if (train_cmd->parsed()) return cmd_train(train_opts.resolve(), out);
    if (eval_cmd->parsed()) return cmd_eval(eval_opts.resolve(), out);
    if (rank_cmd->parsed()) return cmd_rank(rank_opts.resolve(), out);
    if (explain_cmd->parsed()) return cmd_explain(explain_opts.resolve(), out);
  } catch (const Error& e) {
    diagnose(err, category_name(e.category()), e.what());
    return exit_code(e.category());
  } catch (const json::exception& e) {
    diagnose(err, "config", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    diagnose(err, "data", e.what());
    return 3;
  }
  diagnose(err, "config", "no subcommand");
  return 2;
}

}  // namespace inflrank
