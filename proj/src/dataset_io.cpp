#include <algorithm>
#include <fstream>
#include <sstream>

#include "inflrank/dataset.hpp"
#include "inflrank/error.hpp"
#include "json.hpp"

namespace inflrank {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string where(const std::string& file, std::size_t line) { return file + ":" + std::to_string(line) + ": "; }

std::vector<double> number_array(const json& obj, const char* key, std::size_t expected, const std::string& ctx) {
  if (!obj.contains(key)) throw DataError(ctx + "missing field '" + key + "'");
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw DataError(ctx + "field '" + key + "' must be an array");
  if (arr.size() != expected) {
    throw ShapeError(ctx + "field '" + key + "' has length " + std::to_string(arr.size()) + ", expected " +
                     std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(arr.size());
  for (const json& v : arr) {
    if (!v.is_number()) throw DataError(ctx + "field '" + key + "' contains a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

template <typename T>
T required(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key)) throw DataError(ctx + "missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(ctx + "field '" + key + "' has the wrong type");
  }
}

std::size_t positive_size(const json& obj, const char* key, const std::string& ctx) {
  const long v = required<long>(obj, key, ctx);
  if (v <= 0) throw DataError(ctx + "field '" + key + "' must be positive");
  return static_cast<std::size_t>(v);
}

json parse_line(const std::string& text, const std::string& ctx) {
  try {
    json obj = json::parse(text);
    if (!obj.is_object()) throw DataError(ctx + "record is not a JSON object");
    return obj;
  } catch (const json::parse_error& e) {
    throw DataError(ctx + "malformed JSON (" + std::string(e.what()) + ")");
  }
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

DatasetHeader read_header(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string ctx = path.filename().string() + ": ";
  const json obj = parse_line(buffer.str(), ctx);
  DatasetHeader h;
  h.d_t = positive_size(obj, "d_t", ctx);
  h.d_v = positive_size(obj, "d_v", ctx);
  h.s1 = positive_size(obj, "s1", ctx);
  h.s2 = positive_size(obj, "s2", ctx);
  h.f_n = positive_size(obj, "f_n", ctx);
  h.n_posts = positive_size(obj, "n_posts", ctx);
  h.categories = required<std::vector<std::string>>(obj, "categories", ctx);
  if (obj.contains("min_followers")) h.min_followers = required<long>(obj, "min_followers", ctx);
  if (obj.contains("max_followers")) h.max_followers = required<long>(obj, "max_followers", ctx);
  if (h.s1 * h.s2 * h.f_n != h.d_v) throw DataError(ctx + "d_v must equal s1*s2*f_n");
  return h;
}

PooledAccount read_account(const json& obj, const DatasetHeader& h, const std::string& ctx) {
  PooledAccount a;
  a.id = required<std::string>(obj, "id", ctx);
  const auto kind = required<std::string>(obj, "kind", ctx);
  if (kind == "brand") {
    a.kind = AccountKind::brand;
  } else if (kind == "influencer") {
    a.kind = AccountKind::influencer;
  } else {
    throw DataError(ctx + "unknown kind '" + kind + "'");
  }
  const auto category = required<std::string>(obj, "category", ctx);
  const auto it = std::find(h.categories.begin(), h.categories.end(), category);
  if (it == h.categories.end()) throw DataError(ctx + "unknown category '" + category + "'");
  a.category = static_cast<std::size_t>(it - h.categories.begin());
  a.followers = obj.contains("followers") ? required<long>(obj, "followers", ctx) : 0;

  if (obj.contains("posts")) {
    const json& raw_posts = obj.at("posts");
    if (!raw_posts.is_array() || raw_posts.empty()) throw DataError(ctx + "field 'posts' must be a nonempty array");
    std::vector<Post> posts;
    for (std::size_t p = 0; p < raw_posts.size(); ++p) {
      const std::string pctx = ctx + "post " + std::to_string(p) + ": ";
      Post post;
      post.text_embedding = number_array(raw_posts[p], "text_embedding", h.d_t, pctx);
      post.visual_embedding = number_array(raw_posts[p], "visual_embedding", h.d_v, pctx);
      post.likes = raw_posts[p].value("likes", 0L);
      post.comments = raw_posts[p].value("comments", 0L);
      if (post.likes < 0 || post.comments < 0) throw DataError(pctx + "negative likes/comments");
      posts.push_back(std::move(post));
    }
    PooledEmbeddings pooled = pool_posts(posts);
    a.text_pooled = std::move(pooled.text);
    a.visual_pooled = std::move(pooled.visual);
    if (obj.contains("engagement_raw")) {
      a.engagement_raw = required<double>(obj, "engagement_raw", ctx);
    } else {
      if (a.followers <= 0) throw DataError(ctx + "raw-mode account needs positive 'followers'");
      a.engagement_raw = compute_engagement(posts, a.followers);
    }
  } else {
    a.text_pooled = number_array(obj, "text_pooled", h.d_t, ctx);
    a.visual_pooled = number_array(obj, "visual_pooled", h.d_v, ctx);
    a.engagement_raw = required<double>(obj, "engagement_raw", ctx);
  }
  return a;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  const DatasetHeader header = read_header(dir / "header.json");

  std::vector<PooledAccount> accounts;
  std::map<std::string, std::size_t> account_line;
  {
    std::ifstream in = open_input(dir / "accounts.jsonl");
    std::string text;
    for (std::size_t line = 1; std::getline(in, text); ++line) {
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string ctx = where("accounts.jsonl", line);
      PooledAccount a = read_account(parse_line(text, ctx), header, ctx);
      if (!account_line.emplace(a.id, line).second) throw DataError(ctx + "duplicate account id '" + a.id + "'");
      accounts.push_back(std::move(a));
    }
  }

  std::map<std::string, std::vector<std::string>> associations;
  {
    std::ifstream in = open_input(dir / "associations.jsonl");
    std::string text;
    for (std::size_t line = 1; std::getline(in, text); ++line) {
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string ctx = where("associations.jsonl", line);
      const json obj = parse_line(text, ctx);
      const auto brand = required<std::string>(obj, "brand_id", ctx);
      const auto members = required<std::vector<std::string>>(obj, "influencer_ids", ctx);
      const auto b = account_line.find(brand);
      if (b == account_line.end()) throw DataError(ctx + "dangling reference to brand id '" + brand + "'");
      for (const std::string& id : members) {
        if (!account_line.contains(id)) throw DataError(ctx + "dangling reference to influencer id '" + id + "'");
      }
      auto& list = associations[brand];
      list.insert(list.end(), members.begin(), members.end());
    }
  }

  return Dataset(header, std::move(accounts), std::move(associations));
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  const DatasetHeader& h = dataset.header();
  json header = {{"d_t", h.d_t}, {"d_v", h.d_v}, {"s1", h.s1},           {"s2", h.s2},
                 {"f_n", h.f_n}, {"n_posts", h.n_posts}, {"categories", h.categories}};
  if (h.min_followers) header["min_followers"] = *h.min_followers;
  if (h.max_followers) header["max_followers"] = *h.max_followers;

  auto open_output = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    std::ofstream out = open_output("header.json");
    out << header.dump(2) << '\n';
  }
  {
    std::ofstream out = open_output("accounts.jsonl");
    for (const PooledAccount& a : dataset.accounts()) {
      json obj = {{"id", a.id},
                  {"kind", to_string(a.kind)},
                  {"category", h.categories[a.category]},
                  {"followers", a.followers},
                  {"text_pooled", a.text_pooled},
                  {"visual_pooled", a.visual_pooled},
                  {"engagement_raw", a.engagement_raw}};
      out << obj.dump() << '\n';
    }
  }
  {
    std::ofstream out = open_output("associations.jsonl");
    for (const auto& [brand, members] : dataset.associations()) {
      json obj = {{"brand_id", brand}, {"influencer_ids", std::vector<std::string>(members.begin(), members.end())}};
      out << obj.dump() << '\n';
    }
  }
}

}  // namespace inflrank
