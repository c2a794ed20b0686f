#include <fstream>
#include <sstream>

#include "inflrank/error.hpp"
#include "inflrank/models.hpp"
#include "json.hpp"

namespace inflrank {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "inflrank.checkpoint";
constexpr int kVersion = 1;

json layer_json(const DenseLayer& layer) {
  return {{"in", layer.in_dim()},
          {"out", layer.out_dim()},
          {"activation", to_string(layer.activation)},
          {"weights", layer.weights.data()},
          {"bias", layer.bias.data()}};
}

template <typename T>
T field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw DataError(std::string("checkpoint: missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("checkpoint: field '") + key + "' has the wrong type");
  }
}

Tensor tensor_field(const json& obj, const char* key, std::vector<std::size_t> shape) {
  auto values = field<std::vector<double>>(obj, key);
  try {
    return Tensor(std::move(shape), std::move(values));
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint: field '") + key + "': " + e.what());
  }
}

DenseLayer layer_from_json(const json& obj) {
  const auto in = field<std::size_t>(obj, "in");
  const auto out = field<std::size_t>(obj, "out");
  DenseLayer layer;
  layer.activation = activation_from_string(field<std::string>(obj, "activation"));
  layer.weights = tensor_field(obj, "weights", {out, in});
  layer.bias = tensor_field(obj, "bias", {out});
  return layer;
}

std::vector<DenseLayer> layers_from_json(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw DataError("checkpoint: encoder layer list must be a nonempty array");
  std::vector<DenseLayer> layers;
  for (const json& l : arr) layers.push_back(layer_from_json(l));
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].in_dim() != layers[i - 1].out_dim()) throw DataError("checkpoint: encoder layers do not chain");
  }
  return layers;
}

}  // namespace

std::string checkpoint_json(const Checkpoint& checkpoint) {
  const DatasetHeader& d = checkpoint.dims;
  json doc = {{"format", kFormat},
              {"version", kVersion},
              {"model_type", to_string(model_type(checkpoint.params))},
              {"dims", {{"d_t", d.d_t}, {"d_v", d.d_v}, {"s1", d.s1}, {"s2", d.s2}, {"f_n", d.f_n}}},
              {"categories", d.categories},
              {"n_params", parameter_count(checkpoint.params)}};
  if (const auto* p = std::get_if<WSimParams>(&checkpoint.params)) {
    doc["params"] = {{"wt_diag", p->wt_diag.data()}, {"wv_diag", p->wv_diag.data()}, {"alpha", p->alpha.data()}};
  } else {
    const auto& mt = std::get<WSimMTParams>(checkpoint.params);
    json f = json::array();
    json g = json::array();
    for (const auto& l : mt.f_layers) f.push_back(layer_json(l));
    for (const auto& l : mt.g_layers) g.push_back(layer_json(l));
    doc["dims"]["d_r"] = mt.d_r();
    doc["params"] = {{"f_layers", f},
                     {"g_layers", g},
                     {"wr", mt.wr.data()},
                     {"alpha_e", mt.alpha_e[0]},
                     {"h_layer", layer_json(mt.h_layer)},
                     {"dropout", mt.dropout}};
  }
  return doc.dump() + "\n";
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_json(checkpoint);
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (field<std::string>(doc, "format") != kFormat) throw DataError("checkpoint: unrecognized format tag");
  if (field<int>(doc, "version") != kVersion) throw DataError("checkpoint: unsupported version");

  Checkpoint ck;
  const json& dims = doc.at("dims");
  ck.dims.d_t = field<std::size_t>(dims, "d_t");
  ck.dims.d_v = field<std::size_t>(dims, "d_v");
  ck.dims.s1 = field<std::size_t>(dims, "s1");
  ck.dims.s2 = field<std::size_t>(dims, "s2");
  ck.dims.f_n = field<std::size_t>(dims, "f_n");
  ck.dims.categories = field<std::vector<std::string>>(doc, "categories");
  if (ck.dims.s1 * ck.dims.s2 * ck.dims.f_n != ck.dims.d_v) throw DataError("checkpoint: d_v != s1*s2*f_n");

  const json& params = doc.at("params");
  const ModelType type = model_type_from_string(field<std::string>(doc, "model_type"));
  if (type == ModelType::wsim) {
    ck.params = WSimParams{tensor_field(params, "wt_diag", {ck.dims.d_t}), tensor_field(params, "wv_diag", {ck.dims.d_v}),
                           tensor_field(params, "alpha", {3})};
  } else {
    WSimMTParams mt;
    mt.f_layers = layers_from_json(params.at("f_layers"));
    mt.g_layers = layers_from_json(params.at("g_layers"));
    const auto d_r = field<std::size_t>(dims, "d_r");
    mt.wr = tensor_field(params, "wr", {d_r, d_r});
    mt.alpha_e = Tensor({1}, field<double>(params, "alpha_e"));
    mt.h_layer = layer_from_json(params.at("h_layer"));
    mt.dropout = field<double>(params, "dropout");
    if (mt.d_t() != ck.dims.d_t || mt.d_v() != ck.dims.d_v || mt.f_layers.back().out_dim() != d_r ||
        mt.g_layers.back().out_dim() != d_r || mt.h_layer.in_dim() != d_r ||
        mt.h_layer.out_dim() != ck.dims.categories.size()) {
      throw DataError("checkpoint: WSim-MT layer dimensions inconsistent with header");
    }
    ck.params = std::move(mt);
  }
  return ck;
}

}  // namespace inflrank
