#include <cstdio>
#include <fstream>

#include "inflrank/error.hpp"
#include "inflrank/eval.hpp"
#include "json.hpp"

namespace inflrank {

namespace {

using nlohmann::json;

json summary_json(const MetricSummary& s) { return {{"mean", s.mean}, {"std", s.std}, {"per_fold", s.per_fold}}; }

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_json(std::span<const MetricsReport> reports) {
  json rows = json::array();
  for (const MetricsReport& r : reports) {
    json folds = json::array();
    for (const FoldMetrics& f : r.folds) {
      folds.push_back({{"fold", f.fold},
                       {"n_brands", f.n_brands},
                       {"AUC", f.auc},
                       {"Recall@10", f.recall_at_10},
                       {"Recall@50", f.recall_at_50},
                       {"MedR", f.medr}});
    }
    rows.push_back({{"model", r.model},
                    {"k", r.k},
                    {"AUC", summary_json(r.auc)},
                    {"Recall@10", summary_json(r.recall_at_10)},
                    {"Recall@50", summary_json(r.recall_at_50)},
                    {"MedR", summary_json(r.medr)},
                    {"N.Params", r.n_params},
                    {"folds", folds}});
  }
  return json{{"reports", rows}}.dump(2) + "\n";
}

std::string report_csv(std::span<const MetricsReport> reports) {
  std::string out = "model,k,AUC,AUC_std,Recall@10,Recall@10_std,Recall@50,Recall@50_std,MedR,MedR_std,N.Params\n";
  for (const MetricsReport& r : reports) {
    out += r.model + "," + std::to_string(r.k) + "," + number(r.auc.mean) + "," + number(r.auc.std) + "," +
           number(r.recall_at_10.mean) + "," + number(r.recall_at_10.std) + "," + number(r.recall_at_50.mean) + "," +
           number(r.recall_at_50.std) + "," + number(r.medr.mean) + "," + number(r.medr.std) + "," +
           std::to_string(r.n_params) + "\n";
  }
  return out;
}

void write_reports(std::span<const MetricsReport> reports, const std::filesystem::path& json_path,
                   const std::filesystem::path& csv_path) {
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
  };
  write(json_path, report_json(reports));
  write(csv_path, report_csv(reports));
}

}  // namespace inflrank
