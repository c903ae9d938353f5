#include "vepm/eval/report.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace vepm::eval {

std::string to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["protocol"] = r.protocol;
  j["dataset"] = r.dataset;
  j["seed"] = r.seed;
  j["keep_rate"] = r.keep_rate;
  j["accuracy_mean"] = r.accuracy_mean;
  if (r.accuracy_stderr) j["accuracy_stderr"] = *r.accuracy_stderr;
  j["per_fold"] = r.per_fold;
  if (r.selected_epoch) j["selected_epoch"] = *r.selected_epoch;
  if (!r.per_fold_epochs.empty()) j["per_fold_epochs"] = r.per_fold_epochs;
  if (r.nmi_pretrain) j["nmi_pretrain"] = *r.nmi_pretrain;
  if (r.nmi_finetune) j["nmi_finetune"] = *r.nmi_finetune;
  if (!r.confusion.empty()) {
    nlohmann::ordered_json mats = nlohmann::ordered_json::array();
    for (const Matrix& m : r.confusion) {
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
      mats.push_back(rows);
    }
    j["confusion_matrices"] = mats;
    j["confusion_classifier"] = r.confusion_classifier;
  }
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  j["config"] = cfg;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << to_json(report);
}

}  // namespace vepm::eval
