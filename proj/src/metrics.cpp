#include "cle/metrics.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cle/offline.hpp"

namespace cle {

double CurvePoint::top(int k) const {
  for (const auto& [kk, acc] : topk)
    if (kk == k) return acc;
  throw std::out_of_range("curve point: top-" + std::to_string(k) + " not recorded");
}

bool CurvePoint::has(int k) const {
  for (const auto& [kk, acc] : topk)
    if (kk == k) return true;
  return false;
}

CurvePoint checkpoint_evaluate(Scorer& learner, const FeatureDataset& eval, const std::vector<char>& seen,
                               std::span<const int> k_list, std::uint64_t position) {
  if (seen.size() != eval.num_classes) throw std::invalid_argument("checkpoint_evaluate: seen-class mask size mismatch");
  CurvePoint point;
  point.position = position;
  for (int k : k_list) point.topk.emplace_back(k, evaluate_topk(learner, eval, k, &seen));
  return point;
}

double average_accuracy(const LearningCurve& curve, int k) {
  if (curve.points.empty()) throw std::invalid_argument("average_accuracy: empty curve");
  double sum = 0.0;
  for (const auto& p : curve.points) sum += p.top(k);
  return sum / static_cast<double>(curve.points.size());
}

double relative_improvement(double candidate, double baseline) {
  if (!(baseline > 0.0)) throw std::invalid_argument("relative_improvement: baseline must be positive");
  return (candidate - baseline) / baseline * 100.0;
}

namespace {

// Shortest round-trip decimal form, same as the JSON emitter uses.
std::string num(double v) { return nlohmann::json(v).dump(); }

}  // namespace

std::string report_json(const RunReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg;
  for (const auto& [key, value] : report.config) cfg[key] = value;
  j["config"] = std::move(cfg);
  j["method"] = report.curve.method;
  j["feature_source"] = report.curve.feature_source;
  j["pretrain_size"] = report.curve.pretrain_size;
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const auto& p : report.curve.points) {
    nlohmann::ordered_json pj;
    pj["position"] = p.position;
    for (const auto& [k, acc] : p.topk) pj["top" + std::to_string(k)] = acc;
    points.push_back(std::move(pj));
  }
  j["curve"] = std::move(points);
  j["final_top1"] = report.final_top1;
  j["final_top5"] = report.final_top5;
  j["average_top5_over_checkpoints"] = report.average_top5;
  return j.dump(2) + "\n";
}

std::string curve_csv(const LearningCurve& curve) {
  std::string out = "position,top1,top5\n";
  for (const auto& p : curve.points) {
    out += std::to_string(p.position);
    out += ',';
    out += num(p.top(1));
    out += ',';
    out += num(p.top(5));
    out += '\n';
  }
  return out;
}

void emit_report(const RunReport& report, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << (format == ReportFormat::kJson ? report_json(report) : curve_csv(report.curve));
  if (!out) throw std::runtime_error(path.string() + ": write failure");
}

}  // namespace cle
