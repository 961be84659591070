#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cle/feature_io.hpp"
#include "cle/learner.hpp"

namespace cle {

struct CurvePoint {
  std::uint64_t position = 0;  // classes seen (class-incremental) or examples seen (iid); 0 = right after init
  std::vector<std::pair<int, double>> topk;  // (k, accuracy), ascending k

  double top(int k) const;
  bool has(int k) const;
};

struct LearningCurve {
  std::string method;
  std::string feature_source;
  int pretrain_size = 0;
  std::vector<CurvePoint> points;
};

struct RunReport {
  std::vector<std::pair<std::string, std::string>> config;  // resolved key=value echo
  LearningCurve curve;
  double final_top1 = 0.0;
  double final_top5 = 0.0;
  double average_top5 = 0.0;
  // Wall clock is reported on stdout and kept out of the serialized report so
  // identical seeds produce identical bytes.
  double wall_seconds = 0.0;
};

// Top-k accuracies over the eval examples whose label is flagged in `seen`.
CurvePoint checkpoint_evaluate(Scorer& learner, const FeatureDataset& eval, const std::vector<char>& seen,
                               std::span<const int> k_list, std::uint64_t position);

// Unweighted mean of the k-accuracy over all curve points.
double average_accuracy(const LearningCurve& curve, int k);

// (candidate - baseline) / baseline × 100
double relative_improvement(double candidate, double baseline);

enum class ReportFormat { kJson, kCsv };

void emit_report(const RunReport& report, const std::filesystem::path& path, ReportFormat format);
std::string report_json(const RunReport& report);
std::string curve_csv(const LearningCurve& curve);

}  // namespace cle
