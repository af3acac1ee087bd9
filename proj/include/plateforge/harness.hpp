#pragma once

// Experiment orchestration: scores prediction files against test manifests
// and lays the results out as report tables.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "plateforge/corpus.hpp"
#include "plateforge/metrics.hpp"

namespace plateforge {

enum class TableKind { Intra, Cross, Detection, Corner, Ablation, ReducedData, SpeedAccuracy };

std::string_view to_string(TableKind k) noexcept;
TableKind table_kind_from_string(std::string_view s);

/// Column grouping of ground-truth plates.
enum class Grouping { Dataset, Layout, VehicleType };

struct ArmSpec {
  std::set<Source> sources;
  std::filesystem::path unrectified;
  std::optional<std::filesystem::path> rectified;
};

struct ReducedRunSpec {
  std::string model;
  double fraction = 1.0;
  bool synthetic = false;
  std::filesystem::path predictions;
};

struct ExperimentConfig {
  TableKind kind = TableKind::Intra;
  std::string title;
  EvalConfig metric;
  Grouping grouping = Grouping::Dataset;
  /// Ground truth: test-split entries of these manifests.
  std::vector<std::filesystem::path> manifests;
  /// Column order; empty derives it from the manifests.
  std::vector<std::string> datasets;
  /// Row order; empty takes every model found in the predictions.
  std::vector<std::string> models;
  std::vector<std::filesystem::path> predictions;
  std::vector<ArmSpec> arms;
  std::vector<double> fractions;
  std::vector<ReducedRunSpec> reduced;
  unsigned workers = 1;
  /// The config as written; its hash goes into report metadata.
  nlohmann::json source;
};

/// Relative paths resolve against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ReportRow {
  std::vector<std::string> labels;
  std::vector<std::optional<double>> cells;
  /// Standard deviation per cell, empty when the report has none.
  std::vector<std::optional<double>> spread;
  std::optional<double> average;
};

struct ExperimentReport {
  std::string title;
  std::string kind;
  std::vector<std::string> label_columns;
  std::vector<std::string> columns;
  /// Display decimals per column.
  std::vector<int> decimals;
  bool with_average = false;
  bool higher_is_better = true;
  std::vector<ReportRow> rows;
  nlohmann::json metadata = nlohmann::json::object();

  /// Throws ValidationError on ragged rows or an average that does not
  /// recompute from its row's cells.
  void check() const;
};

nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

/// Recognition (intra, cross), detection F-score or mean corner error per
/// (model, column). Throws MissingPredictions naming every gap.
ExperimentReport run_eval(const ExperimentConfig& cfg);
/// One row per arm: mean and sample standard deviation over all
/// (model, dataset) recognition rates, unrectified and rectified.
ExperimentReport run_ablation(const ExperimentConfig& cfg);
/// Rows (model, with/without synthetic data), columns training fractions,
/// cells the recognition rate averaged over datasets.
ExperimentReport run_reduced_data(const ExperimentConfig& cfg);
/// One row per model with timings: FPS and that model's average from
/// `accuracy`, sorted by FPS descending. Models without timings are dropped
/// with a warning.
ExperimentReport speed_accuracy_export(const std::vector<PredictionRun>& runs, const ExperimentReport& accuracy);
/// Dispatches on cfg.kind.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

enum class ReportFormat { Csv, Markdown, Json };
ReportFormat report_format_from_string(std::string_view s);

/// Round half away from zero.
double round_display(double v, int decimals);
std::string render_report(const ExperimentReport& report, ReportFormat format);
/// Checks the report, then writes it. Throws IoError.
void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace plateforge
