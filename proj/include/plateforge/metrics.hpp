#pragma once

// Scoring: corner error, end-to-end recognition rate, detection P/R/F, FPS.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plateforge/corpus.hpp"
#include "plateforge/geometry.hpp"

namespace plateforge {

struct EvalConfig {
  double iou_threshold = 0.7;
  bool chinese_wildcard = true;
  bool case_folding = true;

  /// Throws ValidationError unless the threshold lies in (0, 1].
  void validate() const;
};

nlohmann::json to_json(const EvalConfig& cfg);
EvalConfig eval_config_from_json(const nlohmann::json& j);

/// One predicted plate. An image with several plates has several rows.
struct Prediction {
  std::string dataset_id;
  std::string image_id;
  std::string text;
  std::optional<Quadd> quad;
  std::optional<BBoxd> box;
  std::optional<double> score;
  std::optional<double> latency_ms;

  std::string key() const { return dataset_id + "/" + image_id; }
  /// The box if given, else the enclosing box of the quad.
  std::optional<BBoxd> detection_box() const;
};

struct PredictionRun {
  std::string model;
  std::vector<Prediction> predictions;
};

nlohmann::json to_json(const Prediction& p, const std::string& model);
/// JSONL rows: model, dataset, image, text, and optional quad[8], box[4],
/// score, latency_ms. Returns one run per model, sorted by model id.
std::vector<PredictionRun> load_prediction_runs(const std::filesystem::path& path);
void save_prediction_runs(const std::filesystem::path& path, const std::vector<PredictionRun>& runs);

/// Mean corner distance over the ground truth enclosing-box diagonal,
/// corners matched by role. Throws DegenerateGroundTruth.
double lp_nme(const Quadd& gt, const Quadd& pred);

/// Text as compared for recognition under cfg.
std::string comparable_text(std::string_view text, const EvalConfig& cfg);

struct RecognitionResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t missing = 0;
  double rate() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

/// Exact full-text matches over gt plates. Predicted texts of an image form a
/// multiset; each gt plate consumes one equal text. Images without any
/// prediction count as incorrect (warned).
RecognitionResult recognition(const std::vector<LpAnnotation>& gt, const PredictionRun& run, const EvalConfig& cfg);
double recognition_rate(const std::vector<LpAnnotation>& gt, const PredictionRun& run, const EvalConfig& cfg);

struct ScoredBox {
  BBoxd box;
  double score = 0;
};

struct DetectionImage {
  std::vector<BBoxd> gt;
  std::vector<ScoredBox> predictions;
};

struct Prf {
  double precision = 0, recall = 0, f_score = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

/// Per image, predictions by descending score take the unmatched gt box of
/// highest IoU; a true positive iff that IoU exceeds the threshold. Counts
/// are summed over all images before computing P, R and F.
Prf detection_prf(const std::vector<DetectionImage>& images, const EvalConfig& cfg);

/// 1000 / mean per-image latency. Throws NoTimings.
double fps(const PredictionRun& run);

}  // namespace plateforge
