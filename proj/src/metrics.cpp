#include "plateforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "plateforge/jsonl.hpp"

namespace plateforge {

using nlohmann::json;

void EvalConfig::validate() const {
  if (!(iou_threshold > 0 && iou_threshold <= 1))
    throw Error(Errc::ValidationError, "iou_threshold must lie in (0, 1]");
}

json to_json(const EvalConfig& cfg) {
  return {{"iou_threshold", cfg.iou_threshold},
          {"chinese_wildcard", cfg.chinese_wildcard},
          {"case_folding", cfg.case_folding}};
}

EvalConfig eval_config_from_json(const json& j) {
  EvalConfig cfg;
  try {
    cfg.iou_threshold = j.value("iou_threshold", cfg.iou_threshold);
    cfg.chinese_wildcard = j.value("chinese_wildcard", cfg.chinese_wildcard);
    cfg.case_folding = j.value("case_folding", cfg.case_folding);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("metric config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::optional<BBoxd> Prediction::detection_box() const {
  if (box) return box;
  if (quad) return enclosing_bbox(*quad);
  return std::nullopt;
}

json to_json(const Prediction& p, const std::string& model) {
  json j{{"model", model}, {"dataset", p.dataset_id}, {"image", p.image_id}, {"text", p.text}};
  if (p.quad) j["quad"] = p.quad->to_array();
  if (p.box) j["box"] = {p.box->x, p.box->y, p.box->w, p.box->h};
  if (p.score) j["score"] = *p.score;
  if (p.latency_ms) j["latency_ms"] = *p.latency_ms;
  return j;
}

std::vector<PredictionRun> load_prediction_runs(const std::filesystem::path& path) {
  std::map<std::string, PredictionRun> runs;
  for_each_jsonl(path, [&](const json& j) {
    Prediction p;
    const auto model = j.at("model").get<std::string>();
    p.dataset_id = j.at("dataset").get<std::string>();
    p.image_id = j.at("image").get<std::string>();
    p.text = j.value("text", std::string());
    if (j.contains("quad") && !j["quad"].is_null()) {
      const auto v = j["quad"].get<std::vector<double>>();
      if (v.size() != 8) throw Error(Errc::ParseError, "quad must hold 8 numbers");
      std::array<double, 8> a;
      std::copy(v.begin(), v.end(), a.begin());
      p.quad = Quadd::from_array(a);
    }
    if (j.contains("box") && !j["box"].is_null()) {
      const auto v = j["box"].get<std::vector<double>>();
      if (v.size() != 4) throw Error(Errc::ParseError, "box must hold x, y, w, h");
      p.box = BBoxd{v[0], v[1], v[2], v[3]};
    }
    if (j.contains("score") && !j["score"].is_null()) p.score = j["score"].get<double>();
    if (j.contains("latency_ms") && !j["latency_ms"].is_null()) {
      p.latency_ms = j["latency_ms"].get<double>();
      if (!(*p.latency_ms > 0) || !std::isfinite(*p.latency_ms))
        throw Error(Errc::ValidationError, "latency_ms must be positive");
    }
    auto& run = runs[model];
    run.model = model;
    run.predictions.push_back(std::move(p));
  });
  std::vector<PredictionRun> out;
  for (auto& [m, r] : runs) out.push_back(std::move(r));
  return out;
}

void save_prediction_runs(const std::filesystem::path& path, const std::vector<PredictionRun>& runs) {
  std::vector<json> rows;
  for (const auto& r : runs)
    for (const auto& p : r.predictions) rows.push_back(to_json(p, r.model));
  write_jsonl(path, rows);
}

double lp_nme(const Quadd& gt, const Quadd& pred) {
  double x0 = gt[0].x(), x1 = x0, y0 = gt[0].y(), y1 = y0;
  for (int i = 1; i < 4; ++i) {
    x0 = std::min(x0, gt[i].x());
    x1 = std::max(x1, gt[i].x());
    y0 = std::min(y0, gt[i].y());
    y1 = std::max(y1, gt[i].y());
  }
  const double d = std::hypot(x1 - x0, y1 - y0);
  if (!(d > 0)) throw Error(Errc::DegenerateGroundTruth, "ground truth corners span no area");
  double sum = 0;
  for (int i = 0; i < 4; ++i) sum += (gt[i] - pred[i]).norm();
  return sum / 4 / d;
}

std::string comparable_text(std::string_view text, const EvalConfig& cfg) {
  return normalize_plate_text(text, cfg.case_folding, cfg.chinese_wildcard);
}

RecognitionResult recognition(const std::vector<LpAnnotation>& gt, const PredictionRun& run, const EvalConfig& cfg) {
  std::unordered_map<std::string, std::multiset<std::string>> predicted;
  for (const auto& p : run.predictions) predicted[p.key()].insert(comparable_text(p.text, cfg));
  RecognitionResult r;
  for (const auto& ann : gt) {
    ++r.total;
    const auto it = predicted.find(ann.key());
    if (it == predicted.end()) {
      ++r.missing;
      continue;
    }
    const auto hit = it->second.find(comparable_text(ann.text, cfg));
    if (hit != it->second.end()) {
      ++r.correct;
      it->second.erase(hit);
    }
  }
  if (r.missing)
    warn(run.model + ": " + std::to_string(r.missing) + " of " + std::to_string(r.total) +
         " plates have no prediction and count as incorrect");
  return r;
}

double recognition_rate(const std::vector<LpAnnotation>& gt, const PredictionRun& run, const EvalConfig& cfg) {
  return recognition(gt, run, cfg).rate();
}

Prf detection_prf(const std::vector<DetectionImage>& images, const EvalConfig& cfg) {
  cfg.validate();
  Prf out;
  std::size_t total_gt = 0;
  for (const auto& img : images) {
    total_gt += img.gt.size();
    std::vector<std::size_t> order(img.predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return img.predictions[a].score > img.predictions[b].score; });
    std::vector<bool> taken(img.gt.size(), false);
    for (std::size_t pi : order) {
      std::size_t best = img.gt.size();
      double best_iou = -1;
      for (std::size_t g = 0; g < img.gt.size(); ++g) {
        if (taken[g]) continue;
        const double v = iou(img.gt[g], img.predictions[pi].box);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
      if (best < img.gt.size() && best_iou > cfg.iou_threshold) {
        taken[best] = true;
        ++out.tp;
      } else {
        ++out.fp;
      }
    }
  }
  out.fn = total_gt - out.tp;
  out.precision = out.tp + out.fp ? static_cast<double>(out.tp) / (out.tp + out.fp) : 0.0;
  out.recall = total_gt ? static_cast<double>(out.tp) / total_gt : 0.0;
  out.f_score = out.precision + out.recall > 0 ? 2 * out.precision * out.recall / (out.precision + out.recall) : 0.0;
  return out;
}

double fps(const PredictionRun& run) {
  std::map<std::string, double> per_image;
  for (const auto& p : run.predictions)
    if (p.latency_ms) per_image.try_emplace(p.key(), *p.latency_ms);
  if (per_image.empty()) throw Error(Errc::NoTimings, run.model + " has no latency data");
  double sum = 0;
  for (const auto& [k, ms] : per_image) sum += ms;
  return 1000.0 / (sum / per_image.size());
}

}  // namespace plateforge
