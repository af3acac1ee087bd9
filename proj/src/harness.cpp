#include "plateforge/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "plateforge/parallel.hpp"
#include "plateforge/rng.hpp"

namespace plateforge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::pair<TableKind, std::string_view> kKindNames[] = {
    {TableKind::Intra, "intra"},         {TableKind::Cross, "cross"},
    {TableKind::Detection, "detection"}, {TableKind::Corner, "corner"},
    {TableKind::Ablation, "ablation"},   {TableKind::ReducedData, "reduced-data"},
    {TableKind::SpeedAccuracy, "speed-accuracy"},
};

constexpr std::string_view kCheck = "\xE2\x9C\x93";

Grouping grouping_from_string(std::string_view s) {
  if (s == "dataset") return Grouping::Dataset;
  if (s == "layout") return Grouping::Layout;
  if (s == "vehicle_type") return Grouping::VehicleType;
  throw Error(Errc::ValidationError, "unknown grouping '" + std::string(s) + "'");
}

std::string_view to_string(Grouping g) {
  switch (g) {
    case Grouping::Dataset: return "dataset";
    case Grouping::Layout: return "layout";
    case Grouping::VehicleType: return "vehicle_type";
  }
  return "dataset";
}

std::string group_of(const LpAnnotation& a, Grouping g) {
  switch (g) {
    case Grouping::Dataset: return a.dataset_id;
    case Grouping::Layout: return a.layout.name();
    case Grouping::VehicleType:
      if (!a.vehicle_type) return "unknown";
      return *a.vehicle_type == VehicleType::Car ? "car" : "motorcycle";
  }
  return a.dataset_id;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string percent_label(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", fraction * 100);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::optional<double> row_average(const std::vector<std::optional<double>>& cells) {
  std::vector<double> v;
  for (const auto& c : cells) {
    if (!c) return std::nullopt;
    v.push_back(*c);
  }
  if (v.empty()) return std::nullopt;
  return mean_of(v);
}

// Test-split ground truth plus which datasets own train entries.
struct GroundTruth {
  std::vector<LpAnnotation> test;
  std::set<std::string> with_train;
  std::set<std::string> with_test;
};

GroundTruth load_ground_truth(const std::vector<fs::path>& manifests) {
  GroundTruth gt;
  for (const auto& path : manifests) {
    const auto m = load_manifest(path);
    for (const auto& e : m.entries) {
      const auto& ds = e.annotation.dataset_id;
      if (e.split == Split::Test) {
        gt.test.push_back(e.annotation);
        gt.with_test.insert(ds);
      } else {
        gt.with_train.insert(ds);
      }
    }
  }
  return gt;
}

// Datasets a kind evaluates on, unless the config lists them.
std::set<std::string> dataset_scope(const ExperimentConfig& cfg, TableKind kind, const GroundTruth& gt) {
  if (cfg.grouping == Grouping::Dataset && !cfg.datasets.empty())
    return {cfg.datasets.begin(), cfg.datasets.end()};
  std::set<std::string> out;
  for (const auto& ds : gt.with_test) {
    const bool seen_in_training = gt.with_train.count(ds) > 0;
    if (kind == TableKind::Intra && !seen_in_training) continue;
    if (kind == TableKind::Cross && seen_in_training) continue;
    out.insert(ds);
  }
  return out;
}

struct Columns {
  std::vector<std::string> names;
  std::vector<std::vector<LpAnnotation>> plates;
};

Columns build_columns(const ExperimentConfig& cfg, TableKind kind, const GroundTruth& gt) {
  const auto scope = dataset_scope(cfg, kind, gt);
  std::map<std::string, std::vector<LpAnnotation>> groups;
  for (const auto& a : gt.test)
    if (scope.count(a.dataset_id)) groups[group_of(a, cfg.grouping)].push_back(a);
  Columns c;
  if (!cfg.datasets.empty()) {
    c.names = cfg.datasets;
  } else {
    for (const auto& [k, v] : groups) c.names.push_back(k);
  }
  if (c.names.empty()) throw Error(Errc::EmptyDataset, "no test plates to evaluate");
  for (const auto& n : c.names) {
    const auto it = groups.find(n);
    if (it == groups.end()) throw Error(Errc::UnknownDataset, "no test plates for column '" + n + "'");
    c.plates.push_back(it->second);
  }
  return c;
}

std::vector<PredictionRun> merge_runs(const std::vector<fs::path>& files) {
  std::map<std::string, PredictionRun> merged;
  for (const auto& f : files)
    for (auto& run : load_prediction_runs(f)) {
      auto& m = merged[run.model];
      m.model = run.model;
      m.predictions.insert(m.predictions.end(), run.predictions.begin(), run.predictions.end());
    }
  std::vector<PredictionRun> out;
  for (auto& [k, r] : merged) out.push_back(std::move(r));
  return out;
}

std::vector<const PredictionRun*> select_models(const std::vector<PredictionRun>& runs,
                                                const std::vector<std::string>& models, std::vector<std::string>& gaps,
                                                const std::string& where) {
  std::vector<const PredictionRun*> out;
  if (models.empty()) {
    for (const auto& r : runs) out.push_back(&r);
    return out;
  }
  for (const auto& m : models) {
    const auto it = std::find_if(runs.begin(), runs.end(), [&](const PredictionRun& r) { return r.model == m; });
    if (it == runs.end())
      gaps.push_back("(" + m + where + ")");
    else
      out.push_back(&*it);
  }
  return out;
}

using PredIndex = std::unordered_map<std::string, std::vector<const Prediction*>>;

PredIndex index_predictions(const PredictionRun& run) {
  PredIndex idx;
  for (const auto& p : run.predictions) idx[p.key()].push_back(&p);
  return idx;
}

bool covers_any(const PredIndex& idx, const std::vector<LpAnnotation>& plates) {
  return std::any_of(plates.begin(), plates.end(), [&](const LpAnnotation& a) { return idx.count(a.key()) > 0; });
}

std::optional<double> detection_cell(const PredIndex& idx, const std::vector<LpAnnotation>& plates, const EvalConfig& m) {
  std::map<std::string, DetectionImage> images;
  for (const auto& a : plates) images[a.key()].gt.push_back(enclosing_bbox(a.corners));
  bool any = false;
  for (auto& [key, img] : images) {
    const auto it = idx.find(key);
    if (it == idx.end()) continue;
    for (const Prediction* p : it->second)
      if (const auto b = p->detection_box()) {
        img.predictions.push_back({*b, p->score.value_or(0.0)});
        any = true;
      }
  }
  if (!any) return std::nullopt;
  std::vector<DetectionImage> v;
  for (auto& [k, img] : images) v.push_back(std::move(img));
  return detection_prf(v, m).f_score * 100;
}

std::optional<double> corner_cell(const PredIndex& idx, const std::vector<LpAnnotation>& plates, const std::string& model) {
  double sum = 0;
  std::size_t n = 0, unmatched = 0;
  for (const auto& a : plates) {
    const auto it = idx.find(a.key());
    const Prediction* best = nullptr;
    double best_iou = 0;
    if (it != idx.end()) {
      const BBoxd g = enclosing_bbox(a.corners);
      for (const Prediction* p : it->second) {
        if (!p->quad) continue;
        const double v = iou(g, enclosing_bbox(*p->quad));
        if (v > best_iou) {
          best_iou = v;
          best = p;
        }
      }
    }
    if (!best) {
      ++unmatched;
      continue;
    }
    sum += lp_nme(a.corners, *best->quad);
    ++n;
  }
  if (unmatched && n)
    warn(model + ": " + std::to_string(unmatched) + " plates have no overlapping predicted quad and are skipped");
  if (!n) return std::nullopt;
  return sum / static_cast<double>(n);
}

void throw_gaps(const std::vector<std::string>& gaps) {
  if (gaps.empty()) return;
  std::string msg = "no predictions for";
  for (std::size_t i = 0; i < gaps.size(); ++i) msg += (i ? ", " : " ") + gaps[i];
  throw Error(Errc::MissingPredictions, msg);
}

json base_metadata(const ExperimentConfig& cfg) {
  json m{{"config_hash", hex64(fnv1a64(cfg.source.dump()))},
         {"metric", to_json(cfg.metric)},
         {"grouping", to_string(cfg.grouping)}};
  if (cfg.source.contains("seed")) m["seed"] = cfg.source["seed"];
  return m;
}

// Recognition rates in percent, one per (model, column), models as rows.
std::vector<std::vector<std::optional<double>>> recognition_grid(const std::vector<const PredictionRun*>& runs,
                                                                 const Columns& cols, const EvalConfig& metric,
                                                                 unsigned workers, std::vector<std::string>& gaps,
                                                                 const std::string& where) {
  std::vector<PredIndex> idx(runs.size());
  parallel_for(runs.size(), workers, [&](std::size_t i) { idx[i] = index_predictions(*runs[i]); });
  const std::size_t nc = cols.names.size();
  std::vector<std::vector<std::optional<double>>> grid(runs.size(), std::vector<std::optional<double>>(nc));
  parallel_for(runs.size() * nc, workers, [&](std::size_t k) {
    const std::size_t r = k / nc, c = k % nc;
    if (!covers_any(idx[r], cols.plates[c])) return;
    grid[r][c] = recognition(cols.plates[c], *runs[r], metric).rate() * 100;
  });
  for (std::size_t r = 0; r < runs.size(); ++r)
    for (std::size_t c = 0; c < nc; ++c)
      if (!grid[r][c]) gaps.push_back("(" + runs[r]->model + ", " + cols.names[c] + where + ")");
  return grid;
}

std::string format_fixed(double v, int decimals) {
  const double r = round_display(v, decimals) + 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, r);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool has_spread(const ExperimentReport& r) {
  return std::any_of(r.rows.begin(), r.rows.end(), [](const ReportRow& row) { return !row.spread.empty(); });
}

std::string render_csv(const ExperimentReport& r) {
  const bool sd = has_spread(r);
  std::vector<std::string> head(r.label_columns);
  for (const auto& c : r.columns) {
    head.push_back(c);
    if (sd) head.push_back(c + " sd");
  }
  if (r.with_average) head.push_back("Average");
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_field(fields[i]);
    out << '\n';
  };
  line(head);
  for (const auto& row : r.rows) {
    std::vector<std::string> f(row.labels);
    for (std::size_t c = 0; c < r.columns.size(); ++c) {
      f.push_back(row.cells[c] ? format_fixed(*row.cells[c], r.decimals[c]) : "");
      if (sd) f.push_back(!row.spread.empty() && row.spread[c] ? format_fixed(*row.spread[c], r.decimals[c]) : "");
    }
    if (r.with_average) f.push_back(row.average ? format_fixed(*row.average, 1) : "");
    line(f);
  }
  return out.str();
}

std::string render_markdown(const ExperimentReport& r) {
  const std::size_t nc = r.columns.size() + (r.with_average ? 1 : 0);
  auto value = [&](const ReportRow& row, std::size_t c) -> std::optional<double> {
    return c < r.columns.size() ? row.cells[c] : row.average;
  };
  auto decimals = [&](std::size_t c) { return c < r.columns.size() ? r.decimals[c] : 1; };

  // Best rounded value per column; every tie is bolded.
  std::vector<std::optional<double>> best(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    std::size_t present = 0;
    for (const auto& row : r.rows) {
      const auto v = value(row, c);
      if (!v) continue;
      ++present;
      const double rv = round_display(*v, decimals(c));
      if (!best[c] || (r.higher_is_better ? rv > *best[c] : rv < *best[c])) best[c] = rv;
    }
    if (present < 2) best[c].reset();
  }

  std::ostringstream out;
  if (!r.title.empty()) out << "### " << r.title << "\n\n";
  out << '|';
  for (const auto& l : r.label_columns) out << ' ' << l << " |";
  for (const auto& c : r.columns) out << ' ' << c << " |";
  if (r.with_average) out << " Average |";
  out << "\n|";
  for (std::size_t i = 0; i < r.label_columns.size(); ++i) out << ":---|";
  for (std::size_t i = 0; i < nc; ++i) out << "---:|";
  out << '\n';
  for (const auto& row : r.rows) {
    out << '|';
    for (const auto& l : row.labels) out << ' ' << l << " |";
    for (std::size_t c = 0; c < nc; ++c) {
      const auto v = value(row, c);
      if (!v) {
        out << " - |";
        continue;
      }
      std::string text = format_fixed(*v, decimals(c));
      if (c < r.columns.size() && !row.spread.empty() && row.spread[c])
        text += " \xC2\xB1 " + format_fixed(*row.spread[c], decimals(c));
      if (best[c] && round_display(*v, decimals(c)) == *best[c]) text = "**" + text + "**";
      out << ' ' << text << " |";
    }
    out << '\n';
  }
  return out.str();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string_view to_string(TableKind k) noexcept {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "intra";
}

TableKind table_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kKindNames)
    if (name == s) return kind;
  throw Error(Errc::ValidationError, "unknown table kind '" + std::string(s) + "'");
}

ExperimentConfig experiment_config_from_json(const json& j, const fs::path& base_dir) {
  static const std::set<std::string> known{"kind",      "title",   "metric",    "grouping", "manifests",
                                           "datasets",  "models",  "predictions", "arms",   "fractions",
                                           "reduced",   "seed",    "workers"};
  if (!j.is_object()) throw Error(Errc::ParseError, "experiment config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw Error(Errc::ValidationError, "unknown experiment config key '" + k + "'");
  ExperimentConfig cfg;
  cfg.source = j;
  try {
    cfg.kind = table_kind_from_string(j.at("kind").get<std::string>());
    cfg.title = j.value("title", std::string());
    if (j.contains("metric")) cfg.metric = eval_config_from_json(j["metric"]);
    cfg.grouping = grouping_from_string(j.value("grouping", std::string("dataset")));
    for (const auto& p : j.value("manifests", std::vector<std::string>{})) cfg.manifests.push_back(resolve(base_dir, p));
    cfg.datasets = j.value("datasets", std::vector<std::string>{});
    cfg.models = j.value("models", std::vector<std::string>{});
    for (const auto& p : j.value("predictions", std::vector<std::string>{}))
      cfg.predictions.push_back(resolve(base_dir, p));
    for (const auto& a : j.value("arms", json::array())) {
      ArmSpec arm;
      for (const auto& s : a.at("sources").get<std::vector<std::string>>()) arm.sources.insert(source_from_string(s));
      arm.unrectified = resolve(base_dir, a.at("unrectified").get<std::string>());
      if (a.contains("rectified")) arm.rectified = resolve(base_dir, a["rectified"].get<std::string>());
      cfg.arms.push_back(std::move(arm));
    }
    cfg.fractions = j.value("fractions", std::vector<double>{});
    for (const auto& r : j.value("reduced", json::array())) {
      ReducedRunSpec spec;
      spec.model = r.at("model").get<std::string>();
      spec.fraction = r.at("fraction").get<double>();
      spec.synthetic = r.value("synthetic", false);
      spec.predictions = resolve(base_dir, r.at("predictions").get<std::string>());
      cfg.reduced.push_back(std::move(spec));
    }
    cfg.workers = j.value("workers", 1u);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("experiment config: ") + e.what());
  }
  for (double f : cfg.fractions)
    if (!(f > 0 && f <= 1)) throw Error(Errc::ValidationError, "fractions must lie in (0, 1]");
  for (const auto& r : cfg.reduced)
    if (!(r.fraction > 0 && r.fraction <= 1)) throw Error(Errc::ValidationError, "fractions must lie in (0, 1]");
  switch (cfg.kind) {
    case TableKind::Ablation:
      if (cfg.arms.empty()) throw Error(Errc::ValidationError, "ablation needs at least one arm");
      break;
    case TableKind::ReducedData:
      if (cfg.reduced.empty()) throw Error(Errc::ValidationError, "reduced-data needs reduced runs");
      break;
    default:
      if (cfg.predictions.empty()) throw Error(Errc::ValidationError, "no prediction files given");
  }
  if (cfg.manifests.empty()) throw Error(Errc::ValidationError, "no ground-truth manifests given");
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path());
}

void ExperimentReport::check() const {
  if (decimals.size() != columns.size()) throw Error(Errc::ValidationError, "report decimals do not match columns");
  for (const auto& row : rows) {
    if (row.labels.size() != label_columns.size()) throw Error(Errc::ValidationError, "report row labels are ragged");
    if (row.cells.size() != columns.size()) throw Error(Errc::ValidationError, "report row cells are ragged");
    if (!row.spread.empty() && row.spread.size() != columns.size())
      throw Error(Errc::ValidationError, "report row spreads are ragged");
    if (!with_average) {
      if (row.average) throw Error(Errc::ValidationError, "report without an average column has a row average");
      continue;
    }
    const auto expect = row_average(row.cells);
    if (expect != row.average)
      throw Error(Errc::ValidationError, "row average does not recompute from its cells");
  }
}

json to_json(const ExperimentReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json cells = json::array(), spread = json::array();
    for (const auto& c : row.cells) cells.push_back(opt_json(c));
    for (const auto& s : row.spread) spread.push_back(opt_json(s));
    json jr{{"labels", row.labels}, {"cells", cells}};
    if (!row.spread.empty()) jr["spread"] = spread;
    if (r.with_average) jr["average"] = opt_json(row.average);
    rows.push_back(std::move(jr));
  }
  return {{"title", r.title},
          {"kind", r.kind},
          {"label_columns", r.label_columns},
          {"columns", r.columns},
          {"decimals", r.decimals},
          {"with_average", r.with_average},
          {"higher_is_better", r.higher_is_better},
          {"rows", rows},
          {"metadata", r.metadata}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  try {
    r.title = j.value("title", std::string());
    r.kind = j.at("kind").get<std::string>();
    r.label_columns = j.at("label_columns").get<std::vector<std::string>>();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    r.decimals = j.at("decimals").get<std::vector<int>>();
    r.with_average = j.value("with_average", false);
    r.higher_is_better = j.value("higher_is_better", true);
    r.metadata = j.value("metadata", json::object());
    for (const auto& jr : j.at("rows")) {
      ReportRow row;
      row.labels = jr.at("labels").get<std::vector<std::string>>();
      for (const auto& c : jr.at("cells")) row.cells.push_back(opt_from(c));
      if (jr.contains("spread"))
        for (const auto& s : jr["spread"]) row.spread.push_back(opt_from(s));
      if (jr.contains("average")) row.average = opt_from(jr["average"]);
      r.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("report: ") + e.what());
  }
  r.check();
  return r;
}

ExperimentReport run_eval(const ExperimentConfig& cfg) {
  cfg.metric.validate();
  const TableKind kind = cfg.kind == TableKind::SpeedAccuracy ? TableKind::Intra : cfg.kind;
  if (kind == TableKind::Ablation || kind == TableKind::ReducedData)
    throw Error(Errc::InvalidArgument, "run_eval does not produce " + std::string(to_string(kind)) + " tables");
  const auto gt = load_ground_truth(cfg.manifests);
  const auto cols = build_columns(cfg, kind, gt);
  const auto all_runs = merge_runs(cfg.predictions);
  std::vector<std::string> gaps;
  const auto runs = select_models(all_runs, cfg.models, gaps, "");
  if (runs.empty() && gaps.empty()) throw Error(Errc::MissingPredictions, "prediction files hold no models");

  std::vector<std::vector<std::optional<double>>> grid;
  if (kind == TableKind::Intra || kind == TableKind::Cross) {
    grid = recognition_grid(runs, cols, cfg.metric, cfg.workers, gaps, "");
  } else {
    const std::size_t nc = cols.names.size();
    std::vector<PredIndex> idx(runs.size());
    parallel_for(runs.size(), cfg.workers, [&](std::size_t i) { idx[i] = index_predictions(*runs[i]); });
    grid.assign(runs.size(), std::vector<std::optional<double>>(nc));
    parallel_for(runs.size() * nc, cfg.workers, [&](std::size_t k) {
      const std::size_t r = k / nc, c = k % nc;
      grid[r][c] = kind == TableKind::Detection ? detection_cell(idx[r], cols.plates[c], cfg.metric)
                                                : corner_cell(idx[r], cols.plates[c], runs[r]->model);
    });
    for (std::size_t r = 0; r < runs.size(); ++r)
      for (std::size_t c = 0; c < nc; ++c)
        if (!grid[r][c]) gaps.push_back("(" + runs[r]->model + ", " + cols.names[c] + ")");
  }
  throw_gaps(gaps);

  ExperimentReport rep;
  rep.title = cfg.title;
  rep.kind = std::string(to_string(kind));
  rep.label_columns = {"Model"};
  rep.columns = cols.names;
  rep.decimals.assign(cols.names.size(), kind == TableKind::Corner ? 4 : 1);
  rep.with_average = true;
  rep.higher_is_better = kind != TableKind::Corner;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    ReportRow row;
    row.labels = {runs[r]->model};
    row.cells = grid[r];
    row.average = row_average(row.cells);
    rep.rows.push_back(std::move(row));
  }
  rep.metadata = base_metadata(cfg);
  rep.metadata["value"] = kind == TableKind::Corner      ? "mean LP-NME"
                          : kind == TableKind::Detection ? "detection F-score (%)"
                                                         : "recognition rate (%)";
  return rep;
}

ExperimentReport run_ablation(const ExperimentConfig& cfg) {
  cfg.metric.validate();
  if (cfg.arms.empty()) throw Error(Errc::InvalidArgument, "ablation needs at least one arm");
  const auto gt = load_ground_truth(cfg.manifests);
  const auto cols = build_columns(cfg, TableKind::Intra, gt);
  std::vector<std::string> gaps;

  ExperimentReport rep;
  rep.title = cfg.title;
  rep.kind = "ablation";
  rep.label_columns = {"Real", "Template", "Permuted", "GAN"};
  rep.columns = {"Unrectified", "Rectified"};
  rep.decimals = {1, 1};
  for (std::size_t a = 0; a < cfg.arms.size(); ++a) {
    const auto& arm = cfg.arms[a];
    ReportRow row;
    for (Source s : {Source::Real, Source::Template, Source::Permuted, Source::Gan})
      row.labels.push_back(arm.sources.count(s) ? std::string(kCheck) : std::string());
    const std::optional<fs::path> files[2] = {arm.unrectified, arm.rectified};
    const char* names[2] = {"unrectified", "rectified"};
    for (int v = 0; v < 2; ++v) {
      if (!files[v]) {
        row.cells.emplace_back();
        row.spread.emplace_back();
        continue;
      }
      const std::string where = ", arm " + std::to_string(a + 1) + " " + names[v];
      const auto all_runs = load_prediction_runs(*files[v]);
      const auto runs = select_models(all_runs, cfg.models, gaps, where);
      if (runs.empty()) gaps.push_back("(arm " + std::to_string(a + 1) + " " + names[v] + ")");
      const auto grid = recognition_grid(runs, cols, cfg.metric, cfg.workers, gaps, where);
      std::vector<double> values;
      for (const auto& r : grid)
        for (const auto& c : r)
          if (c) values.push_back(*c);
      if (values.empty()) {
        row.cells.emplace_back();
        row.spread.emplace_back();
      } else {
        row.cells.push_back(mean_of(values));
        row.spread.push_back(sample_sd(values));
      }
    }
    rep.rows.push_back(std::move(row));
  }
  throw_gaps(gaps);
  rep.metadata = base_metadata(cfg);
  rep.metadata["value"] = "recognition rate (%)";
  rep.metadata["spread"] = "sample standard deviation across all (model, dataset) cells";
  return rep;
}

ExperimentReport run_reduced_data(const ExperimentConfig& cfg) {
  cfg.metric.validate();
  if (cfg.reduced.empty()) throw Error(Errc::InvalidArgument, "reduced-data needs reduced runs");
  const auto gt = load_ground_truth(cfg.manifests);
  const auto cols = build_columns(cfg, TableKind::Intra, gt);

  std::vector<double> fractions = cfg.fractions;
  if (fractions.empty()) {
    for (const auto& r : cfg.reduced)
      if (std::find(fractions.begin(), fractions.end(), r.fraction) == fractions.end()) fractions.push_back(r.fraction);
    std::sort(fractions.rbegin(), fractions.rend());
  }
  std::vector<std::pair<std::string, bool>> keys;
  if (!cfg.models.empty()) {
    for (const auto& m : cfg.models)
      for (bool syn : {false, true})
        if (std::any_of(cfg.reduced.begin(), cfg.reduced.end(),
                        [&](const ReducedRunSpec& r) { return r.model == m && r.synthetic == syn; }))
          keys.emplace_back(m, syn);
  } else {
    for (const auto& r : cfg.reduced)
      if (std::find(keys.begin(), keys.end(), std::pair{r.model, r.synthetic}) == keys.end())
        keys.emplace_back(r.model, r.synthetic);
  }

  std::vector<std::string> gaps;
  ExperimentReport rep;
  rep.title = cfg.title;
  rep.kind = "reduced-data";
  rep.label_columns = {"Model", "Synthetic"};
  for (double f : fractions) rep.columns.push_back(percent_label(f));
  rep.decimals.assign(fractions.size(), 1);
  for (const auto& [model, syn] : keys) {
    ReportRow row;
    row.labels = {model, syn ? std::string(kCheck) : std::string()};
    for (double f : fractions) {
      const std::string where = ", " + percent_label(f) + (syn ? ", with synthetic" : ", without synthetic");
      const auto spec = std::find_if(cfg.reduced.begin(), cfg.reduced.end(), [&](const ReducedRunSpec& r) {
        return r.model == model && r.synthetic == syn && r.fraction == f;
      });
      if (spec == cfg.reduced.end()) {
        gaps.push_back("(" + model + where + ")");
        row.cells.emplace_back();
        continue;
      }
      const auto all_runs = load_prediction_runs(spec->predictions);
      const auto it = std::find_if(all_runs.begin(), all_runs.end(), [&](const PredictionRun& r) { return r.model == model; });
      const PredictionRun* run = it != all_runs.end() ? &*it : (all_runs.size() == 1 ? &all_runs[0] : nullptr);
      if (!run) {
        gaps.push_back("(" + model + where + ")");
        row.cells.emplace_back();
        continue;
      }
      const auto grid = recognition_grid({run}, cols, cfg.metric, cfg.workers, gaps, where);
      row.cells.push_back(row_average(grid[0]));
    }
    rep.rows.push_back(std::move(row));
  }
  throw_gaps(gaps);
  rep.metadata = base_metadata(cfg);
  rep.metadata["value"] = "recognition rate (%) averaged over datasets";
  return rep;
}

ExperimentReport speed_accuracy_export(const std::vector<PredictionRun>& runs, const ExperimentReport& accuracy) {
  struct Entry {
    std::string model;
    double fps;
    std::optional<double> average;
  };
  std::vector<Entry> entries;
  for (const auto& run : runs) {
    double f;
    try {
      f = fps(run);
    } catch (const Error& e) {
      if (e.code() != Errc::NoTimings) throw;
      warn(run.model + " has no timings; omitted from the speed/accuracy table");
      continue;
    }
    std::optional<double> avg;
    for (const auto& row : accuracy.rows)
      if (!row.labels.empty() && row.labels[0] == run.model) avg = row.average;
    if (!avg) warn(run.model + " has no average accuracy in the report");
    entries.push_back({run.model, f, avg});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.fps != b.fps ? a.fps > b.fps : a.model < b.model;
  });
  ExperimentReport rep;
  rep.title = accuracy.title;
  rep.kind = "speed-accuracy";
  rep.label_columns = {"Model"};
  rep.columns = {"FPS", "Average accuracy"};
  rep.decimals = {0, 1};
  for (const auto& e : entries) rep.rows.push_back({{e.model}, {e.fps, e.average}, {}, std::nullopt});
  rep.metadata = accuracy.metadata;
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case TableKind::Ablation: return run_ablation(cfg);
    case TableKind::ReducedData: return run_reduced_data(cfg);
    case TableKind::SpeedAccuracy: {
      auto rep = speed_accuracy_export(merge_runs(cfg.predictions), run_eval(cfg));
      rep.title = cfg.title;
      return rep;
    }
    default: return run_eval(cfg);
  }
}

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  if (s == "json") return ReportFormat::Json;
  throw Error(Errc::InvalidArgument, "unknown report format '" + std::string(s) + "'");
}

double round_display(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // Snap away representation noise so 97.85 rounds as written.
  const double x = std::round(v * scale * 1e6) / 1e6;
  const double r = x < 0 ? -std::floor(-x + 0.5) : std::floor(x + 0.5);
  return r / scale;
}

std::string render_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Csv: return render_csv(report);
    case ReportFormat::Markdown: return render_markdown(report);
    case ReportFormat::Json: return to_json(report).dump(2) + "\n";
  }
  return {};
}

void emit_report(const ExperimentReport& report, ReportFormat format, const fs::path& path) {
  report.check();
  const std::string text = render_report(report, format);
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed " + path.string());
}

}  // namespace plateforge
