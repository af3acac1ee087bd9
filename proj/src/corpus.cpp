#include "plateforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "plateforge/augmentation.hpp"
#include "plateforge/jsonl.hpp"
#include "plateforge/rng.hpp"

namespace plateforge {

using nlohmann::json;

const std::vector<LayoutClass>& builtin_layouts() {
  static const std::vector<LayoutClass> layouts{LayoutClass::american(), LayoutClass::brazilian(),
                                                LayoutClass::chinese(),  LayoutClass::european(),
                                                LayoutClass::mercosur(), LayoutClass::taiwanese()};
  return layouts;
}

bool LayoutClass::is_builtin() const {
  const auto& all = builtin_layouts();
  return std::find(all.begin(), all.end(), *this) != all.end();
}

bool is_letter(char c) noexcept { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }
bool is_char_class(char c) noexcept { return is_letter(c) || is_digit(c) || c == kWildcard; }

std::string normalize_plate_text(std::string_view utf8, bool fold_case, bool unify_chinese) {
  std::string out;
  out.reserve(utf8.size());
  for (std::size_t i = 0; i < utf8.size();) {
    const auto byte = static_cast<unsigned char>(utf8[i]);
    if (byte < 0x80) {
      char c = static_cast<char>(byte);
      if (fold_case && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
      out.push_back(c);
      ++i;
      continue;
    }
    std::size_t len = 1;
    if ((byte & 0xE0) == 0xC0) len = 2;
    else if ((byte & 0xF0) == 0xE0) len = 3;
    else if ((byte & 0xF8) == 0xF0) len = 4;
    len = std::min(len, utf8.size() - i);
    if (unify_chinese) out.push_back(kWildcard);
    else out.append(utf8.substr(i, len));
    i += len;
  }
  return out;
}

void validate(const LpAnnotation& ann) {
  auto fail = [&](const std::string& why) {
    throw Error(Errc::ValidationError, ann.dataset_id + "/" + ann.image_id + ": " + why);
  };
  if (ann.image_id.empty()) fail("empty image id");
  if (ann.layout.name().empty()) fail("missing layout");
  if (ann.text.size() < 4 || ann.text.size() > 8)
    fail("text '" + ann.text + "' has " + std::to_string(ann.text.size()) + " characters (expected 4-8)");
  for (char c : ann.text)
    if (!is_char_class(c)) fail(std::string("character '") + c + "' outside the 37-class alphabet");
  if (!ann.corners.is_finite()) fail("non-finite corner");
  if (ann.char_boxes) {
    const auto& boxes = *ann.char_boxes;
    if (boxes.size() != ann.text.size())
      fail(std::to_string(ann.text.size()) + " characters but " + std::to_string(boxes.size()) + " char boxes");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (!boxes[i].box.valid()) fail("char box " + std::to_string(i) + " has non-positive size");
      if (boxes[i].cls != ann.text[i]) fail("char box " + std::to_string(i) + " class differs from text");
    }
  }
  if (ann.image_size) {
    const auto [w, h] = *ann.image_size;
    for (int i = 0; i < 4; ++i) {
      const auto& p = ann.corners[i];
      if (p.x() < -1e-6 || p.y() < -1e-6 || p.x() > w + 1e-6 || p.y() > h + 1e-6) fail("corner outside image bounds");
    }
  }
}

json to_json(const LpAnnotation& ann) {
  json j;
  j["dataset"] = ann.dataset_id;
  j["image"] = ann.image_id;
  j["layout"] = ann.layout.name();
  j["corners"] = ann.corners.to_array();
  j["text"] = ann.text;
  if (ann.char_boxes) {
    json boxes = json::array();
    for (const auto& cb : *ann.char_boxes)
      boxes.push_back({{"box", {cb.box.x, cb.box.y, cb.box.w, cb.box.h}}, {"cls", std::string(1, cb.cls)}});
    j["char_boxes"] = std::move(boxes);
  }
  if (ann.vehicle_type) j["vehicle_type"] = *ann.vehicle_type == VehicleType::Car ? "car" : "motorcycle";
  if (ann.image_path) j["image_path"] = *ann.image_path;
  if (ann.image_size) j["image_size"] = {ann.image_size->first, ann.image_size->second};
  return j;
}

LpAnnotation annotation_from_json(const json& j) {
  try {
    LpAnnotation ann;
    ann.dataset_id = j.at("dataset").get<std::string>();
    ann.image_id = j.at("image").get<std::string>();
    ann.layout = LayoutClass(j.at("layout").get<std::string>());
    const auto corners = j.at("corners").get<std::vector<double>>();
    if (corners.size() != 8) throw Error(Errc::ParseError, "corners must hold 8 numbers");
    std::array<double, 8> c{};
    std::copy(corners.begin(), corners.end(), c.begin());
    ann.corners = Quadd::from_array(c);
    ann.text = normalize_plate_text(j.at("text").get<std::string>());
    if (j.contains("char_boxes") && !j["char_boxes"].is_null()) {
      std::vector<CharBox> boxes;
      for (const auto& b : j["char_boxes"]) {
        const auto v = b.at("box").get<std::vector<double>>();
        if (v.size() != 4) throw Error(Errc::ParseError, "char box must hold x,y,w,h");
        const auto cls = normalize_plate_text(b.at("cls").get<std::string>());
        if (cls.size() != 1) throw Error(Errc::ParseError, "char box class must be one character");
        boxes.push_back({{v[0], v[1], v[2], v[3]}, cls[0]});
      }
      ann.char_boxes = std::move(boxes);
    }
    if (j.contains("vehicle_type")) {
      const auto v = j["vehicle_type"].get<std::string>();
      if (v == "car") ann.vehicle_type = VehicleType::Car;
      else if (v == "motorcycle") ann.vehicle_type = VehicleType::Motorcycle;
      else throw Error(Errc::ParseError, "unknown vehicle_type '" + v + "'");
    }
    if (j.contains("image_path")) ann.image_path = j["image_path"].get<std::string>();
    if (j.contains("image_size")) {
      const auto s = j["image_size"].get<std::vector<int>>();
      if (s.size() != 2) throw Error(Errc::ParseError, "image_size must hold width,height");
      ann.image_size = std::pair{s[0], s[1]};
    }
    return ann;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}


std::vector<LpAnnotation> load_annotations(const std::filesystem::path& path) {
  std::vector<LpAnnotation> out;
  for_each_jsonl(path, [&](const json& j) {
    auto ann = annotation_from_json(j);
    validate(ann);
    out.push_back(std::move(ann));
  });
  return out;
}

void save_annotations(const std::filesystem::path& path, const std::vector<LpAnnotation>& anns) {
  std::vector<json> rows;
  rows.reserve(anns.size());
  for (const auto& a : anns) rows.push_back(to_json(a));
  write_jsonl(path, rows);
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

std::string_view to_string(Source s) noexcept {
  switch (s) {
    case Source::Real: return "real";
    case Source::Template: return "template";
    case Source::Permuted: return "permuted";
    case Source::Gan: return "gan";
  }
  return "real";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(Errc::ParseError, "unknown split '" + std::string(s) + "'");
}

Source source_from_string(std::string_view s) {
  if (s == "real") return Source::Real;
  if (s == "template") return Source::Template;
  if (s == "permuted") return Source::Permuted;
  if (s == "gan") return Source::Gan;
  throw Error(Errc::ParseError, "unknown source '" + std::string(s) + "'");
}

std::size_t CorpusManifest::count(const std::string& dataset, Split split) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) {
    return e.split == split && e.annotation.dataset_id == dataset;
  }));
}

std::map<std::string, std::size_t> CorpusManifest::train_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : entries)
    if (e.split == Split::Train) ++counts[e.annotation.dataset_id];
  return counts;
}

void save_manifest(const std::filesystem::path& path, const CorpusManifest& manifest) {
  std::vector<json> rows;
  rows.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    json j = to_json(e.annotation);
    j["split"] = to_string(e.split);
    j["source"] = to_string(e.source);
    if (e.augmentation_seed) j["aug_seed"] = *e.augmentation_seed;
    rows.push_back(std::move(j));
  }
  write_jsonl(path, rows);
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  CorpusManifest m;
  for_each_jsonl(path, [&](const json& j) {
    ManifestEntry e;
    e.annotation = annotation_from_json(j);
    validate(e.annotation);
    try {
      e.split = split_from_string(j.at("split").get<std::string>());
      e.source = source_from_string(j.value("source", std::string("real")));
      if (j.contains("aug_seed")) e.augmentation_seed = j["aug_seed"].get<std::uint64_t>();
    } catch (const json::exception& ex) {
      throw Error(Errc::ParseError, ex.what());
    }
    m.entries.push_back(std::move(e));
  });
  return m;
}

std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path, const LpAnnotation& ann) {
  if (!ann.image_path) throw Error(Errc::IoError, ann.key() + " has no image_path");
  const std::filesystem::path p(*ann.image_path);
  return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

std::size_t round_count(double v) {
  if (!(v > 0)) return 0;
  return static_cast<std::size_t>(std::floor(v + 0.5 + 1e-9));
}

namespace {

std::set<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    ids.insert(line.substr(b, e - b + 1));
  }
  return ids;
}

std::set<std::string> id_set(const json& rule, const std::string& key, const std::filesystem::path& base) {
  std::set<std::string> ids;
  if (rule.contains(key)) {
    for (const auto& v : rule[key]) ids.insert(v.get<std::string>());
  }
  if (rule.contains(key + "_file")) {
    auto more = read_id_list(base / rule[key + "_file"].get<std::string>());
    ids.insert(more.begin(), more.end());
  }
  return ids;
}

}  // namespace

SplitProtocol load_split_protocol(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  SplitProtocol protocol;
  const auto base = path.parent_path();
  try {
    const json root = json::parse(in);
    for (const auto& [name, rule] : root.at("datasets").items()) {
      DatasetProtocol p;
      const auto kind = rule.value("protocol", std::string("fractions"));
      if (kind == "fractions") {
        p.rule = SplitRule::Fractions;
        p.val_fraction = rule.value("val", 0.0);
        p.test_fraction = rule.value("test", 0.0);
        if (p.val_fraction < 0 || p.test_fraction < 0 || p.val_fraction + p.test_fraction > 1.0 + 1e-12)
          throw Error(Errc::ParseError, name + ": fractions must be non-negative and sum to at most 1");
      } else if (kind == "counts") {
        p.rule = SplitRule::Counts;
        p.val_count = rule.value("val", std::size_t{0});
        p.test_count = rule.value("test", std::size_t{0});
      } else if (kind == "lists") {
        p.rule = SplitRule::Lists;
        p.train_ids = id_set(rule, "train", base);
        p.val_ids = id_set(rule, "val", base);
        p.test_ids = id_set(rule, "test", base);
      } else if (kind == "test-only") {
        p.rule = SplitRule::TestOnly;
      } else {
        throw Error(Errc::ParseError, name + ": unknown protocol '" + kind + "'");
      }
      p.exclusions = id_set(rule, "exclusions", base);
      p.seed = rule.value("seed", std::uint64_t{0});
      protocol.datasets.emplace(name, std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return protocol;
}

CorpusManifest apply_split(const std::vector<LpAnnotation>& annotations, const SplitProtocol& protocol) {
  // dataset -> sorted distinct image ids (after exclusions)
  std::map<std::string, std::set<std::string>> images;
  for (const auto& a : annotations) {
    const auto it = protocol.datasets.find(a.dataset_id);
    if (it == protocol.datasets.end()) throw Error(Errc::UnknownDataset, "no split protocol for '" + a.dataset_id + "'");
    auto& ids = images[a.dataset_id];
    if (!it->second.exclusions.contains(a.image_id)) ids.insert(a.image_id);
  }

  std::map<std::string, std::unordered_map<std::string, Split>> assignment;
  for (const auto& [dataset, ids] : images) {
    const DatasetProtocol& p = protocol.datasets.at(dataset);
    if (ids.empty()) throw Error(Errc::EmptyDataset, "'" + dataset + "' has no images left after exclusions");
    auto& assign = assignment[dataset];

    if (p.rule == SplitRule::TestOnly) {
      for (const auto& id : ids) assign[id] = Split::Test;
      continue;
    }
    if (p.rule == SplitRule::Lists) {
      for (const auto& id : ids) {
        const int hits = p.train_ids.contains(id) + p.val_ids.contains(id) + p.test_ids.contains(id);
        if (hits != 1)
          throw Error(Errc::ValidationError, dataset + "/" + id + " appears in " + std::to_string(hits) + " split lists");
        assign[id] = p.test_ids.contains(id) ? Split::Test : p.val_ids.contains(id) ? Split::Val : Split::Train;
      }
      continue;
    }

    const std::size_t n = ids.size();
    std::size_t n_test = 0, n_val = 0;
    if (p.rule == SplitRule::Fractions) {
      n_test = round_count(static_cast<double>(n) * p.test_fraction);
      n_val = round_count(static_cast<double>(n) * p.val_fraction);
      n_test = std::min(n_test, n);
      n_val = std::min(n_val, n - n_test);
    } else {
      n_test = p.test_count;
      n_val = p.val_count;
      if (n_test + n_val > n)
        throw Error(Errc::ValidationError, dataset + ": requested " + std::to_string(n_test + n_val) +
                                               " val/test images but only " + std::to_string(n) + " exist");
    }

    std::vector<std::string> order(ids.begin(), ids.end());
    Rng rng(mix_seed(p.seed, {fnv1a64(dataset)}));
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i)
      assign[order[i]] = i < n_test ? Split::Test : i < n_test + n_val ? Split::Val : Split::Train;
  }

  CorpusManifest m;
  m.entries.reserve(annotations.size());
  for (const auto& a : annotations) {
    const auto& assign = assignment[a.dataset_id];
    const auto it = assign.find(a.image_id);
    if (it == assign.end()) continue;  // excluded
    m.entries.push_back({a, it->second, Source::Real, std::nullopt});
  }
  return m;
}

CorpusManifest balance_by_augmentation(const CorpusManifest& manifest, std::size_t target_per_dataset,
                                       const AugmentationConfig& aug, bool allow_downsample) {
  std::map<std::string, std::vector<std::size_t>> train;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (manifest.entries[i].split == Split::Train) train[manifest.entries[i].annotation.dataset_id].push_back(i);

  std::size_t largest = 0;
  for (const auto& [_, idx] : train) largest = std::max(largest, idx.size());
  if (target_per_dataset < largest && !allow_downsample)
    throw Error(Errc::TargetTooSmall, "target " + std::to_string(target_per_dataset) + " below largest train partition " +
                                          std::to_string(largest));

  std::vector<bool> keep(manifest.entries.size(), true);
  std::vector<ManifestEntry> extra;
  for (const auto& [dataset, idx] : train) {
    const std::uint64_t dataset_key = fnv1a64(dataset);
    if (idx.size() > target_per_dataset) {
      std::vector<std::size_t> order = idx;
      Rng rng(mix_seed(aug.master_seed, {dataset_key, 0x5eedULL}));
      rng.shuffle(order);
      for (std::size_t k = target_per_dataset; k < order.size(); ++k) keep[order[k]] = false;
      continue;
    }
    for (std::size_t k = 0; idx.size() + k < target_per_dataset; ++k) {
      ManifestEntry dup = manifest.entries[idx[k % idx.size()]];
      dup.augmentation_seed = mix_seed(aug.master_seed, {dataset_key, k});
      extra.push_back(std::move(dup));
    }
  }

  CorpusManifest out;
  out.entries.reserve(manifest.entries.size() + extra.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (keep[i]) out.entries.push_back(manifest.entries[i]);
  for (auto& e : extra) out.entries.push_back(std::move(e));
  return out;
}

CorpusManifest reduce_training_fraction(const CorpusManifest& manifest, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) throw Error(Errc::InvalidArgument, "fraction must lie in (0, 1]");
  static constexpr double kSupported[] = {1.0, 0.5, 0.25, 0.10, 0.05, 0.01};
  if (std::none_of(std::begin(kSupported), std::end(kSupported), [&](double f) { return std::abs(f - fraction) < 1e-12; }))
    warn("training fraction " + std::to_string(fraction) + " is outside the standard ablation set");

  std::map<std::string, std::vector<std::size_t>> train;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (manifest.entries[i].split == Split::Train) train[manifest.entries[i].annotation.dataset_id].push_back(i);

  std::vector<bool> keep(manifest.entries.size(), true);
  for (auto& [dataset, idx] : train) {
    // The permutation depends only on (seed, dataset), so smaller fractions
    // keep a prefix of what larger ones keep.
    Rng rng(mix_seed(seed, {fnv1a64(dataset)}));
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    const std::size_t kept = std::min(n, std::max<std::size_t>(1, round_count(static_cast<double>(n) * fraction)));
    for (std::size_t k = kept; k < n; ++k) keep[idx[k]] = false;
  }

  CorpusManifest out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (keep[i]) out.entries.push_back(manifest.entries[i]);
  return out;
}

}  // namespace plateforge
