#pragma once

// Plate annotations, dataset manifests and the split / balancing protocols
// applied to them before any synthesis.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "plateforge/geometry.hpp"

namespace plateforge {

/// Plate layout tag. The six built-in layouts are listed by builtin_layouts();
/// any other name is accepted as an extension.
class LayoutClass {
 public:
  LayoutClass() = default;
  explicit LayoutClass(std::string name) : name_(std::move(name)) {}

  static LayoutClass american() { return LayoutClass("American"); }
  static LayoutClass brazilian() { return LayoutClass("Brazilian"); }
  static LayoutClass chinese() { return LayoutClass("Chinese"); }
  static LayoutClass european() { return LayoutClass("European"); }
  static LayoutClass mercosur() { return LayoutClass("Mercosur"); }
  static LayoutClass taiwanese() { return LayoutClass("Taiwanese"); }

  const std::string& name() const noexcept { return name_; }
  bool is_builtin() const;

  friend auto operator<=>(const LayoutClass&, const LayoutClass&) = default;

 private:
  std::string name_;
};

const std::vector<LayoutClass>& builtin_layouts();

/// Reserved class shared by every Chinese character.
inline constexpr char kWildcard = '*';

/// True for the 37 character classes: 0-9, A-Z and the wildcard.
bool is_char_class(char c) noexcept;
bool is_letter(char c) noexcept;
bool is_digit(char c) noexcept;

/// Uppercases ASCII and maps every non-ASCII code point (Chinese characters in
/// practice) to the wildcard.
std::string normalize_plate_text(std::string_view utf8, bool fold_case = true, bool unify_chinese = true);

struct CharBox {
  BBoxd box;
  char cls = '0';
  friend bool operator==(const CharBox&, const CharBox&) = default;
};

enum class VehicleType { Car, Motorcycle };

struct LpAnnotation {
  std::string dataset_id;
  std::string image_id;
  LayoutClass layout;
  Quadd corners;
  std::string text;
  std::optional<std::vector<CharBox>> char_boxes;
  std::optional<VehicleType> vehicle_type;
  /// Image location, relative to the file the annotation was read from.
  std::optional<std::string> image_path;
  std::optional<std::pair<int, int>> image_size;

  /// Key used to join annotations with predictions: "dataset/image".
  std::string key() const { return dataset_id + "/" + image_id; }
};

/// Throws ValidationError describing the first broken invariant.
void validate(const LpAnnotation& ann);

nlohmann::json to_json(const LpAnnotation& ann);
LpAnnotation annotation_from_json(const nlohmann::json& j);

/// Reads a JSON Lines annotation file. Blank lines are skipped; any malformed
/// or invalid record raises ParseError / ValidationError naming its line.
std::vector<LpAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, const std::vector<LpAnnotation>& anns);

enum class Split { Train, Val, Test };
enum class Source { Real, Template, Permuted, Gan };

std::string_view to_string(Split s) noexcept;
std::string_view to_string(Source s) noexcept;
Split split_from_string(std::string_view s);
Source source_from_string(std::string_view s);

struct ManifestEntry {
  LpAnnotation annotation;
  Split split = Split::Train;
  Source source = Source::Real;
  /// Set on entries duplicated for balancing; drives their augmentation.
  std::optional<std::uint64_t> augmentation_seed;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;

  std::size_t count(const std::string& dataset, Split split) const;
  std::map<std::string, std::size_t> train_counts() const;
};

/// Manifest on disk: JSONL, one entry per line (annotation fields plus
/// "split", "source" and optional "aug_seed"). Relative image paths in the
/// file are resolved against `base` when loading.
void save_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest load_manifest(const std::filesystem::path& path);

/// Resolves an entry's image path against the directory of the file it came from.
std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path, const LpAnnotation& ann);

enum class SplitRule {
  Fractions,  // train/val/test fractions; counts rounded half away from zero
  Counts,     // explicit val/test image counts, remainder to train
  Lists,      // author-defined image id lists
  TestOnly,   // everything to test
};

struct DatasetProtocol {
  SplitRule rule = SplitRule::Fractions;
  double val_fraction = 0.0;
  double test_fraction = 0.0;
  std::size_t val_count = 0;
  std::size_t test_count = 0;
  std::set<std::string> train_ids, val_ids, test_ids;
  std::set<std::string> exclusions;
  std::uint64_t seed = 0;
};

struct SplitProtocol {
  std::map<std::string, DatasetProtocol> datasets;
};

/// Reads a declarative protocol file. List and exclusion files named in it are
/// resolved against the protocol file's directory.
SplitProtocol load_split_protocol(const std::filesystem::path& path);

/// Assigns every image of every dataset to exactly one split. Plates from the
/// same image always share a split; excluded images are dropped.
CorpusManifest apply_split(const std::vector<LpAnnotation>& annotations, const SplitProtocol& protocol);

struct AugmentationConfig;

/// Duplicates train entries of under-filled datasets until each holds
/// `target_per_dataset`; duplicates carry distinct augmentation seeds. With
/// `allow_downsample`, larger datasets are subsampled to the target instead of
/// raising TargetTooSmall.
CorpusManifest balance_by_augmentation(const CorpusManifest& manifest, std::size_t target_per_dataset,
                                       const AugmentationConfig& aug, bool allow_downsample = false);

/// Keeps a seeded, nested prefix of every dataset's train partition.
CorpusManifest reduce_training_fraction(const CorpusManifest& manifest, double fraction, std::uint64_t seed);

/// Rounds half away from zero; the rule used for every split count.
std::size_t round_count(double v);

}  // namespace plateforge
