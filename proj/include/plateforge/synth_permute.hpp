#pragma once

// Character-permutation synthesis: new plates made by rearranging the
// character patches of one plate image.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plateforge/corpus.hpp"
#include "plateforge/image.hpp"
#include "plateforge/synth_template.hpp"

namespace plateforge {

enum class PermutationMode { SameKind, CrossKind };

std::string_view to_string(PermutationMode m) noexcept;
PermutationMode permutation_mode_from_string(std::string_view s);

struct PermutationPolicy {
  PermutationMode mode = PermutationMode::SameKind;
  std::size_t max_variants = 4;
  /// Relative desired frequency per class; classes not listed weigh 1.
  std::map<char, double> balance_target;
  /// Most output slots one source patch may fill in a single plan; 0 = unlimited.
  std::size_t repeat_cap = 0;

  void validate() const;
};

/// {"mode", "max_variants", "balance_target": {class: weight}, "repeat_cap"}; absent keys keep defaults.
nlohmann::json to_json(const PermutationPolicy& p);
PermutationPolicy permutation_policy_from_json(const nlohmann::json& j);

struct PermutationPlan {
  std::string source_id;
  std::string new_text;
  /// slot_map[i] is the source slot whose patch fills output slot i.
  std::vector<std::size_t> slot_map;
};

/// Equalized boxes are integer pixel rects of a common size (ceil of the
/// largest width and height), centered on the originals and shifted inside
/// `plate_bounds` when given. Throws CannotFit.
std::vector<CharBox> equalize_boxes(const std::vector<CharBox>& boxes, const std::optional<BBoxd>& plate_bounds);

/// True iff no two boxes intersect after equalization. False if
/// equalization cannot fit the plate bounds.
bool check_feasible(const std::vector<CharBox>& boxes, const std::optional<BBoxd>& plate_bounds = std::nullopt);

/// Enclosing box of the corners, clipped to the image when its size is known.
std::optional<BBoxd> plate_bounds(const LpAnnotation& ann);

/// Up to policy.max_variants distinct plans whose texts differ from the
/// source. Slot by slot, picks the eligible class (same plate, mode
/// respected) with the lowest weighted count in `counts`, counting symbols
/// already placed by earlier plans of this call. Throws MissingCharBoxes,
/// Infeasible.
std::vector<PermutationPlan> plan_permutations(const LpAnnotation& ann, const PermutationPolicy& policy,
                                               const BalanceState& counts, std::uint64_t seed);

struct PermutedPlate {
  Image image;
  LpAnnotation annotation;
};

/// Copies each mapped source patch into its output slot. Throws GeometryMismatch.
PermutedPlate apply_permutation(const Image& img, const LpAnnotation& ann, const PermutationPlan& plan);

struct PermutedCorpusOptions {
  std::size_t total = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string dataset_id = "synthetic-permuted";
};

/// Draws from train entries with char boxes, round-robin over the sources of
/// each layout. Plans are made in a fixed order against a running tally of
/// generated texts; images are written in parallel. Output bytes do not
/// depend on the worker count. Throws InsufficientFeasibleSources.
CorpusManifest generate_permuted_corpus(const CorpusManifest& manifest, const std::filesystem::path& manifest_path,
                                        const PermutationPolicy& policy, const PermutedCorpusOptions& options,
                                        const std::filesystem::path& out_dir);

}  // namespace plateforge
