#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plateforge {

enum class Errc {
  DegenerateQuad,
  SingularSystem,
  TooSmall,
  DegenerateBox,
  ParseError,
  ValidationError,
  UnknownDataset,
  EmptyDataset,
  TargetTooSmall,
  MissingGlyph,
  LengthMismatch,
  CannotFit,
  Infeasible,
  MissingCharBoxes,
  GeometryMismatch,
  InsufficientFeasibleSources,
  InfeasiblePalette,
  MissingClassColor,
  UnknownColor,
  NoPlateRegion,
  DegenerateGroundTruth,
  NoTimings,
  MissingPredictions,
  InvalidArgument,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the Errc codes so callers
/// (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

/// Warnings go through a single sink so the CLI can silence them and tests can
/// capture them.
void warn(std::string_view message);
void set_warning_sink(void (*sink)(std::string_view));

}  // namespace plateforge
