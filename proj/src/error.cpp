#include "plateforge/error.hpp"

#include <atomic>
#include <iostream>

namespace plateforge {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DegenerateQuad: return "DegenerateQuad";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::TooSmall: return "TooSmall";
    case Errc::DegenerateBox: return "DegenerateBox";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::UnknownDataset: return "UnknownDataset";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::TargetTooSmall: return "TargetTooSmall";
    case Errc::MissingGlyph: return "MissingGlyph";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::CannotFit: return "CannotFit";
    case Errc::Infeasible: return "Infeasible";
    case Errc::MissingCharBoxes: return "MissingCharBoxes";
    case Errc::GeometryMismatch: return "GeometryMismatch";
    case Errc::InsufficientFeasibleSources: return "InsufficientFeasibleSources";
    case Errc::InfeasiblePalette: return "InfeasiblePalette";
    case Errc::MissingClassColor: return "MissingClassColor";
    case Errc::UnknownColor: return "UnknownColor";
    case Errc::NoPlateRegion: return "NoPlateRegion";
    case Errc::DegenerateGroundTruth: return "DegenerateGroundTruth";
    case Errc::NoTimings: return "NoTimings";
    case Errc::MissingPredictions: return "MissingPredictions";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

void default_sink(std::string_view message) { std::cerr << "warning: " << message << '\n'; }

std::atomic<void (*)(std::string_view)> g_sink{&default_sink};

}  // namespace

void warn(std::string_view message) { g_sink.load()(message); }

void set_warning_sink(void (*sink)(std::string_view)) { g_sink.store(sink ? sink : &default_sink); }

}  // namespace plateforge
