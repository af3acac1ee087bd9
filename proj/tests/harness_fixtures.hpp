#pragma once

// Ground truth and prediction files encoding known per-dataset hit counts.

#include <cstdio>
#include <string>

#include "plateforge/corpus.hpp"
#include "plateforge/metrics.hpp"

namespace plateforge::testing {

inline std::string fixture_text(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%06zu", i % 1000000);
  return buf;
}

/// `total` test plates for `dataset`; one train plate too when `seen`.
inline void add_test_plates(CorpusManifest& m, const std::string& dataset, std::size_t total, bool seen) {
  auto make = [&](const std::string& id, std::size_t i) {
    LpAnnotation a;
    a.dataset_id = dataset;
    a.image_id = id;
    a.layout = LayoutClass::european();
    a.corners = axis_aligned_quad(10.0, 20.0, 120.0, 30.0);
    a.text = fixture_text(i);
    return a;
  };
  for (std::size_t i = 0; i < total; ++i) m.entries.push_back({make("t" + std::to_string(i), i), Split::Test});
  if (seen) m.entries.push_back({make("train0", 0), Split::Train});
}

/// Predictions for the plates of add_test_plates; the first `correct` match.
inline void add_predictions(PredictionRun& run, const std::string& dataset, std::size_t total, std::size_t correct) {
  for (std::size_t i = 0; i < total; ++i) {
    Prediction p;
    p.dataset_id = dataset;
    p.image_id = "t" + std::to_string(i);
    p.text = i < correct ? fixture_text(i) : "WRONG";
    p.quad = axis_aligned_quad(10.0, 20.0, 120.0, 30.0);
    p.score = 0.9;
    run.predictions.push_back(std::move(p));
  }
}

}  // namespace plateforge::testing
