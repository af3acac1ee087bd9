#pragma once

// Atlas template-matching read-back: decodes each slot of a rendered plate by
// comparing its ink pattern with every candidate glyph's alpha mask. Written
// independently of render_plate (nearest-neighbour sampling, own placement).

#include <cmath>
#include <cstdlib>
#include <string>

#include "plateforge/synth_template.hpp"

namespace plateforge::testing {

inline std::string read_back(const LayoutSpec& spec, const GlyphAtlas& atlas, const Image& rendered) {
  const Image blank = to_rgb(spec.template_image);
  std::string out;
  for (const auto& slot : spec.slots) {
    char best = '?';
    long best_score = -1;
    for (char cand : slot.alphabet) {
      const Image& g = atlas.get(spec.layout, cand);
      const double scale = std::min(slot.box.w / g.width(), slot.box.h / g.height());
      const double gw = g.width() * scale, gh = g.height() * scale;
      const double ox = slot.box.x + (slot.box.w - gw) / 2, oy = slot.box.y + (slot.box.h - gh) / 2;
      long score = 0;
      for (int y = static_cast<int>(slot.box.y); y < static_cast<int>(slot.box.bottom()); ++y)
        for (int x = static_cast<int>(slot.box.x); x < static_cast<int>(slot.box.right()); ++x) {
          int diff = 0;
          for (int c = 0; c < 3; ++c) diff += std::abs(rendered.at(x, y, c) - blank.at(x, y, c));
          const bool inked = diff > 150;
          const double gx = (x + 0.5 - ox) / scale, gy = (y + 0.5 - oy) / scale;
          bool expect = false;
          if (gx >= 0 && gy >= 0 && gx < g.width() && gy < g.height())
            expect = g.at(static_cast<int>(gx), static_cast<int>(gy), 3) > 127;
          score += inked == expect;
        }
      if (score > best_score) {
        best_score = score;
        best = cand;
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace plateforge::testing
