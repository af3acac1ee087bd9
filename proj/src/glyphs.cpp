// Built-in layouts and block font, so corpora can be generated without
// external plate assets.

#include <array>
#include <cmath>
#include <string_view>

#include "plateforge/synth_template.hpp"

namespace plateforge {

namespace {

using Bitmap = std::array<std::string_view, 7>;

// clang-format off
constexpr std::array<std::pair<char, Bitmap>, 36> kFont{{
  {'0', {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "}},
  {'1', {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
  {'2', {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"}},
  {'3', {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "}},
  {'4', {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "}},
  {'5', {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "}},
  {'6', {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "}},
  {'7', {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "}},
  {'8', {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "}},
  {'9', {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "}},
  {'A', {" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
  {'B', {"#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "}},
  {'C', {" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "}},
  {'D', {"###  ", "#  # ", "#   #", "#   #", "#   #", "#  # ", "###  "}},
  {'E', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"}},
  {'F', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "}},
  {'G', {" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"}},
  {'H', {"#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
  {'I', {" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
  {'J', {"  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "}},
  {'K', {"#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"}},
  {'L', {"#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"}},
  {'M', {"#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"}},
  {'N', {"#   #", "#   #", "##  #", "# # #", "#  ##", "#   #", "#   #"}},
  {'O', {" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
  {'P', {"#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "}},
  {'Q', {" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"}},
  {'R', {"#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"}},
  {'S', {" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "}},
  {'T', {"#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "}},
  {'U', {"#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
  {'V', {"#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "}},
  {'W', {"#   #", "#   #", "#   #", "# # #", "# # #", "# # #", " # # "}},
  {'X', {"#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"}},
  {'Y', {"#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "}},
  {'Z', {"#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"}},
}};
// clang-format on

const Bitmap* find_bitmap(char cls) {
  for (const auto& [c, bm] : kFont)
    if (c == cls) return &bm;
  return nullptr;
}

struct LayoutStyle {
  LayoutClass layout;
  int width, height;
  Rgb background, ink;
  // Optional colored band: x, y, w, h.
  std::array<int, 4> band;
  Rgb band_color;
  int slot_w, slot_h, slot_y;
  std::vector<std::pair<int, std::string>> slots;  // x, alphabet
};

Image draw_template(const LayoutStyle& s) {
  Image img = Image::filled(s.width, s.height, s.background.r, s.background.g, s.background.b);
  const auto [bx, by, bw, bh] = s.band;
  for (int y = by; y < by + bh; ++y)
    for (int x = bx; x < bx + bw; ++x) set_rgb(img, x, y, s.band_color);
  // 3 px frame in ink color, 4 px inset.
  for (int y = 4; y < s.height - 4; ++y)
    for (int x = 4; x < s.width - 4; ++x) {
      const bool edge = x < 7 || y < 7 || x >= s.width - 7 || y >= s.height - 7;
      if (edge) set_rgb(img, x, y, s.ink);
    }
  return img;
}

std::vector<LayoutStyle> builtin_styles() {
  const std::string L = kLetters, D = kDigits, A = kDigits + kLetters;
  const Rgb white{245, 245, 240}, black{20, 20, 20}, blue{20, 60, 170};
  std::vector<LayoutStyle> styles;
  styles.push_back({LayoutClass::american(), 300, 150, white, {20, 40, 110}, {7, 7, 286, 26}, {190, 30, 40}, 32, 64, 52,
                    {{24, D}, {61, L}, {98, L}, {135, L}, {172, D}, {209, D}, {246, D}}});
  styles.push_back({LayoutClass::brazilian(), 400, 130, {200, 200, 200}, black, {0, 0, 0, 0}, {}, 40, 70, 40,
                    {{20, L}, {66, L}, {112, L}, {178, D}, {224, D}, {270, D}, {316, D}}});
  styles.push_back({LayoutClass::chinese(), 440, 140, blue, white, {0, 0, 0, 0}, {}, 44, 80, 30,
                    {{20, "*"}, {74, L}, {150, A}, {204, A}, {258, A}, {312, A}, {366, A}}});
  styles.push_back({LayoutClass::european(), 520, 110, white, black, {7, 7, 43, 96}, blue, 44, 70, 20,
                    {{70, L}, {120, L}, {190, D}, {240, D}, {290, D}, {360, L}, {410, L}}});
  styles.push_back({LayoutClass::mercosur(), 400, 130, white, black, {7, 7, 386, 24}, blue, 40, 70, 44,
                    {{24, L}, {70, L}, {116, L}, {162, D}, {208, L}, {254, D}, {300, D}}});
  styles.push_back({LayoutClass::taiwanese(), 380, 170, white, black, {0, 0, 0, 0}, {}, 38, 90, 50,
                    {{16, L}, {60, L}, {104, L}, {160, D}, {204, D}, {248, D}, {292, D}}});
  return styles;
}

}  // namespace

Image builtin_glyph(char cls, int scale, Rgb ink) {
  Image glyph(5 * scale, 7 * scale, 4, 0);
  if (cls == kWildcard) {
    // Blurred blob standing in for any Chinese character.
    const double cx = 2.5 * scale, cy = 3.5 * scale, sx = 1.6 * scale, sy = 2.2 * scale;
    for (int y = 0; y < glyph.height(); ++y)
      for (int x = 0; x < glyph.width(); ++x) {
        const double dx = (x + 0.5 - cx) / sx, dy = (y + 0.5 - cy) / sy;
        auto* p = glyph.pixel(x, y);
        p[0] = ink.r;
        p[1] = ink.g;
        p[2] = ink.b;
        p[3] = static_cast<std::uint8_t>(std::lround(230.0 * std::exp(-0.5 * (dx * dx + dy * dy))));
      }
    return glyph;
  }
  const Bitmap* bm = find_bitmap(cls);
  if (!bm) throw Error(Errc::MissingGlyph, std::string("no built-in glyph for '") + cls + "'");
  for (int y = 0; y < glyph.height(); ++y)
    for (int x = 0; x < glyph.width(); ++x) {
      if ((*bm)[y / scale][x / scale] != '#') continue;
      auto* p = glyph.pixel(x, y);
      p[0] = ink.r;
      p[1] = ink.g;
      p[2] = ink.b;
      p[3] = 255;
    }
  return glyph;
}

std::vector<LayoutSpec> builtin_layout_specs() {
  std::vector<LayoutSpec> specs;
  for (const auto& s : builtin_styles()) {
    LayoutSpec spec;
    spec.layout = s.layout;
    spec.template_image = draw_template(s);
    for (const auto& [x, alphabet] : s.slots)
      spec.slots.push_back({{static_cast<double>(x), static_cast<double>(s.slot_y), static_cast<double>(s.slot_w),
                             static_cast<double>(s.slot_h)},
                            alphabet,
                            0});
    spec.min_length = spec.max_length = spec.slots.size();
    specs.push_back(std::move(spec));
  }
  return specs;
}

GlyphAtlas builtin_glyph_atlas() {
  GlyphAtlas atlas;
  for (const auto& s : builtin_styles()) {
    for (char c : kDigits + kLetters) atlas.add(s.layout, c, builtin_glyph(c, 8, s.ink));
    atlas.add(s.layout, kWildcard, builtin_glyph(kWildcard, 8, s.ink));
  }
  return atlas;
}

}  // namespace plateforge
