#ifndef IFO_VISION_HPP_
#define IFO_VISION_HPP_

#include <cstdint>
#include <vector>

#include "ifo/common.hpp"

namespace ifo {

// Raw RGB image, planar [3,H,W], byte values 0..255.
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> rgb;

  Frame() = default;
  Frame(int h, int w) : height(h), width(w), rgb(static_cast<size_t>(3) * h * w, 0) {}

  uint8_t& at(int c, int y, int x) {
    return rgb[(static_cast<size_t>(c) * height + y) * width + x];
  }
  uint8_t at(int c, int y, int x) const {
    return rgb[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t bytes() const { return rgb.size(); }
};

// The two contrastive views of a frame: the lightness channel and the
// chroma pair, each normalized to [-1, 1] (L in [0,100] maps linearly;
// a and b are clamped to [-110,110] then scaled).
struct LabViews {
  int height = 0;
  int width = 0;
  std::vector<float> l_view;   // [1,H,W]
  std::vector<float> ab_view;  // [2,H,W]
};

// sRGB (D65) -> CIE L*a*b*, then per-channel normalization.
LabViews rgb_to_lab(const Frame& frame);

// Inverse conversion; out-of-gamut values are clamped to valid RGB.
Frame lab_to_rgb(const LabViews& lab);

// Unnormalized conversion of one sRGB byte triple, mostly for tests.
void rgb_to_lab_raw(uint8_t r, uint8_t g, uint8_t b, double* lab_out);

}  // namespace ifo

#endif  // IFO_VISION_HPP_
