#include "ifo/vision.hpp"

#include <algorithm>
#include <cmath>

namespace ifo {
namespace {

constexpr double kXn = 0.95047;  // D65 reference white
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}
double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}
double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t)
                                      : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}
double lab_f_inv(double t) {
  return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

void xyz_from_rgb(double r, double g, double b, double* x, double* y, double* z) {
  *x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  *y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  *z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
}
void rgb_from_xyz(double x, double y, double z, double* r, double* g, double* b) {
  *r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  *g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  *b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
}

uint8_t to_byte(double v01) {
  const double scaled = std::clamp(v01, 0.0, 1.0) * 255.0;
  return static_cast<uint8_t>(std::lround(scaled));
}

// Gamma expansion table for the 256 sRGB byte values.
const double* srgb_linear_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(256);
    for (int i = 0; i < 256; ++i) t[i] = srgb_to_linear(i / 255.0);
    return t;
  }();
  return table.data();
}

}  // namespace

void rgb_to_lab_raw(uint8_t r, uint8_t g, uint8_t b, double* lab_out) {
  const double* lut = srgb_linear_table();
  if (r == g && g == b) {
    // Neutral axis: the truncated matrix coefficients would otherwise leave
    // a residue of ~1e-5 in a and b.
    lab_out[0] = 116.0 * lab_f(lut[r]) - 16.0;
    lab_out[1] = 0.0;
    lab_out[2] = 0.0;
    return;
  }
  double x, y, z;
  xyz_from_rgb(lut[r], lut[g], lut[b], &x, &y, &z);
  const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
  lab_out[0] = 116.0 * fy - 16.0;
  lab_out[1] = 500.0 * (fx - fy);
  lab_out[2] = 200.0 * (fy - fz);
}

LabViews rgb_to_lab(const Frame& frame) {
  check_dim(frame.rgb.size() == static_cast<size_t>(3) * frame.height * frame.width,
            "rgb_to_lab: frame byte length");
  LabViews out;
  out.height = frame.height;
  out.width = frame.width;
  const size_t plane = static_cast<size_t>(frame.height) * frame.width;
  out.l_view.resize(plane);
  out.ab_view.resize(2 * plane);
  const double* lut = srgb_linear_table();
  for (size_t p = 0; p < plane; ++p) {
    const uint8_t r8 = frame.rgb[p];
    const uint8_t g8 = frame.rgb[plane + p];
    const uint8_t b8 = frame.rgb[2 * plane + p];
    double l, a, b;
    if (r8 == g8 && g8 == b8) {
      // Grays are neutral by construction of the transform.
      l = 116.0 * lab_f(lut[r8]) - 16.0;
      a = b = 0.0;
    } else {
      double x, y, z;
      xyz_from_rgb(lut[r8], lut[g8], lut[b8], &x, &y, &z);
      const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
      l = 116.0 * fy - 16.0;
      a = 500.0 * (fx - fy);
      b = 200.0 * (fy - fz);
    }
    out.l_view[p] = static_cast<float>(l / 50.0 - 1.0);
    out.ab_view[p] = static_cast<float>(std::clamp(a, -110.0, 110.0) / 110.0);
    out.ab_view[plane + p] = static_cast<float>(std::clamp(b, -110.0, 110.0) / 110.0);
  }
  return out;
}

Frame lab_to_rgb(const LabViews& lab) {
  const size_t plane = static_cast<size_t>(lab.height) * lab.width;
  check_dim(lab.l_view.size() == plane && lab.ab_view.size() == 2 * plane,
            "lab_to_rgb: view sizes");
  Frame out(lab.height, lab.width);
  for (size_t p = 0; p < plane; ++p) {
    const double l = (static_cast<double>(lab.l_view[p]) + 1.0) * 50.0;
    const double a = static_cast<double>(lab.ab_view[p]) * 110.0;
    const double b = static_cast<double>(lab.ab_view[plane + p]) * 110.0;
    const double fy = (l + 16.0) / 116.0;
    const double fx = fy + a / 500.0;
    const double fz = fy - b / 200.0;
    const double x = kXn * lab_f_inv(fx);
    const double y = kYn * lab_f_inv(fy);
    const double z = kZn * lab_f_inv(fz);
    double r, g, bl;
    rgb_from_xyz(x, y, z, &r, &g, &bl);
    out.rgb[p] = to_byte(linear_to_srgb(r));
    out.rgb[plane + p] = to_byte(linear_to_srgb(g));
    out.rgb[2 * plane + p] = to_byte(linear_to_srgb(bl));
  }
  return out;
}

}  // namespace ifo
