#include "covsde/rng.hpp"

#include <cmath>

namespace covsde {
namespace {

// Ziggurat layout for the standard normal, 128 layers.
// R is the abscissa of the base layer, V the common layer area.
constexpr double kZigguratR = 3.442619855899;
constexpr double kZigguratV = 9.91256303526217e-3;
constexpr double kScale = 4503599627370496.0;  // 2^52

struct ZigguratTables {
  std::int64_t k[128];  // acceptance thresholds on |h|
  double w[128];        // x = h * w[layer]
  double f[128];        // density at the layer boundary
  ZigguratTables() {
    double d = kZigguratR;
    double t = d;
    const double q = kZigguratV / std::exp(-0.5 * d * d);
    k[0] = static_cast<std::int64_t>((d / q) * kScale);
    k[1] = 0;
    w[0] = q / kScale;
    w[127] = d / kScale;
    f[0] = 1.0;
    f[127] = std::exp(-0.5 * d * d);
    for (int i = 126; i >= 1; --i) {
      d = std::sqrt(-2.0 * std::log(kZigguratV / d + std::exp(-0.5 * d * d)));
      k[i + 1] = static_cast<std::int64_t>((d / t) * kScale);
      t = d;
      f[i] = std::exp(-0.5 * d * d);
      w[i] = d / kScale;
    }
  }
};

const ZigguratTables& tables() {
  static const ZigguratTables t;
  return t;
}

}  // namespace

double RandomStream::normal() {
  const ZigguratTables& z = tables();
  for (;;) {
    const std::uint64_t u = bits();
    const int layer = static_cast<int>(u & 127u);
    // Signed 52-bit mantissa: top 53 bits minus the offset give a value in
    // [-2^52, 2^52), so x = h*w is symmetric about zero for free.
    const std::int64_t h =
        static_cast<std::int64_t>(u >> 11) - static_cast<std::int64_t>(kScale);
    const double x = static_cast<double>(h) * z.w[layer];
    if ((h < 0 ? -h : h) < z.k[layer]) return x;
    const double result = normal_fixup(h, layer);
    if (!std::isnan(result)) return result;
  }
}

// Slow path: layer 0 samples the tail beyond R; other layers do the wedge
// rejection test against the true density. Returns NaN to signal "retry".
double RandomStream::normal_fixup(std::int64_t h, int layer) {
  const ZigguratTables& z = tables();
  if (layer == 0) {
    // Marsaglia tail algorithm for |x| > R. The uniforms feed a log, so use
    // the open-interval variant that never returns exactly 0.
    double x, y;
    do {
      const double u1 = (static_cast<double>(bits() >> 11) + 1.0) * 0x1.0p-53;
      const double u2 = (static_cast<double>(bits() >> 11) + 1.0) * 0x1.0p-53;
      x = -std::log(u1) / kZigguratR;
      y = -std::log(u2);
    } while (y + y < x * x);
    return h < 0 ? -(kZigguratR + x) : kZigguratR + x;
  }
  const double x = static_cast<double>(h) * z.w[layer];
  const double u01 = uniform01();
  if (z.f[layer] + u01 * (z.f[layer - 1] - z.f[layer]) < std::exp(-0.5 * x * x)) {
    return x;
  }
  return std::nan("");
}

}  // namespace covsde
