#include "psolv/kernels.hpp"

#include <cmath>
#include <limits>

namespace psolv::kernels {
namespace {

void hinv_sqrt_scalar(const double* fp, const double* fpp, const double* ad0,
                      double c4, double c2, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    // Denominator is >= c2 = h^{1/2} > 0, so the quotient is always finite.
    out[i] = 1.0 + ad0[i] + fp[i] / (fpp[i] + c4 * std::sqrt(fp[i]) + c2);
  }
}

void weight_m_scalar(const double* af, const double* fp, const double* fpp,
                     const double* hinv, double c2, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = hinv[i];
    out[i] = af[i] + fp[i] * hi + fpp[i] * hi * hi + c2 * hi * hi * hi;
  }
}

double min_dist2_scalar(double x, double y, const double* zx, const double* zy,
                        std::size_t n) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x - zx[i];
    const double dy = y - zy[i];
    const double d2 = dx * dx + dy * dy;
    if (d2 < best) best = d2;
  }
  return best;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table{"scalar", hinv_sqrt_scalar, weight_m_scalar,
                         min_dist2_scalar, dot_scalar};
  return table;
}

}  // namespace psolv::kernels
