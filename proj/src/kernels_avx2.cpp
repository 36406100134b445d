#include "psolv/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

// Compiled with -mavx2 -mfma; nothing here runs unless the dispatcher saw
// AVX2 in cpuid, so the baseline build stays portable.

namespace psolv::kernels {
namespace {

inline double hmin(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_min_pd(lo, hi);
  lo = _mm_min_sd(lo, _mm_unpackhi_pd(lo, lo));
  return _mm_cvtsd_f64(lo);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
  return _mm_cvtsd_f64(lo);
}

void hinv_sqrt_avx2(const double* fp, const double* fpp, const double* ad0,
                    double c4, double c2, double* out, std::size_t n) {
  const __m256d vc4 = _mm256_set1_pd(c4);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vfp = _mm256_loadu_pd(fp + i);
    const __m256d vfpp = _mm256_loadu_pd(fpp + i);
    const __m256d vad = _mm256_loadu_pd(ad0 + i);
    const __m256d den =
        _mm256_add_pd(vfpp, _mm256_fmadd_pd(vc4, _mm256_sqrt_pd(vfp), vc2));
    const __m256d r =
        _mm256_add_pd(_mm256_add_pd(one, vad), _mm256_div_pd(vfp, den));
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i)
    out[i] = 1.0 + ad0[i] + fp[i] / (fpp[i] + c4 * std::sqrt(fp[i]) + c2);
}

void weight_m_avx2(const double* af, const double* fp, const double* fpp,
                   const double* hinv, double c2, double* out, std::size_t n) {
  const __m256d vc2 = _mm256_set1_pd(c2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d hi = _mm256_loadu_pd(hinv + i);
    const __m256d hi2 = _mm256_mul_pd(hi, hi);
    __m256d acc = _mm256_fmadd_pd(_mm256_loadu_pd(fp + i), hi,
                                  _mm256_loadu_pd(af + i));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(fpp + i), hi2, acc);
    acc = _mm256_fmadd_pd(vc2, _mm256_mul_pd(hi2, hi), acc);
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) {
    const double hi = hinv[i];
    out[i] = af[i] + fp[i] * hi + fpp[i] * hi * hi + c2 * hi * hi * hi;
  }
}

double min_dist2_avx2(double x, double y, const double* zx, const double* zy,
                      std::size_t n) {
  const __m256d vx = _mm256_set1_pd(x);
  const __m256d vy = _mm256_set1_pd(y);
  __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(vx, _mm256_loadu_pd(zx + i));
    const __m256d dy = _mm256_sub_pd(vy, _mm256_loadu_pd(zy + i));
    best = _mm256_min_pd(best, _mm256_fmadd_pd(dx, dx, _mm256_mul_pd(dy, dy)));
  }
  double b = hmin(best);
  for (; i < n; ++i) {
    const double dx = x - zx[i];
    const double dy = y - zy[i];
    const double d2 = dx * dx + dy * dy;
    if (d2 < b) b = d2;
  }
  return b;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const Ops* avx2_ops_impl() {
  static const Ops table{"avx2", hinv_sqrt_avx2, weight_m_avx2, min_dist2_avx2,
                         dot_avx2};
  return &table;
}

}  // namespace psolv::kernels
