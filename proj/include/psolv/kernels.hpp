#pragma once

#include <cstddef>

namespace psolv::kernels {

// Inner-loop kernels used by the field pipeline. Each entry has a scalar
// reference implementation and (when the host supports it) an AVX2 variant;
// ops() picks one at runtime. The AVX2 build must be bit-compatible with the
// scalar one up to reassociation of sums (tests pin the tolerance).
struct Ops {
  const char* name;

  // out[i] = 1 + ad0[i] + fp[i] / (fpp[i] + c4*sqrt(fp[i]) + c2)
  // with fp = |f'|, fpp = |f''|, ad0 = |delta0|, c4 = h^{1/4}, c2 = h^{1/2}.
  void (*hinv_sqrt)(const double* fp, const double* fpp, const double* ad0,
                    double c4, double c2, double* out, std::size_t n);

  // out[i] = af[i] + fp[i]*hinv[i] + fpp[i]*hinv[i]^2 + c2*hinv[i]^3
  // with af = |f| and hinv = H^{-1/2}; c2 = h^{1/2}.
  void (*weight_m)(const double* af, const double* fp, const double* fpp,
                   const double* hinv, double c2, double* out, std::size_t n);

  // min_i (x - zx[i])^2 + (y - zy[i])^2; +infinity when n == 0.
  double (*min_dist2)(double x, double y, const double* zx, const double* zy,
                      std::size_t n);

  // Plain dot product (used by the separable Gaussian regularization passes).
  double (*dot)(const double* a, const double* b, std::size_t n);
};

// Runtime-selected table: AVX2 when the CPU supports it, overridable with
// PSOLV_SIMD=scalar|avx2|auto (avx2 falls back to scalar if unsupported).
const Ops& ops();

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when not compiled in or not supported

}  // namespace psolv::kernels
