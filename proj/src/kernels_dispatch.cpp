#include "psolv/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace psolv::kernels {

#if PSOLV_BUILD_AVX2
const Ops* avx2_ops_impl();  // defined in kernels_avx2.cpp
#endif

const Ops* avx2_ops() {
#if PSOLV_BUILD_AVX2
#if defined(__GNUC__) || defined(__clang__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return avx2_ops_impl();
#endif
#endif
  return nullptr;
}

namespace {

const Ops* select() {
  const char* env = std::getenv("PSOLV_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return &scalar_ops();
  const Ops* avx = avx2_ops();
  if (env && std::strcmp(env, "avx2") == 0) return avx ? avx : &scalar_ops();
  return avx ? avx : &scalar_ops();  // "auto" / unset
}

}  // namespace

const Ops& ops() {
  static const Ops* active = select();
  return *active;
}

}  // namespace psolv::kernels
