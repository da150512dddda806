#include <cstdlib>
#include <string>

#include "genfeat/errors.hpp"
#include "genfeat/kernels.hpp"

namespace genfeat::kernels {

#if defined(__x86_64__) || defined(_M_X64)
const Backend& avx2_backend();
#endif
#if defined(__aarch64__)
const Backend& neon_backend();
#endif

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool neon_available() {
#if defined(__aarch64__)
  return true;
#else
  return false;
#endif
}

namespace {

const Backend* g_active = nullptr;

const Backend* resolve(BackendKind kind) {
  switch (kind) {
    case BackendKind::Scalar:
      return &scalar_backend();
    case BackendKind::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (avx2_available()) return &avx2_backend();
#endif
      throw NumericError("avx2 kernels are not available on this machine");
    case BackendKind::Neon:
#if defined(__aarch64__)
      return &neon_backend();
#else
      throw NumericError("neon kernels are not available on this machine");
#endif
    case BackendKind::Auto:
      break;
  }
  if (const char* env = std::getenv("GENFEAT_KERNELS")) {
    std::string s(env);
    if (s == "scalar") return resolve(BackendKind::Scalar);
    if (s == "avx2") return resolve(BackendKind::Avx2);
    if (s == "neon") return resolve(BackendKind::Neon);
    if (!s.empty() && s != "auto") {
      throw UsageError("GENFEAT_KERNELS must be auto, scalar, avx2 or neon; got \"" + s + "\"");
    }
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_available()) return &avx2_backend();
#endif
#if defined(__aarch64__)
  return &neon_backend();
#endif
  return &scalar_backend();
}

}  // namespace

const Backend& active() {
  if (!g_active) g_active = resolve(BackendKind::Auto);
  return *g_active;
}

void select(BackendKind kind) { g_active = resolve(kind); }

}  // namespace genfeat::kernels
