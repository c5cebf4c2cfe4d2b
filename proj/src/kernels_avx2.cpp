// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; everything is guarded so non-x86 builds fall back to
// the scalar table.

#include "pcap/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__) && defined(__x86_64__)
#define PCAP_AVX2_BUILD 1
#else
#define PCAP_AVX2_BUILD 0
#endif

#if PCAP_AVX2_BUILD

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace pcap::kern {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void xpby_avx2(double* y, const double* x, double beta, std::size_t n) {
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(vb, _mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] = x[i] + beta * y[i];
}

void hadamard_avx2(double* z, const double* a, const double* b,
                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        z + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) z[i] = a[i] * b[i];
}

// q^k for small |k| by repeated multiplication.
inline __m256d int_pow(__m256d q, int k) {
  __m256d r = _mm256_set1_pd(1.0);
  __m256d base = q;
  int e = k < 0 ? -k : k;
  while (e > 0) {
    if (e & 1) r = _mm256_mul_pd(r, base);
    base = _mm256_mul_pd(base, base);
    e >>= 1;
  }
  if (k < 0) r = _mm256_div_pd(_mm256_set1_pd(1.0), r);
  return r;
}

void pow_shift_avx2(double* dst, const double* src, std::size_t n, double e,
                    double eps2) {
  const __m256d veps = _mm256_set1_pd(eps2);
  if (e == 0.0) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = 1.0;
    return;
  }
  if (e == 1.0) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(src + i), veps));
    }
    for (; i < n; ++i) dst[i] = src[i] + eps2;
    return;
  }
  const double k4d = std::round(4.0 * e);
  const bool quarter = std::abs(4.0 * e - k4d) < 1e-12 && std::abs(k4d) <= 12.0;
  if (quarter) {
    const int k4 = static_cast<int>(k4d);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      const __m256d x = _mm256_add_pd(_mm256_loadu_pd(src + i), veps);
      const __m256d q = _mm256_sqrt_pd(_mm256_sqrt_pd(x));
      _mm256_storeu_pd(dst + i, int_pow(q, k4));
    }
    for (; i < n; ++i) {
      const double q = std::sqrt(std::sqrt(src[i] + eps2));
      double r = 1.0, base = q;
      int ee = k4 < 0 ? -k4 : k4;
      while (ee > 0) {
        if (ee & 1) r *= base;
        base *= base;
        ee >>= 1;
      }
      dst[i] = k4 < 0 ? 1.0 / r : r;
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::pow(src[i] + eps2, e);
}

void stencil2d_avx2(double* out, const double* v, const double* wx,
                    const double* wy, int nx, int ny) {
  const std::size_t snx = static_cast<std::size_t>(nx);
  std::memset(out, 0, snx * sizeof(double));
  std::memset(out + (static_cast<std::size_t>(ny - 1)) * snx, 0,
              snx * sizeof(double));
  for (int j = 1; j < ny - 1; ++j) {
    double* o = out + static_cast<std::size_t>(j) * snx;
    const double* vc = v + static_cast<std::size_t>(j) * snx;
    const double* wxr = wx + static_cast<std::size_t>(j) * (snx - 1);
    const double* wyd = wy + static_cast<std::size_t>(j - 1) * snx;
    const double* wyu = wy + static_cast<std::size_t>(j) * snx;
    o[0] = 0.0;
    o[nx - 1] = 0.0;
    int i = 1;
    for (; i + 4 <= nx - 1; i += 4) {
      const __m256d c = _mm256_loadu_pd(vc + i);
      __m256d acc = _mm256_mul_pd(
          _mm256_loadu_pd(wxr + i - 1),
          _mm256_sub_pd(c, _mm256_loadu_pd(vc + i - 1)));
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(wxr + i),
                            _mm256_sub_pd(c, _mm256_loadu_pd(vc + i + 1)), acc);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(wyd + i),
                            _mm256_sub_pd(c, _mm256_loadu_pd(vc + i - nx)), acc);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(wyu + i),
                            _mm256_sub_pd(c, _mm256_loadu_pd(vc + i + nx)), acc);
      _mm256_storeu_pd(o + i, acc);
    }
    for (; i < nx - 1; ++i) {
      const double c = vc[i];
      o[i] = wxr[i - 1] * (c - vc[i - 1]) + wxr[i] * (c - vc[i + 1]) +
             wyd[i] * (c - vc[i - nx]) + wyu[i] * (c - vc[i + nx]);
    }
  }
}

void stencil3d_avx2(double* out, const double* v, const double* wx,
                    const double* wy, const double* wz, int nx, int ny,
                    int nz) {
  const std::size_t page = static_cast<std::size_t>(nx) * ny;
  std::memset(out, 0, page * sizeof(double));
  std::memset(out + static_cast<std::size_t>(nz - 1) * page, 0,
              page * sizeof(double));
  for (int k = 1; k < nz - 1; ++k) {
    for (int j = 0; j < ny; ++j) {
      double* o = out + static_cast<std::size_t>(k) * page +
                  static_cast<std::size_t>(j) * nx;
      if (j == 0 || j == ny - 1) {
        std::memset(o, 0, static_cast<std::size_t>(nx) * sizeof(double));
        continue;
      }
      const double* vc = v + static_cast<std::size_t>(k) * page +
                         static_cast<std::size_t>(j) * nx;
      const double* wxr =
          wx + (static_cast<std::size_t>(k) * ny + j) * (nx - 1);
      const double* wyd =
          wy + (static_cast<std::size_t>(k) * (ny - 1) + (j - 1)) * nx;
      const double* wyu =
          wy + (static_cast<std::size_t>(k) * (ny - 1) + j) * nx;
      const double* wzd =
          wz + (static_cast<std::size_t>(k - 1) * ny + j) * nx;
      const double* wzu = wz + (static_cast<std::size_t>(k) * ny + j) * nx;
      o[0] = 0.0;
      o[nx - 1] = 0.0;
      const long pg = static_cast<long>(page);
      int i = 1;
      for (; i + 4 <= nx - 1; i += 4) {
        const __m256d c = _mm256_loadu_pd(vc + i);
        __m256d acc = _mm256_mul_pd(
            _mm256_loadu_pd(wxr + i - 1),
            _mm256_sub_pd(c, _mm256_loadu_pd(vc + i - 1)));
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(wxr + i),
                              _mm256_sub_pd(c, _mm256_loadu_pd(vc + i + 1)),
                              acc);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(wyd + i),
                              _mm256_sub_pd(c, _mm256_loadu_pd(vc + i - nx)),
                              acc);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(wyu + i),
                              _mm256_sub_pd(c, _mm256_loadu_pd(vc + i + nx)),
                              acc);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(wzd + i),
                              _mm256_sub_pd(c, _mm256_loadu_pd(vc + i - pg)),
                              acc);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(wzu + i),
                              _mm256_sub_pd(c, _mm256_loadu_pd(vc + i + pg)),
                              acc);
        _mm256_storeu_pd(o + i, acc);
      }
      for (; i < nx - 1; ++i) {
        const double c = vc[i];
        o[i] = wxr[i - 1] * (c - vc[i - 1]) + wxr[i] * (c - vc[i + 1]) +
               wyd[i] * (c - vc[i - nx]) + wyu[i] * (c - vc[i + nx]) +
               wzd[i] * (c - vc[i - pg]) + wzu[i] * (c - vc[i + pg]);
      }
    }
  }
}

const Kernels kAvx2 = {
    "avx2",        dot_avx2,      axpy_avx2,     xpby_avx2,
    hadamard_avx2, pow_shift_avx2, stencil2d_avx2, stencil3d_avx2,
};

}  // namespace

bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Kernels* avx2_kernels() { return avx2_supported() ? &kAvx2 : nullptr; }

}  // namespace pcap::kern

#else  // !PCAP_AVX2_BUILD

namespace pcap::kern {
bool avx2_supported() { return false; }
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace pcap::kern

#endif
