#include "pcap/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace pcap::kern {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void xpby_scalar(double* y, const double* x, double beta, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + beta * y[i];
}

void hadamard_scalar(double* z, const double* a, const double* b,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) z[i] = a[i] * b[i];
}

void pow_shift_scalar(double* dst, const double* src, std::size_t n, double e,
                      double eps2) {
  if (e == 0.0) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = 1.0;
    return;
  }
  if (e == 1.0) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] + eps2;
    return;
  }
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::pow(src[i] + eps2, e);
}

void stencil2d_scalar(double* out, const double* v, const double* wx,
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
    for (int i = 1; i < nx - 1; ++i) {
      const double c = vc[i];
      o[i] = wxr[i - 1] * (c - vc[i - 1]) + wxr[i] * (c - vc[i + 1]) +
             wyd[i] * (c - vc[i - nx]) + wyu[i] * (c - vc[i + nx]);
    }
  }
}

void stencil3d_scalar(double* out, const double* v, const double* wx,
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
      for (int i = 1; i < nx - 1; ++i) {
        const double c = vc[i];
        o[i] = wxr[i - 1] * (c - vc[i - 1]) + wxr[i] * (c - vc[i + 1]) +
               wyd[i] * (c - vc[i - nx]) + wyu[i] * (c - vc[i + nx]) +
               wzd[i] * (c - vc[i - static_cast<long>(page)]) +
               wzu[i] * (c - vc[i + static_cast<long>(page)]);
      }
    }
  }
}

const Kernels kScalar = {
    "scalar",        dot_scalar,      axpy_scalar,    xpby_scalar,
    hadamard_scalar, pow_shift_scalar, stencil2d_scalar, stencil3d_scalar,
};

SimdMode g_mode = SimdMode::Auto;

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

void set_simd_mode(SimdMode m) { g_mode = m; }

SimdMode simd_mode() { return g_mode; }

const Kernels& active() {
  switch (g_mode) {
    case SimdMode::Scalar:
      return kScalar;
    case SimdMode::Avx2: {
      const Kernels* k = avx2_kernels();
      if (k) return *k;
      return kScalar;
    }
    case SimdMode::Auto:
    default: {
      const Kernels* k = avx2_kernels();
      if (k) return *k;
      return kScalar;
    }
  }
}

}  // namespace pcap::kern
