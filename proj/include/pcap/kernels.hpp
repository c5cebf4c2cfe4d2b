#pragma once

#include <cstddef>

namespace pcap::kern {

/// Data-parallel inner loops shared by the solver: BLAS-1 pieces for the
/// conjugate-gradient iteration, the variable-coefficient 5/7-point stencil,
/// and the powered coefficient transform of the Picard assembly.
///
/// Two implementations exist: a scalar reference (the semantics) and an
/// AVX2+FMA variant selected at runtime. They agree to rounding noise; the
/// kernel tests pin that down.
struct Kernels {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  /// y = x + beta * y
  void (*xpby)(double* y, const double* x, double beta, std::size_t n);
  /// z = a .* b
  void (*hadamard)(double* z, const double* a, const double* b, std::size_t n);
  /// dst = (src + eps2)^e. Exponents that are quarter-integers (every p of
  /// interest lands there) are computed from square roots only.
  void (*pow_shift)(double* dst, const double* src, std::size_t n, double e,
                    double eps2);
  /// out = A v for the edge-weighted 5-point operator
  ///   (A v)_ij = sum_edges w_e (v_ij - v_nbr),
  /// wx indexed j*(nx-1)+i for edge (i,j)-(i+1,j), wy indexed j*nx+i for
  /// edge (i,j)-(i,j+1). The outer node ring is set to zero.
  void (*stencil2d)(double* out, const double* v, const double* wx,
                    const double* wy, int nx, int ny);
  /// 7-point analogue; w? indexed like the 2-d case with a z page stride.
  void (*stencil3d)(double* out, const double* v, const double* wx,
                    const double* wy, const double* wz, int nx, int ny, int nz);
};

enum class SimdMode { Auto, Scalar, Avx2 };

bool avx2_supported();
void set_simd_mode(SimdMode m);
SimdMode simd_mode();

const Kernels& scalar_kernels();
const Kernels* avx2_kernels();  // nullptr if unavailable on this CPU/build
const Kernels& active();

}  // namespace pcap::kern
