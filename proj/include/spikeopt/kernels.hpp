#pragma once

// Data-parallel inner loops shared by the solvers. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant; the variant is
// chosen once at startup from CPUID and can be overridden for testing.

#include <cstddef>
#include <span>
#include <string_view>

namespace spikeopt::kernels {

enum class Backend { Scalar, Avx2 };

/// Constants of a (possibly clipped) extremal control evaluated pointwise
/// from tabulated f and g: I* = (-f + sqrt(f^2 - g*mu*f - g^2*c)) / g,
/// clamped to [-bound, bound]. `bound` may be +infinity.
struct ExtremalCoeffs {
  double c = 0.0;
  double mu = 0.0;
  double bound = 0.0;
};

/// Weighted sums over quadrature nodes of 1/rate, I/rate and I^2/rate, where
/// rate = f + g*I is the phase velocity under the control.
struct ExtremalMoments {
  double time = 0.0;
  double charge = 0.0;
  double cost = 0.0;
  double min_radicand = 0.0;
  double min_rate = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b);

/// y = A x for a dense row-major matrix with x.size() columns.
void gemv(std::span<const double> a, std::span<const double> x, std::span<double> y);

ExtremalMoments extremal_moments(std::span<const double> f, std::span<const double> g,
                                 std::span<const double> w, const ExtremalCoeffs& k);

/// Pointwise control and radicand. Where the radicand is negative the
/// extremal does not exist; the control there is -f/g (the value at which the
/// radicand vanishes) before clipping.
void clipped_control(std::span<const double> f, std::span<const double> g,
                     const ExtremalCoeffs& k, std::span<double> control,
                     std::span<double> radicand);

Backend active_backend() noexcept;
bool backend_available(Backend b) noexcept;
/// Throws spikeopt::Error(BadParameter) if the backend is not supported here.
void set_backend(Backend b);
std::string_view backend_name(Backend b) noexcept;

namespace detail {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  void (*gemv)(const double*, std::size_t, std::size_t, const double*, double*);
  ExtremalMoments (*extremal_moments)(const double*, const double*, const double*, std::size_t,
                                      const ExtremalCoeffs&);
  void (*clipped_control)(const double*, const double*, std::size_t, const ExtremalCoeffs&,
                          double*, double*);
};

extern const Table scalar_table;
#if defined(SPIKEOPT_HAVE_AVX2_KERNELS)
extern const Table avx2_table;
#endif

}  // namespace detail

}  // namespace spikeopt::kernels
