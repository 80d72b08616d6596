#include <algorithm>
#include <cmath>
#include <limits>

#include "spikeopt/kernels.hpp"

namespace spikeopt::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * cols, x, cols);
}

// One node of the extremal evaluation. Kept inline so the AVX2 file can
// mirror it lane by lane.
struct NodeValue {
  double control;
  double rate;
  double radicand;
};

inline NodeValue eval_node(double f, double g, const ExtremalCoeffs& k) {
  const double rad = f * (f - g * k.mu) - g * g * k.c;
  double u;
  double s = 0.0;
  if (rad >= 0.0) {
    s = std::sqrt(rad);
    // Rationalized form has no 0/0 at g = 0 when f > 0.
    u = f > 0.0 ? (-k.mu * f - g * k.c) / (s + f) : (s - f) / g;
  } else {
    u = -f / g;
  }
  const double clipped = std::clamp(u, -k.bound, k.bound);
  const bool on_extremal = rad >= 0.0 && clipped == u;
  const double rate = on_extremal ? s : f + g * clipped;
  return {clipped, rate, rad};
}

ExtremalMoments moments_scalar(const double* f, const double* g, const double* w, std::size_t n,
                               const ExtremalCoeffs& k) {
  ExtremalMoments m;
  m.min_radicand = std::numeric_limits<double>::infinity();
  m.min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const NodeValue v = eval_node(f[i], g[i], k);
    const double inv = w[i] / v.rate;
    m.time += inv;
    m.charge += inv * v.control;
    m.cost += inv * v.control * v.control;
    m.min_radicand = std::min(m.min_radicand, v.radicand);
    m.min_rate = std::min(m.min_rate, v.rate);
  }
  return m;
}

void clipped_control_scalar(const double* f, const double* g, std::size_t n,
                            const ExtremalCoeffs& k, double* control, double* radicand) {
  for (std::size_t i = 0; i < n; ++i) {
    const NodeValue v = eval_node(f[i], g[i], k);
    control[i] = v.control;
    radicand[i] = v.radicand;
  }
}

}  // namespace

const Table scalar_table{dot_scalar, gemv_scalar, moments_scalar, clipped_control_scalar};

}  // namespace spikeopt::kernels::detail
