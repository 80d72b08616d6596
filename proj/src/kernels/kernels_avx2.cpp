#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "spikeopt/kernels.hpp"

namespace spikeopt::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmin(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_min_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_min_sd(m, _mm_unpackhi_pd(m, m)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(a + r * cols, x, cols);
}

struct Lanes {
  __m256d control;
  __m256d rate;
  __m256d radicand;
};

// Lane-wise mirror of eval_node in kernels_scalar.cpp.
inline Lanes eval_lanes(__m256d f, __m256d g, __m256d c, __m256d mu, __m256d lo, __m256d hi) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d rad = _mm256_fmsub_pd(f, _mm256_fnmadd_pd(g, mu, f), _mm256_mul_pd(_mm256_mul_pd(g, g), c));
  const __m256d ok = _mm256_cmp_pd(rad, zero, _CMP_GE_OQ);
  const __m256d s = _mm256_sqrt_pd(_mm256_max_pd(rad, zero));
  const __m256d num_rat = _mm256_fnmadd_pd(g, c, _mm256_mul_pd(_mm256_sub_pd(zero, mu), f));
  const __m256d u_rat = _mm256_div_pd(num_rat, _mm256_add_pd(s, f));
  const __m256d u_dir = _mm256_div_pd(_mm256_sub_pd(s, f), g);
  const __m256d fpos = _mm256_cmp_pd(f, zero, _CMP_GT_OQ);
  const __m256d u_ext = _mm256_blendv_pd(u_dir, u_rat, fpos);
  const __m256d u_edge = _mm256_div_pd(_mm256_sub_pd(zero, f), g);
  const __m256d u = _mm256_blendv_pd(u_edge, u_ext, ok);
  const __m256d clipped = _mm256_max_pd(lo, _mm256_min_pd(u, hi));
  const __m256d same = _mm256_cmp_pd(clipped, u, _CMP_EQ_OQ);
  const __m256d on_extremal = _mm256_and_pd(ok, same);
  // No FMA here: off the extremal the rate can cancel to zero, and the
  // scalar path rounds the product first.
  const __m256d rate = _mm256_blendv_pd(_mm256_add_pd(f, _mm256_mul_pd(g, clipped)), s, on_extremal);
  return {clipped, rate, rad};
}

ExtremalMoments moments_avx2(const double* f, const double* g, const double* w, std::size_t n,
                             const ExtremalCoeffs& k) {
  const __m256d c = _mm256_set1_pd(k.c);
  const __m256d mu = _mm256_set1_pd(k.mu);
  const __m256d hi = _mm256_set1_pd(k.bound);
  const __m256d lo = _mm256_set1_pd(-k.bound);
  const double inf = std::numeric_limits<double>::infinity();
  __m256d t = _mm256_setzero_pd(), q = _mm256_setzero_pd(), e = _mm256_setzero_pd();
  __m256d min_rad = _mm256_set1_pd(inf), min_rate = _mm256_set1_pd(inf);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const Lanes v = eval_lanes(_mm256_loadu_pd(f + i), _mm256_loadu_pd(g + i), c, mu, lo, hi);
    const __m256d inv = _mm256_div_pd(_mm256_loadu_pd(w + i), v.rate);
    const __m256d iq = _mm256_mul_pd(inv, v.control);
    t = _mm256_add_pd(t, inv);
    q = _mm256_add_pd(q, iq);
    e = _mm256_fmadd_pd(iq, v.control, e);
    min_rad = _mm256_min_pd(min_rad, v.radicand);
    min_rate = _mm256_min_pd(min_rate, v.rate);
  }
  ExtremalMoments m;
  m.time = hsum(t);
  m.charge = hsum(q);
  m.cost = hsum(e);
  m.min_radicand = hmin(min_rad);
  m.min_rate = hmin(min_rate);
  if (i < n) {
    // Tail through the scalar reference so both backends share semantics.
    const ExtremalMoments r = scalar_table.extremal_moments(f + i, g + i, w + i, n - i, k);
    m.time += r.time;
    m.charge += r.charge;
    m.cost += r.cost;
    m.min_radicand = std::min(m.min_radicand, r.min_radicand);
    m.min_rate = std::min(m.min_rate, r.min_rate);
  }
  return m;
}

void clipped_control_avx2(const double* f, const double* g, std::size_t n, const ExtremalCoeffs& k,
                          double* control, double* radicand) {
  const __m256d c = _mm256_set1_pd(k.c);
  const __m256d mu = _mm256_set1_pd(k.mu);
  const __m256d hi = _mm256_set1_pd(k.bound);
  const __m256d lo = _mm256_set1_pd(-k.bound);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const Lanes v = eval_lanes(_mm256_loadu_pd(f + i), _mm256_loadu_pd(g + i), c, mu, lo, hi);
    _mm256_storeu_pd(control + i, v.control);
    _mm256_storeu_pd(radicand + i, v.radicand);
  }
  if (i < n) scalar_table.clipped_control(f + i, g + i, n - i, k, control + i, radicand + i);
}

}  // namespace

const Table avx2_table{dot_avx2, gemv_avx2, moments_avx2, clipped_control_avx2};

}  // namespace spikeopt::kernels::detail
