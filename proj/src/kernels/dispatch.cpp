#include <atomic>
#include <cstdlib>
#include <string>

#include "spikeopt/error.hpp"
#include "spikeopt/kernels.hpp"

namespace spikeopt::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(SPIKEOPT_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const detail::Table* table_for(Backend b) noexcept {
#if defined(SPIKEOPT_HAVE_AVX2_KERNELS)
  if (b == Backend::Avx2) return &detail::avx2_table;
#endif
  (void)b;
  return &detail::scalar_table;
}

Backend initial_backend() noexcept {
  // SPIKEOPT_KERNELS=scalar pins the reference path.
  if (const char* env = std::getenv("SPIKEOPT_KERNELS"); env && std::string(env) == "scalar")
    return Backend::Scalar;
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() noexcept {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

const detail::Table& table() noexcept { return *table_for(current().load(std::memory_order_relaxed)); }

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(ErrorCode::BadParameter, std::string("kernel size mismatch in ") + what);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  return table().dot(a.data(), b.data(), a.size());
}

void gemv(std::span<const double> a, std::span<const double> x, std::span<double> y) {
  require_same_size(a.size(), x.size() * y.size(), "gemv");
  table().gemv(a.data(), y.size(), x.size(), x.data(), y.data());
}

ExtremalMoments extremal_moments(std::span<const double> f, std::span<const double> g,
                                 std::span<const double> w, const ExtremalCoeffs& k) {
  require_same_size(f.size(), g.size(), "extremal_moments");
  require_same_size(f.size(), w.size(), "extremal_moments");
  return table().extremal_moments(f.data(), g.data(), w.data(), f.size(), k);
}

void clipped_control(std::span<const double> f, std::span<const double> g, const ExtremalCoeffs& k,
                     std::span<double> control, std::span<double> radicand) {
  require_same_size(f.size(), g.size(), "clipped_control");
  require_same_size(f.size(), control.size(), "clipped_control");
  require_same_size(f.size(), radicand.size(), "clipped_control");
  table().clipped_control(f.data(), g.data(), f.size(), k, control.data(), radicand.data());
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

bool backend_available(Backend b) noexcept { return b == Backend::Scalar || cpu_has_avx2(); }

void set_backend(Backend b) {
  if (!backend_available(b))
    throw Error(ErrorCode::BadParameter, std::string("kernel backend unavailable: ") +
                                             std::string(backend_name(b)));
  current().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

}  // namespace spikeopt::kernels
