#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace swg {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t avalanche64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace detail

// Counter-based stream keyed by (seed, tag, d0, d1, d2). Streams with
// distinct keys are statistically independent and do not share state, so
// draws are bit-reproducible under any worker scheduling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t tag = 0,
                      std::uint64_t d0 = 0, std::uint64_t d1 = 0,
                      std::uint64_t d2 = 0) {
    std::uint64_t k = detail::avalanche64(seed + detail::kGolden);
    k = detail::avalanche64(k ^ (tag + detail::kGolden));
    k = detail::avalanche64(k ^ (d0 + detail::kGolden));
    k = detail::avalanche64(k ^ (d1 + detail::kGolden));
    k = detail::avalanche64(k ^ (d2 + detail::kGolden));
    state_ = k;
  }

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::avalanche64(state_);
  }

  // Uniform on the open interval (0,1); never returns an exact endpoint.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  Eigen::VectorXd normals(Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = next_normal();
    return out;
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace swg
