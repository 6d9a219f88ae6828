#ifndef PPREG_RNG_HPP
#define PPREG_RNG_HPP

#include <array>
#include <cstdint>

namespace ppreg {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is a
// (key, counter) pair; split() derives statistically independent child
// streams, so replicate i of a study draws from master.split(i) no matter
// which worker runs it or in which order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng split(std::uint64_t index) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal();
  std::uint64_t poisson(double mean);

  std::uint64_t key() const { return key_; }

 private:
  Rng(std::uint64_t key, std::uint64_t stream, bool);
  void refill();

  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  unsigned used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Single Philox4x32-10 block; exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                         std::array<std::uint32_t, 2> key);

}  // namespace ppreg

#endif  // PPREG_RNG_HPP
