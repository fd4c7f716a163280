#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace ssde {

inline constexpr std::string_view rng_algorithm = "philox4x32-10+box-muller";

// Philox4x32 with 10 rounds (Salmon et al., SC'11). Stateless: the output is a
// pure function of (counter, key), which is what makes parallel replications
// reproducible independent of scheduling.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

// Mixes a tag into a seed (splitmix64 finalizer). Used for the
// master -> stream -> path hierarchy of sub-seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::array<std::uint32_t, 4> block(std::uint64_t counter) const;

  // Open interval (0, 1), 53 bits.
  double uniform(std::uint64_t index) const;

  // Standard normal; indices 2k and 2k+1 share one Box-Muller pair.
  double normal(std::uint64_t index) const;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
};

}  // namespace ssde
