#pragma once

#include <cstdint>
#include <random>

namespace cbpl {

// splitmix64, used to derive independent child seeds from (seed, stream id).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ 0xd1b54a32d192ed03ULL) ^ splitmix64(a + 0x100) ^
                    splitmix64(b + 0x9e3779b97f4a7c15ULL));
}

}  // namespace cbpl
