#include "mkvflow/rng.hpp"

#include <cmath>

namespace mkv::rng {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3) - 1

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t counter, Purpose purpose) {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(stream),
      static_cast<std::uint32_t>(stream >> 32),
      static_cast<std::uint32_t>(counter),
      static_cast<std::uint32_t>(counter >> 32) ^ (static_cast<std::uint32_t>(purpose) << 28),
  };
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed),
      static_cast<std::uint32_t>(seed >> 32),
  };
  return philox4x32(ctr, key);
}

double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter, Purpose purpose) {
  const auto b = block(seed, stream, counter, purpose);
  const std::uint64_t x = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
  return static_cast<double>((x >> 11) + 1) * kInv53;  // (0,1]
}

double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter, Purpose purpose) {
  const auto b = block(seed, stream, counter, purpose);
  const std::uint64_t x = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
  const std::uint64_t y = (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
  const double u1 = static_cast<double>((x >> 11) + 1) * kInv53;
  const double u2 = static_cast<double>(y >> 11) * kInv53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace mkv::rng
