#pragma once

#include <array>
#include <cstdint>

namespace mkv {

// Counter-based random numbers (Philox 4x32-10). Every draw is a pure
// function of (seed, stream, counter, purpose), so particle i at step k can
// be generated on any worker, in any order, with bit-identical results.
//
// Layout: the 64-bit seed is the Philox key; the 128-bit counter packs the
// stream id (particle index), the step counter and a purpose tag that keeps
// independent consumers (simulation noise, initial sampling, test suites)
// from ever sharing a counter.
namespace rng {

enum class Purpose : std::uint32_t {
  sim_noise = 0,
  init_sample = 1,
  suite = 2,
  generic = 3,
};

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Raw 128-bit block for (seed, stream, counter, purpose).
std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t counter, Purpose purpose);

// Uniform on (0,1] (left-open so log() is always finite).
double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
               Purpose purpose = Purpose::generic);

// Standard normal via Box-Muller on one Philox block.
double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
              Purpose purpose = Purpose::sim_noise);

}  // namespace rng
}  // namespace mkv
