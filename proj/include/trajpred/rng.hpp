#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace trajpred {

using Engine = std::mt19937_64;

/// Derives independent substream seeds from one root seed. All randomness in
/// the library flows through these so results depend only on the root seed
/// and the label/index path, never on call order across subsystems.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace trajpred
