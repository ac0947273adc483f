#include "atfm/rng.hpp"

namespace atfm {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngState RngState::derive(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = mix64(master_seed + kGolden);
  for (auto component : path) key = mix64(key ^ mix64(component + kGolden));
  return RngState(key, 0);
}

RngState::result_type RngState::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngState::uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

}  // namespace atfm
