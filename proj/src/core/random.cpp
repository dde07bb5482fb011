#include "impactbench/core/random.hpp"

#include <string>

#include "impactbench/core/error.hpp"

namespace impactbench {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw RangeError("Rng::below needs a positive bound");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return draw % n;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t hash = basis;
  for (unsigned char ch : bytes) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view item_id, std::string_view stage) {
  std::uint64_t h = mix64(run_seed ^ 0x9e3779b97f4a7c15ULL);
  h = fnv1a(item_id, h);
  h = fnv1a(std::string_view("\x1f", 1), h);
  h = fnv1a(stage, h);
  return mix64(h);
}

}  // namespace impactbench
