#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ppdl {

using FieldElement = std::uint64_t;
using FieldVector = std::vector<FieldElement>;

inline constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

// Arithmetic modulo a prime below 2^63 (so a + b never wraps).
class PrimeField {
 public:
  explicit PrimeField(std::uint64_t prime);

  std::uint64_t prime() const { return p_; }

  FieldElement add(FieldElement a, FieldElement b) const {
    const FieldElement s = a + b;
    return s >= p_ ? s - p_ : s;
  }
  FieldElement sub(FieldElement a, FieldElement b) const {
    return a >= b ? a - b : a + (p_ - b);
  }
  FieldElement neg(FieldElement a) const { return a == 0 ? 0 : p_ - a; }
  FieldElement mul(FieldElement a, FieldElement b) const {
    return static_cast<FieldElement>(
        (static_cast<unsigned __int128>(a) * b) % p_);
  }
  FieldElement pow(FieldElement base, std::uint64_t exp) const;
  // Multiplicative inverse via Fermat; a must be nonzero.
  FieldElement inv(FieldElement a) const;
  FieldElement reduce(std::uint64_t v) const { return v % p_; }

  void add_assign(std::span<FieldElement> acc,
                  std::span<const FieldElement> v) const;

 private:
  std::uint64_t p_;
};

// Deterministic Miller-Rabin for 64-bit integers.
bool is_prime(std::uint64_t n);

}  // namespace ppdl
