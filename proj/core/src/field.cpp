#include "ppdl/field.hpp"

#include <string>

#include "ppdl/errors.hpp"

namespace ppdl {

namespace {

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1 % m;
  base %= m;
  while (exp) {
    if (exp & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1;
  }
  return result;
}

}  // namespace

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t small : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (n % small == 0) return n == small;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // These bases are a deterministic witness set for all n < 2^64.
  for (std::uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    std::uint64_t x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

PrimeField::PrimeField(std::uint64_t prime) : p_(prime) {
  if (prime >= (std::uint64_t{1} << 63) || !is_prime(prime)) {
    throw DomainError("PrimeField: modulus " + std::to_string(prime) +
                      " is not a prime below 2^63");
  }
}

FieldElement PrimeField::pow(FieldElement base, std::uint64_t exp) const {
  return powmod(base, exp, p_);
}

FieldElement PrimeField::inv(FieldElement a) const {
  if (a % p_ == 0) throw DomainError("PrimeField: zero has no inverse");
  return powmod(a, p_ - 2, p_);
}

void PrimeField::add_assign(std::span<FieldElement> acc,
                            std::span<const FieldElement> v) const {
  if (acc.size() != v.size()) {
    throw DomainError("PrimeField::add_assign: length mismatch");
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = add(acc[i], v[i]);
}

}  // namespace ppdl
