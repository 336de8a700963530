#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ppdl {

// 64-bit FNV-1a. Used for payload and config digests, not for security.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);
  void update_u64(std::uint64_t v);
  std::uint64_t value() const { return h_; }
  // 16 lowercase hex digits.
  std::string hex() const;

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

std::string digest_hex(std::string_view text);

}  // namespace ppdl
