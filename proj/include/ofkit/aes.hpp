#pragma once

#include <array>
#include <cstdint>

namespace ofkit {

/// AES-128 block cipher (FIPS 197). Single 16-byte blocks only; modes are
/// layered on top in cipher.hpp.
class Aes128 {
 public:
  using Block = std::array<std::uint8_t, 16>;

  explicit Aes128(const std::array<std::uint8_t, 16>& key);

  Block encrypt_block(const Block& in) const;
  Block decrypt_block(const Block& in) const;

 private:
  std::array<std::uint8_t, 176> round_keys_{};  // 11 round keys
};

}  // namespace ofkit
