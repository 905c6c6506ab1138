#pragma once

#include <array>

#include "ofkit/keys.hpp"

namespace ofkit {

/// 48-bit BLE address, most significant byte first (display order).
struct Mac48 {
  std::array<std::uint8_t, 6> bytes{};

  static Mac48 from_hex(std::string_view hex);  // "112233445566" or colons
  std::string hex() const { return to_hex(bytes); }
  std::string display() const;  // "11:22:33:44:55:66"
  std::uint64_t to_u48() const;
  static Mac48 from_u48(std::uint64_t v);
  bool operator==(const Mac48&) const = default;
  auto operator<=>(const Mac48&) const = default;
};

using Prand = std::array<std::uint8_t, 3>;
using RpaHash = std::array<std::uint8_t, 3>;

/// ah(IRK, prand): AES-ECB over 13 zero bytes || prand, reduced mod 2^24
/// (the three least significant ciphertext bytes).
RpaHash rpa_hash(const Irk& irk, const Prand& prand);

/// prand in the three most significant address bytes, hash in the three
/// least significant. Any RPA type bits are the caller's business.
Mac48 rpa_generate(const Irk& irk, const Prand& prand);

bool rpa_resolve(const Irk& irk, const Mac48& addr);

}  // namespace ofkit
