#pragma once

#include <array>
#include <random>

#include "ofkit/bytes.hpp"
#include "ofkit/cipher.hpp"
#include "ofkit/sha256.hpp"
#include "ofkit/x25519.hpp"

namespace ofkit {

/// 16-byte symmetric key material.
struct SecretKey16 {
  Key16 bytes{};

  static SecretKey16 from_hex(std::string_view hex) {
    return {array_from_hex<16>(hex)};
  }
  std::string hex() const { return to_hex(bytes); }
  bool operator==(const SecretKey16&) const = default;
};

struct Iv16 {
  IvBytes bytes{};

  static Iv16 from_hex(std::string_view hex) {
    return {array_from_hex<16>(hex)};
  }
  std::string hex() const { return to_hex(bytes); }
  bool operator==(const Iv16&) const = default;
};

/// First 16 bytes of the 32-byte ECDH-derived shared secret.
struct MasterSecret {
  std::array<std::uint8_t, 16> bytes{};
  bool operator==(const MasterSecret&) const = default;
};

struct Irk {
  std::array<std::uint8_t, 16> bytes{};
  static Irk from_hex(std::string_view hex) {
    return {array_from_hex<16>(hex)};
  }
  bool operator==(const Irk&) const = default;
};

struct Keypair25519 {
  Curve25519Scalar priv{};
  Curve25519Point pub{};
};

/// Subkey schedule rooted in the masterSecret. gattKey is session-scoped
/// (derived from the tag nonce) and lives with the GATT session.
struct DerivedKeySet {
  SecretKey16 auth_key;
  SecretKey16 pid_key;
  SecretKey16 sign_key;
};

inline constexpr std::string_view kAuthLabel = "smartthings";
inline constexpr std::string_view kPidLabel = "privacy";
inline constexpr std::string_view kSignLabel = "signing";

/// First 16 bytes of SHA256(masterSecret || 00 00 00 01 || label).
SecretKey16 derive_subkey(const MasterSecret& ms, BytesView label);
SecretKey16 derive_subkey(const MasterSecret& ms, std::string_view label);

DerivedKeySet derive_keyset(const MasterSecret& ms);

class EcdhError : public std::runtime_error {
 public:
  explicit EcdhError(const std::string& what) : std::runtime_error(what) {}
};

/// SHA256(x25519(local_private, remote_public) || x). Both sides obtain the
/// same value with swapped key roles. Throws EcdhError on an all-zero shared
/// point (low-order remote key).
Digest256 ecdh_establish(const Curve25519Scalar& local_private,
                         const Curve25519Point& remote_public,
                         const std::array<std::uint8_t, 32>& x);

inline MasterSecret master_secret_from(const Digest256& shared) {
  MasterSecret ms;
  std::copy(shared.begin(), shared.begin() + 16, ms.bytes.begin());
  return ms;
}

// key material is drawn from whole 64-bit engine words, so a given seed
// yields the same bytes on every platform (distributions are not portable)
template <typename Rng>
std::array<std::uint8_t, 32> random_bytes32(Rng& rng) {
  std::array<std::uint8_t, 32> out{};
  for (std::size_t i = 0; i < out.size(); i += 8) {
    std::uint64_t word = rng();
    for (std::size_t j = 0; j < 8; ++j)
      out[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
  }
  return out;
}

template <typename Rng>
std::array<std::uint8_t, 16> random_bytes16(Rng& rng) {
  std::array<std::uint8_t, 16> out{};
  for (std::size_t i = 0; i < out.size(); i += 8) {
    std::uint64_t word = rng();
    for (std::size_t j = 0; j < 8; ++j)
      out[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
  }
  return out;
}

template <typename Rng>
Keypair25519 generate_keypair(Rng& rng) {
  Keypair25519 kp;
  kp.priv = random_bytes32(rng);
  kp.pub = x25519_base(kp.priv);
  return kp;
}

}  // namespace ofkit
