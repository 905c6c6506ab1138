#pragma once

#include <array>
#include <cstdint>

namespace ofkit {

using Curve25519Scalar = std::array<std::uint8_t, 32>;
using Curve25519Point = std::array<std::uint8_t, 32>;

/// Montgomery-ladder scalar multiplication on curve25519 (RFC 7748).
/// The scalar is clamped internally; the point's top bit is masked.
Curve25519Point x25519(const Curve25519Scalar& scalar,
                       const Curve25519Point& point);

/// scalar * G for the generator point G = 9.
Curve25519Point x25519_base(const Curve25519Scalar& scalar);

}  // namespace ofkit
