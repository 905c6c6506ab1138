#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they cross-check.

#include <cstdint>
#include <vector>

#include "ofkit/bytes.hpp"

namespace oracles {

/// Straightforward FIPS 180-4 transcription, structured differently from the
/// library's incremental hasher (single-shot, vector-based padding).
std::vector<std::uint8_t> sha256_ref(ofkit::BytesView message);

/// Bit-at-a-time CRC-16/CCITT-FALSE, checked against the library's
/// table-driven version.
std::uint16_t crc16_ref(ofkit::BytesView data);

}  // namespace oracles
