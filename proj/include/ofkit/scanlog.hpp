#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "ofkit/rpa.hpp"

namespace ofkit {

// advertising service UUIDs
inline constexpr std::uint16_t kUuidFmmOffline = 0xFD69;
inline constexpr std::uint16_t kUuidTagOffline = 0xFD5A;
inline constexpr std::uint16_t kUuidOnboarding = 0xFD59;
inline constexpr std::uint16_t kUuidDfu = 0xFE59;

/// One observed BLE advertisement.
struct ScanRecord {
  std::uint64_t t = 0;  // unix seconds
  Mac48 mac;
  std::uint16_t service_uuid = 0;
  Bytes payload;
  std::optional<int> rssi;

  bool operator==(const ScanRecord&) const = default;
};

// JSON-lines interchange: {"t":..., "mac_hex":"...", "service_uuid":"fd69",
// "payload_hex":"...", "rssi":...}
std::string scan_record_to_json(const ScanRecord& record);
ScanRecord scan_record_from_json(std::string_view line);  // throws CodecError

void write_scan_log(std::ostream& out, const std::vector<ScanRecord>& records);

/// Reads JSON lines; malformed lines are skipped and described in `warnings`
/// when provided, or raised as CodecError when not.
std::vector<ScanRecord> read_scan_log(std::istream& in,
                                      std::vector<std::string>* warnings = nullptr);

}  // namespace ofkit
