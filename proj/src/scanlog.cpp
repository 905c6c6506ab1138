#include "ofkit/scanlog.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

namespace ofkit {

namespace {

std::string uuid_hex(std::uint16_t uuid) {
  static const char* digits = "0123456789abcdef";
  std::string s(4, '0');
  s[0] = digits[(uuid >> 12) & 0xf];
  s[1] = digits[(uuid >> 8) & 0xf];
  s[2] = digits[(uuid >> 4) & 0xf];
  s[3] = digits[uuid & 0xf];
  return s;
}

}  // namespace

std::string scan_record_to_json(const ScanRecord& record) {
  nlohmann::ordered_json j;
  j["t"] = record.t;
  j["mac_hex"] = record.mac.hex();
  j["service_uuid"] = uuid_hex(record.service_uuid);
  j["payload_hex"] = to_hex(record.payload);
  if (record.rssi) j["rssi"] = *record.rssi;
  return j.dump();
}

ScanRecord scan_record_from_json(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) throw CodecError("scan record is not valid JSON");
  if (!j.is_object()) throw CodecError("scan record must be a JSON object");
  try {
    ScanRecord record;
    record.t = j.at("t").get<std::uint64_t>();
    record.mac = Mac48::from_hex(j.at("mac_hex").get<std::string>());
    Bytes uuid = from_hex(j.at("service_uuid").get<std::string>());
    if (uuid.size() != 2) throw CodecError("service_uuid must be 4 hex chars");
    record.service_uuid = static_cast<std::uint16_t>((uuid[0] << 8) | uuid[1]);
    record.payload = from_hex(j.at("payload_hex").get<std::string>());
    if (j.contains("rssi")) record.rssi = j.at("rssi").get<int>();
    return record;
  } catch (const nlohmann::json::exception& e) {
    throw CodecError(std::string("scan record: ") + e.what());
  }
}

void write_scan_log(std::ostream& out, const std::vector<ScanRecord>& records) {
  for (const ScanRecord& r : records) out << scan_record_to_json(r) << '\n';
}

std::vector<ScanRecord> read_scan_log(std::istream& in,
                                      std::vector<std::string>* warnings) {
  std::vector<ScanRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(scan_record_from_json(line));
    } catch (const CodecError& e) {
      if (!warnings) throw;
      warnings->push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace ofkit
