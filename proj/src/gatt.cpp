#include "ofkit/gatt.hpp"

#include <sstream>

#include <json.hpp>

namespace ofkit::gatt {

namespace {

const Bytes& proof_plaintext() {
  // the exact 11 ASCII bytes, no terminator
  static const Bytes kProof = {'s', 'm', 'a', 'r', 't', 't',
                               'h', 'i', 'n', 'g', 's'};
  return kProof;
}

bool proof_checks(const SecretKey16& key, const IvBytes& iv, BytesView proof) {
  try {
    return aes_cbc_decrypt(key.bytes, iv, proof) == proof_plaintext();
  } catch (const CipherError&) {
    return false;
  }
}

}  // namespace

std::string_view characteristic_name(Characteristic c) {
  switch (c) {
    case Characteristic::OwnerAlarm: return "owner-alarm";
    case Characteristic::Button: return "button";
    case Characteristic::Firmware: return "firmware";
    case Characteristic::FactoryReset: return "factory-reset";
  }
  return "unknown";
}

AuthPair auth_run(const MasterSecret& owner_secret,
                  const MasterSecret& tag_secret, std::mt19937_64& rng) {
  SecretKey16 owner_auth = derive_subkey(owner_secret, kAuthLabel);
  SecretKey16 tag_auth = derive_subkey(tag_secret, kAuthLabel);

  auto nonce_owner = random_bytes16(rng);  // owner -> tag, NONCE write
  auto nonce_tag = random_bytes16(rng);    // tag -> owner, NONCE indication

  // owner -> tag on ENONCE: proof under the tag nonce as IV
  Bytes owner_proof =
      aes_cbc_encrypt(owner_auth.bytes, nonce_tag, proof_plaintext());
  if (!proof_checks(tag_auth, nonce_tag, owner_proof))
    throw AuthError(AuthStage::OwnerProof, "tag rejected the owner proof");

  // tag -> owner on ENONCE: proof under the owner nonce as IV
  Bytes tag_proof =
      aes_cbc_encrypt(tag_auth.bytes, nonce_owner, proof_plaintext());
  if (!proof_checks(owner_auth, nonce_owner, tag_proof))
    throw AuthError(AuthStage::TagProof, "owner rejected the tag proof");

  AuthPair pair;
  pair.owner = AuthSession{Role::Owner, nonce_owner, nonce_tag, owner_auth,
                           derive_subkey(owner_secret, BytesView(nonce_tag)),
                           0, 0};
  pair.tag = AuthSession{Role::Tag, nonce_owner, nonce_tag, tag_auth,
                         derive_subkey(tag_secret, BytesView(nonce_tag)), 0, 0};
  return pair;
}

Bytes cmd_encode(AuthSession& session, std::uint8_t opcode, BytesView args) {
  ++session.sent_count;
  Bytes frame(5 + args.size());
  store_u32le(frame.data(), session.sent_count);
  frame[4] = opcode;
  std::copy(args.begin(), args.end(), frame.begin() + 5);
  return aes_cbc_encrypt(session.gatt_key.bytes, session.nonce_tag, frame);
}

GattCommand cmd_decode(const AuthSession& session, BytesView ciphertext) {
  Bytes frame =
      aes_cbc_decrypt(session.gatt_key.bytes, session.nonce_tag, ciphertext);
  if (frame.size() < 5)
    throw CodecError("command frame shorter than 5 bytes");
  GattCommand cmd;
  cmd.counter = load_u32le(frame.data());
  cmd.opcode = frame[4];
  cmd.args.assign(frame.begin() + 5, frame.end());
  return cmd;
}

Acceptance owner_accept(AuthSession& session, const GattCommand& cmd) {
  if (cmd.counter > session.max_counter_seen) {
    session.max_counter_seen = cmd.counter;
    return Acceptance::Execute;
  }
  return Acceptance::Discard;
}

Acceptance tag_accept(const AuthSession&, Characteristic characteristic,
                      const GattCommand& cmd) {
  // the tag side never consults the counter; only owners validate it
  switch (characteristic) {
    case Characteristic::OwnerAlarm:
      if ((cmd.opcode == kAlarmOff || cmd.opcode == kAlarmOn) &&
          cmd.args.empty())
        return Acceptance::Execute;
      break;
    case Characteristic::Button:
      if ((cmd.opcode == kButtonPushed || cmd.opcode == kButtonPushed2x) &&
          cmd.args.empty())
        return Acceptance::Execute;
      break;
    case Characteristic::Firmware: {
      Bytes frame(1 + cmd.args.size());
      frame[0] = cmd.opcode;
      std::copy(cmd.args.begin(), cmd.args.end(), frame.begin() + 1);
      if (cmd.opcode == kFwInfoOpcode) {
        fw_info_decode(frame);  // throws MalformedCommand on bad framing
        return Acceptance::Execute;
      }
      if (cmd.opcode == kFwDataOpcode) {
        fw_chunk_decode(frame);
        return Acceptance::Execute;
      }
      break;
    }
    case Characteristic::FactoryReset:
      if (cmd.opcode == kFactoryResetOpcode && cmd.args.empty())
        return Acceptance::Execute;
      break;
  }
  throw MalformedCommand("opcode " + std::to_string(cmd.opcode) +
                         " not accepted on " +
                         std::string(characteristic_name(characteristic)));
}

Bytes fw_info_encode(const FirmwareInfo& info) {
  if (info.version.size() > 255)
    throw CodecError("firmware version exceeds the 1-byte length prefix");
  Bytes out(9 + info.version.size());
  out[0] = kFwInfoOpcode;
  store_u32le(out.data() + 1, info.total_size);
  store_u16le(out.data() + 5, info.total_crc16);
  out[7] = static_cast<std::uint8_t>(info.version.size());
  std::copy(info.version.begin(), info.version.end(), out.begin() + 8);
  out.back() = info.transfer_window;
  return out;
}

FirmwareInfo fw_info_decode(BytesView frame) {
  if (frame.size() < 9)
    throw MalformedCommand("firmware info frame too short");
  if (frame[0] != kFwInfoOpcode)
    throw MalformedCommand("firmware info frame must start with opcode 0x00");
  std::uint8_t version_len = frame[7];
  if (frame.size() != 9u + version_len)
    throw MalformedCommand("firmware info length disagrees with version length");
  FirmwareInfo info;
  info.total_size = load_u32le(frame.data() + 1);
  info.total_crc16 = load_u16le(frame.data() + 5);
  info.version.assign(frame.begin() + 8, frame.begin() + 8 + version_len);
  info.transfer_window = frame.back();
  return info;
}

Bytes fw_chunk_encode(const FirmwareChunk& chunk) {
  if (chunk.data.size() > 0xffff)
    throw CodecError("chunk data exceeds the 2-byte length field");
  Bytes out(9 + chunk.data.size());
  out[0] = kFwDataOpcode;
  store_u32le(out.data() + 1, chunk.offset);
  store_u16le(out.data() + 5, static_cast<std::uint16_t>(chunk.data.size()));
  std::copy(chunk.data.begin(), chunk.data.end(), out.begin() + 7);
  std::uint16_t crc = crc16(BytesView(out.data() + 1, 6 + chunk.data.size()));
  store_u16le(out.data() + 7 + chunk.data.size(), crc);
  return out;
}

FirmwareChunk fw_chunk_decode(BytesView frame) {
  if (frame.size() < 9)
    throw MalformedCommand("firmware data frame too short");
  if (frame[0] != kFwDataOpcode)
    throw MalformedCommand("firmware data frame must start with opcode 0x01");
  std::uint16_t data_len = load_u16le(frame.data() + 5);
  if (frame.size() != 9u + data_len)
    throw MalformedCommand("firmware data length disagrees with length field");
  std::uint16_t want = crc16(frame.subspan(1, 6 + data_len));
  std::uint16_t got = load_u16le(frame.data() + 7 + data_len);
  if (want != got) throw MalformedCommand("firmware data CRC mismatch");
  FirmwareChunk chunk;
  chunk.offset = load_u32le(frame.data() + 1);
  chunk.data.assign(frame.begin() + 7, frame.begin() + 7 + data_len);
  return chunk;
}

std::uint16_t crc16(BytesView data) {
  static const auto table = [] {
    std::array<std::uint16_t, 256> t{};
    for (int i = 0; i < 256; ++i) {
      std::uint16_t c = static_cast<std::uint16_t>(i << 8);
      for (int b = 0; b < 8; ++b)
        c = (c & 0x8000) ? static_cast<std::uint16_t>((c << 1) ^ 0x1021)
                         : static_cast<std::uint16_t>(c << 1);
      t[i] = c;
    }
    return t;
  }();
  std::uint16_t crc = 0xffff;
  for (std::uint8_t b : data)
    crc = static_cast<std::uint16_t>((crc << 8) ^ table[(crc >> 8) ^ b]);
  return crc;
}

bool remote_ring_detect(std::span<const GattCommand> indications) {
  bool have_push = false;
  std::uint32_t lowest_push = 0;
  for (const GattCommand& cmd : indications) {
    if (cmd.opcode == kButtonPushed) {
      if (!have_push || cmd.counter < lowest_push) lowest_push = cmd.counter;
      have_push = true;
    } else if (cmd.opcode == kButtonPushed2x) {
      if (have_push && cmd.counter > lowest_push) return true;
    }
  }
  return false;
}

namespace {

Characteristic characteristic_from_name(std::string_view name) {
  if (name == "owner-alarm") return Characteristic::OwnerAlarm;
  if (name == "button") return Characteristic::Button;
  if (name == "firmware") return Characteristic::Firmware;
  if (name == "factory-reset") return Characteristic::FactoryReset;
  throw CodecError("unknown characteristic: " + std::string(name));
}

}  // namespace

std::string transcript_to_json_lines(
    std::span<const TranscriptRecord> records) {
  std::string out;
  for (const TranscriptRecord& r : records) {
    nlohmann::ordered_json j;
    j["direction"] = r.direction == TranscriptRecord::Direction::OwnerToTag
                         ? "owner->tag"
                         : "tag->owner";
    j["characteristic"] = std::string(characteristic_name(r.characteristic));
    j["ciphertext_hex"] = to_hex(r.ciphertext);
    if (r.plaintext) j["plaintext_hex"] = to_hex(*r.plaintext);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<TranscriptRecord> transcript_from_json_lines(
    std::string_view text) {
  std::vector<TranscriptRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw CodecError("transcript line is not valid JSON");
    TranscriptRecord r;
    std::string direction = j.at("direction").get<std::string>();
    if (direction == "owner->tag")
      r.direction = TranscriptRecord::Direction::OwnerToTag;
    else if (direction == "tag->owner")
      r.direction = TranscriptRecord::Direction::TagToOwner;
    else
      throw CodecError("bad transcript direction: " + direction);
    r.characteristic =
        characteristic_from_name(j.at("characteristic").get<std::string>());
    r.ciphertext = from_hex(j.at("ciphertext_hex").get<std::string>());
    if (j.contains("plaintext_hex"))
      r.plaintext = from_hex(j.at("plaintext_hex").get<std::string>());
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace ofkit::gatt
