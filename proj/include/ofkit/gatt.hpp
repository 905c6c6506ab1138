#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ofkit/keys.hpp"

namespace ofkit::gatt {

enum class Role { Owner, Tag };

enum class Characteristic { OwnerAlarm, Button, Firmware, FactoryReset };
std::string_view characteristic_name(Characteristic c);

// opcodes per characteristic
inline constexpr std::uint8_t kAlarmOff = 0x00;
inline constexpr std::uint8_t kAlarmOn = 0x01;
inline constexpr std::uint8_t kButtonPushed = 0x01;
inline constexpr std::uint8_t kButtonPushed2x = 0x03;
inline constexpr std::uint8_t kFwInfoOpcode = 0x00;
inline constexpr std::uint8_t kFwDataOpcode = 0x01;
inline constexpr std::uint8_t kFactoryResetOpcode = 0x01;

/// counter(LE32) || opcode || args, carried encrypted under the gattKey.
struct GattCommand {
  std::uint32_t counter = 0;
  std::uint8_t opcode = 0;
  Bytes args;
  bool operator==(const GattCommand&) const = default;
};

struct AuthSession {
  Role role = Role::Owner;
  std::array<std::uint8_t, 16> nonce_owner{};
  std::array<std::uint8_t, 16> nonce_tag{};
  SecretKey16 auth_key;
  SecretKey16 gatt_key;  // derive_subkey(masterSecret, nonce_tag)
  std::uint32_t max_counter_seen = 0;
  std::uint32_t sent_count = 0;
};

enum class AuthStage { OwnerProof, TagProof };

class AuthError : public std::runtime_error {
 public:
  AuthError(AuthStage stage, const std::string& what)
      : std::runtime_error(what), stage_(stage) {}
  AuthStage stage() const { return stage_; }

 private:
  AuthStage stage_;
};

class MalformedCommand : public std::runtime_error {
 public:
  explicit MalformedCommand(const std::string& what)
      : std::runtime_error(what) {}
};

struct AuthPair {
  AuthSession owner;
  AuthSession tag;
};

/// Runs the four-step nonce exchange and mutual proof. Succeeds iff both
/// sides hold the same masterSecret; throws AuthError naming the proof that
/// failed otherwise.
AuthPair auth_run(const MasterSecret& owner_secret,
                  const MasterSecret& tag_secret, std::mt19937_64& rng);

/// Increments sent_count and uses it as the counter (first command is 1).
Bytes cmd_encode(AuthSession& session, std::uint8_t opcode, BytesView args);

/// Decrypts with (gattKey, IV = nonce_tag) and parses the frame. Throws
/// CipherError on decrypt failure, CodecError on frames shorter than 5 bytes.
GattCommand cmd_decode(const AuthSession& session, BytesView ciphertext);

enum class Acceptance { Execute, Discard };

/// Owner side: execute iff counter > max seen, updating the watermark.
Acceptance owner_accept(AuthSession& session, const GattCommand& cmd);

/// Tag side: executes any well-formed command regardless of counter. Throws
/// MalformedCommand for opcodes/arguments the characteristic does not accept.
Acceptance tag_accept(const AuthSession& session, Characteristic characteristic,
                      const GattCommand& cmd);

// ---------------------------------------------------------------------------
// Firmware transfer frames

struct FirmwareInfo {
  std::uint32_t total_size = 0;
  std::uint16_t total_crc16 = 0;
  std::string version;
  std::uint8_t transfer_window = 0;
  bool operator==(const FirmwareInfo&) const = default;
};

// opcode 0x00 || totalSize(LE4) || crc16(LE2) || versionLen || version || window
Bytes fw_info_encode(const FirmwareInfo& info);
FirmwareInfo fw_info_decode(BytesView frame);

struct FirmwareChunk {
  std::uint32_t offset = 0;
  Bytes data;
  bool operator==(const FirmwareChunk&) const = default;
};

// opcode 0x01 || offset(LE4) || dataLen(LE2) || data || argsCrc16(LE2)
Bytes fw_chunk_encode(const FirmwareChunk& chunk);
FirmwareChunk fw_chunk_decode(BytesView frame);  // verifies the CRC

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection).
std::uint16_t crc16(BytesView data);

/// True iff some button indication with value pushed_2x (0x03) follows a
/// pushed (0x01) indication and carries a strictly greater counter.
bool remote_ring_detect(std::span<const GattCommand> indications);

// ---------------------------------------------------------------------------
// Session transcripts for test fixtures:
// JSON lines {direction, characteristic, ciphertext_hex, plaintext_hex?}

struct TranscriptRecord {
  enum class Direction { OwnerToTag, TagToOwner };
  Direction direction = Direction::OwnerToTag;
  Characteristic characteristic = Characteristic::OwnerAlarm;
  Bytes ciphertext;
  std::optional<Bytes> plaintext;

  bool operator==(const TranscriptRecord&) const = default;
};

std::string transcript_to_json_lines(std::span<const TranscriptRecord> records);
std::vector<TranscriptRecord> transcript_from_json_lines(std::string_view text);

}  // namespace ofkit::gatt
