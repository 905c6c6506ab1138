#pragma once

#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ofkit/keys.hpp"

namespace ofkit::smarttag {

// ---------------------------------------------------------------------------
// Operating states

enum class TagState : std::uint8_t {
  PrematureOffline = 1,  // recently disconnected
  Offline = 2,           // disconnected for >= 15 minutes
  OvermatureOffline = 3,  // in Offline for >= 24 hours
  Paired = 4,
  ConnectedOne = 5,
  ConnectedTwo = 6,
};

inline bool state_code_known(std::uint8_t code) { return code >= 1 && code <= 6; }
std::string_view state_name(std::uint8_t code);

inline constexpr std::uint64_t kOfflineAfterS = 15 * 60;
inline constexpr std::uint64_t kOvermatureAfterS = 24 * 60 * 60;

struct EvConnected { int devices = 1; };
struct EvDisconnected {};
struct EvRebooted {};
struct EvTick { std::uint64_t elapsed_s = 0; };
using TagEvent = std::variant<EvConnected, EvDisconnected, EvRebooted, EvTick>;

/// Single-writer state machine; ticks accumulate time-in-state and cascade
/// across the 15-minute and 24-hour promotions.
struct StateMachine {
  TagState state = TagState::Paired;
  std::uint64_t seconds_in_state = 0;

  void apply(const TagEvent& event);
};

/// Pure single-event step; a tick is interpreted as the total time spent in
/// the current state.
TagState state_step(TagState current, const TagEvent& event);

// ---------------------------------------------------------------------------
// Aging counter

inline constexpr std::uint64_t kAgingEpoch = 1593648000;  // 2020-07-02 00:00 GMT
inline constexpr std::uint64_t kAgingIntervalS = 900;

struct AgingCounter {
  std::uint32_t value = 0;  // 24-bit on the wire
  bool operator==(const AgingCounter&) const = default;
};

AgingCounter aging_counter(std::uint64_t tag_time);  // throws std::out_of_range
std::uint64_t aging_time(AgingCounter counter);       // interval start

// ---------------------------------------------------------------------------
// Privacy configuration and pool

inline constexpr int kPoolSize = 1000;

struct PrivacyConfig {
  SecretKey16 pid_key;
  SecretKey16 sign_key;
  std::array<std::uint8_t, 8> privacy_id_seed{};
  Iv16 privacy_id_iv;
  int pool_size = kPoolSize;
  std::uint8_t region_code = 0;  // 4-bit

  // {pid_key_hex, sign_key_hex, seed_hex, iv_hex, pool_size, region}
  std::string to_json() const;
  // A 12-byte seed_hex is accepted and truncated to its first 8 bytes, with
  // a warning pushed to `warnings` when provided.
  static PrivacyConfig from_json(std::string_view text,
                                 std::vector<std::string>* warnings = nullptr);
};

using PrivacyId = std::array<std::uint8_t, 16>;
using PrivacyIdPrefix = std::array<std::uint8_t, 8>;

struct PrivacyPool {
  std::vector<PrivacyId> ids;  // ids[i] generated from index i

  PrivacyIdPrefix prefix(std::size_t i) const {
    PrivacyIdPrefix p{};
    std::copy(ids[i].begin(), ids[i].begin() + 8, p.begin());
    return p;
  }
};

/// The 12-byte block encrypted for pool index i:
/// hi(i), lo(i), seed, hi(i), lo(i) with single-byte truncation of i.
std::array<std::uint8_t, 12> pool_input(int index,
                                        const std::array<std::uint8_t, 8>& seed);

/// Deterministic pool of pool_size 16-byte IDs for indices 0..pool_size-1.
PrivacyPool privacy_pool(const PrivacyConfig& cfg);

// ---------------------------------------------------------------------------
// Advertisement

using Signature4 = std::array<std::uint8_t, 4>;

/// First 4 bytes of the CBC encryption of the 16 payload head bytes.
Signature4 signature(const SecretKey16& sign_key, const Iv16& iv,
                     BytesView payload16);

/// Decoded 20-byte registered advertisement. `state` keeps the raw 3-bit
/// code so unknown codes survive decode/encode unchanged.
struct Advertisement {
  std::uint8_t version = 1;    // 4 bits
  std::uint8_t adv_type = 0;   // 1 bit
  std::uint8_t state = 2;      // 3 bits
  std::uint32_t aging_counter = 0;  // 24 bits, little-endian on the wire
  PrivacyIdPrefix privacy_id_prefix{};
  std::uint8_t region_id = 0;  // 4 bits
  bool encryption_flag = false;
  bool uwb_flag = false;
  std::uint8_t battery_level = 0;  // 2 bits
  std::array<std::uint8_t, 3> reserved{};
  Signature4 sig{};

  bool operator==(const Advertisement&) const = default;
};

/// Packs fields verbatim, including the stored signature.
Bytes encode_adv_raw(const Advertisement& adv);

/// Packs fields and recomputes the signature over bytes 0-15 with cfg.
Bytes encode_adv(const Advertisement& adv, const PrivacyConfig& cfg);

Advertisement decode_adv(BytesView payload);  // throws CodecError on length

// ---------------------------------------------------------------------------
// Verification

enum class Verdict { Ok, BadSignature, StaleCounter, UnknownId };
std::string_view verdict_name(Verdict v);

inline constexpr std::uint32_t kDefaultFreshnessWindow = 2;
inline constexpr std::uint32_t kNoFreshnessCheck = 0xffffffff;

/// Precomputes the pool prefix set once; verify() is then cheap.
class Verifier {
 public:
  explicit Verifier(const PrivacyConfig& cfg);

  Verdict verify(BytesView payload, AgingCounter server_counter,
                 std::uint32_t freshness_window = kDefaultFreshnessWindow) const;

 private:
  PrivacyConfig cfg_;
  std::set<PrivacyIdPrefix> prefixes_;
};

/// One-shot convenience; regenerates the pool on every call.
Verdict verify_adv(BytesView payload, const PrivacyConfig& cfg,
                   AgingCounter server_counter,
                   std::uint32_t freshness_window = kDefaultFreshnessWindow);

// ---------------------------------------------------------------------------
// Rotation policy

struct RotationPolicy {
  std::uint64_t refresh_interval_s = kAgingIntervalS;  // counter + signature
  std::uint64_t overmature_pid_interval_s = 24 * 60 * 60;
};

struct RotationStep {
  std::optional<std::uint16_t> new_index;  // nullopt: keep current privacy id
  AgingCounter counter;                    // always refreshed
};

/// Called on the refresh cadence. Non-Overmature states draw a new privacy
/// index every step; Overmature only once the 24-hour interval has elapsed
/// since the last change. The signature is recomputed by the caller in all
/// cases as part of re-encoding.
RotationStep rotate(TagState state, std::uint64_t now,
                    std::uint64_t last_pid_change, std::mt19937_64& rng,
                    int pool_size, const RotationPolicy& policy = {});

// ---------------------------------------------------------------------------
// Unregistered (onboarding) advertisement

struct UnregisteredAdvertisement {
  std::string mn_id = "0AFD";    // 4 ASCII chars, bytes 1-4
  std::string setup_id = "430";  // 3 ASCII chars, bytes 5-7
  std::string mac_suffix;        // 3 ASCII chars, bytes 11-13

  bool operator==(const UnregisteredAdvertisement&) const = default;
};

/// Wire rendering of the last two identity-address bytes: the four-char hex
/// string truncated to the three characters the field has room for.
std::string mac_suffix_from(std::uint8_t b4, std::uint8_t b5);

Bytes unreg_encode(const UnregisteredAdvertisement& adv);

struct UnregDecode {
  UnregisteredAdvertisement adv;
  std::vector<std::string> warnings;  // constant mismatches
};

UnregDecode unreg_decode(BytesView payload);  // throws CodecError on length

}  // namespace ofkit::smarttag
