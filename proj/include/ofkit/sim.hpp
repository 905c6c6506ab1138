#pragma once

#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <set>

#include <json.hpp>

#include "ofkit/fmm.hpp"
#include "ofkit/gatt.hpp"
#include "ofkit/scanlog.hpp"
#include "ofkit/smarttag.hpp"

namespace ofkit::sim {

using Seconds = std::uint64_t;

// ---------------------------------------------------------------------------
// Geometry: a flat lat/lon plane with straight-line distances, enough for
// the speed-bound plausibility check.

inline constexpr double kKmPerDegree = 111.32;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const GeoPoint&) const = default;
};

double distance_km(GeoPoint a, GeoPoint b);

// ---------------------------------------------------------------------------
// Deterministic event clock. Ties are broken by schedule order, so identical
// seeds replay identical event sequences.

class SimClock {
 public:
  Seconds now() const { return now_; }

  void schedule_at(Seconds t, std::function<void()> fn);
  void schedule_in(Seconds dt, std::function<void()> fn);

  /// Runs every event with time <= t, then sets now to t.
  void run_until(Seconds t);
  /// Runs the queue dry.
  void run_all();

 private:
  struct Event {
    Seconds t;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& other) const {
      return std::tie(t, seq) > std::tie(other.t, other.seq);
    }
  };

  Seconds now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
};

// ---------------------------------------------------------------------------
// Transcript: JSON lines {t, actor, action, detail}.

struct TranscriptEntry {
  Seconds t;
  std::string actor;
  std::string action;
  nlohmann::ordered_json detail;
};

class Transcript {
 public:
  void log(Seconds t, std::string actor, std::string action,
           nlohmann::ordered_json detail = nlohmann::ordered_json::object());
  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  std::string to_json_lines() const;

 private:
  std::vector<TranscriptEntry> entries_;
};

// ---------------------------------------------------------------------------
// Tokens and reports

struct AccessToken {
  std::string value;       // opaque stand-in for the JWE
  std::string subject_id;  // stable per client credential
  Seconds issued_at = 0;
  static constexpr Seconds kValiditySeconds = 32 * 3600;

  bool valid_at(Seconds t) const {
    return t >= issued_at && t - issued_at < kValiditySeconds;
  }
};

struct LocationReport {
  std::string reporter_id;  // androidId[0:4] || SHA256(androidId || "findMyMobile")
  AccessToken token;
  Bytes payload;  // raw advertisement bytes
  double latitude = 0.0;
  double longitude = 0.0;
  Seconds reported_at = 0;
};

/// reporter id derived from the helper's android id (hex-encoded)
std::string reporter_id_from(const std::string& android_id_hex);

struct StoredReport {
  std::string device_id;
  Bytes payload;
  double latitude = 0.0;
  double longitude = 0.0;
  Seconds reported_at = 0;
  std::string reporter_id;
  std::string token_value;
  std::string token_subject;
  Seconds token_issued_at = 0;
};

// ---------------------------------------------------------------------------
// Device profiles

struct DeviceProfile {
  std::string device_id;
  enum class Kind { Fmm, SmartTag } kind = Kind::Fmm;
  std::string owner_account;
  std::optional<fmm::PrivateIdConfig> fmm_config;
  std::optional<smarttag::PrivacyConfig> tag_config;
  Bytes shared_secret_on_server;
};

// ---------------------------------------------------------------------------
// Location server

class TokenError : public std::runtime_error {
 public:
  explicit TokenError(const std::string& what) : std::runtime_error(what) {}
};

class OwnershipError : public std::runtime_error {
 public:
  explicit OwnershipError(const std::string& what)
      : std::runtime_error(what) {}
};

class QueryError : public std::runtime_error {
 public:
  enum class Kind { NotOwner, UnknownDevice };
  QueryError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class Ownership { NotFound, OwnedByRequester, OwnedByOther };

/// Bearer-token stand-in for the owner-facing API.
struct OwnerToken {
  std::string account;
};

struct ServerOptions {
  // strict mode adds the speed-bound plausibility check the real server
  // does not perform
  bool strict_ingest = false;
  double max_speed_km_h = 1080.0;  // ~300 m/s
  std::uint32_t freshness_window = smarttag::kNoFreshnessCheck;
  int query_hard_limit = 200;
};

struct IngestOutcome {
  enum class Status {
    Accepted,
    RejectedUnknownId,
    RejectedBadSignature,
    RejectedStaleCounter,
    RejectedExpiredToken,
    RejectedImplausible,
  };
  Status status = Status::RejectedUnknownId;
  std::string device_id;  // set when accepted

  bool accepted() const { return status == Status::Accepted; }
  std::string_view reason() const;
};

class LocationServer {
 public:
  LocationServer(std::mt19937_64& rng, ServerOptions options = {});

  // --- token flow (the /nonce and /accesstoken endpoints)
  std::array<std::uint8_t, 16> issue_nonce();
  AccessToken issue_token(const std::string& credential,
                          const std::array<std::uint8_t, 16>& nonce,
                          Seconds now);

  // --- FMM registration; the (device, account) secret persists across
  // deregistration and refreshes only when a different account registers
  fmm::PrivateIdConfig register_fmm(const std::string& account,
                                    const std::string& device_id);
  void deregister_fmm(const std::string& account, const std::string& device_id);

  // --- SmartTag registration
  void provision_tag_identity(const std::string& hashed_sn,
                              const Curve25519Point& tag_public);

  struct TagRegistration {
    Bytes shared_secret;         // B_secret, forwarded to the owner phone
    Curve25519Point server_pub;  // B_pub, forwarded to the tag
    std::string device_id;
    std::uint8_t region_code = 0;
    int pool_size = smarttag::kPoolSize;
    std::array<std::uint8_t, 8> privacy_id_seed{};
    Iv16 privacy_id_iv;
  };

  /// Server side of the shared-secret establishment plus finalization
  /// metadata. Throws OwnershipError when the tag belongs to someone else.
  TagRegistration register_tag(const std::string& account,
                               const std::string& hashed_sn,
                               const std::array<std::uint8_t, 32>& x);

  // the lostmessage endpoint
  Ownership ownership_check(const std::string& hashed_sn,
                            const std::string& requester_account) const;

  void remove_tag(const std::string& account, const std::string& device_id);

  // --- reports (the /geolocations endpoint)
  IngestOutcome ingest_report(const LocationReport& report, Seconds now);

  std::vector<StoredReport> query_locations(const OwnerToken& token,
                                            const std::string& device_id,
                                            Seconds start, Seconds end,
                                            int limit) const;

  // --- introspection for tests and the transcript
  const std::map<std::string, DeviceProfile>& profiles() const {
    return profiles_;
  }
  const std::map<std::string, std::vector<StoredReport>>& report_store() const {
    return reports_;
  }
  std::size_t accepted_count() const { return accepted_count_; }
  const ServerOptions& options() const { return options_; }

 private:
  std::optional<std::string> match_payload(BytesView payload) const;

  std::mt19937_64& rng_;
  ServerOptions options_;

  std::set<std::string> outstanding_nonces_;
  std::map<std::string, std::string> token_subjects_;  // credential -> subject
  std::map<std::string, AccessToken> issued_tokens_;   // value -> token
  std::uint64_t token_counter_ = 0;

  // (device) -> account that last registered it, with its secret
  struct FmmSecretEntry {
    std::string account;
    SecretKey16 secret;
  };
  std::map<std::string, FmmSecretEntry> fmm_secrets_;

  std::map<std::string, DeviceProfile> profiles_;          // device_id keyed
  std::map<std::string, Curve25519Point> tag_identities_;  // hashed_sn keyed
  std::map<std::string, std::string> tag_device_ids_;      // hashed_sn -> device
  std::uint64_t device_counter_ = 0;

  std::map<std::string, std::string> fmm_id_index_;  // private id hex -> device
  std::map<std::string, std::string> tag_prefix_index_;  // prefix hex -> device
  std::map<std::string, std::unique_ptr<smarttag::Verifier>> tag_verifiers_;

  std::map<std::string, std::vector<StoredReport>> reports_;
  std::size_t accepted_count_ = 0;
};

// ---------------------------------------------------------------------------
// Helper device

struct HelperOptions {
  Seconds evict_idle_s = 15 * 60;
  std::size_t capacity = 1000;
  int max_batch = 5;
  Seconds fresh_window_s = 60;
  Seconds rereport_timeout_s = 20 * 60;
};

struct HelperDbEntry {
  Bytes payload;
  Seconds first_seen = 0;
  Seconds last_seen = 0;
  std::optional<Seconds> last_reported;
  bool report_eligible = true;
};

class Helper {
 public:
  Helper(std::string name, GeoPoint position, std::string credential,
         std::string android_id_hex, HelperOptions options = {});

  /// Ingest one scan pass: upsert heard advertisements, evict idle entries,
  /// enforce capacity.
  void scan_step(const std::vector<ScanRecord>& heard, Seconds now);

  /// Select up to max_batch fresh, unreported entries, refresh the token if
  /// needed, and send location reports. Returns the server outcomes.
  std::vector<IngestOutcome> report_step(LocationServer& server, Seconds now,
                                         Transcript* transcript = nullptr);

  const std::map<std::string, HelperDbEntry>& db() const { return db_; }
  const std::string& name() const { return name_; }
  std::string reporter_id() const { return reporter_id_from(android_id_hex_); }
  const std::optional<AccessToken>& token() const { return token_; }

  GeoPoint position;
  /// When set, reported coordinates are replaced (the man-in-the-middle
  /// tamper of the fake-location scenario).
  std::optional<GeoPoint> spoof_location;

 private:
  std::string name_;
  std::string credential_;
  std::string android_id_hex_;
  HelperOptions options_;
  std::map<std::string, HelperDbEntry> db_;  // keyed by privacy-id hex
  std::optional<AccessToken> token_;
};

/// The database key for a heard advertisement: the 12-byte private id for
/// lost-mode phones, the 8-byte privacy id prefix for tags.
std::optional<std::string> helper_db_key(const ScanRecord& record);

// ---------------------------------------------------------------------------
// Simulated lost devices

class FmmDevice {
 public:
  FmmDevice(std::string device_id, fmm::PrivateIdConfig config,
            std::uint8_t flags, Irk irk, GeoPoint position);

  void rotate(std::mt19937_64& rng);  // new random pool index and fresh RPA
  ScanRecord advertisement(Seconds t) const;

  const std::string& device_id() const { return device_id_; }
  const fmm::Pool& pool() const { return pool_; }
  int current_index() const { return current_index_; }
  bool advertising = true;
  GeoPoint position;

 private:
  std::string device_id_;
  fmm::PrivateIdConfig config_;
  std::uint8_t flags_;
  Irk irk_;
  fmm::Pool pool_;
  int current_index_ = 1;
  Mac48 mac_;
};

class SimTag {
 public:
  SimTag(std::string device_id, smarttag::PrivacyConfig config, Irk irk,
         GeoPoint position, Seconds registered_at = 0);

  /// Brings the state machine up to `now`, then applies the event.
  void apply(const smarttag::TagEvent& event, Seconds now);
  smarttag::TagState state() const { return machine_.state; }

  /// The 15-minute refresh: tick the state machine, rotate per policy,
  /// re-encode the payload with a fresh signature, change the RPA.
  void refresh(Seconds now, std::mt19937_64& rng);

  ScanRecord advertisement(Seconds t) const;

  const std::string& device_id() const { return device_id_; }
  const smarttag::PrivacyConfig& config() const { return config_; }
  const smarttag::PrivacyPool& pool() const { return pool_; }
  std::uint16_t current_index() const { return current_index_; }
  Seconds last_pid_change() const { return last_pid_change_; }
  bool advertising = true;
  GeoPoint position;
  std::uint8_t battery_level = 3;

 private:
  std::string device_id_;
  smarttag::PrivacyConfig config_;
  Irk irk_;
  smarttag::PrivacyPool pool_;
  smarttag::StateMachine machine_{smarttag::TagState::ConnectedOne, 0};
  std::uint16_t current_index_ = 0;
  Seconds last_pid_change_ = 0;
  Seconds last_event_time_ = 0;
  std::uint32_t counter_value_ = 0;
  Mac48 mac_;
};

/// A replaying transmitter: re-broadcasts a captured payload verbatim on a
/// static address of its own.
struct ReplayEmitter {
  Bytes payload;
  std::uint16_t service_uuid = kUuidFmmOffline;
  Mac48 mac;
  GeoPoint position;
  bool advertising = true;

  ScanRecord advertisement(Seconds t) const {
    return ScanRecord{t, mac, service_uuid, payload, std::nullopt};
  }
};

}  // namespace ofkit::sim
