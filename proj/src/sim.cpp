#include "ofkit/sim.hpp"

#include <algorithm>
#include <cmath>

namespace ofkit::sim {

double distance_km(GeoPoint a, GeoPoint b) {
  double dlat = (a.lat - b.lat) * kKmPerDegree;
  double dlon = (a.lon - b.lon) * kKmPerDegree;
  return std::sqrt(dlat * dlat + dlon * dlon);
}

// ---------------------------------------------------------------------------
// SimClock

void SimClock::schedule_at(Seconds t, std::function<void()> fn) {
  queue_.push(Event{std::max(t, now_), next_seq_++, std::move(fn)});
}

void SimClock::schedule_in(Seconds dt, std::function<void()> fn) {
  schedule_at(now_ + dt, std::move(fn));
}

void SimClock::run_until(Seconds t) {
  while (!queue_.empty() && queue_.top().t <= t) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.fn();
  }
  now_ = std::max(now_, t);
}

void SimClock::run_all() {
  while (!queue_.empty()) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.fn();
  }
}

// ---------------------------------------------------------------------------
// Transcript

void Transcript::log(Seconds t, std::string actor, std::string action,
                     nlohmann::ordered_json detail) {
  entries_.push_back(
      TranscriptEntry{t, std::move(actor), std::move(action), std::move(detail)});
}

std::string Transcript::to_json_lines() const {
  std::string out;
  for (const TranscriptEntry& e : entries_) {
    nlohmann::ordered_json j;
    j["t"] = e.t;
    j["actor"] = e.actor;
    j["action"] = e.action;
    j["detail"] = e.detail;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reporter id

std::string reporter_id_from(const std::string& android_id_hex) {
  Bytes input(android_id_hex.begin(), android_id_hex.end());
  static const std::string kSuffix = "findMyMobile";
  input.insert(input.end(), kSuffix.begin(), kSuffix.end());
  return android_id_hex.substr(0, 4) + to_hex(sha256(input));
}

// ---------------------------------------------------------------------------
// LocationServer

std::string_view IngestOutcome::reason() const {
  switch (status) {
    case Status::Accepted: return "accepted";
    case Status::RejectedUnknownId: return "unknown-id";
    case Status::RejectedBadSignature: return "bad-signature";
    case Status::RejectedStaleCounter: return "stale-counter";
    case Status::RejectedExpiredToken: return "expired-token";
    case Status::RejectedImplausible: return "implausible-speed";
  }
  return "unknown";
}

LocationServer::LocationServer(std::mt19937_64& rng, ServerOptions options)
    : rng_(rng), options_(options) {}

std::array<std::uint8_t, 16> LocationServer::issue_nonce() {
  auto nonce = random_bytes16(rng_);
  outstanding_nonces_.insert(to_hex(nonce));
  return nonce;
}

AccessToken LocationServer::issue_token(
    const std::string& credential, const std::array<std::uint8_t, 16>& nonce,
    Seconds now) {
  auto it = outstanding_nonces_.find(to_hex(nonce));
  if (it == outstanding_nonces_.end())
    throw TokenError("nonce unknown or already consumed");
  outstanding_nonces_.erase(it);

  auto [subject_it, fresh] = token_subjects_.try_emplace(
      credential, "subject-" + std::to_string(token_subjects_.size() + 1));
  AccessToken token;
  token.value = "token-" + std::to_string(++token_counter_);
  token.subject_id = subject_it->second;
  token.issued_at = now;
  issued_tokens_[token.value] = token;
  return token;
}

fmm::PrivateIdConfig LocationServer::register_fmm(const std::string& account,
                                                  const std::string& device_id) {
  // a previous registration's pool stops matching once the secret turns over
  if (auto existing = profiles_.find(device_id);
      existing != profiles_.end() && existing->second.fmm_config) {
    for (const fmm::PrivateId& id :
         fmm::generate_pool(*existing->second.fmm_config, device_id).ids)
      fmm_id_index_.erase(to_hex(id.bytes));
  }

  auto it = fmm_secrets_.find(device_id);
  if (it == fmm_secrets_.end() || it->second.account != account) {
    SecretKey16 secret{random_bytes16(rng_)};
    it = fmm_secrets_.insert_or_assign(device_id, FmmSecretEntry{account, secret})
             .first;
  }

  fmm::PrivateIdConfig config;
  config.secret_key = it->second.secret;
  config.iv = fmm::standard_iv();
  config.pool_size = fmm::kPoolSize;

  DeviceProfile profile;
  profile.device_id = device_id;
  profile.kind = DeviceProfile::Kind::Fmm;
  profile.owner_account = account;
  profile.fmm_config = config;
  profiles_[device_id] = profile;

  for (const fmm::PrivateId& id : fmm::generate_pool(config, device_id).ids)
    fmm_id_index_[to_hex(id.bytes)] = device_id;
  return config;
}

void LocationServer::deregister_fmm(const std::string& account,
                                    const std::string& device_id) {
  auto it = profiles_.find(device_id);
  if (it == profiles_.end() || it->second.owner_account != account) return;
  // the stored (device, account) secret is retained
  for (const fmm::PrivateId& id :
       fmm::generate_pool(*it->second.fmm_config, device_id).ids)
    fmm_id_index_.erase(to_hex(id.bytes));
  profiles_.erase(it);
}

void LocationServer::provision_tag_identity(const std::string& hashed_sn,
                                            const Curve25519Point& tag_public) {
  tag_identities_[hashed_sn] = tag_public;
}

LocationServer::TagRegistration LocationServer::register_tag(
    const std::string& account, const std::string& hashed_sn,
    const std::array<std::uint8_t, 32>& x) {
  auto identity = tag_identities_.find(hashed_sn);
  if (identity == tag_identities_.end())
    throw OwnershipError("no provisioned tag for this serial");
  if (ownership_check(hashed_sn, account) == Ownership::OwnedByOther)
    throw OwnershipError("tag is registered to another account");

  Keypair25519 ephemeral = generate_keypair(rng_);
  Digest256 secret = ecdh_establish(ephemeral.priv, identity->second, x);

  TagRegistration reg;
  reg.shared_secret.assign(secret.begin(), secret.end());
  reg.server_pub = ephemeral.pub;
  reg.device_id = "tag-" + std::to_string(++device_counter_);
  reg.region_code = 12;
  reg.pool_size = smarttag::kPoolSize;
  auto seed16 = random_bytes16(rng_);
  std::copy(seed16.begin(), seed16.begin() + 8, reg.privacy_id_seed.begin());
  reg.privacy_id_iv = Iv16{random_bytes16(rng_)};

  MasterSecret ms = master_secret_from(secret);
  DerivedKeySet keys = derive_keyset(ms);

  smarttag::PrivacyConfig config;
  config.pid_key = keys.pid_key;
  config.sign_key = keys.sign_key;
  config.privacy_id_seed = reg.privacy_id_seed;
  config.privacy_id_iv = reg.privacy_id_iv;
  config.pool_size = reg.pool_size;
  config.region_code = reg.region_code;

  DeviceProfile profile;
  profile.device_id = reg.device_id;
  profile.kind = DeviceProfile::Kind::SmartTag;
  profile.owner_account = account;
  profile.tag_config = config;
  profile.shared_secret_on_server = reg.shared_secret;
  profiles_[reg.device_id] = profile;
  tag_device_ids_[hashed_sn] = reg.device_id;

  smarttag::PrivacyPool pool = smarttag::privacy_pool(config);
  for (std::size_t i = 0; i < pool.ids.size(); ++i)
    tag_prefix_index_[to_hex(pool.prefix(i))] = reg.device_id;
  tag_verifiers_[reg.device_id] =
      std::make_unique<smarttag::Verifier>(config);
  return reg;
}

Ownership LocationServer::ownership_check(
    const std::string& hashed_sn, const std::string& requester_account) const {
  auto it = tag_device_ids_.find(hashed_sn);
  if (it == tag_device_ids_.end()) return Ownership::NotFound;
  auto profile = profiles_.find(it->second);
  if (profile == profiles_.end()) return Ownership::NotFound;
  return profile->second.owner_account == requester_account
             ? Ownership::OwnedByRequester
             : Ownership::OwnedByOther;
}

void LocationServer::remove_tag(const std::string& account,
                                const std::string& device_id) {
  auto it = profiles_.find(device_id);
  if (it == profiles_.end())
    throw QueryError(QueryError::Kind::UnknownDevice, "unknown device");
  if (it->second.owner_account != account)
    throw QueryError(QueryError::Kind::NotOwner, "not the owner");

  if (it->second.tag_config) {
    smarttag::PrivacyPool pool = smarttag::privacy_pool(*it->second.tag_config);
    for (std::size_t i = 0; i < pool.ids.size(); ++i)
      tag_prefix_index_.erase(to_hex(pool.prefix(i)));
  }
  tag_verifiers_.erase(device_id);
  std::erase_if(tag_device_ids_,
                [&](const auto& kv) { return kv.second == device_id; });
  profiles_.erase(it);
}

std::optional<std::string> LocationServer::match_payload(
    BytesView payload) const {
  if (payload.size() == 14) {
    auto it = fmm_id_index_.find(
        to_hex(payload.subspan(1, 12)));
    if (it != fmm_id_index_.end()) return it->second;
    return std::nullopt;
  }
  if (payload.size() == 20) {
    auto it = tag_prefix_index_.find(to_hex(payload.subspan(4, 8)));
    if (it != tag_prefix_index_.end()) return it->second;
    return std::nullopt;
  }
  return std::nullopt;
}

IngestOutcome LocationServer::ingest_report(const LocationReport& report,
                                            Seconds now) {
  IngestOutcome outcome;

  auto issued = issued_tokens_.find(report.token.value);
  if (issued == issued_tokens_.end() || !issued->second.valid_at(now)) {
    outcome.status = IngestOutcome::Status::RejectedExpiredToken;
    return outcome;
  }

  std::optional<std::string> device = match_payload(report.payload);
  if (!device) {
    outcome.status = IngestOutcome::Status::RejectedUnknownId;
    return outcome;
  }

  if (report.payload.size() == 20) {
    const auto& verifier = tag_verifiers_.at(*device);
    smarttag::Verdict verdict =
        verifier->verify(report.payload, smarttag::aging_counter(now),
                         options_.freshness_window);
    if (verdict == smarttag::Verdict::BadSignature) {
      outcome.status = IngestOutcome::Status::RejectedBadSignature;
      return outcome;
    }
    if (verdict == smarttag::Verdict::StaleCounter) {
      outcome.status = IngestOutcome::Status::RejectedStaleCounter;
      return outcome;
    }
  }

  if (options_.strict_ingest) {
    const auto& history = reports_[*device];
    if (!history.empty()) {
      const StoredReport& last = history.back();
      double km = distance_km({last.latitude, last.longitude},
                              {report.latitude, report.longitude});
      double dt_h =
          std::max<double>(1.0, static_cast<double>(now - last.reported_at)) /
          3600.0;
      if (km / dt_h > options_.max_speed_km_h) {
        outcome.status = IngestOutcome::Status::RejectedImplausible;
        return outcome;
      }
    }
  }

  StoredReport stored;
  stored.device_id = *device;
  stored.payload = report.payload;
  stored.latitude = report.latitude;
  stored.longitude = report.longitude;
  stored.reported_at = now;
  stored.reporter_id = report.reporter_id;
  stored.token_value = report.token.value;
  stored.token_subject = report.token.subject_id;
  stored.token_issued_at = report.token.issued_at;
  reports_[*device].push_back(stored);
  ++accepted_count_;

  outcome.status = IngestOutcome::Status::Accepted;
  outcome.device_id = *device;
  return outcome;
}

std::vector<StoredReport> LocationServer::query_locations(
    const OwnerToken& token, const std::string& device_id, Seconds start,
    Seconds end, int limit) const {
  auto profile = profiles_.find(device_id);
  if (profile == profiles_.end())
    throw QueryError(QueryError::Kind::UnknownDevice, "unknown device");
  if (profile->second.owner_account != token.account)
    throw QueryError(QueryError::Kind::NotOwner,
                     "device belongs to another account");

  int capped = std::min(limit, options_.query_hard_limit);
  std::vector<StoredReport> out;
  auto stored = reports_.find(device_id);
  if (stored == reports_.end()) return out;
  for (const StoredReport& r : stored->second) {
    if (r.reported_at < start || r.reported_at > end) continue;
    out.push_back(r);
    if (static_cast<int>(out.size()) == capped) break;
  }
  return out;  // reports_ is appended in time order, so already ascending
}

// ---------------------------------------------------------------------------
// Helper

std::optional<std::string> helper_db_key(const ScanRecord& record) {
  if (record.service_uuid == kUuidFmmOffline && record.payload.size() == 14)
    return to_hex(BytesView(record.payload).subspan(1, 12));
  if (record.service_uuid == kUuidTagOffline && record.payload.size() == 20)
    return to_hex(BytesView(record.payload).subspan(4, 8));
  return std::nullopt;
}

Helper::Helper(std::string name, GeoPoint pos, std::string credential,
               std::string android_id_hex, HelperOptions options)
    : position(pos),
      name_(std::move(name)),
      credential_(std::move(credential)),
      android_id_hex_(std::move(android_id_hex)),
      options_(options) {}

void Helper::scan_step(const std::vector<ScanRecord>& heard, Seconds now) {
  for (const ScanRecord& record : heard) {
    std::optional<std::string> key = helper_db_key(record);
    if (!key) continue;

    bool eligible = true;
    if (record.service_uuid == kUuidTagOffline) {
      smarttag::Advertisement adv = smarttag::decode_adv(record.payload);
      eligible = adv.state ==
                     static_cast<std::uint8_t>(smarttag::TagState::Offline) ||
                 adv.state == static_cast<std::uint8_t>(
                                  smarttag::TagState::OvermatureOffline);
    }

    auto it = db_.find(*key);
    if (it == db_.end()) {
      if (db_.size() >= options_.capacity) {
        // full: drop the entry that has been silent the longest
        auto oldest = db_.begin();
        for (auto cand = db_.begin(); cand != db_.end(); ++cand)
          if (cand->second.last_seen < oldest->second.last_seen) oldest = cand;
        db_.erase(oldest);
      }
      db_.emplace(*key,
                  HelperDbEntry{record.payload, now, now, std::nullopt, eligible});
    } else {
      it->second.payload = record.payload;
      it->second.last_seen = now;
      it->second.report_eligible = eligible;
    }
  }

  std::erase_if(db_, [&](const auto& kv) {
    return now - kv.second.last_seen >= options_.evict_idle_s;
  });
}

std::vector<IngestOutcome> Helper::report_step(LocationServer& server,
                                               Seconds now,
                                               Transcript* transcript) {
  std::vector<IngestOutcome> outcomes;

  std::vector<std::pair<std::string, HelperDbEntry*>> batch;
  for (auto& [key, entry] : db_) {
    if (!entry.report_eligible) continue;
    if (now - entry.last_seen > options_.fresh_window_s) continue;
    if (entry.last_reported &&
        now - *entry.last_reported < options_.rereport_timeout_s)
      continue;
    batch.emplace_back(key, &entry);
    if (static_cast<int>(batch.size()) == options_.max_batch) break;
  }
  if (batch.empty()) return outcomes;

  if (!token_ || !token_->valid_at(now)) {
    auto nonce = server.issue_nonce();
    if (transcript)
      transcript->log(now, name_, "GET /nonce", {{"nonce", to_hex(nonce)}});
    token_ = server.issue_token(credential_, nonce, now);
    if (transcript)
      transcript->log(now, name_, "POST /accesstoken",
                      {{"token", token_->value}, {"subject", token_->subject_id}});
  }

  GeoPoint where = spoof_location.value_or(position);
  for (auto& [key, entry] : batch) {
    LocationReport report;
    report.reporter_id = reporter_id();
    report.token = *token_;
    report.payload = entry->payload;
    report.latitude = where.lat;
    report.longitude = where.lon;
    report.reported_at = now;
    IngestOutcome outcome = server.ingest_report(report, now);
    entry->last_reported = now;
    if (transcript)
      transcript->log(now, name_, "POST /geolocations",
                      {{"id_key", key},
                       {"lat", where.lat},
                       {"lon", where.lon},
                       {"outcome", std::string(outcome.reason())},
                       {"device_id", outcome.device_id},
                       {"token", report.token.value}});
    outcomes.push_back(outcome);
  }
  return outcomes;
}

// ---------------------------------------------------------------------------
// FmmDevice

FmmDevice::FmmDevice(std::string device_id, fmm::PrivateIdConfig config,
                     std::uint8_t flags, Irk irk, GeoPoint pos)
    : position(pos),
      device_id_(std::move(device_id)),
      config_(config),
      flags_(flags),
      irk_(irk),
      pool_(fmm::generate_pool(config, device_id_)) {}

void FmmDevice::rotate(std::mt19937_64& rng) {
  current_index_ =
      1 + static_cast<int>(rng() % static_cast<std::uint64_t>(config_.pool_size));
  Prand prand{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
              static_cast<std::uint8_t>(rng())};
  mac_ = rpa_generate(irk_, prand);
}

ScanRecord FmmDevice::advertisement(Seconds t) const {
  fmm::Advertisement adv;
  adv.op_mode = 0x00;
  adv.private_id = pool_.ids[current_index_ - 1].bytes;
  adv.flags = flags_;
  return ScanRecord{t, mac_, kUuidFmmOffline, fmm::encode_adv(adv), std::nullopt};
}

// ---------------------------------------------------------------------------
// SimTag

SimTag::SimTag(std::string device_id, smarttag::PrivacyConfig config, Irk irk,
               GeoPoint pos, Seconds registered_at)
    : position(pos),
      device_id_(std::move(device_id)),
      config_(config),
      irk_(irk),
      pool_(smarttag::privacy_pool(config)),
      last_event_time_(registered_at) {}

void SimTag::apply(const smarttag::TagEvent& event, Seconds now) {
  if (now > last_event_time_) {
    machine_.apply(smarttag::EvTick{now - last_event_time_});
    last_event_time_ = now;
  }
  machine_.apply(event);
}

void SimTag::refresh(Seconds now, std::mt19937_64& rng) {
  if (now > last_event_time_) {
    machine_.apply(smarttag::EvTick{now - last_event_time_});
    last_event_time_ = now;
  }

  smarttag::RotationStep step = smarttag::rotate(
      machine_.state, now, last_pid_change_ == 0 ? now : last_pid_change_, rng,
      config_.pool_size);
  if (step.new_index) {
    current_index_ = *step.new_index;
    last_pid_change_ = now;
  }
  counter_value_ = step.counter.value;

  Prand prand{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
              static_cast<std::uint8_t>(rng())};
  mac_ = rpa_generate(irk_, prand);
}

ScanRecord SimTag::advertisement(Seconds t) const {
  smarttag::Advertisement adv;
  adv.version = 1;
  adv.adv_type = 0;
  adv.state = static_cast<std::uint8_t>(machine_.state);
  adv.aging_counter = counter_value_;
  adv.privacy_id_prefix = pool_.prefix(current_index_);
  adv.region_id = config_.region_code;
  adv.battery_level = battery_level;
  return ScanRecord{t, mac_, kUuidTagOffline, smarttag::encode_adv(adv, config_),
                    std::nullopt};
}

}  // namespace ofkit::sim
