#include "ofkit/smarttag.hpp"

#include <cctype>

#include <json.hpp>

namespace ofkit::smarttag {

std::string_view state_name(std::uint8_t code) {
  switch (code) {
    case 1: return "premature-offline";
    case 2: return "offline";
    case 3: return "overmature-offline";
    case 4: return "paired";
    case 5: return "connected-one";
    case 6: return "connected-two";
    default: return "unknown";
  }
}

void StateMachine::apply(const TagEvent& event) {
  if (std::holds_alternative<EvConnected>(event)) {
    int devices = std::get<EvConnected>(event).devices;
    state = devices >= 2 ? TagState::ConnectedTwo : TagState::ConnectedOne;
    seconds_in_state = 0;
    return;
  }
  if (std::holds_alternative<EvDisconnected>(event) ||
      std::holds_alternative<EvRebooted>(event)) {
    state = TagState::PrematureOffline;
    seconds_in_state = 0;
    return;
  }
  std::uint64_t elapsed = std::get<EvTick>(event).elapsed_s;
  // cascade through the timed promotions
  while (true) {
    if (state == TagState::PrematureOffline) {
      std::uint64_t need = kOfflineAfterS - seconds_in_state;
      if (elapsed >= need) {
        state = TagState::Offline;
        seconds_in_state = 0;
        elapsed -= need;
        continue;
      }
    } else if (state == TagState::Offline) {
      std::uint64_t need = kOvermatureAfterS - seconds_in_state;
      if (elapsed >= need) {
        state = TagState::OvermatureOffline;
        seconds_in_state = 0;
        elapsed -= need;
        continue;
      }
    }
    seconds_in_state += elapsed;
    return;
  }
}

TagState state_step(TagState current, const TagEvent& event) {
  StateMachine m{current, 0};
  m.apply(event);
  return m.state;
}

AgingCounter aging_counter(std::uint64_t tag_time) {
  if (tag_time < kAgingEpoch)
    throw std::out_of_range("tag time precedes the aging-counter epoch");
  return AgingCounter{
      static_cast<std::uint32_t>((tag_time - kAgingEpoch) / kAgingIntervalS)};
}

std::uint64_t aging_time(AgingCounter counter) {
  return kAgingEpoch + static_cast<std::uint64_t>(counter.value) * kAgingIntervalS;
}

std::string PrivacyConfig::to_json() const {
  nlohmann::json j;
  j["pid_key_hex"] = pid_key.hex();
  j["sign_key_hex"] = sign_key.hex();
  j["seed_hex"] = to_hex(privacy_id_seed);
  j["iv_hex"] = privacy_id_iv.hex();
  j["pool_size"] = pool_size;
  j["region"] = region_code;
  return j.dump();
}

PrivacyConfig PrivacyConfig::from_json(std::string_view text,
                                       std::vector<std::string>* warnings) {
  nlohmann::json j = nlohmann::json::parse(text);
  PrivacyConfig cfg;
  cfg.pid_key = SecretKey16::from_hex(j.at("pid_key_hex").get<std::string>());
  cfg.sign_key = SecretKey16::from_hex(j.at("sign_key_hex").get<std::string>());
  Bytes seed = from_hex(j.at("seed_hex").get<std::string>());
  if (seed.size() == 12) {
    if (warnings)
      warnings->push_back("12-byte privacy id seed truncated to 8 bytes");
    seed.resize(8);
  }
  if (seed.size() != 8) throw CodecError("seed_hex must decode to 8 bytes");
  std::copy(seed.begin(), seed.end(), cfg.privacy_id_seed.begin());
  cfg.privacy_id_iv = Iv16::from_hex(j.at("iv_hex").get<std::string>());
  cfg.pool_size = j.value("pool_size", kPoolSize);
  if (cfg.pool_size < 1) throw CodecError("pool_size must be positive");
  int region = j.value("region", 0);
  if (region < 0 || region > 15) throw CodecError("region must be 0..15");
  cfg.region_code = static_cast<std::uint8_t>(region);
  return cfg;
}

std::array<std::uint8_t, 12> pool_input(
    int index, const std::array<std::uint8_t, 8>& seed) {
  std::array<std::uint8_t, 12> in{};
  in[0] = static_cast<std::uint8_t>((index >> 8) & 0xff);
  in[1] = static_cast<std::uint8_t>(index & 0xff);
  std::copy(seed.begin(), seed.end(), in.begin() + 2);
  in[10] = in[0];
  in[11] = in[1];
  return in;
}

PrivacyPool privacy_pool(const PrivacyConfig& cfg) {
  PrivacyPool pool;
  pool.ids.reserve(cfg.pool_size);
  for (int i = 0; i < cfg.pool_size; ++i) {
    Bytes ct = aes_cbc_encrypt(cfg.pid_key.bytes, cfg.privacy_id_iv.bytes,
                               pool_input(i, cfg.privacy_id_seed));
    PrivacyId id{};
    std::copy(ct.begin(), ct.begin() + 16, id.begin());
    pool.ids.push_back(id);
  }
  return pool;
}

Signature4 signature(const SecretKey16& sign_key, const Iv16& iv,
                     BytesView payload16) {
  if (payload16.size() != 16)
    throw CodecError("signature input must be exactly 16 bytes");
  Bytes ct = aes_cbc_encrypt(sign_key.bytes, iv.bytes, payload16);
  return Signature4{ct[0], ct[1], ct[2], ct[3]};
}

namespace {

// bits pack MSB-first within bytes 0 and 12: 0x15 carries version 1,
// adv type 0, state 5; 0xC3 carries region 0xC, flags 0, battery 3.
std::array<std::uint8_t, 16> pack_head(const Advertisement& adv) {
  std::array<std::uint8_t, 16> head{};
  head[0] = static_cast<std::uint8_t>(((adv.version & 0x0f) << 4) |
                                      ((adv.adv_type & 0x01) << 3) |
                                      (adv.state & 0x07));
  head[1] = static_cast<std::uint8_t>(adv.aging_counter & 0xff);
  head[2] = static_cast<std::uint8_t>((adv.aging_counter >> 8) & 0xff);
  head[3] = static_cast<std::uint8_t>((adv.aging_counter >> 16) & 0xff);
  std::copy(adv.privacy_id_prefix.begin(), adv.privacy_id_prefix.end(),
            head.begin() + 4);
  head[12] = static_cast<std::uint8_t>(((adv.region_id & 0x0f) << 4) |
                                       (adv.encryption_flag ? 0x08 : 0) |
                                       (adv.uwb_flag ? 0x04 : 0) |
                                       (adv.battery_level & 0x03));
  std::copy(adv.reserved.begin(), adv.reserved.end(), head.begin() + 13);
  return head;
}

}  // namespace

Bytes encode_adv_raw(const Advertisement& adv) {
  auto head = pack_head(adv);
  Bytes out(20);
  std::copy(head.begin(), head.end(), out.begin());
  std::copy(adv.sig.begin(), adv.sig.end(), out.begin() + 16);
  return out;
}

Bytes encode_adv(const Advertisement& adv, const PrivacyConfig& cfg) {
  auto head = pack_head(adv);
  Signature4 sig = signature(cfg.sign_key, cfg.privacy_id_iv, head);
  Bytes out(20);
  std::copy(head.begin(), head.end(), out.begin());
  std::copy(sig.begin(), sig.end(), out.begin() + 16);
  return out;
}

Advertisement decode_adv(BytesView payload) {
  if (payload.size() != 20)
    throw CodecError("registered advertisement must be 20 bytes, got " +
                     std::to_string(payload.size()));
  Advertisement adv;
  adv.version = payload[0] >> 4;
  adv.adv_type = (payload[0] >> 3) & 0x01;
  adv.state = payload[0] & 0x07;
  adv.aging_counter = static_cast<std::uint32_t>(payload[1]) |
                      (static_cast<std::uint32_t>(payload[2]) << 8) |
                      (static_cast<std::uint32_t>(payload[3]) << 16);
  std::copy(payload.begin() + 4, payload.begin() + 12,
            adv.privacy_id_prefix.begin());
  adv.region_id = payload[12] >> 4;
  adv.encryption_flag = (payload[12] & 0x08) != 0;
  adv.uwb_flag = (payload[12] & 0x04) != 0;
  adv.battery_level = payload[12] & 0x03;
  std::copy(payload.begin() + 13, payload.begin() + 16, adv.reserved.begin());
  std::copy(payload.begin() + 16, payload.end(), adv.sig.begin());
  return adv;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Ok: return "ok";
    case Verdict::BadSignature: return "bad-signature";
    case Verdict::StaleCounter: return "stale-counter";
    case Verdict::UnknownId: return "unknown-id";
  }
  return "unknown";
}

Verifier::Verifier(const PrivacyConfig& cfg) : cfg_(cfg) {
  PrivacyPool pool = privacy_pool(cfg);
  for (std::size_t i = 0; i < pool.ids.size(); ++i)
    prefixes_.insert(pool.prefix(i));
}

Verdict Verifier::verify(BytesView payload, AgingCounter server_counter,
                         std::uint32_t freshness_window) const {
  if (payload.size() != 20) return Verdict::UnknownId;
  Signature4 expect =
      signature(cfg_.sign_key, cfg_.privacy_id_iv, payload.subspan(0, 16));
  if (!std::equal(expect.begin(), expect.end(), payload.begin() + 16))
    return Verdict::BadSignature;
  PrivacyIdPrefix prefix{};
  std::copy(payload.begin() + 4, payload.begin() + 12, prefix.begin());
  if (!prefixes_.contains(prefix)) return Verdict::UnknownId;
  if (freshness_window != kNoFreshnessCheck) {
    std::uint32_t counter = static_cast<std::uint32_t>(payload[1]) |
                            (static_cast<std::uint32_t>(payload[2]) << 8) |
                            (static_cast<std::uint32_t>(payload[3]) << 16);
    std::uint32_t diff = counter > server_counter.value
                             ? counter - server_counter.value
                             : server_counter.value - counter;
    if (diff > freshness_window) return Verdict::StaleCounter;
  }
  return Verdict::Ok;
}

Verdict verify_adv(BytesView payload, const PrivacyConfig& cfg,
                   AgingCounter server_counter,
                   std::uint32_t freshness_window) {
  return Verifier(cfg).verify(payload, server_counter, freshness_window);
}

RotationStep rotate(TagState state, std::uint64_t now,
                    std::uint64_t last_pid_change, std::mt19937_64& rng,
                    int pool_size, const RotationPolicy& policy) {
  RotationStep step;
  step.counter = aging_counter(now);
  bool rotate_pid = state != TagState::OvermatureOffline ||
                    now - last_pid_change >= policy.overmature_pid_interval_s;
  if (rotate_pid) {
    // raw modulo keeps the draw identical across platforms; the bias over a
    // 1000-entry pool is negligible at 2^64
    step.new_index = static_cast<std::uint16_t>(
        rng() % static_cast<std::uint64_t>(pool_size));
  }
  return step;
}

std::string mac_suffix_from(std::uint8_t b4, std::uint8_t b5) {
  std::uint8_t both[2] = {b4, b5};
  std::string hex = to_hex(BytesView(both, 2));
  for (char& c : hex) c = static_cast<char>(std::toupper(c));
  return hex.substr(0, 3);
}

Bytes unreg_encode(const UnregisteredAdvertisement& adv) {
  if (adv.mn_id.size() != 4) throw CodecError("mnId must be 4 characters");
  if (adv.setup_id.size() != 3) throw CodecError("setupId must be 3 characters");
  if (adv.mac_suffix.size() != 3)
    throw CodecError("mac suffix must be 3 characters");
  Bytes out(14);
  out[0] = 0x01;
  std::copy(adv.mn_id.begin(), adv.mn_id.end(), out.begin() + 1);
  std::copy(adv.setup_id.begin(), adv.setup_id.end(), out.begin() + 5);
  out[8] = 0x01;
  out[9] = 0x05;
  out[10] = 0x01;
  std::copy(adv.mac_suffix.begin(), adv.mac_suffix.end(), out.begin() + 11);
  return out;
}

UnregDecode unreg_decode(BytesView payload) {
  if (payload.size() != 14)
    throw CodecError("onboarding advertisement must be 14 bytes, got " +
                     std::to_string(payload.size()));
  UnregDecode result;
  if (payload[0] != 0x01)
    result.warnings.push_back("byte 0 is not 0x01");
  result.adv.mn_id.assign(payload.begin() + 1, payload.begin() + 5);
  result.adv.setup_id.assign(payload.begin() + 5, payload.begin() + 8);
  if (!(payload[8] == 0x01 && payload[9] == 0x05 && payload[10] == 0x01))
    result.warnings.push_back("bytes 8-10 are not 01 05 01");
  result.adv.mac_suffix.assign(payload.begin() + 11, payload.end());
  if (result.adv.mn_id != "0AFD")
    result.warnings.push_back("mnId is not 0AFD");
  if (result.adv.setup_id != "430")
    result.warnings.push_back("setupId is not 430");
  return result;
}

}  // namespace ofkit::smarttag
