#include "ofkit/scenario.hpp"

#include <deque>
#include <sstream>

namespace ofkit::sim {

namespace {

// simulated wall clock base, well past the aging-counter epoch
constexpr Seconds kT0 = 1660000000;

struct World {
  std::uint64_t seed;
  std::mt19937_64 rng;
  SimClock clock;
  LocationServer server;
  Transcript transcript;
  std::vector<ScanRecord> scan_log;
  std::deque<FmmDevice> phones;
  std::deque<SimTag> tags;
  std::deque<ReplayEmitter> emitters;
  std::deque<Helper> helpers;
  double radio_range_km = 0.2;

  World(std::uint64_t seed_in, ServerOptions opts = {})
      : seed(seed_in), rng(seed_in), server(rng, opts) {}

  std::string fresh_android_id() { return to_hex(random_bytes16(rng)).substr(0, 16); }

  std::vector<ScanRecord> radio_scan(GeoPoint where, Seconds t,
                                     bool capture = true) {
    std::vector<ScanRecord> heard;
    for (const FmmDevice& p : phones)
      if (p.advertising && distance_km(p.position, where) <= radio_range_km)
        heard.push_back(p.advertisement(t));
    for (const SimTag& tag : tags)
      if (tag.advertising && distance_km(tag.position, where) <= radio_range_km)
        heard.push_back(tag.advertisement(t));
    for (const ReplayEmitter& e : emitters)
      if (e.advertising && distance_km(e.position, where) <= radio_range_km)
        heard.push_back(e.advertisement(t));
    if (capture)
      scan_log.insert(scan_log.end(), heard.begin(), heard.end());
    return heard;
  }

  /// Runs the full onboarding flow against the server and returns the tag
  /// built from the finalization metadata. Logs the key agreement check.
  SimTag& register_tag_full(const std::string& account,
                            const std::string& hashed_sn, GeoPoint where,
                            Seconds now, bool* secrets_equal = nullptr) {
    Keypair25519 identity = generate_keypair(rng);
    server.provision_tag_identity(hashed_sn, identity.pub);

    Ownership owned = server.ownership_check(hashed_sn, account);
    transcript.log(now, account, "GET /chaser/trackers/lostmessage",
                   {{"hashed_sn", hashed_sn},
                    {"status", owned == Ownership::NotFound ? 404 : 200}});

    auto x = random_bytes32(rng);
    transcript.log(now, account, "POST /identity/easysetup/blob",
                   {{"hashed_sn", hashed_sn}});
    LocationServer::TagRegistration reg =
        server.register_tag(account, hashed_sn, x);

    // the tag derives the same secret from the forwarded public parameters
    Digest256 tag_secret = ecdh_establish(identity.priv, reg.server_pub, x);
    bool equal = Bytes(tag_secret.begin(), tag_secret.end()) == reg.shared_secret;
    if (secrets_equal) *secrets_equal = equal;
    transcript.log(now, reg.device_id, "shared-secret-established",
                   {{"equal_on_both_sides", equal}});

    MasterSecret ms = master_secret_from(tag_secret);
    DerivedKeySet keys = derive_keyset(ms);
    smarttag::PrivacyConfig config;
    config.pid_key = keys.pid_key;
    config.sign_key = keys.sign_key;
    config.privacy_id_seed = reg.privacy_id_seed;
    config.privacy_id_iv = reg.privacy_id_iv;
    config.pool_size = reg.pool_size;
    config.region_code = reg.region_code;

    transcript.log(now, account, "POST /miniature/mobile",
                   {{"device_id", reg.device_id},
                    {"pool_size", reg.pool_size},
                    {"region", reg.region_code}});
    tags.emplace_back(reg.device_id, config, Irk{random_bytes16(rng)}, where,
                      now);
    return tags.back();
  }

  Helper& add_helper(const std::string& name, GeoPoint where,
                     HelperOptions opts = {}) {
    helpers.emplace_back(name, where, "credential-" + name, fresh_android_id(),
                         opts);
    return helpers.back();
  }

  void helper_pass(Helper& helper, Seconds t) {
    helper.scan_step(radio_scan(helper.position, t), t);
    helper.report_step(server, t, &transcript);
  }
};

struct Checker {
  std::vector<std::pair<std::string, bool>>& out;
  void check(const std::string& name, bool pass) { out.emplace_back(name, pass); }
};

bool payload_in_device_pool(const DeviceProfile& profile, BytesView payload) {
  if (profile.kind == DeviceProfile::Kind::Fmm && payload.size() == 14) {
    std::array<std::uint8_t, 12> id{};
    std::copy(payload.begin() + 1, payload.begin() + 13, id.begin());
    for (const fmm::PrivateId& pid :
         fmm::generate_pool(*profile.fmm_config, profile.device_id).ids)
      if (pid.bytes == id) return true;
    return false;
  }
  if (profile.kind == DeviceProfile::Kind::SmartTag && payload.size() == 20) {
    smarttag::PrivacyIdPrefix prefix{};
    std::copy(payload.begin() + 4, payload.begin() + 12, prefix.begin());
    smarttag::PrivacyPool pool = smarttag::privacy_pool(*profile.tag_config);
    for (std::size_t i = 0; i < pool.ids.size(); ++i)
      if (pool.prefix(i) == prefix) return true;
    return false;
  }
  return false;
}

// post-run store sweep: attribution conservation plus token lifecycle
void sweep_server_store(World& world, Checker& checker) {
  bool conserved = true;
  bool tokens_ok = true;
  std::size_t total = 0;
  for (const auto& [device_id, reports] : world.server.report_store()) {
    auto profile = world.server.profiles().find(device_id);
    for (const StoredReport& r : reports) {
      ++total;
      if (profile == world.server.profiles().end() ||
          !payload_in_device_pool(profile->second, r.payload))
        conserved = false;
      if (r.token_issued_at > r.reported_at ||
          r.reported_at - r.token_issued_at >= AccessToken::kValiditySeconds)
        tokens_ok = false;
    }
  }
  if (total != world.server.accepted_count()) conserved = false;
  checker.check("store sweep: every report attributed to a pool member",
                conserved);
  checker.check("store sweep: no report stored on an expired token", tokens_ok);
}

void finish(ScenarioResult& result, World& world, Checker& checker) {
  sweep_server_store(world, checker);
  result.transcript = world.transcript.to_json_lines();
  std::ostringstream log;
  write_scan_log(log, world.scan_log);
  result.scan_log = log.str();
}

// ---------------------------------------------------------------------------

ScenarioResult scenario_lost_and_found(std::uint64_t seed,
                                       const nlohmann::json&) {
  ScenarioResult result;
  result.name = "lost_and_found";
  result.seed = seed;
  Checker checker{result.assertions};
  World world(seed);

  GeoPoint park{48.2082, 16.3738};
  bool secrets_equal = false;
  SimTag& tag =
      world.register_tag_full("alice", "sn-hash-1", park, kT0, &secrets_equal);
  checker.check("owner and tag derive the same shared secret", secrets_equal);

  Helper& helper = world.add_helper("helper-1", park);

  tag.apply(smarttag::EvDisconnected{}, kT0);
  world.transcript.log(kT0, tag.device_id(), "disconnected", {});

  for (int step = 1; step <= 8; ++step)
    world.clock.schedule_at(kT0 + step * 900, [&world, &tag] {
      tag.refresh(world.clock.now(), world.rng);
    });
  for (int pass = 1; pass <= 24; ++pass)
    world.clock.schedule_at(kT0 + pass * 300 + 5, [&world, &helper] {
      world.helper_pass(helper, world.clock.now());
    });
  world.clock.run_until(kT0 + 7200);

  auto reports = world.server.query_locations(OwnerToken{"alice"},
                                              tag.device_id(), 0,
                                              kT0 + 7200, 200);
  checker.check("helper reports reach the server", !reports.empty());
  bool at_helper = !reports.empty() &&
                   reports.back().latitude == park.lat &&
                   reports.back().longitude == park.lon;
  checker.check("owner query returns the helper-observed coordinates",
                at_helper);
  world.transcript.log(kT0 + 7200, "alice", "GET /geolocations/{deviceId}",
                       {{"count", reports.size()}});

  finish(result, world, checker);
  return result;
}

ScenarioResult scenario_replay_attack(std::uint64_t seed,
                                      const nlohmann::json&) {
  // always runs against the default (permissive) server, which is the
  // behavior this scenario reproduces
  ScenarioResult result;
  result.name = "replay_attack";
  result.seed = seed;
  Checker checker{result.assertions};
  World world(seed);

  GeoPoint city_a{48.8566, 2.3522};
  GeoPoint city_b{35.6895, 139.6917};

  fmm::PrivateIdConfig cfg = world.server.register_fmm("bob", "phone-1");
  world.phones.emplace_back("phone-1", cfg, 0x25, Irk{random_bytes16(world.rng)},
                            city_a);
  FmmDevice& phone = world.phones.back();
  phone.rotate(world.rng);
  world.transcript.log(kT0, "phone-1", "entered lost mode", {});

  Helper& helper_a = world.add_helper("helper-a", city_a);
  Helper& helper_b = world.add_helper("helper-b", city_b);

  // a genuine report from the device's real location
  world.clock.schedule_at(kT0 + 60, [&] { world.helper_pass(helper_a, world.clock.now()); });

  // the attacker records the advertisement near the victim...
  Bytes captured;
  world.clock.schedule_at(kT0 + 120, [&] {
    auto heard = world.radio_scan(city_a, world.clock.now());
    for (const ScanRecord& r : heard)
      if (r.service_uuid == kUuidFmmOffline) captured = r.payload;
    world.transcript.log(world.clock.now(), "attacker", "captured advertisement",
                         {{"payload_hex", to_hex(captured)}});
  });

  // ...and replays it verbatim from another city
  world.clock.schedule_at(kT0 + 600, [&] {
    world.emitters.push_back(ReplayEmitter{
        captured, kUuidFmmOffline,
        Mac48{{0xc0, 0x01, 0x02, 0x03, 0x04, 0x05}}, city_b, true});
    world.transcript.log(world.clock.now(), "attacker", "replaying advertisement",
                         {{"at", "city-b"}});
  });
  world.clock.schedule_at(kT0 + 660, [&] { world.helper_pass(helper_b, world.clock.now()); });
  world.clock.run_until(kT0 + 900);

  auto reports = world.server.query_locations(OwnerToken{"bob"}, "phone-1", 0,
                                              kT0 + 900, 200);
  bool genuine = !reports.empty() && reports.front().latitude == city_a.lat;
  checker.check("genuine report accepted", genuine);

  bool spoof_accepted =
      reports.size() == 2 && reports.back().latitude == city_b.lat &&
      reports.back().longitude == city_b.lon;
  checker.check("spoofed report ACCEPTED", spoof_accepted);
  checker.check("owner sees the attacker-chosen city last", spoof_accepted);
  world.transcript.log(kT0 + 900, "server", "replay outcome",
                       {{"spoofed_report", spoof_accepted ? "ACCEPTED" : "REJECTED"}});

  finish(result, world, checker);
  return result;
}

ScenarioResult scenario_fake_location(std::uint64_t seed,
                                      const nlohmann::json&) {
  ScenarioResult result;
  result.name = "fake_location";
  result.seed = seed;
  Checker checker{result.assertions};
  World world(seed);

  GeoPoint berlin{52.5200, 13.4050};
  GeoPoint spoofed{1.2903, 103.8520};

  SimTag& tag = world.register_tag_full("carol", "sn-hash-2", berlin, kT0);
  Helper& mitm = world.add_helper("malicious-helper", berlin);
  mitm.spoof_location = spoofed;  // Burp-style tamper of the report body

  tag.apply(smarttag::EvDisconnected{}, kT0);
  world.clock.schedule_at(kT0 + 900, [&] { tag.refresh(world.clock.now(), world.rng); });
  world.clock.schedule_at(kT0 + 910, [&] { world.helper_pass(mitm, world.clock.now()); });
  world.clock.run_until(kT0 + 1000);

  auto reports = world.server.query_locations(OwnerToken{"carol"},
                                              tag.device_id(), 0, kT0 + 1000,
                                              200);
  bool tampered = !reports.empty() && reports.back().latitude == spoofed.lat &&
                  reports.back().longitude == spoofed.lon;
  checker.check("tampered report accepted by the server", tampered);
  checker.check("owner sees the fake coordinates", tampered);

  finish(result, world, checker);
  return result;
}

ScenarioResult scenario_distant_duplicate(std::uint64_t seed,
                                          const nlohmann::json&) {
  ScenarioResult result;
  result.name = "distant_duplicate";
  result.seed = seed;
  Checker checker{result.assertions};

  // the same script runs against a default server and a strict one
  auto run = [&](bool strict) {
    ServerOptions opts;
    opts.strict_ingest = strict;
    World world(seed, opts);

    GeoPoint site_a{40.0, 10.0};
    GeoPoint site_b{49.0, 10.0};  // ~1000 km north

    SimTag& tag = world.register_tag_full("dave", "sn-hash-3", site_a, kT0);
    Helper& helper_a = world.add_helper("helper-a", site_a);
    Helper& helper_b = world.add_helper("helper-b", site_b);

    tag.apply(smarttag::EvDisconnected{}, kT0);
    world.clock.schedule_at(kT0 + 900, [&] { tag.refresh(world.clock.now(), world.rng); });

    std::vector<IngestOutcome> first, second;
    world.clock.schedule_at(kT0 + 910, [&] {
      helper_a.scan_step(world.radio_scan(site_a, world.clock.now()), world.clock.now());
      first = helper_a.report_step(world.server, world.clock.now(), &world.transcript);
    });
    // colluding relays: the same payload surfaces 1000 km away 10 s later
    world.clock.schedule_at(kT0 + 915, [&] {
      world.emitters.push_back(ReplayEmitter{
          tag.advertisement(world.clock.now()).payload, kUuidTagOffline,
          Mac48{{0xc0, 0xff, 0xee, 0x00, 0x00, 0x01}}, site_b, true});
    });
    world.clock.schedule_at(kT0 + 920, [&] {
      helper_b.scan_step(world.radio_scan(site_b, world.clock.now()), world.clock.now());
      second = helper_b.report_step(world.server, world.clock.now(), &world.transcript);
    });
    world.clock.run_until(kT0 + 1000);

    bool first_ok = first.size() == 1 && first[0].accepted();
    bool second_ok = second.size() == 1 && second[0].accepted();
    bool second_implausible =
        second.size() == 1 &&
        second[0].status == IngestOutcome::Status::RejectedImplausible;
    if (!strict) {
      checker.check("default mode: first report accepted", first_ok);
      checker.check("default mode: impossible duplicate also ACCEPTED", second_ok);
    } else {
      checker.check("strict mode: first report accepted", first_ok);
      checker.check("strict mode: second report REJECTED", second_implausible);
    }
    sweep_server_store(world, checker);
    result.transcript += world.transcript.to_json_lines();
  };

  run(false);
  run(true);
  return result;
}

ScenarioResult scenario_pool_harvest(std::uint64_t seed,
                                     const nlohmann::json& params) {
  ScenarioResult result;
  result.name = "pool_harvest";
  result.seed = seed;
  Checker checker{result.assertions};
  World world(seed);

  int rotations = params.value("rotations", 2000);
  Seconds period = params.value("rotation_period_s", 3600);

  GeoPoint cafe{51.5074, -0.1278};
  fmm::PrivateIdConfig cfg = world.server.register_fmm("eve", "phone-2");
  world.phones.emplace_back("phone-2", cfg, 0x31, Irk{random_bytes16(world.rng)},
                            cafe);
  FmmDevice& phone = world.phones.back();
  world.transcript.log(kT0, "phone-2", "entered lost mode",
                       {{"rotation_period_s", period}});

  // a passive observer captures every rotation into the scan log
  for (int i = 0; i < rotations; ++i)
    world.clock.schedule_at(kT0 + i * period, [&world, &phone] {
      phone.rotate(world.rng);
      world.radio_scan(phone.position, world.clock.now());
    });
  world.clock.run_until(kT0 + rotations * period);

  std::set<std::string> observed;
  bool all_from_pool = true;
  std::set<std::string> pool_ids;
  for (const fmm::PrivateId& id : phone.pool().ids)
    pool_ids.insert(to_hex(id.bytes));
  for (const ScanRecord& r : world.scan_log) {
    if (r.service_uuid != kUuidFmmOffline) continue;
    std::string id = to_hex(BytesView(r.payload).subspan(1, 12));
    observed.insert(id);
    if (!pool_ids.contains(id)) all_from_pool = false;
  }
  checker.check("every broadcast id belongs to the generated pool",
                all_from_pool);
  checker.check("all 51 private ids harvested", observed.size() == 51);
  world.transcript.log(world.clock.now(), "observer", "harvest complete",
                       {{"distinct_ids", observed.size()}});

  result.artifacts["config"] = nlohmann::json::parse(cfg.to_json());
  result.artifacts["device_id"] = phone.device_id();
  result.artifacts["pool_hex"] = nlohmann::json::array();
  for (const auto& id : pool_ids) result.artifacts["pool_hex"].push_back(id);

  finish(result, world, checker);
  return result;
}

ScenarioResult scenario_linkage_32h(std::uint64_t seed, const nlohmann::json&) {
  ScenarioResult result;
  result.name = "linkage_32h";
  result.seed = seed;
  Checker checker{result.assertions};
  World world(seed);

  GeoPoint station{59.3293, 18.0686};
  SimTag& tag = world.register_tag_full("frank", "sn-hash-4", station, kT0);
  Helper& helper = world.add_helper("helper-1", station);

  tag.apply(smarttag::EvDisconnected{}, kT0);

  // hourly sightings for 34 hours
  for (int hour = 0; hour <= 33; ++hour) {
    Seconds t = kT0 + 900 + hour * 3600;
    world.clock.schedule_at(t, [&world, &tag] { tag.refresh(world.clock.now(), world.rng); });
    world.clock.schedule_at(t + 1, [&world, &helper] {
      world.helper_pass(helper, world.clock.now());
    });
  }
  world.clock.run_until(kT0 + 900 + 34 * 3600);

  auto reports = world.server.query_locations(OwnerToken{"frank"},
                                              tag.device_id(), 0,
                                              world.clock.now(), 200);
  checker.check("one report per sighting", reports.size() == 34);

  bool one_subject_in_window = !reports.empty();
  std::string first_token = reports.empty() ? "" : reports.front().token_value;
  Seconds first_issue = reports.empty() ? 0 : reports.front().token_issued_at;
  std::vector<const StoredReport*> in_window, after_window;
  for (const StoredReport& r : reports) {
    if (r.reported_at - first_issue < AccessToken::kValiditySeconds) {
      in_window.push_back(&r);
      if (r.token_value != first_token) one_subject_in_window = false;
    } else {
      after_window.push_back(&r);
    }
  }
  checker.check("all reports within 32 hours carry one token", one_subject_in_window);

  bool refreshed = !after_window.empty();
  bool same_subject = refreshed;
  bool same_reporter = true;
  for (const StoredReport* r : after_window) {
    if (r->token_value == first_token) refreshed = false;
    if (r->token_subject != reports.front().token_subject) same_subject = false;
  }
  for (const StoredReport& r : reports)
    if (r.reporter_id != helper.reporter_id()) same_reporter = false;
  checker.check("the 33rd-hour report required a fresh token", refreshed);
  checker.check("fresh token keeps the same subject (same credential)",
                same_subject);
  checker.check("reporterId links reports across both tokens", same_reporter);

  world.transcript.log(world.clock.now(), "server", "linkage summary",
                       {{"reports", reports.size()},
                        {"reports_on_first_token", in_window.size()},
                        {"reports_on_fresh_token", after_window.size()}});

  finish(result, world, checker);
  return result;
}

}  // namespace

bool ScenarioResult::ok() const {
  for (const auto& [name, pass] : assertions)
    if (!pass) return false;
  return true;
}

std::string ScenarioResult::summary() const {
  std::string out;
  for (const auto& [name, pass] : assertions) {
    out += pass ? "PASS  " : "FAIL  ";
    out += name;
    out += '\n';
  }
  return out;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> kNames = {
      "lost_and_found",  "replay_attack", "fake_location",
      "distant_duplicate", "pool_harvest",  "linkage_32h"};
  return kNames;
}

ScenarioResult run_scenario(const std::string& name, std::uint64_t seed,
                            const nlohmann::json& params) {
  if (name == "lost_and_found") return scenario_lost_and_found(seed, params);
  if (name == "replay_attack") return scenario_replay_attack(seed, params);
  if (name == "fake_location") return scenario_fake_location(seed, params);
  if (name == "distant_duplicate")
    return scenario_distant_duplicate(seed, params);
  if (name == "pool_harvest") return scenario_pool_harvest(seed, params);
  if (name == "linkage_32h") return scenario_linkage_32h(seed, params);
  throw UnknownScenario(name);
}

}  // namespace ofkit::sim
