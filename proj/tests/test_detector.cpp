#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "ofkit/detector.hpp"
#include "ofkit/scenario.hpp"

using namespace ofkit;
using namespace ofkit::detect;

namespace {

constexpr std::uint64_t kT0 = 1660000000;

ScanRecord record_of(std::uint64_t t, std::uint16_t uuid, std::size_t payload_len,
                     Mac48 mac = Mac48{}) {
  return ScanRecord{t, mac, uuid, Bytes(payload_len, 0x11), std::nullopt};
}

ScanRecord fmm_sighting(std::uint64_t t, const std::array<std::uint8_t, 12>& id,
                        std::uint8_t flags, Mac48 mac = Mac48{}) {
  fmm::Advertisement adv;
  adv.private_id = id;
  adv.flags = flags;
  return ScanRecord{t, mac, kUuidFmmOffline, fmm::encode_adv(adv), std::nullopt};
}

smarttag::PrivacyConfig random_tag_config(std::mt19937_64& rng) {
  smarttag::PrivacyConfig cfg;
  for (auto& b : cfg.pid_key.bytes) b = static_cast<std::uint8_t>(rng());
  for (auto& b : cfg.sign_key.bytes) b = static_cast<std::uint8_t>(rng());
  for (auto& b : cfg.privacy_id_seed) b = static_cast<std::uint8_t>(rng());
  for (auto& b : cfg.privacy_id_iv.bytes) b = static_cast<std::uint8_t>(rng());
  return cfg;
}

ScanRecord tag_sighting(std::uint64_t t, const smarttag::PrivacyConfig& cfg,
                        const smarttag::PrivacyPool& pool, std::size_t index,
                        std::uint8_t state, Mac48 mac = Mac48{}) {
  smarttag::Advertisement adv;
  adv.state = state;
  adv.aging_counter = smarttag::aging_counter(t).value;
  adv.privacy_id_prefix = pool.prefix(index);
  adv.region_id = cfg.region_code;
  adv.battery_level = 3;
  return ScanRecord{t, mac, kUuidTagOffline, smarttag::encode_adv(adv, cfg),
                    std::nullopt};
}

}  // namespace

TEST_CASE("classification is by uuid and payload shape") {
  CHECK(classify(record_of(kT0, kUuidFmmOffline, 14)) == AdvClass::FmmLost);
  CHECK(classify(record_of(kT0, kUuidTagOffline, 20)) ==
        AdvClass::SmartTagRegistered);
  CHECK(classify(record_of(kT0, kUuidOnboarding, 14)) ==
        AdvClass::SmartTagUnregistered);
  CHECK(classify(record_of(kT0, kUuidDfu, 0)) == AdvClass::DfuMode);
  CHECK(classify(record_of(kT0, 0x180F, 14)) == AdvClass::Other);
  // shape mismatches fall through
  CHECK(classify(record_of(kT0, kUuidFmmOffline, 20)) == AdvClass::Other);
  CHECK(classify(record_of(kT0, kUuidTagOffline, 14)) == AdvClass::Other);
  CHECK(adv_class_name(AdvClass::FmmLost) == "fmm-lost");
}

TEST_CASE("harvest groups by flags byte and never mixes groups") {
  std::mt19937_64 rng(501);
  fmm::PrivateIdConfig cfg_a, cfg_b;
  for (auto& b : cfg_a.secret_key.bytes) b = static_cast<std::uint8_t>(rng());
  for (auto& b : cfg_b.secret_key.bytes) b = static_cast<std::uint8_t>(rng());
  fmm::Pool pool_a = fmm::generate_pool(cfg_a, "a");
  fmm::Pool pool_b = fmm::generate_pool(cfg_b, "b");

  std::vector<ScanRecord> records;
  for (int i = 0; i < 300; ++i) {
    int idx = std::uniform_int_distribution<int>(0, 50)(rng);
    records.push_back(fmm_sighting(kT0 + i * 60, pool_a.ids[idx].bytes, 0x21));
    records.push_back(fmm_sighting(kT0 + i * 60, pool_b.ids[idx].bytes, 0x31));
  }

  auto candidates = harvest_fmm_pools(records);
  REQUIRE(candidates.size() == 2);
  std::set<Bytes> a_ids, b_ids;
  for (const auto& id : pool_a.ids) a_ids.insert(Bytes(id.bytes.begin(), id.bytes.end()));
  for (const auto& id : pool_b.ids) b_ids.insert(Bytes(id.bytes.begin(), id.bytes.end()));
  for (const auto& cand : candidates) {
    const auto& own = cand.flags == 0x21 ? a_ids : b_ids;
    for (const auto& id : cand.ids)
      CHECK(own.contains(Bytes(id.begin(), id.end())));
  }

  CHECK(harvest_fmm_pools({}).empty());
}

TEST_CASE("harvest recovers the complete pool from the scenario log") {
  auto result = sim::run_scenario("pool_harvest", 77);
  REQUIRE(result.ok());

  std::istringstream log_stream(result.scan_log);
  std::vector<ScanRecord> records = read_scan_log(log_stream);
  auto candidates = harvest_fmm_pools(records);
  REQUIRE(candidates.size() == 1);
  CHECK(candidates[0].complete());
  CHECK(candidates[0].ids.size() == 51);

  std::set<std::string> recovered;
  for (const auto& id : candidates[0].ids) recovered.insert(to_hex(id));
  std::set<std::string> expected;
  for (const auto& hex : result.artifacts["pool_hex"])
    expected.insert(hex.get<std::string>());
  CHECK(recovered == expected);
}

TEST_CASE("match_known_pool membership, misses and ambiguity") {
  std::mt19937_64 rng(503);
  fmm::PrivateIdConfig cfg;
  for (auto& b : cfg.secret_key.bytes) b = static_cast<std::uint8_t>(rng());
  fmm::Pool pool = fmm::generate_pool(cfg, "victim");
  PoolIndex index;
  index.add(pool);

  smarttag::PrivacyConfig tag_cfg = random_tag_config(rng);
  smarttag::PrivacyPool tag_pool = smarttag::privacy_pool(tag_cfg);
  index.add_tag("tag-victim", tag_pool);

  CHECK(match_known_pool(fmm_sighting(kT0, pool.ids[9].bytes, 0x20), index) ==
        "victim");
  CHECK(match_known_pool(tag_sighting(kT0, tag_cfg, tag_pool, 42, 2), index) ==
        "tag-victim");

  int false_hits = 0;
  for (int i = 0; i < 10000; ++i) {
    std::array<std::uint8_t, 12> random_id;
    for (auto& b : random_id) b = static_cast<std::uint8_t>(rng());
    if (match_known_pool(fmm_sighting(kT0, random_id, 0x20), index)) ++false_hits;
  }
  CHECK(false_hits == 0);

  // the same pool registered under two device names is ambiguous
  fmm::Pool dup = pool;
  dup.device_id = "other";
  index.add(dup);
  CHECK_THROWS_AS(match_known_pool(fmm_sighting(kT0, pool.ids[9].bytes, 0x20),
                                   index),
                  fmm::AmbiguousMatch);
}

TEST_CASE("resolve_with_irk filters by address resolution") {
  std::mt19937_64 rng(509);
  Irk irk{random_bytes16(rng)};
  Irk wrong{random_bytes16(rng)};

  std::vector<ScanRecord> records;
  for (int i = 0; i < 200; ++i) {
    Prand prand{static_cast<std::uint8_t>(rng()),
                static_cast<std::uint8_t>(rng()),
                static_cast<std::uint8_t>(rng())};
    records.push_back(record_of(kT0 + i, kUuidTagOffline, 20,
                                rpa_generate(irk, prand)));
  }
  CHECK(resolve_with_irk(records, irk).size() == 200);
  CHECK(resolve_with_irk({}, irk).empty());

  int false_hits = 0;
  for (int i = 0; i < 100000; ++i) {
    Mac48 mac;
    for (auto& b : mac.bytes) b = static_cast<std::uint8_t>(rng());
    ScanRecord r = record_of(kT0, kUuidTagOffline, 20, mac);
    if (!resolve_with_irk(std::span(&r, 1), wrong).empty()) ++false_hits;
  }
  CHECK(false_hits <= 3);  // 10^5 * 2^-24 expected
}

TEST_CASE("dfu address arithmetic") {
  CHECK(dfu_identity(Mac48::from_hex("11:22:33:44:55:66")).address.display() ==
        "11:22:33:44:55:65");
  CHECK_FALSE(dfu_identity(Mac48::from_hex("11:22:33:44:55:66")).wrapped);

  // borrow ripples into byte 4
  CHECK(dfu_identity(Mac48::from_hex("11:22:33:44:55:00")).address.display() ==
        "11:22:33:44:54:ff");

  DfuIdentity wrapped = dfu_identity(Mac48::from_hex("00:00:00:00:00:00"));
  CHECK(wrapped.address.display() == "ff:ff:ff:ff:ff:ff");
  CHECK(wrapped.wrapped);
}

TEST_CASE("following detection thresholds") {
  std::mt19937_64 rng(521);
  smarttag::PrivacyConfig cfg = random_tag_config(rng);
  smarttag::PrivacyPool pool = smarttag::privacy_pool(cfg);

  // an overmature tag: one prefix, hourly sightings for 24 h
  std::vector<ScanRecord> records;
  for (int h = 0; h <= 24; ++h)
    records.push_back(tag_sighting(kT0 + h * 3600, cfg, pool, 7, 3));
  auto hyps = detect_following(records);
  REQUIRE(hyps.size() == 1);
  CHECK(hyps[0].evidence == "persistence");
  CHECK(hyps[0].record_count == 25);
  CHECK(hyps[0].last_seen - hyps[0].first_seen == 24 * 3600);

  // two sightings five minutes apart do not trip the default window
  std::vector<ScanRecord> brief = {
      tag_sighting(kT0, cfg, pool, 7, 3),
      tag_sighting(kT0 + 300, cfg, pool, 7, 3),
  };
  CHECK(detect_following(brief).empty());

  CHECK(detect_following({}).empty());
}

TEST_CASE("rotating offline tag is chained by counter continuity") {
  std::mt19937_64 rng(523);
  smarttag::PrivacyConfig cfg = random_tag_config(rng);
  smarttag::PrivacyPool pool = smarttag::privacy_pool(cfg);

  // a lost tag rotating its prefix every 15 minutes for 10 hours
  std::vector<ScanRecord> records;
  for (int step = 0; step < 40; ++step)
    records.push_back(
        tag_sighting(kT0 + step * 900, cfg, pool, 17 * step % 1000, 2));

  auto merged = detect_following(records);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].record_count == 40);

  FollowOptions no_merge;
  no_merge.merge_by_counter_continuity = false;
  CHECK(detect_following(records, no_merge).empty());
}

TEST_CASE("pool evidence outranks persistence for known devices") {
  std::mt19937_64 rng(541);
  fmm::PrivateIdConfig cfg;
  for (auto& b : cfg.secret_key.bytes) b = static_cast<std::uint8_t>(rng());
  fmm::Pool pool = fmm::generate_pool(cfg, "planted");
  PoolIndex index;
  index.add(pool);

  std::vector<ScanRecord> records;
  for (int h = 0; h <= 24; ++h) {
    int idx = std::uniform_int_distribution<int>(0, 50)(rng);
    records.push_back(fmm_sighting(kT0 + h * 3600, pool.ids[idx].bytes, 0x42));
  }

  FollowOptions with_pools;
  with_pools.pools = &index;
  auto hyps = detect_following(records, with_pools);
  REQUIRE(hyps.size() == 1);
  CHECK(hyps[0].evidence == "matched-pool");
  CHECK(hyps[0].cluster_id == "pool:planted");

  // without the pool, rotating fmm ids fragment below the sighting threshold
  CHECK(detect_following(records).empty());
}

TEST_CASE("irk evidence clusters resolvable addresses") {
  std::mt19937_64 rng(547);
  Irk irk{random_bytes16(rng)};
  std::vector<ScanRecord> records;
  for (int h = 0; h <= 12; ++h) {
    Prand prand{static_cast<std::uint8_t>(rng()),
                static_cast<std::uint8_t>(rng()),
                static_cast<std::uint8_t>(rng())};
    records.push_back(record_of(kT0 + h * 3600, kUuidTagOffline, 20,
                                rpa_generate(irk, prand)));
  }
  FollowOptions with_irk;
  with_irk.irk = irk;
  auto hyps = detect_following(records, with_irk);
  REQUIRE(hyps.size() == 1);
  CHECK(hyps[0].evidence == "resolved-irk");
  CHECK(hyps[0].record_count == 13);
}

TEST_CASE("hypotheses serialize to json") {
  TrackerHypothesis h;
  h.cluster_id = "prefix:aabb";
  h.evidence = "persistence";
  h.first_seen = 1;
  h.last_seen = 2;
  h.record_count = 3;
  std::string json_text = hypotheses_to_json({h});
  CHECK(json_text.find("prefix:aabb") != std::string::npos);
  CHECK(json_text.find("persistence") != std::string::npos);
}
