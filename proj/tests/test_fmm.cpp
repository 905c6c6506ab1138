#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "ofkit/fmm.hpp"

using namespace ofkit;
using namespace ofkit::fmm;

namespace {

SecretKey16 random_secret(std::mt19937_64& rng) {
  SecretKey16 k;
  for (auto& b : k.bytes) b = static_cast<std::uint8_t>(rng());
  return k;
}

}  // namespace

TEST_CASE("standard IV decodes to the published constant") {
  CHECK(standard_iv().hex() == "f8800109fbc16472581547a4f2fa771a");
  CHECK(to_base64(standard_iv().bytes) == "+IABCfvBZHJYFUek8vp3Gg==");
}

TEST_CASE("private id pre-image layout") {
  SecretKey16 key = SecretKey16::from_hex("00112233445566778899aabbccddeeff");
  auto pre = private_id_preimage(key, 5);
  CHECK(pre[0] == 0x00);
  CHECK(pre[1] == 0x05);
  CHECK(Bytes(pre.begin() + 2, pre.begin() + 18) ==
        Bytes(key.bytes.begin(), key.bytes.end()));
  CHECK(pre[18] == 0x00);
  CHECK(pre[19] == 0x05);
  // high byte stays zero across the whole index range
  for (int i = 1; i <= 51; ++i) CHECK(private_id_preimage(key, i)[0] == 0x00);
}

TEST_CASE("private id fixed vector") {
  PrivateIdConfig cfg;
  cfg.secret_key = SecretKey16::from_hex("11111111111111111111111111111111");
  // frozen from an independent AES-CBC oracle
  CHECK(to_hex(private_id(cfg, 1).bytes) == "f0c2a282b53d9bf7f1cf0d9d");
  CHECK(to_hex(private_id(cfg, 5).bytes) == "f7ad9a7eebe5665277a9e777");
}

TEST_CASE("private id rejects out-of-range indices") {
  PrivateIdConfig cfg;
  CHECK_THROWS_AS(private_id(cfg, 0), std::out_of_range);
  CHECK_THROWS_AS(private_id(cfg, 52), std::out_of_range);
  CHECK_NOTHROW(private_id(cfg, 1));
  CHECK_NOTHROW(private_id(cfg, 51));
}

TEST_CASE("pool has 51 deterministic pairwise-distinct entries") {
  std::mt19937_64 rng(101);
  PrivateIdConfig cfg;
  cfg.secret_key = random_secret(rng);
  Pool pool = generate_pool(cfg, "device-a");
  CHECK(pool.ids.size() == 51);
  std::set<Bytes> distinct;
  for (const auto& id : pool.ids)
    distinct.insert(Bytes(id.bytes.begin(), id.bytes.end()));
  CHECK(distinct.size() == 51);

  Pool again = generate_pool(cfg, "device-a");
  for (std::size_t i = 0; i < 51; ++i)
    CHECK(pool.ids[i].bytes == again.ids[i].bytes);
}

TEST_CASE("private id ignores pre-image bytes 18-19") {
  // the id is cut from the first ciphertext block, which the trailing two
  // bytes cannot influence
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    PrivateIdConfig cfg;
    cfg.secret_key = random_secret(rng);
    int index = std::uniform_int_distribution<int>(1, 51)(rng);
    auto pre = private_id_preimage(cfg.secret_key, index);
    auto mutated = pre;
    mutated[18] ^= 0xff;
    mutated[19] ^= 0xa5;
    Bytes ct_a = aes_cbc_encrypt(cfg.secret_key.bytes, cfg.iv.bytes, pre);
    Bytes ct_b = aes_cbc_encrypt(cfg.secret_key.bytes, cfg.iv.bytes, mutated);
    CHECK(Bytes(ct_a.begin(), ct_a.begin() + 12) ==
          Bytes(ct_b.begin(), ct_b.begin() + 12));
  }
}

TEST_CASE("advertisement codec") {
  Advertisement adv;
  adv.op_mode = 0x00;
  adv.private_id.fill(0xab);
  adv.flags = 0x42;
  Bytes wire = encode_adv(adv);
  CHECK(to_hex(wire) == "00abababababababababababab42");
  CHECK(decode_adv(wire) == adv);

  CHECK_THROWS_AS(decode_adv(Bytes(13, 0)), CodecError);
  CHECK_THROWS_AS(decode_adv(Bytes(15, 0)), CodecError);
}

TEST_CASE("advertisement codec roundtrip on random payloads") {
  std::mt19937_64 rng(107);
  for (int i = 0; i < 1000; ++i) {
    Advertisement adv;
    adv.op_mode = static_cast<std::uint8_t>(rng());
    for (auto& b : adv.private_id) b = static_cast<std::uint8_t>(rng());
    adv.flags = static_cast<std::uint8_t>(rng());
    CHECK(decode_adv(encode_adv(adv)) == adv);
  }
}

TEST_CASE("match finds the generating pool and index") {
  std::mt19937_64 rng(109);
  std::vector<Pool> pools;
  std::vector<PrivateIdConfig> cfgs;
  for (int d = 0; d < 10; ++d) {
    PrivateIdConfig cfg;
    cfg.secret_key = random_secret(rng);
    cfgs.push_back(cfg);
    pools.push_back(generate_pool(cfg, "device-" + std::to_string(d)));
  }

  Advertisement adv;
  adv.private_id = private_id(cfgs[3], 7).bytes;
  auto hit = match(adv, pools);
  REQUIRE(hit.has_value());
  CHECK(hit->device_id == "device-3");
  CHECK(hit->index == 7);
}

TEST_CASE("match is empty for random ids and empty pool sets") {
  std::mt19937_64 rng(113);
  std::vector<Pool> pools;
  for (int d = 0; d < 10; ++d) {
    PrivateIdConfig cfg;
    cfg.secret_key = random_secret(rng);
    pools.push_back(generate_pool(cfg, "device-" + std::to_string(d)));
  }
  int hits = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Advertisement adv;
    for (auto& b : adv.private_id) b = static_cast<std::uint8_t>(rng());
    if (match(adv, pools).has_value()) ++hits;
  }
  CHECK(hits == 0);
  CHECK_FALSE(match(Advertisement{}, {}).has_value());
}

TEST_CASE("match reports ambiguity when two pools share an id") {
  std::mt19937_64 rng(127);
  PrivateIdConfig cfg;
  cfg.secret_key = random_secret(rng);
  Pool a = generate_pool(cfg, "device-a");
  Pool b = generate_pool(cfg, "device-b");  // same key, colliding pools
  Advertisement adv;
  adv.private_id = a.ids[4].bytes;
  CHECK_THROWS_AS(match(adv, {a, b}), AmbiguousMatch);
}

TEST_CASE("config json roundtrip") {
  PrivateIdConfig cfg;
  cfg.secret_key = SecretKey16::from_hex("0123456789abcdef0123456789abcdef");
  PrivateIdConfig back = PrivateIdConfig::from_json(cfg.to_json());
  CHECK(back.secret_key == cfg.secret_key);
  CHECK(back.iv == cfg.iv);
  CHECK(back.pool_size == 51);

  CHECK_THROWS(PrivateIdConfig::from_json("{\"iv_b64\": \"AAAA\"}"));
}
