#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ofkit/rpa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code;
  std::string output;  // stdout only
};

RunResult run_cli(const std::string& args) {
  fs::path out_file = fs::temp_directory_path() / "ofkit_cli_out.txt";
  std::string cmd = std::string(OFKIT_CLI_PATH) + " " + args + " > " +
                    out_file.string() + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::ostringstream ss;
  ss << in.rdbuf();
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return RunResult{code, ss.str()};
}

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kFmmConfig =
    R"({"secret_key_hex":"11111111111111111111111111111111",
        "iv_b64":"+IABCfvBZHJYFUek8vp3Gg==","pool_size":51})";

const char* kTagConfig =
    R"({"pid_key_hex":"22222222222222222222222222222222",
        "sign_key_hex":"aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa",
        "seed_hex":"3333333333333333",
        "iv_hex":"00000000000000000000000000000000",
        "pool_size":1000,"region":12})";

}  // namespace

TEST_CASE("genpool writes 51 fmm ids and 1000 smarttag ids") {
  fs::path fmm_cfg = write_temp("fmm_cfg.json", kFmmConfig);
  fs::path tag_cfg = write_temp("tag_cfg.json", kTagConfig);
  fs::path fmm_pool = fs::temp_directory_path() / "fmm_pool.json";
  fs::path tag_pool = fs::temp_directory_path() / "tag_pool.json";

  RunResult fmm = run_cli("genpool --kind fmm --config " + fmm_cfg.string() +
                          " --out " + fmm_pool.string());
  CHECK(fmm.exit_code == 0);
  json fmm_ids = json::parse(slurp(fmm_pool));
  CHECK(fmm_ids.size() == 51);
  // the frozen oracle value for index 1 leads the pool
  CHECK(fmm_ids[0].get<std::string>() == "f0c2a282b53d9bf7f1cf0d9d");

  RunResult tag = run_cli("genpool --kind smarttag --config " +
                          tag_cfg.string() + " --out " + tag_pool.string());
  CHECK(tag.exit_code == 0);
  json tag_ids = json::parse(slurp(tag_pool));
  CHECK(tag_ids.size() == 1000);
  CHECK(tag_ids[300].get<std::string>() == "ed085b405725d6d627db875e7cc6a0f8");
}

TEST_CASE("genpool fails cleanly on malformed configs") {
  fs::path bad = write_temp("bad_cfg.json", R"({"iv_b64":"AAAA"})");
  CHECK(run_cli("genpool --kind fmm --config " + bad.string()).exit_code == 2);
  CHECK(run_cli("genpool --kind fmm --config /no/such/file").exit_code == 2);
}

TEST_CASE("adv decode prints the documented fields of the fixture payload") {
  RunResult r = run_cli(
      "adv decode --kind smarttag --hex "
      "156bfa00c84062b28f00e260c3000000ad018b47");
  REQUIRE(r.exit_code == 0);
  json fields = json::parse(r.output);
  CHECK(fields["version"] == 1);
  CHECK(fields["adv_type"] == 0);
  CHECK(fields["state"] == 5);
  CHECK(fields["aging_counter"] == 0x00fa6b);
  CHECK(fields["privacy_id_prefix_hex"] == "c84062b28f00e260");
  CHECK(fields["region_id"] == 0x0c);
  CHECK(fields["battery_level"] == 3);
  CHECK(fields["signature_hex"] == "ad018b47");
}

TEST_CASE("adv encode/decode are mutually inverse through the CLI") {
  RunResult decoded = run_cli(
      "adv decode --kind fmm --hex 00abababababababababababab42");
  REQUIRE(decoded.exit_code == 0);
  fs::path fields = write_temp("fmm_fields.json", decoded.output);
  RunResult encoded =
      run_cli("adv encode --kind fmm --fields \"$(cat " + fields.string() + ")\"");
  REQUIRE(encoded.exit_code == 0);
  CHECK(encoded.output == "00abababababababababababab42\n");
}

TEST_CASE("adv verify distinguishes ok from bad-signature") {
  fs::path tag_cfg = write_temp("tag_cfg2.json", kTagConfig);

  // build a genuine advertisement for pool index 300 via encode
  json fields;
  fields["state"] = 2;
  fields["aging_counter"] = 73724;  // interval for server time 1660000000
  fields["privacy_id_prefix_hex"] = "ed085b405725d6d6";
  fields["region_id"] = 12;
  fields["battery_level"] = 3;
  fs::path fields_path = write_temp("tag_fields.json", fields.dump());
  RunResult encoded = run_cli("adv encode --kind smarttag --config " +
                              tag_cfg.string() + " --fields \"$(cat " +
                              fields_path.string() + ")\"");
  REQUIRE(encoded.exit_code == 0);
  std::string hex = encoded.output.substr(0, encoded.output.size() - 1);

  RunResult ok = run_cli("adv verify --hex " + hex + " --config " +
                         tag_cfg.string() + " --server-time 1660000000");
  CHECK(ok.exit_code == 0);
  CHECK(ok.output == "ok\n");

  // flip one payload nibble
  std::string corrupted = hex;
  corrupted[2] = corrupted[2] == '0' ? '1' : '0';
  RunResult bad = run_cli("adv verify --hex " + corrupted + " --config " +
                          tag_cfg.string() + " --server-time 1660000000");
  CHECK(bad.exit_code == 1);
  CHECK(bad.output == "bad-signature\n");
}

TEST_CASE("simulate prints the assertion summary and honors exit codes") {
  fs::path transcript = fs::temp_directory_path() / "replay_transcript.jsonl";
  RunResult r = run_cli("simulate replay_attack --seed 42 --out " +
                        transcript.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("spoofed report ACCEPTED") != std::string::npos);
  CHECK(r.output.find("FAIL") == std::string::npos);
  CHECK(!slurp(transcript).empty());

  CHECK(run_cli("simulate no_such_scenario --seed 1").exit_code == 2);
}

TEST_CASE("simulate is reproducible for a fixed seed") {
  fs::path t1 = fs::temp_directory_path() / "t1.jsonl";
  fs::path t2 = fs::temp_directory_path() / "t2.jsonl";
  CHECK(run_cli("simulate linkage_32h --seed 9 --out " + t1.string()).exit_code == 0);
  CHECK(run_cli("simulate linkage_32h --seed 9 --out " + t2.string()).exit_code == 0);
  std::string a = slurp(t1), b = slurp(t2);
  CHECK(!a.empty());
  CHECK(a == b);
}

TEST_CASE("simulate distant_duplicate asserts the strict-mode rejection") {
  RunResult r = run_cli("simulate distant_duplicate --seed 3 --strict");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("second report REJECTED") != std::string::npos);
}

TEST_CASE("simulate accepts a scenario file with name, seed and params") {
  fs::path file = write_temp("scenario.json",
                             R"({"name":"replay_attack","seed":42,
                                 "params":{}})");
  RunResult r = run_cli("simulate --file " + file.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("replay_attack (seed 42)") != std::string::npos);

  fs::path batch = write_temp("batch.json",
                              R"([{"name":"replay_attack","seed":1},
                                  {"name":"fake_location","seed":2}])");
  RunResult b = run_cli("simulate --file " + batch.string());
  CHECK(b.exit_code == 0);
  CHECK(b.output.find("replay_attack") != std::string::npos);
  CHECK(b.output.find("fake_location") != std::string::npos);
}

TEST_CASE("unreg advertisements roundtrip through the CLI") {
  RunResult encoded = run_cli(
      R"(adv encode --kind unreg --fields '{"mac_suffix":"3DD"}')");
  REQUIRE(encoded.exit_code == 0);
  CHECK(encoded.output == "0130414644343330010501334444\n");
  RunResult decoded =
      run_cli("adv decode --kind unreg --hex 0130414644343330010501334444");
  REQUIRE(decoded.exit_code == 0);
  json fields = json::parse(decoded.output);
  CHECK(fields["mn_id"] == "0AFD");
  CHECK(fields["setup_id"] == "430");
  CHECK(fields["mac_suffix"] == "3DD");
}

TEST_CASE("OFKIT_SEED env var seeds the run when --seed is absent") {
  fs::path t1 = fs::temp_directory_path() / "env1.jsonl";
  fs::path t2 = fs::temp_directory_path() / "env2.jsonl";
  std::string base = std::string(OFKIT_CLI_PATH) +
                     " simulate replay_attack --out %OUT% > /dev/null 2>&1";
  auto run_with_env = [&](const fs::path& out) {
    std::string cmd = "OFKIT_SEED=777 " + base;
    cmd.replace(cmd.find("%OUT%"), 5, out.string());
    return std::system(cmd.c_str());
  };
  CHECK(run_with_env(t1) == 0);
  CHECK(run_with_env(t2) == 0);
  CHECK(slurp(t1) == slurp(t2));
}

TEST_CASE("detect recovers the harvested pool and flags a planted tracker") {
  // produce the scan log and the reference pool with the same seed
  fs::path log = fs::temp_directory_path() / "harvest.jsonl";
  RunResult sim = run_cli("simulate pool_harvest --seed 11 --scan-log " +
                          log.string());
  REQUIRE(sim.exit_code == 0);

  RunResult harvest = run_cli("detect " + log.string() + " --harvest");
  REQUIRE(harvest.exit_code == 0);
  json candidates = json::parse(harvest.output);
  REQUIRE(candidates.size() == 1);
  CHECK(candidates[0]["complete"] == true);
  CHECK(candidates[0]["distinct_ids"] == 51);

  // the same log spans far beyond the following window at hourly sightings
  RunResult follow = run_cli("detect " + log.string());
  REQUIRE(follow.exit_code == 0);
  json hyps = json::parse(follow.output);
  CHECK(!hyps.empty());
}

TEST_CASE("detect resolves RPAs when given an IRK") {
  // 13 hourly sightings on rotating addresses, all resolvable under one IRK
  std::string irk_hex = "000102030405060708090a0b0c0d0e0f";
  fs::path log = write_temp("irk_log.jsonl", "");
  {
    std::ofstream out(log);
    ofkit::Irk irk = ofkit::Irk::from_hex(irk_hex);
    for (int h = 0; h <= 12; ++h) {
      ofkit::Prand prand{static_cast<std::uint8_t>(h), 0x22, 0x33};
      ofkit::Mac48 mac = ofkit::rpa_generate(irk, prand);
      out << "{\"t\":" << (1660000000 + h * 3600) << ",\"mac_hex\":\""
          << mac.hex()
          << "\",\"service_uuid\":\"fd5a\",\"payload_hex\":\""
          << std::string(40, '0') << "\"}\n";
    }
  }
  RunResult r = run_cli("detect " + log.string() + " --irk " + irk_hex);
  REQUIRE(r.exit_code == 0);
  json hyps = json::parse(r.output);
  REQUIRE(hyps.size() == 1);
  CHECK(hyps[0]["evidence"] == "resolved-irk");
  CHECK(hyps[0]["record_count"] == 13);
}

TEST_CASE("detect skips malformed lines and fails on unreadable files") {
  fs::path log = write_temp(
      "mixed.jsonl",
      R"({"t":1660000000,"mac_hex":"001122334455","service_uuid":"fd69","payload_hex":"00abababababababababababab42"}
this line is not json
{"t":1660000400,"mac_hex":"001122334455","service_uuid":"fd69","payload_hex":"00abababababababababababab42"}
)");
  RunResult r = run_cli("detect " + log.string());
  CHECK(r.exit_code == 0);
  json hyps = json::parse(r.output);
  CHECK(hyps.is_array());

  CHECK(run_cli("detect /no/such/log.jsonl").exit_code == 2);
}

TEST_CASE("detect on an empty log prints an empty hypothesis list") {
  fs::path log = write_temp("empty.jsonl", "");
  RunResult r = run_cli("detect " + log.string());
  CHECK(r.exit_code == 0);
  CHECK(json::parse(r.output).empty());
}
