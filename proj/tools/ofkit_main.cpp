// ofkit: generate pools, work with advertisements, run network scenarios,
// and scan logs for trackers.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ofkit/detector.hpp"
#include "ofkit/scenario.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerdict = 1;
constexpr int kExitUsage = 2;

std::uint64_t seed_or_env(std::uint64_t seed, bool seed_given) {
  if (seed_given) return seed;
  if (const char* env = std::getenv("OFKIT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring malformed OFKIT_SEED\n";
    }
  }
  return 1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int cmd_genpool(const std::string& kind, const std::string& config_path,
                const std::string& out_path) {
  json pool = json::array();
  if (kind == "fmm") {
    auto cfg = ofkit::fmm::PrivateIdConfig::from_json(read_file(config_path));
    for (const auto& id : ofkit::fmm::generate_pool(cfg, "device").ids)
      pool.push_back(ofkit::to_hex(id.bytes));
  } else {
    std::vector<std::string> warnings;
    auto cfg = ofkit::smarttag::PrivacyConfig::from_json(read_file(config_path),
                                                         &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& id : ofkit::smarttag::privacy_pool(cfg).ids)
      pool.push_back(ofkit::to_hex(id));
  }
  std::string text = pool.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_file(out_path, text);
  return kExitOk;
}

json fmm_adv_to_json(const ofkit::fmm::Advertisement& adv) {
  json j;
  j["op_mode"] = adv.op_mode;
  j["private_id_hex"] = ofkit::to_hex(adv.private_id);
  j["flags"] = adv.flags;
  return j;
}

json tag_adv_to_json(const ofkit::smarttag::Advertisement& adv) {
  json j;
  j["version"] = adv.version;
  j["adv_type"] = adv.adv_type;
  j["state"] = adv.state;
  j["state_name"] = std::string(ofkit::smarttag::state_name(adv.state));
  j["aging_counter"] = adv.aging_counter;
  j["privacy_id_prefix_hex"] = ofkit::to_hex(adv.privacy_id_prefix);
  j["region_id"] = adv.region_id;
  j["encryption_flag"] = adv.encryption_flag;
  j["uwb_flag"] = adv.uwb_flag;
  j["battery_level"] = adv.battery_level;
  j["reserved_hex"] = ofkit::to_hex(adv.reserved);
  j["signature_hex"] = ofkit::to_hex(adv.sig);
  return j;
}

int cmd_adv_decode(const std::string& kind, const std::string& hex) {
  ofkit::Bytes payload = ofkit::from_hex(hex);
  if (kind == "fmm") {
    std::cout << fmm_adv_to_json(ofkit::fmm::decode_adv(payload)).dump(2)
              << '\n';
  } else if (kind == "smarttag") {
    auto adv = ofkit::smarttag::decode_adv(payload);
    if (!ofkit::smarttag::state_code_known(adv.state))
      std::cerr << "warning: unknown tag state code "
                << static_cast<int>(adv.state) << '\n';
    std::cout << tag_adv_to_json(adv).dump(2) << '\n';
  } else {
    auto decoded = ofkit::smarttag::unreg_decode(payload);
    for (const auto& w : decoded.warnings) std::cerr << "warning: " << w << '\n';
    json j;
    j["mn_id"] = decoded.adv.mn_id;
    j["setup_id"] = decoded.adv.setup_id;
    j["mac_suffix"] = decoded.adv.mac_suffix;
    std::cout << j.dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_adv_encode(const std::string& kind, const std::string& fields_json,
                   const std::string& config_path) {
  json j = json::parse(fields_json);
  if (kind == "unreg") {
    ofkit::smarttag::UnregisteredAdvertisement adv;
    adv.mn_id = j.value("mn_id", "0AFD");
    adv.setup_id = j.value("setup_id", "430");
    adv.mac_suffix = j.at("mac_suffix").get<std::string>();
    std::cout << ofkit::to_hex(ofkit::smarttag::unreg_encode(adv)) << '\n';
    return kExitOk;
  }
  if (kind == "fmm") {
    ofkit::fmm::Advertisement adv;
    adv.op_mode = j.value("op_mode", 0);
    adv.private_id =
        ofkit::array_from_hex<12>(j.at("private_id_hex").get<std::string>());
    adv.flags = j.value("flags", 0);
    std::cout << ofkit::to_hex(ofkit::fmm::encode_adv(adv)) << '\n';
    return kExitOk;
  }
  ofkit::smarttag::Advertisement adv;
  adv.version = j.value("version", 1);
  adv.adv_type = j.value("adv_type", 0);
  adv.state = j.value("state", 2);
  adv.aging_counter = j.value("aging_counter", 0);
  adv.privacy_id_prefix = ofkit::array_from_hex<8>(
      j.at("privacy_id_prefix_hex").get<std::string>());
  adv.region_id = j.value("region_id", 0);
  adv.encryption_flag = j.value("encryption_flag", false);
  adv.uwb_flag = j.value("uwb_flag", false);
  adv.battery_level = j.value("battery_level", 0);
  if (j.contains("reserved_hex"))
    adv.reserved = ofkit::array_from_hex<3>(j.at("reserved_hex").get<std::string>());
  if (j.contains("signature_hex")) {
    adv.sig = ofkit::array_from_hex<4>(j.at("signature_hex").get<std::string>());
    std::cout << ofkit::to_hex(ofkit::smarttag::encode_adv_raw(adv)) << '\n';
    return kExitOk;
  }
  if (config_path.empty())
    throw std::runtime_error(
        "smarttag encode needs --config (to sign) or signature_hex");
  auto cfg = ofkit::smarttag::PrivacyConfig::from_json(read_file(config_path));
  std::cout << ofkit::to_hex(ofkit::smarttag::encode_adv(adv, cfg)) << '\n';
  return kExitOk;
}

int cmd_adv_verify(const std::string& hex, const std::string& config_path,
                   std::uint64_t server_time, std::uint32_t window) {
  auto cfg = ofkit::smarttag::PrivacyConfig::from_json(read_file(config_path));
  ofkit::Bytes payload = ofkit::from_hex(hex);
  auto counter = ofkit::smarttag::aging_counter(server_time);
  auto verdict = ofkit::smarttag::verify_adv(payload, cfg, counter, window);
  std::cout << ofkit::smarttag::verdict_name(verdict) << '\n';
  return verdict == ofkit::smarttag::Verdict::Ok ? kExitOk : kExitVerdict;
}

int run_one_scenario(const std::string& name, std::uint64_t seed,
                     const json& params, const std::string& out_path,
                     const std::string& scanlog_path) {
  ofkit::sim::ScenarioResult result =
      ofkit::sim::run_scenario(name, seed, params);
  if (!out_path.empty()) write_file(out_path, result.transcript);
  if (!scanlog_path.empty()) write_file(scanlog_path, result.scan_log);

  std::cout << result.name << " (seed " << result.seed << ")\n"
            << result.summary();
  return result.ok() ? kExitOk : kExitVerdict;
}

int cmd_simulate(const std::string& scenario, std::uint64_t seed,
                 const std::string& params_path, const std::string& file_path,
                 const std::string& out_path, const std::string& scanlog_path,
                 bool strict) {
  // batch form: a scenario file {name, seed, params} or an array of them
  if (!file_path.empty()) {
    json spec_doc = json::parse(read_file(file_path));
    json batch = spec_doc.is_array() ? spec_doc : json::array({spec_doc});
    int worst = kExitOk;
    for (const json& entry : batch) {
      json params = entry.value("params", json::object());
      if (strict) params["strict"] = true;
      int code = run_one_scenario(entry.at("name").get<std::string>(),
                                  entry.value("seed", seed), params, out_path,
                                  scanlog_path);
      worst = std::max(worst, code);
    }
    return worst;
  }

  json params = json::object();
  if (!params_path.empty()) params = json::parse(read_file(params_path));
  if (strict) params["strict"] = true;
  return run_one_scenario(scenario, seed, params, out_path, scanlog_path);
}

int cmd_detect(const std::string& log_path,
               const std::vector<std::string>& pool_paths,
               const std::string& irk_hex, std::uint64_t window,
               int min_sightings, bool harvest) {
  std::ifstream in(log_path);
  if (!in) {
    std::cerr << "error: cannot read " << log_path << '\n';
    return kExitUsage;
  }
  std::vector<std::string> warnings;
  std::vector<ofkit::ScanRecord> records = ofkit::read_scan_log(in, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  if (harvest) {
    json out = json::array();
    for (const auto& cand : ofkit::detect::harvest_fmm_pools(records)) {
      json c;
      c["flags"] = cand.flags;
      c["distinct_ids"] = cand.ids.size();
      c["complete"] = cand.complete();
      c["record_count"] = cand.record_count;
      json ids = json::array();
      for (const auto& id : cand.ids) ids.push_back(ofkit::to_hex(id));
      c["ids"] = ids;
      out.push_back(c);
    }
    std::cout << out.dump(2) << '\n';
    return kExitOk;
  }

  ofkit::detect::FollowOptions options;
  options.window_s = window;
  options.min_sightings = min_sightings;

  ofkit::detect::PoolIndex index;
  for (const std::string& path : pool_paths) {
    json pool_json = json::parse(read_file(path));
    ofkit::fmm::Pool pool;
    pool.device_id = path;
    ofkit::smarttag::PrivacyPool tag_pool;
    for (const auto& entry : pool_json) {
      ofkit::Bytes id = ofkit::from_hex(entry.get<std::string>());
      if (id.size() == 12) {
        ofkit::fmm::PrivateId pid;
        std::copy(id.begin(), id.end(), pid.bytes.begin());
        pool.ids.push_back(pid);
      } else if (id.size() == 16) {
        ofkit::smarttag::PrivacyId tid{};
        std::copy(id.begin(), id.end(), tid.begin());
        tag_pool.ids.push_back(tid);
      }
    }
    if (!pool.ids.empty()) index.add(pool);
    if (!tag_pool.ids.empty()) index.add_tag(path, tag_pool);
  }
  if (!index.fmm_ids.empty() || !index.tag_prefixes.empty())
    options.pools = &index;

  std::optional<ofkit::Irk> irk;
  if (!irk_hex.empty()) {
    irk = ofkit::Irk::from_hex(irk_hex);
    options.irk = *irk;
  }

  auto hypotheses = ofkit::detect::detect_following(records, options);
  std::cout << ofkit::detect::hypotheses_to_json(hypotheses) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline-finding protocol toolkit"};
  app.require_subcommand(1);

  // genpool
  std::string genpool_kind, genpool_config, genpool_out;
  CLI::App* genpool = app.add_subcommand("genpool", "generate a privacy id pool");
  genpool->add_option("--kind", genpool_kind, "fmm or smarttag")
      ->required()
      ->check(CLI::IsMember({"fmm", "smarttag"}));
  genpool->add_option("--config", genpool_config, "config JSON path")->required();
  genpool->add_option("--out", genpool_out, "output path (stdout by default)");

  // adv
  std::string adv_action, adv_kind = "smarttag", adv_hex, adv_fields,
              adv_config;
  std::uint64_t adv_time = 1660000000;
  std::uint32_t adv_window = ofkit::smarttag::kDefaultFreshnessWindow;
  CLI::App* adv = app.add_subcommand("adv", "encode/decode/verify advertisements");
  adv->add_option("action", adv_action, "encode, decode or verify")
      ->required()
      ->check(CLI::IsMember({"encode", "decode", "verify"}));
  adv->add_option("--kind", adv_kind, "fmm, smarttag or unreg")
      ->check(CLI::IsMember({"fmm", "smarttag", "unreg"}));
  adv->add_option("--hex", adv_hex, "payload hex (decode/verify)");
  adv->add_option("--fields", adv_fields, "field JSON (encode)");
  adv->add_option("--config", adv_config, "privacy config JSON path");
  adv->add_option("--server-time", adv_time, "server unix time for verify");
  adv->add_option("--window", adv_window, "freshness window in intervals");

  // simulate
  std::string sim_scenario, sim_params, sim_file, sim_out, sim_scanlog;
  std::uint64_t sim_seed = 0;
  bool sim_strict = false;
  CLI::App* simulate = app.add_subcommand("simulate", "run a network scenario");
  simulate->add_option("scenario", sim_scenario, "scenario name");
  CLI::Option* seed_opt = simulate->add_option("--seed", sim_seed, "rng seed");
  simulate->add_option("--params", sim_params, "params JSON path");
  simulate->add_option("--file", sim_file,
                       "scenario file {name, seed, params} or an array");
  simulate->add_option("--out", sim_out, "transcript output path");
  simulate->add_option("--scan-log", sim_scanlog, "scan log output path");
  simulate->add_flag("--strict", sim_strict, "strict server-side checks");

  // detect
  std::string det_log, det_irk;
  std::vector<std::string> det_pools;
  std::uint64_t det_window = 8 * 3600;
  int det_min = 4;
  bool det_harvest = false;
  CLI::App* detect = app.add_subcommand("detect", "scan-log tracker detection");
  detect->add_option("log", det_log, "scan log (JSON lines)")->required();
  detect->add_option("--pools", det_pools, "pool JSON files to match against");
  detect->add_option("--irk", det_irk, "IRK hex for RPA resolution");
  detect->add_option("--window", det_window, "following window in seconds");
  detect->add_option("--min-sightings", det_min, "sighting threshold");
  detect->add_flag("--harvest", det_harvest, "harvest FMM pool candidates");

  CLI11_PARSE(app, argc, argv);

  try {
    if (genpool->parsed())
      return cmd_genpool(genpool_kind, genpool_config, genpool_out);
    if (adv->parsed()) {
      if (adv_action == "decode") return cmd_adv_decode(adv_kind, adv_hex);
      if (adv_action == "encode")
        return cmd_adv_encode(adv_kind, adv_fields, adv_config);
      return cmd_adv_verify(adv_hex, adv_config, adv_time, adv_window);
    }
    if (simulate->parsed()) {
      if (sim_scenario.empty() && sim_file.empty()) {
        std::cerr << "error: simulate needs a scenario name or --file\n";
        return kExitUsage;
      }
      return cmd_simulate(sim_scenario,
                          seed_or_env(sim_seed, seed_opt->count() > 0),
                          sim_params, sim_file, sim_out, sim_scanlog,
                          sim_strict);
    }
    if (detect->parsed())
      return cmd_detect(det_log, det_pools, det_irk, det_window, det_min,
                        det_harvest);
  } catch (const ofkit::sim::UnknownScenario& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
