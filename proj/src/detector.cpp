#include "ofkit/detector.hpp"

#include <algorithm>

#include <json.hpp>

#include "ofkit/rpa.hpp"

namespace ofkit::detect {

std::string_view adv_class_name(AdvClass c) {
  switch (c) {
    case AdvClass::FmmLost: return "fmm-lost";
    case AdvClass::SmartTagRegistered: return "smarttag-registered";
    case AdvClass::SmartTagUnregistered: return "smarttag-unregistered";
    case AdvClass::DfuMode: return "dfu-mode";
    case AdvClass::Other: return "other";
  }
  return "other";
}

AdvClass classify(const ScanRecord& record) {
  if (record.service_uuid == kUuidDfu) return AdvClass::DfuMode;
  if (record.service_uuid == kUuidFmmOffline && record.payload.size() == 14)
    return AdvClass::FmmLost;
  if (record.service_uuid == kUuidTagOffline && record.payload.size() == 20)
    return AdvClass::SmartTagRegistered;
  if (record.service_uuid == kUuidOnboarding && record.payload.size() == 14)
    return AdvClass::SmartTagUnregistered;
  return AdvClass::Other;
}

std::vector<PoolCandidate> harvest_fmm_pools(
    std::span<const ScanRecord> records) {
  std::map<std::uint8_t, PoolCandidate> by_flags;
  for (const ScanRecord& record : records) {
    if (classify(record) != AdvClass::FmmLost) continue;
    fmm::Advertisement adv = fmm::decode_adv(record.payload);
    PoolCandidate& cand = by_flags[adv.flags];
    if (cand.record_count == 0) {
      cand.flags = adv.flags;
      cand.first_seen = record.t;
    }
    cand.last_seen = std::max(cand.last_seen, record.t);
    ++cand.record_count;
    if (std::find(cand.ids.begin(), cand.ids.end(), adv.private_id) ==
        cand.ids.end())
      cand.ids.push_back(adv.private_id);
  }
  std::vector<PoolCandidate> out;
  out.reserve(by_flags.size());
  for (auto& [flags, cand] : by_flags) out.push_back(std::move(cand));
  return out;
}

void PoolIndex::add(const fmm::Pool& pool) {
  for (const fmm::PrivateId& id : pool.ids) {
    auto& devices = fmm_ids[to_hex(id.bytes)];
    if (std::find(devices.begin(), devices.end(), pool.device_id) ==
        devices.end())
      devices.push_back(pool.device_id);
  }
}

void PoolIndex::add_tag(const std::string& device_id,
                        const smarttag::PrivacyPool& pool) {
  for (std::size_t i = 0; i < pool.ids.size(); ++i) {
    auto& devices = tag_prefixes[to_hex(pool.prefix(i))];
    if (std::find(devices.begin(), devices.end(), device_id) == devices.end())
      devices.push_back(device_id);
  }
}

namespace {

std::optional<std::string> lookup_unique(
    const std::map<std::string, std::vector<std::string>>& index,
    const std::string& key) {
  auto it = index.find(key);
  if (it == index.end()) return std::nullopt;
  if (it->second.size() > 1)
    throw fmm::AmbiguousMatch("identifier " + key + " appears in " +
                              std::to_string(it->second.size()) + " pools");
  return it->second.front();
}

}  // namespace

std::optional<std::string> match_known_pool(const ScanRecord& record,
                                            const PoolIndex& pools) {
  AdvClass cls = classify(record);
  if (cls == AdvClass::FmmLost)
    return lookup_unique(pools.fmm_ids,
                         to_hex(BytesView(record.payload).subspan(1, 12)));
  if (cls == AdvClass::SmartTagRegistered)
    return lookup_unique(pools.tag_prefixes,
                         to_hex(BytesView(record.payload).subspan(4, 8)));
  return std::nullopt;
}

std::vector<ScanRecord> resolve_with_irk(std::span<const ScanRecord> records,
                                         const Irk& irk) {
  std::vector<ScanRecord> out;
  for (const ScanRecord& record : records)
    if (rpa_resolve(irk, record.mac)) out.push_back(record);
  return out;
}

DfuIdentity dfu_identity(const Mac48& dfu_address) {
  std::uint64_t value = dfu_address.to_u48();
  DfuIdentity result;
  result.wrapped = value == 0;
  value = result.wrapped ? 0xffffffffffffULL : value - 1;
  result.address = Mac48::from_u48(value);
  return result;
}

std::string hypotheses_to_json(const std::vector<TrackerHypothesis>& hyps) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const TrackerHypothesis& h : hyps) {
    nlohmann::ordered_json j;
    j["cluster_id"] = h.cluster_id;
    j["evidence"] = h.evidence;
    j["first_seen"] = h.first_seen;
    j["last_seen"] = h.last_seen;
    j["record_count"] = h.record_count;
    arr.push_back(j);
  }
  return arr.dump(2);
}

namespace {

struct Cluster {
  std::string key;
  std::string evidence;
  std::uint64_t first_seen = 0;
  std::uint64_t last_seen = 0;
  std::size_t count = 0;
  // smarttag continuity bookkeeping
  std::uint32_t last_counter = 0;
  std::uint8_t byte12 = 0;
  bool is_tag = false;
};

}  // namespace

std::vector<TrackerHypothesis> detect_following(
    std::span<const ScanRecord> records, const FollowOptions& options) {
  std::map<std::string, Cluster> clusters;

  auto touch = [&](const std::string& key, const std::string& evidence,
                   const ScanRecord& r) -> Cluster& {
    Cluster& c = clusters[key];
    if (c.count == 0) {
      c.key = key;
      c.evidence = evidence;
      c.first_seen = r.t;
    }
    c.last_seen = std::max(c.last_seen, r.t);
    ++c.count;
    return c;
  };

  for (const ScanRecord& record : records) {
    AdvClass cls = classify(record);

    if (options.pools) {
      std::optional<std::string> device;
      try {
        device = match_known_pool(record, *options.pools);
      } catch (const fmm::AmbiguousMatch&) {
        device.reset();  // fall through to the weaker linkage keys
      }
      if (device) {
        touch("pool:" + *device, "matched-pool", record);
        continue;
      }
    }
    if (options.irk && rpa_resolve(*options.irk, record.mac)) {
      touch("irk:" + to_hex(options.irk->bytes).substr(0, 8), "resolved-irk",
            record);
      continue;
    }
    if (cls == AdvClass::SmartTagRegistered) {
      smarttag::Advertisement adv = smarttag::decode_adv(record.payload);
      std::string key = "prefix:" + to_hex(adv.privacy_id_prefix);
      Cluster& c = touch(key, "persistence", record);
      c.is_tag = true;
      c.last_counter = adv.aging_counter;
      c.byte12 = static_cast<std::uint8_t>((adv.region_id << 4) |
                                           (adv.encryption_flag ? 8 : 0) |
                                           (adv.uwb_flag ? 4 : 0) |
                                           adv.battery_level);
      continue;
    }
    if (cls == AdvClass::FmmLost) {
      fmm::Advertisement adv = fmm::decode_adv(record.payload);
      touch("fmm-id:" + to_hex(adv.private_id), "persistence", record);
      continue;
    }
    if (cls == AdvClass::DfuMode) {
      touch("dfu:" + dfu_identity(record.mac).address.hex(), "dfu-identity",
            record);
    }
  }

  // merge tag clusters that look like one device rotating: same byte 12,
  // counters continuing across adjacent windows
  std::vector<Cluster> merged;
  std::vector<Cluster> tag_clusters;
  for (auto& [key, c] : clusters) {
    if (c.is_tag && options.merge_by_counter_continuity)
      tag_clusters.push_back(c);
    else
      merged.push_back(c);
  }
  std::sort(tag_clusters.begin(), tag_clusters.end(),
            [](const Cluster& a, const Cluster& b) {
              return a.first_seen < b.first_seen;
            });
  for (Cluster& c : tag_clusters) {
    bool chained = false;
    for (Cluster& head : merged) {
      if (!head.is_tag || head.byte12 != c.byte12) continue;
      // counters advance one step per 15-minute window
      std::uint64_t gap_s = c.first_seen > head.last_seen
                                ? c.first_seen - head.last_seen
                                : 0;
      std::uint32_t counter_gap = c.last_counter > head.last_counter
                                      ? c.last_counter - head.last_counter
                                      : head.last_counter - c.last_counter;
      if (gap_s <= 2 * smarttag::kAgingIntervalS && counter_gap <= 2) {
        head.last_seen = std::max(head.last_seen, c.last_seen);
        head.first_seen = std::min(head.first_seen, c.first_seen);
        head.count += c.count;
        head.last_counter = c.last_counter;
        chained = true;
        break;
      }
    }
    if (!chained) merged.push_back(c);
  }

  std::vector<TrackerHypothesis> hypotheses;
  for (const Cluster& c : merged) {
    if (c.last_seen - c.first_seen < options.window_s) continue;
    if (c.count < static_cast<std::size_t>(options.min_sightings)) continue;
    TrackerHypothesis h;
    h.cluster_id = c.key;
    h.evidence = c.evidence;
    h.first_seen = c.first_seen;
    h.last_seen = c.last_seen;
    h.record_count = c.count;
    hypotheses.push_back(h);
  }
  std::sort(hypotheses.begin(), hypotheses.end(),
            [](const TrackerHypothesis& a, const TrackerHypothesis& b) {
              return a.first_seen < b.first_seen;
            });
  return hypotheses;
}

}  // namespace ofkit::detect
