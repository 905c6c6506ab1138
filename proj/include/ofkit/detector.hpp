#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ofkit/fmm.hpp"
#include "ofkit/scanlog.hpp"
#include "ofkit/smarttag.hpp"

namespace ofkit::detect {

enum class AdvClass {
  FmmLost,
  SmartTagRegistered,
  SmartTagUnregistered,
  DfuMode,
  Other,
};
std::string_view adv_class_name(AdvClass c);

/// Classification by service UUID and payload shape; total and deterministic.
AdvClass classify(const ScanRecord& record);

// ---------------------------------------------------------------------------
// FMM pool harvesting: accumulate distinct ids per flags byte. At desk scale
// one device per flags value is assumed; dense environments would need the
// ambiguity reported, not resolved.

struct PoolCandidate {
  std::uint8_t flags = 0;
  std::vector<std::array<std::uint8_t, 12>> ids;  // first-seen order
  std::uint64_t first_seen = 0;
  std::uint64_t last_seen = 0;
  std::size_t record_count = 0;

  bool complete() const { return ids.size() >= fmm::kPoolSize; }
};

std::vector<PoolCandidate> harvest_fmm_pools(std::span<const ScanRecord> records);

// ---------------------------------------------------------------------------
// Known-pool matching

struct PoolIndex {
  // 12-byte FMM ids and 8-byte tag prefixes, hex keyed; an identifier can
  // land in several devices' pools, which match reports as ambiguity
  std::map<std::string, std::vector<std::string>> fmm_ids;
  std::map<std::string, std::vector<std::string>> tag_prefixes;

  void add(const fmm::Pool& pool);
  void add_tag(const std::string& device_id, const smarttag::PrivacyPool& pool);
};

/// Exact membership test. Throws fmm::AmbiguousMatch when the identifier
/// appears in more than one supplied pool.
std::optional<std::string> match_known_pool(const ScanRecord& record,
                                            const PoolIndex& pools);

// ---------------------------------------------------------------------------
// RPA resolution and DFU address inference

std::vector<ScanRecord> resolve_with_irk(std::span<const ScanRecord> records,
                                         const Irk& irk);

struct DfuIdentity {
  Mac48 address;
  bool wrapped = false;  // 48-bit underflow
};

/// The application-mode identity address is one below the DFU-mode address.
DfuIdentity dfu_identity(const Mac48& dfu_address);

// ---------------------------------------------------------------------------
// Following detection

struct FollowOptions {
  std::uint64_t window_s = 8 * 3600;
  int min_sightings = 4;
  // smarttag clusters whose byte-12 fields match and whose aging counters
  // line up across adjacent refresh windows are merged
  bool merge_by_counter_continuity = true;
  std::optional<Irk> irk;       // resolve RPAs when provided
  const PoolIndex* pools = nullptr;  // match known pools when provided
};

struct TrackerHypothesis {
  std::string cluster_id;
  std::string evidence;  // matched-pool | resolved-irk | dfu-identity | persistence
  std::uint64_t first_seen = 0;
  std::uint64_t last_seen = 0;
  std::size_t record_count = 0;
};

std::string hypotheses_to_json(const std::vector<TrackerHypothesis>& hyps);

/// Clusters records by stable linkage key and flags clusters spanning at
/// least the window with at least min_sightings records.
std::vector<TrackerHypothesis> detect_following(
    std::span<const ScanRecord> records, const FollowOptions& options = {});

}  // namespace ofkit::detect
