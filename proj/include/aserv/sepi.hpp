#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aserv/domain.hpp"
#include "aserv/events.hpp"
#include "aserv/storage.hpp"

namespace aserv {

/// Resolves the partition of a newly flagged object from its current position.
using PartitionResolver = std::function<PartitionId(std::string_view oid)>;

/// Writes and state transition for one cycle of single-endpoint index maintenance.
struct SepiPlan {
  std::vector<WriteOp> ops;
  ActiveEvents next;
  std::vector<std::string> opened;     ///< oids whose event starts this cycle
  std::vector<std::string> continued;  ///< oids whose open event extends to this cycle
  std::vector<std::string> closed;     ///< oids whose event ended at the previous cycle
};

/// New oid -> put(sepi:<unit>:oid|t, t); open oid -> update to t; open oid absent -> closed.
/// `eset` must only contain oids with a catalog row this cycle.
SepiPlan plan_sepi_update(UnitId unit, const Eset& eset, const ActiveEvents& active, const PartitionResolver& resolve);

/// Start/end records for the two-record endpoint baseline, derived from the same transition.
std::vector<WriteOp> plan_epi_update(UnitId unit, Cycle t, const SepiPlan& plan);

/// Applies plan_sepi_update directly and returns the next active map. Throws StoreError on a failed ack.
ActiveEvents sepi_update(KvBackend& store, UnitId unit, const Eset& eset, const ActiveEvents& active,
                         const PartitionResolver& resolve);

struct IndexQueryResult {
  std::vector<ScientificEvent> events;  ///< sorted by (unit, oid, stime)
  int scans = 0;
  int dedup_passes = 0;
};

/// Events intersecting `interval`: one prefix scan, then stime <= te on the key.
/// Data past `watermark` is invisible: open events are clamped to it, later starts dropped.
IndexQueryResult sepi_query(KvBackend& store, const TimeInterval& interval,
                            std::optional<Cycle> watermark = std::nullopt);

/// Two-record baseline: scan for endpoints inside the interval plus distinct(),
/// then a second scan for events piercing it.
IndexQueryResult epi_query(KvBackend& store, const TimeInterval& interval,
                           std::optional<Cycle> watermark = std::nullopt);

/// Looks up one event by eid across the given units; nullopt if absent or past the watermark.
std::optional<ScientificEvent> sepi_lookup(KvBackend& store, std::string_view eid, const std::vector<UnitId>& units,
                                           std::optional<Cycle> watermark = std::nullopt);

std::size_t sepi_entry_count(KvBackend& store);
std::size_t epi_entry_count(KvBackend& store);

}  // namespace aserv
