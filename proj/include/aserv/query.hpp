#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "aserv/domain.hpp"
#include "aserv/epgrid.hpp"
#include "aserv/storage.hpp"

namespace aserv {

struct EventSeries {
  ScientificEvent event;
  PartitionId pid;
  /// Full-fidelity rows over [stime, etime], consecutive in t.
  std::vector<CatalogTuple> rows;
};

struct SeriesRange {
  ScientificEvent event;
  PartitionId pid;
  Cycle from{};
  Cycle to{};
  /// Valid-data rows of the event's object with t in [from, to], sorted by t.
  std::vector<CatalogTuple> rows;
};

struct AccuracyReport {
  std::int64_t probe = 0;
  std::int64_t pcse = 0;
  /// pcse / probe; 1 when probe is 0.
  double accuracy = 1.0;
};

/// Read-only analyses over the stored structures. Every query is a snapshot at the
/// read limit (the ingest watermark); data of later cycles is invisible.
class QueryEngine {
public:
  /// Returns the highest visible cycle; nullopt means no limit.
  using ReadLimit = std::function<std::optional<Cycle>()>;

  QueryEngine(KvBackend& store, std::vector<PartitionGrid> grids, ReadLimit limit = {});

  const std::vector<PartitionGrid>& grids() const noexcept { return grids_; }
  std::vector<UnitId> units() const;
  std::optional<Cycle> read_limit() const { return limit_ ? limit_() : std::nullopt; }

  /// Partitions selected by `reg`, or every partition holding ICRs when absent.
  std::vector<PartitionId> select_partitions(const std::optional<Region>& reg) const;

  /// Approximate event count: PCAG over the partitions covering the region.
  std::int64_t probe(const std::optional<Region>& reg, const TimeInterval& interval) const;

  /// Events intersecting the interval with their complete series. With a region,
  /// keeps events whose stored partition is among the covered partitions.
  /// Throws IntegrityError if a listed event has missing or gapped series data.
  std::vector<EventSeries> list_events(const std::optional<Region>& reg, const TimeInterval& interval) const;

  /// Time series range [stime - dt1, etime + dt2] of the event's object, read from its
  /// partition only; clipped below at 0 and above at the read limit.
  /// Throws NotFoundError for an unknown eid and std::invalid_argument for negative widths.
  SeriesRange stretch(std::string_view eid, Cycle dt1, Cycle dt2) const;

  /// Precise count: listing over the region's partitions, then an exact in-circle test
  /// on each event's position.
  std::int64_t pcse_count(const Region& reg, const TimeInterval& interval) const;

  AccuracyReport accuracy(const Region& reg, const TimeInterval& interval) const;

private:
  std::vector<CatalogTuple> load_series(const ScientificEvent& ev, std::optional<Cycle> limit) const;
  std::optional<PartitionId> stored_partition(const ScientificEvent& ev) const;

  KvBackend& store_;
  std::vector<PartitionGrid> grids_;
  ReadLimit limit_;
};

}  // namespace aserv
