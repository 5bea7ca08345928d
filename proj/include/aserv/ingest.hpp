#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aserv/dafilter.hpp"
#include "aserv/domain.hpp"
#include "aserv/epgrid.hpp"
#include "aserv/events.hpp"
#include "aserv/pcag.hpp"
#include "aserv/storage.hpp"

namespace aserv {

/// One unit's input for one cycle.
struct CycleBatch {
  UnitId unit{};
  Cycle t{};
  std::vector<CatalogTuple> catalog;
  Eset eset;
};

struct IngestStats {
  UnitId unit{};
  Cycle t{};
  double latency_s = 0.0;
  std::size_t rows = 0;
  std::size_t partition_appends = 0;
  std::size_t event_appends = 0;
  std::size_t icr_appends = 0;
  std::size_t sepi_writes = 0;
  std::size_t epi_writes = 0;
  std::size_t missing_flags = 0;
  std::size_t new_events = 0;
  std::size_t active_events = 0;
  std::size_t retries = 0;
  std::uint64_t valid_bytes = 0;  ///< partition-data bytes written (keys + values)
  std::uint64_t event_bytes = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t key_count = 0;
  std::vector<Icr> icrs;

  std::size_t writes() const noexcept {
    return partition_appends + event_appends + icr_appends + sepi_writes + epi_writes;
  }
};

/// Raised when a cycle's writes still fail after the configured retries.
/// The worker keeps the unacknowledged writes and resumes them on the next attempt.
class CycleFailed : public std::runtime_error {
public:
  CycleFailed(UnitId unit, Cycle t, const std::string& what) : std::runtime_error(what), unit_(unit), t_(t) {}
  UnitId unit() const noexcept { return unit_; }
  Cycle t() const noexcept { return t_; }

private:
  UnitId unit_;
  Cycle t_;
};

struct IngestOptions {
  FilterConfig filter;
  /// Also maintain the two-record endpoint index (comparison baseline).
  bool maintain_epi = false;
  /// Extra attempts for writes that were not acknowledged.
  int max_retries = 3;
};

/// Partition-data value: the rows of one (partition, cycle), newline-joined.
std::string encode_partition_rows(const std::vector<const ValidTuple*>& rows);
std::vector<CatalogTuple> decode_partition_rows(std::string_view value);

/// Event-data item: "<cell>;<full row>".
std::string encode_event_row(std::uint32_t cell, const CatalogTuple& row);
std::pair<std::uint32_t, CatalogTuple> decode_event_row(std::string_view item);

/// Per-unit insertion worker: filter -> partition -> SEPI -> ICR -> store, one cycle at a time.
class Worker {
public:
  Worker(PartitionGrid grid, KvBackend& store, IngestOptions options = {});

  UnitId unit() const noexcept { return grid_.unit(); }
  const PartitionGrid& grid() const noexcept { return grid_; }
  Cycle last_cycle() const noexcept { return last_; }
  const ActiveEvents& active() const noexcept { return active_; }

  /// Persists one "meta:<unit>:<cell>" record per partition.
  void write_metadata();

  /// Throws std::invalid_argument for out-of-order or malformed batches and
  /// CycleFailed when the store keeps rejecting writes. State only advances on success.
  IngestStats process_cycle(const CycleBatch& batch);

private:
  struct Pending {
    Cycle t{};
    std::vector<WriteOp> ops;
    ActiveEvents next;
    IngestStats stats;
  };

  IngestStats commit_ops(Pending pending, std::chrono::steady_clock::time_point start);

  PartitionGrid grid_;
  KvBackend& store_;
  IngestOptions options_;
  ActiveEvents active_;
  Cycle last_ = kNoCycle;
  std::optional<Pending> pending_;
};

/// Registers workers, tracks liveness, and owns the read watermark: the highest cycle
/// committed by every registered unit.
class Master {
public:
  using Clock = std::chrono::steady_clock;

  /// Throws std::invalid_argument on duplicate registration.
  void register_worker(UnitId unit);
  void heartbeat(UnitId unit);
  void heartbeat(UnitId unit, Clock::time_point now);
  /// Units whose last heartbeat is older than `timeout`; they are flagged stalled.
  std::vector<UnitId> check_liveness(Clock::time_point now, Clock::duration timeout);
  bool stalled(UnitId unit) const;

  /// Records that `unit` committed cycle t. Cycles must not go backwards.
  void commit(UnitId unit, Cycle t);

  Cycle watermark() const;
  std::optional<Cycle> read_limit() const;
  std::vector<UnitId> units() const;

  /// Blocks until the watermark exceeds `after` or the timeout elapses; returns the watermark.
  Cycle wait_for_watermark(Cycle after, Clock::duration timeout) const;

private:
  struct UnitState {
    Cycle committed = kNoCycle;
    Clock::time_point last_heartbeat;
    bool stalled = false;
  };

  Cycle watermark_locked() const;

  mutable std::mutex mutex_;
  mutable std::condition_variable advanced_;
  std::map<UnitId, UnitState> units_;
};

/// Supplies cycle batches per unit; nullopt when the unit has no more data.
class BatchSource {
public:
  virtual ~BatchSource() = default;
  virtual std::optional<CycleBatch> next(UnitId unit) = 0;
};

/// Reads "<dir>/<unit>/<t>.cat" and ".eset" pairs in cycle order.
class DirectorySource final : public BatchSource {
public:
  DirectorySource(std::filesystem::path dir, const std::vector<UnitId>& units);
  std::optional<CycleBatch> next(UnitId unit) override;

  /// Units present as numeric subdirectories.
  static std::vector<UnitId> discover_units(const std::filesystem::path& dir);

private:
  std::filesystem::path dir_;
  std::map<UnitId, std::vector<Cycle>> cycles_;
  std::map<UnitId, std::size_t> cursor_;
};

struct CycleReport {
  Cycle t{};
  Cycle watermark = kNoCycle;
  double max_latency_s = 0.0;
  std::size_t new_events = 0;
  std::vector<IngestStats> units;
};

/// Drives one worker per unit through successive cycles and advances the master's watermark.
class Pipeline {
public:
  Pipeline(std::vector<PartitionGrid> grids, KvBackend& store, IngestOptions options = {});

  Master& master() noexcept { return master_; }
  const Master& master() const noexcept { return master_; }
  const std::vector<PartitionGrid>& grids() const noexcept { return grids_; }
  Worker& worker(UnitId unit);

  /// Runs every unit's next batch concurrently. Units that fail keep their commit
  /// point and the watermark stalls with them. nullopt when every source is drained.
  std::optional<CycleReport> step(BatchSource& source);

  /// Steps until drained or `max_cycles` reached; calls `on_cycle` after each commit.
  std::size_t run(BatchSource& source, std::size_t max_cycles,
                  const std::function<void(const CycleReport&)>& on_cycle = {});

private:
  std::vector<PartitionGrid> grids_;
  KvBackend& store_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::map<UnitId, std::optional<CycleBatch>> retry_;
  Master master_;
};

}  // namespace aserv
