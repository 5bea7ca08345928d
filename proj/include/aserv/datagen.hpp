#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aserv/domain.hpp"
#include "aserv/epgrid.hpp"
#include "aserv/ingest.hpp"

namespace aserv {

struct GenConfig {
  std::uint32_t units = 1;
  std::size_t objects = 1000;  ///< n objects per unit
  Cycle first_cycle = 1;
  Cycle cycles = 100;
  double side = 1.0;  ///< sub-area side L; s = L * L
  double ct = 15.0;   ///< cycle length in seconds
  double p = 0.5;     ///< geometric parameter of new events per cycle, support {0, 1, ...}
  Cycle dmin = 1;     ///< event duration range in cycles, inclusive
  Cycle dmax = 10;
  std::size_t m = 21;  ///< data attributes after oid,x,y,t (25 columns in total)
  std::uint64_t seed = 42;
  /// Optional "x,y" offsets (relative to the unit origin), one object per line.
  std::optional<std::filesystem::path> positions_file;

  double sub_area() const noexcept { return side * side; }
  Cycle last_cycle() const noexcept { return first_cycle + cycles - 1; }
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// Observation units sit side by side along x: unit u covers [u L, (u + 1) L) x [0, L).
Point unit_origin(const GenConfig& config, UnitId unit);

/// One grid per unit; `partitions` > 0 overrides the size derived from alpha and r_min.
std::vector<PartitionGrid> make_grids(const GenConfig& config, double alpha, double r_min,
                                      std::int64_t partitions = 0);

struct GroundTruthEvent {
  UnitId unit{};
  std::string oid;
  Cycle stime{};
  Cycle etime{};
  double x{};
  double y{};
};

/// Simulated observation unit: fixed object positions, geometric arrivals of new events,
/// uniform durations. Objects are never re-flagged in the cycle right after an event ends,
/// so every maximal run of flags is exactly one ground-truth event.
class UnitGenerator {
public:
  UnitGenerator(const GenConfig& config, UnitId unit);

  UnitId unit() const noexcept { return unit_; }
  Cycle next_cycle() const noexcept { return next_; }

  /// Produces cycle `t`, which must be the next one in sequence.
  CycleBatch gen_cycle(Cycle t);

  /// Events as planned; etime may lie beyond the last generated cycle.
  const std::vector<GroundTruthEvent>& planned_events() const noexcept { return events_; }
  const std::vector<Point>& positions() const noexcept { return positions_; }
  const std::vector<std::size_t>& new_event_counts() const noexcept { return new_counts_; }

private:
  std::string oid_of(std::size_t index) const;

  GenConfig config_;
  UnitId unit_;
  Cycle next_;
  std::mt19937_64 rng_;
  std::vector<Point> positions_;
  std::vector<std::vector<double>> baseline_;
  std::vector<std::size_t> idle_;
  std::map<Cycle, std::vector<std::size_t>> release_;
  struct Running {
    std::size_t object;
    Cycle etime;
  };
  std::vector<Running> running_;
  std::vector<GroundTruthEvent> events_;
  std::vector<std::size_t> new_counts_;
};

/// All units of one night; also a BatchSource for the ingest pipeline.
class Generator final : public BatchSource {
public:
  explicit Generator(GenConfig config);

  const GenConfig& config() const noexcept { return config_; }
  std::optional<CycleBatch> next(UnitId unit) override;

  /// Ground-truth events visible after cycle `upto`: stime <= upto, etime clamped to upto.
  std::vector<GroundTruthEvent> ground_truth(Cycle upto) const;
  const UnitGenerator& unit(UnitId unit) const;

private:
  GenConfig config_;
  std::vector<std::unique_ptr<UnitGenerator>> units_;
};

/// Writes the unit's catalog and Eset files under `dir`.
std::vector<std::filesystem::path> emit_files(const CycleBatch& batch, const std::filesystem::path& dir);

/// "unit,oid,stime,etime,x,y" per line, with a header.
void write_ground_truth(const std::filesystem::path& path, const std::vector<GroundTruthEvent>& events);

/// Replays fixed batches; used for hand-made fixtures.
class ReplaySource final : public BatchSource {
public:
  explicit ReplaySource(std::vector<CycleBatch> batches);
  std::optional<CycleBatch> next(UnitId unit) override;

private:
  std::map<UnitId, std::vector<CycleBatch>> batches_;
  std::map<UnitId, std::size_t> cursor_;
};

/// Small hand-made night: one unit, three objects in one partition of a 2x2 grid,
/// cycles 1..10, events oid1 [3,5], oid2 [4,4], oid3 [5,6], oid2 [8,9].
struct Fixture {
  GenConfig config;
  std::int64_t partitions = 4;
  std::vector<CycleBatch> batches;
  std::vector<GroundTruthEvent> events;
};

Fixture worked_example();

}  // namespace aserv
