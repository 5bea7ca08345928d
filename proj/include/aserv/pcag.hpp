#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aserv/domain.hpp"
#include "aserv/epgrid.hpp"
#include "aserv/events.hpp"
#include "aserv/storage.hpp"

namespace aserv {

/// Intermediate count result of one partition at one cycle.
struct Icr {
  PartitionId pid;
  Cycle t{};
  std::uint32_t total = 0;  ///< events active at t
  std::uint32_t fresh = 0;  ///< events with stime == t

  friend bool operator==(const Icr&, const Icr&) = default;
};

/// "total|new|t"
std::string encode_icr(const Icr& icr);
Icr decode_icr(const PartitionId& pid, std::string_view value);

/// One ICR per partition holding at least one event active at t, ordered by pid.
/// Partitions with no active event emit nothing.
std::vector<Icr> emit_icrs(Cycle t, const ActiveEvents& active);

std::vector<WriteOp> icr_ops(std::span<const Icr> icrs);

/// count(p) = Total(ts) + sum_{i=ts+1..te} New(i) over one partition's time-ordered ICRs.
/// A missing ICR at a cycle means Total = New = 0. Cycles past `watermark` are ignored.
std::int64_t partition_count(std::span<const Icr> icrs, const TimeInterval& interval,
                             std::optional<Cycle> watermark = std::nullopt);

/// Sum of partition_count over `pids`, reading each partition's ICR list from the store.
std::int64_t pcag_count(KvBackend& store, std::span<const PartitionId> pids, const TimeInterval& interval,
                        std::optional<Cycle> watermark = std::nullopt);

/// Partitions that have ever emitted an ICR.
std::vector<PartitionId> icr_partitions(KvBackend& store);

/// ICR list of one partition, time-ordered.
std::vector<Icr> load_icrs(KvBackend& store, const PartitionId& pid);

}  // namespace aserv
