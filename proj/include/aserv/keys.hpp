#pragma once

#include <string>
#include <string_view>

#include "aserv/domain.hpp"
#include "aserv/epgrid.hpp"

// Store key layout. Everything a reader needs to locate data is derivable from
// (unit, cell) or (unit, eid); the prefixes below are what scans run over.
namespace aserv::keys {

inline constexpr std::string_view kPartition = "part:";
inline constexpr std::string_view kEvent = "ev:";
inline constexpr std::string_view kSepi = "sepi:";
inline constexpr std::string_view kEpi = "epi:";
inline constexpr std::string_view kIcr = "icr:";
inline constexpr std::string_view kMeta = "meta:";

/// Width of the zero-padded stime inside SEPI/EPI keys.
inline constexpr int kStimeWidth = 10;

std::string partition(const PartitionId& pid);
std::string event(UnitId unit, std::string_view eid);
std::string icr(const PartitionId& pid);
std::string meta(const PartitionId& pid);

/// "sepi:<unit>:<oid>|<stime, zero-padded>"
std::string sepi(UnitId unit, std::string_view oid, Cycle stime);

struct EventKey {
  UnitId unit{};
  std::string oid;
  Cycle stime{};
};

/// Parses the "<unit>:<oid>|<stime>" tail shared by SEPI and EPI keys.
EventKey parse_event_tail(std::string_view tail);
EventKey parse_sepi(std::string_view key);

/// EPI baseline: "epi:<unit>:S:<oid>|<stime>" -> "stime,etime" and "epi:<unit>:E:<oid>|<stime>" -> "etime".
std::string epi_start(UnitId unit, std::string_view oid, Cycle stime);
std::string epi_end(UnitId unit, std::string_view oid, Cycle stime);

/// PartitionId from a "<prefix><unit>:<cell>" key.
PartitionId parse_partition_key(std::string_view key, std::string_view prefix);

}  // namespace aserv::keys
