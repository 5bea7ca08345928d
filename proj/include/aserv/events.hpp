#pragma once

#include <string>
#include <unordered_map>

#include "aserv/domain.hpp"
#include "aserv/epgrid.hpp"

namespace aserv {

/// Ingest-side state of an event that is still being flagged.
struct OpenEvent {
  std::string eid;
  Cycle stime{};
  /// Fixed at the object's position on stime; never migrates.
  PartitionId pid;
};

/// oid -> open event, one map per observation unit.
using ActiveEvents = std::unordered_map<std::string, OpenEvent>;

}  // namespace aserv
