#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aserv/domain.hpp"
#include "aserv/events.hpp"

namespace aserv {

/// Which data attributes survive into valid data. Defaults to the first c columns.
struct FilterConfig {
  std::size_t c = 1;
  /// Explicit attribute positions; when non-empty it overrides c.
  std::vector<std::size_t> columns;

  std::size_t kept() const noexcept { return columns.empty() ? c : columns.size(); }
};

struct EventRow {
  std::string eid;
  CatalogTuple row;
};

struct FilterOutput {
  std::vector<ValidTuple> valid;
  std::vector<EventRow> event_rows;
  /// Eset oids that had no catalog row this cycle.
  std::size_t missing = 0;
};

/// Splits one unit's catalog into reduced valid data and full-fidelity event rows.
/// Flagged oids not in `active` start a new event keyed "oid|t".
FilterOutput filter_cycle(std::span<const CatalogTuple> catalog, const Eset& eset, const ActiveEvents& active,
                          const FilterConfig& config);

ValidTuple reduce(const CatalogTuple& row, const FilterConfig& config);

}  // namespace aserv
