#include "aserv/dafilter.hpp"

#include <stdexcept>
#include <unordered_map>

namespace aserv {

ValidTuple reduce(const CatalogTuple& row, const FilterConfig& config) {
  ValidTuple out{row.oid, row.x, row.y, row.t, {}};
  if (config.columns.empty()) {
    if (config.c > row.d.size()) {
      throw std::invalid_argument("filter keeps " + std::to_string(config.c) + " attributes but row of " + row.oid +
                                  " has " + std::to_string(row.d.size()));
    }
    out.d.assign(row.d.begin(), row.d.begin() + static_cast<std::ptrdiff_t>(config.c));
    return out;
  }
  out.d.reserve(config.columns.size());
  for (auto col : config.columns) {
    if (col >= row.d.size()) {
      throw std::invalid_argument("filter column " + std::to_string(col) + " missing in row of " + row.oid);
    }
    out.d.push_back(row.d[col]);
  }
  return out;
}

FilterOutput filter_cycle(std::span<const CatalogTuple> catalog, const Eset& eset, const ActiveEvents& active,
                          const FilterConfig& config) {
  FilterOutput out;
  out.valid.reserve(catalog.size());
  std::unordered_map<std::string_view, const CatalogTuple*> by_oid;
  by_oid.reserve(catalog.size());
  for (const auto& row : catalog) {
    if (row.t != eset.t) {
      throw std::invalid_argument("catalog row of " + row.oid + " carries t=" + std::to_string(row.t) +
                                  " but the cycle is " + std::to_string(eset.t));
    }
    out.valid.push_back(reduce(row, config));
    by_oid.emplace(row.oid, &row);
  }
  out.event_rows.reserve(eset.oids.size());
  for (const auto& oid : eset.oids) {
    const auto hit = by_oid.find(oid);
    if (hit == by_oid.end()) {
      ++out.missing;
      continue;
    }
    const auto open = active.find(oid);
    auto eid = open != active.end() ? open->second.eid : format_eid(oid, eset.t);
    out.event_rows.push_back(EventRow{std::move(eid), *hit->second});
  }
  return out;
}

}  // namespace aserv
