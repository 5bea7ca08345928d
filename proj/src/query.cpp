#include "aserv/query.hpp"

#include <algorithm>

#include "aserv/ingest.hpp"
#include "aserv/keys.hpp"
#include "aserv/pcag.hpp"
#include "aserv/sepi.hpp"

namespace aserv {

QueryEngine::QueryEngine(KvBackend& store, std::vector<PartitionGrid> grids, ReadLimit limit)
    : store_(store), grids_(std::move(grids)), limit_(std::move(limit)) {}

std::vector<UnitId> QueryEngine::units() const {
  std::vector<UnitId> out;
  out.reserve(grids_.size());
  for (const auto& g : grids_) {
    out.push_back(g.unit());
  }
  return out;
}

std::vector<PartitionId> QueryEngine::select_partitions(const std::optional<Region>& reg) const {
  if (!reg) {
    return icr_partitions(store_);
  }
  return parse_region(grids_, *reg);
}

std::int64_t QueryEngine::probe(const std::optional<Region>& reg, const TimeInterval& interval) const {
  const auto limit = read_limit();
  const auto pids = select_partitions(reg);
  return pcag_count(store_, pids, interval, limit);
}

std::optional<PartitionId> QueryEngine::stored_partition(const ScientificEvent& ev) const {
  const auto head = store_.range(keys::event(ev.unit, ev.eid()), 0, 0);
  if (head.empty()) {
    return std::nullopt;
  }
  return PartitionId{ev.unit, decode_event_row(head.front()).first};
}

std::vector<CatalogTuple> QueryEngine::load_series(const ScientificEvent& ev, std::optional<Cycle> limit) const {
  const auto key = keys::event(ev.unit, ev.eid());
  const auto items = store_.range(key, 0, -1);
  std::vector<CatalogTuple> rows;
  rows.reserve(items.size());
  for (const auto& item : items) {
    auto row = decode_event_row(item).second;
    if (limit && row.t > *limit) break;
    if (row.t > ev.etime) break;
    rows.push_back(std::move(row));
  }
  const auto expected = ev.etime - ev.stime + 1;
  bool consecutive = static_cast<Cycle>(rows.size()) == expected;
  for (std::size_t i = 0; consecutive && i < rows.size(); ++i) {
    consecutive = rows[i].t == ev.stime + static_cast<Cycle>(i) && rows[i].oid == ev.oid;
  }
  if (!consecutive) {
    throw IntegrityError("series of event " + ev.eid() + " in unit " + std::to_string(ev.unit) + " holds " +
                         std::to_string(rows.size()) + " rows, expected " + std::to_string(expected) +
                         " consecutive cycles");
  }
  return rows;
}

std::vector<EventSeries> QueryEngine::list_events(const std::optional<Region>& reg,
                                                  const TimeInterval& interval) const {
  const auto limit = read_limit();
  auto found = sepi_query(store_, interval, limit).events;
  std::vector<PartitionId> selected;
  if (reg) {
    selected = parse_region(grids_, *reg);
    std::sort(selected.begin(), selected.end());
  }
  std::vector<EventSeries> out;
  out.reserve(found.size());
  for (auto& ev : found) {
    const auto pid = stored_partition(ev);
    if (!pid) {
      throw IntegrityError("event " + ev.eid() + " is indexed but has no series data");
    }
    if (reg && !std::binary_search(selected.begin(), selected.end(), *pid)) {
      continue;
    }
    auto rows = load_series(ev, limit);
    out.push_back(EventSeries{std::move(ev), *pid, std::move(rows)});
  }
  return out;
}

SeriesRange QueryEngine::stretch(std::string_view eid, Cycle dt1, Cycle dt2) const {
  if (dt1 < 0 || dt2 < 0) {
    throw std::invalid_argument("stretch widths must be non-negative");
  }
  const auto limit = read_limit();
  auto ev = sepi_lookup(store_, eid, units(), limit);
  if (!ev) {
    throw NotFoundError("unknown eid " + std::string(eid));
  }
  const auto pid = stored_partition(*ev);
  if (!pid) {
    throw IntegrityError("event " + std::string(eid) + " is indexed but has no series data");
  }
  SeriesRange out{*ev, *pid, std::max<Cycle>(0, ev->stime - dt1), ev->etime + dt2, {}};
  if (limit) {
    out.to = std::min(out.to, *limit);
  }
  for (const auto& value : store_.range(keys::partition(*pid), 0, -1)) {
    for (auto& row : decode_partition_rows(value)) {
      if (row.oid == ev->oid && row.t >= out.from && row.t <= out.to) {
        out.rows.push_back(std::move(row));
      }
    }
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  return out;
}

std::int64_t QueryEngine::pcse_count(const Region& reg, const TimeInterval& interval) const {
  std::int64_t count = 0;
  for (const auto& series : list_events(reg, interval)) {
    const auto& first = series.rows.front();
    if (contains(reg, first.x, first.y)) {
      ++count;
    }
  }
  return count;
}

AccuracyReport QueryEngine::accuracy(const Region& reg, const TimeInterval& interval) const {
  AccuracyReport r;
  r.probe = probe(reg, interval);
  r.pcse = pcse_count(reg, interval);
  r.accuracy = r.probe == 0 ? 1.0 : static_cast<double>(r.pcse) / static_cast<double>(r.probe);
  return r;
}

}  // namespace aserv
