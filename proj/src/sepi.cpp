#include "aserv/sepi.hpp"

#include <algorithm>
#include <unordered_set>

#include "aserv/keys.hpp"
#include "aserv/text.hpp"

namespace aserv {
namespace {

/// Applies the watermark to a stored [stime, etime]; false if the event is not yet visible.
bool visible(Cycle stime, Cycle& etime, std::optional<Cycle> watermark) {
  if (!watermark) {
    return true;
  }
  if (stime > *watermark) {
    return false;
  }
  etime = std::min(etime, *watermark);
  return true;
}

void sort_events(std::vector<ScientificEvent>& events) { std::sort(events.begin(), events.end()); }

}  // namespace

SepiPlan plan_sepi_update(UnitId unit, const Eset& eset, const ActiveEvents& active, const PartitionResolver& resolve) {
  SepiPlan plan;
  const auto t = eset.t;
  const auto value = std::to_string(t);
  plan.next.reserve(eset.oids.size());
  for (const auto& oid : eset.oids) {
    const auto open = active.find(oid);
    if (open != active.end()) {
      plan.ops.push_back(WriteOp::update(keys::sepi(unit, oid, open->second.stime), value));
      plan.next.emplace(oid, open->second);
      plan.continued.push_back(oid);
    } else {
      plan.ops.push_back(WriteOp::put(keys::sepi(unit, oid, t), value));
      plan.next.emplace(oid, OpenEvent{format_eid(oid, t), t, resolve(oid)});
      plan.opened.push_back(oid);
    }
  }
  for (const auto& [oid, ev] : active) {
    if (!plan.next.contains(oid)) {
      plan.closed.push_back(oid);
    }
  }
  return plan;
}

std::vector<WriteOp> plan_epi_update(UnitId unit, Cycle t, const SepiPlan& plan) {
  std::vector<WriteOp> ops;
  ops.reserve(2 * (plan.opened.size() + plan.continued.size()));
  const auto end_value = std::to_string(t);
  for (const auto& oid : plan.opened) {
    ops.push_back(WriteOp::put(keys::epi_start(unit, oid, t), std::to_string(t) + "," + end_value));
    ops.push_back(WriteOp::put(keys::epi_end(unit, oid, t), end_value));
  }
  for (const auto& oid : plan.continued) {
    const auto stime = plan.next.at(oid).stime;
    ops.push_back(WriteOp::update(keys::epi_start(unit, oid, stime), std::to_string(stime) + "," + end_value));
    ops.push_back(WriteOp::update(keys::epi_end(unit, oid, stime), end_value));
  }
  return ops;
}

ActiveEvents sepi_update(KvBackend& store, UnitId unit, const Eset& eset, const ActiveEvents& active,
                         const PartitionResolver& resolve) {
  auto plan = plan_sepi_update(unit, eset, active, resolve);
  const auto acks = store.write_batch(plan.ops);
  for (std::size_t i = 0; i < acks.size(); ++i) {
    if (!acks[i].ok()) {
      throw StoreError(acks[i].code, "sepi write to " + plan.ops[i].key + " failed: " + acks[i].message);
    }
  }
  return std::move(plan.next);
}

IndexQueryResult sepi_query(KvBackend& store, const TimeInterval& interval, std::optional<Cycle> watermark) {
  IndexQueryResult result;
  // scan(): every entry; filter(): etime >= ts and stime <= te
  const auto entries = store.scan_prefix(keys::kSepi);
  result.scans = 1;
  for (const auto& kv : entries) {
    auto key = keys::parse_sepi(kv.key);
    auto etime = parse_number<Cycle>(kv.value);
    if (!visible(key.stime, etime, watermark)) continue;
    if (etime >= interval.ts() && key.stime <= interval.te()) {
      result.events.push_back(ScientificEvent{key.unit, std::move(key.oid), key.stime, etime});
    }
  }
  sort_events(result.events);
  return result;
}

IndexQueryResult epi_query(KvBackend& store, const TimeInterval& interval, std::optional<Cycle> watermark) {
  IndexQueryResult result;
  const auto in_range = [&](Cycle v) { return v >= interval.ts() && v <= interval.te(); };
  const auto epi_tail = [](std::string_view key, char& kind) {
    // "epi:<unit>:<S|E>:<oid>|<stime>"
    const auto rest = key.substr(keys::kEpi.size());
    const auto colon = rest.find(':');
    kind = rest.at(colon + 1);
    std::string tail(rest.substr(0, colon));
    tail += rest.substr(colon + 2);
    return keys::parse_event_tail(tail);
  };

  // scan 1: any endpoint inside [ts, te]; an event with both endpoints inside is hit twice
  std::vector<ScientificEvent> endpoint_hits;
  for (const auto& kv : store.scan_prefix(keys::kEpi)) {
    char kind = 0;
    auto key = epi_tail(kv.key, kind);
    Cycle etime = 0;
    if (kind == 'S') {
      const auto fields = split(kv.value, ',');
      etime = parse_number<Cycle>(fields.at(1));
    } else {
      etime = parse_number<Cycle>(kv.value);
    }
    if (!visible(key.stime, etime, watermark)) continue;
    const Cycle endpoint = kind == 'S' ? key.stime : etime;
    if (in_range(endpoint)) {
      endpoint_hits.push_back(ScientificEvent{key.unit, std::move(key.oid), key.stime, etime});
    }
  }
  ++result.scans;

  // distinct()
  sort_events(endpoint_hits);
  endpoint_hits.erase(std::unique(endpoint_hits.begin(), endpoint_hits.end()), endpoint_hits.end());
  ++result.dedup_passes;

  // scan 2: events piercing the interval (stime < ts and etime > te), read off the start records
  std::vector<ScientificEvent> piercing;
  for (const auto& kv : store.scan_prefix(keys::kEpi)) {
    char kind = 0;
    auto key = epi_tail(kv.key, kind);
    if (kind != 'S') continue;
    const auto fields = split(kv.value, ',');
    auto etime = parse_number<Cycle>(fields.at(1));
    if (!visible(key.stime, etime, watermark)) continue;
    if (key.stime < interval.ts() && etime > interval.te()) {
      piercing.push_back(ScientificEvent{key.unit, std::move(key.oid), key.stime, etime});
    }
  }
  ++result.scans;

  result.events = std::move(endpoint_hits);
  result.events.insert(result.events.end(), piercing.begin(), piercing.end());
  sort_events(result.events);
  return result;
}

std::optional<ScientificEvent> sepi_lookup(KvBackend& store, std::string_view eid, const std::vector<UnitId>& units,
                                           std::optional<Cycle> watermark) {
  const auto [oid, stime] = parse_eid(eid);
  for (auto unit : units) {
    auto value = store.get(keys::sepi(unit, oid, stime));
    if (!value) continue;
    auto etime = parse_number<Cycle>(*value);
    if (!visible(stime, etime, watermark)) {
      return std::nullopt;
    }
    return ScientificEvent{unit, oid, stime, etime};
  }
  return std::nullopt;
}

std::size_t sepi_entry_count(KvBackend& store) { return store.keys(keys::kSepi).size(); }

std::size_t epi_entry_count(KvBackend& store) { return store.keys(keys::kEpi).size(); }

}  // namespace aserv
