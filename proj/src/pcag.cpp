#include "aserv/pcag.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

#include "aserv/keys.hpp"
#include "aserv/text.hpp"

namespace aserv {

std::string encode_icr(const Icr& icr) {
  return std::to_string(icr.total) + "|" + std::to_string(icr.fresh) + "|" + std::to_string(icr.t);
}

Icr decode_icr(const PartitionId& pid, std::string_view value) {
  const auto fields = split(value, '|');
  if (fields.size() != 3) {
    throw IntegrityError("malformed ICR value '" + std::string(value) + "' in partition " + to_string(pid));
  }
  Icr icr{pid, parse_number<Cycle>(fields[2]), parse_number<std::uint32_t>(fields[0]),
          parse_number<std::uint32_t>(fields[1])};
  if (icr.fresh > icr.total) {
    throw IntegrityError("ICR with new > total in partition " + to_string(pid));
  }
  return icr;
}

std::vector<Icr> emit_icrs(Cycle t, const ActiveEvents& active) {
  std::map<PartitionId, Icr> by_pid;
  for (const auto& [oid, ev] : active) {
    auto& icr = by_pid.try_emplace(ev.pid, Icr{ev.pid, t, 0, 0}).first->second;
    ++icr.total;
    if (ev.stime == t) {
      ++icr.fresh;
    }
  }
  std::vector<Icr> out;
  out.reserve(by_pid.size());
  for (auto& [pid, icr] : by_pid) {
    out.push_back(icr);
  }
  return out;
}

std::vector<WriteOp> icr_ops(std::span<const Icr> icrs) {
  std::vector<WriteOp> ops;
  ops.reserve(icrs.size());
  for (const auto& icr : icrs) {
    ops.push_back(WriteOp::append(keys::icr(icr.pid), encode_icr(icr)));
  }
  return ops;
}

std::int64_t partition_count(std::span<const Icr> icrs, const TimeInterval& interval, std::optional<Cycle> watermark) {
  const auto ts = interval.ts();
  auto te = interval.te();
  if (watermark) {
    te = std::min(te, *watermark);
  }
  if (ts > te) {
    return 0;
  }
  const auto by_time = [](const Icr& icr, Cycle t) { return icr.t < t; };
  auto it = std::lower_bound(icrs.begin(), icrs.end(), ts, by_time);
  std::int64_t count = 0;
  if (it != icrs.end() && it->t == ts) {
    count += it->total;
    ++it;
  }
  for (; it != icrs.end() && it->t <= te; ++it) {
    count += it->fresh;
  }
  return count;
}

std::vector<Icr> load_icrs(KvBackend& store, const PartitionId& pid) {
  const auto values = store.range(keys::icr(pid), 0, -1);
  std::vector<Icr> icrs;
  icrs.reserve(values.size());
  for (const auto& v : values) {
    icrs.push_back(decode_icr(pid, v));
  }
  for (std::size_t i = 1; i < icrs.size(); ++i) {
    if (icrs[i].t <= icrs[i - 1].t) {
      throw IntegrityError("ICR list of partition " + to_string(pid) + " is not strictly time-ordered");
    }
  }
  return icrs;
}

std::int64_t pcag_count(KvBackend& store, std::span<const PartitionId> pids, const TimeInterval& interval,
                        std::optional<Cycle> watermark) {
  std::vector<PartitionId> unique(pids.begin(), pids.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  // map: one partial per partition; reduce: a single sum
  std::vector<std::int64_t> partials;
  partials.reserve(unique.size());
  for (const auto& pid : unique) {
    const auto icrs = load_icrs(store, pid);
    partials.push_back(partition_count(icrs, interval, watermark));
  }
  return std::reduce(partials.begin(), partials.end(), std::int64_t{0});
}

std::vector<PartitionId> icr_partitions(KvBackend& store) {
  std::vector<PartitionId> out;
  for (const auto& key : store.keys(keys::kIcr)) {
    out.push_back(keys::parse_partition_key(key, keys::kIcr));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace aserv
