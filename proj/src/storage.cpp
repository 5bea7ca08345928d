#include "aserv/storage.hpp"

#include <algorithm>
#include <functional>
#include <mutex>

namespace aserv {

const char* to_string(StoreErrc code) noexcept {
  switch (code) {
    case StoreErrc::ok: return "ok";
    case StoreErrc::unavailable: return "backend unavailable";
    case StoreErrc::oversized: return "oversized item";
    case StoreErrc::missing_key: return "missing key";
    case StoreErrc::wrong_type: return "wrong value type";
    case StoreErrc::invalid_key: return "invalid key";
  }
  return "unknown";
}

void StoreCounters::reset() noexcept {
  puts = 0;
  updates = 0;
  appends = 0;
  gets = 0;
  range_reads = 0;
  scans = 0;
  key_listings = 0;
  batches = 0;
}

CounterSnapshot operator-(const CounterSnapshot& a, const CounterSnapshot& b) noexcept {
  return CounterSnapshot{a.puts - b.puts,
                         a.updates - b.updates,
                         a.appends - b.appends,
                         a.gets - b.gets,
                         a.range_reads - b.range_reads,
                         a.scans - b.scans,
                         a.key_listings - b.key_listings,
                         a.batches - b.batches};
}

CounterSnapshot KvBackend::counters() const noexcept {
  return CounterSnapshot{counters_.puts.load(),       counters_.updates.load(), counters_.appends.load(),
                         counters_.gets.load(),       counters_.range_reads.load(), counters_.scans.load(),
                         counters_.key_listings.load(), counters_.batches.load()};
}

Ack KvBackend::apply(const WriteOp& op) {
  switch (op.kind) {
    case WriteOp::Kind::put: return put(op.key, op.value);
    case WriteOp::Kind::update: return update(op.key, op.value);
    case WriteOp::Kind::append: return append(op.key, op.value);
  }
  return Ack::failure(StoreErrc::invalid_key, "unknown op");
}

std::vector<Ack> KvBackend::write_batch(std::span<const WriteOp> ops) {
  ++counters_.batches;
  std::vector<Ack> acks;
  acks.reserve(ops.size());
  for (const auto& op : ops) {
    acks.push_back(apply(op));
  }
  return acks;
}

std::uint64_t KvBackend::bytes_with_prefix(std::string_view prefix) {
  std::uint64_t total = 0;
  std::vector<std::string> scalars;
  for (const auto& kv : scan_prefix(prefix)) {
    total += kv.key.size() + kv.value.size();
    scalars.push_back(kv.key);
  }
  std::sort(scalars.begin(), scalars.end());
  for (const auto& key : keys(prefix)) {
    if (std::binary_search(scalars.begin(), scalars.end(), key)) continue;
    total += key.size();
    for (const auto& item : range(key, 0, -1)) {
      total += item.size();
    }
  }
  return total;
}

MemoryBackend::MemoryBackend(MemoryBackendOptions options) : options_(options) {
  options_.shards = std::max<std::size_t>(1, options_.shards);
  shards_.reserve(options_.shards);
  for (std::size_t i = 0; i < options_.shards; ++i) {
    shards_.push_back(std::make_unique<Shard>());
  }
}

MemoryBackend::Shard& MemoryBackend::shard_for(std::string_view key) {
  return *shards_[std::hash<std::string_view>{}(key) % shards_.size()];
}

std::optional<Ack> MemoryBackend::write_fault(std::string_view key, std::size_t value_size) {
  if (key.empty()) {
    return Ack::failure(StoreErrc::invalid_key, "empty key");
  }
  if (!available_.load()) {
    return Ack::failure(StoreErrc::unavailable, "memory backend marked unavailable");
  }
  auto pending = fail_writes_.load();
  while (pending > 0) {
    if (fail_writes_.compare_exchange_weak(pending, pending - 1)) {
      return Ack::failure(StoreErrc::unavailable, "injected write failure");
    }
  }
  if (value_size > options_.max_item_bytes) {
    return Ack::failure(StoreErrc::oversized, "item of " + std::to_string(value_size) + " bytes exceeds limit");
  }
  return std::nullopt;
}

void MemoryBackend::check_readable() const {
  if (!available_.load()) {
    throw StoreError(StoreErrc::unavailable, "memory backend marked unavailable");
  }
}

Ack MemoryBackend::put(std::string_view key, std::string_view value) {
  ++counters_.puts;
  if (auto fault = write_fault(key, value.size())) return *fault;
  auto& shard = shard_for(key);
  std::unique_lock lock(shard.mutex);
  auto it = shard.entries.find(key);
  if (it == shard.entries.end()) {
    shard.entries.emplace(std::string(key), std::string(value));
    ++key_count_;
    bytes_ += key.size() + value.size();
    return {};
  }
  auto* scalar = std::get_if<std::string>(&it->second);
  if (scalar == nullptr) {
    return Ack::failure(StoreErrc::wrong_type, "put on list key " + std::string(key));
  }
  bytes_ += value.size();
  bytes_ -= scalar->size();
  scalar->assign(value);
  return {};
}

Ack MemoryBackend::update(std::string_view key, std::string_view value) {
  ++counters_.updates;
  if (auto fault = write_fault(key, value.size())) return *fault;
  auto& shard = shard_for(key);
  std::unique_lock lock(shard.mutex);
  auto it = shard.entries.find(key);
  if (it == shard.entries.end()) {
    return Ack::failure(StoreErrc::missing_key, "update of missing key " + std::string(key));
  }
  auto* scalar = std::get_if<std::string>(&it->second);
  if (scalar == nullptr) {
    return Ack::failure(StoreErrc::wrong_type, "update on list key " + std::string(key));
  }
  bytes_ += value.size();
  bytes_ -= scalar->size();
  scalar->assign(value);
  return {};
}

Ack MemoryBackend::append(std::string_view key, std::string_view item) {
  ++counters_.appends;
  if (auto fault = write_fault(key, item.size())) return *fault;
  auto& shard = shard_for(key);
  std::unique_lock lock(shard.mutex);
  auto it = shard.entries.find(key);
  if (it == shard.entries.end()) {
    it = shard.entries.emplace(std::string(key), std::vector<std::string>{}).first;
    ++key_count_;
    bytes_ += key.size();
  }
  auto* list = std::get_if<std::vector<std::string>>(&it->second);
  if (list == nullptr) {
    return Ack::failure(StoreErrc::wrong_type, "append on scalar key " + std::string(key));
  }
  list->emplace_back(item);
  bytes_ += item.size();
  return {};
}

std::optional<std::string> MemoryBackend::get(std::string_view key) {
  ++counters_.gets;
  check_readable();
  auto& shard = shard_for(key);
  std::shared_lock lock(shard.mutex);
  auto it = shard.entries.find(key);
  if (it == shard.entries.end()) {
    return std::nullopt;
  }
  if (const auto* scalar = std::get_if<std::string>(&it->second)) {
    return *scalar;
  }
  throw StoreError(StoreErrc::wrong_type, "get on list key " + std::string(key));
}

std::vector<std::string> MemoryBackend::range(std::string_view key, std::int64_t start, std::int64_t stop) {
  ++counters_.range_reads;
  check_readable();
  auto& shard = shard_for(key);
  std::shared_lock lock(shard.mutex);
  auto it = shard.entries.find(key);
  if (it == shard.entries.end()) {
    return {};
  }
  const auto* list = std::get_if<std::vector<std::string>>(&it->second);
  if (list == nullptr) {
    throw StoreError(StoreErrc::wrong_type, "range on scalar key " + std::string(key));
  }
  const auto n = static_cast<std::int64_t>(list->size());
  if (start < 0) start = std::max<std::int64_t>(0, n + start);
  if (stop < 0) stop = n + stop;
  stop = std::min(stop, n - 1);
  if (start > stop) {
    return {};
  }
  return std::vector<std::string>(list->begin() + start, list->begin() + stop + 1);
}

std::vector<KeyValue> MemoryBackend::scan_prefix(std::string_view prefix) {
  ++counters_.scans;
  check_readable();
  std::vector<KeyValue> out;
  for (auto& shard : shards_) {
    std::shared_lock lock(shard->mutex);
    for (auto it = shard->entries.lower_bound(prefix);
         it != shard->entries.end() && std::string_view(it->first).starts_with(prefix); ++it) {
      if (const auto* scalar = std::get_if<std::string>(&it->second)) {
        out.push_back(KeyValue{it->first, *scalar});
      }
    }
  }
  return out;
}

std::vector<std::string> MemoryBackend::keys(std::string_view prefix) {
  ++counters_.key_listings;
  check_readable();
  std::vector<std::string> out;
  for (auto& shard : shards_) {
    std::shared_lock lock(shard->mutex);
    for (auto it = shard->entries.lower_bound(prefix);
         it != shard->entries.end() && std::string_view(it->first).starts_with(prefix); ++it) {
      out.push_back(it->first);
    }
  }
  return out;
}

std::uint64_t MemoryBackend::key_count() { return key_count_.load(); }

std::uint64_t MemoryBackend::bytes_stored() { return bytes_.load(); }

std::uint64_t MemoryBackend::bytes_with_prefix(std::string_view prefix) {
  check_readable();
  std::uint64_t total = 0;
  for (auto& shard : shards_) {
    std::shared_lock lock(shard->mutex);
    for (auto it = shard->entries.lower_bound(prefix);
         it != shard->entries.end() && std::string_view(it->first).starts_with(prefix); ++it) {
      total += it->first.size();
      if (const auto* scalar = std::get_if<std::string>(&it->second)) {
        total += scalar->size();
      } else {
        for (const auto& item : std::get<std::vector<std::string>>(it->second)) {
          total += item.size();
        }
      }
    }
  }
  return total;
}

}  // namespace aserv
