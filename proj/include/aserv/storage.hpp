#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace aserv {

enum class StoreErrc { ok, unavailable, oversized, missing_key, wrong_type, invalid_key };

const char* to_string(StoreErrc code) noexcept;

/// Per-operation status returned synchronously to the writer.
struct Ack {
  StoreErrc code = StoreErrc::ok;
  std::string message;

  bool ok() const noexcept { return code == StoreErrc::ok; }
  static Ack failure(StoreErrc code, std::string message) { return Ack{code, std::move(message)}; }
};

/// Read-path failure (writes report through Ack instead).
class StoreError : public std::runtime_error {
public:
  StoreError(StoreErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  StoreErrc code() const noexcept { return code_; }

private:
  StoreErrc code_;
};

struct WriteOp {
  enum class Kind { put, update, append };

  Kind kind;
  std::string key;
  std::string value;

  static WriteOp put(std::string key, std::string value) { return {Kind::put, std::move(key), std::move(value)}; }
  static WriteOp update(std::string key, std::string value) {
    return {Kind::update, std::move(key), std::move(value)};
  }
  static WriteOp append(std::string key, std::string value) {
    return {Kind::append, std::move(key), std::move(value)};
  }
};

struct KeyValue {
  std::string key;
  std::string value;
};

/// Operation counters, bumped once per logical call.
struct StoreCounters {
  std::atomic<std::uint64_t> puts{0};
  std::atomic<std::uint64_t> updates{0};
  std::atomic<std::uint64_t> appends{0};
  std::atomic<std::uint64_t> gets{0};
  std::atomic<std::uint64_t> range_reads{0};
  std::atomic<std::uint64_t> scans{0};
  std::atomic<std::uint64_t> key_listings{0};
  std::atomic<std::uint64_t> batches{0};

  void reset() noexcept;
};

struct CounterSnapshot {
  std::uint64_t puts = 0;
  std::uint64_t updates = 0;
  std::uint64_t appends = 0;
  std::uint64_t gets = 0;
  std::uint64_t range_reads = 0;
  std::uint64_t scans = 0;
  std::uint64_t key_listings = 0;
  std::uint64_t batches = 0;

  std::uint64_t writes() const noexcept { return puts + updates + appends; }
};

CounterSnapshot operator-(const CounterSnapshot& a, const CounterSnapshot& b) noexcept;

/// Key-value store with key-list semantics. A key holds either a scalar value
/// (put/get/update) or an append-ordered list (append/range).
class KvBackend {
public:
  virtual ~KvBackend() = default;

  virtual Ack put(std::string_view key, std::string_view value) = 0;
  /// Overwrites an existing scalar; fails with missing_key when absent.
  virtual Ack update(std::string_view key, std::string_view value) = 0;
  virtual Ack append(std::string_view key, std::string_view item) = 0;

  virtual std::optional<std::string> get(std::string_view key) = 0;
  /// Inclusive list slice; negative indices count from the tail. Missing key -> empty.
  virtual std::vector<std::string> range(std::string_view key, std::int64_t start = 0, std::int64_t stop = -1) = 0;
  /// Scalar entries whose key starts with `prefix`, each exactly once, order unspecified.
  virtual std::vector<KeyValue> scan_prefix(std::string_view prefix) = 0;
  /// Keys of any kind starting with `prefix`.
  virtual std::vector<std::string> keys(std::string_view prefix) = 0;

  /// Applies ops in order, one Ack per op. Backends may pipeline.
  virtual std::vector<Ack> write_batch(std::span<const WriteOp> ops);

  virtual std::uint64_t key_count() = 0;
  virtual std::uint64_t bytes_stored() = 0;
  /// Key plus value bytes of keys under `prefix`.
  virtual std::uint64_t bytes_with_prefix(std::string_view prefix);

  CounterSnapshot counters() const noexcept;
  void reset_counters() noexcept { counters_.reset(); }

protected:
  Ack apply(const WriteOp& op);

  StoreCounters counters_;
};

struct MemoryBackendOptions {
  std::size_t shards = 16;
  std::size_t max_item_bytes = 512u * 1024u * 1024u;
};

/// Embedded in-process store: keys hashed across shards, one reader/writer lock per shard.
class MemoryBackend final : public KvBackend {
public:
  explicit MemoryBackend(MemoryBackendOptions options = {});

  Ack put(std::string_view key, std::string_view value) override;
  Ack update(std::string_view key, std::string_view value) override;
  Ack append(std::string_view key, std::string_view item) override;
  std::optional<std::string> get(std::string_view key) override;
  std::vector<std::string> range(std::string_view key, std::int64_t start, std::int64_t stop) override;
  std::vector<KeyValue> scan_prefix(std::string_view prefix) override;
  std::vector<std::string> keys(std::string_view prefix) override;
  std::uint64_t key_count() override;
  std::uint64_t bytes_stored() override;
  std::uint64_t bytes_with_prefix(std::string_view prefix) override;

  /// Fault injection: while unavailable every call fails with StoreErrc::unavailable.
  void set_available(bool available) noexcept { available_.store(available); }
  /// Fault injection: the next n write operations fail with StoreErrc::unavailable.
  void fail_next_writes(std::uint64_t n) noexcept { fail_writes_.store(n); }

private:
  using Entry = std::variant<std::string, std::vector<std::string>>;

  struct Shard {
    mutable std::shared_mutex mutex;
    std::map<std::string, Entry, std::less<>> entries;
  };

  Shard& shard_for(std::string_view key);
  std::optional<Ack> write_fault(std::string_view key, std::size_t value_size);
  void check_readable() const;

  MemoryBackendOptions options_;
  std::vector<std::unique_ptr<Shard>> shards_;
  std::atomic<std::uint64_t> bytes_{0};
  std::atomic<std::uint64_t> key_count_{0};
  std::atomic<bool> available_{true};
  std::atomic<std::uint64_t> fail_writes_{0};
};

}  // namespace aserv
