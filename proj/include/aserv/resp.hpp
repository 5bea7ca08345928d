#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aserv/storage.hpp"

namespace aserv::resp {

struct Value {
  enum class Type { simple, error, integer, bulk, null, array };

  Type type = Type::null;
  std::string str;
  std::int64_t integer = 0;
  std::vector<Value> elements;

  static Value simple_string(std::string s) { return {Type::simple, std::move(s), 0, {}}; }
  static Value error(std::string s) { return {Type::error, std::move(s), 0, {}}; }
  static Value number(std::int64_t v) { return {Type::integer, {}, v, {}}; }
  static Value bulk_string(std::string s) { return {Type::bulk, std::move(s), 0, {}}; }
  static Value nil() { return {}; }
  static Value array(std::vector<Value> items) { return {Type::array, {}, 0, std::move(items)}; }
};

/// Command as an array of bulk strings: "*N\r\n$len\r\narg\r\n...".
std::string encode_command(std::span<const std::string_view> args);
std::string encode_command(std::initializer_list<std::string_view> args);

std::string encode(const Value& value);

/// Incremental reply decoder; feed bytes as they arrive, pull complete values.
class Parser {
public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  /// Next complete value, or nullopt if more bytes are needed.
  /// Throws std::runtime_error on malformed input.
  std::optional<Value> next();
  bool empty() const noexcept { return pos_ >= buffer_.size(); }

private:
  std::optional<Value> parse_at(std::size_t& pos) const;
  std::optional<std::string_view> line_at(std::size_t& pos) const;

  std::string buffer_;
  std::size_t pos_ = 0;
};

/// Escapes glob metacharacters so a literal prefix can be used in SCAN MATCH.
std::string glob_prefix(std::string_view prefix);

}  // namespace aserv::resp

namespace aserv {

struct RespOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 6379;
  std::size_t scan_count = 1000;
};

/// Client backend for an external store speaking RESP. Batches are pipelined:
/// all commands are written before any reply is read.
class RespBackend final : public KvBackend {
public:
  explicit RespBackend(RespOptions options);
  ~RespBackend() override;

  RespBackend(const RespBackend&) = delete;
  RespBackend& operator=(const RespBackend&) = delete;

  Ack put(std::string_view key, std::string_view value) override;
  Ack update(std::string_view key, std::string_view value) override;
  Ack append(std::string_view key, std::string_view item) override;
  std::optional<std::string> get(std::string_view key) override;
  std::vector<std::string> range(std::string_view key, std::int64_t start, std::int64_t stop) override;
  std::vector<KeyValue> scan_prefix(std::string_view prefix) override;
  std::vector<std::string> keys(std::string_view prefix) override;
  std::vector<Ack> write_batch(std::span<const WriteOp> ops) override;
  std::uint64_t key_count() override;
  std::uint64_t bytes_stored() override;

private:
  std::vector<resp::Value> roundtrip(const std::string& payload, std::size_t replies);
  resp::Value call(std::initializer_list<std::string_view> args);
  std::vector<std::string> scan_keys(std::string_view prefix);
  void connect();
  void disconnect() noexcept;

  RespOptions options_;
  std::mutex mutex_;
  int fd_ = -1;
  resp::Parser parser_;
};

}  // namespace aserv
