#include "aserv/resp.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "aserv/text.hpp"

namespace aserv::resp {

std::string encode_command(std::span<const std::string_view> args) {
  std::string out = "*" + std::to_string(args.size()) + "\r\n";
  for (auto arg : args) {
    out += '$';
    out += std::to_string(arg.size());
    out += "\r\n";
    out += arg;
    out += "\r\n";
  }
  return out;
}

std::string encode_command(std::initializer_list<std::string_view> args) {
  return encode_command(std::span<const std::string_view>(args.begin(), args.size()));
}

std::string encode(const Value& value) {
  switch (value.type) {
    case Value::Type::simple: return "+" + value.str + "\r\n";
    case Value::Type::error: return "-" + value.str + "\r\n";
    case Value::Type::integer: return ":" + std::to_string(value.integer) + "\r\n";
    case Value::Type::bulk: return "$" + std::to_string(value.str.size()) + "\r\n" + value.str + "\r\n";
    case Value::Type::null: return "$-1\r\n";
    case Value::Type::array: {
      std::string out = "*" + std::to_string(value.elements.size()) + "\r\n";
      for (const auto& e : value.elements) {
        out += encode(e);
      }
      return out;
    }
  }
  return {};
}

std::optional<std::string_view> Parser::line_at(std::size_t& pos) const {
  const auto end = buffer_.find("\r\n", pos);
  if (end == std::string::npos) {
    return std::nullopt;
  }
  auto line = std::string_view(buffer_).substr(pos, end - pos);
  pos = end + 2;
  return line;
}

std::optional<Value> Parser::parse_at(std::size_t& pos) const {
  if (pos >= buffer_.size()) {
    return std::nullopt;
  }
  const char tag = buffer_[pos];
  std::size_t cursor = pos + 1;
  const auto line = line_at(cursor);
  if (!line) {
    return std::nullopt;
  }
  switch (tag) {
    case '+':
      pos = cursor;
      return Value::simple_string(std::string(*line));
    case '-':
      pos = cursor;
      return Value::error(std::string(*line));
    case ':':
      pos = cursor;
      return Value::number(parse_number<std::int64_t>(*line));
    case '$': {
      const auto len = parse_number<std::int64_t>(*line);
      if (len < 0) {
        pos = cursor;
        return Value::nil();
      }
      const auto n = static_cast<std::size_t>(len);
      if (buffer_.size() < cursor + n + 2) {
        return std::nullopt;
      }
      if (buffer_.compare(cursor + n, 2, "\r\n") != 0) {
        throw std::runtime_error("resp: bulk string not terminated by CRLF");
      }
      auto v = Value::bulk_string(buffer_.substr(cursor, n));
      pos = cursor + n + 2;
      return v;
    }
    case '*': {
      const auto count = parse_number<std::int64_t>(*line);
      if (count < 0) {
        pos = cursor;
        return Value::nil();
      }
      std::vector<Value> items;
      items.reserve(static_cast<std::size_t>(count));
      for (std::int64_t i = 0; i < count; ++i) {
        auto item = parse_at(cursor);
        if (!item) {
          return std::nullopt;
        }
        items.push_back(std::move(*item));
      }
      pos = cursor;
      return Value::array(std::move(items));
    }
    default:
      throw std::runtime_error(std::string("resp: unexpected type byte '") + tag + "'");
  }
}

std::optional<Value> Parser::next() {
  auto pos = pos_;
  auto value = parse_at(pos);
  if (value) {
    pos_ = pos;
    if (pos_ == buffer_.size()) {
      buffer_.clear();
      pos_ = 0;
    } else if (pos_ > 1 << 20) {
      buffer_.erase(0, pos_);
      pos_ = 0;
    }
  }
  return value;
}

std::string glob_prefix(std::string_view prefix) {
  std::string out;
  out.reserve(prefix.size() + 1);
  for (char c : prefix) {
    if (c == '*' || c == '?' || c == '[' || c == ']' || c == '\\') {
      out += '\\';
    }
    out += c;
  }
  out += '*';
  return out;
}

}  // namespace aserv::resp

namespace aserv {
namespace {

Ack ack_from(const resp::Value& reply, bool nil_means_missing, std::string_view key) {
  if (reply.type == resp::Value::Type::error) {
    const bool wrong_type = reply.str.rfind("WRONGTYPE", 0) == 0;
    return Ack::failure(wrong_type ? StoreErrc::wrong_type : StoreErrc::unavailable, reply.str);
  }
  if (nil_means_missing && reply.type == resp::Value::Type::null) {
    return Ack::failure(StoreErrc::missing_key, "update of missing key " + std::string(key));
  }
  return {};
}

void throw_if_error(const resp::Value& reply) {
  if (reply.type == resp::Value::Type::error) {
    const bool wrong_type = reply.str.rfind("WRONGTYPE", 0) == 0;
    throw StoreError(wrong_type ? StoreErrc::wrong_type : StoreErrc::unavailable, reply.str);
  }
}

}  // namespace

RespBackend::RespBackend(RespOptions options) : options_(std::move(options)) { connect(); }

RespBackend::~RespBackend() { disconnect(); }

void RespBackend::connect() {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const auto port = std::to_string(options_.port);
  if (::getaddrinfo(options_.host.c_str(), port.c_str(), &hints, &found) != 0 || found == nullptr) {
    throw StoreError(StoreErrc::unavailable, "cannot resolve " + options_.host);
  }
  for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (fd_ < 0) {
    throw StoreError(StoreErrc::unavailable, "cannot connect to " + options_.host + ":" + port);
  }
}

void RespBackend::disconnect() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  parser_ = resp::Parser{};
}

std::vector<resp::Value> RespBackend::roundtrip(const std::string& payload, std::size_t replies) {
  if (fd_ < 0) {
    connect();
  }
  std::size_t sent = 0;
  while (sent < payload.size()) {
    const auto n = ::send(fd_, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      disconnect();
      throw StoreError(StoreErrc::unavailable, std::string("resp send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
  std::vector<resp::Value> out;
  out.reserve(replies);
  std::array<char, 64 * 1024> buf{};
  while (out.size() < replies) {
    if (auto v = parser_.next()) {
      out.push_back(std::move(*v));
      continue;
    }
    const auto n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n <= 0) {
      disconnect();
      throw StoreError(StoreErrc::unavailable, "resp connection closed");
    }
    parser_.feed(std::string_view(buf.data(), static_cast<std::size_t>(n)));
  }
  return out;
}

resp::Value RespBackend::call(std::initializer_list<std::string_view> args) {
  std::lock_guard lock(mutex_);
  return roundtrip(resp::encode_command(args), 1).front();
}

Ack RespBackend::put(std::string_view key, std::string_view value) {
  ++counters_.puts;
  try {
    return ack_from(call({"SET", key, value}), false, key);
  } catch (const StoreError& e) {
    return Ack::failure(e.code(), e.what());
  }
}

Ack RespBackend::update(std::string_view key, std::string_view value) {
  ++counters_.updates;
  try {
    return ack_from(call({"SET", key, value, "XX"}), true, key);
  } catch (const StoreError& e) {
    return Ack::failure(e.code(), e.what());
  }
}

Ack RespBackend::append(std::string_view key, std::string_view item) {
  ++counters_.appends;
  try {
    return ack_from(call({"RPUSH", key, item}), false, key);
  } catch (const StoreError& e) {
    return Ack::failure(e.code(), e.what());
  }
}

std::vector<Ack> RespBackend::write_batch(std::span<const WriteOp> ops) {
  ++counters_.batches;
  std::string payload;
  for (const auto& op : ops) {
    switch (op.kind) {
      case WriteOp::Kind::put:
        ++counters_.puts;
        payload += resp::encode_command({"SET", op.key, op.value});
        break;
      case WriteOp::Kind::update:
        ++counters_.updates;
        payload += resp::encode_command({"SET", op.key, op.value, "XX"});
        break;
      case WriteOp::Kind::append:
        ++counters_.appends;
        payload += resp::encode_command({"RPUSH", op.key, op.value});
        break;
    }
  }
  std::vector<Ack> acks;
  acks.reserve(ops.size());
  try {
    std::lock_guard lock(mutex_);
    const auto replies = roundtrip(payload, ops.size());
    for (std::size_t i = 0; i < ops.size(); ++i) {
      acks.push_back(ack_from(replies[i], ops[i].kind == WriteOp::Kind::update, ops[i].key));
    }
  } catch (const StoreError& e) {
    acks.assign(ops.size(), Ack::failure(e.code(), e.what()));
  }
  return acks;
}

std::optional<std::string> RespBackend::get(std::string_view key) {
  ++counters_.gets;
  auto reply = call({"GET", key});
  throw_if_error(reply);
  if (reply.type == resp::Value::Type::null) {
    return std::nullopt;
  }
  return std::move(reply.str);
}

std::vector<std::string> RespBackend::range(std::string_view key, std::int64_t start, std::int64_t stop) {
  ++counters_.range_reads;
  const auto s = std::to_string(start);
  const auto e = std::to_string(stop);
  auto reply = call({"LRANGE", key, s, e});
  throw_if_error(reply);
  std::vector<std::string> out;
  out.reserve(reply.elements.size());
  for (auto& item : reply.elements) {
    out.push_back(std::move(item.str));
  }
  return out;
}

std::vector<std::string> RespBackend::scan_keys(std::string_view prefix) {
  const auto pattern = resp::glob_prefix(prefix);
  const auto count = std::to_string(options_.scan_count);
  std::vector<std::string> out;
  std::string cursor = "0";
  do {
    auto reply = call({"SCAN", cursor, "MATCH", pattern, "COUNT", count});
    throw_if_error(reply);
    if (reply.elements.size() != 2) {
      throw StoreError(StoreErrc::unavailable, "resp: malformed SCAN reply");
    }
    cursor = reply.elements[0].str;
    for (auto& k : reply.elements[1].elements) {
      out.push_back(std::move(k.str));
    }
  } while (cursor != "0");
  // SCAN may repeat keys across iterations
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<KeyValue> RespBackend::scan_prefix(std::string_view prefix) {
  ++counters_.scans;
  const auto found = scan_keys(prefix);
  std::vector<KeyValue> out;
  constexpr std::size_t kChunk = 512;
  for (std::size_t i = 0; i < found.size(); i += kChunk) {
    std::vector<std::string_view> args{"MGET"};
    const auto end = std::min(found.size(), i + kChunk);
    for (auto j = i; j < end; ++j) {
      args.push_back(found[j]);
    }
    std::lock_guard lock(mutex_);
    auto reply = roundtrip(resp::encode_command(args), 1).front();
    throw_if_error(reply);
    for (auto j = i; j < end; ++j) {
      auto& v = reply.elements.at(j - i);
      // MGET reports list keys as nil
      if (v.type == resp::Value::Type::bulk) {
        out.push_back(KeyValue{found[j], std::move(v.str)});
      }
    }
  }
  return out;
}

std::vector<std::string> RespBackend::keys(std::string_view prefix) {
  ++counters_.key_listings;
  return scan_keys(prefix);
}

std::uint64_t RespBackend::key_count() {
  auto reply = call({"DBSIZE"});
  throw_if_error(reply);
  return static_cast<std::uint64_t>(reply.integer);
}

std::uint64_t RespBackend::bytes_stored() {
  auto reply = call({"INFO", "memory"});
  throw_if_error(reply);
  constexpr std::string_view kField = "used_memory:";
  const auto at = reply.str.find(kField);
  if (at == std::string::npos) {
    return 0;
  }
  const auto start = at + kField.size();
  const auto end = reply.str.find_first_of("\r\n", start);
  return parse_number<std::uint64_t>(std::string_view(reply.str).substr(start, end - start));
}

}  // namespace aserv
