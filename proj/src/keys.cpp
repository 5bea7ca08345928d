#include "aserv/keys.hpp"

#include <stdexcept>

#include "aserv/text.hpp"

namespace aserv::keys {
namespace {

std::string with_pid(std::string_view prefix, const PartitionId& pid) {
  std::string out(prefix);
  out += to_string(pid);
  return out;
}

std::string event_tail(UnitId unit, std::string_view oid, Cycle stime) {
  std::string out = std::to_string(unit);
  out += ':';
  out += oid;
  out += '|';
  out += zero_pad(stime, kStimeWidth);
  return out;
}

}  // namespace

std::string partition(const PartitionId& pid) { return with_pid(kPartition, pid); }
std::string icr(const PartitionId& pid) { return with_pid(kIcr, pid); }
std::string meta(const PartitionId& pid) { return with_pid(kMeta, pid); }

std::string event(UnitId unit, std::string_view eid) {
  std::string out(kEvent);
  out += std::to_string(unit);
  out += ':';
  out += eid;
  return out;
}

std::string sepi(UnitId unit, std::string_view oid, Cycle stime) {
  return std::string(kSepi) + event_tail(unit, oid, stime);
}

EventKey parse_event_tail(std::string_view tail) {
  const auto colon = tail.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("malformed event key: " + std::string(tail));
  }
  auto [oid, stime] = parse_eid(tail.substr(colon + 1));
  return EventKey{parse_number<UnitId>(tail.substr(0, colon)), std::move(oid), stime};
}

EventKey parse_sepi(std::string_view key) {
  if (!key.starts_with(kSepi)) {
    throw std::invalid_argument("not a SEPI key: " + std::string(key));
  }
  return parse_event_tail(key.substr(kSepi.size()));
}

std::string epi_start(UnitId unit, std::string_view oid, Cycle stime) {
  std::string out(kEpi);
  out += std::to_string(unit);
  out += ":S:";
  out += oid;
  out += '|';
  out += zero_pad(stime, kStimeWidth);
  return out;
}

std::string epi_end(UnitId unit, std::string_view oid, Cycle stime) {
  std::string out(kEpi);
  out += std::to_string(unit);
  out += ":E:";
  out += oid;
  out += '|';
  out += zero_pad(stime, kStimeWidth);
  return out;
}

PartitionId parse_partition_key(std::string_view key, std::string_view prefix) {
  if (!key.starts_with(prefix)) {
    throw std::invalid_argument("key " + std::string(key) + " lacks prefix " + std::string(prefix));
  }
  return parse_partition_id(key.substr(prefix.size()));
}

}  // namespace aserv::keys
