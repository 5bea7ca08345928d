#include "aserv/domain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace aserv {

std::string ScientificEvent::eid() const { return format_eid(oid, stime); }

Region::Region(double x, double y, double r) : x_(x), y_(y), r_(r) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(r) || r <= 0.0) {
    throw std::invalid_argument("region: radius must be positive and coordinates finite");
  }
}

TimeInterval::TimeInterval(Cycle ts, Cycle te) : ts_(ts), te_(te) {
  if (ts > te) {
    throw std::invalid_argument("time interval: ts must not exceed te");
  }
}

bool intersects(const TimeInterval& a, const TimeInterval& b) noexcept {
  return std::max(a.ts(), b.ts()) <= std::min(a.te(), b.te());
}

bool contains(const Region& reg, double x, double y) noexcept {
  const double dx = x - reg.x();
  const double dy = y - reg.y();
  return dx * dx + dy * dy <= reg.r() * reg.r();
}

void validate_oid(std::string_view oid) {
  if (oid.empty()) {
    throw std::invalid_argument("oid must not be empty");
  }
  if (oid.find('|') != std::string_view::npos) {
    throw std::invalid_argument("oid must not contain '|': " + std::string(oid));
  }
}

std::string format_eid(std::string_view oid, Cycle stime) {
  std::string eid(oid);
  eid.push_back('|');
  eid += std::to_string(stime);
  return eid;
}

std::pair<std::string, Cycle> parse_eid(std::string_view eid) {
  const auto bar = eid.rfind('|');
  if (bar == std::string_view::npos || bar == 0 || bar + 1 == eid.size()) {
    throw std::invalid_argument("malformed eid: " + std::string(eid));
  }
  const auto digits = eid.substr(bar + 1);
  Cycle stime = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), stime);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || stime < 0) {
    throw std::invalid_argument("malformed eid stime: " + std::string(eid));
  }
  auto oid = std::string(eid.substr(0, bar));
  validate_oid(oid);
  return {std::move(oid), stime};
}

}  // namespace aserv
