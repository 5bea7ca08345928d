#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace aserv {

/// Survey cycle index. Wall-clock time is epoch + t * ct and never enters query logic.
using Cycle = std::int64_t;

/// Sentinel for "no cycle committed yet".
inline constexpr Cycle kNoCycle = -1;

using UnitId = std::uint32_t;

/// Thrown when stored data contradicts what ingest must have written.
class IntegrityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a query references an event or key that does not exist.
class NotFoundError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One object observation of one cycle: <oid, x, y, t, d1..dm>.
struct CatalogTuple {
  std::string oid;
  double x{};
  double y{};
  Cycle t{};
  std::vector<double> d;
};

/// A catalog tuple reduced to the c major attributes.
struct ValidTuple {
  std::string oid;
  double x{};
  double y{};
  Cycle t{};
  std::vector<double> d;
};

/// Set of object ids flagged by the detector at cycle t.
struct Eset {
  Cycle t{};
  std::vector<std::string> oids;
};

struct ScientificEvent {
  UnitId unit{};
  std::string oid;
  Cycle stime{};
  Cycle etime{};

  std::string eid() const;

  friend bool operator==(const ScientificEvent&, const ScientificEvent&) = default;
  friend auto operator<=>(const ScientificEvent& a, const ScientificEvent& b) {
    return std::tie(a.unit, a.oid, a.stime, a.etime) <=> std::tie(b.unit, b.oid, b.stime, b.etime);
  }
};

/// Closed disk region(x, y, r); r > 0.
class Region {
public:
  Region(double x, double y, double r);

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double r() const noexcept { return r_; }

private:
  double x_;
  double y_;
  double r_;
};

/// Closed cycle interval [ts, te]; ts <= te.
class TimeInterval {
public:
  TimeInterval(Cycle ts, Cycle te);

  Cycle ts() const noexcept { return ts_; }
  Cycle te() const noexcept { return te_; }

  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;

private:
  Cycle ts_;
  Cycle te_;
};

bool intersects(const TimeInterval& a, const TimeInterval& b) noexcept;

/// Boundary inclusive.
bool contains(const Region& reg, double x, double y) noexcept;

/// Rejects empty oids and oids containing '|'.
void validate_oid(std::string_view oid);

std::string format_eid(std::string_view oid, Cycle stime);

/// Splits "oid|stime" at the last '|'. Leading zeros in stime are accepted.
std::pair<std::string, Cycle> parse_eid(std::string_view eid);

}  // namespace aserv
