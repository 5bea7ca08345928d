#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "aserv/domain.hpp"

namespace aserv {

struct Point {
  double x{};
  double y{};

  friend bool operator==(const Point&, const Point&) = default;
};

/// Partition identifier: the owning unit plus the row-major cell index in its grid.
struct PartitionId {
  UnitId unit{};
  std::uint32_t cell{};

  friend auto operator<=>(const PartitionId&, const PartitionId&) = default;
};

struct PartitionIdHash {
  std::size_t operator()(const PartitionId& p) const noexcept {
    return (static_cast<std::size_t>(p.unit) << 32) ^ p.cell;
  }
};

/// "<unit>:<cell>", the textual form used inside store keys.
std::string to_string(const PartitionId& pid);
PartitionId parse_partition_id(std::string_view text);

struct PartitionMeta {
  PartitionId pid;
  Point lo;
  Point hi;
};

/// Minimum even-grid cell count that keeps region-search accuracy >= alpha for
/// circles of radius r over a sub-area of size s:
///
///   gn = ceil(64 s alpha^2 / (pi r (1 - alpha))^2)
///
/// Throws std::domain_error for alpha outside (0,1), r <= 0 or s <= 0.
std::int64_t grid_number(double alpha, double r, double s);

/// Lowest accuracy bound pi r / (4(w + h) + pi r) guaranteed for radius r on cells of w x h.
double accuracy_bound(double r, double cell_w, double cell_h);

/// Even grid over one unit's square sub-area.
///
/// Cells are half-open [lo, hi) except that the last column and the top row are
/// closed on their outer edge, so every point of the sub-area has exactly one owner.
class PartitionGrid {
public:
  /// Sizes the grid from grid_number(alpha, r_min, s) with gx = gy = ceil(sqrt(gn)).
  static PartitionGrid build(UnitId unit, Point origin, double s, double alpha, double r_min);

  /// Square grid with at least `partitions` cells (ceil(sqrt) per axis); used for overrides.
  static PartitionGrid with_partitions(UnitId unit, Point origin, double s, std::int64_t partitions);

  PartitionGrid(UnitId unit, Point origin, double side, std::uint32_t gx, std::uint32_t gy);

  UnitId unit() const noexcept { return unit_; }
  Point origin() const noexcept { return origin_; }
  double side() const noexcept { return side_; }
  std::uint32_t gx() const noexcept { return gx_; }
  std::uint32_t gy() const noexcept { return gy_; }
  double cell_w() const noexcept { return cell_w_; }
  double cell_h() const noexcept { return cell_h_; }
  std::uint32_t cell_count() const noexcept { return gx_ * gy_; }

  bool covers(double x, double y) const noexcept;

  /// Throws std::out_of_range when (x, y) lies outside the sub-area.
  PartitionId partition_of(double x, double y) const;

  PartitionMeta meta(std::uint32_t cell) const;
  std::vector<PartitionMeta> all_meta() const;

  /// Every cell whose closed rectangle meets the closed disk. Empty when the disk
  /// misses the sub-area entirely.
  std::vector<PartitionId> parse_region(const Region& reg) const;

private:
  double x_edge(std::uint32_t i) const noexcept;
  double y_edge(std::uint32_t i) const noexcept;
  std::uint32_t column_of(double x) const noexcept;
  std::uint32_t row_of(double y) const noexcept;

  UnitId unit_;
  Point origin_;
  double side_;
  std::uint32_t gx_;
  std::uint32_t gy_;
  double cell_w_;
  double cell_h_;
};

/// Union of parse_region over every grid; grids whose sub-area misses the disk contribute nothing.
std::vector<PartitionId> parse_region(const std::vector<PartitionGrid>& grids, const Region& reg);

/// Locates the grid of `unit`; throws std::out_of_range if absent.
const PartitionGrid& grid_for(const std::vector<PartitionGrid>& grids, UnitId unit);

/// Metadata record value "lox,loy,hix,hiy".
std::string encode_meta(const PartitionMeta& meta);
PartitionMeta decode_meta(const PartitionId& pid, std::string_view value);

}  // namespace aserv
