#include "aserv/epgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "aserv/text.hpp"

namespace aserv {

std::string to_string(const PartitionId& pid) {
  return std::to_string(pid.unit) + ":" + std::to_string(pid.cell);
}

PartitionId parse_partition_id(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("malformed partition id: " + std::string(text));
  }
  return PartitionId{parse_number<UnitId>(text.substr(0, colon)),
                     parse_number<std::uint32_t>(text.substr(colon + 1))};
}

std::int64_t grid_number(double alpha, double r, double s) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("grid_number: alpha must lie in (0, 1)");
  }
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw std::domain_error("grid_number: radius must be positive");
  }
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw std::domain_error("grid_number: sub-area must be positive");
  }
  const long double a = alpha;
  const long double denom = std::numbers::pi_v<long double> * r * (1.0L - a);
  const long double gn = std::ceil(64.0L * s * a * a / (denom * denom));
  if (!std::isfinite(gn) || gn > static_cast<long double>(std::numeric_limits<std::uint32_t>::max())) {
    throw std::domain_error("grid_number: result exceeds the supported cell count");
  }
  return static_cast<std::int64_t>(gn);
}

double accuracy_bound(double r, double cell_w, double cell_h) {
  const double pr = std::numbers::pi * r;
  return pr / (4.0 * (cell_w + cell_h) + pr);
}

PartitionGrid PartitionGrid::build(UnitId unit, Point origin, double s, double alpha, double r_min) {
  return with_partitions(unit, origin, s, grid_number(alpha, r_min, s));
}

PartitionGrid PartitionGrid::with_partitions(UnitId unit, Point origin, double s, std::int64_t partitions) {
  if (!(s > 0.0)) {
    throw std::domain_error("partition grid: sub-area must be positive");
  }
  if (partitions < 1) {
    throw std::domain_error("partition grid: need at least one partition");
  }
  auto per_axis = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<long double>(partitions))));
  // sqrt rounding can land one short of an exact square
  while (per_axis * per_axis < partitions) {
    ++per_axis;
  }
  while (per_axis > 1 && (per_axis - 1) * (per_axis - 1) >= partitions) {
    --per_axis;
  }
  if (per_axis > 65535) {
    throw std::domain_error("partition grid: too many partitions");
  }
  const auto n = static_cast<std::uint32_t>(per_axis);
  return PartitionGrid(unit, origin, std::sqrt(s), n, n);
}

PartitionGrid::PartitionGrid(UnitId unit, Point origin, double side, std::uint32_t gx, std::uint32_t gy)
    : unit_(unit), origin_(origin), side_(side), gx_(gx), gy_(gy), cell_w_(side / gx), cell_h_(side / gy) {
  if (gx == 0 || gy == 0 || !(side > 0.0)) {
    throw std::domain_error("partition grid: need positive side and cell counts");
  }
}

double PartitionGrid::x_edge(std::uint32_t i) const noexcept {
  return i >= gx_ ? origin_.x + side_ : origin_.x + i * cell_w_;
}

double PartitionGrid::y_edge(std::uint32_t i) const noexcept {
  return i >= gy_ ? origin_.y + side_ : origin_.y + i * cell_h_;
}

std::uint32_t PartitionGrid::column_of(double x) const noexcept {
  auto ix = static_cast<std::uint32_t>(std::clamp((x - origin_.x) / cell_w_, 0.0, gx_ - 1.0));
  // settle float rounding against the same edges meta() reports
  if (ix > 0 && x < x_edge(ix)) --ix;
  if (ix + 1 < gx_ && x >= x_edge(ix + 1)) ++ix;
  return ix;
}

std::uint32_t PartitionGrid::row_of(double y) const noexcept {
  auto iy = static_cast<std::uint32_t>(std::clamp((y - origin_.y) / cell_h_, 0.0, gy_ - 1.0));
  if (iy > 0 && y < y_edge(iy)) --iy;
  if (iy + 1 < gy_ && y >= y_edge(iy + 1)) ++iy;
  return iy;
}

bool PartitionGrid::covers(double x, double y) const noexcept {
  return x >= origin_.x && x <= origin_.x + side_ && y >= origin_.y && y <= origin_.y + side_;
}

PartitionId PartitionGrid::partition_of(double x, double y) const {
  if (!covers(x, y)) {
    throw std::out_of_range("point (" + std::to_string(x) + ", " + std::to_string(y) +
                            ") outside sub-area of unit " + std::to_string(unit_));
  }
  return PartitionId{unit_, row_of(y) * gx_ + column_of(x)};
}

PartitionMeta PartitionGrid::meta(std::uint32_t cell) const {
  if (cell >= cell_count()) {
    throw std::out_of_range("cell index out of range");
  }
  const auto ix = cell % gx_;
  const auto iy = cell / gx_;
  return PartitionMeta{PartitionId{unit_, cell}, Point{x_edge(ix), y_edge(iy)},
                       Point{x_edge(ix + 1), y_edge(iy + 1)}};
}

std::vector<PartitionMeta> PartitionGrid::all_meta() const {
  std::vector<PartitionMeta> out;
  out.reserve(cell_count());
  for (std::uint32_t c = 0; c < cell_count(); ++c) {
    out.push_back(meta(c));
  }
  return out;
}

std::vector<PartitionId> PartitionGrid::parse_region(const Region& reg) const {
  std::vector<PartitionId> out;
  const double r = reg.r();
  if (reg.x() + r < origin_.x || reg.x() - r > origin_.x + side_ || reg.y() + r < origin_.y ||
      reg.y() - r > origin_.y + side_) {
    return out;
  }
  // candidate range widened by one cell on each side; the exact test below prunes
  const auto ix_lo = column_of(reg.x() - r) - (column_of(reg.x() - r) > 0 ? 1 : 0);
  const auto ix_hi = std::min(column_of(reg.x() + r) + 1, gx_ - 1);
  const auto iy_lo = row_of(reg.y() - r) - (row_of(reg.y() - r) > 0 ? 1 : 0);
  const auto iy_hi = std::min(row_of(reg.y() + r) + 1, gy_ - 1);
  const double r2 = r * r;
  for (auto iy = iy_lo; iy <= iy_hi; ++iy) {
    const double ny = std::clamp(reg.y(), y_edge(iy), y_edge(iy + 1)) - reg.y();
    for (auto ix = ix_lo; ix <= ix_hi; ++ix) {
      const double nx = std::clamp(reg.x(), x_edge(ix), x_edge(ix + 1)) - reg.x();
      if (nx * nx + ny * ny <= r2) {
        out.push_back(PartitionId{unit_, iy * gx_ + ix});
      }
    }
  }
  return out;
}

std::vector<PartitionId> parse_region(const std::vector<PartitionGrid>& grids, const Region& reg) {
  std::vector<PartitionId> out;
  for (const auto& g : grids) {
    auto part = g.parse_region(reg);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

const PartitionGrid& grid_for(const std::vector<PartitionGrid>& grids, UnitId unit) {
  for (const auto& g : grids) {
    if (g.unit() == unit) {
      return g;
    }
  }
  throw std::out_of_range("no grid for unit " + std::to_string(unit));
}

std::string encode_meta(const PartitionMeta& meta) {
  return format_double(meta.lo.x) + "," + format_double(meta.lo.y) + "," + format_double(meta.hi.x) + "," +
         format_double(meta.hi.y);
}

PartitionMeta decode_meta(const PartitionId& pid, std::string_view value) {
  const auto fields = split(value, ',');
  if (fields.size() != 4) {
    throw std::invalid_argument("malformed partition metadata: " + std::string(value));
  }
  return PartitionMeta{pid, Point{parse_number<double>(fields[0]), parse_number<double>(fields[1])},
                       Point{parse_number<double>(fields[2]), parse_number<double>(fields[3])}};
}

}  // namespace aserv
