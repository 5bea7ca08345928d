#include "aserv/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "aserv/catalog.hpp"
#include "aserv/text.hpp"

namespace aserv {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

std::vector<Point> load_positions(const std::filesystem::path& path, std::size_t n, double side) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open positions file " + path.string());
  }
  std::vector<Point> out;
  std::string line;
  while (out.size() < n && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, ',');
    if (f.size() < 2) {
      throw std::invalid_argument("positions file row needs x,y: " + line);
    }
    Point p{parse_number<double>(f[0]), parse_number<double>(f[1])};
    if (p.x < 0 || p.x >= side || p.y < 0 || p.y >= side) {
      throw std::invalid_argument("position outside the sub-area: " + line);
    }
    out.push_back(p);
  }
  if (out.size() < n) {
    throw std::invalid_argument("positions file holds fewer than " + std::to_string(n) + " rows");
  }
  return out;
}

}  // namespace

void GenConfig::validate() const {
  if (units == 0) throw std::invalid_argument("gen: need at least one unit");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("gen: p must lie in (0, 1]");
  if (dmin < 1 || dmax < dmin) throw std::invalid_argument("gen: need 1 <= dmin <= dmax");
  if (!(side > 0.0)) throw std::invalid_argument("gen: side must be positive");
  if (!(ct > 0.0)) throw std::invalid_argument("gen: ct must be positive");
  if (cycles < 0 || first_cycle < 0) throw std::invalid_argument("gen: cycles must be non-negative");
}

Point unit_origin(const GenConfig& config, UnitId unit) { return Point{unit * config.side, 0.0}; }

std::vector<PartitionGrid> make_grids(const GenConfig& config, double alpha, double r_min, std::int64_t partitions) {
  std::vector<PartitionGrid> grids;
  grids.reserve(config.units);
  for (UnitId u = 0; u < config.units; ++u) {
    const auto origin = unit_origin(config, u);
    grids.push_back(partitions > 0 ? PartitionGrid::with_partitions(u, origin, config.sub_area(), partitions)
                                   : PartitionGrid::build(u, origin, config.sub_area(), alpha, r_min));
  }
  return grids;
}

UnitGenerator::UnitGenerator(const GenConfig& config, UnitId unit)
    : config_(config), unit_(unit), next_(config.first_cycle), rng_(splitmix64(config.seed ^ splitmix64(unit + 1))) {
  config_.validate();
  const auto origin = unit_origin(config_, unit_);
  if (config_.positions_file) {
    positions_ = load_positions(*config_.positions_file, config_.objects, config_.side);
    for (auto& p : positions_) {
      p.x += origin.x;
      p.y += origin.y;
    }
  } else {
    std::uniform_real_distribution<double> coord(0.0, config_.side);
    positions_.reserve(config_.objects);
    for (std::size_t i = 0; i < config_.objects; ++i) {
      const double x = coord(rng_);
      const double y = coord(rng_);
      positions_.push_back(Point{origin.x + x, origin.y + y});
    }
  }
  std::uniform_real_distribution<double> level(10.0, 18.0);
  baseline_.resize(config_.objects);
  for (auto& attrs : baseline_) {
    attrs.resize(config_.m);
    for (auto& v : attrs) {
      v = level(rng_);
    }
  }
  idle_.resize(config_.objects);
  for (std::size_t i = 0; i < config_.objects; ++i) {
    idle_[i] = i;
  }
}

std::string UnitGenerator::oid_of(std::size_t index) const {
  return "u" + std::to_string(unit_) + "_" + zero_pad(static_cast<long long>(index), 6);
}

CycleBatch UnitGenerator::gen_cycle(Cycle t) {
  if (t != next_) {
    throw std::invalid_argument("generator for unit " + std::to_string(unit_) + " expected cycle " +
                                std::to_string(next_) + ", got " + std::to_string(t));
  }
  ++next_;

  // objects whose event ended at t - 2 or earlier may be flagged again
  while (!release_.empty() && release_.begin()->first <= t) {
    auto& freed = release_.begin()->second;
    idle_.insert(idle_.end(), freed.begin(), freed.end());
    release_.erase(release_.begin());
  }
  std::erase_if(running_, [t](const Running& r) { return r.etime < t; });

  std::size_t arrivals = 0;
  if (config_.p < 1.0) {
    std::geometric_distribution<std::size_t> geom(config_.p);
    arrivals = geom(rng_);
  }
  arrivals = std::min(arrivals, idle_.size());
  new_counts_.push_back(arrivals);
  std::uniform_int_distribution<Cycle> duration(config_.dmin, config_.dmax);
  for (std::size_t k = 0; k < arrivals; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, idle_.size() - 1);
    const auto slot = pick(rng_);
    const auto object = idle_[slot];
    idle_[slot] = idle_.back();
    idle_.pop_back();
    const auto etime = t + duration(rng_) - 1;
    running_.push_back(Running{object, etime});
    release_[etime + 2].push_back(object);
    events_.push_back(GroundTruthEvent{unit_, oid_of(object), t, etime, positions_[object].x, positions_[object].y});
  }

  CycleBatch batch{unit_, t, {}, Eset{t, {}}};
  batch.catalog.reserve(config_.objects);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (std::size_t i = 0; i < config_.objects; ++i) {
    CatalogTuple row{oid_of(i), positions_[i].x, positions_[i].y, t, {}};
    row.d.resize(config_.m);
    for (std::size_t j = 0; j < config_.m; ++j) {
      row.d[j] = round4(baseline_[i][j] + noise(rng_));
    }
    batch.catalog.push_back(std::move(row));
  }
  std::sort(running_.begin(), running_.end(), [](const Running& a, const Running& b) { return a.object < b.object; });
  batch.eset.oids.reserve(running_.size());
  for (const auto& r : running_) {
    batch.eset.oids.push_back(oid_of(r.object));
  }
  return batch;
}

Generator::Generator(GenConfig config) : config_(std::move(config)) {
  config_.validate();
  for (UnitId u = 0; u < config_.units; ++u) {
    units_.push_back(std::make_unique<UnitGenerator>(config_, u));
  }
}

std::optional<CycleBatch> Generator::next(UnitId unit) {
  auto& gen = *units_.at(unit);
  if (gen.next_cycle() > config_.last_cycle()) {
    return std::nullopt;
  }
  return gen.gen_cycle(gen.next_cycle());
}

const UnitGenerator& Generator::unit(UnitId unit) const { return *units_.at(unit); }

std::vector<GroundTruthEvent> Generator::ground_truth(Cycle upto) const {
  std::vector<GroundTruthEvent> out;
  for (const auto& gen : units_) {
    for (auto ev : gen->planned_events()) {
      if (ev.stime > upto) continue;
      ev.etime = std::min(ev.etime, upto);
      out.push_back(std::move(ev));
    }
  }
  return out;
}

std::vector<std::filesystem::path> emit_files(const CycleBatch& batch, const std::filesystem::path& dir) {
  const auto cat = catalog_path(dir, batch.unit, batch.t);
  const auto es = eset_path(dir, batch.unit, batch.t);
  write_catalog_file(cat, batch.catalog);
  write_eset_file(es, batch.eset);
  return {cat, es};
}

void write_ground_truth(const std::filesystem::path& path, const std::vector<GroundTruthEvent>& events) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "unit,oid,stime,etime,x,y\n";
  for (const auto& ev : events) {
    out << ev.unit << ',' << ev.oid << ',' << ev.stime << ',' << ev.etime << ',' << format_double(ev.x) << ','
        << format_double(ev.y) << '\n';
  }
}

ReplaySource::ReplaySource(std::vector<CycleBatch> batches) {
  for (auto& b : batches) {
    batches_[b.unit].push_back(std::move(b));
  }
  for (auto& [unit, list] : batches_) {
    std::sort(list.begin(), list.end(), [](const CycleBatch& a, const CycleBatch& b) { return a.t < b.t; });
    cursor_[unit] = 0;
  }
}

std::optional<CycleBatch> ReplaySource::next(UnitId unit) {
  auto it = batches_.find(unit);
  if (it == batches_.end()) {
    return std::nullopt;
  }
  auto& cursor = cursor_[unit];
  if (cursor >= it->second.size()) {
    return std::nullopt;
  }
  return it->second[cursor++];
}

Fixture worked_example() {
  Fixture fx;
  fx.config.units = 1;
  fx.config.objects = 3;
  fx.config.first_cycle = 1;
  fx.config.cycles = 10;
  fx.config.side = 1.0;
  fx.config.m = 3;
  fx.config.ct = 15.0;
  const std::vector<std::pair<std::string, Point>> objects = {
      {"oid1", {0.10, 0.10}}, {"oid2", {0.20, 0.15}}, {"oid3", {0.15, 0.30}}};
  fx.events = {{0, "oid1", 3, 5, 0.10, 0.10},
               {0, "oid2", 4, 4, 0.20, 0.15},
               {0, "oid3", 5, 6, 0.15, 0.30},
               {0, "oid2", 8, 9, 0.20, 0.15}};
  for (Cycle t = 1; t <= 10; ++t) {
    CycleBatch batch{0, t, {}, Eset{t, {}}};
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto& [oid, pos] = objects[i];
      // attribute values encode (object, cycle)
      const double base = static_cast<double>(i + 1) * 100.0 + static_cast<double>(t);
      batch.catalog.push_back(CatalogTuple{oid, pos.x, pos.y, t, {base + 0.25, base + 0.5, base + 0.75}});
    }
    for (const auto& ev : fx.events) {
      if (ev.stime <= t && t <= ev.etime) {
        batch.eset.oids.push_back(ev.oid);
      }
    }
    fx.batches.push_back(std::move(batch));
  }
  return fx;
}

}  // namespace aserv
