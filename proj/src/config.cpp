#include "aserv/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aserv/resp.hpp"
#include "aserv/text.hpp"

namespace aserv {
namespace {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config key '") + key + "': " + e.what());
  }
}

SourceKind parse_source(const std::string& s) {
  if (s == "generator") return SourceKind::generator;
  if (s == "fixture") return SourceKind::fixture;
  if (s == "directory") return SourceKind::directory;
  throw std::invalid_argument("config key 'source': unknown value '" + s + "'");
}

BackendKind parse_backend(const std::string& s) {
  if (s == "memory") return BackendKind::memory;
  if (s == "resp") return BackendKind::resp;
  throw std::invalid_argument("config key 'backend': unknown value '" + s + "'");
}

const std::set<std::string> kKeys = {
    "units",     "objects",    "first_cycle", "cycles",    "side",      "ct",          "p",
    "dmin",      "dmax",       "m",           "seed",      "positions_file", "alpha", "r_min",
    "area_fraction", "c",      "partitions",  "maintain_epi", "source", "data_dir",    "backend",
    "resp_host", "resp_port",  "http_host",   "http_port", "rate",      "realtime",    "start_paused"};

}  // namespace

double Config::effective_r_min() const {
  return r_min ? *r_min : std::sqrt(area_fraction * gen.sub_area() / std::numbers::pi);
}

IngestOptions Config::ingest_options() const {
  IngestOptions o;
  o.filter.c = c;
  o.maintain_epi = maintain_epi;
  return o;
}

void Config::validate() const {
  gen.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha must lie in (0, 1)");
  if (r_min && !(*r_min > 0.0)) throw std::invalid_argument("config: r_min must be positive");
  if (!(area_fraction > 0.0 && area_fraction <= 1.0)) {
    throw std::invalid_argument("config: area_fraction must lie in (0, 1]");
  }
  if (c == 0 || c > gen.m) throw std::invalid_argument("config: c must lie in [1, m]");
  if (partitions < 0) throw std::invalid_argument("config: partitions must be non-negative");
  if (source == SourceKind::directory && data_dir.empty()) {
    throw std::invalid_argument("config: source 'directory' needs data_dir");
  }
  if (!(rate > 0.0)) throw std::invalid_argument("config: rate must be positive");
}

std::vector<std::string> Config::warnings() const {
  std::vector<std::string> out;
  if (partitions > 0 && source != SourceKind::fixture) {
    const auto g = PartitionGrid::with_partitions(0, {0, 0}, gen.sub_area(), partitions);
    const double bound = accuracy_bound(effective_r_min(), g.cell_w(), g.cell_h());
    if (bound < alpha) {
      std::ostringstream s;
      s << "partitions override " << partitions << " guarantees accuracy " << format_fixed(bound, 3)
        << " < alpha " << format_double(alpha) << " at r_min " << format_fixed(effective_r_min(), 4) << "; need "
        << grid_number(alpha, effective_r_min(), gen.sub_area());
      out.push_back(s.str());
    }
  }
  return out;
}

Config config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  Config c;
  read(j, "units", c.gen.units);
  read(j, "objects", c.gen.objects);
  read(j, "first_cycle", c.gen.first_cycle);
  read(j, "cycles", c.gen.cycles);
  read(j, "side", c.gen.side);
  read(j, "ct", c.gen.ct);
  read(j, "p", c.gen.p);
  read(j, "dmin", c.gen.dmin);
  read(j, "dmax", c.gen.dmax);
  read(j, "m", c.gen.m);
  read(j, "seed", c.gen.seed);
  if (j.contains("positions_file")) {
    std::string p;
    read(j, "positions_file", p);
    c.gen.positions_file = p;
  }
  read(j, "alpha", c.alpha);
  if (j.contains("r_min")) {
    double r = 0;
    read(j, "r_min", r);
    c.r_min = r;
  }
  read(j, "area_fraction", c.area_fraction);
  read(j, "c", c.c);
  read(j, "partitions", c.partitions);
  read(j, "maintain_epi", c.maintain_epi);
  std::string s;
  if (j.contains("source")) {
    read(j, "source", s);
    c.source = parse_source(s);
  }
  if (j.contains("data_dir")) {
    read(j, "data_dir", s);
    c.data_dir = s;
  }
  if (j.contains("backend")) {
    read(j, "backend", s);
    c.backend = parse_backend(s);
  }
  read(j, "resp_host", c.resp_host);
  read(j, "resp_port", c.resp_port);
  read(j, "http_host", c.http_host);
  read(j, "http_port", c.http_port);
  read(j, "rate", c.rate);
  read(j, "realtime", c.realtime);
  read(j, "start_paused", c.start_paused);
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return config_from_json(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return explicit_path;
  if (const char* env = std::getenv("ASERV_CONFIG"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::generator: return "generator";
    case SourceKind::fixture: return "fixture";
    case SourceKind::directory: return "directory";
  }
  return "?";
}

std::string_view to_string(BackendKind kind) { return kind == BackendKind::memory ? "memory" : "resp"; }

std::vector<PartitionGrid> build_grids(const Config& config) {
  if (config.source == SourceKind::fixture) {
    const auto fx = worked_example();
    return {PartitionGrid::with_partitions(0, {0, 0}, fx.config.sub_area(), fx.partitions)};
  }
  return make_grids(config.gen, config.alpha, config.effective_r_min(), config.partitions);
}

std::unique_ptr<KvBackend> make_backend(const Config& config) {
  if (config.backend == BackendKind::resp) {
    return std::make_unique<RespBackend>(RespOptions{config.resp_host, config.resp_port, 1000});
  }
  return std::make_unique<MemoryBackend>();
}

}  // namespace aserv
