#include "aserv/catalog.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "aserv/text.hpp"

namespace aserv {
namespace {

template <typename Row>
std::string encode_any(const Row& row) {
  std::string out;
  out.reserve(row.oid.size() + 24 + row.d.size() * 10);
  out += row.oid;
  out += ',';
  out += format_double(row.x);
  out += ',';
  out += format_double(row.y);
  out += ',';
  out += std::to_string(row.t);
  for (double v : row.d) {
    out += ',';
    out += format_double(v);
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

}  // namespace

std::string encode_row(const CatalogTuple& row) { return encode_any(row); }
std::string encode_row(const ValidTuple& row) { return encode_any(row); }

CatalogTuple decode_row(std::string_view line) {
  const auto fields = split(line, ',');
  if (fields.size() < 4) {
    throw std::invalid_argument("catalog row needs at least oid,x,y,t: '" + std::string(line) + "'");
  }
  CatalogTuple row;
  row.oid = std::string(fields[0]);
  validate_oid(row.oid);
  row.x = parse_number<double>(fields[1]);
  row.y = parse_number<double>(fields[2]);
  row.t = parse_number<Cycle>(fields[3]);
  row.d.reserve(fields.size() - 4);
  for (std::size_t i = 4; i < fields.size(); ++i) {
    row.d.push_back(parse_number<double>(fields[i]));
  }
  return row;
}

std::filesystem::path catalog_path(const std::filesystem::path& dir, UnitId unit, Cycle t) {
  return dir / std::to_string(unit) / (std::to_string(t) + ".cat");
}

std::filesystem::path eset_path(const std::filesystem::path& dir, UnitId unit, Cycle t) {
  return dir / std::to_string(unit) / (std::to_string(t) + ".eset");
}

void write_catalog_file(const std::filesystem::path& path, const std::vector<CatalogTuple>& rows) {
  auto out = open_out(path);
  for (const auto& row : rows) {
    out << encode_row(row) << '\n';
  }
  if (!out.flush()) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::vector<CatalogTuple> read_catalog_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<CatalogTuple> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(decode_row(line));
  }
  return rows;
}

void write_eset_file(const std::filesystem::path& path, const Eset& eset) {
  auto out = open_out(path);
  out << "t=" << eset.t << '\n';
  for (const auto& oid : eset.oids) {
    out << oid << '\n';
  }
  if (!out.flush()) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

Eset read_eset_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t=", 0) != 0) {
    throw std::invalid_argument("eset file lacks 't=<cycle>' header: " + path.string());
  }
  Eset eset;
  eset.t = parse_number<Cycle>(std::string_view(line).substr(2));
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    validate_oid(line);
    if (seen.insert(line).second) {
      eset.oids.push_back(line);
    }
  }
  return eset;
}

}  // namespace aserv
