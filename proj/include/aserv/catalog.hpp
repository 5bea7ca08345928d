#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "aserv/domain.hpp"

namespace aserv {

/// Rows are comma-separated "oid,x,y,t,d1,...,dk" with shortest round-trip decimals.
std::string encode_row(const CatalogTuple& row);
std::string encode_row(const ValidTuple& row);
CatalogTuple decode_row(std::string_view line);

/// Catalog file "<dir>/<unit>/<t>.cat": one encoded row per line.
std::filesystem::path catalog_path(const std::filesystem::path& dir, UnitId unit, Cycle t);

/// Eset file "<dir>/<unit>/<t>.eset": a "t=<t>" header line, then one oid per line.
std::filesystem::path eset_path(const std::filesystem::path& dir, UnitId unit, Cycle t);

void write_catalog_file(const std::filesystem::path& path, const std::vector<CatalogTuple>& rows);
std::vector<CatalogTuple> read_catalog_file(const std::filesystem::path& path);

void write_eset_file(const std::filesystem::path& path, const Eset& eset);
Eset read_eset_file(const std::filesystem::path& path);

}  // namespace aserv
