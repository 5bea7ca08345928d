#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aserv/datagen.hpp"
#include "aserv/epgrid.hpp"
#include "aserv/ingest.hpp"
#include "aserv/storage.hpp"

namespace aserv {

enum class SourceKind { generator, fixture, directory };
enum class BackendKind { memory, resp };

/// Service configuration, read from a flat JSON object. Unknown keys are rejected.
struct Config {
  GenConfig gen;
  double alpha = 0.8;
  /// Minimum query radius; when unset it follows from area_fraction: r = sqrt(f s / pi).
  std::optional<double> r_min;
  double area_fraction = 0.03;
  std::size_t c = 1;
  std::int64_t partitions = 0;
  bool maintain_epi = false;

  SourceKind source = SourceKind::generator;
  std::filesystem::path data_dir;

  BackendKind backend = BackendKind::memory;
  std::string resp_host = "127.0.0.1";
  std::uint16_t resp_port = 6379;

  std::string http_host = "127.0.0.1";
  std::uint16_t http_port = 8080;

  /// Cycles advance every ct / rate seconds when realtime, back to back otherwise.
  double rate = 1.0;
  bool realtime = true;
  bool start_paused = false;

  double effective_r_min() const;
  IngestOptions ingest_options() const;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  /// Non-fatal findings, e.g. a partitions override below the accuracy target.
  std::vector<std::string> warnings() const;
};

/// Parses and validates; throws std::invalid_argument with the offending key.
Config config_from_json(std::string_view text);
Config load_config(const std::filesystem::path& path);

/// Explicit path if given, else $ASERV_CONFIG, else nullopt (built-in defaults).
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& explicit_path);

std::string_view to_string(SourceKind kind);
std::string_view to_string(BackendKind kind);

/// One grid per unit: the fixture's fixed grid, or sized from alpha and r_min unless overridden.
std::vector<PartitionGrid> build_grids(const Config& config);

std::unique_ptr<KvBackend> make_backend(const Config& config);

}  // namespace aserv
