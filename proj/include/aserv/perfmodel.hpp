#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aserv/datagen.hpp"

namespace aserv {

struct TrainingPoint {
  double kprime{};
  double fo{};  ///< latency at kprime minus fr_fq
};

struct OverheadFit {
  double theta1{};
  double theta2{};
};

/// Ordinary least squares for fo = theta1 * K + theta2.
/// Throws std::invalid_argument with fewer than two distinct kprime values.
OverheadFit fit_overhead(std::span<const TrainingPoint> points);

/// Damped Gauss-Newton (Levenberg-Marquardt) refinement of a starting fit. For the
/// linear overhead model it converges to the least-squares line.
OverheadFit refine_damped(std::span<const TrainingPoint> points, OverheadFit start, int iterations = 50,
                          double lambda = 1e-3);

struct LatencyModel {
  double fp_fs = 0.0;
  double fr_fq = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double ct = 15.0;
  double k = 19.0;
};

/// T_e = fr_fq + theta1 * K + theta2.
double predict_query_latency(const LatencyModel& model);

struct InsertVerdict {
  double seconds{};
  bool ok{};
};

/// T_e = fp_fs; ok when T_e <= ct.
InsertVerdict predict_insert_latency(double fp_fs, double ct);

/// max(0, 1 - |te - ta| / ta). Throws std::invalid_argument if ta <= 0.
double prediction_accuracy(double te, double ta);

enum class Workload { insert, probe, list, stretch };

std::string_view to_string(Workload w);
/// Throws std::invalid_argument for unknown names.
Workload parse_workload(std::string_view name);

struct MeasureConfig {
  GenConfig gen;
  double alpha = 0.8;
  double r_min = 0.0977;
  /// Overrides the grid size; 0 derives it from alpha and r_min.
  std::int64_t partitions = 0;
  /// Target cluster size; the node's share is the partitions with cell % k == 0.
  std::uint32_t k = 19;
  std::size_t repetitions = 5;
  Cycle dt = 1;
};

struct Measurement {
  Workload workload{};
  double median_s{};
  std::vector<double> samples;
};

/// Stages one node's share of a generated night (modulus on partition ids) and returns
/// the median wall time over the configured repetitions. Insert samples are the mean
/// per-cycle ingest latency of a full replay; query samples time one query over the whole night.
Measurement measure_parallel_time(Workload workload, const MeasureConfig& config);

/// Training rows per workload: "base" holds fr_fq (fp_fs for insert), numeric kprime rows
/// hold observed overheads, and "actual" holds T_a.
struct WorkloadTraining {
  std::optional<double> base;
  std::optional<double> actual;
  std::vector<TrainingPoint> points;
};

using TrainingSet = std::map<Workload, WorkloadTraining>;

/// Rows "workload<sep>kprime|base|actual<sep>seconds" separated by tabs or commas;
/// blank lines and '#' comments are skipped. Throws std::invalid_argument on bad rows.
TrainingSet parse_training(std::istream& in);
TrainingSet read_training_file(const std::filesystem::path& path);
void write_training_file(const std::filesystem::path& path, const TrainingSet& set);

struct WorkloadPrediction {
  Workload workload{};
  std::optional<OverheadFit> fit;
  double te{};
  bool ok{};
  std::optional<double> ta;
  std::optional<double> acc_p;
};

/// Predicts every workload with a base value at cluster size k; workloads without
/// training points keep a zero overhead.
std::vector<WorkloadPrediction> predict_all(const TrainingSet& set, double k, double ct);

/// Structured text, one "key: value" line per field and a block per workload.
std::string format_report(const std::vector<WorkloadPrediction>& predictions, double k, double ct);

}  // namespace aserv
