#include "aserv/perfmodel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "aserv/query.hpp"
#include "aserv/storage.hpp"
#include "aserv/text.hpp"

namespace aserv {

OverheadFit fit_overhead(std::span<const TrainingPoint> points) {
  if (points.size() < 2) {
    throw std::invalid_argument("fit_overhead needs at least two training points");
  }
  const double n = static_cast<double>(points.size());
  double mk = 0.0;
  double mf = 0.0;
  for (const auto& p : points) {
    mk += p.kprime;
    mf += p.fo;
  }
  mk /= n;
  mf /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.kprime - mk) * (p.kprime - mk);
    sxy += (p.kprime - mk) * (p.fo - mf);
  }
  if (sxx <= 0.0) {
    throw std::invalid_argument("fit_overhead needs at least two distinct kprime values");
  }
  const double theta1 = sxy / sxx;
  return OverheadFit{theta1, mf - theta1 * mk};
}

OverheadFit refine_damped(std::span<const TrainingPoint> points, OverheadFit start, int iterations, double lambda) {
  if (points.size() < 2) {
    throw std::invalid_argument("refine_damped needs at least two training points");
  }
  auto cost = [&](const OverheadFit& f) {
    double c = 0.0;
    for (const auto& p : points) {
      const double r = p.fo - (f.theta1 * p.kprime + f.theta2);
      c += r * r;
    }
    return c;
  };
  OverheadFit cur = start;
  double cur_cost = cost(cur);
  for (int it = 0; it < iterations; ++it) {
    double a11 = 0.0, a12 = 0.0, a22 = 0.0, g1 = 0.0, g2 = 0.0;
    for (const auto& p : points) {
      const double r = p.fo - (cur.theta1 * p.kprime + cur.theta2);
      a11 += p.kprime * p.kprime;
      a12 += p.kprime;
      a22 += 1.0;
      g1 += p.kprime * r;
      g2 += r;
    }
    const double d11 = a11 * (1.0 + lambda);
    const double d22 = a22 * (1.0 + lambda);
    const double det = d11 * d22 - a12 * a12;
    if (std::abs(det) < 1e-300) {
      throw std::invalid_argument("refine_damped: singular normal equations");
    }
    const OverheadFit next{cur.theta1 + (d22 * g1 - a12 * g2) / det, cur.theta2 + (d11 * g2 - a12 * g1) / det};
    const double next_cost = cost(next);
    if (next_cost <= cur_cost) {
      const bool converged = cur_cost - next_cost <= 1e-15 * std::max(1.0, cur_cost);
      cur = next;
      cur_cost = next_cost;
      lambda *= 0.1;
      if (converged) break;
    } else {
      lambda *= 10.0;
    }
  }
  return cur;
}

double predict_query_latency(const LatencyModel& model) { return model.fr_fq + model.theta1 * model.k + model.theta2; }

InsertVerdict predict_insert_latency(double fp_fs, double ct) { return InsertVerdict{fp_fs, fp_fs <= ct}; }

double prediction_accuracy(double te, double ta) {
  if (!(ta > 0.0)) {
    throw std::invalid_argument("prediction_accuracy needs a positive actual time");
  }
  return std::max(0.0, 1.0 - std::abs(te - ta) / ta);
}

std::string_view to_string(Workload w) {
  switch (w) {
    case Workload::insert:
      return "insert";
    case Workload::probe:
      return "probe";
    case Workload::list:
      return "list";
    case Workload::stretch:
      return "stretch";
  }
  return "unknown";
}

Workload parse_workload(std::string_view name) {
  for (auto w : {Workload::insert, Workload::probe, Workload::list, Workload::stretch}) {
    if (to_string(w) == name) return w;
  }
  if (name == "probing") return Workload::probe;
  if (name == "listing") return Workload::list;
  if (name == "stretching") return Workload::stretch;
  if (name == "insertion") return Workload::insert;
  throw std::invalid_argument("unknown workload '" + std::string(name) + "'");
}

namespace {

/// One node's share of a generated night: rows whose partition cell is congruent to 0 mod k.
class ModulusSource final : public BatchSource {
public:
  ModulusSource(GenConfig gen, PartitionGrid grid, std::uint32_t k) : gen_(std::move(gen)), grid_(std::move(grid)), k_(k) {}

  std::optional<CycleBatch> next(UnitId unit) override {
    auto batch = gen_.next(unit);
    if (!batch) return batch;
    std::unordered_set<std::string> kept;
    std::vector<CatalogTuple> rows;
    for (auto& row : batch->catalog) {
      if (grid_.partition_of(row.x, row.y).cell % k_ == 0) {
        kept.insert(row.oid);
        rows.push_back(std::move(row));
      }
    }
    batch->catalog = std::move(rows);
    std::erase_if(batch->eset.oids, [&](const std::string& oid) { return !kept.contains(oid); });
    return batch;
  }

private:
  Generator gen_;
  PartitionGrid grid_;
  std::uint32_t k_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Staged {
  MemoryBackend store;
  std::unique_ptr<Pipeline> pipeline;
  std::vector<double> cycle_latencies;
};

void stage(const MeasureConfig& config, Staged& out) {
  auto gen = config.gen;
  gen.units = 1;
  auto grids = make_grids(gen, config.alpha, config.r_min, config.partitions);
  ModulusSource source(gen, grids.front(), config.k);
  out.pipeline = std::make_unique<Pipeline>(grids, out.store);
  out.pipeline->run(source, static_cast<std::size_t>(gen.cycles),
                    [&](const CycleReport& r) { out.cycle_latencies.push_back(r.max_latency_s); });
}

}  // namespace

Measurement measure_parallel_time(Workload workload, const MeasureConfig& config) {
  if (config.k == 0 || config.repetitions == 0) {
    throw std::invalid_argument("measure_parallel_time needs k >= 1 and at least one repetition");
  }
  Measurement m{workload, 0.0, {}};
  if (workload == Workload::insert) {
    for (std::size_t r = 0; r < config.repetitions; ++r) {
      Staged staged;
      stage(config, staged);
      const auto& lat = staged.cycle_latencies;
      m.samples.push_back(lat.empty() ? 0.0 : std::accumulate(lat.begin(), lat.end(), 0.0) / lat.size());
    }
    m.median_s = median(m.samples);
    return m;
  }

  Staged staged;
  stage(config, staged);
  auto& master = staged.pipeline->master();
  QueryEngine engine(staged.store, staged.pipeline->grids(), [&master] { return master.read_limit(); });
  const TimeInterval night(config.gen.first_cycle, config.gen.last_cycle());
  std::string eid;
  if (workload == Workload::stretch) {
    const auto listed = engine.list_events(std::nullopt, night);
    if (listed.empty()) {
      throw std::runtime_error("stretch workload: the staged night holds no events");
    }
    eid = listed[listed.size() / 2].event.eid();
  }
  for (std::size_t r = 0; r < config.repetitions; ++r) {
    const auto start = std::chrono::steady_clock::now();
    switch (workload) {
      case Workload::probe:
        (void)engine.probe(std::nullopt, night);
        break;
      case Workload::list:
        (void)engine.list_events(std::nullopt, night);
        break;
      case Workload::stretch:
        (void)engine.stretch(eid, config.dt, config.dt);
        break;
      case Workload::insert:
        break;
    }
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    m.samples.push_back(took.count());
  }
  m.median_s = median(m.samples);
  return m;
}

TrainingSet parse_training(std::istream& in) {
  TrainingSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto f = split(line, sep);
    if (f.size() != 3) {
      throw std::invalid_argument("training line " + std::to_string(lineno) + ": expected 3 fields");
    }
    if (f[0] == "workload") continue;
    try {
      auto& w = set[parse_workload(f[0])];
      const double value = parse_number<double>(f[2]);
      if (f[1] == "base") {
        w.base = value;
      } else if (f[1] == "actual") {
        w.actual = value;
      } else {
        const double kprime = parse_number<double>(f[1]);
        if (kprime < 1.0) {
          throw std::invalid_argument("kprime must be at least 1");
        }
        w.points.push_back(TrainingPoint{kprime, value});
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("training line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return set;
}

TrainingSet read_training_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open training file " + path.string());
  }
  return parse_training(in);
}

void write_training_file(const std::filesystem::path& path, const TrainingSet& set) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "workload\tkprime\tseconds\n";
  for (const auto& [w, t] : set) {
    if (t.base) out << to_string(w) << "\tbase\t" << format_double(*t.base) << '\n';
    for (const auto& p : t.points) {
      out << to_string(w) << '\t' << format_double(p.kprime) << '\t' << format_double(p.fo) << '\n';
    }
    if (t.actual) out << to_string(w) << "\tactual\t" << format_double(*t.actual) << '\n';
  }
}

std::vector<WorkloadPrediction> predict_all(const TrainingSet& set, double k, double ct) {
  std::vector<WorkloadPrediction> out;
  for (const auto& [w, t] : set) {
    if (!t.base) continue;
    WorkloadPrediction p;
    p.workload = w;
    if (w == Workload::insert) {
      const auto v = predict_insert_latency(*t.base, ct);
      p.te = v.seconds;
      p.ok = v.ok;
    } else {
      LatencyModel model;
      model.fr_fq = *t.base;
      model.k = k;
      model.ct = ct;
      if (!t.points.empty()) {
        p.fit = fit_overhead(t.points);
        model.theta1 = p.fit->theta1;
        model.theta2 = p.fit->theta2;
      }
      p.te = predict_query_latency(model);
      p.ok = p.te <= ct;
    }
    if (t.actual) {
      p.ta = t.actual;
      p.acc_p = prediction_accuracy(p.te, *t.actual);
    }
    out.push_back(p);
  }
  return out;
}

std::string format_report(const std::vector<WorkloadPrediction>& predictions, double k, double ct) {
  std::ostringstream out;
  out << "k: " << format_double(k) << "\nct: " << format_double(ct) << '\n';
  for (const auto& p : predictions) {
    out << "\n[" << to_string(p.workload) << "]\n";
    if (p.fit) {
      out << "theta1: " << format_fixed(p.fit->theta1, 4) << "\ntheta2: " << format_fixed(p.fit->theta2, 4) << '\n';
    }
    out << "T_e: " << format_fixed(p.te, 2) << "\nconstraint: " << (p.ok ? "ok" : "violated") << '\n';
    if (p.ta) {
      out << "T_a: " << format_double(*p.ta) << "\nacc_p: " << format_fixed(*p.acc_p, 3) << '\n';
    }
  }
  return out.str();
}

}  // namespace aserv
