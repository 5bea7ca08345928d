// aserv command line: run | gen | query | fit | report

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <random>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "aserv/config.hpp"
#include "aserv/datagen.hpp"
#include "aserv/perfmodel.hpp"
#include "aserv/service.hpp"
#include "aserv/text.hpp"

using namespace aserv;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct Common {
  std::optional<std::string> config_path;
  bool fixture = false;
  std::optional<std::string> data_dir;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file (default: $ASERV_CONFIG)");
  cmd->add_flag("--fixture", c.fixture, "Use the built-in worked-example night");
  cmd->add_option("--data-dir", c.data_dir, "Ingest catalog/Eset files from this directory");
}

Config load(const Common& c) {
  std::optional<std::filesystem::path> explicit_path;
  if (c.config_path) explicit_path = *c.config_path;
  const auto path = resolve_config_path(explicit_path);
  Config cfg = path ? load_config(*path) : Config{};
  if (c.fixture) cfg.source = SourceKind::fixture;
  if (c.data_dir) {
    cfg.source = SourceKind::directory;
    cfg.data_dir = *c.data_dir;
  }
  cfg.validate();
  for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << '\n';
  return cfg;
}

int emit(const Reply& r) {
  (r.status == 200 ? std::cout : std::cerr) << r.body << std::flush;
  return r.status == 200 ? 0 : 1;
}

int cmd_run(const Common& common, std::optional<long long> cycles, bool no_http, bool linger,
            std::optional<int> port, bool fast) {
  auto cfg = load(common);
  if (fast) cfg.realtime = false;
  if (port) cfg.http_port = static_cast<std::uint16_t>(*port);
  if (cycles && *cycles < 0) throw std::invalid_argument("--cycles must be non-negative");
  if (cycles && cfg.source == SourceKind::generator) cfg.gen.cycles = *cycles;
  const std::size_t max_cycles = cycles ? static_cast<std::size_t>(*cycles) : std::numeric_limits<std::size_t>::max();

  Service service(cfg);
  std::unique_ptr<ApiServer> api;
  if (!no_http) {
    api = std::make_unique<ApiServer>(service);
    const int bound = api->start(cfg.http_host, cfg.http_port);
    std::cerr << "listening on http://" << cfg.http_host << ':' << bound << '\n';
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::mutex out_mutex;
  service.start(max_cycles, [&](const CycleReport& r) {
    std::lock_guard lock(out_mutex);
    std::cout << cycle_record(r) << '\n' << std::flush;
  });
  while (!service.wait_stopped(std::chrono::milliseconds(100))) {
    if (g_interrupted) service.stop();
  }
  const auto err = service.last_error();
  std::cerr << "drained: " << service.cycles_done() << " cycles, watermark "
            << service.pipeline().master().watermark() << '\n';
  while (linger && api && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  if (api) api->stop();
  if (!err.empty()) {
    std::cerr << "error: " << err << '\n';
    return 1;
  }
  return 0;
}

int cmd_gen(const Common& common, const std::string& out, std::optional<long long> cycles) {
  auto cfg = load(common);
  if (cycles) cfg.gen.cycles = *cycles;
  std::size_t files = 0;
  std::vector<GroundTruthEvent> truth;
  if (cfg.source == SourceKind::fixture) {
    const auto fx = worked_example();
    for (const auto& b : fx.batches) files += emit_files(b, out).size();
    truth = fx.events;
  } else {
    Generator gen(cfg.gen);
    for (UnitId u = 0; u < cfg.gen.units; ++u) {
      while (auto b = gen.next(u)) files += emit_files(*b, out).size();
    }
    truth = gen.ground_truth(cfg.gen.last_cycle());
  }
  write_ground_truth(std::filesystem::path(out) / "ground_truth.csv", truth);
  std::cout << "out: " << out << "\nfiles: " << files << "\nevents: " << truth.size() << '\n';
  return 0;
}

int cmd_query(const std::string& kind, const Common& common, const std::optional<std::string>& url,
              const Params& params) {
  if (url) {
    httplib::Client client(*url);
    client.set_read_timeout(std::chrono::seconds(300));
    const auto res = client.Get("/" + kind, httplib::Params(params.begin(), params.end()), httplib::Headers{});
    if (!res) {
      std::cerr << "error: cannot reach " << *url << ": " << httplib::to_string(res.error()) << '\n';
      return 2;
    }
    return emit(Reply{res->status, res->body});
  }
  auto cfg = load(common);
  Service service(cfg);
  service.ingest(std::numeric_limits<std::size_t>::max());
  return emit(service.handle(kind, params));
}

int cmd_fit(const std::optional<std::string>& training, double k, double ct, bool measure, const Common& common,
            std::size_t repetitions, const std::optional<std::string>& write) {
  TrainingSet set;
  if (training) set = read_training_file(*training);
  if (measure) {
    MeasureConfig mc;
    const auto cfg = load(common);
    mc.gen = cfg.gen;
    mc.alpha = cfg.alpha;
    mc.r_min = cfg.effective_r_min();
    mc.partitions = cfg.partitions;
    mc.k = static_cast<std::uint32_t>(k);
    mc.repetitions = repetitions;
    for (auto w : {Workload::insert, Workload::probe, Workload::list, Workload::stretch}) {
      const auto m = measure_parallel_time(w, mc);
      set[w].base = m.median_s;
      std::cerr << "measured " << to_string(w) << ": " << format_fixed(m.median_s, 6) << " s\n";
    }
  }
  if (set.empty()) throw std::invalid_argument("fit needs --training or --measure");
  if (write) write_training_file(*write, set);
  std::cout << format_report(predict_all(set, k, ct), k, ct);
  return 0;
}

int cmd_report(const Common& common, std::size_t queries, std::uint64_t seed) {
  auto cfg = load(common);
  Service service(cfg);
  double worst = 0, total = 0;
  std::uint64_t valid = 0;
  std::size_t events = 0;
  const auto cycles = service.ingest(std::numeric_limits<std::size_t>::max(), [&](const CycleReport& r) {
    worst = std::max(worst, r.max_latency_s);
    total += r.max_latency_s;
    for (const auto& u : r.units) valid += u.valid_bytes;
    events += r.new_events;
  });
  const auto& c = service.config();
  const auto verdict = predict_insert_latency(worst, c.gen.ct);
  std::cout << "cycles: " << cycles << "\nwatermark: " << service.pipeline().master().watermark()
            << "\nunits: " << c.gen.units << "\npartitions_per_unit: " << service.pipeline().grids().front().cell_count()
            << "\nevents: " << events << "\nct: " << format_double(c.gen.ct)
            << "\ningest_latency_max_s: " << format_fixed(worst, 4)
            << "\ningest_latency_mean_s: " << format_fixed(cycles ? total / static_cast<double>(cycles) : 0.0, 4)
            << "\ninsert_constraint: " << (verdict.ok ? "ok" : "violated") << '\n';
  const auto raw = service.raw_bytes();
  std::cout << "raw_catalog_bytes: " << raw << "\nvalid_data_bytes: " << valid << "\nvalid_ratio: "
            << format_fixed(raw ? static_cast<double>(valid) / static_cast<double>(raw) : 0.0, 4) << '\n';

  const double side = c.gen.side, r_min = c.effective_r_min();
  if (queries == 0 || 2 * r_min >= side || cycles == 0) return 0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const TimeInterval night(c.gen.first_cycle, service.pipeline().master().watermark());
  double sum = 0, lowest = 1.0;
  std::size_t violations = 0;
  for (std::size_t q = 0; q < queries; ++q) {
    const double r = std::min(r_min * (1.0 + u(rng)), 0.5 * side * 0.999);
    const UnitId unit = static_cast<UnitId>(u(rng) * c.gen.units) % c.gen.units;
    const auto origin = unit_origin(c.gen, unit);
    const Region reg(origin.x + r + (side - 2 * r) * u(rng), origin.y + r + (side - 2 * r) * u(rng), r);
    const auto a = service.engine().accuracy(reg, night);
    sum += a.accuracy;
    lowest = std::min(lowest, a.accuracy);
    violations += a.probe < a.pcse ? 1 : 0;
  }
  std::cout << "alpha: " << format_double(c.alpha) << "\nr_min: " << format_fixed(r_min, 4)
            << "\naccuracy_queries: " << queries
            << "\naccuracy_mean: " << format_fixed(sum / static_cast<double>(queries), 4)
            << "\naccuracy_min: " << format_fixed(lowest, 4) << "\nprobe_below_pcse: " << violations << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aserv: real-time scientific-event analysis"};
  app.require_subcommand(1);

  Common run_c, gen_c, query_c, fit_c, report_c;

  auto* run = app.add_subcommand("run", "Generate and ingest a night, serving the HTTP API");
  add_common(run, run_c);
  std::optional<long long> run_cycles;
  bool no_http = false, linger = false, fast = false;
  std::optional<int> port;
  run->add_option("--cycles", run_cycles, "Stop after this many cycles");
  run->add_flag("--no-http", no_http, "Do not start the HTTP API");
  run->add_flag("--linger", linger, "Keep serving after the night drains, until interrupted");
  run->add_flag("--fast", fast, "Do not pace cycles to ct");
  run->add_option("--port", port, "HTTP port (0 picks a free one)");

  auto* gen = app.add_subcommand("gen", "Write catalog and Eset files only");
  add_common(gen, gen_c);
  std::string gen_out;
  std::optional<long long> gen_cycles;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--cycles", gen_cycles, "Number of cycles");

  auto* query = app.add_subcommand("query", "Run one query against an instance or a data set");
  query->require_subcommand(1);
  std::optional<std::string> url;
  Params params;
  std::optional<std::string> ts, te, x, y, r, eid, dt1, dt2;
  std::string kind;
  for (const char* name : {"probe", "list", "stretch", "accuracy"}) {
    auto* q = query->add_subcommand(name);
    add_common(q, query_c);
    q->add_option("--url", url, "Base URL of a running instance, e.g. http://127.0.0.1:8080");
    if (std::string_view(name) == "stretch") {
      q->add_option("--eid", eid, "Event id <oid>|<stime>")->required();
      q->add_option("--dt1", dt1, "Cycles before stime");
      q->add_option("--dt2", dt2, "Cycles after etime");
    } else {
      q->add_option("--ts", ts)->required();
      q->add_option("--te", te)->required();
      q->add_option("--x", x);
      q->add_option("--y", y);
      q->add_option("--r", r);
    }
    q->callback([&kind, name] { kind = name; });
  }

  auto* fit = app.add_subcommand("fit", "Fit the overhead model and predict latencies at cluster size k");
  add_common(fit, fit_c);
  std::optional<std::string> training, write;
  double k = 19, ct = 15;
  bool measure = false;
  std::size_t repetitions = 5;
  fit->add_option("--training", training, "Training table: workload, kprime|base|actual, seconds");
  fit->add_option("--k", k, "Target cluster size")->check(CLI::PositiveNumber);
  fit->add_option("--ct", ct, "Cycle length in seconds")->check(CLI::PositiveNumber);
  fit->add_flag("--measure", measure, "Measure base parallel times on this machine");
  fit->add_option("--repetitions", repetitions, "Repetitions per measurement");
  fit->add_option("--write", write, "Write the combined training table here");

  auto* report = app.add_subcommand("report", "Ingest a night and summarise latency, reduction and accuracy");
  add_common(report, report_c);
  std::size_t queries = 100;
  std::uint64_t seed = 1;
  report->add_option("--queries", queries, "Random disk queries for the accuracy summary");
  report->add_option("--seed", seed, "Seed for query placement");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_c, run_cycles, no_http, linger, port, fast);
    if (gen->parsed()) return cmd_gen(gen_c, gen_out, gen_cycles);
    if (query->parsed()) {
      const std::pair<const char*, std::optional<std::string>*> fields[] = {
          {"ts", &ts}, {"te", &te}, {"x", &x}, {"y", &y}, {"r", &r}, {"eid", &eid}, {"dt1", &dt1}, {"dt2", &dt2}};
      for (const auto& [key, value] : fields) {
        if (*value) params[key] = **value;
      }
      return cmd_query(kind, query_c, url, params);
    }
    if (fit->parsed()) return cmd_fit(training, k, ct, measure, fit_c, repetitions, write);
    if (report->parsed()) return cmd_report(report_c, queries, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
