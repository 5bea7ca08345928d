#include "aserv/service.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "aserv/catalog.hpp"
#include "aserv/datagen.hpp"
#include "aserv/sepi.hpp"
#include "aserv/text.hpp"

namespace aserv {
namespace {

using nlohmann::json;

class MeteredSource final : public BatchSource {
public:
  MeteredSource(std::unique_ptr<BatchSource> inner, std::atomic<std::uint64_t>& bytes)
      : inner_(std::move(inner)), bytes_(bytes) {}

  std::optional<CycleBatch> next(UnitId unit) override {
    auto b = inner_->next(unit);
    if (b) {
      std::uint64_t n = 0;
      for (const auto& row : b->catalog) n += encode_row(row).size() + 1;
      bytes_ += n;
    }
    return b;
  }

private:
  std::unique_ptr<BatchSource> inner_;
  std::atomic<std::uint64_t>& bytes_;
};

std::string body(const json& j) { return j.dump() + "\n"; }

Cycle cycle_param(const Params& p, const char* key, std::optional<Cycle> fallback = std::nullopt) {
  const auto it = p.find(key);
  if (it == p.end()) {
    if (fallback) return *fallback;
    throw BadRequest(std::string("missing parameter '") + key + "'");
  }
  try {
    return parse_number<Cycle>(it->second);
  } catch (const std::invalid_argument&) {
    throw BadRequest(std::string("parameter '") + key + "' must be an integer, got '" + it->second + "'");
  }
}

double real_param(const Params& p, const char* key) {
  const auto it = p.find(key);
  if (it == p.end()) throw BadRequest(std::string("missing parameter '") + key + "'");
  try {
    const double v = parse_number<double>(it->second);
    if (!std::isfinite(v)) throw std::invalid_argument("not finite");
    return v;
  } catch (const std::invalid_argument&) {
    throw BadRequest(std::string("parameter '") + key + "' must be a number, got '" + it->second + "'");
  }
}

void allow_only(const Params& p, std::initializer_list<const char*> keys) {
  for (const auto& [k, _] : p) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
      throw BadRequest("unknown parameter '" + k + "'");
    }
  }
}

TimeInterval interval_param(const Params& p) {
  const auto ts = cycle_param(p, "ts"), te = cycle_param(p, "te");
  if (ts > te) throw BadRequest("ts must not exceed te");
  if (ts < 0) throw BadRequest("ts must be non-negative");
  return TimeInterval(ts, te);
}

std::optional<Region> region_param(const Params& p, bool required) {
  const bool any = p.contains("x") || p.contains("y") || p.contains("r");
  if (!any && !required) return std::nullopt;
  const double x = real_param(p, "x"), y = real_param(p, "y"), r = real_param(p, "r");
  if (!(r > 0)) throw BadRequest("parameter 'r' must be positive");
  return Region(x, y, r);
}

json rows_json(const std::vector<CatalogTuple>& rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back({{"t", r.t}, {"d", r.d}});
  return out;
}

json event_json(const ScientificEvent& ev, const PartitionId& pid) {
  return {{"eid", ev.eid()}, {"unit", ev.unit}, {"oid", ev.oid}, {"stime", ev.stime}, {"etime", ev.etime},
          {"pid", to_string(pid)}};
}

}  // namespace

Reply error_reply(int status, std::string_view message) {
  return Reply{status, body(json{{"error", std::string(message)}})};
}

Reply answer_query(const QueryEngine& engine, std::string_view endpoint, const Params& params) {
  try {
    if (endpoint == "probe") {
      allow_only(params, {"ts", "te", "x", "y", "r"});
      const auto iv = interval_param(params);
      return Reply{200, body(json{{"count", engine.probe(region_param(params, false), iv)}})};
    }
    if (endpoint == "list") {
      allow_only(params, {"ts", "te", "x", "y", "r"});
      const auto iv = interval_param(params);
      json events = json::array();
      for (const auto& s : engine.list_events(region_param(params, false), iv)) {
        auto e = event_json(s.event, s.pid);
        if (!s.rows.empty()) {
          e["x"] = s.rows.front().x;
          e["y"] = s.rows.front().y;
        }
        e["rows"] = rows_json(s.rows);
        events.push_back(std::move(e));
      }
      return Reply{200, body(json{{"events", events}})};
    }
    if (endpoint == "stretch") {
      allow_only(params, {"eid", "dt1", "dt2"});
      const auto it = params.find("eid");
      if (it == params.end()) throw BadRequest("missing parameter 'eid'");
      const auto s = engine.stretch(it->second, cycle_param(params, "dt1", 0), cycle_param(params, "dt2", 0));
      auto j = event_json(s.event, s.pid);
      j["from"] = s.from;
      j["to"] = s.to;
      j["rows"] = rows_json(s.rows);
      return Reply{200, body(j)};
    }
    if (endpoint == "accuracy") {
      allow_only(params, {"ts", "te", "x", "y", "r"});
      const auto iv = interval_param(params);
      const auto a = engine.accuracy(*region_param(params, true), iv);
      return Reply{200, body(json{{"probe", a.probe}, {"pcse", a.pcse}, {"accuracy", a.accuracy}})};
    }
    return error_reply(404, "unknown endpoint '" + std::string(endpoint) + "'");
  } catch (const NotFoundError& e) {
    return error_reply(404, e.what());
  } catch (const std::invalid_argument& e) {
    return error_reply(400, e.what());
  } catch (const IntegrityError& e) {
    return error_reply(500, e.what());
  } catch (const StoreError& e) {
    return error_reply(503, e.what());
  }
}

std::string cycle_record(const CycleReport& report) {
  json deltas = json::array();
  std::size_t rows = 0;
  for (const auto& u : report.units) {
    rows += u.rows;
    for (const auto& icr : u.icrs) {
      deltas.push_back({{"pid", to_string(icr.pid)}, {"total", icr.total}, {"new", icr.fresh}});
    }
  }
  json j{{"t", report.t},
         {"watermark", report.watermark},
         {"latency_s", report.max_latency_s},
         {"new_events", report.new_events},
         {"rows", rows},
         {"deltas", deltas}};
  return j.dump();
}

void FeedHub::publish(std::string record) {
  {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
    if (records_.size() > capacity_) {
      records_.pop_front();
      ++first_seq_;
    }
  }
  cv_.notify_all();
}

void FeedHub::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool FeedHub::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::uint64_t FeedHub::next_seq() const {
  std::lock_guard lock(mutex_);
  return first_seq_ + records_.size();
}

std::optional<std::string> FeedHub::wait(std::uint64_t& seq, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  const auto ready = [&] { return seq < first_seq_ + records_.size() || closed_; };
  cv_.wait_for(lock, timeout, ready);
  if (seq < first_seq_) seq = first_seq_;
  if (seq < first_seq_ + records_.size()) {
    return records_[static_cast<std::size_t>(seq++ - first_seq_)];
  }
  return std::nullopt;
}

std::string_view to_string(SimState s) {
  switch (s) {
    case SimState::idle: return "idle";
    case SimState::running: return "running";
    case SimState::paused: return "paused";
    case SimState::stopped: return "stopped";
  }
  return "?";
}

Service::Service(Config config) : config_(std::move(config)), rate_(config_.rate) {
  config_.validate();
  std::unique_ptr<BatchSource> source;
  switch (config_.source) {
    case SourceKind::fixture: {
      auto fx = worked_example();
      const double ct = config_.gen.ct;
      config_.gen = fx.config;
      config_.gen.ct = ct;
      source = std::make_unique<ReplaySource>(std::move(fx.batches));
      break;
    }
    case SourceKind::directory: {
      const auto units = DirectorySource::discover_units(config_.data_dir);
      if (units.empty()) throw std::invalid_argument("no unit directories under " + config_.data_dir.string());
      config_.gen.units = *std::max_element(units.begin(), units.end()) + 1;
      source = std::make_unique<DirectorySource>(config_.data_dir, units);
      break;
    }
    case SourceKind::generator:
      source = std::make_unique<Generator>(config_.gen);
      break;
  }
  source_ = std::make_unique<MeteredSource>(std::move(source), raw_bytes_);
  store_ = make_backend(config_);
  pipeline_ = std::make_unique<Pipeline>(build_grids(config_), *store_, config_.ingest_options());
  engine_ = std::make_unique<QueryEngine>(*store_, pipeline_->grids(),
                                          [this] { return pipeline_->master().read_limit(); });
}

Service::~Service() { stop(); }

void Service::record(const CycleReport& report) {
  ++cycles_done_;
  feed_.publish(cycle_record(report));
}

std::size_t Service::ingest(std::size_t max_cycles, const std::function<void(const CycleReport&)>& on_cycle) {
  return pipeline_->run(*source_, max_cycles, [&](const CycleReport& r) {
    record(r);
    if (on_cycle) on_cycle(r);
  });
}

void Service::start(std::size_t max_cycles, std::function<void(const CycleReport&)> on_cycle) {
  std::lock_guard lock(mutex_);
  if (state_ != SimState::idle) throw Conflict("simulation already started");
  state_ = config_.start_paused ? SimState::paused : SimState::running;
  thread_ = std::thread([this, max_cycles, cb = std::move(on_cycle)]() mutable { sim_loop(max_cycles, std::move(cb)); });
}

void Service::sim_loop(std::size_t max_cycles, std::function<void(const CycleReport&)> on_cycle) {
  for (std::size_t done = 0; done < max_cycles;) {
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return stop_requested_ || state_ != SimState::paused; });
      if (stop_requested_) break;
    }
    const auto start = std::chrono::steady_clock::now();
    std::optional<CycleReport> report;
    try {
      report = pipeline_->step(*source_);
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      last_error_ = e.what();
      break;
    }
    if (!report) break;
    ++done;
    record(*report);
    if (on_cycle) on_cycle(*report);
    if (config_.realtime && done < max_cycles) {
      std::unique_lock lock(mutex_);
      const auto gap = std::chrono::duration<double>(config_.gen.ct / rate_);
      cv_.wait_until(lock, start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(gap),
                     [&] { return stop_requested_; });
    }
  }
  {
    std::lock_guard lock(mutex_);
    state_ = SimState::stopped;
  }
  cv_.notify_all();
  feed_.close();
}

void Service::pause() {
  std::lock_guard lock(mutex_);
  if (state_ != SimState::running && state_ != SimState::paused) {
    throw Conflict("simulation is " + std::string(to_string(state_)));
  }
  state_ = SimState::paused;
}

void Service::resume() {
  {
    std::lock_guard lock(mutex_);
    if (state_ != SimState::running && state_ != SimState::paused) {
      throw Conflict("simulation is " + std::string(to_string(state_)));
    }
    state_ = SimState::running;
  }
  cv_.notify_all();
}

void Service::set_rate(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw BadRequest("rate must be a positive number");
  std::lock_guard lock(mutex_);
  if (state_ != SimState::running && state_ != SimState::paused) {
    throw Conflict("simulation is " + std::string(to_string(state_)));
  }
  rate_ = rate;
}

double Service::rate() const {
  std::lock_guard lock(mutex_);
  return rate_;
}

SimState Service::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::string Service::last_error() const {
  std::lock_guard lock(mutex_);
  return last_error_;
}

bool Service::wait_stopped(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return state_ == SimState::stopped || state_ == SimState::idle; });
}

void Service::stop() {
  {
    std::lock_guard lock(mutex_);
    stop_requested_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  feed_.close();
}

Reply Service::status() const {
  json units = json::array();
  for (const auto& g : pipeline_->grids()) units.push_back(g.unit());
  const auto limit = pipeline_->master().read_limit();
  json keys_json{{"sepi", store_->keys("sepi:").size()}, {"icr", store_->keys("icr:").size()},
                 {"partition", store_->keys("part:").size()}, {"event", store_->keys("ev:").size()},
                 {"meta", store_->keys("meta:").size()}, {"total", store_->key_count()}};
  json j{{"state", to_string(state())},
         {"watermark", limit ? json(*limit) : json(nullptr)},
         {"cycles", cycles_done_.load()},
         {"rate", rate()},
         {"ct", config_.gen.ct},
         {"units", units},
         {"partitions_per_unit", pipeline_->grids().front().cell_count()},
         {"source", to_string(config_.source)},
         {"backend", to_string(config_.backend)},
         {"keys", keys_json}};
  if (const auto err = last_error(); !err.empty()) j["error"] = err;
  return Reply{200, body(j)};
}

Reply Service::handle(std::string_view endpoint, const Params& params) {
  try {
    if (endpoint == "status") return status();
    if (endpoint == "pause") {
      pause();
      return status();
    }
    if (endpoint == "resume") {
      resume();
      return status();
    }
    if (endpoint == "rate") {
      const auto it = params.contains("value") ? params.find("value") : params.find("rate");
      if (it == params.end()) throw BadRequest("missing parameter 'value'");
      double r = 0;
      try {
        r = parse_number<double>(it->second);
      } catch (const std::invalid_argument&) {
        throw BadRequest("rate must be a number, got '" + it->second + "'");
      }
      set_rate(r);
      return status();
    }
  } catch (const Conflict& e) {
    return error_reply(409, e.what());
  } catch (const std::invalid_argument& e) {
    return error_reply(400, e.what());
  } catch (const StoreError& e) {
    return error_reply(503, e.what());
  }
  return answer_query(*engine_, endpoint, params);
}

struct ApiServer::Impl {
  explicit Impl(Service& s) : service(s) {}

  Service& service;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};
};

namespace {

Params params_of(const httplib::Request& req) {
  Params p;
  for (const auto& [k, v] : req.params) p[k] = v;
  return p;
}

void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body, "application/json");
}

}  // namespace

ApiServer::ApiServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  auto* impl = impl_.get();
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  for (const char* ep : {"status", "probe", "list", "stretch", "accuracy"}) {
    svr.Get(std::string("/") + ep, [impl, ep](const httplib::Request& req, httplib::Response& res) {
      send(res, impl->service.handle(ep, params_of(req)));
    });
  }
  for (const char* ep : {"pause", "resume", "rate"}) {
    svr.Post(std::string("/sim/") + ep, [impl, ep](const httplib::Request& req, httplib::Response& res) {
      auto params = params_of(req);
      if (!req.body.empty()) {
        const auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
          send(res, error_reply(400, "request body must be a JSON object"));
          return;
        }
        for (const auto& [k, v] : j.items()) params[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      send(res, impl->service.handle(ep, params));
    });
  }
  svr.Get("/stream", [impl](const httplib::Request&, httplib::Response& res) {
    auto seq = std::make_shared<std::uint64_t>(impl->service.feed().next_seq());
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [impl, seq](std::size_t, httplib::DataSink& sink) {
      auto& feed = impl->service.feed();
      while (!impl->stopping) {
        if (auto rec = feed.wait(*seq, std::chrono::milliseconds(250))) {
          const auto msg = "event: cycle\ndata: " + *rec + "\n\n";
          return sink.write(msg.data(), msg.size());
        }
        if (feed.closed()) break;
        if (!sink.is_writable()) return false;
      }
      const std::string bye = "event: end\ndata: {}\n\n";
      sink.write(bye.data(), bye.size());
      sink.done();
      return true;
    });
  });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  auto& svr = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
  } else if (!svr.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  svr.wait_until_ready();
  return bound;
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace aserv
