#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "aserv/config.hpp"
#include "aserv/ingest.hpp"
#include "aserv/query.hpp"
#include "aserv/storage.hpp"

namespace aserv {

using Params = std::map<std::string, std::string>;

/// HTTP-style outcome shared by the API and the CLI: same status, same body bytes.
struct Reply {
  int status = 200;
  std::string body;  ///< JSON document followed by a newline
};

class BadRequest : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class Conflict : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Serialises one query endpoint ("probe", "list", "stretch", "accuracy") over an engine.
/// Parameters: ts, te (probe, list, accuracy); optional x, y, r region (required for accuracy);
/// eid, dt1, dt2 (stretch, widths default 0).
Reply answer_query(const QueryEngine& engine, std::string_view endpoint, const Params& params);

/// Error body {"error": message}.
Reply error_reply(int status, std::string_view message);

/// Per-cycle feed record: t, watermark, latency, new events, ICR deltas per partition.
std::string cycle_record(const CycleReport& report);

/// Bounded broadcast of feed records; readers follow a sequence number.
class FeedHub {
public:
  explicit FeedHub(std::size_t capacity = 1024) : capacity_(capacity) {}

  void publish(std::string record);
  void close();
  bool closed() const;
  /// Sequence number of the next record to be published.
  std::uint64_t next_seq() const;

  /// Waits up to `timeout` for record `seq`. Records evicted from the buffer are
  /// skipped: `seq` is advanced to the oldest retained one.
  std::optional<std::string> wait(std::uint64_t& seq, std::chrono::milliseconds timeout);

private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> records_;
  std::uint64_t first_seq_ = 0;
  std::size_t capacity_;
  bool closed_ = false;
};

enum class SimState { idle, running, paused, stopped };
std::string_view to_string(SimState s);

/// Store, ingest pipeline, query engine and the simulation that feeds them.
class Service {
public:
  explicit Service(Config config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const Config& config() const noexcept { return config_; }
  const QueryEngine& engine() const noexcept { return *engine_; }
  Pipeline& pipeline() noexcept { return *pipeline_; }
  KvBackend& store() noexcept { return *store_; }
  FeedHub& feed() noexcept { return feed_; }

  /// Ingests up to `max_cycles` on the calling thread without pacing.
  std::size_t ingest(std::size_t max_cycles, const std::function<void(const CycleReport&)>& on_cycle = {});

  /// Starts the paced simulation thread for up to `max_cycles` cycles.
  void start(std::size_t max_cycles, std::function<void(const CycleReport&)> on_cycle = {});
  /// Throws Conflict unless the simulation is running or paused.
  void pause();
  void resume();
  void set_rate(double rate);
  double rate() const;
  SimState state() const;
  std::size_t cycles_done() const noexcept { return cycles_done_.load(); }
  /// Blocks until the simulation stops; false on timeout.
  bool wait_stopped(std::chrono::milliseconds timeout);
  void stop();

  /// Raw catalog bytes seen by ingest (encoded rows plus newlines).
  std::uint64_t raw_bytes() const noexcept { return raw_bytes_.load(); }
  /// Last ingest error of the simulation thread, empty if none.
  std::string last_error() const;

  Reply status() const;
  /// Routes "status", a query endpoint, or a steering action ("pause", "resume", "rate").
  Reply handle(std::string_view endpoint, const Params& params);

private:
  void sim_loop(std::size_t max_cycles, std::function<void(const CycleReport&)> on_cycle);
  void record(const CycleReport& report);

  Config config_;
  std::unique_ptr<KvBackend> store_;
  std::unique_ptr<Pipeline> pipeline_;
  std::unique_ptr<QueryEngine> engine_;
  std::unique_ptr<BatchSource> source_;
  FeedHub feed_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  SimState state_ = SimState::idle;
  double rate_ = 1.0;
  bool stop_requested_ = false;
  std::string last_error_;
  std::atomic<std::size_t> cycles_done_{0};
  std::atomic<std::uint64_t> raw_bytes_{0};
  std::thread thread_;
};

/// HTTP front end: GET /status /probe /list /stretch /accuracy /stream, POST /sim/{pause,resume,rate}.
class ApiServer {
public:
  explicit ApiServer(Service& service);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port. Returns the bound port.
  /// Throws std::runtime_error if binding fails.
  int start(const std::string& host, int port);
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aserv
