#include "aserv/ingest.hpp"

#include <algorithm>
#include <exception>
#include <future>
#include <unordered_map>

#include "aserv/catalog.hpp"
#include "aserv/keys.hpp"
#include "aserv/sepi.hpp"
#include "aserv/text.hpp"

namespace aserv {

std::string encode_partition_rows(const std::vector<const ValidTuple*>& rows) {
  std::string out;
  for (const auto* row : rows) {
    if (!out.empty()) out += '\n';
    out += encode_row(*row);
  }
  return out;
}

std::vector<CatalogTuple> decode_partition_rows(std::string_view value) {
  std::vector<CatalogTuple> rows;
  for (auto line : split(value, '\n')) {
    if (!line.empty()) {
      rows.push_back(decode_row(line));
    }
  }
  return rows;
}

std::string encode_event_row(std::uint32_t cell, const CatalogTuple& row) {
  return std::to_string(cell) + ";" + encode_row(row);
}

std::pair<std::uint32_t, CatalogTuple> decode_event_row(std::string_view item) {
  const auto semi = item.find(';');
  if (semi == std::string_view::npos) {
    throw IntegrityError("event row lacks its partition tag: " + std::string(item.substr(0, 64)));
  }
  return {parse_number<std::uint32_t>(item.substr(0, semi)), decode_row(item.substr(semi + 1))};
}

Worker::Worker(PartitionGrid grid, KvBackend& store, IngestOptions options)
    : grid_(std::move(grid)), store_(store), options_(std::move(options)) {}

void Worker::write_metadata() {
  std::vector<WriteOp> ops;
  ops.reserve(grid_.cell_count());
  for (const auto& m : grid_.all_meta()) {
    ops.push_back(WriteOp::put(keys::meta(m.pid), encode_meta(m)));
  }
  const auto acks = store_.write_batch(ops);
  for (std::size_t i = 0; i < acks.size(); ++i) {
    if (!acks[i].ok()) {
      throw StoreError(acks[i].code, "metadata write " + ops[i].key + " failed: " + acks[i].message);
    }
  }
}

IngestStats Worker::process_cycle(const CycleBatch& batch) {
  const auto start = std::chrono::steady_clock::now();
  if (batch.unit != unit()) {
    throw std::invalid_argument("batch for unit " + std::to_string(batch.unit) + " sent to worker " +
                                std::to_string(unit()));
  }
  if (pending_) {
    if (batch.t != pending_->t) {
      throw std::invalid_argument("unit " + std::to_string(unit()) + " must finish cycle " +
                                  std::to_string(pending_->t) + " first");
    }
    auto resume = std::move(*pending_);
    pending_.reset();
    return commit_ops(std::move(resume), start);
  }
  if (batch.eset.t != batch.t) {
    throw std::invalid_argument("eset cycle does not match batch cycle");
  }
  if (last_ != kNoCycle && batch.t != last_ + 1) {
    throw std::invalid_argument("unit " + std::to_string(unit()) + " expected cycle " + std::to_string(last_ + 1) +
                                ", got " + std::to_string(batch.t));
  }
  if (batch.t < 0) {
    throw std::invalid_argument("negative cycle index");
  }

  auto filtered = filter_cycle(batch.catalog, batch.eset, active_, options_.filter);

  IngestStats stats;
  stats.unit = unit();
  stats.t = batch.t;
  stats.rows = batch.catalog.size();
  stats.missing_flags = filtered.missing;

  std::vector<WriteOp> ops;

  // partition data: one append per non-empty (partition, cycle)
  std::vector<std::pair<std::uint32_t, std::uint32_t>> placement;  // (cell, row index)
  placement.reserve(filtered.valid.size());
  for (std::uint32_t i = 0; i < filtered.valid.size(); ++i) {
    const auto& row = filtered.valid[i];
    placement.emplace_back(grid_.partition_of(row.x, row.y).cell, i);
  }
  std::sort(placement.begin(), placement.end());
  std::vector<const ValidTuple*> group;
  for (std::size_t i = 0; i < placement.size();) {
    const auto cell = placement[i].first;
    group.clear();
    for (; i < placement.size() && placement[i].first == cell; ++i) {
      group.push_back(&filtered.valid[placement[i].second]);
    }
    auto op = WriteOp::append(keys::partition(PartitionId{unit(), cell}), encode_partition_rows(group));
    stats.valid_bytes += op.key.size() + op.value.size();
    ops.push_back(std::move(op));
  }
  stats.partition_appends = ops.size();

  // index maintenance over the flags that have a catalog row
  Eset flagged{batch.t, {}};
  flagged.oids.reserve(filtered.event_rows.size());
  std::unordered_map<std::string_view, const CatalogTuple*> flagged_rows;
  for (const auto& er : filtered.event_rows) {
    flagged.oids.push_back(er.row.oid);
    flagged_rows.emplace(er.row.oid, &er.row);
  }
  const PartitionResolver resolve = [&](std::string_view oid) {
    const auto* row = flagged_rows.at(oid);
    return grid_.partition_of(row->x, row->y);
  };
  auto plan = plan_sepi_update(unit(), flagged, active_, resolve);

  for (const auto& er : filtered.event_rows) {
    const auto& ev = plan.next.at(er.row.oid);
    auto op = WriteOp::append(keys::event(unit(), er.eid), encode_event_row(ev.pid.cell, er.row));
    stats.event_bytes += op.key.size() + op.value.size();
    ops.push_back(std::move(op));
  }
  stats.event_appends = filtered.event_rows.size();

  stats.sepi_writes = plan.ops.size();
  std::move(plan.ops.begin(), plan.ops.end(), std::back_inserter(ops));
  if (options_.maintain_epi) {
    auto epi = plan_epi_update(unit(), batch.t, plan);
    stats.epi_writes = epi.size();
    std::move(epi.begin(), epi.end(), std::back_inserter(ops));
  }

  stats.icrs = emit_icrs(batch.t, plan.next);
  stats.icr_appends = stats.icrs.size();
  auto icr_writes = icr_ops(stats.icrs);
  std::move(icr_writes.begin(), icr_writes.end(), std::back_inserter(ops));

  stats.new_events = plan.opened.size();
  stats.active_events = plan.next.size();
  for (const auto& op : ops) {
    stats.bytes_written += op.key.size() + op.value.size();
  }
  return commit_ops(Pending{batch.t, std::move(ops), std::move(plan.next), std::move(stats)}, start);
}

IngestStats Worker::commit_ops(Pending pending, std::chrono::steady_clock::time_point start) {
  for (int attempt = 0;; ++attempt) {
    const auto acks = store_.write_batch(pending.ops);
    std::vector<WriteOp> failed;
    std::string first_error;
    for (std::size_t i = 0; i < acks.size(); ++i) {
      if (!acks[i].ok()) {
        if (first_error.empty()) {
          first_error = pending.ops[i].key + ": " + to_string(acks[i].code) + " (" + acks[i].message + ")";
        }
        failed.push_back(std::move(pending.ops[i]));
      }
    }
    if (failed.empty()) {
      break;
    }
    pending.ops = std::move(failed);
    if (attempt >= options_.max_retries) {
      const auto t = pending.t;
      const auto remaining = pending.ops.size();
      pending_ = std::move(pending);
      throw CycleFailed(unit(), t,
                        "unit " + std::to_string(unit()) + " cycle " + std::to_string(t) + ": " +
                            std::to_string(remaining) + " writes unacknowledged, first " + first_error);
    }
    ++pending.stats.retries;
  }
  active_ = std::move(pending.next);
  last_ = pending.t;
  auto stats = std::move(pending.stats);
  stats.key_count = store_.key_count();
  stats.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

void Master::register_worker(UnitId unit) {
  std::lock_guard lock(mutex_);
  if (units_.contains(unit)) {
    throw std::invalid_argument("unit " + std::to_string(unit) + " already registered");
  }
  units_.emplace(unit, UnitState{kNoCycle, Clock::now(), false});
  advanced_.notify_all();
}

void Master::heartbeat(UnitId unit) { heartbeat(unit, Clock::now()); }

void Master::heartbeat(UnitId unit, Clock::time_point now) {
  std::lock_guard lock(mutex_);
  auto& state = units_.at(unit);
  state.last_heartbeat = now;
  state.stalled = false;
}

std::vector<UnitId> Master::check_liveness(Clock::time_point now, Clock::duration timeout) {
  std::lock_guard lock(mutex_);
  std::vector<UnitId> out;
  for (auto& [unit, state] : units_) {
    if (now - state.last_heartbeat > timeout) {
      state.stalled = true;
    }
    if (state.stalled) {
      out.push_back(unit);
    }
  }
  return out;
}

bool Master::stalled(UnitId unit) const {
  std::lock_guard lock(mutex_);
  return units_.at(unit).stalled;
}

void Master::commit(UnitId unit, Cycle t) {
  std::lock_guard lock(mutex_);
  auto& state = units_.at(unit);
  if (t <= state.committed) {
    throw std::invalid_argument("unit " + std::to_string(unit) + " commit of cycle " + std::to_string(t) +
                                " does not advance past " + std::to_string(state.committed));
  }
  state.committed = t;
  state.last_heartbeat = Clock::now();
  state.stalled = false;
  advanced_.notify_all();
}

Cycle Master::watermark_locked() const {
  if (units_.empty()) {
    return kNoCycle;
  }
  Cycle lowest = units_.begin()->second.committed;
  for (const auto& [unit, state] : units_) {
    lowest = std::min(lowest, state.committed);
  }
  return lowest;
}

Cycle Master::watermark() const {
  std::lock_guard lock(mutex_);
  return watermark_locked();
}

std::optional<Cycle> Master::read_limit() const { return watermark(); }

std::vector<UnitId> Master::units() const {
  std::lock_guard lock(mutex_);
  std::vector<UnitId> out;
  for (const auto& [unit, state] : units_) {
    out.push_back(unit);
  }
  return out;
}

Cycle Master::wait_for_watermark(Cycle after, Clock::duration timeout) const {
  std::unique_lock lock(mutex_);
  advanced_.wait_for(lock, timeout, [&] { return watermark_locked() > after; });
  return watermark_locked();
}

DirectorySource::DirectorySource(std::filesystem::path dir, const std::vector<UnitId>& units) : dir_(std::move(dir)) {
  for (auto unit : units) {
    auto& cycles = cycles_[unit];
    const auto unit_dir = dir_ / std::to_string(unit);
    if (std::filesystem::is_directory(unit_dir)) {
      for (const auto& entry : std::filesystem::directory_iterator(unit_dir)) {
        if (entry.path().extension() == ".cat") {
          cycles.push_back(parse_number<Cycle>(entry.path().stem().string()));
        }
      }
    }
    std::sort(cycles.begin(), cycles.end());
    cursor_[unit] = 0;
  }
}

std::optional<CycleBatch> DirectorySource::next(UnitId unit) {
  auto& cycles = cycles_.at(unit);
  auto& cursor = cursor_.at(unit);
  if (cursor >= cycles.size()) {
    return std::nullopt;
  }
  const auto t = cycles[cursor++];
  CycleBatch batch{unit, t, read_catalog_file(catalog_path(dir_, unit, t)), Eset{t, {}}};
  const auto eset_file = eset_path(dir_, unit, t);
  if (std::filesystem::exists(eset_file)) {
    batch.eset = read_eset_file(eset_file);
  }
  return batch;
}

std::vector<UnitId> DirectorySource::discover_units(const std::filesystem::path& dir) {
  std::vector<UnitId> units;
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument("data directory not found: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    if (!name.empty() && std::all_of(name.begin(), name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      units.push_back(parse_number<UnitId>(name));
    }
  }
  std::sort(units.begin(), units.end());
  return units;
}

Pipeline::Pipeline(std::vector<PartitionGrid> grids, KvBackend& store, IngestOptions options)
    : grids_(std::move(grids)), store_(store) {
  for (const auto& grid : grids_) {
    workers_.push_back(std::make_unique<Worker>(grid, store_, options));
    master_.register_worker(grid.unit());
    workers_.back()->write_metadata();
  }
}

Worker& Pipeline::worker(UnitId unit) {
  for (auto& w : workers_) {
    if (w->unit() == unit) {
      return *w;
    }
  }
  throw std::out_of_range("no worker for unit " + std::to_string(unit));
}

std::optional<CycleReport> Pipeline::step(BatchSource& source) {
  struct Job {
    Worker* worker;
    CycleBatch batch;
  };
  std::vector<Job> jobs;
  for (auto& w : workers_) {
    auto& retry = retry_[w->unit()];
    std::optional<CycleBatch> batch = retry ? std::move(retry) : source.next(w->unit());
    retry.reset();
    if (batch) {
      jobs.push_back(Job{w.get(), std::move(*batch)});
    }
  }
  if (jobs.empty()) {
    return std::nullopt;
  }

  std::vector<std::future<IngestStats>> futures;
  futures.reserve(jobs.size());
  for (auto& job : jobs) {
    futures.push_back(std::async(std::launch::async, [&job] { return job.worker->process_cycle(job.batch); }));
  }

  CycleReport report;
  std::exception_ptr fatal;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      auto stats = futures[i].get();
      master_.commit(stats.unit, stats.t);
      report.t = std::max(report.t, stats.t);
      report.max_latency_s = std::max(report.max_latency_s, stats.latency_s);
      report.new_events += stats.new_events;
      report.units.push_back(std::move(stats));
    } catch (const CycleFailed&) {
      retry_[jobs[i].worker->unit()] = std::move(jobs[i].batch);
    } catch (...) {
      if (!fatal) fatal = std::current_exception();
    }
  }
  if (fatal) {
    std::rethrow_exception(fatal);
  }
  report.watermark = master_.watermark();
  return report;
}

std::size_t Pipeline::run(BatchSource& source, std::size_t max_cycles,
                          const std::function<void(const CycleReport&)>& on_cycle) {
  std::size_t done = 0;
  while (done < max_cycles) {
    auto report = step(source);
    if (!report) {
      break;
    }
    ++done;
    if (on_cycle) {
      on_cycle(*report);
    }
  }
  return done;
}

}  // namespace aserv
