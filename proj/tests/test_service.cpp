#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "aserv/service.hpp"
#include "temp_dir.hpp"

using namespace aserv;
using nlohmann::json;

namespace {

Config fixture_config() {
  Config c;
  c.source = SourceKind::fixture;
  c.realtime = false;
  return c;
}

Config sim_config() {
  Config c;
  c.gen.units = 2;
  c.gen.objects = 300;
  c.gen.cycles = 400;
  c.gen.ct = 0.04;
  c.gen.p = 0.3;
  c.gen.m = 3;
  c.partitions = 16;
  return c;
}

template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = std::chrono::seconds(10)) {
  const auto end = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < end) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return pred();
}

json status_of(httplib::Client& cli) {
  const auto res = cli.Get("/status");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  return json::parse(res->body);
}

}  // namespace

TEST_CASE("config loads from JSON with validation") {
  const auto c = config_from_json(R"({"units": 3, "objects": 50, "alpha": 0.9, "source": "fixture", "c": 2})");
  CHECK(c.gen.units == 3);
  CHECK(c.gen.objects == 50);
  CHECK(c.alpha == 0.9);
  CHECK(c.source == SourceKind::fixture);
  CHECK(c.c == 2);
  CHECK(c.effective_r_min() == doctest::Approx(std::sqrt(0.03 / std::numbers::pi)));
  CHECK(config_from_json(R"({"r_min": 0.2})").effective_r_min() == 0.2);
  CHECK(config_from_json("{}").http_port == 8080);

  CHECK_THROWS_AS(config_from_json(R"({"unit": 3})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"units": "three"})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"alpha": 1.0})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"c": 30})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"source": "tape"})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"source": "directory"})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"rate": 0})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json("[1, 2]"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json("{nope"), std::invalid_argument);
  CHECK_THROWS_AS(load_config("/nonexistent/aserv.json"), std::invalid_argument);
}

TEST_CASE("a coarse partitions override warns about accuracy") {
  Config c;
  CHECK(c.warnings().empty());
  c.partitions = 100;
  REQUIRE(c.warnings().size() == 1);
  CHECK(c.warnings()[0].find("10865") != std::string::npos);
  c.partitions = 10865;
  CHECK(c.warnings().empty());
}

TEST_CASE("config path resolution honours ASERV_CONFIG") {
  test::TempDir dir;
  const auto path = dir.path() / "a.json";
  std::ofstream(path) << R"({"objects": 7})";
  ::unsetenv("ASERV_CONFIG");
  CHECK_FALSE(resolve_config_path(std::nullopt));
  ::setenv("ASERV_CONFIG", path.c_str(), 1);
  REQUIRE(resolve_config_path(std::nullopt) == path);
  CHECK(load_config(*resolve_config_path(std::nullopt)).gen.objects == 7);
  CHECK(resolve_config_path(std::filesystem::path("x.json")) == std::filesystem::path("x.json"));
  ::unsetenv("ASERV_CONFIG");
}

TEST_CASE("query replies on the worked example") {
  Service s(fixture_config());
  CHECK(s.ingest(100) == 10);
  CHECK(s.handle("probe", {{"ts", "1"}, {"te", "2"}}).body == "{\"count\":0}\n");
  CHECK(s.handle("probe", {{"ts", "4"}, {"te", "7"}}).body == "{\"count\":3}\n");

  const auto list = json::parse(s.handle("list", {{"ts", "4"}, {"te", "7"}}).body);
  REQUIRE(list["events"].size() == 3);
  CHECK(list["events"][0]["eid"] == "oid1|3");
  CHECK(list["events"][2]["eid"] == "oid3|5");
  CHECK(list["events"][0]["rows"].size() == 3);
  CHECK(list["events"][2]["rows"][0]["d"] == json::array({305.25, 305.5, 305.75}));

  const auto st = json::parse(s.handle("stretch", {{"eid", "oid3|5"}, {"dt1", "1"}, {"dt2", "1"}}).body);
  CHECK(st["from"] == 4);
  CHECK(st["to"] == 7);
  std::vector<int> ts;
  for (const auto& r : st["rows"]) ts.push_back(r["t"]);
  CHECK(ts == std::vector<int>{4, 5, 6, 7});

  const auto acc = json::parse(s.handle("accuracy", {{"ts", "4"}, {"te", "7"}, {"x", "0.1"}, {"y", "0.1"}, {"r", "0.06"}}).body);
  CHECK(acc["probe"] == 3);
  CHECK(acc["pcse"] == 1);
}

TEST_CASE("query parameter errors map to status codes") {
  Service s(fixture_config());
  s.ingest(100);
  CHECK(s.handle("probe", {{"ts", "4"}}).status == 400);
  CHECK(s.handle("probe", {{"ts", "7"}, {"te", "4"}}).status == 400);
  CHECK(s.handle("probe", {{"ts", "a"}, {"te", "4"}}).status == 400);
  CHECK(s.handle("probe", {{"ts", "1"}, {"te", "4"}, {"q", "1"}}).status == 400);
  CHECK(s.handle("probe", {{"ts", "1"}, {"te", "4"}, {"x", "0.1"}}).status == 400);
  CHECK(s.handle("probe", {{"ts", "1"}, {"te", "4"}, {"x", "0.1"}, {"y", "0.1"}, {"r", "-1"}}).status == 400);
  CHECK(s.handle("accuracy", {{"ts", "1"}, {"te", "4"}}).status == 400);
  CHECK(s.handle("stretch", {{"eid", "oid3|5"}, {"dt1", "-1"}}).status == 400);
  CHECK(s.handle("stretch", {}).status == 400);
  const auto missing = s.handle("stretch", {{"eid", "oid9|5"}});
  CHECK(missing.status == 404);
  CHECK(json::parse(missing.body).contains("error"));
  CHECK(s.handle("nothing", {}).status == 404);
  // steering is a conflict before the simulation starts
  CHECK(s.handle("pause", {}).status == 409);
  CHECK(s.handle("resume", {}).status == 409);
  CHECK(s.handle("rate", {{"value", "2"}}).status == 409);
}

TEST_CASE("feed hub delivers in order and skips evicted records") {
  FeedHub hub(3);
  std::uint64_t seq = hub.next_seq();
  hub.publish("a");
  hub.publish("b");
  CHECK(hub.wait(seq, std::chrono::milliseconds(1)) == "a");
  CHECK(hub.wait(seq, std::chrono::milliseconds(1)) == "b");
  CHECK_FALSE(hub.wait(seq, std::chrono::milliseconds(1)));
  for (const char* r : {"c", "d", "e", "f", "g"}) hub.publish(r);
  CHECK(hub.wait(seq, std::chrono::milliseconds(1)) == "e");
  hub.close();
  CHECK(hub.wait(seq, std::chrono::milliseconds(1)) == "f");
  CHECK(hub.wait(seq, std::chrono::milliseconds(1)) == "g");
  CHECK_FALSE(hub.wait(seq, std::chrono::seconds(5)));
  CHECK(hub.closed());
}

TEST_CASE("HTTP API serves the worked example") {
  Service s(fixture_config());
  s.ingest(100);
  ApiServer api(s);
  const int port = api.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/probe?ts=1&te=2");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == "{\"count\":0}\n");
  CHECK(res->get_header_value("Content-Type") == "application/json");

  res = cli.Get("/stretch?eid=oid3%7C5&dt1=1&dt2=1");
  REQUIRE(res);
  CHECK(res->body == s.handle("stretch", {{"eid", "oid3|5"}, {"dt1", "1"}, {"dt2", "1"}}).body);
  res = cli.Get("/list?ts=4&te=7");
  CHECK(res->body == s.handle("list", {{"ts", "4"}, {"te", "7"}}).body);

  CHECK(cli.Get("/probe?ts=x&te=2")->status == 400);
  CHECK(cli.Get("/stretch?eid=oid1%7C4")->status == 404);
  CHECK(cli.Post("/sim/pause")->status == 409);
  CHECK(cli.Get("/missing")->status == 404);

  const auto st = status_of(cli);
  CHECK(st["watermark"] == 10);
  CHECK(st["keys"]["sepi"] == 4);
  CHECK(st["units"] == json::array({0}));
  api.stop();
}

TEST_CASE("steering pauses, resumes and re-rates the simulation") {
  Service s(sim_config());
  ApiServer api(s);
  const int port = api.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  s.start(400);
  REQUIRE(eventually([&] { return s.cycles_done() >= 2; }));

  auto res = cli.Post("/sim/pause");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["state"] == "paused");
  std::this_thread::sleep_for(std::chrono::milliseconds(150));
  const auto frozen = status_of(cli)["watermark"];
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  CHECK(status_of(cli)["watermark"] == frozen);

  CHECK(cli.Post("/sim/rate?value=0")->status == 400);
  CHECK(cli.Post("/sim/rate?value=abc")->status == 400);
  res = cli.Post("/sim/rate", R"({"rate": 4})", "application/json");
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["rate"] == 4.0);
  CHECK(cli.Post("/sim/rate", "not json", "application/json")->status == 400);

  CHECK(cli.Post("/sim/resume")->status == 200);
  CHECK(eventually([&] { return status_of(cli)["watermark"].get<long long>() > frozen.get<long long>(); }));

  s.stop();
  CHECK(s.state() == SimState::stopped);
  CHECK(cli.Post("/sim/pause")->status == 409);
  CHECK(cli.Post("/sim/resume")->status == 409);
  api.stop();
}

TEST_CASE("simulation drains and stops on its own") {
  auto cfg = sim_config();
  cfg.gen.cycles = 5;
  cfg.realtime = false;
  Service s(cfg);
  s.start(100);
  REQUIRE(s.wait_stopped(std::chrono::seconds(10)));
  CHECK(s.state() == SimState::stopped);
  CHECK(s.cycles_done() == 5);
  CHECK(s.pipeline().master().watermark() == 5);
  CHECK(s.handle("pause", {}).status == 409);
  CHECK_THROWS_AS(s.start(1), Conflict);
}

TEST_CASE("event stream reports only committed cycles") {
  auto cfg = sim_config();
  cfg.start_paused = true;
  Service s(cfg);
  ApiServer api(s);
  const int port = api.start("127.0.0.1", 0);
  s.start(400);

  std::mutex m;
  std::string received;
  std::thread reader([&] {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(std::chrono::seconds(10));
    cli.Get("/stream", [&](const char* data, std::size_t n) {
      std::lock_guard lock(m);
      received.append(data, n);
      return received.find("event: end") == std::string::npos;
    });
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  {
    std::lock_guard lock(m);
    CHECK(received.empty());
  }
  s.resume();
  REQUIRE(eventually([&] {
    std::lock_guard lock(m);
    std::size_t n = 0;
    for (auto p = received.find("event: cycle"); p != std::string::npos; p = received.find("event: cycle", p + 1)) ++n;
    return n >= 4;
  }));
  s.stop();
  reader.join();
  api.stop();

  std::vector<json> records;
  std::size_t pos = 0;
  while ((pos = received.find("data: ", pos)) != std::string::npos) {
    const auto end = received.find('\n', pos);
    const auto j = json::parse(received.substr(pos + 6, end - pos - 6));
    if (j.contains("t")) records.push_back(j);
    pos = end;
  }
  REQUIRE(records.size() >= 4);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i]["t"].get<long long>() <= records[i]["watermark"].get<long long>());
    CHECK(records[i]["t"] == static_cast<long long>(i + 1));
    CHECK(records[i]["rows"] == 600);
    CHECK(records[i].contains("latency_s"));
    CHECK(records[i]["deltas"].is_array());
  }
  CHECK(received.find("event: end") != std::string::npos);
}

TEST_CASE("directory source ingests generated files") {
  test::TempDir dir;
  auto cfg = sim_config();
  cfg.gen.cycles = 6;
  Generator gen(cfg.gen);
  for (UnitId u = 0; u < 2; ++u) {
    while (auto b = gen.next(u)) emit_files(*b, dir.path());
  }
  auto from_gen = cfg;
  from_gen.realtime = false;
  Service a(from_gen);
  a.ingest(100);
  auto from_dir = from_gen;
  from_dir.source = SourceKind::directory;
  from_dir.data_dir = dir.path();
  from_dir.gen.units = 1;
  Service b(from_dir);
  CHECK(b.config().gen.units == 2);
  CHECK(b.ingest(100) == 6);
  const Params q{{"ts", "1"}, {"te", "6"}};
  CHECK(a.handle("list", q).body == b.handle("list", q).body);
  CHECK(a.raw_bytes() == b.raw_bytes());
  auto empty = from_dir;
  empty.data_dir = dir.path() / "none";
  std::filesystem::create_directories(empty.data_dir);
  CHECK_THROWS_AS(Service{empty}, std::invalid_argument);
}

TEST_CASE("shipped config files load") {
  const auto example = load_config(ASERV_DATA_DIR "/../config/aserv.example.json");
  CHECK(example.gen.units == 2);
  CHECK(example.warnings().empty());
  CHECK(load_config(ASERV_DATA_DIR "/../config/fixture.json").source == SourceKind::fixture);
}
