#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "aserv/service.hpp"
#include "temp_dir.hpp"

using namespace aserv;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + ASERV_CLI + std::string(" ") + args + " 2>/dev/null";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Config fixture_config() {
  Config c;
  c.source = SourceKind::fixture;
  c.realtime = false;
  return c;
}

}  // namespace

TEST_CASE("query probe on the fixture prints the count") {
  const auto r = cli("query probe --fixture --ts 4 --te 7");
  CHECK(r.code == 0);
  CHECK(r.out == "{\"count\":3}\n");
  CHECK(cli("query probe --fixture --ts 7 --te 4").code == 1);
  CHECK(cli("query stretch --fixture --eid 'oid9|1'").code == 1);
}

TEST_CASE("CLI and API answers are byte-identical") {
  Service s(fixture_config());
  s.ingest(100);
  ApiServer api(s);
  const int port = api.start("127.0.0.1", 0);
  const std::string url = "--url http://127.0.0.1:" + std::to_string(port);
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"probe --ts 1 --te 2", "probe"},
      {"probe --ts 4 --te 7 --x 0.15 --y 0.15 --r 0.1", "probe"},
      {"list --ts 4 --te 7", "list"},
      {"stretch --eid 'oid3|5' --dt1 1 --dt2 1", "stretch"},
      {"accuracy --ts 4 --te 7 --x 0.1 --y 0.1 --r 0.06", "accuracy"},
  };
  for (const auto& [args, _] : cases) {
    const auto remote = cli("query " + args + " " + url);
    const auto local = cli("query " + args + " --fixture");
    CHECK(remote.code == 0);
    CHECK(remote.out == local.out);
    CHECK_FALSE(remote.out.empty());
  }
  CHECK(cli("query stretch --eid 'oid3|5' --dt1 1 --dt2 1 " + url).out ==
        s.handle("stretch", {{"eid", "oid3|5"}, {"dt1", "1"}, {"dt2", "1"}}).body);
  api.stop();
  CHECK(cli("query probe --ts 1 --te 2 " + url).code == 2);
}

TEST_CASE("fit reproduces the probing prediction") {
  const auto r = cli(std::string("fit --training ") + ASERV_DATA_DIR + "/latency_training.tsv --k 19");
  CHECK(r.code == 0);
  const auto block = r.out.find("[probe]");
  REQUIRE(block != std::string::npos);
  CHECK(r.out.find("T_e: 1.88", block) < r.out.find("[list]"));
  CHECK(r.out.find("T_e: 2.20") != std::string::npos);
  CHECK(cli("fit").code == 2);
  CHECK(cli("fit --training /nonexistent.tsv").code == 2);
}

TEST_CASE("run with zero cycles drains and exits") {
  CHECK(cli("run --cycles 0 --no-http").code == 0);
  const auto r = cli("run --fixture --fast --port 0 --cycles 3");
  CHECK(r.code == 0);
  std::size_t lines = 0;
  for (char c : r.out) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 3);
  CHECK(r.out.starts_with("{\"deltas\":"));
  CHECK(cli("run --cycles -1 --no-http").code == 2);
}

TEST_CASE("config comes from ASERV_CONFIG and bad configs fail") {
  test::TempDir dir;
  const auto good = dir.path() / "good.json";
  std::ofstream(good) << R"({"source": "fixture", "realtime": false})";
  const auto r = cli("query probe --ts 4 --te 7", "ASERV_CONFIG=" + good.string());
  CHECK(r.code == 0);
  CHECK(r.out == "{\"count\":3}\n");
  const auto bad = dir.path() / "bad.json";
  std::ofstream(bad) << R"({"sorce": "fixture"})";
  CHECK(cli("query probe --ts 4 --te 7", "ASERV_CONFIG=" + bad.string()).code == 2);
  CHECK(cli("query probe --ts 4 --te 7 --config " + bad.string()).code == 2);
}

TEST_CASE("gen writes files that query back like the live fixture") {
  test::TempDir dir;
  const auto out = dir.path() / "night";
  const auto g = cli("gen --fixture --out " + out.string());
  CHECK(g.code == 0);
  CHECK(g.out.find("files: 20") != std::string::npos);
  CHECK(std::filesystem::exists(out / "ground_truth.csv"));
  CHECK(std::filesystem::exists(out / "0" / "5.cat"));
  const auto cfg = dir.path() / "grid.json";
  std::ofstream(cfg) << R"({"partitions": 4})";
  const auto from_files = cli("query list --ts 1 --te 10 --config " + cfg.string() + " --data-dir " + out.string());
  CHECK(from_files.code == 0);
  CHECK(from_files.out == cli("query list --ts 1 --te 10 --fixture").out);
}

TEST_CASE("report summarises a small night") {
  test::TempDir dir;
  const auto cfg = dir.path() / "c.json";
  std::ofstream(cfg) << R"({"units": 1, "objects": 500, "cycles": 8, "p": 0.2, "m": 5, "partitions": 400})";
  const auto r = cli("report --queries 10 --config " + cfg.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("cycles: 8\nwatermark: 8\n") != std::string::npos);
  CHECK(r.out.find("insert_constraint: ok") != std::string::npos);
  CHECK(r.out.find("accuracy_queries: 10") != std::string::npos);
  CHECK(r.out.find("probe_below_pcse: 0") != std::string::npos);
}
