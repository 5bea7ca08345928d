#include <doctest.h>

#include <algorithm>
#include <memory>
#include <random>
#include <set>
#include <thread>

#include "aserv/resp.hpp"
#include "aserv/storage.hpp"
#include "fake_resp.hpp"

using namespace aserv;

namespace {

std::vector<std::string> sorted_keys(KvBackend& kv, std::string_view prefix) {
  auto keys = kv.keys(prefix);
  std::sort(keys.begin(), keys.end());
  return keys;
}

// Behaviour shared by every backend.
void check_contract(KvBackend& kv) {
  CHECK(kv.put("a:1", "x").ok());
  CHECK(kv.get("a:1") == "x");
  CHECK(kv.update("a:1", "y").ok());
  CHECK(kv.get("a:1") == "y");
  CHECK(kv.update("a:missing", "z").code == StoreErrc::missing_key);
  CHECK_FALSE(kv.get("a:missing").has_value());

  for (const auto* item : {"i0", "i1", "i2", "i3"}) CHECK(kv.append("l:1", item).ok());
  CHECK(kv.range("l:1", 0, -1) == std::vector<std::string>{"i0", "i1", "i2", "i3"});
  CHECK(kv.range("l:1", 0, 0) == std::vector<std::string>{"i0"});
  CHECK(kv.range("l:1", 1, 2) == std::vector<std::string>{"i1", "i2"});
  CHECK(kv.range("l:1", -2, -1) == std::vector<std::string>{"i2", "i3"});
  CHECK(kv.range("l:1", 3, 10) == std::vector<std::string>{"i3"});
  CHECK(kv.range("l:none", 0, -1).empty());

  CHECK(kv.append("a:1", "oops").code == StoreErrc::wrong_type);
  CHECK_THROWS_AS(kv.get("l:1"), StoreError);

  CHECK(kv.put("a:2", "v2").ok());
  CHECK(kv.put("b:1", "other").ok());
  auto scanned = kv.scan_prefix("a:");
  std::sort(scanned.begin(), scanned.end(), [](const auto& p, const auto& q) { return p.key < q.key; });
  REQUIRE(scanned.size() == 2);
  CHECK(scanned[0].key == "a:1");
  CHECK(scanned[0].value == "y");
  CHECK(scanned[1].value == "v2");
  CHECK(kv.scan_prefix("l:").empty());
  CHECK(sorted_keys(kv, "l:") == std::vector<std::string>{"l:1"});
  CHECK(kv.key_count() == 4);

  const std::vector<WriteOp> ops = {WriteOp::put("c:1", "1"), WriteOp::update("c:1", "2"),
                                    WriteOp::update("c:none", "3"), WriteOp::append("c:l", "x")};
  const auto acks = kv.write_batch(ops);
  REQUIRE(acks.size() == 4);
  CHECK(acks[0].ok());
  CHECK(acks[1].ok());
  CHECK(acks[2].code == StoreErrc::missing_key);
  CHECK(acks[3].ok());
  CHECK(kv.get("c:1") == "2");
}

}  // namespace

TEST_CASE("memory backend honours the store contract") {
  MemoryBackend kv;
  check_contract(kv);
}

TEST_CASE("memory backend byte accounting") {
  MemoryBackend kv;
  kv.put("k", "vvv");
  CHECK(kv.bytes_stored() == 4);
  kv.put("k", "v");
  CHECK(kv.bytes_stored() == 2);
  kv.append("l", "abc");
  kv.append("l", "de");
  CHECK(kv.bytes_stored() == 2 + 1 + 5);
  CHECK(kv.bytes_with_prefix("l") == 6);
  CHECK(kv.bytes_with_prefix("k") == 2);
  CHECK(kv.bytes_with_prefix("z") == 0);
}

TEST_CASE("counters count one per logical call") {
  MemoryBackend kv;
  const auto before = kv.counters();
  kv.put("a", "1");
  kv.update("a", "2");
  kv.append("l", "x");
  (void)kv.get("a");
  (void)kv.range("l", 0, -1);
  (void)kv.scan_prefix("a");
  (void)kv.keys("a");
  const auto d = kv.counters() - before;
  CHECK(d.puts == 1);
  CHECK(d.updates == 1);
  CHECK(d.appends == 1);
  CHECK(d.gets == 1);
  CHECK(d.range_reads == 1);
  CHECK(d.scans == 1);
  CHECK(d.key_listings == 1);
  CHECK(d.writes() == 3);
  kv.reset_counters();
  CHECK(kv.counters().puts == 0);
}

TEST_CASE("fault injection") {
  MemoryBackend kv;
  kv.fail_next_writes(2);
  CHECK(kv.put("a", "1").code == StoreErrc::unavailable);
  CHECK(kv.append("l", "1").code == StoreErrc::unavailable);
  CHECK(kv.put("a", "1").ok());
  kv.set_available(false);
  CHECK(kv.put("b", "1").code == StoreErrc::unavailable);
  CHECK_THROWS_AS(kv.get("a"), StoreError);
  CHECK_THROWS_AS(kv.scan_prefix(""), StoreError);
  kv.set_available(true);
  CHECK(kv.get("a") == "1");
  CHECK_FALSE(kv.get("b").has_value());
}

TEST_CASE("oversized items are refused") {
  MemoryBackend kv(MemoryBackendOptions{4, 8});
  CHECK(kv.put("k", "123456789").code == StoreErrc::oversized);
  CHECK(kv.append("l", "123456789").code == StoreErrc::oversized);
  CHECK(kv.put("k", "12345678").ok());
}

TEST_CASE("scan returns every key under the prefix exactly once across shards") {
  MemoryBackend kv(MemoryBackendOptions{7, 1 << 20});
  std::set<std::string> expect;
  for (int i = 0; i < 500; ++i) {
    const auto key = "p:" + std::to_string(i);
    kv.put(key, std::to_string(i));
    expect.insert(key);
    kv.put("q:" + std::to_string(i), "x");
  }
  const auto got = kv.scan_prefix("p:");
  CHECK(got.size() == 500);
  std::set<std::string> seen;
  for (const auto& kvp : got) seen.insert(kvp.key);
  CHECK(seen == expect);
}

TEST_CASE("concurrent appends to distinct keys keep per-key order") {
  MemoryBackend kv;
  std::vector<std::thread> threads;
  for (int w = 0; w < 8; ++w) {
    threads.emplace_back([&kv, w] {
      for (int i = 0; i < 1000; ++i) kv.append("w:" + std::to_string(w), std::to_string(i));
    });
  }
  for (auto& t : threads) t.join();
  for (int w = 0; w < 8; ++w) {
    const auto items = kv.range("w:" + std::to_string(w), 0, -1);
    REQUIRE(items.size() == 1000);
    for (int i = 0; i < 1000; ++i) CHECK(items[static_cast<std::size_t>(i)] == std::to_string(i));
  }
  CHECK(kv.key_count() == 8);
}

TEST_CASE("resp encoding and incremental parsing") {
  CHECK(resp::encode_command({"SET", "k", "v"}) == "*3\r\n$3\r\nSET\r\n$1\r\nk\r\n$1\r\nv\r\n");
  resp::Parser p;
  const std::string wire = "+OK\r\n:42\r\n$-1\r\n*2\r\n$3\r\nfoo\r\n-ERR bad\r\n$0\r\n\r\n";
  for (char c : wire) p.feed(std::string_view(&c, 1));
  auto v = p.next();
  REQUIRE(v);
  CHECK(v->type == resp::Value::Type::simple);
  CHECK(v->str == "OK");
  v = p.next();
  CHECK(v->integer == 42);
  v = p.next();
  CHECK(v->type == resp::Value::Type::null);
  v = p.next();
  REQUIRE(v->type == resp::Value::Type::array);
  CHECK(v->elements[0].str == "foo");
  CHECK(v->elements[1].type == resp::Value::Type::error);
  v = p.next();
  CHECK(v->type == resp::Value::Type::bulk);
  CHECK(v->str.empty());
  CHECK_FALSE(p.next());
}

TEST_CASE("resp parser waits for split frames and round-trips binary data") {
  const std::string payload("a\r\nb\0c", 6);
  const auto wire = resp::encode(resp::Value::bulk_string(payload));
  resp::Parser p;
  p.feed(wire.substr(0, 5));
  CHECK_FALSE(p.next());
  p.feed(wire.substr(5));
  const auto v = p.next();
  REQUIRE(v);
  CHECK(v->str == payload);
  resp::Parser bad;
  bad.feed("?what\r\n");
  CHECK_THROWS(bad.next());
}

TEST_CASE("glob prefixes escape metacharacters") {
  CHECK(resp::glob_prefix("sepi:") == "sepi:*");
  CHECK(resp::glob_prefix("a*b?[c]") == "a\\*b\\?\\[c\\]*");
}

TEST_CASE("resp backend honours the store contract against a RESP server") {
  test::FakeRespServer server;
  RespBackend kv(RespOptions{"127.0.0.1", server.port(), 1});
  check_contract(kv);
  CHECK(kv.bytes_stored() == 123456);
}

TEST_CASE("resp batches are pipelined") {
  test::FakeRespServer server;
  RespBackend kv(RespOptions{"127.0.0.1", server.port(), 100});
  std::vector<WriteOp> ops;
  for (int i = 0; i < 200; ++i) ops.push_back(WriteOp::append("l", std::to_string(i)));
  const auto before = server.commands();
  const auto acks = kv.write_batch(ops);
  CHECK(std::all_of(acks.begin(), acks.end(), [](const Ack& a) { return a.ok(); }));
  CHECK(server.commands() - before == 200);
  CHECK(kv.range("l", 0, -1).size() == 200);
  CHECK(kv.range("l", 199, 199) == std::vector<std::string>{"199"});
}

TEST_CASE("resp backend reports failures and reconnects") {
  auto server = std::make_unique<test::FakeRespServer>();
  RespBackend kv(RespOptions{"127.0.0.1", server->port(), 10});
  CHECK(kv.put("k", "v").ok());
  server->kick();
  // the first call after the drop sees the closed connection, later calls reconnect
  Ack ack = kv.put("k", "v2");
  if (!ack.ok()) {
    CHECK(ack.code == StoreErrc::unavailable);
    ack = kv.put("k", "v2");
  }
  CHECK(ack.ok());
  CHECK(kv.get("k") == "v2");
  const auto port = server->port();
  server.reset();
  CHECK(kv.put("k", "v3").code == StoreErrc::unavailable);
  CHECK_THROWS_AS(RespBackend(RespOptions{"127.0.0.1", port, 10}), StoreError);
}
