#include <doctest.h>

#include <filesystem>
#include <limits>
#include <random>

#include "aserv/catalog.hpp"
#include "aserv/domain.hpp"
#include "aserv/keys.hpp"
#include "aserv/text.hpp"
#include "temp_dir.hpp"

using namespace aserv;

TEST_CASE("region rejects non-positive or non-finite input") {
  CHECK_NOTHROW(Region(0.5, 0.5, 0.1));
  CHECK_THROWS_AS(Region(0.5, 0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Region(0.5, 0.5, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(Region(std::numeric_limits<double>::quiet_NaN(), 0.5, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(Region(0.5, 0.5, std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("time interval is closed and ordered") {
  CHECK_NOTHROW(TimeInterval(4, 4));
  CHECK_THROWS_AS(TimeInterval(5, 4), std::invalid_argument);
  CHECK(intersects(TimeInterval(1, 3), TimeInterval(3, 9)));
  CHECK(intersects(TimeInterval(4, 7), TimeInterval(5, 6)));
  CHECK_FALSE(intersects(TimeInterval(1, 2), TimeInterval(3, 5)));
}

TEST_CASE("intersects agrees with a cycle-by-cycle oracle") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Cycle> pick(0, 30);
  for (int i = 0; i < 2000; ++i) {
    auto a0 = pick(rng), a1 = pick(rng), b0 = pick(rng), b1 = pick(rng);
    if (a0 > a1) std::swap(a0, a1);
    if (b0 > b1) std::swap(b0, b1);
    bool shared = false;
    for (Cycle t = a0; t <= a1; ++t) shared = shared || (b0 <= t && t <= b1);
    CHECK(intersects(TimeInterval(a0, a1), TimeInterval(b0, b1)) == shared);
  }
}

TEST_CASE("contains is boundary inclusive") {
  const Region reg(0.0, 0.0, 1.0);
  CHECK(contains(reg, 1.0, 0.0));
  CHECK(contains(reg, 0.6, 0.8));
  CHECK_FALSE(contains(reg, 1.0, 0.01));
}

TEST_CASE("eid format and parse") {
  CHECK(format_eid("oid3", 5) == "oid3|5");
  const ScientificEvent ev{0, "oid2", 8, 9};
  CHECK(ev.eid() == "oid2|8");
  CHECK(parse_eid("oid3|5") == std::pair<std::string, Cycle>{"oid3", 5});
  CHECK(parse_eid("oid3|0005").second == 5);
  CHECK_THROWS_AS(parse_eid("oid3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_eid("|5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_eid("oid3|"), std::invalid_argument);
  CHECK_THROWS_AS(parse_eid("oid3|x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_eid("oid3|-1"), std::invalid_argument);
}

TEST_CASE("oid validation") {
  CHECK_NOTHROW(validate_oid("u0_000001"));
  CHECK_THROWS_AS(validate_oid(""), std::invalid_argument);
  CHECK_THROWS_AS(validate_oid("a|b"), std::invalid_argument);
}

TEST_CASE("text helpers") {
  CHECK(split("a,,b", ',') == std::vector<std::string_view>{"a", "", "b"});
  CHECK(split("", ',') == std::vector<std::string_view>{""});
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(12.0) == "12");
  CHECK(format_fixed(1.23456, 4) == "1.2346");
  CHECK(zero_pad(42, 5) == "00042");
  CHECK(zero_pad(123456, 3) == "123456");
  CHECK(parse_number<int>("17") == 17);
  CHECK(parse_number<double>("2.5") == 2.5);
  CHECK_THROWS_AS(parse_number<int>("17x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_number<int>(""), std::invalid_argument);
}

TEST_CASE("format_double round-trips random values") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    CHECK(parse_number<double>(format_double(v)) == v);
  }
}

TEST_CASE("catalog rows round-trip") {
  const CatalogTuple row{"oid1", 0.1, 0.25, 7, {12.5, 13.0, 1e-7}};
  const auto line = encode_row(row);
  CHECK(line == "oid1,0.1,0.25,7,12.5,13,1e-07");
  const auto back = decode_row(line);
  CHECK(back.oid == row.oid);
  CHECK(back.x == row.x);
  CHECK(back.y == row.y);
  CHECK(back.t == row.t);
  CHECK(back.d == row.d);
  CHECK(encode_row(ValidTuple{"o", 1.0, 2.0, 3, {4.0}}) == "o,1,2,3,4");
  CHECK_THROWS_AS(decode_row("oid1,0.1,0.2"), std::invalid_argument);
  CHECK_THROWS_AS(decode_row("oid1,x,0.2,1"), std::invalid_argument);
  CHECK_THROWS_AS(decode_row("a|b,0.1,0.2,1"), std::invalid_argument);
}

TEST_CASE("catalog and eset files") {
  test::TempDir dir;
  const std::vector<CatalogTuple> rows = {{"a", 0.1, 0.2, 3, {1.0}}, {"b", 0.3, 0.4, 3, {2.0}}};
  const auto cat = catalog_path(dir.path(), 2, 3);
  CHECK(cat == dir.path() / "2" / "3.cat");
  write_catalog_file(cat, rows);
  const auto back = read_catalog_file(cat);
  REQUIRE(back.size() == 2);
  CHECK(back[1].oid == "b");
  CHECK(back[1].d == std::vector<double>{2.0});

  const auto es = eset_path(dir.path(), 2, 3);
  write_eset_file(es, Eset{3, {"b", "a", "b"}});
  const auto eset = read_eset_file(es);
  CHECK(eset.t == 3);
  CHECK(eset.oids.size() == 2);
  CHECK_THROWS(read_catalog_file(dir.path() / "missing.cat"));
}

TEST_CASE("store keys") {
  CHECK(keys::sepi(0, "oid3", 5) == "sepi:0:oid3|0000000005");
  const auto k = keys::parse_sepi("sepi:1:oid3|0000000005");
  CHECK(k.unit == 1);
  CHECK(k.oid == "oid3");
  CHECK(k.stime == 5);
  CHECK(keys::epi_start(0, "a", 3) == "epi:0:S:a|0000000003");
  CHECK(keys::epi_end(0, "a", 3) == "epi:0:E:a|0000000003");
  CHECK(keys::icr(PartitionId{1, 7}) == "icr:1:7");
  CHECK(keys::partition(PartitionId{0, 2}) == "part:0:2");
  CHECK(keys::event(0, "oid1|3") == "ev:0:oid1|3");
  CHECK(keys::parse_partition_key("icr:3:12", keys::kIcr) == PartitionId{3, 12});
  CHECK_THROWS_AS(keys::parse_partition_key("part:3:12", keys::kIcr), std::invalid_argument);
  CHECK_THROWS_AS(keys::parse_sepi("epi:0:S:a|1"), std::invalid_argument);
}

TEST_CASE("padded stime keeps lexicographic order equal to numeric order") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Cycle> pick(0, 5'000'000);
  for (int i = 0; i < 500; ++i) {
    const auto a = pick(rng);
    const auto b = pick(rng);
    CHECK((keys::sepi(0, "o", a) < keys::sepi(0, "o", b)) == (a < b));
  }
}
