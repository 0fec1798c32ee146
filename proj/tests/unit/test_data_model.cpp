#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <set>
#include <sstream>

#include "ccmv/data_model.hpp"
#include "ccmv/simbench.hpp"

using namespace ccmv;

TEST_CASE("patterns from a two-column file") {
  const Dataset ds = parse_dataset_string("a,b\n1,2\n1,\n,2\n", "a");
  REQUIRE(ds.rows() == 3);
  CHECK(ds.mask(0).to_string() == "11");
  CHECK(ds.mask(1).to_string() == "10");
  CHECK(ds.mask(2).to_string() == "01");
  const auto ix = index_patterns(ds);
  CHECK(ix.pattern_count() == 3);
  CHECK(pattern_rows(ix, ResponsePattern::from_string("10")) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(pattern_rows(ix, ResponsePattern::from_string("00")), std::out_of_range);
}

TEST_CASE("no empty cells gives the complete pattern only") {
  const Dataset ds = parse_dataset_string("y,x\n0,1.5\n1,-2\n1,3\n", "y");
  const auto ix = index_patterns(ds);
  REQUIRE(ix.pattern_count() == 1);
  CHECK(ix.groups()[0].pattern.is_complete());
  CHECK(ix.complete_ids() == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("a column missing everywhere clears its bit in every mask") {
  const Dataset ds = parse_dataset_string("y,x,z\n0,1,\n1,2,\n", "y");
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    CHECK_FALSE(ds.mask(i).observed(2));
    CHECK(ds.mask(i).observed(0));
  }
  CHECK_FALSE(index_patterns(ds).has_complete());
}

TEST_CASE("hand-built masks are counted") {
  const Dataset ds = parse_dataset_string("y,a,b\n1,1,1\n0,,2\n1,3,\n0,4,4\n1,,5\n", "y");
  const auto ix = index_patterns(ds);
  std::map<std::string, std::size_t> counts;
  for (const auto& g : ix.groups()) counts[g.pattern.to_string()] = g.rows.size();
  CHECK(counts == std::map<std::string, std::size_t>{{"111", 2}, {"101", 2}, {"110", 1}});
  CHECK(ix.groups().front().pattern.is_complete());
}

TEST_CASE("pattern groups partition the rows") {
  const auto rep = gen_replication(SimSetting::make(1, 300), 11);
  const auto ix = index_patterns(rep.observed);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& g : ix.groups()) {
    CHECK(!g.rows.empty());
    CHECK(std::is_sorted(g.rows.begin(), g.rows.end()));
    for (auto r : g.rows) seen.insert(r);
    total += g.rows.size();
  }
  CHECK(total == rep.observed.rows());
  CHECK(seen.size() == rep.observed.rows());
}

TEST_CASE("simulated draw has the four patterns") {
  const auto rep = gen_replication(SimSetting::make(1, 1000), 3);
  const auto ix = index_patterns(rep.observed);
  std::set<std::string> names;
  for (const auto& g : ix.groups()) names.insert(g.pattern.to_string());
  CHECK(names == std::set<std::string>{"1111", "1110", "1101", "1100"});
  CHECK(ix.total_rows() == 1000);
}

TEST_CASE("binary inference and hints") {
  const Dataset ds = parse_dataset_string("y,b,c\n1,0,0.5\n0,1,2\n1,,3\n", "y");
  CHECK(ds.column(0).kind == ColumnKind::binary);
  CHECK(ds.column(1).kind == ColumnKind::binary);
  CHECK(ds.column(2).kind == ColumnKind::continuous);
  const Dataset hinted = parse_dataset_string("y,b\n1,0\n0,1\n", "y", {{"b", ColumnKind::continuous}});
  CHECK(hinted.column(1).kind == ColumnKind::continuous);
  CHECK_THROWS_AS(parse_dataset_string("y,b\n1,0.5\n", "y", {{"b", ColumnKind::binary}}), DataError);
}

TEST_CASE("malformed input is rejected") {
  CHECK_THROWS_AS(parse_dataset_string("y,x\n1,2,3\n", "y"), DataError);
  CHECK_THROWS_AS(parse_dataset_string("y,x\n1\n", "y"), DataError);
  CHECK_THROWS_AS(parse_dataset_string("y,x\n1,abc\n", "y"), DataError);
  CHECK_THROWS_AS(parse_dataset_string("y,x\n1,NA\n", "y"), DataError);
  try {
    parse_dataset_string("y,x\n1,2\n", "outcome");
    FAIL("missing outcome accepted");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("outcome") != std::string::npos);
  }
}

TEST_CASE("masked cells cannot be read") {
  const Dataset ds = parse_dataset_string("y,x\n1,\n0,2\n", "y");
  CHECK(ds.at(0, 0) == 1.0);
  CHECK_THROWS_AS(ds.at(0, 1), MaskedReadError);
  CHECK_THROWS_AS(ds.complete_row(0), MaskedReadError);
  CHECK(ds.complete_row(1)[1] == 2.0);
}

TEST_CASE("csv round trip keeps masks and values") {
  const auto rep = gen_replication(SimSetting::make(2, 200), 5);
  std::ostringstream out;
  write_csv(rep.observed, out);
  const Dataset back = parse_dataset_string(out.str(), "y");
  REQUIRE(back.rows() == rep.observed.rows());
  REQUIRE(back.cols() == rep.observed.cols());
  for (std::size_t i = 0; i < back.rows(); ++i) {
    REQUIRE(back.mask(i) == rep.observed.mask(i));
    for (std::size_t j = 0; j < back.cols(); ++j)
      if (back.observed(i, j)) CHECK(back.at(i, j) == rep.observed.at(i, j));
  }
}

TEST_CASE("select reorders columns and keeps the outcome") {
  const Dataset ds = parse_dataset_string("a,y,b\n1.5,1,\n2.5,0,3\n", "y");
  const std::vector<std::string> names{"y", "b"};
  const Dataset s = ds.select(names);
  CHECK(s.cols() == 2);
  CHECK(s.outcome_name() == "y");
  CHECK(s.mask(0).to_string() == "10");
  CHECK_THROWS_AS(ds.column_index("nope"), DataError);
}
