#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "macrocast/csv.hpp"
#include "macrocast/errors.hpp"
#include "macrocast/time_series.hpp"

using namespace macrocast;

namespace {

TimeSeries make_series(Period start, std::vector<double> v, Unit u = Unit::yoy_percent, std::string id = "GDP") {
  return TimeSeries(std::move(id), u, start, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

}  // namespace

TEST_CASE("period ordering and arithmetic") {
  CHECK(Period{2019, 4}.successor() == Period{2020, 1});
  CHECK(Period{2020, 1}.predecessor() == Period{2019, 4});
  CHECK(Period{1999, 3} < Period{1999, 4});
  CHECK(Period{1999, 4} < Period{2000, 1});
  CHECK_FALSE(Period{2000, 1} < Period{1999, 4});

  std::mt19937 rng(7);
  std::uniform_int_distribution<int> year(1900, 2100), quarter(1, 4);
  for (int i = 0; i < 200; ++i) {
    const Period p{year(rng), quarter(rng)};
    CHECK(p.successor().predecessor() == p);
    CHECK(p.predecessor().successor() == p);
    CHECK(p.successor().successor().successor().successor() == Period{p.year + 1, p.quarter});
  }
  CHECK(Period::parse("1999Q3") == Period{1999, 3});
  CHECK(Period{1999, 3}.to_string() == "1999Q3");
  CHECK_THROWS_AS(Period::parse("1999Q5"), DataError);
  CHECK_THROWS_AS(Period::parse("1999-Q1"), DataError);
  CHECK_THROWS_AS(Period::parse("99Q1"), DataError);
}

TEST_CASE("window length counts quarters inclusively") {
  CHECK(Window(Period{2017, 1}, Period{2019, 4}).length() == 12);
  CHECK(Window(Period{2023, 1}, Period{2024, 3}).length() == 7);
  CHECK(Window(Period{1999, 3}, Period{2024, 3}).length() == 101);
  CHECK_THROWS_AS(Window(Period{2020, 1}, Period{2019, 4}), InvalidArgument);
  CHECK(Window::parse("2017Q1-2019Q4") == Window(Period{2017, 1}, Period{2019, 4}));
}

TEST_CASE("time series rejects non-finite values") {
  CHECK_THROWS_AS(make_series(Period{2000, 1}, {1.0, NAN}), DataError);
  CHECK_THROWS_AS(make_series(Period{2000, 1}, {INFINITY}), DataError);
}

TEST_CASE("ingest_csv single row") {
  auto s = ingest_csv("period,series_id,value\n1999Q3,GDP,5.4");
  REQUIRE(s.size() == 1);
  CHECK(s[0].id() == "GDP");
  CHECK(s[0].size() == 1);
  CHECK(s[0].start() == Period{1999, 3});
  CHECK(s[0][0] == 5.4);
  CHECK(s[0].unit() == Unit::yoy_percent);
}

TEST_CASE("ingest_csv error paths name the row") {
  auto message = [](std::string_view text) {
    try {
      ingest_csv(text);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  auto gap = message("period,series_id,value\n1999Q3,GDP,1\n2000Q1,GDP,2\n");
  CHECK(gap.find("row 3") != std::string::npos);
  CHECK(gap.find("gap") != std::string::npos);
  CHECK(gap.find("1999Q4") != std::string::npos);

  auto dup = message("period,series_id,value\n1999Q3,GDP,1\n1999Q3,GDP,2\n");
  CHECK(dup.find("row 3") != std::string::npos);
  CHECK(dup.find("duplicate") != std::string::npos);

  auto bad_period = message("period,series_id,value\n1999Q3,GDP,1\n1999-4,GDP,2\n");
  CHECK(bad_period.find("row 3") != std::string::npos);
  CHECK(bad_period.find("malformed period") != std::string::npos);

  auto bad_value = message("period,series_id,value\n1999Q3,GDP,abc\n");
  CHECK(bad_value.find("row 2") != std::string::npos);
  CHECK(bad_value.find("non-numeric") != std::string::npos);

  CHECK(message("") == "no rows");
  CHECK(message("period,series_id,value\n") == "no rows");
}

TEST_CASE("ingest_csv four sectors over the full span") {
  // Fixture generated programmatically: 4 sectors x 1999Q3..2024Q3, rows interleaved.
  const std::vector<std::string> ids = {"National GDP", "Primary Industries", "Goods-Producing Industries",
                                        "Services Industries"};
  std::ostringstream os;
  os << "period,series_id,value\n";
  std::size_t rows = 0;
  for (Period p{1999, 3}; p <= Period{2024, 3}; p = p.successor())
    for (std::size_t k = 0; k < ids.size(); ++k, ++rows) os << p.to_string() << ',' << ids[k] << ',' << (0.25 * rows) << '\n';
  auto series = ingest_csv(os.str());
  REQUIRE(series.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(series[k].id() == ids[k]);
    CHECK(series[k].size() == 101);
    CHECK(series[k].end() == Period{2024, 3});
  }
  CHECK(rows == 404);
}

TEST_CASE("ingest_csv sorts rows and round-trips bit-exactly") {
  auto s = ingest_csv("period,series_id,value\n2000Q2,A,0.1\n2000Q1,A,0.30000000000000004\n", Unit::qoq_percent);
  REQUIRE(s.size() == 1);
  CHECK(s[0].start() == Period{2000, 1});
  CHECK(s[0].unit() == Unit::qoq_percent);
  const auto text = to_csv(s);
  CHECK(text == "period,series_id,value\n2000Q1,A,0.30000000000000004\n2000Q2,A,0.1\n");
  CHECK(ingest_csv(text, Unit::qoq_percent)[0] == s[0]);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 100.0);
  std::vector<double> v(64);
  for (auto& x : v) x = n(rng);
  auto r = make_series(Period{1990, 2}, v);
  CHECK(ingest_csv(to_csv({r}))[0] == r);
}

TEST_CASE("yoy and qoq growth from levels") {
  auto flat = make_series(Period{2000, 1}, {5, 5, 5, 5, 5, 5, 5}, Unit::index_level);
  CHECK(yoy_from_level(flat).values().isZero());
  CHECK(qoq_from_level(flat).values().isZero());

  auto lv = make_series(Period{2000, 1}, {100, 100, 100, 100, 110, 121}, Unit::index_level);
  auto yoy = yoy_from_level(lv);
  CHECK(yoy.start() == Period{2001, 1});
  CHECK(yoy.unit() == Unit::yoy_percent);
  CHECK(yoy[0] == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(qoq_from_level(make_series(Period{2000, 1}, {100, 102}, Unit::index_level))[0] == doctest::Approx(2.0));

  // Per-definition recomputation on random positive levels.
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(50.0, 150.0);
  std::vector<double> levels(40);
  for (auto& x : levels) x = u(rng);
  auto ls = make_series(Period{2001, 2}, levels, Unit::index_level);
  auto y = yoy_from_level(ls);
  auto q = qoq_from_level(ls);
  REQUIRE(y.size() == 36);
  REQUIRE(q.size() == 39);
  for (std::size_t t = 4; t < levels.size(); ++t) CHECK(y[t - 4] == 100.0 * (levels[t] / levels[t - 4] - 1.0));
  for (std::size_t t = 1; t < levels.size(); ++t) CHECK(q[t - 1] == 100.0 * (levels[t] / levels[t - 1] - 1.0));

  // Round trip through qoq reproduces the levels.
  auto back = level_from_qoq(q, levels[0]);
  for (std::size_t t = 1; t < levels.size(); ++t) CHECK(std::abs(back[t - 1] / levels[t] - 1.0) < 1e-9);

  CHECK_THROWS_AS(yoy_from_level(make_series(Period{2000, 1}, {0, 1, 1, 1, 1}, Unit::index_level)), DataError);
  CHECK_THROWS_AS(qoq_from_level(make_series(Period{2000, 1}, {1}, Unit::index_level)), InvalidArgument);
  CHECK_THROWS_AS(yoy_from_level(make_series(Period{2000, 1}, {1, 1, 1, 1, 1})), InvalidArgument);
}

TEST_CASE("slice by table windows") {
  std::vector<double> v(101);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  auto s = make_series(Period{1999, 3}, v);
  auto pre = slice(s, Window(Period{2017, 1}, Period{2019, 4}));
  CHECK(pre.series.size() == 12);
  CHECK_FALSE(pre.truncated);
  CHECK(slice(s, Window(Period{2023, 1}, Period{2024, 3})).series.size() == 7);
  CHECK(slice(s, s.span()).series == s);

  auto partial = slice(s, Window(Period{2024, 1}, Period{2025, 4}));
  CHECK(partial.truncated);
  CHECK(partial.series.size() == 3);
  CHECK_THROWS_AS(slice(s, Window(Period{2030, 1}, Period{2031, 1})), DataError);

  const Window w(Period{2005, 2}, Period{2011, 1});
  auto once = slice(s, w).series;
  CHECK(slice(once, w).series == once);
}
