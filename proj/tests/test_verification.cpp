#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "thermo/verification.hpp"

#include <cmath>

using namespace thermo;

TEST_CASE("categorical scores reproduce the published tables") {
  // lead / bred vector / correlation contingency entries and the percents
  // they must round to
  struct Row {
    ContingencyTable t;
    int ts, far;
    const char* pod;
  };
  const Row rows[] = {
      {{4472, 744, 13, 170363}, 86, 14, ">99"},
      {{4383, 3203, 102, 121258}, 57, 42, "98"},
      {{3540, 239, 945, 170201}, 75, 6, "79"},
  };
  for (const Row& r : rows) {
    const CategoricalScores s = categorical_scores(r.t);
    REQUIRE(s.ts.has_value());
    REQUIRE(s.far.has_value());
    REQUIRE(s.pod.has_value());
    CHECK(percent_string(*s.ts) == std::to_string(r.ts));
    CHECK(percent_string(*s.far) == std::to_string(r.far));
    CHECK(percent_string(*s.pod, true) == r.pod);
  }
  // spot-check fractions to three decimals on the first table
  const CategoricalScores lead = categorical_scores(rows[0].t);
  CHECK(*lead.ts == doctest::Approx(0.855).epsilon(1e-3));
  CHECK(*lead.far == doctest::Approx(0.143).epsilon(1e-2));
  CHECK(*lead.pod == doctest::Approx(0.997).epsilon(1e-3));
}

TEST_CASE("perfect predictor and degenerate denominators") {
  const CategoricalScores s = categorical_scores({10, 0, 0, 90});
  CHECK(*s.ts == 1.0);
  CHECK(*s.far == 0.0);
  CHECK(*s.pod == 1.0);
  CHECK(percent_string(*s.pod, true) == "100");

  // no forecasts, no events: every score undefined
  const CategoricalScores none = categorical_scores({0, 0, 0, 50});
  CHECK(!none.ts.has_value());
  CHECK(!none.far.has_value());
  CHECK(!none.pod.has_value());
}

TEST_CASE("ts never exceeds pod") {
  for (long a : {1L, 5L, 50L})
    for (long b : {0L, 3L, 40L})
      for (long c : {0L, 2L, 30L}) {
        const CategoricalScores s = categorical_scores({a, b, c, 10});
        CHECK(*s.ts <= *s.pod + 1e-15);
      }
}

TEST_CASE("rps hand values") {
  ResidencyForecast point{0, 1, 0, 0, 0, 0};
  CHECK(rps(point, 2) == 0.0);

  ResidencyForecast uniform;
  uniform.fill(1.0 / 6.0);
  CHECK(rps(uniform, 1) == doctest::Approx(55.0 / 36.0).epsilon(1e-12));

  ResidencyForecast half{0.5, 0.5, 0, 0, 0, 0};
  CHECK(rps(half, 1) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("rps is invariant under trailing zero-probability categories") {
  // categories above the observed one with zero mass contribute nothing:
  // both CDFs are already 1 there
  ResidencyForecast f{0.3, 0.7, 0, 0, 0, 0};
  const double base = rps(f, 2);
  ResidencyForecast g{0.3, 0.7, 0.0, 0.0, 0.0, 0.0};
  CHECK(rps(g, 2) == base);
  double manual = 0.0;
  double cdf = 0.0;
  for (int k = 1; k <= 2; ++k) {
    cdf += f[k - 1];
    const double o = (k >= 2) ? 1.0 : 0.0;
    manual += (cdf - o) * (cdf - o);
  }
  CHECK(base == doctest::Approx(manual).epsilon(1e-15));
}

TEST_CASE("rps rejects malformed forecasts") {
  ResidencyForecast bad{0.5, 0.2, 0, 0, 0, 0};
  CHECK_THROWS_AS(rps(bad, 1), std::invalid_argument);
  ResidencyForecast ok{1, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(rps(ok, 0), std::invalid_argument);
  CHECK_THROWS_AS(rps(ok, 7), std::invalid_argument);
}

TEST_CASE("rps skill identities") {
  const std::vector<double> clim{0.5, 0.4, 0.8, 0.2, 0.6};
  CHECK(*rps_skill(clim, clim, Aggregate::kMean) == doctest::Approx(0.0));
  CHECK(*rps_skill(clim, clim, Aggregate::kMedian) == doctest::Approx(0.0));

  const std::vector<double> perfect(5, 0.0);
  CHECK(*rps_skill(perfect, clim, Aggregate::kMean) == doctest::Approx(1.0));

  // five-event fixture, aggregates computed by hand:
  // mean(f) = 0.3, mean(c) = 0.5 -> 0.4; medians 0.25 and 0.5 -> 0.5
  const std::vector<double> f{0.1, 0.2, 0.25, 0.4, 0.55};
  const std::vector<double> c{0.3, 0.4, 0.5, 0.6, 0.7};
  CHECK(*rps_skill(f, c, Aggregate::kMean) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(*rps_skill(f, c, Aggregate::kMedian) ==
        doctest::Approx(0.5).epsilon(1e-12));

  const std::vector<double> zeros(5, 0.0);
  CHECK(!rps_skill(f, zeros, Aggregate::kMean).has_value());
}

TEST_CASE("scaled rmse") {
  CHECK(scaled_rmse({0.0, 0.0, 0.0}, 2.0) == 0.0);
  CHECK(scaled_rmse({5.0, -5.0}, 5.0) == doctest::Approx(1.0));
  CHECK(scaled_rmse({3.0, 4.0}, 5.0) ==
        doctest::Approx(std::sqrt(12.5) / 5.0).epsilon(1e-15));
  CHECK_THROWS_AS(scaled_rmse({1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("percent rendering conventions") {
  CHECK(percent_string(0.125) == "13");  // half rounds away from zero
  CHECK(percent_string(0.855) == "86");
  CHECK(percent_string(0.9951, true) == ">99");
  CHECK(percent_string(0.9951, false) == "100");
  CHECK(percent_string(0.994, true) == "99");
  CHECK(percent_string(1.0, true) == "100");
  CHECK(percent_string(-0.125) == "-13");
}

TEST_CASE("skill table renders one row per test") {
  SkillReport rep;
  rep.table = {4472, 744, 13, 170363};
  rep.categorical = categorical_scores(rep.table);
  rep.rps_avg = 0.71;
  rep.rps_med = 0.87;
  const std::string text = render_skill_table({{"lead", rep}});
  CHECK(text.find("lead") != std::string::npos);
  CHECK(text.find(">99") != std::string::npos);
  CHECK(text.find("86") != std::string::npos);
  CHECK(text.find("71") != std::string::npos);
}
