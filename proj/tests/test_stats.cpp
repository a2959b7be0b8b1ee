#include "sincvae/rng.hpp"
#include "sincvae/stats.hpp"

#include <doctest.h>

#include <cmath>

using namespace sincvae;
using namespace sincvae::stats;

namespace {

// Reference values below were produced by scipy 1.15 (scipy.stats /
// scipy.special) and frozen here.

struct SwCase {
  const char* name;
  std::vector<double> x;
  double w;
  double p;
};

const std::vector<SwCase>& shapiro_cases() {
  static const std::vector<SwCase> cases = {
      // Shapiro & Wilk (1965), weights of 11 men; published W = 0.79.
      {"weights", {148, 154, 158, 160, 161, 162, 166, 170, 182, 195, 236}, 0.7888146948631716, 0.006703814061898823},
      {"n3", {1.0, 2.0, 4.0}, 0.9642857142857142, 0.6368868450289689},
      {"n5", {2.1, 3.4, 1.9, 5.6, 4.0}, 0.9314289773150016, 0.606147203485118},
      {"linear10", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.9701646110856056, 0.8923673061902978},
      {"n7", {0.672, 0.3, 0.874, 0.662, 0.132, 0.845, 0.945}, 0.8836452409965723, 0.243126702912138},
      {"n12",
       {-0.327, -0.369, -0.25, 1.524, -0.428, -0.304, 0.353, -0.121, -0.197, -1.114, -0.012, -0.444},
       0.8077084810861522, 0.011479271806678203},
      {"n20",
       {10.002, 10.597, 9.452, 8.219, 9.091, 8.017, 10.12, 12.68, 9.016, 8.759,
        10.98, 10.714, 10.211, 8.139, 9.941, 11.391, 7.312, 9.085, 6.198, 7.421},
       0.9921398541085164, 0.9996495419894575},
      {"n50",
       {0.198, 0.348, 0.884, 0.075, 0.06,  1.224, 0.773, 2.196, 0.475, 0.521, 1.181, 0.527, 0.022,
        0.293, 1.014, 0.635, 1.397, 0.008, 0.904, 0.25,  0.356, 3.075, 1.404, 3.795, 1.748, 2.243,
        0.145, 0.303, 0.239, 1.148, 1.223, 0.127, 0.384, 1.068, 0.069, 0.098, 0.871, 1.874, 2.696,
        0.706, 1.306, 0.764, 0.937, 0.145, 2.495, 0.884, 0.875, 0.026, 1.085, 1.062},
       0.8671752434651762, 4.6708675321014944e-05},
  };
  return cases;
}

std::vector<double> draw(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("special functions match reference values") {
  CHECK(gamma_p(0.5, 0.3) == doctest::Approx(0.5614219739190003).epsilon(1e-12));
  CHECK(gamma_p(3, 2.5) == doctest::Approx(0.45618688411667035).epsilon(1e-12));
  CHECK(gamma_p(10, 12) == doctest::Approx(0.7576078383294875).epsilon(1e-12));
  CHECK(gamma_p(0.1, 5) == doctest::Approx(0.9998560610341533).epsilon(1e-12));
  CHECK(beta_i(0.5, 0.5, 0.3) == doctest::Approx(0.36901011956554536).epsilon(1e-12));
  CHECK(beta_i(2, 3, 0.4) == doctest::Approx(0.5248).epsilon(1e-12));
  CHECK(beta_i(10, 1.5, 0.9) == doctest::Approx(0.5401970065018546).epsilon(1e-12));
  CHECK(beta_i(50, 60, 0.45) == doctest::Approx(0.46423529143060444).epsilon(1e-12));
  CHECK(chi2_cdf(0.5, 1) == doctest::Approx(0.5204998778130466).epsilon(1e-12));
  CHECK(chi2_cdf(2.0, 7) == doctest::Approx(0.04015963126989843).epsilon(1e-12));
  CHECK(f_cdf(0.7, 3, 12) == doctest::Approx(0.43009803635477595).epsilon(1e-12));
  CHECK(f_cdf(1.5, 1, 4) == doctest::Approx(0.7121358652733093).epsilon(1e-12));
  CHECK(normal_cdf(-1.5) == doctest::Approx(0.06680720126885807).epsilon(1e-14));
  CHECK(normal_quantile(0.001) == doctest::Approx(-3.090232306167813).epsilon(1e-13));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.9599639845400545).epsilon(1e-13));
  CHECK(normal_quantile(0.3) == doctest::Approx(-0.5244005127080409).epsilon(1e-13));
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-13));
  CHECK(normal_quantile(0.999999) == doctest::Approx(4.753424308817087).epsilon(1e-12));
}

TEST_CASE("distribution CDFs match published quantile tables") {
  // Upper 5% points of chi-square, F, and standard normal tables.
  for (auto [x, df] : std::vector<std::pair<double, double>>{
           {3.841, 1}, {5.991, 2}, {7.815, 3}, {11.070, 5}, {18.307, 10}, {31.410, 20}}) {
    CAPTURE(df);
    CHECK(std::abs(chi2_cdf(x, df) - 0.95) < 1e-4);
    CHECK(std::abs(chi2_sf(x, df) - 0.05) < 1e-4);
  }
  struct F {
    double x, d1, d2;
  };
  for (auto f : std::vector<F>{{4.9646, 1, 10}, {3.4928, 2, 20}, {2.5336, 5, 30},
                               {2.9782, 10, 10}, {2.6060, 4, 40}, {3.4903, 3, 12}}) {
    CAPTURE(f.d1);
    CAPTURE(f.d2);
    CHECK(std::abs(f_cdf(f.x, f.d1, f.d2) - 0.95) < 1e-4);
    CHECK(std::abs(f_sf(f.x, f.d1, f.d2) - 0.05) < 1e-4);
  }
  for (auto [z, p] : std::vector<std::pair<double, double>>{
           {0.0, 0.5}, {1.282, 0.9}, {1.645, 0.95}, {1.960, 0.975}, {2.576, 0.995}, {3.090, 0.999}}) {
    CHECK(std::abs(normal_cdf(z) - p) < 1e-4);
  }
}

TEST_CASE("shapiro_wilk") {
  for (const auto& c : shapiro_cases()) {
    CAPTURE(c.name);
    const TestResult r = shapiro_wilk(c.x);
    CHECK(r.statistic == doctest::Approx(c.w).epsilon(1e-6));
    CHECK(std::abs(r.p_value - c.p) < 1e-3);
  }
  CHECK(shapiro_wilk(shapiro_cases()[0].x).statistic == doctest::Approx(0.79).epsilon(0.01));
  CHECK(shapiro_wilk(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}).statistic > 0.95);
  CHECK_THROWS_AS(shapiro_wilk(std::vector<double>{1, 2}), Error);
  CHECK_THROWS_AS(shapiro_wilk(std::vector<double>(51, 0.0)), Error);
  CHECK_THROWS_AS(shapiro_wilk(std::vector<double>{2, 2, 2, 2}), Error);
}

TEST_CASE("kruskal_wallis") {
  const TestResult hand = kruskal_wallis({{1, 2}, {3, 4}});
  CHECK(hand.statistic == doctest::Approx(2.4).epsilon(1e-14));
  CHECK(hand.p_value == doctest::Approx(0.12133525035848367).epsilon(1e-10));
  // Hollander & Wolfe style example with ties.
  const TestResult r = kruskal_wallis({{2.9, 3.0, 2.5, 2.6, 3.2}, {3.8, 2.7, 4.0, 2.4}, {2.8, 3.4, 3.7, 2.2, 2.0}});
  CHECK(r.statistic == doctest::Approx(0.7714285714285722).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.6799647735788936).epsilon(1e-10));
  const TestResult ties = kruskal_wallis({{1, 2, 2, 3}, {2, 3, 3, 4, 5}, {5, 5, 6}});
  CHECK(ties.statistic == doctest::Approx(7.578223844282238).epsilon(1e-12));
  CHECK(ties.p_value == doctest::Approx(0.02261567741784765).epsilon(1e-10));
  CHECK_THROWS_AS(kruskal_wallis({{1, 2, 3}}), Error);
  CHECK_THROWS_AS(kruskal_wallis({{1, 1}, {1, 1}}), Error);
  CHECK_THROWS_AS(kruskal_wallis({{1, 2}, {}}), Error);

  SUBCASE("rejection rate under the null stays near 5%") {
    // 400 seeded repeats; binomial sd of the rate is ~1.1%, so allow 3 sd.
    Rng rng(2024);
    int rejected = 0;
    const int repeats = 400;
    for (int i = 0; i < repeats; ++i) {
      if (kruskal_wallis({draw(rng, 60, 0, 1), draw(rng, 60, 0, 1)}).p_value <= 0.05) ++rejected;
    }
    const double rate = static_cast<double>(rejected) / repeats;
    CHECK(rate <= 0.05 + 3 * std::sqrt(0.05 * 0.95 / repeats));
  }
}

TEST_CASE("mann_whitney_u") {
  const TestResult hand = mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{3, 4});
  CHECK(hand.statistic == 0.0);
  CHECK(hand.p_value == doctest::Approx(0.2452781168067728).epsilon(1e-10));
  const TestResult r = mann_whitney_u(std::vector<double>{19, 22, 16, 29, 24}, std::vector<double>{20, 11, 17, 12});
  CHECK(r.statistic == 17.0);
  CHECK(r.p_value == doctest::Approx(0.11134688653314041).epsilon(1e-10));
  const TestResult ties = mann_whitney_u(std::vector<double>{1.1, 2.2, 2.2, 3.5, 4.0, 4.0, 4.0},
                                         std::vector<double>{2.2, 3.0, 4.0, 5.1, 6.2});
  CHECK(ties.statistic == 10.5);
  CHECK(ties.p_value == doctest::Approx(0.2790647966180778).epsilon(1e-10));

  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = draw(rng, 1 + rng.below(12), 0, 4);
    auto b = draw(rng, 1 + rng.below(12), 0, 4);
    for (auto& v : b) v = std::round(v);  // force some ties
    const double ua = mann_whitney_u(a, b).statistic;
    const double ub = mann_whitney_u(b, a).statistic;
    CHECK(ua + ub == doctest::Approx(static_cast<double>(a.size() * b.size())));
    const TestResult same = mann_whitney_u(a, a);
    CHECK(same.statistic == doctest::Approx(static_cast<double>(a.size() * a.size()) / 2.0));
  }
  CHECK(mann_whitney_u(std::vector<double>{3, 3}, std::vector<double>{3}).p_value == 1.0);
}

TEST_CASE("anova_oneway") {
  const TestResult hand = anova_oneway({{1, 2, 3}, {2, 3, 4}});
  CHECK(hand.statistic == 1.5);
  CHECK(hand.p_value == doctest::Approx(0.2878641347266907).epsilon(1e-10));
  const TestResult symmetric = anova_oneway({{1, 3, 5}, {2, 3, 4}, {0, 3, 6}});
  CHECK(symmetric.statistic == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(symmetric.p_value == doctest::Approx(1.0));
  // Mussel shell measurements (McDonald et al.), five locations.
  const TestResult r = anova_oneway({
      {0.0571, 0.0813, 0.0831, 0.0976, 0.0817, 0.0859, 0.0735, 0.0659, 0.0923, 0.0836},
      {0.0873, 0.0662, 0.0672, 0.0819, 0.0749, 0.0649, 0.0835, 0.0725},
      {0.0974, 0.1352, 0.0817, 0.1016, 0.0968, 0.1064, 0.105},
      {0.1033, 0.0915, 0.0781, 0.0685, 0.0677, 0.0697, 0.0764, 0.0689},
      {0.0703, 0.1026, 0.0956, 0.0973, 0.1039, 0.1045},
  });
  CHECK(r.statistic == doctest::Approx(7.121019471642447).epsilon(1e-10));
  CHECK(r.p_value == doctest::Approx(0.00028122423145345444).epsilon(1e-8));
  CHECK_THROWS_AS(anova_oneway({{1, 2, 3}}), Error);
  CHECK_THROWS_AS(anova_oneway({{1, 1}, {2, 2}}), Error);
}

TEST_CASE("tests are invariant under shifts, rank tests under monotone maps") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> groups;
    for (int g = 0; g < 3; ++g) groups.push_back(draw(rng, 4 + rng.below(8), 0.5, 3.0));
    const double shift = rng.uniform(-100, 100);
    auto shifted = groups;
    auto mapped = groups;
    for (auto& g : shifted) for (auto& v : g) v += shift;
    for (auto& g : mapped) for (auto& v : g) v = std::exp(v) + v * v * v;

    const auto kw = kruskal_wallis(groups);
    CHECK(kruskal_wallis(shifted).statistic == doctest::Approx(kw.statistic).epsilon(1e-9));
    CHECK(kruskal_wallis(mapped).statistic == doctest::Approx(kw.statistic).epsilon(1e-12));
    const auto mw = mann_whitney_u(groups[0], groups[1]);
    CHECK(mann_whitney_u(shifted[0], shifted[1]).statistic == mw.statistic);
    CHECK(mann_whitney_u(mapped[0], mapped[1]).p_value == doctest::Approx(mw.p_value).epsilon(1e-12));
    const auto an = anova_oneway(groups);
    CHECK(anova_oneway(shifted).statistic == doctest::Approx(an.statistic).epsilon(1e-6));
    const auto sw = shapiro_wilk(groups[0]);
    CHECK(shapiro_wilk(shifted[0]).statistic == doctest::Approx(sw.statistic).epsilon(1e-9));
    for (double p : {kw.p_value, mw.p_value, an.p_value, sw.p_value}) CHECK((p >= 0.0 && p <= 1.0));
  }
}
