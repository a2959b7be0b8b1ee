#include "sincvae/rng.hpp"
#include "sincvae/selection.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace sincvae;

namespace {

std::vector<Configuration> configs_for(const std::vector<std::vector<std::string>>& rows) {
  std::vector<Configuration> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Configuration c;
    c.id = static_cast<Index>(i);
    const char* axes[] = {"model.kernel_length", "model.filter_count", "model.activation", "model.latent_dim"};
    for (std::size_t a = 0; a < 4; ++a) c.values.emplace_back(axes[a], rows[i][a]);
    out.push_back(c);
  }
  return out;
}

std::vector<double> noisy(Rng& rng, double centre, double spread, int n = 10) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(centre + spread * rng.normal());
  return v;
}

bool subset(const std::vector<Index>& inner, const std::vector<Index>& outer) {
  return std::all_of(inner.begin(), inner.end(),
                     [&](Index id) { return std::find(outer.begin(), outer.end(), id) != outer.end(); });
}

void check_nested(const SelectionReport& r) {
  CHECK(subset(r.one_sigma, r.all_ids));
  CHECK(subset(r.pairwise, r.one_sigma));
  for (const auto& [key, ids] : r.tie_break) CHECK(subset(ids, r.pairwise));
  CHECK(subset({r.chosen_id}, r.pairwise));
  CHECK(subset({r.best_id}, r.one_sigma));
}

}  // namespace

TEST_CASE("grid_expand counts and order") {
  CHECK(grid_expand(chbmit_search_space()).size() == 210);
  CHECK(grid_expand(bonn_search_space()).size() == 2160);
  CHECK(bonn_search_space().axes[0].values.size() == 16);

  SearchSpace single{{{"a", {"1"}}, {"b", {"x"}}}};
  const auto one = grid_expand(single);
  REQUIRE(one.size() == 1);
  CHECK(one[0].label() == "a=1,b=x");

  SearchSpace two{{{"a", {"1", "2"}}, {"b", {"x", "y", "z"}}}};
  const auto g = grid_expand(two);
  REQUIRE(g.size() == 6);
  CHECK(g[0].label() == "a=1,b=x");
  CHECK(g[2].label() == "a=1,b=z");
  CHECK(g[3].label() == "a=2,b=x");
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i].id == static_cast<Index>(i));

  CHECK_THROWS_AS(grid_expand(SearchSpace{{{"a", {}}}}), Error);
  CHECK_THROWS_AS(grid_expand(SearchSpace{{{"a", {"1"}}, {"a", {"2"}}}}), Error);
}

TEST_CASE("kfold partitions the dataset") {
  const auto folds = kfold(100, 10, 7);
  REQUIRE(folds.size() == 10);
  std::set<Index> seen;
  for (const auto& f : folds) {
    CHECK(f.test.size() == 10);
    CHECK(f.train.size() == 90);
    for (Index i : f.test) CHECK(seen.insert(i).second);
    for (Index i : f.test) CHECK(std::find(f.train.begin(), f.train.end(), i) == f.train.end());
  }
  CHECK(seen.size() == 100);

  for (const auto& f : kfold(23, 5, 1)) CHECK((f.test.size() == 4 || f.test.size() == 5));
  CHECK(kfold(100, 10, 7)[3].test == folds[3].test);
  CHECK(kfold(100, 10, 8)[3].test != folds[3].test);
  CHECK_THROWS_AS(kfold(5, 6, 0), Error);
  CHECK_THROWS_AS(kfold(5, 1, 0), Error);
}

TEST_CASE("leave_one_track_out") {
  const std::vector<std::string> tracks = {"t1", "t1", "t2", "t3", "t3", "t4", "t5"};
  const auto splits = leave_one_track_out(tracks);
  REQUIRE(splits.size() == 5);
  CHECK(splits[0].test == std::vector<Index>{0, 1});
  for (const auto& s : splits) {
    CHECK(s.test.size() + s.train.size() == tracks.size());
    std::set<std::string> train_tracks;
    for (Index i : s.train) train_tracks.insert(tracks[static_cast<std::size_t>(i)]);
    CHECK(train_tracks.size() == 4);
  }
  CHECK_THROWS_AS(leave_one_track_out({"a", "a"}), Error);
}

TEST_CASE("one_sigma_filter") {
  // best: mean 1.0, sample std 0.2
  const std::vector<TrialResult> results = {
      {0, {0.8, 1.0, 1.2}, 0}, {1, {1.15, 1.15}, 0}, {2, {1.25, 1.25}, 0}, {3, {1.2, 1.2}, 0}};
  CHECK(results[0].std() == doctest::Approx(0.2));
  CHECK(one_sigma_filter(results) == std::vector<Index>{0, 1, 3});
  CHECK(one_sigma_filter({{4, {2.0, 3.0}, 0}}) == std::vector<Index>{4});

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TrialResult> rs;
    for (Index id = 0; id < 8; ++id) rs.push_back({id, noisy(rng, rng.uniform(), 0.1, 4), 0});
    const auto keep = one_sigma_filter(rs);
    CHECK(std::find(keep.begin(), keep.end(), rs[best_index(rs)].config_id) != keep.end());
  }
}

TEST_CASE("complexity order parsing") {
  const auto o = parse_complexity_order("model.latent_dim, model.activation=identity");
  REQUIRE(o.size() == 2);
  CHECK(o[0].axis == "model.latent_dim");
  CHECK(!o[0].preferred);
  CHECK(o[1].axis == "model.activation");
  CHECK(*o[1].preferred == "identity");
  CHECK_THROWS_AS(parse_complexity_order("a,,b"), Error);
  CHECK(default_complexity_order().size() == 4);
}

TEST_CASE("select_configuration tie-break on kernel") {
  const auto configs = configs_for({{"71", "16", "identity", "32"}, {"41", "16", "identity", "32"}});
  const std::vector<TrialResult> results = {{0, {1.0, 1.1, 0.9, 1.05}, 0}, {1, {1.02, 1.12, 0.92, 1.0}, 0}};
  const auto r = select_configuration(results, configs);
  CHECK(r.best_id == 0);
  CHECK(r.one_sigma.size() == 2);
  CHECK(!r.omnibus_significant);
  CHECK(r.pairwise.size() == 2);
  CHECK(r.chosen_id == 1);
  CHECK(configs[1].at("model.kernel_length") == "41");
  check_nested(r);
}

TEST_CASE("select_configuration drops significantly worse configurations") {
  // 0: best but complex, 1: close and simpler, 2..4: worse but within one sigma, 5: far off
  const auto configs = configs_for({{"41", "64", "relu", "128"},
                                    {"41", "16", "identity", "32"},
                                    {"11", "2", "identity", "8"},
                                    {"11", "2", "relu", "8"},
                                    {"21", "4", "tanh", "16"},
                                    {"131", "512", "tanh", "128"}});
  const std::vector<double> best = {0.6, 0.7, 0.8, 0.9, 1.0, 1.0, 1.1, 1.2, 1.3, 1.4};
  std::vector<TrialResult> results = {{0, best, 0}, {1, best, 0}, {2, {}, 0}, {3, {}, 0}, {4, {}, 0}, {5, {}, 0}};
  for (double& v : results[1].fold_mse) v += 0.01;
  results[2].fold_mse = {1.22, 1.22, 1.22, 1.22, 1.22, 1.22, 1.22, 1.22, 1.22, 1.25};
  for (int f = 0; f < 10; ++f) {
    results[3].fold_mse.push_back(1.22 + 0.002 * f);
    results[4].fold_mse.push_back(1.24 - 0.001 * f);
    results[5].fold_mse.push_back(3.0 + 0.01 * f);
  }
  const auto r = select_configuration(results, configs);
  CHECK(r.best_id == 0);
  CHECK(std::find(r.one_sigma.begin(), r.one_sigma.end(), 5) == r.one_sigma.end());
  CHECK(r.omnibus_test == "kruskal-wallis");
  REQUIRE(r.omnibus);
  CHECK(r.omnibus_significant);
  for (Index dropped : {2, 3, 4}) {
    CHECK(std::find(r.pairwise.begin(), r.pairwise.end(), dropped) == r.pairwise.end());
  }
  CHECK(r.chosen_id == 1);
  CHECK(r.pvalue_ids.size() == r.one_sigma.size());
  for (std::size_t i = 0; i < r.pvalues.size(); ++i) {
    CHECK(r.pvalues[i][i] == 1.0);
    for (std::size_t j = 0; j < r.pvalues.size(); ++j) {
      CHECK(r.pvalues[i][j] == r.pvalues[j][i]);
      CHECK(r.pvalues[i][j] >= 0.0);
      CHECK(r.pvalues[i][j] <= 1.0);
    }
  }
  check_nested(r);

  const auto again = select_configuration(results, configs);
  CHECK(again.chosen_id == r.chosen_id);
  CHECK(again.pvalues == r.pvalues);
  CHECK(again.tie_break == r.tie_break);
}

TEST_CASE("select_configuration uses ANOVA when every configuration is normal") {
  const auto configs = configs_for({{"41", "16", "identity", "32"}, {"41", "8", "identity", "32"}});
  const std::vector<double> base = {-1.5, -1.0, -0.6, -0.3, 0.0, 0.0, 0.3, 0.6, 1.0, 1.5};
  std::vector<TrialResult> results(2);
  for (Index id = 0; id < 2; ++id) {
    results[id].config_id = id;
    for (double b : base) results[id].fold_mse.push_back(10.0 + 0.5 * id + b);
  }
  const auto r = select_configuration(results, configs);
  CHECK(r.omnibus_test == "anova");
  for (const auto& n : r.normality) CHECK(n.tested);
  CHECK(!r.omnibus_significant);
  CHECK(r.chosen_id == 1);
}

TEST_CASE("select_configuration on a single configuration") {
  const auto configs = configs_for({{"41", "16", "identity", "32"}});
  const auto r = select_configuration({{0, {1.0, 2.0}, 0}}, configs);
  CHECK(r.omnibus_test == "none");
  CHECK(r.chosen_id == 0);
  CHECK(!r.normality.front().tested);
  nlohmann::json j = r;
  CHECK(j["chosen_id"] == 0);
  CHECK(j["stages"].size() == 4);
}

TEST_CASE("select_configuration random grids keep nested stages") {
  const auto configs = grid_expand(chbmit_search_space());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<TrialResult> results;
    for (const auto& c : configs) results.push_back({c.id, noisy(rng, 1.0 + 0.3 * rng.uniform(), 0.1, 5), 0});
    const auto r = select_configuration(results, configs);
    check_nested(r);
    CHECK(r.all_ids.size() == 210);
  }
}

TEST_CASE("select_configuration input errors") {
  const auto configs = configs_for({{"41", "16", "identity", "32"}});
  CHECK_THROWS_AS(select_configuration({{0, {1.0}, 0}}, configs), Error);
  CHECK_THROWS_AS(select_configuration({{9, {1.0, 2.0}, 0}}, configs), Error);
  CHECK_THROWS_AS(select_configuration({}, configs), Error);
  CHECK_THROWS_AS(select_configuration({{0, {1.0, 2.0}, 0}}, configs, 1.5), Error);
}

TEST_CASE("run_grid parallel matches serial") {
  const auto configs = grid_expand(SearchSpace{{{"a", {"1", "2", "3"}}, {"b", {"x", "y", "z", "w"}}}});
  const TrialFn eval = [](const Configuration& c, std::uint64_t seed) {
    Rng rng(seed);
    TrialResult r;
    r.parameter_count = c.id * 3;
    for (int f = 0; f < 4; ++f) r.fold_mse.push_back(rng.uniform());
    return r;
  };
  const auto serial = run_grid(configs, eval, 99, 1);
  const auto parallel = run_grid(configs, eval, 99, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].config_id == configs[i].id);
    CHECK(serial[i].fold_mse == parallel[i].fold_mse);
    CHECK(serial[i].parameter_count == parallel[i].parameter_count);
  }
  CHECK(run_grid(configs, eval, 100, 1)[0].fold_mse != serial[0].fold_mse);

  const TrialFn broken = [](const Configuration& c, std::uint64_t) -> TrialResult {
    if (c.id == 5) fail(ErrorCode::kState, "boom");
    return {c.id, {1.0, 2.0}, 0};
  };
  CHECK_THROWS_AS(run_grid(configs, broken, 0, 3), Error);
}

TEST_CASE("results CSV round trip") {
  const auto configs = grid_expand(SearchSpace{{{"model.latent_dim", {"8", "16"}}, {"model.activation", {"relu"}}}});
  const std::vector<TrialResult> results = {{0, {0.1, 0.25, 1e-7}, 0}, {1, {0.125, 0.3, 0.01}, 0}};
  std::stringstream ss;
  write_results_csv(ss, configs, results);
  CHECK(ss.str().rfind("config_id,model.latent_dim,model.activation,fold,mse\n0,8,relu,0,0.1\n", 0) == 0);
  const auto table = read_results_csv(ss);
  REQUIRE(table.results.size() == 2);
  CHECK(table.results[1].fold_mse == results[1].fold_mse);
  CHECK(table.configs[1].label() == configs[1].label());

  std::istringstream bad("config_id,a,fold,mse\n0,1,1,0.5\n");
  CHECK_THROWS_AS(read_results_csv(bad), Error);
  std::istringstream bad_header("id,a,mse\n");
  CHECK_THROWS_AS(read_results_csv(bad_header), Error);

  SelectionReport r = select_configuration(results, configs);
  std::ostringstream pv;
  write_pvalue_csv(pv, r);
  CHECK(pv.str().rfind("config_id,0,1\n0,1,", 0) == 0);
}
