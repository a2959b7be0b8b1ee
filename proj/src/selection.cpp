#include "sincvae/selection.hpp"

#include "sincvae/csv.hpp"
#include "sincvae/error.hpp"
#include "sincvae/rng.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace sincvae {

void SearchSpace::validate() const {
  require(!axes.empty(), ErrorCode::kConfig, "search space has no axes");
  for (const auto& a : axes) {
    require(!a.name.empty(), ErrorCode::kConfig, "search axis without a name");
    require(!a.values.empty(), ErrorCode::kConfig, "search axis '" + a.name + "' has no values");
    for (const auto& b : axes) {
      require(&a == &b || a.name != b.name, ErrorCode::kConfig, "duplicate search axis '" + a.name + "'");
    }
  }
}

Index SearchSpace::size() const {
  Index n = 1;
  for (const auto& a : axes) n *= static_cast<Index>(a.values.size());
  return n;
}

namespace {

std::vector<std::string> numbers(std::initializer_list<long> values) {
  std::vector<std::string> out;
  for (long v : values) out.push_back(std::to_string(v));
  return out;
}

std::vector<std::string> powers_of_two(int lo, int hi) {
  std::vector<std::string> out;
  for (int n = lo; n <= hi; ++n) out.push_back(std::to_string(1L << n));
  return out;
}

}  // namespace

SearchSpace bonn_search_space() {
  std::vector<std::string> kernels = numbers({3, 5, 7});
  for (long k = 11; k <= 131; k += 10) kernels.push_back(std::to_string(k));
  return {{{"model.kernel_length", kernels},
           {"model.filter_count", powers_of_two(1, 9)},
           {"model.activation", {"relu", "tanh", "identity"}},
           {"model.latent_dim", powers_of_two(3, 7)}}};
}

SearchSpace chbmit_search_space() {
  return {{{"model.kernel_length", numbers({71, 81, 111, 131, 151})},
           {"model.filter_count", powers_of_two(2, 8)},
           {"model.activation", {"relu", "identity"}},
           {"model.latent_dim", powers_of_two(5, 7)}}};
}

const std::string* Configuration::find(const std::string& axis) const {
  for (const auto& [k, v] : values) {
    if (k == axis) return &v;
  }
  return nullptr;
}

const std::string& Configuration::at(const std::string& axis) const {
  const std::string* v = find(axis);
  require(v != nullptr, ErrorCode::kConfig,
          "configuration " + std::to_string(id) + " has no axis '" + axis + "'");
  return *v;
}

std::string Configuration::label() const {
  std::string s;
  for (const auto& [k, v] : values) s += (s.empty() ? "" : ",") + k + "=" + v;
  return s;
}

std::vector<Configuration> grid_expand(const SearchSpace& space) {
  space.validate();
  const Index total = space.size();
  std::vector<Configuration> out;
  out.reserve(static_cast<std::size_t>(total));
  for (Index id = 0; id < total; ++id) {
    Configuration c;
    c.id = id;
    Index rest = id;
    c.values.resize(space.axes.size());
    for (std::size_t a = space.axes.size(); a-- > 0;) {
      const auto& axis = space.axes[a];
      const auto n = static_cast<Index>(axis.values.size());
      c.values[a] = {axis.name, axis.values[static_cast<std::size_t>(rest % n)]};
      rest /= n;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Split> kfold(Index n, Index k, std::uint64_t seed) {
  require(k >= 2, ErrorCode::kInvalidArgument, "k-fold needs k >= 2, got " + std::to_string(k));
  require(k <= n, ErrorCode::kInvalidArgument,
          "k-fold with k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " items");
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Split> splits(static_cast<std::size_t>(k));
  for (Index f = 0; f < k; ++f) {
    const Index lo = f * n / k;
    const Index hi = (f + 1) * n / k;
    auto& s = splits[static_cast<std::size_t>(f)];
    for (Index i = 0; i < n; ++i) {
      (i >= lo && i < hi ? s.test : s.train).push_back(order[static_cast<std::size_t>(i)]);
    }
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
  }
  return splits;
}

std::vector<Split> leave_one_track_out(const std::vector<std::string>& tracks) {
  std::vector<std::string> distinct;
  for (const auto& t : tracks) {
    if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
  }
  require(distinct.size() >= 2, ErrorCode::kInvalidArgument,
          "leave-one-track-out needs at least 2 tracks, got " + std::to_string(distinct.size()));
  std::vector<Split> splits;
  for (const auto& held : distinct) {
    Split s;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      (tracks[i] == held ? s.test : s.train).push_back(static_cast<Index>(i));
    }
    splits.push_back(std::move(s));
  }
  return splits;
}

double TrialResult::mean() const { return stats::mean(fold_mse); }
double TrialResult::std() const { return stats::sample_std(fold_mse); }

std::size_t best_index(const std::vector<TrialResult>& results) {
  require(!results.empty(), ErrorCode::kInvalidArgument, "no trial results");
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const double m = results[i].mean();
    const double b = results[best].mean();
    if (m < b || (m == b && results[i].config_id < results[best].config_id)) best = i;
  }
  return best;
}

std::vector<Index> one_sigma_filter(const std::vector<TrialResult>& results) {
  const TrialResult& best = results[best_index(results)];
  const double bound = best.mean() + best.std();
  std::vector<Index> keep;
  for (const auto& r : results) {
    if (r.config_id == best.config_id || r.mean() <= bound) keep.push_back(r.config_id);
  }
  return keep;
}

ComplexityOrder default_complexity_order() {
  return {{"model.latent_dim", std::nullopt},
          {"model.filter_count", std::nullopt},
          {"model.kernel_length", std::nullopt},
          {"model.activation", "identity"}};
}

ComplexityOrder parse_complexity_order(const std::string& text) {
  ComplexityOrder order;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = trim(std::string_view(text).substr(start, comma - start));
    require(!item.empty(), ErrorCode::kConfig, "empty key in complexity order '" + text + "'");
    if (const auto eq = item.find('='); eq != std::string::npos) {
      order.push_back({trim(item.substr(0, eq)), trim(item.substr(eq + 1))});
    } else {
      order.push_back({item, std::nullopt});
    }
    start = comma + 1;
  }
  return order;
}

namespace {

struct Ranked {
  const TrialResult* result;
  const Configuration* config;
};

double numeric_value(const Configuration& c, const std::string& axis) {
  double v = 0.0;
  require(parse_double(c.at(axis), v), ErrorCode::kConfig,
          "complexity key '" + axis + "' is not numeric for configuration " + std::to_string(c.id));
  return v;
}

}  // namespace

SelectionReport select_configuration(const std::vector<TrialResult>& results,
                                     const std::vector<Configuration>& configs, double alpha,
                                     const ComplexityOrder& order) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kConfig, "alpha must lie in (0, 1)");
  require(!results.empty(), ErrorCode::kInvalidArgument, "select_configuration: no results");
  std::map<Index, Ranked> by_id;
  for (const auto& r : results) {
    require(r.fold_mse.size() >= 2, ErrorCode::kInvalidArgument,
            "configuration " + std::to_string(r.config_id) + " has fewer than 2 folds");
    const auto c = std::find_if(configs.begin(), configs.end(), [&](const auto& x) { return x.id == r.config_id; });
    require(c != configs.end(), ErrorCode::kInvalidArgument,
            "no configuration for result id " + std::to_string(r.config_id));
    require(by_id.emplace(r.config_id, Ranked{&r, &*c}).second, ErrorCode::kInvalidArgument,
            "duplicate result for configuration " + std::to_string(r.config_id));
  }

  SelectionReport rep;
  rep.alpha = alpha;
  for (const auto& r : results) rep.all_ids.push_back(r.config_id);
  rep.best_id = results[best_index(results)].config_id;
  rep.one_sigma = one_sigma_filter(results);
  std::stable_sort(rep.one_sigma.begin(), rep.one_sigma.end(), [&](Index a, Index b) {
    const double ma = by_id.at(a).result->mean();
    const double mb = by_id.at(b).result->mean();
    return ma < mb || (ma == mb && a < b);
  });
  const auto folds = [&](Index id) -> const std::vector<double>& { return by_id.at(id).result->fold_mse; };

  bool all_normal = true;
  for (Index id : rep.one_sigma) {
    NormalityRecord n;
    n.config_id = id;
    try {
      n.result = stats::shapiro_wilk(folds(id));
      n.tested = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInvalidArgument) throw;
    }
    all_normal = all_normal && n.tested && n.result.p_value >= alpha;
    rep.normality.push_back(n);
  }

  if (rep.one_sigma.size() < 2) {
    rep.omnibus_test = "none";
  } else {
    std::vector<std::vector<double>> groups;
    for (Index id : rep.one_sigma) groups.push_back(folds(id));
    rep.omnibus_test = all_normal ? "anova" : "kruskal-wallis";
    try {
      rep.omnibus = all_normal ? stats::anova_oneway(groups) : stats::kruskal_wallis(groups);
      rep.omnibus_significant = rep.omnibus->p_value < alpha;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInvalidArgument) throw;
    }
  }

  rep.pvalue_ids = rep.one_sigma;
  const std::size_t m = rep.pvalue_ids.size();
  rep.pvalues.assign(m, std::vector<double>(m, 1.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double p = stats::mann_whitney_u(folds(rep.pvalue_ids[i]), folds(rep.pvalue_ids[j])).p_value;
      rep.pvalues[i][j] = p;
      rep.pvalues[j][i] = p;
    }
  }

  if (rep.omnibus_significant) {
    const std::size_t best_row = static_cast<std::size_t>(
        std::find(rep.pvalue_ids.begin(), rep.pvalue_ids.end(), rep.best_id) - rep.pvalue_ids.begin());
    for (std::size_t j = 0; j < m; ++j) {
      const Index id = rep.pvalue_ids[j];
      if (id == rep.best_id) {
        rep.pairwise.push_back(id);
        continue;
      }
      const double p = rep.pvalues[best_row][j];
      rep.best_vs_other.emplace_back(id, p);
      if (p >= alpha) rep.pairwise.push_back(id);
    }
  } else {
    rep.pairwise = rep.one_sigma;
  }

  std::vector<Index> candidates = rep.pairwise;
  for (const auto& key : order) {
    const bool present = std::all_of(candidates.begin(), candidates.end(),
                                     [&](Index id) { return by_id.at(id).config->find(key.axis) != nullptr; });
    if (!present) continue;
    std::vector<Index> kept;
    if (key.preferred) {
      for (Index id : candidates) {
        if (by_id.at(id).config->at(key.axis) == *key.preferred) kept.push_back(id);
      }
      if (kept.empty()) kept = candidates;
    } else {
      double lowest = 0.0;
      bool first = true;
      for (Index id : candidates) {
        const double v = numeric_value(*by_id.at(id).config, key.axis);
        if (first || v < lowest) lowest = v;
        first = false;
      }
      for (Index id : candidates) {
        if (numeric_value(*by_id.at(id).config, key.axis) == lowest) kept.push_back(id);
      }
    }
    candidates = kept;
    rep.tie_break.emplace_back(key.preferred ? key.axis + "=" + *key.preferred : key.axis, candidates);
  }
  // Candidates stay in ascending-mean order, so the first is the final tie-break.
  rep.chosen_id = candidates.front();
  if (candidates.size() > 1) rep.tie_break.emplace_back("lowest_mean", std::vector<Index>{rep.chosen_id});
  return rep;
}

std::vector<TrialResult> run_grid(const std::vector<Configuration>& configs, const TrialFn& evaluate,
                                  std::uint64_t base_seed, unsigned workers) {
  std::vector<TrialResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = evaluate(configs[i], derive_seed(base_seed, static_cast<std::uint64_t>(configs[i].id)));
        results[i].config_id = configs[i].id;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = configs.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < std::max(1u, workers); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

void write_results_csv(std::ostream& out, const std::vector<Configuration>& configs,
                       const std::vector<TrialResult>& results) {
  require(!configs.empty(), ErrorCode::kInvalidArgument, "results CSV: no configurations");
  out << "config_id";
  for (const auto& [axis, value] : configs.front().values) out << ',' << axis;
  out << ",fold,mse\n";
  for (const auto& r : results) {
    const auto c = std::find_if(configs.begin(), configs.end(), [&](const auto& x) { return x.id == r.config_id; });
    require(c != configs.end(), ErrorCode::kInvalidArgument,
            "results CSV: unknown configuration " + std::to_string(r.config_id));
    for (std::size_t f = 0; f < r.fold_mse.size(); ++f) {
      out << r.config_id;
      for (const auto& [axis, value] : c->values) out << ',' << value;
      out << ',' << f << ',' << format_double(r.fold_mse[f]) << '\n';
    }
  }
}

ResultsTable read_results_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kFormat, "results CSV is empty");
  const auto header = split_csv_line(line);
  require(header.size() >= 3 && header.front() == "config_id" && header[header.size() - 2] == "fold" &&
              header.back() == "mse",
          ErrorCode::kFormat, "results CSV header must be config_id,<axes>...,fold,mse");
  const std::vector<std::string> axes(header.begin() + 1, header.end() - 2);
  ResultsTable table;
  std::map<Index, std::size_t> slot;
  Index row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = "results CSV row " + std::to_string(row);
    require(f.size() == header.size(), ErrorCode::kFormat, where + ": expected " +
                                                               std::to_string(header.size()) + " fields");
    long long id = 0;
    long long fold = 0;
    double mse = 0.0;
    require(parse_int64(f.front(), id) && parse_int64(f[f.size() - 2], fold) && parse_double(f.back(), mse),
            ErrorCode::kFormat, where + ": bad number");
    auto it = slot.find(id);
    if (it == slot.end()) {
      Configuration c;
      c.id = id;
      for (std::size_t a = 0; a < axes.size(); ++a) c.values.emplace_back(axes[a], f[a + 1]);
      it = slot.emplace(id, table.configs.size()).first;
      table.configs.push_back(std::move(c));
      table.results.push_back({id, {}, 0});
    }
    auto& r = table.results[it->second];
    require(fold == static_cast<long long>(r.fold_mse.size()), ErrorCode::kFormat,
            where + ": folds must be listed in order");
    r.fold_mse.push_back(mse);
  }
  return table;
}

void write_pvalue_csv(std::ostream& out, const SelectionReport& report) {
  out << "config_id";
  for (Index id : report.pvalue_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < report.pvalue_ids.size(); ++i) {
    out << report.pvalue_ids[i];
    for (double p : report.pvalues[i]) out << ',' << format_double(p);
    out << '\n';
  }
}

void to_json(nlohmann::json& j, const SelectionReport& r) {
  j["alpha"] = r.alpha;
  j["stages"] = nlohmann::json::array({
      {{"stage", "grid"}, {"count", r.all_ids.size()}},
      {{"stage", "one_sigma"}, {"count", r.one_sigma.size()}, {"ids", r.one_sigma}},
      {{"stage", "pairwise"}, {"count", r.pairwise.size()}, {"ids", r.pairwise}},
      {{"stage", "chosen"}, {"count", 1}, {"ids", {r.chosen_id}}},
  });
  j["best_id"] = r.best_id;
  nlohmann::json normal = nlohmann::json::array();
  for (const auto& n : r.normality) {
    normal.push_back({{"config_id", n.config_id},
                      {"tested", n.tested},
                      {"w", n.tested ? nlohmann::json(n.result.statistic) : nlohmann::json()},
                      {"p", n.tested ? nlohmann::json(n.result.p_value) : nlohmann::json()}});
  }
  j["shapiro_wilk"] = normal;
  j["omnibus"] = {{"test", r.omnibus_test}, {"significant", r.omnibus_significant}};
  if (r.omnibus) {
    j["omnibus"]["statistic"] = r.omnibus->statistic;
    j["omnibus"]["p"] = r.omnibus->p_value;
  }
  nlohmann::json mw = nlohmann::json::array();
  for (const auto& [id, p] : r.best_vs_other) mw.push_back({{"config_id", id}, {"p", p}});
  j["mann_whitney_vs_best"] = mw;
  nlohmann::json tb = nlohmann::json::array();
  for (const auto& [key, ids] : r.tie_break) tb.push_back({{"key", key}, {"ids", ids}});
  j["tie_break"] = tb;
  j["chosen_id"] = r.chosen_id;
}

}  // namespace sincvae
