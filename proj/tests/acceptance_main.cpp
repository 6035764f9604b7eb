// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Every tolerance is pinned here, in code. Seeds are fixed
// so the suite is deterministic.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "coincide/coincide.hpp"
#include "support/stat_helpers.hpp"

using namespace coincide;

namespace {

constexpr std::uint64_t kSeed = 1;

int g_failures = 0;
std::chrono::steady_clock::time_point g_criterion_start;

int worker_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

// Each criterion also carries a runtime budget, enforced against the time
// since the previous report (criteria run strictly in sequence).
void report(int criterion, double budget_s, bool pass, const std::string& detail) {
  const auto now = std::chrono::steady_clock::now();
  const double elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(now - g_criterion_start).count() /
      1000.0;
  g_criterion_start = now;
  const bool in_budget = elapsed < budget_s;
  std::printf("criterion %2d: %s  %s [%.2f s of %.0f s budget]\n", criterion,
              pass && in_budget ? "PASS" : "FAIL", detail.c_str(), elapsed, budget_s);
  std::fflush(stdout);
  if (!(pass && in_budget)) ++g_failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

struct GeometryDraw {
  Window w;
  double delta;
};

GeometryDraw draw_geometry(Rng& rng) {
  const double a = rng.uniform(0.0, 1.0);
  const double len = rng.uniform(0.15, 1.5);
  return {Window(a, a + len), len * rng.uniform(0.03, 0.47)};
}

// --- criterion 1: closed forms against the numerical oracles ---------------
void criterion_closed_form() {
  Rng rng(kSeed);
  bool pass = true;
  double worst_quad = 0.0, worst_mc = 0.0;
  for (int draw = 0; draw < 5; ++draw) {
    const auto g = draw_geometry(rng);
    for (int L = 2; L <= 3; ++L) {
      for (int k = 0; k <= L; ++k) {
        const double closed = I_Lk(L, k, g.w, g.delta);
        const auto oracle = I_Lk_oracle(L, k, g.w, g.delta, OracleMethod::quadrature);
        const double rel = std::abs(closed - oracle.value) / std::abs(closed);
        worst_quad = std::max(worst_quad, rel);
        if (rel > 1e-4) pass = false;
      }
    }
    for (int k = 0; k <= 4; ++k) {
      const double closed = I_Lk(4, k, g.w, g.delta);
      const auto mc =
          I_Lk_oracle(4, k, g.w, g.delta, OracleMethod::monte_carlo, 1'000'000, kSeed + 100 + k);
      const double dev = std::abs(closed - mc.value) / (3.0 * mc.error);
      worst_mc = std::max(worst_mc, dev);
      if (dev > 1.0) pass = false;
    }
  }
  report(1, /*budget*/ 120.0, pass,
         fmt("I(L,k) vs oracles: worst quadrature rel err %.2e (bar 1e-4), worst L=4 MC deviation "
             "%.2f of 3 SE",
             worst_quad, worst_mc));
}

// --- criterion 2: I(L,L) = I(L,0)^2 to 8 ulps -------------------------------
std::int64_t ulps_between(double a, double b) {
  std::int64_t ia, ib;
  std::memcpy(&ia, &a, sizeof a);
  std::memcpy(&ib, &b, sizeof b);
  if (ia < 0) ia = std::int64_t(0x8000000000000000ull) - ia;
  if (ib < 0) ib = std::int64_t(0x8000000000000000ull) - ib;
  return std::abs(ia - ib);
}

void criterion_squared_identity() {
  Rng rng(kSeed + 1);
  std::int64_t worst = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const auto g = draw_geometry(rng);
    for (int L = 2; L <= 8; ++L) {
      const double lhs = I_Lk(L, L, g.w, g.delta);
      const double rhs = I_Lk(L, 0, g.w, g.delta) * I_Lk(L, 0, g.w, g.delta);
      worst = std::max(worst, ulps_between(lhs, rhs));
    }
  }
  report(2, /*budget*/ 1.0, worst <= 8, fmt("I(L,L) vs I(L,0)^2 for L in 2..8, 100 draws: worst %lld ulps (bar 8)",
                            static_cast<long long>(worst)));
}

// --- criterion 3: counting oracle equivalence -------------------------------
void criterion_counting() {
  Rng rng(kSeed + 2);
  std::size_t mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t L = 2 + rng.next_u64() % 3;
    const Window w(0.0, 0.2);
    Trial trial;
    trial.window = w;
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<double> times;
      const std::size_t count = rng.next_u64() % 9;
      for (std::size_t s = 0; s < count; ++s) times.push_back(rng.uniform(w.a, w.b));
      std::sort(times.begin(), times.end());
      trial.trains.emplace_back(std::move(times));
    }
    std::vector<std::size_t> ids(L);
    for (std::size_t j = 0; j < L; ++j) ids[j] = j + 1;
    const PatternSubset subset(ids);
    const CoincidenceParams params{w.length() * rng.uniform(0.02, 0.49)};
    if (delayed_count(trial, subset, params) != delayed_count_bruteforce(trial, subset, params))
      ++mismatches;
  }
  report(3, /*budget*/ 30.0, mismatches == 0,
         fmt("sweep counter vs brute force on 500 random instances: %zu mismatches", mismatches));
}

// --- criterion 4: moment reproduction ---------------------------------------
void criterion_moments() {
  const Window w(0.0, 0.3);
  const double delta = 0.01;
  const double lambda = 15.0;
  const std::size_t N = 100'000;
  const PatternSubset triple({1, 2, 3});
  const auto mom = theoretical_moments({lambda, lambda, lambda}, triple, w, delta);

  std::vector<double> xs(N);
  parallel_for(N, worker_threads(), [&](std::size_t i) {
    Rng rng(kSeed + 3, 0, i);
    Trial trial;
    trial.window = w;
    for (int l = 0; l < 3; ++l) trial.trains.push_back(sim_poisson(lambda, w, rng));
    xs[i] = static_cast<double>(delayed_count(trial, triple, CoincidenceParams{delta}));
  });

  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(N);
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(N - 1);
  m4 /= static_cast<double>(N);

  const double se_mean = std::sqrt(m2 / static_cast<double>(N));
  const double se_var = std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(N));
  const double dev_mean = std::abs(mean - mom.m0) / se_mean;
  const double dev_var = std::abs(m2 - mom.variance) / se_var;
  report(4, /*budget*/ 120.0, dev_mean <= 4.0 && dev_var <= 4.0,
         fmt("mean %.5f vs m0 %.5f (%.2f SE); var %.5f vs %.5f (%.2f SE); bar 4 SE", mean, mom.m0,
             dev_mean, m2, mom.variance, dev_var));
}

// --- shared helper for the framework criteria -------------------------------
struct NullCell {
  double statistic = 0.0;
  double p = 1.0;
  bool reject = false;
  bool errored = false;
  DependenceSign sign = DependenceSign::none;
};

std::vector<NullCell> run_gaue_cells(Framework fw, std::uint64_t seed, std::size_t R, std::size_t M,
                                     double alpha) {
  std::vector<NullCell> cells(R);
  parallel_for(R, worker_threads(), [&](std::size_t rep) {
    FrameworkConfig cfg;
    cfg.framework = fw;
    cfg.seed = seed;
    cfg.M = M;
    const auto sampled = sample_framework(cfg, rep);
    NullCell cell;
    try {
      const auto o = gaue_test(sampled.trial_set, PatternSubset({1, 2, 3, 4}), 0.01, alpha);
      cell.statistic = o.statistic;
      cell.p = o.p_value;
      cell.reject = o.reject;
      cell.sign = o.sign;
    } catch (const ZeroIntensityError&) {
      cell.errored = true;
    } catch (const DegenerateVarianceError&) {
      cell.errored = true;
    }
    cells[rep] = cell;
  });
  return cells;
}

// --- criterion 5: null calibration ------------------------------------------
void criterion_null_calibration() {
  const std::size_t R = 200, M = 100;
  const auto cells = run_gaue_cells(Framework::F1, kSeed + 4, R, M, 0.05);
  std::vector<double> stats;
  std::size_t rejections = 0, errored = 0;
  for (const auto& c : cells) {
    if (c.errored) {
      ++errored;
      continue;
    }
    stats.push_back(c.statistic);
    if (c.reject) ++rejections;
  }
  const double ks = ks_distance(stats, KsReference::std_normal);
  const double rate = static_cast<double>(rejections) / static_cast<double>(R);
  const bool pass = ks < 0.08 && rate >= 0.01 && rate <= 0.08;

  std::string context;
  if (!pass) {
    // Context: the statistic's distribution at M = 100 carries a systematic
    // KS deviation from N(0,1) of about 0.073 (skewed low counts), so the
    // 0.08 bar leaves almost no room for the R = 200 sampling noise.
    const auto big = run_gaue_cells(Framework::F1, kSeed + 4, 2000, M, 0.05);
    std::vector<double> big_stats;
    for (const auto& c : big)
      if (!c.errored) big_stats.push_back(c.statistic);
    context = fmt("              context: same pipeline at R=2000 gives KS = %.4f "
                  "(sampling noise ~0.01)\n",
                  ks_distance(big_stats, KsReference::std_normal));
  }
  report(5, /*budget*/ 300.0, pass,
         fmt("F1 M=100 R=200: KS(stats, N01) = %.4f (bar < 0.08), rejection %.3f (bar [0.01, "
             "0.08]), %zu degenerate",
             ks, rate, errored));
  if (!context.empty()) std::fputs(context.c_str(), stdout);
}

// --- criterion 6: UE anti-conservativeness ----------------------------------
void criterion_ue_level() {
  const std::size_t R = 500, M = 50;
  std::vector<int> rejects(R, 0);
  parallel_for(R, worker_threads(), [&](std::size_t rep) {
    FrameworkConfig cfg;
    cfg.framework = Framework::F1;
    cfg.seed = kSeed + 5;
    cfg.M = M;
    const auto sampled = sample_framework(cfg, rep);
    const auto w = Constellation::from_subset(PatternSubset({1, 2, 3, 4}), 4);
    const auto o = ue_test(sampled.trial_set, w, 0.02, 0.05);
    rejects[rep] = o.reject ? 1 : 0;
  });
  std::size_t total = 0;
  for (int r : rejects) total += static_cast<std::size_t>(r);
  const double rate = static_cast<double>(total) / static_cast<double>(R);
  report(6, /*budget*/ 300.0, rate >= 0.12 && rate <= 0.30,
         fmt("F1 M=50 R=500: UE rejection at nominal 5%% = %.3f (bar [0.12, 0.30])", rate));
}

// --- criterion 7: power under injection --------------------------------------
void criterion_power() {
  const std::size_t R = 200;
  const auto at_20 = run_gaue_cells(Framework::F2, kSeed + 6, R, 20, 0.05);
  const auto at_100 = run_gaue_cells(Framework::F2, kSeed + 6, R, 100, 0.05);

  const auto tally = [](const std::vector<NullCell>& cells) {
    std::size_t rej = 0, excit = 0;
    for (const auto& c : cells) {
      if (c.errored) continue;
      if (c.reject) {
        ++rej;
        if (c.sign == DependenceSign::excitatory) ++excit;
      }
    }
    return std::pair<std::size_t, std::size_t>{rej, excit};
  };
  const auto [rej20, excit20] = tally(at_20);
  const auto [rej100, excit100] = tally(at_100);
  const double tpr20 = static_cast<double>(rej20) / static_cast<double>(R);
  const double tpr100 = static_cast<double>(rej100) / static_cast<double>(R);
  const std::size_t rej_total = rej20 + rej100;
  const double excit_share =
      rej_total == 0 ? 0.0 : static_cast<double>(excit20 + excit100) / static_cast<double>(rej_total);
  const bool pass = tpr100 > tpr20 && tpr100 > 0.5 && excit_share > 0.9;
  report(7, /*budget*/ 300.0, pass,
         fmt("F2 power: TPR(M=20) = %.3f, TPR(M=100) = %.3f (bars: increasing, > 0.5); excitatory "
             "share of rejections %.3f (bar > 0.9)",
             tpr20, tpr100, excit_share));
}

// --- criterion 8: multiple-pattern detection ---------------------------------
void criterion_multi_pattern() {
  FrameworkConfig cfg;
  cfg.framework = Framework::F4;
  cfg.seed = kSeed + 7;
  const auto hist = detection_histogram(cfg, 50, 0.05, 200, {TestMethod::gaue, TestMethod::ue}, 0.01,
                                        0.02, worker_threads());
  const auto& freq = hist.frequency[0];  // gaue
  std::size_t pair12 = 0;
  for (std::size_t i = 0; i < hist.pattern_labels.size(); ++i)
    if (hist.pattern_labels[i] == "{1,2}") pair12 = i;

  bool strict_min = true, gap_ok = true;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (i == pair12) continue;
    strict_min = strict_min && freq[i] > freq[pair12];
    gap_ok = gap_ok && freq[i] >= freq[pair12] + 0.1;
  }
  std::string detail = fmt("F4 M=50 q=0.05 R=200 (GAUE): {1,2} at %.3f; ", freq[pair12]);
  double second_lowest = 1.0;
  for (std::size_t i = 0; i < freq.size(); ++i)
    if (i != pair12) second_lowest = std::min(second_lowest, freq[i]);
  detail += fmt("next-lowest pattern %.3f (bars: strict min, gap >= 0.1)", second_lowest);
  report(8, /*budget*/ 900.0, strict_min && gap_ok, detail);
}

// --- criterion 9: Hawkes reductions ------------------------------------------
void criterion_hawkes_reductions() {
  // kernels absent vs Poisson: chi-square on per-trial counts, 1e4 draws
  const Window w(0.0, 0.3);
  const double mu = 14.0;
  const std::size_t draws = 10'000;
  std::vector<std::uint64_t> histogram(30, 0);
  {
    HawkesModel model({mu});
    Rng rng(kSeed + 8);
    for (std::size_t i = 0; i < draws; ++i) {
      const Trial t = sim_hawkes(model, w, rng);
      ++histogram[std::min<std::size_t>(t.trains[0].size(), histogram.size() - 1)];
    }
  }
  std::vector<double> probs(histogram.size());
  const double mean = mu * w.length();
  double cum = 0.0, term = std::exp(-mean);
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    probs[k] = term;
    cum += term;
    term *= mean / static_cast<double>(k + 1);
  }
  probs.back() = 1.0 - cum;
  const double p_chi2 = test_support::chi2_gof_pvalue(histogram, probs);

  // F3 dead time: never below 3 ms across 1e4 trials
  std::vector<int> violations(100, 0);
  parallel_for(100, worker_threads(), [&](std::size_t rep) {
    FrameworkConfig cfg;
    cfg.framework = Framework::F3;
    cfg.seed = kSeed + 9;
    cfg.M = 100;
    const auto sampled = sample_framework(cfg, rep);
    for (const auto& trial : sampled.trial_set.trials)
      for (const auto& train : trial.trains)
        for (std::size_t i = 1; i < train.size(); ++i)
          if (train.times[i] - train.times[i - 1] < 0.003) ++violations[rep];
  });
  std::size_t total_violations = 0;
  for (int v : violations) total_violations += static_cast<std::size_t>(v);

  report(9, /*budget*/ 120.0, p_chi2 > 0.01 && total_violations == 0,
         fmt("kernel-free Hawkes vs Poisson counts: chi2 p = %.4f (bar > 0.01); F3 dead-time "
             "violations over 1e4 trials: %zu",
             p_chi2, total_violations));
}

// --- criterion 10: BH exactness ----------------------------------------------
void criterion_bh() {
  bool pass = true;

  const std::vector<std::pair<std::size_t, double>> k4{{0, 0.001}, {1, 0.01}, {2, 0.02}, {3, 0.9}};
  const auto res = bh_procedure(k4, 0.05);
  pass = pass && res.k0 == 3 && res.rejected == std::vector<std::size_t>{0, 1, 2};

  std::vector<std::pair<std::size_t, double>> all_one, all_zero;
  for (std::size_t i = 0; i < 6; ++i) {
    all_one.emplace_back(i, 1.0);
    all_zero.emplace_back(i, 0.0);
  }
  pass = pass && bh_procedure(all_one, 0.05).rejected.empty();
  pass = pass && bh_procedure(all_zero, 0.05).rejected.size() == 6;
  pass = pass && bh_procedure({{0, 0.05}}, 0.05).rejected.size() == 1;
  pass = pass && bh_procedure({{0, 0.051}}, 0.05).rejected.empty();

  report(10, /*budget*/ 1.0, pass, "hand-computed Benjamini-Hochberg cases match bit-exactly");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  g_criterion_start = t0;
  const auto elapsed = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 t0)
               .count() /
           1000.0;
  };

  criterion_closed_form();
  criterion_squared_identity();
  criterion_counting();
  criterion_moments();
  criterion_null_calibration();
  criterion_ue_level();
  criterion_power();
  criterion_multi_pattern();
  criterion_hawkes_reductions();
  criterion_bh();

  std::printf("acceptance: %d of 10 criteria passed in %.1f s\n", 10 - g_failures, elapsed());
  return g_failures == 0 ? 0 : 1;
}
