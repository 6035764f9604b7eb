#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "coincide/errors.hpp"
#include "coincide/indep_tests.hpp"
#include "coincide/parallel.hpp"
#include "coincide/simulate.hpp"
#include "coincide/spike_data.hpp"
#include "coincide/stats.hpp"

namespace coincide {

enum class KsReference { std_normal, uniform01 };

// Exact Kolmogorov-Smirnov distance between the empirical CDF of the sample
// and the reference CDF, evaluated at the jump points.
inline double ks_distance(std::vector<double> sample, KsReference reference) {
  if (sample.empty()) throw DomainError("ks_distance: empty sample");
  for (double x : sample)
    if (std::isnan(x)) throw DomainError("ks_distance: NaN in sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = reference == KsReference::std_normal
                         ? normal_cdf(sample[i])
                         : std::clamp(sample[i], 0.0, 1.0);
    d = std::max(d, std::max(static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n));
  }
  return d;
}

enum class CurveKind { ks_vs_M, sorted_pvalues, rate_vs_M, detection_histogram };

inline const char* to_string(CurveKind k) {
  switch (k) {
    case CurveKind::ks_vs_M: return "ks_vs_M";
    case CurveKind::sorted_pvalues: return "sorted_pvalues";
    case CurveKind::rate_vs_M: return "rate_vs_M";
    default: return "detection_histogram";
  }
}

inline CurveKind curve_kind_from_string(const std::string& s) {
  if (s == "ks_vs_M") return CurveKind::ks_vs_M;
  if (s == "sorted_pvalues") return CurveKind::sorted_pvalues;
  if (s == "rate_vs_M") return CurveKind::rate_vs_M;
  if (s == "detection_histogram") return CurveKind::detection_histogram;
  throw DomainError("unknown curve kind: " + s);
}

// One plottable curve; emission is data-only.
struct CurveData {
  CurveKind kind = CurveKind::ks_vs_M;
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

inline void to_json(nlohmann::json& j, const CurveData& c) {
  j = {{"kind", to_string(c.kind)}, {"label", c.label}, {"x", c.xs}, {"y", c.ys}};
}

inline void from_json(const nlohmann::json& j, CurveData& c) {
  c.kind = curve_kind_from_string(j.at("kind").get<std::string>());
  c.label = j.at("label").get<std::string>();
  c.xs = j.at("x").get<std::vector<double>>();
  c.ys = j.at("y").get<std::vector<double>>();
  if (c.xs.size() != c.ys.size()) throw ParseError("CurveData: x/y length mismatch");
}

inline void write_curve_csv(const CurveData& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open curve file: " + path);
  out << "x,y\n";
  for (std::size_t i = 0; i < c.xs.size(); ++i)
    out << detail::format_double(c.xs[i]) << ',' << detail::format_double(c.ys[i]) << "\n";
  if (!out) throw ParseError("curve write failed: " + path);
}

// A Monte-Carlo evaluation: R repetitions of (draw parameters, simulate M
// trials, run the tests) per entry of the M grid.
struct EvalRun {
  FrameworkConfig cfg;                    // cfg.M is ignored; the grid drives trial counts
  std::size_t repetitions = 1000;
  std::vector<std::size_t> M_grid = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<TestMethod> methods = {TestMethod::gaue, TestMethod::ue};
  double alpha = 0.05;
  double delta = 0.01;
  double ue_bin_width = 0.02;             // matches the pair-coincidence abundance of delta = 0.01
  ConstellationMode ue_mode = ConstellationMode::exact;
  std::size_t sorted_p_M = 50;            // grid entry whose sorted p-value curve is emitted
  int threads = 1;

  void check() const {
    if (repetitions < 1) throw DomainError("EvalRun: repetitions must be >= 1");
    if (M_grid.empty() || !std::is_sorted(M_grid.begin(), M_grid.end()))
      throw DomainError("EvalRun: M grid must be non-empty ascending");
    if (M_grid.front() < 2) throw DomainError("EvalRun: M must be >= 2");
    if (methods.empty()) throw DomainError("EvalRun: no methods enabled");
  }
};

// Everything one repetition produced for one (M, method) cell.
struct CellOutcome {
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  bool reject = false;
  bool errored = false;
};

struct MethodAggregate {
  TestMethod method = TestMethod::gaue;
  std::vector<double> ks_statistics;   // per M; GAUE only (NaN for UE)
  std::vector<double> ks_pvalues;      // per M
  std::vector<double> rejection_rate;  // per M; errored repetitions count as non-rejections
  std::vector<std::size_t> excluded;   // per M; repetitions whose test degenerated
  std::vector<std::vector<double>> pvalue_samples;     // per M, unsorted
  std::vector<std::vector<double>> statistic_samples;  // per M, degenerate reps dropped
};

struct ProcedurePResult {
  EvalRun run;
  std::vector<MethodAggregate> aggregates;  // one per enabled method
  std::vector<CurveData> curves;
};

namespace harness_detail {

inline CellOutcome run_one_cell(const TrialSet& ts, TestMethod method, const EvalRun& run) {
  CellOutcome cell;
  try {
    if (method == TestMethod::gaue) {
      const PatternSubset full({1, 2, 3, 4});
      const GaueComputation g = gaue_compute(ts, full, run.delta);
      cell.statistic = g.statistic;
      cell.p_value = 2.0 * (1.0 - normal_cdf(std::abs(g.statistic)));
      cell.reject = cell.p_value <= run.alpha;
    } else {
      const auto w = Constellation::from_subset(PatternSubset({1, 2, 3, 4}), ts.neuron_count);
      const TestOutcome o = ue_test(ts, w, run.ue_bin_width, run.alpha, run.ue_mode);
      cell.statistic = o.statistic;
      cell.p_value = o.p_value;
      cell.reject = o.reject;
    }
  } catch (const ZeroIntensityError&) {
    cell.errored = true;
  } catch (const DegenerateVarianceError&) {
    cell.errored = true;
  }
  return cell;
}

using RepRecord = std::vector<std::vector<CellOutcome>>;  // [method][M index]

inline ProcedurePResult aggregate(const EvalRun& run, const std::vector<RepRecord>& records,
                                  std::size_t completed) {
  ProcedurePResult result;
  result.run = run;
  for (std::size_t me = 0; me < run.methods.size(); ++me) {
    MethodAggregate agg;
    agg.method = run.methods[me];
    for (std::size_t mi = 0; mi < run.M_grid.size(); ++mi) {
      std::vector<double> stats, ps;
      std::size_t rejections = 0, excluded = 0;
      for (std::size_t rep = 0; rep < completed; ++rep) {
        const CellOutcome& cell = records[rep][me][mi];
        if (cell.errored) {
          ++excluded;
          continue;  // counts as a non-rejection; excluded from both KS samples
        }
        stats.push_back(cell.statistic);
        ps.push_back(cell.p_value);
        if (cell.reject) ++rejections;
      }
      agg.excluded.push_back(excluded);
      agg.rejection_rate.push_back(static_cast<double>(rejections) / static_cast<double>(completed));
      agg.ks_pvalues.push_back(ps.empty() ? std::numeric_limits<double>::quiet_NaN()
                                          : ks_distance(ps, KsReference::uniform01));
      agg.ks_statistics.push_back(agg.method == TestMethod::gaue && !stats.empty()
                                      ? ks_distance(stats, KsReference::std_normal)
                                      : std::numeric_limits<double>::quiet_NaN());
      agg.pvalue_samples.push_back(std::move(ps));
      agg.statistic_samples.push_back(std::move(stats));
    }
    result.aggregates.push_back(std::move(agg));
  }

  // Curves, matched to the shapes reported for this kind of study: KS of
  // statistics against the normal, KS of p-values against the uniform,
  // rejection frequency, and the sorted p-value curve at one grid entry.
  const std::vector<double> M_xs(run.M_grid.begin(), run.M_grid.end());
  for (const auto& agg : result.aggregates) {
    const std::string m = to_string(agg.method);
    if (agg.method == TestMethod::gaue)
      result.curves.push_back({CurveKind::ks_vs_M, "ks_statistics_" + m, M_xs, agg.ks_statistics});
    result.curves.push_back({CurveKind::ks_vs_M, "ks_pvalues_" + m, M_xs, agg.ks_pvalues});
    result.curves.push_back({CurveKind::rate_vs_M, "rejection_rate_" + m, M_xs, agg.rejection_rate});

    const auto it = std::find(run.M_grid.begin(), run.M_grid.end(), run.sorted_p_M);
    if (it != run.M_grid.end()) {
      const std::size_t mi = static_cast<std::size_t>(it - run.M_grid.begin());
      std::vector<double> sorted_p = agg.pvalue_samples[mi];
      std::sort(sorted_p.begin(), sorted_p.end());
      std::vector<double> ranks(sorted_p.size());
      for (std::size_t i = 0; i < ranks.size(); ++i)
        ranks[i] = static_cast<double>(i + 1) / static_cast<double>(ranks.size());
      result.curves.push_back({CurveKind::sorted_pvalues,
                               "sorted_pvalues_M" + std::to_string(run.sorted_p_M) + "_" + m,
                               std::move(ranks), std::move(sorted_p)});
    }
  }
  return result;
}

}  // namespace harness_detail

// Procedure: per repetition draw fresh parameters, simulate max(M) trials
// from per-trial substreams, and evaluate every (M, method) cell on the
// first M trials (common random numbers across the grid smooth the curves
// without touching any per-M marginal). Repetitions run in batches; after
// each batch the optional flush callback receives aggregates over everything
// completed so far, so partial output is always self-consistent. Aggregation
// walks repetitions in index order, making results independent of thread
// scheduling.
inline ProcedurePResult run_procedure_P(
    const EvalRun& run,
    const std::function<void(const ProcedurePResult& partial, std::size_t done, std::size_t total)>&
        flush = {},
    std::size_t batch_size = 0) {
  run.check();
  const std::size_t R = run.repetitions;
  const std::size_t M_max = run.M_grid.back();
  if (batch_size == 0) batch_size = R;

  std::vector<harness_detail::RepRecord> records(R);
  for (std::size_t start = 0; start < R; start += batch_size) {
    const std::size_t end = std::min(R, start + batch_size);
    parallel_for(end - start, run.threads, [&](std::size_t offset) {
      const std::size_t rep = start + offset;
      FrameworkConfig cfg = run.cfg;
      cfg.M = M_max;
      const SampledFramework sampled = sample_framework(cfg, rep);

      harness_detail::RepRecord rec(run.methods.size(),
                                    std::vector<CellOutcome>(run.M_grid.size()));
      TrialSet prefix;
      prefix.neuron_count = sampled.trial_set.neuron_count;
      for (std::size_t mi = 0; mi < run.M_grid.size(); ++mi) {
        prefix.trials.assign(
            sampled.trial_set.trials.begin(),
            sampled.trial_set.trials.begin() + static_cast<std::ptrdiff_t>(run.M_grid[mi]));
        for (std::size_t me = 0; me < run.methods.size(); ++me)
          rec[me][mi] = harness_detail::run_one_cell(prefix, run.methods[me], run);
      }
      records[rep] = std::move(rec);
    });
    if (flush && end < R) flush(harness_detail::aggregate(run, records, end), end, R);
  }

  ProcedurePResult result = harness_detail::aggregate(run, records, R);
  if (flush) flush(result, R, R);
  return result;
}

// One cell of the parameter scan: the framework's randomized rate and
// duration are pinned to fixed values.
struct ScanCell {
  double rate = 0.0;
  double duration = 0.0;
  ProcedurePResult result;
};

// Runs procedure P once per (rate, duration) pair, overriding the F-box
// randomization. Cells get unrelated seed streams derived from the base seed.
inline std::vector<ScanCell> parameter_scan(
    const EvalRun& base, const std::vector<double>& lambda_grid,
    const std::vector<double>& duration_grid,
    const std::function<void(std::size_t done, std::size_t total)>& progress = {}) {
  if (lambda_grid.empty() || duration_grid.empty())
    throw DomainError("parameter_scan: empty grid");
  std::vector<ScanCell> cells;
  std::size_t idx = 0;
  for (double rate : lambda_grid) {
    for (double duration : duration_grid) {
      EvalRun run = base;
      run.cfg.overrides.rates = std::vector<double>{rate};
      run.cfg.overrides.duration = duration;
      run.cfg.seed = derive_seed(base.cfg.seed, idx);
      cells.push_back({rate, duration, run_procedure_P(run)});
      ++idx;
      if (progress) progress(idx, lambda_grid.size() * duration_grid.size());
    }
  }
  return cells;
}

// Multiple-pattern detection frequencies under a dependent framework.
struct DetectionHistogram {
  std::vector<std::string> pattern_labels;  // 11 patterns for n = 4
  std::vector<TestMethod> methods;
  std::vector<std::vector<double>> frequency;  // [method][pattern]
  std::vector<std::vector<std::size_t>> errored;  // [method][pattern]
  std::size_t repetitions = 0;
};

inline DetectionHistogram detection_histogram(
    const FrameworkConfig& cfg, std::size_t M, double q, std::size_t repetitions,
    const std::vector<TestMethod>& methods = {TestMethod::gaue, TestMethod::ue},
    double delta = 0.01, double ue_bin_width = 0.02, int threads = 1,
    ConstellationMode ue_mode = ConstellationMode::exact) {
  if (repetitions < 1) throw DomainError("detection_histogram: repetitions must be >= 1");

  const auto patterns = all_patterns(detail::kF4NeuronCount);
  DetectionHistogram hist;
  hist.repetitions = repetitions;
  hist.methods = methods;
  for (const auto& p : patterns) hist.pattern_labels.push_back(p.label());

  using RepMask = std::vector<std::pair<std::vector<bool>, std::vector<bool>>>;  // per method: (rejected, errored)
  std::vector<RepMask> masks(repetitions);

  parallel_for(repetitions, threads, [&](std::size_t rep) {
    FrameworkConfig c = cfg;
    c.M = M;
    const SampledFramework sampled = sample_framework(c, rep);
    RepMask mask;
    for (TestMethod method : methods) {
      MultiPatternOptions opt;
      opt.q = q;
      opt.method = method;
      opt.delta = delta;
      opt.ue_bin_width = ue_bin_width;
      opt.ue_mode = ue_mode;
      const MultiPatternResult res = multi_pattern_test(sampled.trial_set, opt);
      std::vector<bool> rejected(patterns.size(), false), errored(patterns.size(), false);
      for (std::size_t i = 0; i < res.patterns.size(); ++i) {
        rejected[i] = res.patterns[i].outcome.reject;
        errored[i] = res.patterns[i].errored;
      }
      mask.emplace_back(std::move(rejected), std::move(errored));
    }
    masks[rep] = std::move(mask);
  });

  for (std::size_t me = 0; me < methods.size(); ++me) {
    std::vector<double> freq(patterns.size(), 0.0);
    std::vector<std::size_t> err(patterns.size(), 0);
    for (const auto& mask : masks)
      for (std::size_t i = 0; i < patterns.size(); ++i) {
        freq[i] += mask[me].first[i] ? 1.0 : 0.0;
        err[i] += mask[me].second[i] ? 1 : 0;
      }
    for (auto& f : freq) f /= static_cast<double>(repetitions);
    hist.frequency.push_back(std::move(freq));
    hist.errored.push_back(std::move(err));
  }
  return hist;
}

// Writes curves/<experiment>/<curve-id>.csv plus meta.json. Every file is
// complete once written, so interrupted runs leave only valid files behind.
class ExperimentWriter {
 public:
  ExperimentWriter(const std::string& out_dir, const std::string& experiment)
      : dir_(std::filesystem::path(out_dir) / "curves" / experiment) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  void write_curve(const CurveData& curve) const {
    write_curve_csv(curve, (dir_ / (curve.label + ".csv")).string());
  }

  void write_meta(const nlohmann::json& meta) const {
    std::ofstream out(dir_ / "meta.json");
    if (!out) throw ParseError("cannot write meta.json");
    out << meta.dump(2) << "\n";
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace coincide
