// Command-line front end: single- and multiple-pattern independence tests,
// framework simulation, the procedure-P evaluation harness and the
// rate/duration parameter scan.
//
// Exit codes: 0 clean run, 1 usage or I/O error, 2 statistical degeneracy
// (reported on stderr as JSON, never hidden).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coincide/coincide.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDegenerate = 2;

void print_error(const std::string& type, const std::string& message) {
  json j{{"error", {{"type", type}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
}

coincide::FileFormat format_for(const std::string& path, const std::string& override_fmt) {
  if (override_fmt == "csv") return coincide::FileFormat::csv;
  if (override_fmt == "json") return coincide::FileFormat::json;
  if (!override_fmt.empty()) throw coincide::DomainError("unknown format: " + override_fmt);
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".json") return coincide::FileFormat::json;
  return coincide::FileFormat::csv;
}

std::vector<std::size_t> parse_pattern(const std::string& spec) {
  std::vector<std::size_t> ids;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    ids.push_back(std::stoul(tok));
  }
  return ids;
}

// "10:100:10" (start:stop:step, inclusive) or "10,20,50".
std::vector<std::size_t> parse_m_grid(const std::string& spec) {
  std::vector<std::size_t> grid;
  if (spec.find(':') != std::string::npos) {
    std::size_t start = 0, stop = 0, step = 0;
    if (std::sscanf(spec.c_str(), "%zu:%zu:%zu", &start, &stop, &step) != 3 || step == 0)
      throw coincide::DomainError("bad M grid: " + spec);
    for (std::size_t m = start; m <= stop; m += step) grid.push_back(m);
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) grid.push_back(std::stoul(tok));
  }
  return grid;
}

std::vector<double> parse_double_list(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<coincide::TestMethod> parse_methods(const std::string& spec) {
  std::vector<coincide::TestMethod> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "gaue") out.push_back(coincide::TestMethod::gaue);
    else if (tok == "ue") out.push_back(coincide::TestMethod::ue);
    else throw coincide::DomainError("unknown method: " + tok);
  }
  return out;
}

int default_threads() {
  if (const char* env = std::getenv("COINCIDE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

json outcome_to_json(const coincide::TestOutcome& o, const std::string& pattern,
                     const std::string& method) {
  json j = o;
  j["pattern"] = pattern;
  j["method"] = method;
  return j;
}

void emit_report(const json& j, const std::string& out_path, bool pretty) {
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw coincide::ParseError("cannot write " + out_path);
    out << j.dump(2) << "\n";
  }
  if (!pretty) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  const auto rows = j.contains("patterns") ? j["patterns"] : json::array({j});
  std::printf("%-14s %-7s %12s %12s %8s %-11s %s\n", "pattern", "method", "statistic", "p", "reject",
              "sign", "flags");
  for (const auto& row : rows) {
    std::string flags;
    for (const auto& f : row["flags"]) flags += f.get<std::string>() + " ";
    std::printf("%-14s %-7s %12.5g %12.5g %8s %-11s %s\n", row["pattern"].get<std::string>().c_str(),
                row["method"].get<std::string>().c_str(), row["statistic"].get<double>(),
                row["p"].get<double>(), row["reject"].get<bool>() ? "yes" : "no",
                row["sign"].get<std::string>().c_str(), flags.c_str());
  }
}

struct TestArgs {
  std::string input, format, pattern = "", method = "gaue", out;
  double delta = 0.01, alpha = 0.05, q = 0.05, bin_width = 0.0;
  bool multi = false, pretty = false, ue_marginal = false;
};

int run_test(const TestArgs& a) {
  const coincide::TrialSet ts = coincide::load_trial_set(a.input, format_for(a.input, a.format));
  const coincide::TestMethod method = parse_methods(a.method).at(0);
  const double bin_width = a.bin_width > 0.0 ? a.bin_width : 2.0 * a.delta;
  const auto mode =
      a.ue_marginal ? coincide::ConstellationMode::marginal : coincide::ConstellationMode::exact;

  if (a.multi) {
    coincide::MultiPatternOptions opt;
    opt.q = a.q;
    opt.method = method;
    opt.delta = a.delta;
    opt.ue_bin_width = bin_width;
    opt.ue_mode = mode;
    const auto res = coincide::multi_pattern_test(ts, opt);

    json rows = json::array();
    bool any_errored = false;
    for (const auto& po : res.patterns) {
      json row = po;
      row["method"] = coincide::to_string(method);
      rows.push_back(std::move(row));
      any_errored = any_errored || po.errored;
    }
    json j{{"method", coincide::to_string(method)},
           {"q", a.q},
           {"k0", res.bh.k0},
           {"rejected_count", res.bh.rejected.size()},
           {"patterns", rows}};
    emit_report(j, a.out, a.pretty);
    return any_errored ? kExitDegenerate : kExitOk;
  }

  std::vector<std::size_t> ids = a.pattern.empty()
                                     ? std::vector<std::size_t>{}
                                     : parse_pattern(a.pattern);
  if (ids.empty()) {
    ids.resize(ts.neuron_count);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i + 1;
  }
  const coincide::PatternSubset subset(ids);
  try {
    coincide::TestOutcome o;
    if (method == coincide::TestMethod::gaue) {
      o = coincide::gaue_test(ts, subset, a.delta, a.alpha);
    } else {
      const auto w = coincide::Constellation::from_subset(subset, ts.neuron_count);
      o = coincide::ue_test(ts, w, bin_width, a.alpha, mode);
    }
    emit_report(outcome_to_json(o, subset.label(), coincide::to_string(method)), a.out, a.pretty);
    return kExitOk;
  } catch (const coincide::ZeroIntensityError& e) {
    print_error("zero_intensity", e.what());
    return kExitDegenerate;
  } catch (const coincide::DegenerateVarianceError& e) {
    print_error("degenerate_variance", e.what());
    return kExitDegenerate;
  }
}

struct SimulateArgs {
  std::string framework = "F1", out, format;
  std::size_t M = 50;
  std::uint64_t seed = 1;
  std::uint64_t repetition = 0;
  double duration = 0.0, beta = 0.0, inject_rate = -1.0, burn_in = 0.0;
  std::string rates;
};

int run_simulate(const SimulateArgs& a) {
  coincide::FrameworkConfig cfg;
  cfg.framework = coincide::framework_from_string(a.framework);
  cfg.seed = a.seed;
  cfg.M = a.M;
  if (a.duration > 0.0) cfg.overrides.duration = a.duration;
  if (!a.rates.empty()) cfg.overrides.rates = parse_double_list(a.rates);
  if (a.beta > 0.0) cfg.overrides.beta = a.beta;
  if (a.inject_rate >= 0.0) cfg.overrides.inject_rate = a.inject_rate;
  cfg.overrides.burn_in = a.burn_in;

  const auto sampled = coincide::sample_framework(cfg, a.repetition);
  coincide::write_trial_set(sampled.trial_set, a.out, format_for(a.out, a.format));

  json params = sampled.params;
  params["seed"] = a.seed;
  params["repetition"] = a.repetition;
  params["M"] = a.M;
  params["delta_default"] = 0.01;
  const std::string sidecar = a.out + ".params.json";
  std::ofstream side(sidecar);
  if (!side) throw coincide::ParseError("cannot write " + sidecar);
  side << params.dump(2) << "\n";

  std::cout << json{{"written", a.out}, {"params", sidecar}, {"trials", a.M}}.dump() << "\n";
  return kExitOk;
}

json meta_for(const coincide::EvalRun& run) {
  json m{{"framework", coincide::to_string(run.cfg.framework)},
         {"seed", run.cfg.seed},
         {"repetitions", run.repetitions},
         {"M_grid", run.M_grid},
         {"alpha", run.alpha},
         {"delta", run.delta},
         {"ue_bin_width", run.ue_bin_width},
         {"sorted_p_M", run.sorted_p_M},
         {"library_version", coincide::kVersion}};
  json methods = json::array();
  for (const auto m2 : run.methods) methods.push_back(coincide::to_string(m2));
  m["methods"] = methods;
  if (run.cfg.overrides.duration) m["duration"] = *run.cfg.overrides.duration;
  if (run.cfg.overrides.rates) m["rates"] = *run.cfg.overrides.rates;
  return m;
}

struct EvaluateArgs {
  std::string framework = "F1", methods = "gaue,ue", out_dir = ".", experiment;
  std::string m_grid = "10:100:10";
  std::size_t repetitions = 200;
  std::uint64_t seed = 1;
  double alpha = 0.05, delta = 0.01, ue_bin_width = 0.0, q = 0.05;
  std::size_t sorted_p_M = 50, batch = 25;
  int threads = default_threads();
  bool histogram = false;
  std::size_t histogram_M = 50;
  std::string lambda_grid, duration_grid;  // scan only
};

coincide::EvalRun make_run(const EvaluateArgs& a) {
  coincide::EvalRun run;
  run.cfg.framework = coincide::framework_from_string(a.framework);
  run.cfg.seed = a.seed;
  run.repetitions = a.repetitions;
  run.M_grid = parse_m_grid(a.m_grid);
  run.methods = parse_methods(a.methods);
  run.alpha = a.alpha;
  run.delta = a.delta;
  run.ue_bin_width = a.ue_bin_width > 0.0 ? a.ue_bin_width : 2.0 * a.delta;
  run.sorted_p_M = a.sorted_p_M;
  run.threads = a.threads;
  return run;
}

int run_evaluate(const EvaluateArgs& a) {
  const coincide::EvalRun run = make_run(a);
  const std::string experiment =
      a.experiment.empty() ? std::string(coincide::to_string(run.cfg.framework)) + "_eval" : a.experiment;
  const coincide::ExperimentWriter writer(a.out_dir, experiment);

  if (a.histogram) {
    const auto hist = coincide::detection_histogram(run.cfg, a.histogram_M, a.q, a.repetitions,
                                                    run.methods, run.delta, run.ue_bin_width,
                                                    run.threads, run.ue_mode);
    json meta = meta_for(run);
    meta["q"] = a.q;
    meta["M"] = a.histogram_M;
    meta["patterns"] = hist.pattern_labels;
    writer.write_meta(meta);
    for (std::size_t me = 0; me < hist.methods.size(); ++me) {
      coincide::CurveData curve;
      curve.kind = coincide::CurveKind::detection_histogram;
      curve.label = std::string("detection_histogram_") + coincide::to_string(hist.methods[me]);
      for (std::size_t i = 0; i < hist.pattern_labels.size(); ++i) {
        curve.xs.push_back(static_cast<double>(i + 1));
        curve.ys.push_back(hist.frequency[me][i]);
      }
      writer.write_curve(curve);
    }
    std::cout << json{{"out_dir", writer.dir().string()}}.dump() << "\n";
    return kExitOk;
  }

  writer.write_meta(meta_for(run));
  const auto flush = [&](const coincide::ProcedurePResult& partial, std::size_t done, std::size_t total) {
    for (const auto& curve : partial.curves) writer.write_curve(curve);
    std::cerr << "evaluate: " << done << "/" << total << " repetitions\n";
  };
  coincide::run_procedure_P(run, flush, a.batch);
  std::cout << json{{"out_dir", writer.dir().string()}}.dump() << "\n";
  return kExitOk;
}

int run_scan(const EvaluateArgs& a) {
  const coincide::EvalRun base = make_run(a);
  const std::vector<double> lambdas =
      a.lambda_grid.empty() ? std::vector<double>{8.0, 15.0, 20.0} : parse_double_list(a.lambda_grid);
  const std::vector<double> durations =
      a.duration_grid.empty() ? std::vector<double>{0.2, 0.3, 0.4} : parse_double_list(a.duration_grid);
  const std::string experiment =
      a.experiment.empty() ? std::string(coincide::to_string(base.cfg.framework)) + "_scan" : a.experiment;

  // Cells are written as they finish, so an interrupted scan leaves a valid
  // prefix of the grid behind.
  std::size_t idx = 0;
  json cells = json::array();
  for (double rate : lambdas) {
    for (double duration : durations) {
      coincide::EvalRun run = base;
      run.cfg.overrides.rates = std::vector<double>{rate};
      run.cfg.overrides.duration = duration;
      run.cfg.seed = coincide::derive_seed(base.cfg.seed, idx);
      char cell_name[64];
      std::snprintf(cell_name, sizeof(cell_name), "lambda%g_b%g", rate, duration);
      const coincide::ExperimentWriter writer(a.out_dir, experiment + "/" + cell_name);
      json meta = meta_for(run);
      meta["cell"] = {{"rate", rate}, {"duration", duration}};
      writer.write_meta(meta);
      const auto result = coincide::run_procedure_P(run, {}, 0);
      for (const auto& curve : result.curves) writer.write_curve(curve);
      std::cerr << "scan: cell " << cell_name << " done (" << ++idx << "/"
                << lambdas.size() * durations.size() << ")\n";
      cells.push_back({{"cell", cell_name}, {"rate", rate}, {"duration", duration}});
    }
  }
  std::cout << json{{"out_dir", a.out_dir}, {"experiment", experiment}, {"cells", cells}}.dump()
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delayed-coincidence dependence analysis for parallel spike trains"};
  app.require_subcommand(1);

  TestArgs test_args;
  auto* test_cmd = app.add_subcommand("test", "run an independence test on a trial-set file");
  test_cmd->add_option("input", test_args.input, "trial-set file (csv or json)")->required();
  test_cmd->add_option("--format", test_args.format, "csv|json (default: by extension)");
  test_cmd->add_option("--pattern", test_args.pattern, "comma-separated neuron ids (default: all)");
  test_cmd->add_option("--delta", test_args.delta, "coincidence delay in seconds")->capture_default_str();
  test_cmd->add_option("--alpha", test_args.alpha, "test level")->capture_default_str();
  test_cmd->add_option("--method", test_args.method, "gaue|ue")->capture_default_str();
  test_cmd->add_option("--bin-width", test_args.bin_width, "UE bin width (default: 2*delta)");
  test_cmd->add_flag("--multi", test_args.multi, "test every pattern of >= 2 neurons with BH control");
  test_cmd->add_option("--q", test_args.q, "BH false-discovery level for --multi")->capture_default_str();
  test_cmd->add_flag("--ue-marginal", test_args.ue_marginal,
                     "count marginal sub-patterns instead of exact constellations");
  test_cmd->add_flag("--pretty", test_args.pretty, "human-readable table instead of JSON");
  test_cmd->add_option("--out", test_args.out, "also write the JSON report here");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "draw a framework trial set and write it to disk");
  sim_cmd->add_option("--framework", sim_args.framework, "F1|F2|F3|F4")->capture_default_str();
  sim_cmd->add_option("--M", sim_args.M, "number of trials")->required();
  sim_cmd->add_option("--seed", sim_args.seed, "RNG seed")->capture_default_str();
  sim_cmd->add_option("--repetition", sim_args.repetition, "repetition index for the substream")
      ->capture_default_str();
  sim_cmd->add_option("--out", sim_args.out, "output file")->required();
  sim_cmd->add_option("--format", sim_args.format, "csv|json (default: by extension)");
  sim_cmd->add_option("--duration", sim_args.duration, "fix the trial duration (seconds)");
  sim_cmd->add_option("--rates", sim_args.rates, "fix rates: one value or four comma-separated");
  sim_cmd->add_option("--beta", sim_args.beta, "fix the F4 interaction height (Hz)");
  sim_cmd->add_option("--inject-rate", sim_args.inject_rate, "fix the F2 injection rate (Hz)");
  sim_cmd->add_option("--burn-in", sim_args.burn_in, "Hawkes burn-in before the window (seconds)");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Monte-Carlo evaluation over an M grid");
  eval_cmd->add_flag("--detection-histogram", eval_args.histogram,
                     "per-pattern BH detection frequencies instead of the M-grid curves");
  eval_cmd->add_option("--M", eval_args.histogram_M, "trials per repetition for the histogram")
      ->capture_default_str();
  eval_cmd->add_option("--q", eval_args.q, "BH false-discovery level for the histogram")
      ->capture_default_str();
  auto add_eval_options = [](CLI::App* cmd, EvaluateArgs& a) {
    cmd->add_option("--framework", a.framework, "F1|F2|F3|F4")->capture_default_str();
    cmd->add_option("--repetitions", a.repetitions, "repetitions per grid entry")->capture_default_str();
    cmd->add_option("--M-grid", a.m_grid, "start:stop:step or comma list")->capture_default_str();
    cmd->add_option("--methods", a.methods, "comma list of gaue,ue")->capture_default_str();
    cmd->add_option("--alpha", a.alpha, "test level")->capture_default_str();
    cmd->add_option("--delta", a.delta, "coincidence delay (seconds)")->capture_default_str();
    cmd->add_option("--ue-bin-width", a.ue_bin_width, "UE bin width (default: 2*delta)");
    cmd->add_option("--sorted-p-M", a.sorted_p_M, "grid entry for the sorted p-value curve")
        ->capture_default_str();
    cmd->add_option("--seed", a.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--threads", a.threads, "worker threads (env COINCIDE_THREADS)")
        ->capture_default_str();
    cmd->add_option("--batch", a.batch, "repetitions per flush")->capture_default_str();
    cmd->add_option("--out-dir", a.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--experiment", a.experiment, "experiment name (default: <framework>_eval/scan)");
  };
  add_eval_options(eval_cmd, eval_args);

  EvaluateArgs scan_args;
  auto* scan_cmd = app.add_subcommand("scan", "parameter scan: procedure P per (rate, duration) cell");
  add_eval_options(scan_cmd, scan_args);
  scan_cmd->add_option("--lambda-grid", scan_args.lambda_grid, "rates (default 8,15,20)");
  scan_cmd->add_option("--duration-grid", scan_args.duration_grid, "durations (default 0.2,0.3,0.4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (test_cmd->parsed()) return run_test(test_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
    if (scan_cmd->parsed()) return run_scan(scan_args);
    return kExitUsage;
  } catch (const coincide::ParseError& e) {
    print_error("io", e.what());
    return kExitUsage;
  } catch (const coincide::DomainError& e) {
    print_error("usage", e.what());
    return kExitUsage;
  } catch (const coincide::ZeroIntensityError& e) {
    print_error("zero_intensity", e.what());
    return kExitDegenerate;
  } catch (const coincide::DegenerateVarianceError& e) {
    print_error("degenerate_variance", e.what());
    return kExitDegenerate;
  } catch (const coincide::ExplosionError& e) {
    print_error("explosion", e.what());
    return kExitDegenerate;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kExitUsage;
  }
}
