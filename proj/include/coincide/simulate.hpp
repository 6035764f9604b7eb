#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coincide/errors.hpp"
#include "coincide/rng.hpp"
#include "coincide/spike_data.hpp"

namespace coincide {

// Homogeneous Poisson train: count ~ Poisson(rate (b-a)), times i.i.d.
// uniform on [a,b], sorted.
inline SpikeTrain sim_poisson(double rate, const Window& w, Rng& rng) {
  if (rate < 0.0) throw DomainError("sim_poisson: negative rate");
  const std::uint64_t n = rng.poisson(rate * w.length());
  std::vector<double> times(n);
  for (auto& t : times) t = rng.uniform(w.a, w.b);
  std::sort(times.begin(), times.end());
  return SpikeTrain(std::move(times));
}

// Injection model: independent baseline trains plus one shared train merged
// into every neuron, so the injected spikes appear at identical times across
// the whole trial.
inline Trial sim_injection(const std::vector<double>& base_rates, double inject_rate,
                           const Window& w, Rng& rng) {
  if (inject_rate < 0.0) throw DomainError("sim_injection: negative injection rate");
  Trial trial;
  trial.window = w;
  trial.trains.reserve(base_rates.size());
  for (double rate : base_rates) trial.trains.push_back(sim_poisson(rate, w, rng));
  const SpikeTrain shared = sim_poisson(inject_rate, w, rng);
  for (auto& train : trial.trains) {
    std::vector<double> merged(train.size() + shared.size());
    std::merge(train.times.begin(), train.times.end(), shared.times.begin(), shared.times.end(),
               merged.begin());
    train.times = std::move(merged);
  }
  return trial;
}

// Interaction kernel beta * 1_{[0,x]}: a spike of the source neuron shifts
// the target's intensity by beta for x seconds.
struct PiecewiseConstKernel {
  double beta = 0.0;     // Hz; negative = inhibition
  double support = 0.0;  // seconds

  PiecewiseConstKernel() = default;
  PiecewiseConstKernel(double beta_, double support_) : beta(beta_), support(support_) {
    if (!(support > 0.0)) throw DomainError("PiecewiseConstKernel: support must be positive");
  }
};

// Multivariate Hawkes model with piecewise-constant kernels:
//   lambda_t^j = max(0, mu_j + sum_i sum_{s in N_i, 0 <= t-s <= x_ij} beta_ij).
// kernel(i, j) is the influence of neuron i on neuron j; absent kernels are
// zero. The processes are independent iff every off-diagonal kernel is absent.
class HawkesModel {
 public:
  explicit HawkesModel(std::vector<double> mu) : mu_(std::move(mu)) {
    for (double m : mu_)
      if (m < 0.0) throw DomainError("HawkesModel: negative spontaneous rate");
    kernels_.assign(mu_.size() * mu_.size(), std::nullopt);
  }

  std::size_t size() const { return mu_.size(); }
  double mu(std::size_t j) const { return mu_[j]; }

  void set_kernel(std::size_t from, std::size_t to, PiecewiseConstKernel k) {
    kernels_.at(from * size() + to) = k;
  }
  const std::optional<PiecewiseConstKernel>& kernel(std::size_t from, std::size_t to) const {
    return kernels_.at(from * size() + to);
  }

  bool is_independent() const {
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = 0; j < size(); ++j)
        if (i != j && kernels_[i * size() + j]) return false;
    return true;
  }

 private:
  std::vector<double> mu_;
  std::vector<std::optional<PiecewiseConstKernel>> kernels_;
};

struct HawkesOptions {
  std::uint64_t event_cap = 1'000'000;
  double burn_in = 0.0;  // simulate on [a - burn_in, b], keep [a, b]
};

// Ogata thinning. The dominating rate is recomputed after every candidate
// (accepted or not) from the live history, using only the nonnegative kernel
// contributions still active; because active contributions only drop off
// between candidates and the true intensity is clamped at zero, the bound
// dominates until the next event.
inline Trial sim_hawkes(const HawkesModel& model, const Window& w, Rng& rng,
                        const HawkesOptions& opts = {}) {
  const std::size_t n = model.size();
  if (n == 0) throw DomainError("sim_hawkes: empty model");
  if (opts.burn_in < 0.0) throw DomainError("sim_hawkes: negative burn-in");

  std::vector<std::vector<double>> events(n);
  std::vector<double> lam(n);
  std::uint64_t accepted = 0;
  double t = w.a - opts.burn_in;

  const auto active_count = [&](std::size_t i, std::size_t j, double at, bool strict) {
    const auto& k = model.kernel(i, j);
    if (!k) return std::pair<double, std::size_t>{0.0, 0};
    const auto& ev = events[i];
    std::size_t count = 0;
    for (auto it = ev.rbegin(); it != ev.rend(); ++it) {
      const double age = at - *it;
      if (strict ? age < k->support : age <= k->support)
        ++count;
      else
        break;
    }
    return std::pair<double, std::size_t>{k->beta, count};
  };

  while (true) {
    double bound = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double b = model.mu(j);
      for (std::size_t i = 0; i < n; ++i) {
        const auto [beta, cnt] = active_count(i, j, t, /*strict=*/true);
        if (beta > 0.0) b += beta * static_cast<double>(cnt);
      }
      bound += b;
    }
    if (bound <= 0.0) break;

    const double u = t + rng.exponential(bound);
    if (u > w.b) break;

    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double v = model.mu(j);
      for (std::size_t i = 0; i < n; ++i) {
        const auto [beta, cnt] = active_count(i, j, u, /*strict=*/false);
        v += beta * static_cast<double>(cnt);
      }
      lam[j] = std::max(0.0, v);
      total += lam[j];
    }
    if (total > bound * (1.0 + 1e-9))
      throw DomainError("sim_hawkes: thinning bound violated");  // bound correctness invariant

    if (rng.uniform01() < total / bound) {
      double pick = rng.uniform01() * total;
      std::size_t j = 0;
      while (j + 1 < n && pick >= lam[j]) pick -= lam[j], ++j;
      events[j].push_back(u);
      if (++accepted > opts.event_cap) throw ExplosionError("sim_hawkes: event cap exceeded");
    }
    t = u;
  }

  Trial trial;
  trial.window = w;
  trial.trains.reserve(n);
  for (auto& ev : events) {
    if (opts.burn_in > 0.0)
      ev.erase(ev.begin(), std::lower_bound(ev.begin(), ev.end(), w.a));
    trial.trains.emplace_back(std::move(ev));
  }
  return trial;
}

enum class Framework { F1, F2, F3, F4 };

inline const char* to_string(Framework f) {
  switch (f) {
    case Framework::F1: return "F1";
    case Framework::F2: return "F2";
    case Framework::F3: return "F3";
    default: return "F4";
  }
}

inline Framework framework_from_string(const std::string& s) {
  if (s == "F1" || s == "f1") return Framework::F1;
  if (s == "F2" || s == "f2") return Framework::F2;
  if (s == "F3" || s == "f3") return Framework::F3;
  if (s == "F4" || s == "f4") return Framework::F4;
  throw DomainError("unknown framework: " + s);
}

// Fixed values for parameter scans; anything unset follows the framework's
// random draw.
struct FrameworkOverrides {
  std::optional<double> duration;             // b - a in seconds
  std::optional<std::vector<double>> rates;   // Poisson rates / Hawkes spontaneous rates
  std::optional<double> beta;                 // F4 interaction height
  std::optional<double> inject_rate;          // F2 injection rate (default 0.3 Hz)
  double burn_in = 0.0;                       // Hawkes burn-in, default none
};

struct FrameworkConfig {
  Framework framework = Framework::F1;
  std::uint64_t seed = 1;
  std::size_t M = 50;
  FrameworkOverrides overrides;
};

// The parameter vector one repetition runs with.
struct FrameworkParams {
  Framework framework = Framework::F1;
  double duration = 0.0;
  std::vector<double> rates;           // lambda (F1/F2) or mu (F3/F4)
  std::optional<double> beta;          // F4
  std::optional<double> inject_rate;   // F2
};

inline void to_json(nlohmann::json& j, const FrameworkParams& p) {
  j = {{"framework", to_string(p.framework)}, {"duration", p.duration}, {"rates", p.rates}};
  if (p.beta) j["beta"] = *p.beta;
  if (p.inject_rate) j["inject_rate"] = *p.inject_rate;
}

struct SampledFramework {
  TrialSet trial_set;
  FrameworkParams params;
};

namespace detail {

// In-degrees of the excitatory graph used by F4: arrows 1->3, 2->3, 1->4,
// 2->4, 3->4, so m = (0, 0, 2, 3); pair (1,2) has no direct kernel.
constexpr std::size_t kF4NeuronCount = 4;
constexpr std::pair<std::size_t, std::size_t> kF4Edges[] = {{1, 3}, {2, 3}, {1, 4}, {2, 4}, {3, 4}};

inline HawkesModel build_hawkes(const FrameworkParams& p) {
  HawkesModel model(p.rates);
  const double refractory = 0.003;
  std::vector<std::size_t> in_degree(p.rates.size(), 0);
  if (p.framework == Framework::F4) {
    for (const auto& [from, to] : kF4Edges) {
      model.set_kernel(from - 1, to - 1, PiecewiseConstKernel(*p.beta, 0.005));
      ++in_degree[to - 1];
    }
  }
  for (std::size_t j = 0; j < p.rates.size(); ++j) {
    const double height = p.rates[j] + static_cast<double>(in_degree[j]) * (p.beta ? *p.beta : 0.0);
    model.set_kernel(j, j, PiecewiseConstKernel(-height, refractory));
  }
  return model;
}

}  // namespace detail

// Draws one parameter vector for the framework, then M trials from it.
// Parameters come from the substream (seed, repetition, param-stream) and
// trial k from (seed, repetition, k), so generation is reproducible
// trial-by-trial no matter how work is scheduled.
inline SampledFramework sample_framework(const FrameworkConfig& cfg, std::uint64_t repetition = 0) {
  if (cfg.M < 1) throw DomainError("sample_framework: M must be >= 1");

  Rng param_rng(cfg.seed, repetition, Rng::kParamStream);
  FrameworkParams p;
  p.framework = cfg.framework;
  p.duration = cfg.overrides.duration ? *cfg.overrides.duration : param_rng.uniform(0.2, 0.4);
  if (!(p.duration > 0.0)) throw DomainError("sample_framework: duration must be positive");

  const std::size_t n = detail::kF4NeuronCount;
  if (cfg.overrides.rates) {
    p.rates = *cfg.overrides.rates;
    if (p.rates.size() == 1) p.rates.assign(n, p.rates.front());
    if (p.rates.size() != n) throw DomainError("sample_framework: expected 1 or 4 rates");
  } else {
    p.rates.resize(n);
    for (auto& r : p.rates) r = param_rng.uniform(8.0, 20.0);
  }
  if (cfg.framework == Framework::F2)
    p.inject_rate = cfg.overrides.inject_rate ? *cfg.overrides.inject_rate : 0.3;
  if (cfg.framework == Framework::F4)
    p.beta = cfg.overrides.beta ? *cfg.overrides.beta : param_rng.uniform(20.0, 30.0);

  const Window w(0.0, p.duration);
  SampledFramework out;
  out.params = p;
  out.trial_set.neuron_count = n;
  out.trial_set.trials.reserve(cfg.M);

  std::optional<HawkesModel> model;
  if (cfg.framework == Framework::F3 || cfg.framework == Framework::F4)
    model = detail::build_hawkes(p);

  for (std::size_t k = 0; k < cfg.M; ++k) {
    Rng rng(cfg.seed, repetition, k);
    switch (cfg.framework) {
      case Framework::F1: {
        Trial trial;
        trial.window = w;
        for (double rate : p.rates) trial.trains.push_back(sim_poisson(rate, w, rng));
        out.trial_set.trials.push_back(std::move(trial));
        break;
      }
      case Framework::F2:
        out.trial_set.trials.push_back(sim_injection(p.rates, *p.inject_rate, w, rng));
        break;
      case Framework::F3:
      case Framework::F4: {
        HawkesOptions opts;
        opts.burn_in = cfg.overrides.burn_in;
        out.trial_set.trials.push_back(sim_hawkes(*model, w, rng, opts));
        break;
      }
    }
  }
  return out;
}

}  // namespace coincide
