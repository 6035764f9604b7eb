#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "coincide/errors.hpp"
#include "coincide/rng.hpp"
#include "coincide/spike_data.hpp"

namespace coincide {

// Delay parameter of the delayed coincidence count. Valid only while
// delta < (b-a)/2 for the window in use.
struct CoincidenceParams {
  double delta = 0.01;

  void check_against(const Window& w) const {
    if (!(delta > 0.0) || !(delta < w.length() / 2.0))
      throw DomainError("CoincidenceParams: requires 0 < delta < (b-a)/2");
  }
};

// Indicator on L-tuples, symmetric under permutation of its arguments.
using CoincidenceFunction = std::function<bool(std::span<const double>)>;

// The delta-window indicator: 1 iff max - min <= delta.
inline CoincidenceFunction delta_window_indicator(double delta) {
  return [delta](std::span<const double> xs) {
    auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    return *mx - *mn <= delta;
  };
}

namespace detail {

inline std::vector<const std::vector<double>*> subset_trains(const Trial& trial,
                                                             const PatternSubset& subset) {
  std::vector<const std::vector<double>*> out;
  out.reserve(subset.size());
  for (std::size_t id : subset.indices()) {
    if (id > trial.neuron_count()) throw DomainError("subset index out of range");
    out.push_back(&trial.trains[id - 1].times);
  }
  return out;
}

}  // namespace detail

// Number of L-tuples (one spike per neuron of the subset) whose span
// max - min is <= delta.
//
// Sweep: each qualifying tuple is counted exactly once at its designated
// anchor, the tuple element with the smallest (time, train) pair. Ties
// within one train are rejected upstream, but equal times across trains are
// legal (the injection model produces them by construction), so for trains
// before the anchor's the window is open at t and for trains after it the
// window is closed. One pass over the merged stream with per-neuron
// two-pointer windows: O(N log N) merge, O(N L) sweep.
inline std::uint64_t delayed_count(const Trial& trial, const PatternSubset& subset,
                                   const CoincidenceParams& params) {
  params.check_against(trial.window);
  const auto trains = detail::subset_trains(trial, subset);
  const std::size_t L = trains.size();
  const double delta = params.delta;

  std::vector<std::pair<double, std::size_t>> anchors;
  for (std::size_t j = 0; j < L; ++j)
    for (double t : *trains[j]) anchors.emplace_back(t, j);
  std::sort(anchors.begin(), anchors.end());

  std::vector<std::size_t> lo_open(L, 0), lo_closed(L, 0), hi(L, 0);
  std::uint64_t total = 0;
  for (const auto& [t, anchor_neuron] : anchors) {
    std::uint64_t prod = 1;
    for (std::size_t j = 0; j < L && prod; ++j) {
      if (j == anchor_neuron) continue;
      const auto& ts = *trains[j];
      while (lo_closed[j] < ts.size() && ts[lo_closed[j]] < t) ++lo_closed[j];
      while (lo_open[j] < ts.size() && ts[lo_open[j]] <= t) ++lo_open[j];
      if (hi[j] < lo_closed[j]) hi[j] = lo_closed[j];
      while (hi[j] < ts.size() && ts[hi[j]] <= t + delta) ++hi[j];
      const std::size_t from = j < anchor_neuron ? lo_open[j] : lo_closed[j];
      prod *= static_cast<std::uint64_t>(hi[j] - from);
    }
    total += prod;
  }
  return total;
}

// Cartesian-product count under an arbitrary symmetric indicator. Reference
// path; the enumeration is capped.
inline std::uint64_t generic_count(const Trial& trial, const PatternSubset& subset,
                                   const CoincidenceFunction& c, std::uint64_t cap = 10'000'000,
                                   bool check_symmetry = false) {
  const auto trains = detail::subset_trains(trial, subset);
  const std::size_t L = trains.size();

  std::uint64_t tuples = 1;
  for (const auto* ts : trains) {
    if (ts->empty()) return 0;
    if (tuples > cap / ts->size()) throw CapExceededError("generic_count: tuple cap exceeded");
    tuples *= ts->size();
  }

  std::vector<std::size_t> idx(L, 0);
  std::vector<double> tup(L), perm(L);
  Rng rng(0x5ca1ab1e);  // symmetry spot-checks only
  std::uint64_t total = 0;
  while (true) {
    for (std::size_t j = 0; j < L; ++j) tup[j] = (*trains[j])[idx[j]];
    const bool hit = c(tup);
    if (check_symmetry) {
      perm = tup;
      for (std::size_t j = L; j > 1; --j)
        std::swap(perm[j - 1], perm[rng.next_u64() % j]);
      if (c(perm) != hit) throw DomainError("generic_count: coincidence function is not symmetric");
    }
    total += hit ? 1 : 0;
    std::size_t j = 0;
    while (j < L && ++idx[j] == trains[j]->size()) idx[j++] = 0;
    if (j == L) break;
  }
  return total;
}

// Full enumeration of Eq.-style tuples with the delta-window indicator;
// oracle for delayed_count.
inline std::uint64_t delayed_count_bruteforce(const Trial& trial, const PatternSubset& subset,
                                              const CoincidenceParams& params,
                                              std::uint64_t cap = 10'000'000) {
  params.check_against(trial.window);
  return generic_count(trial, subset, delta_window_indicator(params.delta), cap);
}

// Binned-and-clipped trial: entry(l, j) = 1 iff neuron l spiked in bin j.
struct BinnedTrial {
  std::size_t neuron_count = 0;
  std::size_t bin_count = 0;
  double bin_width = 0.0;
  std::vector<std::uint8_t> cells;  // row-major, neuron-major

  std::uint8_t at(std::size_t neuron, std::size_t bin) const { return cells[neuron * bin_count + bin]; }
  std::uint8_t& at(std::size_t neuron, std::size_t bin) { return cells[neuron * bin_count + bin]; }
};

// A binary pattern over the n neurons; 1 entries mark the tested subset.
struct Constellation {
  std::vector<std::uint8_t> w;

  static Constellation from_subset(const PatternSubset& subset, std::size_t n) {
    Constellation c;
    c.w.assign(n, 0);
    for (std::size_t id : subset.indices()) {
      if (id > n) throw DomainError("Constellation: index exceeds neuron count");
      c.w[id - 1] = 1;
    }
    return c;
  }

  std::size_t ones() const { return static_cast<std::size_t>(std::count(w.begin(), w.end(), 1)); }
};

// Bins [a + j*D, a + (j+1)*D), anchored at a, last bin closed on the right;
// a trailing partial bin is discarded. Clipping: a bin holds 1 no matter how
// many spikes fell in it.
inline BinnedTrial bin_trial(const Trial& trial, double bin_width) {
  const double len = trial.window.length();
  if (!(bin_width > 0.0) || bin_width >= len)
    throw DomainError("bin_trial: bin width must satisfy 0 < D < b-a");

  // Largest B with B*D <= b-a, evaluated in float terms to keep the
  // bin-count rule exact at representable boundaries.
  std::size_t bins = static_cast<std::size_t>(std::floor(len / bin_width));
  while (static_cast<double>(bins + 1) * bin_width <= len) ++bins;
  while (bins > 0 && static_cast<double>(bins) * bin_width > len) --bins;
  if (bins == 0) throw DomainError("bin_trial: window shorter than one bin");

  BinnedTrial bt;
  bt.neuron_count = trial.neuron_count();
  bt.bin_count = bins;
  bt.bin_width = bin_width;
  bt.cells.assign(bt.neuron_count * bins, 0);
  for (std::size_t l = 0; l < trial.trains.size(); ++l) {
    for (double t : trial.trains[l].times) {
      double rel = t - trial.window.a;
      auto j = static_cast<long long>(std::floor(rel / bin_width));
      if (j == static_cast<long long>(bins) && rel <= static_cast<double>(bins) * bin_width)
        j = static_cast<long long>(bins) - 1;  // right-closed last bin
      if (j < 0 || j >= static_cast<long long>(bins)) continue;  // trailing partial bin
      bt.at(l, static_cast<std::size_t>(j)) = 1;
    }
  }
  return bt;
}

enum class ConstellationMode {
  exact,     // column equals w including its zeros
  marginal,  // column has 1s wherever w does; other neurons unconstrained
};

// Number of bin columns matching the constellation.
inline std::uint64_t constellation_count(const BinnedTrial& bt, const Constellation& w,
                                         ConstellationMode mode = ConstellationMode::exact) {
  if (w.w.size() != bt.neuron_count) throw DomainError("constellation_count: dimension mismatch");
  std::uint64_t count = 0;
  for (std::size_t j = 0; j < bt.bin_count; ++j) {
    bool match = true;
    for (std::size_t l = 0; l < bt.neuron_count && match; ++l) {
      if (mode == ConstellationMode::exact)
        match = bt.at(l, j) == w.w[l];
      else
        match = w.w[l] == 0 || bt.at(l, j) == 1;
    }
    count += match ? 1 : 0;
  }
  return count;
}

}  // namespace coincide
