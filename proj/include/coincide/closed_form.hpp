#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "coincide/errors.hpp"
#include "coincide/rng.hpp"
#include "coincide/spike_data.hpp"

namespace coincide {

// Rates in Hz for the neurons of a tested subset, in subset order.
using IntensityVector = std::vector<double>;

// Expected count and variance of the delayed coincidence count under
// independence, with the k-indexed variance summands kept for diagnostics
// (per_k_terms[0] is the expectation term, so variance = sum of terms).
struct MomentReport {
  double m0 = 0.0;
  double variance = 0.0;
  std::vector<double> per_k_terms;
};

namespace detail {

inline void check_Lk(int L, int k, int k_max) {
  if (L < 2) throw DomainError("L must be >= 2");
  if (k < 0 || k > k_max) throw DomainError("k out of range");
}

}  // namespace detail

// f(L,k) = (k(k+1) + L(L+1)) / (L-k+1), evaluated as an exact integer
// fraction before the final division.
inline double f_Lk(int L, int k) {
  detail::check_Lk(L, k, L - 1);
  const std::int64_t kk = k, ll = L;
  const std::int64_t num = kk * (kk + 1) + ll * (ll + 1);
  const std::int64_t den = ll - kk + 1;
  return static_cast<double>(num) / static_cast<double>(den);
}

// h(L,k) = (-k^3 + k^2(2+L) + k(5+2L-L^2) + L^3 + 2L^2 - L - 2)
//          / ((L-k+2)(L-k+1)), exact integer fraction as above. The cubic
// numerator stays well inside int64 for any practical L.
inline double h_Lk(int L, int k) {
  detail::check_Lk(L, k, L - 1);
  const std::int64_t kk = k, ll = L;
  const std::int64_t num =
      -kk * kk * kk + kk * kk * (2 + ll) + kk * (5 + 2 * ll - ll * ll) + ll * ll * ll + 2 * ll * ll - ll - 2;
  const std::int64_t den = (ll - kk + 2) * (ll - kk + 1);
  return static_cast<double>(num) / static_cast<double>(den);
}

namespace detail {

inline void check_delta(const Window& w, double delta) {
  if (!(delta > 0.0) || !(delta < w.length() / 2.0))
    throw DomainError("requires 0 < delta < (b-a)/2");
}

}  // namespace detail

// I(L,k) for the delta-window coincidence function:
//   k <  L : f(L,k)(b-a)delta^(L+k-1) - h(L,k)delta^(L+k)
//   k == L : L^2(b-a)^2 delta^(2L-2) - 2L(L-1)(b-a)delta^(2L-1)
//            + (L-1)^2 delta^(2L),
// the k == L quadratic evaluated in factored form to keep the identity
// I(L,L) = I(L,0)^2 tight in floating point.
inline double I_Lk(int L, int k, const Window& w, double delta) {
  detail::check_Lk(L, k, L);
  detail::check_delta(w, delta);
  const double T = w.length();
  if (k == L) {
    const double q = L * T - (L - 1) * delta;
    return std::pow(delta, 2 * L - 2) * q * q;
  }
  return f_Lk(L, k) * T * std::pow(delta, L + k - 1) - h_Lk(L, k) * std::pow(delta, L + k);
}

// Expectation and variance of the delayed coincidence count for independent
// homogeneous Poisson trains with the given rates. The inner sum over
// subsets of size k is enumerated lexicographically; L is capped at 20
// (2^20 subsets) with an explicit error beyond.
inline MomentReport theoretical_moments(const IntensityVector& lambdas, const PatternSubset& subset,
                                        const Window& w, double delta) {
  const int L = static_cast<int>(subset.size());
  if (static_cast<int>(lambdas.size()) != L)
    throw DomainError("theoretical_moments: one rate per subset neuron required");
  if (L > 20) throw DomainError("theoretical_moments: L > 20 not supported");
  for (double l : lambdas)
    if (l < 0.0) throw DomainError("theoretical_moments: negative rate");

  MomentReport rep;
  double prod_all = 1.0;
  for (double l : lambdas) prod_all *= l;
  rep.m0 = prod_all * I_Lk(L, 0, w, delta);
  rep.per_k_terms.push_back(rep.m0);
  rep.variance = rep.m0;

  std::vector<int> comb;
  for (int k = 1; k <= L - 1; ++k) {
    comb.resize(k);
    for (int i = 0; i < k; ++i) comb[i] = i;
    double subset_sum = 0.0;
    while (true) {
      double prod = 1.0;
      int ci = 0;
      for (int j = 0; j < L; ++j) {
        const bool in_J = ci < k && comb[ci] == j;
        prod *= in_J ? lambdas[j] * lambdas[j] : lambdas[j];
        if (in_J) ++ci;
      }
      subset_sum += prod;
      // next lexicographic combination
      int i = k - 1;
      while (i >= 0 && comb[i] == L - k + i) --i;
      if (i < 0) break;
      ++comb[i];
      for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
    const double term = subset_sum * I_Lk(L, k, w, delta);
    rep.per_k_terms.push_back(term);
    rep.variance += term;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Independent numerical oracles for I(L,k). These never touch f/h: they
// evaluate the defining iterated integral directly, so they can vouch for the
// closed forms above.

enum class OracleMethod { quadrature, monte_carlo };

struct OracleResult {
  double value = 0.0;
  double error = 0.0;  // refinement-difference bound (quadrature) or standard error (MC)
};

namespace oracle_detail {

// Quadrature node counts per block dimension; L <= 3 gets grids fine enough
// for ~1e-6 relative agreement, L == 4 coarser ones so runtime stays in
// seconds.
struct GridSizes {
  int n1, n2, n3;
  static GridSizes pick(int L) {
    if (L <= 3) return {8001, 2401, 0};
    return {2001, 301, 121};
  }
};

// Volume of {x in [A,B]^dim : max(x) - min(x) <= delta} by iterated midpoint
// rule. The innermost coordinate is handled as an exact interval overlap, so
// every remaining integrand is continuous and the midpoint rule converges
// cleanly; per-axis limits are evaluated exactly.
inline double span_volume(double A, double B, int dim, double delta, const GridSizes& g) {
  const double W = B - A;
  if (!(W > 0.0)) return 0.0;
  switch (dim) {
    case 0:
      return 1.0;
    case 1:
      return W;
    case 2: {
      const int n = g.n2 * 2;  // 1D sweep; cheap
      const double h = W / n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = A + (i + 0.5) * h;
        const double len = std::min(x + delta, B) - std::max(x - delta, A);
        if (len > 0.0) acc += len;
      }
      return acc * h;
    }
    case 3: {
      const int n = g.n2;
      const double hs = W / n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double s = A + (i + 0.5) * hs;
        const double t_lo = std::max(-delta, A - s), t_hi = std::min(delta, B - s);
        if (t_hi <= t_lo) continue;
        const double ht = (t_hi - t_lo) / n;
        double inner = 0.0;
        for (int j = 0; j < n; ++j) {
          const double t = t_lo + (j + 0.5) * ht;
          const double w = std::min(s, s + t), v = std::max(s, s + t);
          const double len = std::min(w + delta, B) - std::max(v - delta, A);
          if (len > 0.0) inner += len;
        }
        acc += inner * ht;
      }
      return acc * hs;
    }
    case 4: {
      const int n = g.n3;
      const double hs = W / n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double s = A + (i + 0.5) * hs;
        const double t2_lo = std::max(-delta, A - s), t2_hi = std::min(delta, B - s);
        if (t2_hi <= t2_lo) continue;
        const double h2 = (t2_hi - t2_lo) / n;
        double acc2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double t2 = t2_lo + (j + 0.5) * h2;
          const double t3_lo = std::max(std::max(0.0, t2) - delta, A - s);
          const double t3_hi = std::min(std::min(0.0, t2) + delta, B - s);
          if (t3_hi <= t3_lo) continue;
          const double h3 = (t3_hi - t3_lo) / n;
          double acc3 = 0.0;
          for (int m = 0; m < n; ++m) {
            const double t3 = t3_lo + (m + 0.5) * h3;
            const double w = s + std::min(std::min(0.0, t2), t3);
            const double v = s + std::max(std::max(0.0, t2), t3);
            const double len = std::min(w + delta, B) - std::max(v - delta, A);
            if (len > 0.0) acc3 += len;
          }
          acc2 += acc3 * h3;
        }
        acc += acc2 * h2;
      }
      return acc * hs;
    }
    default:
      throw DomainError("span_volume: dimension > 4 not supported by quadrature");
  }
}

// Inner integral g(y) given the outer block's min/max: the x-block must live
// in [max(a, v-delta), min(b, w+delta)] and itself span at most delta.
inline double inner_volume(double a, double b, double w, double v, int k, double delta,
                           const GridSizes& g) {
  if (v - w > delta) return 0.0;
  return span_volume(std::max(a, v - delta), std::min(b, w + delta), k, delta, g);
}

inline double quad_I(int L, int k, double a, double b, double delta, const GridSizes& g) {
  if (k == 0) return span_volume(a, b, L, delta, g);
  if (k == L) {
    const double full = span_volume(a, b, L, delta, g);
    return full * full;
  }
  const int d_out = L - k;
  switch (d_out) {
    case 1: {
      const int n = g.n1;
      const double h = (b - a) / n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double y = a + (i + 0.5) * h;
        const double gv = inner_volume(a, b, y, y, k, delta, g);
        acc += gv * gv;
      }
      return acc * h;
    }
    case 2: {
      const int n = g.n2;
      const double hs = (b - a) / n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double s = a + (i + 0.5) * hs;
        const double t_lo = std::max(-delta, a - s), t_hi = std::min(delta, b - s);
        if (t_hi <= t_lo) continue;
        const double ht = (t_hi - t_lo) / n;
        double inner = 0.0;
        for (int j = 0; j < n; ++j) {
          const double t = t_lo + (j + 0.5) * ht;
          const double gv = inner_volume(a, b, std::min(s, s + t), std::max(s, s + t), k, delta, g);
          inner += gv * gv;
        }
        acc += inner * ht;
      }
      return acc * hs;
    }
    case 3: {
      const int n = g.n3;
      const double hs = (b - a) / n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double s = a + (i + 0.5) * hs;
        const double t2_lo = std::max(-delta, a - s), t2_hi = std::min(delta, b - s);
        if (t2_hi <= t2_lo) continue;
        const double h2 = (t2_hi - t2_lo) / n;
        double acc2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double t2 = t2_lo + (j + 0.5) * h2;
          const double t3_lo = std::max(std::max(0.0, t2) - delta, a - s);
          const double t3_hi = std::min(std::min(0.0, t2) + delta, b - s);
          if (t3_hi <= t3_lo) continue;
          const double h3 = (t3_hi - t3_lo) / n;
          double acc3 = 0.0;
          for (int m = 0; m < n; ++m) {
            const double t3 = t3_lo + (m + 0.5) * h3;
            const double w = s + std::min(std::min(0.0, t2), t3);
            const double v = s + std::max(std::max(0.0, t2), t3);
            const double gv = inner_volume(a, b, w, v, k, delta, g);
            acc3 += gv * gv;
          }
          acc2 += acc3 * h3;
        }
        acc += acc2 * h2;
      }
      return acc * hs;
    }
    default:
      throw DomainError("quadrature oracle: L - k > 3 not supported");
  }
}

}  // namespace oracle_detail

// Evaluates the defining integral of I(L,k) numerically, independently of
// the closed forms.
//
// Quadrature (L <= 4): iterated midpoint rule with exact per-axis limits and
// an exact interval-overlap innermost step; the reported error is the
// difference against a half-resolution pass.
//
// Monte Carlo (any L): importance-sampled outer block (one anchor uniform on
// [a,b], the rest as offsets uniform on [-delta, delta], reweighted), and for
// 0 < k < L two independent inner x-blocks drawn uniformly on the admissible
// box. The product of the two inner one-sample estimates makes the squared
// inner integral unbiased, so no nested-bias correction is needed; I(L,L)
// is the squared full-box estimate with a delta-method standard error.
inline OracleResult I_Lk_oracle(int L, int k, const Window& w, double delta, OracleMethod method,
                                std::uint64_t samples = 1'000'000, std::uint64_t seed = 0x0eac1e) {
  detail::check_Lk(L, k, L);
  detail::check_delta(w, delta);
  const double a = w.a, b = w.b;

  if (method == OracleMethod::quadrature) {
    if (L > 4) throw DomainError("quadrature oracle: L > 4 unaffordable");
    auto g = oracle_detail::GridSizes::pick(L);
    const double fine = oracle_detail::quad_I(L, k, a, b, delta, g);
    oracle_detail::GridSizes half{g.n1 / 2, g.n2 / 2, g.n3 / 2};
    const double coarse = oracle_detail::quad_I(L, k, a, b, delta, half);
    return {fine, std::abs(fine - coarse) + 1e-14 * std::abs(fine)};
  }

  if (samples < 1000) throw DomainError("monte carlo oracle: needs at least 1e3 samples");
  Rng rng(seed);

  const auto estimate_raw = [&](int kk, std::uint64_t n) -> OracleResult {
    // Estimates I(L,kk) for kk in {0,...,L-1}.
    const int d_out = L - kk;
    const double wy = (b - a) * std::pow(2.0 * delta, d_out - 1);
    std::vector<double> y(d_out), tup(L);
    double sum = 0.0, sum_sq = 0.0;
    for (std::uint64_t it = 0; it < n; ++it) {
      double value = 0.0;
      const double s = rng.uniform(a, b);
      y[0] = s;
      bool ok = true;
      for (int j = 1; j < d_out; ++j) {
        y[j] = s + rng.uniform(-delta, delta);
        if (y[j] < a || y[j] > b) ok = false;
      }
      if (ok) {
        double ymin = y[0], ymax = y[0];
        for (int j = 1; j < d_out; ++j) {
          ymin = std::min(ymin, y[j]);
          ymax = std::max(ymax, y[j]);
        }
        if (ymax - ymin <= delta) {
          if (kk == 0) {
            value = wy;
          } else {
            const double lo = std::max(a, ymax - delta), hi = std::min(b, ymin + delta);
            if (hi > lo) {
              double gpair = 1.0;
              for (int block = 0; block < 2 && gpair != 0.0; ++block) {
                for (int j = 0; j < d_out; ++j) tup[j] = y[j];
                double mn = ymin, mx = ymax;
                for (int j = 0; j < kk; ++j) {
                  const double x = rng.uniform(lo, hi);
                  tup[d_out + j] = x;
                  mn = std::min(mn, x);
                  mx = std::max(mx, x);
                }
                gpair *= (mx - mn <= delta) ? std::pow(hi - lo, kk) : 0.0;
              }
              value = wy * gpair;
            }
          }
        }
      }
      sum += value;
      sum_sq += value * value;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(n))};
  };

  if (k == L) {
    const OracleResult full = estimate_raw(0, samples);
    return {full.value * full.value, 2.0 * std::abs(full.value) * full.error};
  }
  return estimate_raw(k, samples);
}

}  // namespace coincide
