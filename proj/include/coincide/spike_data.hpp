#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "coincide/errors.hpp"

namespace coincide {

// Observation window [a, b] in seconds.
struct Window {
  double a = 0.0;
  double b = 0.0;

  Window() = default;
  Window(double a_, double b_) : a(a_), b(b_) {
    if (!(b > a)) throw DomainError("Window: b must be greater than a");
  }
  double length() const { return b - a; }
};

// Sorted spike times of one neuron on a window. Strictly increasing: exact
// ties signal duplicated data (a continuous process is a.s. tie-free) and
// are rejected by validation.
struct SpikeTrain {
  std::vector<double> times;

  SpikeTrain() = default;
  explicit SpikeTrain(std::vector<double> t) : times(std::move(t)) {}

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

// One trial: n spike trains sharing one window. Neuron ids are 1-based in
// every public interface; trains[i] holds neuron i+1.
struct Trial {
  std::vector<SpikeTrain> trains;
  Window window;

  std::size_t neuron_count() const { return trains.size(); }
};

// M i.i.d. trials of n neurons on a common window.
struct TrialSet {
  std::vector<Trial> trials;
  std::size_t neuron_count = 0;

  std::size_t trial_count() const { return trials.size(); }
  const Window& window() const {
    if (trials.empty()) throw DomainError("TrialSet: no trials");
    return trials.front().window;
  }

  // Shifts all windows and times so the common window starts at 0. Every
  // statistic in this library depends only on b-a and relative positions.
  TrialSet rebased() const {
    TrialSet out = *this;
    for (auto& trial : out.trials) {
      const double shift = trial.window.a;
      trial.window = Window(0.0, trial.window.b - shift);
      for (auto& train : trial.trains)
        for (auto& t : train.times) t -= shift;
    }
    return out;
  }
};

// A tested subset of neurons: sorted 1-based indices, |subset| >= 2.
class PatternSubset {
 public:
  PatternSubset(std::initializer_list<std::size_t> ids) : PatternSubset(std::vector<std::size_t>(ids)) {}

  explicit PatternSubset(std::vector<std::size_t> ids) : indices_(std::move(ids)) {
    std::sort(indices_.begin(), indices_.end());
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
      throw DomainError("PatternSubset: duplicate neuron index");
    if (indices_.size() < 2) throw DomainError("PatternSubset: needs at least two neurons");
    if (!indices_.empty() && indices_.front() == 0)
      throw DomainError("PatternSubset: neuron indices are 1-based");
  }

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }

  void check_against(const TrialSet& ts) const {
    if (indices_.back() > ts.neuron_count)
      throw DomainError("PatternSubset: index exceeds neuron count");
  }

  std::string label() const {
    std::string s = "{";
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(indices_[i]);
    }
    return s + "}";
  }

 private:
  std::vector<std::size_t> indices_;
};

// One invariant violation found by validate(), with coordinates.
struct Violation {
  std::size_t trial = 0;   // 1-based, 0 = set-level
  std::size_t neuron = 0;  // 1-based, 0 = trial-level
  std::string message;
};

// Reports every invariant violation; an empty result means the set is valid.
inline std::vector<Violation> validate(const TrialSet& ts) {
  std::vector<Violation> out;
  if (ts.trials.empty()) {
    out.push_back({0, 0, "no trials"});
    return out;
  }
  const double ref_len = ts.trials.front().window.length();
  for (std::size_t k = 0; k < ts.trials.size(); ++k) {
    const Trial& trial = ts.trials[k];
    if (trial.neuron_count() != ts.neuron_count)
      out.push_back({k + 1, 0, "inconsistent neuron count (" + std::to_string(trial.neuron_count()) +
                                   " vs " + std::to_string(ts.neuron_count) + ")"});
    if (!(trial.window.b > trial.window.a)) out.push_back({k + 1, 0, "empty or inverted window"});
    if (std::abs(trial.window.length() - ref_len) > 1e-12 * std::max(1.0, ref_len))
      out.push_back({k + 1, 0, "window length differs across trials"});
    for (std::size_t l = 0; l < trial.trains.size(); ++l) {
      const auto& t = trial.trains[l].times;
      for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i] < t[i - 1]) {
          out.push_back({k + 1, l + 1, "not sorted"});
          break;
        }
        if (t[i] == t[i - 1]) {
          out.push_back({k + 1, l + 1, "duplicate spike time"});
          break;
        }
      }
      for (double x : t) {
        if (x < trial.window.a || x > trial.window.b) {
          out.push_back({k + 1, l + 1, "time outside window"});
          break;
        }
      }
    }
  }
  return out;
}

enum class FileFormat { csv, json };

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct CsvHeader {
  double window_a = 0.0, window_b = 0.0;
  std::size_t neurons = 0, trials = 0;
  bool have_a = false, have_b = false, have_n = false, have_m = false;
  bool complete() const { return have_a && have_b && have_n && have_m; }
};

inline void parse_header_comment(const std::string& line, CsvHeader& h) {
  std::istringstream is(line.substr(1));
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    try {
      if (key == "window_a") { h.window_a = std::stod(val); h.have_a = true; }
      else if (key == "window_b") { h.window_b = std::stod(val); h.have_b = true; }
      else if (key == "neurons") { h.neurons = std::stoul(val); h.have_n = true; }
      else if (key == "trials") { h.trials = std::stoul(val); h.have_m = true; }
    } catch (const std::exception&) {
      throw ParseError("bad header value: " + tok);
    }
  }
}

}  // namespace detail

// Reads a trial set. CSV carries its window/shape in leading comment lines
//   # window_a=<float> window_b=<float> neurons=<int> trials=<int>
// followed by the header row `trial_id,neuron_id,spike_time`. JSON uses
//   {"window":{"a":..,"b":..}, "neuron_count":n, "trials":[[[times...]...]...]}.
inline TrialSet load_trial_set(const std::string& path, FileFormat format) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);

  TrialSet ts;
  if (format == FileFormat::csv) {
    detail::CsvHeader h;
    std::string line;
    bool saw_column_header = false;
    std::size_t line_no = 0;
    std::vector<std::tuple<std::size_t, std::size_t, double>> rows;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        detail::parse_header_comment(line, h);
        continue;
      }
      if (!saw_column_header) {
        if (line != "trial_id,neuron_id,spike_time")
          throw ParseError("line " + std::to_string(line_no) + ": expected column header");
        saw_column_header = true;
        continue;
      }
      std::istringstream is(line);
      std::string f1, f2, f3;
      if (!std::getline(is, f1, ',') || !std::getline(is, f2, ',') || !std::getline(is, f3))
        throw ParseError("line " + std::to_string(line_no) + ": expected 3 comma-separated fields");
      try {
        rows.emplace_back(std::stoul(f1), std::stoul(f2), std::stod(f3));
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad field");
      }
    }
    if (!h.complete()) throw ParseError("missing window/neurons/trials header comments");
    if (!(h.window_b > h.window_a)) throw ParseError("window_b must exceed window_a");
    if (h.neurons == 0 || h.trials == 0) throw ParseError("neurons and trials must be positive");

    ts.neuron_count = h.neurons;
    ts.trials.assign(h.trials, Trial{std::vector<SpikeTrain>(h.neurons), Window(h.window_a, h.window_b)});
    for (const auto& [trial_id, neuron_id, t] : rows) {
      if (trial_id == 0 || trial_id > h.trials) throw ParseError("trial_id out of range");
      if (neuron_id == 0 || neuron_id > h.neurons) throw ParseError("neuron_id out of range");
      if (t < h.window_a || t > h.window_b) throw ParseError("time outside window");
      ts.trials[trial_id - 1].trains[neuron_id - 1].times.push_back(t);
    }
  } else {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad JSON: ") + e.what());
    }
    try {
      const Window w(j.at("window").at("a").get<double>(), j.at("window").at("b").get<double>());
      ts.neuron_count = j.at("neuron_count").get<std::size_t>();
      for (const auto& jt : j.at("trials")) {
        Trial trial;
        trial.window = w;
        for (const auto& jn : jt) trial.trains.emplace_back(jn.get<std::vector<double>>());
        ts.trials.push_back(std::move(trial));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad trial-set JSON: ") + e.what());
    }
    if (ts.trials.empty()) throw ParseError("trials must be non-empty");
    const Window& w = ts.trials.front().window;
    for (const auto& trial : ts.trials)
      for (const auto& train : trial.trains)
        for (double t : train.times)
          if (t < w.a || t > w.b) throw ParseError("time outside window");
  }

  for (auto& trial : ts.trials)
    for (auto& train : trial.trains) std::sort(train.times.begin(), train.times.end());

  for (const auto& v : validate(ts)) {
    std::string where = " (trial " + std::to_string(v.trial) + ", neuron " + std::to_string(v.neuron) + ")";
    throw ParseError(v.message + where);
  }
  return ts;
}

inline void write_trial_set(const TrialSet& ts, const std::string& path, FileFormat format) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  if (ts.trials.empty()) throw DomainError("write_trial_set: empty trial set");
  const Window& w = ts.window();

  if (format == FileFormat::csv) {
    out << "# window_a=" << detail::format_double(w.a) << " window_b=" << detail::format_double(w.b)
        << " neurons=" << ts.neuron_count << " trials=" << ts.trial_count() << "\n";
    out << "trial_id,neuron_id,spike_time\n";
    for (std::size_t k = 0; k < ts.trials.size(); ++k)
      for (std::size_t l = 0; l < ts.trials[k].trains.size(); ++l)
        for (double t : ts.trials[k].trains[l].times)
          out << (k + 1) << ',' << (l + 1) << ',' << detail::format_double(t) << "\n";
  } else {
    nlohmann::json j;
    j["window"] = {{"a", w.a}, {"b", w.b}};
    j["neuron_count"] = ts.neuron_count;
    auto& jt = j["trials"] = nlohmann::json::array();
    for (const auto& trial : ts.trials) {
      nlohmann::json one = nlohmann::json::array();
      for (const auto& train : trial.trains) one.push_back(train.times);
      jt.push_back(std::move(one));
    }
    out << j.dump(2) << "\n";
  }
  if (!out) throw ParseError("write failed: " + path);
}

}  // namespace coincide
