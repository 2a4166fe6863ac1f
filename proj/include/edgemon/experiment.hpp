#pragma once

// Experiment harness: config parsing, N/M sweeps, dual solves, CSV output,
// summary statistics and chart rendering.
//
// Config grammar: one `key = value` per line, '#' starts a comment, blank
// lines and surrounding whitespace are ignored. Keys:
//
//   n, k, m          dispatchers, servers per dispatcher, channels
//   t                horizon in slots (warmup included)
//   lambda, phi, psi arrival probability; idle->idle and busy->busy persistence
//   aoi_max          AoI cap
//   seed, reps       base seed; replication r uses seed + r
//   sweep            none | n | m
//   sweep_values     comma-separated positive integers
//   policies         comma-separated subset of ngm, round_robin, never_query
//   outdir           output directory
//   warmup           excluded leading slots (default t/10)
//   beta, gamma, dual_iters, eval_t, rvi_tol   dual/solver controls

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "edgemon/dual.hpp"
#include "edgemon/error.hpp"
#include "edgemon/policy.hpp"
#include "edgemon/sim.hpp"
#include "edgemon/svg_chart.hpp"

namespace edgemon {

enum class SweepVar { kNone, kN, kM };
enum class PolicyName { kNgm, kRoundRobin, kNeverQuery };

inline const char* to_string(PolicyName p) {
  switch (p) {
    case PolicyName::kNgm: return "ngm";
    case PolicyName::kRoundRobin: return "round_robin";
    case PolicyName::kNeverQuery: return "never_query";
  }
  return "?";
}

inline const char* to_string(SweepVar v) {
  switch (v) {
    case SweepVar::kNone: return "none";
    case SweepVar::kN: return "n";
    case SweepVar::kM: return "m";
  }
  return "?";
}

inline std::optional<PolicyName> parse_policy_name(const std::string& s) {
  if (s == "ngm") return PolicyName::kNgm;
  if (s == "round_robin" || s == "rr") return PolicyName::kRoundRobin;
  if (s == "never_query" || s == "never") return PolicyName::kNeverQuery;
  return std::nullopt;
}

// Largest state space solved at the default AoI cap before the desk-scale
// fallback kicks in.
inline constexpr StateId kDeskScaleStateLimit = 4'000'000;
inline constexpr int kDeskScaleAoiMax = 10;

struct ExperimentSpec {
  int n = 15;
  int k = 5;
  int m = 5;
  std::int64_t t = 200'000;
  double lambda = 0.3;
  double phi = 0.85;
  double psi = 0.90;
  int aoi_max = 20;
  bool aoi_max_explicit = false;
  std::uint64_t seed = 1;
  int reps = 10;
  SweepVar sweep = SweepVar::kNone;
  std::vector<int> sweep_values;
  std::vector<PolicyName> policies{PolicyName::kNgm, PolicyName::kRoundRobin, PolicyName::kNeverQuery};
  std::string outdir = "out";
  std::optional<std::int64_t> warmup;
  std::optional<double> beta;
  double gamma = 0.1;
  int dual_iters = 50;
  std::int64_t eval_t = 20'000;
  double rvi_tol = 1e-9;

  bool has_policy(PolicyName p) const { return std::find(policies.begin(), policies.end(), p) != policies.end(); }

  // Points of the sweep; a single point when sweep = none.
  std::vector<int> points() const {
    if (sweep == SweepVar::kNone) return {0};
    return sweep_values;
  }

  int n_at(int point) const { return sweep == SweepVar::kN ? point : n; }
  int m_at(int point) const { return sweep == SweepVar::kM ? point : m; }

  // AoI cap actually used: the default of 20 drops to 10 when NGM would have
  // to solve more than kDeskScaleStateLimit states; an explicit value is kept.
  int effective_aoi_max() const {
    if (aoi_max_explicit || !has_policy(PolicyName::kNgm)) return aoi_max;
    const double states = std::pow(2.0 * aoi_max, k);
    return states > static_cast<double>(kDeskScaleStateLimit) ? std::min(aoi_max, kDeskScaleAoiMax) : aoi_max;
  }

  RunConfig run_config(int point, std::uint64_t run_seed) const {
    RunConfig rc;
    rc.system = SystemConfig::homogeneous(n_at(point), k, lambda, phi, psi, effective_aoi_max());
    rc.channels = m_at(point);
    rc.horizon = t;
    rc.warmup = warmup;
    rc.seed = run_seed;
    return rc;
  }

  DualConfig dual_config() const {
    DualConfig d;
    d.beta = beta;
    d.gamma = gamma;
    d.iters = dual_iters;
    d.eval_horizon = eval_t;
    d.eval_seed = seed;
    d.rvi.tol = rvi_tol;
    return d;
  }

  // Range check of a single key; nullopt when the value is acceptable.
  std::optional<std::string> field_error(const std::string& key) const {
    auto err = [](const char* msg) { return std::optional<std::string>(msg); };
    if (key == "n" && n < 1) return err("must be >= 1");
    if (key == "k" && (k < 1 || k > kMaxServersPerDispatcher)) return err("must lie in [1, 16]");
    if (key == "m" && m < 0) return err("must be >= 0");
    if (key == "t" && t < 1) return err("must be >= 1");
    if (key == "lambda" && !(lambda > 0.0 && lambda <= 1.0)) return err("must lie in (0, 1]");
    if (key == "phi" && !(phi > 0.0 && phi < 1.0)) return err("must lie in (0, 1)");
    if (key == "psi" && !(psi > 0.0 && psi < 1.0)) return err("must lie in (0, 1)");
    if (key == "aoi_max" && (aoi_max < 1 || aoi_max > 4096)) return err("must lie in [1, 4096]");
    if (key == "reps" && reps < 1) return err("must be >= 1");
    if (key == "sweep_values") {
      for (int v : sweep_values) {
        if (v < 1) return err("values must be positive integers");
      }
    }
    if (key == "policies" && policies.empty()) return err("at least one policy required");
    if (key == "warmup" && warmup && *warmup < 0) return err("must be >= 0");
    if (key == "beta" && beta && !(*beta > 0.0)) return err("must be > 0");
    if (key == "gamma" && !(gamma >= 0.0)) return err("must be >= 0");
    if (key == "dual_iters" && dual_iters < 1) return err("must be >= 1");
    if (key == "eval_t" && eval_t < 1) return err("must be >= 1");
    if (key == "rvi_tol" && !(rvi_tol > 0.0)) return err("must be > 0");
    return std::nullopt;
  }

  void validate() const {
    auto fail = [](const std::string& key, const std::string& msg) {
      throw ValidationError("config key '" + key + "': " + msg);
    };
    for (const char* key : {"n", "k", "m", "t", "lambda", "phi", "psi", "aoi_max", "reps", "sweep_values",
                            "policies", "warmup", "beta", "gamma", "dual_iters", "eval_t", "rvi_tol"}) {
      if (auto e = field_error(key)) fail(key, *e);
    }
    if (sweep == SweepVar::kNone && !sweep_values.empty()) fail("sweep_values", "given but sweep = none");
    if (sweep != SweepVar::kNone && sweep_values.empty()) fail("sweep_values", "required when sweeping");
    if (warmup && *warmup >= t) fail("warmup", "must be < t");
    if (has_policy(PolicyName::kNgm)) {
      for (int p : points()) {
        if (m_at(p) < 1) fail("m", "NGM needs at least one channel");
      }
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return !s.empty() && end == s.c_str() + s.size() && std::isfinite(out);
  } else {
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return !s.empty() && ec == std::errc() && p == last;
  }
}

}  // namespace detail

// Applies one key=value setting. Throws ValidationError naming the key.
inline void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  auto bad = [&](const std::string& what) -> void {
    throw ValidationError("config key '" + key + "': " + what + " (value '" + value + "')");
  };
  auto integer = [&](auto& field) {
    if (!detail::parse_number(value, field)) bad("expected an integer");
  };
  auto real = [&](double& field) {
    if (!detail::parse_number(value, field)) bad("expected a number");
  };

  if (key == "n") integer(spec.n);
  else if (key == "k") integer(spec.k);
  else if (key == "m") integer(spec.m);
  else if (key == "t") integer(spec.t);
  else if (key == "lambda") real(spec.lambda);
  else if (key == "phi") real(spec.phi);
  else if (key == "psi") real(spec.psi);
  else if (key == "aoi_max") {
    integer(spec.aoi_max);
    spec.aoi_max_explicit = true;
  } else if (key == "seed") integer(spec.seed);
  else if (key == "reps") integer(spec.reps);
  else if (key == "sweep") {
    if (value == "none") spec.sweep = SweepVar::kNone;
    else if (value == "n" || value == "N") spec.sweep = SweepVar::kN;
    else if (value == "m" || value == "M") spec.sweep = SweepVar::kM;
    else bad("expected none, n or m");
  } else if (key == "sweep_values") {
    spec.sweep_values.clear();
    for (const auto& tok : detail::split_list(value)) {
      int v = 0;
      if (!detail::parse_number(tok, v)) bad("expected a comma-separated list of integers");
      spec.sweep_values.push_back(v);
    }
  } else if (key == "policies") {
    spec.policies.clear();
    for (const auto& tok : detail::split_list(value)) {
      const auto p = parse_policy_name(tok);
      if (!p) bad("unknown policy '" + tok + "'");
      if (!spec.has_policy(*p)) spec.policies.push_back(*p);
    }
  } else if (key == "outdir") {
    if (value.empty()) bad("must not be empty");
    spec.outdir = value;
  } else if (key == "warmup") {
    std::int64_t w = 0;
    integer(w);
    spec.warmup = w;
  } else if (key == "beta") {
    double b = 0;
    real(b);
    spec.beta = b;
  } else if (key == "gamma") real(spec.gamma);
  else if (key == "dual_iters") integer(spec.dual_iters);
  else if (key == "eval_t") integer(spec.eval_t);
  else if (key == "rvi_tol") real(spec.rvi_tol);
  else throw ValidationError("unknown config key '" + key + "'");
  if (auto e = spec.field_error(key)) bad(*e);
}

// Applies every setting in `text` to `spec` without the final cross-field
// validation. Errors are prefixed with "<origin>line N".
inline void apply_config_text(ExperimentSpec& spec, const std::string& text, const std::string& origin = "") {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto where = origin + "line " + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected key=value");
    try {
      apply_setting(spec, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
}

inline ExperimentSpec parse_config(const std::string& text) {
  ExperimentSpec spec;
  apply_config_text(spec, text);
  spec.validate();
  return spec;
}

// ---- Results ---------------------------------------------------------------

struct ResultRow {
  std::string policy;
  int n = 0;
  int k = 0;
  int m = 0;
  double lambda = 0.0;
  int aoi_max = 0;
  std::uint64_t seed = 0;
  std::int64_t t = 0;
  double success_rate = 0.0;
  double queries_per_slot = 0.0;
  std::optional<double> mu_star;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline constexpr const char* kResultsHeader =
    "policy,N,K,M,lambda,aoi_max,seed,T,success_rate,queries_per_slot,mu_star";

inline std::string format_row(const ResultRow& r) {
  auto real = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string s = r.policy + ',' + std::to_string(r.n) + ',' + std::to_string(r.k) + ',' + std::to_string(r.m) + ',' +
                  real(r.lambda) + ',' + std::to_string(r.aoi_max) + ',' + std::to_string(r.seed) + ',' +
                  std::to_string(r.t) + ',' + real(r.success_rate) + ',' + real(r.queries_per_slot) + ',';
  if (r.mu_star) s += real(*r.mu_star);
  return s;
}

inline ResultRow parse_row(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      f.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  f.push_back(cur);
  if (f.size() != 11) throw ValidationError("results.csv: expected 11 fields, got " + std::to_string(f.size()));
  ResultRow r;
  bool ok = !f[0].empty();
  r.policy = f[0];
  ok = ok && detail::parse_number(f[1], r.n) && detail::parse_number(f[2], r.k) && detail::parse_number(f[3], r.m) &&
       detail::parse_number(f[4], r.lambda) && detail::parse_number(f[5], r.aoi_max) &&
       detail::parse_number(f[6], r.seed) && detail::parse_number(f[7], r.t) &&
       detail::parse_number(f[8], r.success_rate) && detail::parse_number(f[9], r.queries_per_slot);
  if (!f[10].empty()) {
    double mu = 0;
    ok = ok && detail::parse_number(f[10], mu);
    r.mu_star = mu;
  }
  if (!ok) throw ValidationError("results.csv: malformed row '" + line + "'");
  return r;
}

inline std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kResultsHeader) {
    throw ValidationError("results.csv: missing or unexpected header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    rows.push_back(parse_row(line));
  }
  return rows;
}

// ---- Statistics ------------------------------------------------------------

struct PointSummary {
  std::string policy;
  double x = 0.0;  // sweep coordinate
  int count = 0;
  double mean_success = 0.0;
  double ci95_success = 0.0;  // half-width, t-distribution over replications
  double mean_queries = 0.0;
  std::optional<double> mu_star;
};

inline double ci95_half_width(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  const boost::math::students_t dist(static_cast<double>(v.size() - 1));
  const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
  return tq * sd / std::sqrt(static_cast<double>(v.size()));
}

inline double sweep_coordinate(const ResultRow& r, SweepVar v) {
  switch (v) {
    case SweepVar::kN: return r.n;
    case SweepVar::kM: return r.m;
    case SweepVar::kNone: return 0.0;
  }
  return 0.0;
}

// Groups rows by (policy, sweep coordinate), keeping first-seen policy order
// and ascending coordinates. Replications never pool across points.
inline std::vector<PointSummary> summarize(const std::vector<ResultRow>& rows, SweepVar v) {
  std::vector<std::string> policy_order;
  std::map<std::pair<std::string, double>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    if (std::find(policy_order.begin(), policy_order.end(), r.policy) == policy_order.end()) {
      policy_order.push_back(r.policy);
    }
    groups[{r.policy, sweep_coordinate(r, v)}].push_back(&r);
  }
  std::vector<PointSummary> out;
  for (const auto& p : policy_order) {
    for (const auto& [key, members] : groups) {
      if (key.first != p) continue;
      PointSummary s;
      s.policy = p;
      s.x = key.second;
      s.count = static_cast<int>(members.size());
      std::vector<double> sr;
      for (const auto* r : members) {
        sr.push_back(r->success_rate);
        s.mean_queries += r->queries_per_slot;
        if (r->mu_star) s.mu_star = r->mu_star;
      }
      for (double x : sr) s.mean_success += x;
      s.mean_success /= static_cast<double>(sr.size());
      s.mean_queries /= static_cast<double>(sr.size());
      s.ci95_success = ci95_half_width(sr);
      out.push_back(s);
    }
  }
  return out;
}

inline SweepVar infer_sweep(const std::vector<ResultRow>& rows) {
  auto varies = [&](auto field) {
    for (const auto& r : rows) {
      if (field(r) != field(rows.front())) return true;
    }
    return false;
  };
  if (rows.empty()) return SweepVar::kNone;
  if (varies([](const ResultRow& r) { return r.n; })) return SweepVar::kN;
  if (varies([](const ResultRow& r) { return r.m; })) return SweepVar::kM;
  return SweepVar::kNone;
}

inline std::string render_chart(const std::vector<ResultRow>& rows, SweepVar v) {
  const auto summary = summarize(rows, v);
  std::vector<svg::Series> series;
  for (const auto& s : summary) {
    if (series.empty() || series.back().name != s.policy) series.push_back({s.policy, {}});
    series.back().points.push_back({s.x, s.mean_success, s.ci95_success});
  }
  svg::ChartSpec spec;
  switch (v) {
    case SweepVar::kN: spec.x_label = "number of dispatchers N"; break;
    case SweepVar::kM: spec.x_label = "number of channels M"; break;
    case SweepVar::kNone: spec.x_label = "(single configuration)"; break;
  }
  spec.y_label = "average job success rate";
  spec.title = "Job success rate by query policy";
  return svg::render_line_chart(spec, series);
}

inline std::string format_summary(const std::vector<PointSummary>& summary, SweepVar v) {
  std::ostringstream os;
  os << "# sweep=" << to_string(v) << "; ci95 = 95% t-interval half-width over replications\n";
  os << "policy,x,reps,mean_success_rate,ci95,mean_queries_per_slot,mu_star\n";
  for (const auto& s : summary) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%g,%d,%.6f,%.6f,%.6f,", s.policy.c_str(), s.x, s.count, s.mean_success,
                  s.ci95_success, s.mean_queries);
    os << buf;
    if (s.mu_star) {
      std::snprintf(buf, sizeof buf, "%.6g", *s.mu_star);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

// ---- Orchestration ---------------------------------------------------------

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<PointSummary> summary;
  int aoi_max_used = 0;
  std::int64_t budget_checked_slots = 0;
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs every (sweep point, policy, replication). Writes results.csv (flushed
// after each sweep point), summary.txt, chart.svg and one dual trace per
// sweep point when NGM is requested.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {}) {
  spec.validate();
  namespace fs = std::filesystem;
  const fs::path dir(spec.outdir);
  fs::create_directories(dir);

  ExperimentResult result;
  result.aoi_max_used = spec.effective_aoi_max();

  std::ofstream csv(dir / "results.csv", std::ios::binary);
  if (!csv) throw ValidationError("cannot write " + (dir / "results.csv").string());
  csv << kResultsHeader << '\n';

  for (int point : spec.points()) {
    const auto base = spec.run_config(point, spec.seed);
    std::optional<DualResult> dual;
    if (spec.has_policy(PolicyName::kNgm)) {
      try {
        dual = solve_mu(spec.dual_config(), base.system, base.channels);
      } catch (const DualError& e) {
        std::ofstream tr(dir / ("dual_trace_N" + std::to_string(base.system.num_dispatchers) + "_M" +
                                std::to_string(base.channels) + ".csv"),
                         std::ios::binary);
        write_trace_csv(tr, e.trace());
        csv.flush();
        throw;
      }
      std::ofstream tr(dir / ("dual_trace_N" + std::to_string(base.system.num_dispatchers) + "_M" +
                              std::to_string(base.channels) + ".csv"),
                       std::ios::binary);
      write_trace_csv(tr, dual->trace);
      if (progress) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "N=%d M=%d: mu*=%.6g (relaxed rate %.4f)", base.system.num_dispatchers,
                      base.channels, dual->mu_star, dual->query_rate);
        progress(buf);
      }
    }
    for (PolicyName p : spec.policies) {
      for (int r = 0; r < spec.reps; ++r) {
        auto rc = spec.run_config(point, spec.seed + static_cast<std::uint64_t>(r));
        Policy policy = NeverQueryPolicy{};
        if (p == PolicyName::kNgm) policy = NgmPolicy{dual->tables.solved(), dual->mu_star};
        if (p == PolicyName::kRoundRobin) policy = RoundRobinPolicy{};
        const auto metrics = run(rc, std::move(policy));
        result.budget_checked_slots += metrics.budget_checked_slots;
        ResultRow row;
        row.policy = to_string(p);
        row.n = rc.system.num_dispatchers;
        row.k = rc.system.servers_per_dispatcher;
        row.m = rc.channels;
        row.lambda = spec.lambda;
        row.aoi_max = rc.system.aoi_max;
        row.seed = rc.seed;
        row.t = rc.horizon;
        row.success_rate = metrics.success_rate;
        row.queries_per_slot = metrics.queries_per_slot;
        if (p == PolicyName::kNgm) row.mu_star = dual->mu_star;
        csv << format_row(row) << '\n';
        result.rows.push_back(std::move(row));
      }
    }
    csv.flush();
  }

  result.summary = summarize(result.rows, spec.sweep);
  {
    std::ofstream os(dir / "summary.txt", std::ios::binary);
    os << format_summary(result.summary, spec.sweep);
    if (result.aoi_max_used != spec.aoi_max) {
      os << "# note: aoi_max reduced from " << spec.aoi_max << " to " << result.aoi_max_used
         << " to keep the NGM state space tractable; set aoi_max explicitly to override\n";
    }
  }
  {
    std::ofstream os(dir / "chart.svg", std::ios::binary);
    os << render_chart(result.rows, spec.sweep);
  }
  return result;
}

}  // namespace edgemon
