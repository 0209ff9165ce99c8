#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pssim/assign.hpp"
#include "pssim/config.hpp"
#include "pssim/coupling.hpp"
#include "pssim/decomposition.hpp"
#include "pssim/diagnostics.hpp"
#include "pssim/error.hpp"
#include "pssim/oracle/autonormal.hpp"
#include "pssim/oracle/enumeration.hpp"
#include "pssim/oracle/transfer_matrix.hpp"
#include "pssim/parallel.hpp"
#include "pssim/sketch.hpp"

// Command implementations behind the pssim executable. Each returns the
// process exit code; errors escape as pssim::Error and are mapped by main.
namespace pssim::cli {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
  std::optional<int> range_L;     // diagnose --L
  std::size_t steps_N = 20;       // diagnose --N
  double time_t = 1.0;            // diagnose --t
  std::string suite = "ladder";   // validate --suite
};

namespace detail {

inline std::uint64_t require_seed(const RunConfig& cfg, const Options& opts) {
  if (opts.seed) return *opts.seed;
  if (cfg.sampler.seed) return *cfg.sampler.seed;
  throw ConfigError("a seed is required (sampler.seed or --seed); wall-clock seeding is not supported");
}

// Output stream: --out, then output.path, else the given fallback.
class OutputTarget {
 public:
  OutputTarget(const std::optional<std::string>& path, std::ostream& fallback) : stream_(&fallback) {
    if (path && *path != "-") {
      file_ = std::make_unique<std::ofstream>(*path, std::ios::binary);
      if (!*file_) throw ConfigError("cannot open output file " + *path);
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

inline std::string csv_field(const std::string& s) {
  if (s.find(',') == std::string::npos) return s;
  return "\"" + s + "\"";
}

inline std::string fmt(double x, int precision = 12) {
  std::ostringstream os;
  os << std::setprecision(precision) << x;
  return os.str();
}

inline std::string fmt_opt(const std::optional<double>& x) { return x ? fmt(*x) : std::string("no guarantee"); }

template <class Model>
constexpr bool is_pair = std::is_same_v<Model, CoupledIsingModel>;

template <class Model>
nlohmann::ordered_json value_json(double v) {
  if constexpr (is_pair<Model>) return nlohmann::ordered_json::array({pair_code::lower(v), pair_code::upper(v)});
  else return v;
}

inline std::optional<double> model_beta_c(const RunConfig& cfg) {
  if (cfg.model_kind == "autonormal") return std::nullopt;
  const auto key = cfg.model_kind == "ising-pair" && cfg.model.contains("kernel_upper") ? "kernel_upper" : "kernel";
  return beta_critical(parse_kernel(cfg.model.value(key, json()), cfg.d));
}

template <class Model>
int sample(const RunConfig& cfg, const KalikowDecomposition<Model>& decomp, const Options& opts, std::ostream& out,
           std::ostream& err) {
  const auto seed = require_seed(cfg, opts);
  const auto& sites = cfg.sampler.sites;
  SamplerOptions sopts;
  sopts.step_cap = cfg.sampler.step_cap;
  if (!cfg.sampler.horizon && !sopts.step_cap && !decomp.subcritical())
    throw SupercriticalError("model is supercritical (gamma = " + pssim::detail::format_gamma(decomp.gamma()) +
                                 " >= 1); set sampler.step_cap to run in impatient mode",
                             decomp.gamma());
  const auto initial = parse_initial(cfg.sampler.initial, seed);
  auto results = run_replicas<AssignmentResult>(cfg.sampler.replicas, [&](std::size_t r) {
    Stream rng = replica_stream(seed, r, Lane::events);
    if (cfg.sampler.horizon) {
      Stream clock = replica_stream(seed, r, Lane::clock);
      return finite_horizon_sample(sites, *cfg.sampler.horizon, initial, decomp, rng, clock, sopts);
    }
    return perfect_sample(sites, decomp, rng, sopts);
  });

  OutputTarget target(opts.out_path ? opts.out_path : cfg.output.path, out);
  auto& os = target.get();
  const bool csv = cfg.output.format == "csv";
  if (csv) {
    os << "replica";
    for (const auto& s : sites) os << ',' << csv_field(s.str());
    os << ",n_stop\n";
  }
  std::map<std::size_t, std::size_t> histogram;
  std::map<Site, double> sums;
  std::size_t truncated = 0;
  double bias = 0.0;
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& res = results[r];
    ++histogram[res.n_stop];
    if (res.truncated) ++truncated;
    bias = std::max(bias, res.bias_bound);
    for (const auto& [s, v] : res.spins) sums[s] += v.value();
    if (csv) {
      os << r;
      for (const auto& s : sites) os << ',' << fmt(res.value(s), 17);
      os << ',' << res.n_stop << '\n';
      continue;
    }
    nlohmann::ordered_json line;
    line["replica"] = r;
    nlohmann::ordered_json vals = nlohmann::ordered_json::object();
    for (const auto& s : sites) vals[s.str()] = value_json<Model>(res.value(s));
    line["sites"] = vals;
    line["n_stop"] = res.n_stop;
    if (res.bias_bound > 0.0 || sopts.step_cap) {
      line["truncated"] = res.truncated;
      line["bias_bound"] = res.bias_bound;
    }
    os << line.dump() << '\n';
  }
  os.flush();

  nlohmann::ordered_json summary;
  summary["replicas"] = results.size();
  summary["gamma"] = decomp.gamma();
  nlohmann::ordered_json means = nlohmann::ordered_json::object();
  for (const auto& [s, total] : sums) means[s.str()] = total / static_cast<double>(results.size());
  summary["means"] = means;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [n, c] : histogram) hist[std::to_string(n)] = c;
  summary["n_stop_histogram"] = hist;
  summary["truncated"] = truncated;
  if (bias > 0.0) summary["bias_bound"] = bias;
  err << summary.dump() << '\n';
  return static_cast<int>(ExitCode::ok);
}

template <class Model>
int diagnose(const RunConfig& cfg, const KalikowDecomposition<Model>& decomp, const Options& opts, std::ostream& out) {
  const Site origin(cfg.d);
  const auto report = bounds_report(decomp, model_beta_c(cfg));
  const int L = opts.range_L.value_or(decomp.top());
  OutputTarget target(opts.out_path ? opts.out_path : cfg.output.path, out);
  auto& os = target.get();
  os << "model            " << cfg.model_kind << " (d = " << cfg.d << ")\n";
  os << "mass bound M     " << fmt(decomp.mass(origin)) << '\n';
  os << "ladder top       " << decomp.top() << (decomp.exact() ? " (interaction range)" : " (range cap)") << '\n';
  os << "gamma            " << fmt(report.gamma) << (report.subcritical ? "  subcritical" : "  SUPERCRITICAL") << '\n';
  os << "beta_c           " << (report.beta_c ? fmt(*report.beta_c) : std::string("n/a")) << '\n';
  os << "P(N_STOP > " << opts.steps_N << ")    " << fmt_opt(report.nstop_tail(opts.steps_N, cfg.sampler.sites.size()))
     << '\n';
  os << "convergence(t=" << fmt(opts.time_t, 6) << ") " << fmt_opt(report.convergence(opts.time_t, cfg.sampler.sites.size()))
     << '\n';
  os << "steps bias(N=" << opts.steps_N << ")  " << fmt_opt(report.steps_bias(opts.steps_N, cfg.sampler.sites.size()))
     << '\n';
  os << "range bias(L=" << L << ")   " << fmt_opt(report.range_bias(L)) << "\n\n";
  os << "k,alpha,lambda,partial_sum,|V(k)|,gamma_contribution\n";
  for (const auto& row : ladder_rows(decomp, origin))
    os << row.k << ',' << fmt(row.alpha, 17) << ',' << fmt(row.lambda, 17) << ',' << fmt(row.partial_sum, 17) << ','
       << row.ball_size << ',' << fmt(row.gamma_contribution, 17) << '\n';
  return static_cast<int>(ExitCode::ok);
}

inline int dbar(const RunConfig& cfg, const KalikowDecomposition<CoupledIsingModel>& decomp, const Options& opts,
                std::ostream& out, std::ostream& err) {
  const auto seed = require_seed(cfg, opts);
  if (!cfg.sampler.step_cap && !decomp.subcritical())
    throw SupercriticalError("pair model is supercritical (gamma = " + pssim::detail::format_gamma(decomp.gamma()) +
                                 " >= 1); set sampler.step_cap to run in impatient mode",
                             decomp.gamma());
  SamplerOptions sopts;
  sopts.step_cap = cfg.sampler.step_cap;
  const auto rep = estimate_dbar(cfg.sampler.sites, decomp, cfg.sampler.replicas, seed, sopts);
  OutputTarget target(opts.out_path ? opts.out_path : cfg.output.path, out);
  auto& os = target.get();
  os << "site,estimate,ci_low,ci_high\n";
  for (const auto& row : rep.sites)
    os << csv_field(row.site.str()) << ',' << fmt(row.estimate, 17) << ',' << fmt(row.ci_low, 17) << ','
       << fmt(row.ci_high, 17) << '\n';
  os << "sup," << fmt(rep.sup.estimate, 17) << ',' << fmt(rep.sup.ci_low, 17) << ',' << fmt(rep.sup.ci_high, 17) << '\n';
  err << "{\"replicas\":" << rep.replicas << ",\"order_violations\":" << rep.order_violations << "}\n";
  return rep.order_violations ? static_cast<int>(ExitCode::internal) : static_cast<int>(ExitCode::ok);
}

struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

// Engine ladder against brute-force enumeration (finite A, truncated kernel).
template <class Model>
std::vector<Check> validate_ladder(const RunConfig& cfg, const KalikowDecomposition<Model>& decomp) {
  oracle::FiniteSpec spec;
  if constexpr (is_pair<Model>) {
    const auto& m = decomp.model();
    const auto& lo = m.lower_kernel();
    const auto& up = m.upper_kernel();
    if (lo.family() != InteractionKernel::Family::nearest_neighbor ||
        up.family() != InteractionKernel::Family::nearest_neighbor)
      throw ConfigError("ladder suite for ising-pair supports nearest-neighbor kernels");
    const Site e = [&] {
      Site s(cfg.d);
      s[0] = 1;
      return s;
    }();
    spec = oracle::ising_pair_spec(cfg.d, m.beta(), lo.coupling(e), up.coupling(e), m.lower_field(), m.upper_field());
  } else if constexpr (std::is_same_v<Model, ExponentialModel>) {
    const auto& m = decomp.model();
    const auto& space = m.state_space();
    if (!space.is_finite() || !m.kernel().range())
      throw ConfigError("ladder suite needs a finite state space and a truncated kernel");
    if (m.field().is_alternating()) throw ConfigError("ladder suite supports constant fields only");
    spec.d = cfg.d;
    spec.range = std::max(*m.kernel().range(), 0);
    spec.values = space.values();
    spec.weights = space.weights();
    const auto offs = oracle::ball(cfg.d, spec.range);
    std::vector<double> couplings;
    for (const auto& o : offs) couplings.push_back(m.kernel().coupling(Site::from(o)));
    const double beta = m.beta();
    const double h = m.field().for_orbit(0);
    const auto values = spec.values;
    spec.rate = [=](std::size_t a, const std::vector<std::size_t>& c) {
      double field = h;
      for (std::size_t n = 0; n < c.size(); ++n) field += couplings[n] * values[c[n]];
      return std::exp(beta * values[a] * field);
    };
  } else {
    throw ConfigError("ladder suite needs a finite state space (ising or ising-pair)");
  }
  const auto table = oracle::enumerate_decomposition(spec);
  const Site origin(cfg.d);
  double worst = std::abs(table.mass - decomp.mass(origin));
  for (int k = -1; k <= spec.range; ++k) {
    const auto idx = static_cast<std::size_t>(k + 1);
    worst = std::max(worst, std::abs(table.alpha[idx] - decomp.alpha(origin, k)));
    worst = std::max(worst, std::abs(table.lambda[idx] - decomp.lambda(origin, k)));
  }
  const double tol = 1e-12 * std::max(1.0, table.mass);
  return {{"ladder", worst <= tol, "max |delta| = " + fmt(worst, 3) + " (tolerance " + fmt(tol, 3) + ")"}};
}

template <class Model>
std::vector<Check> validate_law(const RunConfig& cfg, const KalikowDecomposition<Model>& decomp, std::uint64_t seed) {
  std::vector<Check> out;
  const std::size_t n = cfg.sampler.replicas;
  if constexpr (std::is_same_v<Model, ExponentialModel>) {
    const auto& m = decomp.model();
    const auto& k = m.kernel();
    const auto& space = m.state_space();
    if (cfg.d != 1 || k.family() != InteractionKernel::Family::nearest_neighbor || !space.is_finite() ||
        space.values() != std::vector<double>{-1.0, 1.0} || m.field().is_alternating())
      throw ConfigError("law suite supports the 1-d nearest-neighbor Ising model on {-1, 1}");
    pssim::detail::require_subcritical(decomp);
    const double coupling = k.coupling(Site{1});
    const auto exact = oracle::ising_1d_exact(m.beta(), coupling, m.field().for_orbit(0));
    const std::vector<Site> window{Site{0}, Site{1}};
    auto res = run_replicas<std::pair<double, double>>(n, [&](std::size_t r) {
      Stream rng = replica_stream(seed, r);
      const auto s = perfect_sample(window, decomp, rng);
      return std::pair{s.value(Site{0}), s.value(Site{0}) * s.value(Site{1})};
    });
    double m1 = 0.0, m2 = 0.0, c1 = 0.0, c2 = 0.0;
    for (const auto& [a, b] : res) {
      m1 += a;
      m2 += a * a;
      c1 += b;
      c2 += b * b;
    }
    const double nn = static_cast<double>(n);
    const double mean = m1 / nn, corr = c1 / nn;
    const double se_m = std::sqrt(std::max(0.0, m2 / nn - mean * mean) / nn);
    const double se_c = std::sqrt(std::max(0.0, c2 / nn - corr * corr) / nn);
    out.push_back({"law.magnetization", std::abs(mean - exact.magnetization()) <= 3 * se_m + 1e-12,
                   "empirical " + fmt(mean, 6) + " vs exact " + fmt(exact.magnetization(), 6) + " (s.e. " +
                       fmt(se_m, 3) + ")"});
    out.push_back({"law.correlation", std::abs(corr - exact.nearest_correlation()) <= 3 * se_c + 1e-12,
                   "empirical " + fmt(corr, 6) + " vs exact " + fmt(exact.nearest_correlation(), 6) + " (s.e. " +
                       fmt(se_c, 3) + ")"});
  } else if constexpr (std::is_same_v<Model, AutonormalModel>) {
    const auto& m = decomp.model();
    if (m.kernel().absolute_total() != 0.0 || m.field().is_alternating())
      throw ConfigError("law suite for autonormal needs a zero kernel and constant field");
    const Site origin(cfg.d);
    auto res = run_replicas<double>(n, [&](std::size_t r) {
      Stream rng = replica_stream(seed, r);
      return perfect_sample({origin}, decomp, rng).value(origin);
    });
    double s1 = 0.0, s2 = 0.0;
    for (double v : res) {
      s1 += v;
      s2 += v * v;
    }
    const double nn = static_cast<double>(n);
    const double mean = s1 / nn;
    const double se = std::sqrt(std::max(0.0, s2 / nn - mean * mean) / nn);
    const double exact = oracle::truncated_normal_mean(m.field().for_orbit(0), m.sigma());
    out.push_back({"law.mean", std::abs(mean - exact) <= 3 * se,
                   "empirical " + fmt(mean, 6) + " vs exact " + fmt(exact, 6) + " (s.e. " + fmt(se, 3) + ")"});
  } else {
    (void)decomp;
    (void)seed;
    throw ConfigError("law suite supports ising and autonormal models");
  }
  return out;
}

template <class Model>
std::vector<Check> validate_bounds(const RunConfig& cfg, const KalikowDecomposition<Model>& decomp,
                                   std::uint64_t seed) {
  pssim::detail::require_subcritical(decomp);
  const auto report = bounds_report(decomp);
  const double rate = report.mass_floor * (1.0 - report.gamma);
  const std::vector<double> horizons{0.1 / rate, 0.5 / rate, 1.0 / rate};
  const std::vector<std::size_t> steps{5, 10, 20};
  const auto& window = cfg.sampler.sites;
  const auto stats = ancestor_statistics(window, decomp, seed, horizons, steps, cfg.sampler.replicas);
  std::vector<Check> out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double bound = *report.nstop_tail(steps[i], window.size());
    const auto& e = stats.step_tail[i];
    out.push_back({"bounds.nstop_tail(N=" + std::to_string(steps[i]) + ")", e.mean <= bound + 3 * e.se,
                   "empirical " + fmt(e.mean, 6) + " <= bound " + fmt(bound, 6) + " + 3 s.e. " + fmt(e.se, 3)});
  }
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    const double bound = *report.convergence(horizons[i], window.size());
    const auto& e = stats.mean_size[i];
    out.push_back({"bounds.ancestors(s=" + fmt(horizons[i], 4) + ")", e.mean <= bound + 3 * e.se,
                   "empirical " + fmt(e.mean, 6) + " <= bound " + fmt(bound, 6) + " + 3 s.e. " + fmt(e.se, 3)});
  }
  return out;
}

}  // namespace detail

inline int run(const std::string& command, const Options& opts, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(opts.config_path);
  const auto decomp = build_decomposition(cfg);
  return std::visit(
      [&](const auto& dec) -> int {
        using Model = std::decay_t<decltype(dec.model())>;
        if (command == "sample") return detail::sample(cfg, dec, opts, out, err);
        if (command == "diagnose") return detail::diagnose(cfg, dec, opts, out);
        if (command == "dbar") {
          if constexpr (detail::is_pair<Model>) return detail::dbar(cfg, dec, opts, out, err);
          else throw ConfigError("dbar needs an ising-pair model");
        }
        if (command == "validate") {
          std::vector<detail::Check> checks;
          if (opts.suite == "ladder") checks = detail::validate_ladder(cfg, dec);
          else if (opts.suite == "law") checks = detail::validate_law(cfg, dec, detail::require_seed(cfg, opts));
          else if (opts.suite == "bounds") checks = detail::validate_bounds(cfg, dec, detail::require_seed(cfg, opts));
          else throw ConfigError("unknown suite \"" + opts.suite + "\" (ladder, law, bounds)");
          detail::OutputTarget target(opts.out_path, out);
          bool all = true;
          for (const auto& c : checks) {
            target.get() << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
            all = all && c.pass;
          }
          return all ? static_cast<int>(ExitCode::ok) : static_cast<int>(ExitCode::failure);
        }
        throw ConfigError("unknown command \"" + command + "\"");
      },
      decomp);
}

}  // namespace pssim::cli
