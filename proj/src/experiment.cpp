#include "cutoff/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "cutoff/coupling.hpp"
#include "cutoff/error.hpp"
#include "cutoff/hitting.hpp"
#include "cutoff/nested_sets.hpp"

namespace cutoff {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(ErrorCode::Parameter, "config key '" + key + "': '" + v + "' is not a number");
  }
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  const double x = parse_double(key, v);
  require(x >= 0.0 && x == std::floor(x) && x < 1.8e19, ErrorCode::Parameter,
          "config key '" + key + "': '" + v + "' is not a non-negative integer");
  return std::uint64_t(x);
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Collects output files and their digests.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    require(!ec, ErrorCode::Io, "cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void emit(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary);
    require(bool(f), ErrorCode::Io, "cannot open " + p.string() + " for writing");
    f << content;
    f.close();
    require(bool(f), ErrorCode::Io, "write to " + p.string() + " failed");
    const auto lines = std::size_t(std::count(content.begin(), content.end(), '\n'));
    entries_.push_back({name, sha256_hex(content), lines > 0 ? lines - 1 : 0});
  }

  void finish() {
    std::ostringstream m;
    m << "path,sha256,rows\n";
    for (const auto& e : entries_) m << e.path << ',' << e.sha256 << ',' << e.rows << '\n';
    const fs::path p = dir_ / "manifest.txt";
    std::ofstream f(p, std::ios::binary);
    require(bool(f), ErrorCode::Io, "cannot write " + p.string());
    f << m.str();
  }

  const fs::path& dir() const { return dir_; }
  std::vector<ManifestEntry> entries() const { return entries_; }

 private:
  fs::path dir_;
  std::vector<ManifestEntry> entries_;
};

ModelSpec spec_at(const ExperimentConfig& cfg, std::size_t value) {
  ModelSpec spec = cfg.model;
  if (cfg.grid_key == "n") {
    spec.n = value;
  } else {
    spec.params[cfg.grid_key] = double(value);
  }
  return spec;
}

ChainModel build_checked(const ExperimentConfig& cfg, std::size_t value) {
  ChainModel model = build_model(spec_at(cfg, value));
  if (model.exact())
    require(model.state_count() <= cfg.max_states, ErrorCode::Capacity,
            model.id() + " n=" + std::to_string(model.n()) + ": " + std::to_string(model.state_count()) +
                " states exceed max_states");
  return model;
}

// Re-raises with the (model, n) pair in front of the message.
template <class F>
auto with_context(const std::string& model, std::size_t n, F&& f) -> decltype(f()) {
  const std::string prefix = model + " n=" + std::to_string(n) + ": ";
  auto label = [&](const char* what) {
    const std::string msg = what;
    return msg.rfind(prefix, 0) == 0 ? msg : prefix + msg;
  };
  try {
    return f();
  } catch (const TimeoutError& e) {
    throw TimeoutError(label(e.what()), e.completed());
  } catch (const Error& e) {
    throw Error(e.code(), label(e.what()));
  }
}

std::string curve_name(const TvCurve& c) { return "curve_" + c.model + "_n" + std::to_string(c.n) + ".csv"; }

std::function<double(const ChainModel&)> delta_rule(const std::string& name) {
  if (name == "n") return [](const ChainModel& m) { return double(m.n()); };
  if (name == "sqrt_n") return [](const ChainModel& m) { return std::sqrt(double(m.n())); };
  if (name == "n2eps")
    return [](const ChainModel& m) { return std::pow(double(m.n()), 2.0 * m.geometry().eps); };
  if (name == "pd_window")
    return [](const ChainModel& m) {
      const double n = double(m.n()), e = m.geometry().eps;
      return 2.0 * (std::pow(n, 2.0 * e) + std::pow(n, 1.0 - e / 2.0));
    };
  if (name == "layers") return [](const ChainModel& m) { return double(m.geometry().layers); };
  if (name == "m2")
    return [](const ChainModel& m) { return double(m.geometry().circumference) * double(m.geometry().circumference); };
  const double c = parse_double("delta", name);
  require(c > 0.0, ErrorCode::Parameter, "delta must be positive");
  return [c](const ChainModel&) { return c; };
}

std::string default_delta(Family f, bool coupling) {
  switch (f) {
    case Family::PartialDiffusive: return coupling ? "pd_window" : "n2eps";
    case Family::CylinderWalk:
    case Family::CylinderHeight: return coupling ? "m2" : "layers";
    default: return "n";
  }
}

struct CurveRun {
  std::vector<TvCurve> curves;
  std::vector<MixingProfile> profiles;
};

CurveRun run_curves(const ExperimentConfig& cfg, OutputSet& out, double floor) {
  CurveRun run;
  std::ostringstream prof;
  prof << "model,n,eps,t_eps,quantization\n";
  for (std::size_t v : cfg.n_grid) {
    const ChainModel model = build_checked(cfg, v);
    with_context(model.id(), model.n(), [&] {
      const Distribution init = Distribution::delta(model.state_count(), default_start(model));
      TvCurve curve = tv_curve_until(model, init, floor, cfg.stride, cfg.max_steps, cfg.curve_budget);
      MixingProfile p = mixing_profile(curve, cfg.eps_grid);
      std::ostringstream csv;
      write_tv_csv(csv, curve);
      out.emit(curve_name(curve), csv.str());
      for (std::size_t k = 0; k < p.eps_grid.size(); ++k)
        prof << p.model << ',' << p.n << ',' << g17(p.eps_grid[k]) << ',' << p.t_eps[k] << ',' << p.quantization
             << '\n';
      run.curves.push_back(std::move(curve));
      run.profiles.push_back(std::move(p));
      return 0;
    });
  }
  if (!run.curves.empty()) out.emit("profile_" + run.curves.front().model + ".csv", prof.str());
  return run;
}

double curve_floor(const ExperimentConfig& cfg) {
  const double min_eps = *std::min_element(cfg.eps_grid.begin(), cfg.eps_grid.end());
  return cfg.number("tv_floor", min_eps);
}

void emit_plots(OutputSet& out, const CurveRun& run, const std::string& prefix) {
  if (run.curves.empty()) return;
  const fs::path tmp = out.dir();
  const PlotFiles pf = emit_plot_data(run.curves, run.profiles, tmp, prefix);
  // Re-register the files so they appear in the manifest.
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  };
  for (const auto& t : pf.tables) out.emit(t.filename().string(), slurp(t));
  out.emit(pf.index.filename().string(), slurp(pf.index));
  if (pf.overlay) out.emit(pf.overlay->filename().string(), slurp(*pf.overlay));
}

FitOptions fit_options(const ExperimentConfig& cfg) {
  FitOptions o;
  const std::string form = cfg.value("form", "nLogN");
  if (form == "nLogN") {
    o.form = AForm::NLogN;
  } else if (form == "nPow") {
    o.form = AForm::NPow;
    o.gamma = cfg.number("gamma", 1.0);
  } else if (form == "custom") {
    o.form = AForm::Custom;
    for (const auto& s : split_list(cfg.value("custom_scale", ""))) o.custom_scale.push_back(parse_double("custom_scale", s));
  } else {
    fail(ErrorCode::Parameter, "unknown fit form '" + form + "'");
  }
  if (cfg.grid_key != "n")
    for (std::size_t v : cfg.n_grid) o.sizes.push_back(double(v));
  return o;
}

const char* form_name(AForm f) {
  switch (f) {
    case AForm::NLogN: return "nLogN";
    case AForm::NPow: return "nPow";
    case AForm::Custom: return "custom";
  }
  return "?";
}

void write_fit(OutputSet& out, const std::string& model, const CutoffFit& fit, std::vector<std::string>& summary) {
  std::ostringstream f;
  f << "a_form,a_constant,b_exponent,b_degenerate,residual,consistent\n"
    << form_name(fit.a_form) << ',' << g17(fit.a_constant) << ',' << g17(fit.b_exponent) << ','
    << (fit.b_degenerate ? 1 : 0) << ',' << g17(fit.residual) << ',' << (fit.consistent ? 1 : 0) << '\n';
  out.emit("fit_" + model + ".csv", f.str());
  std::ostringstream w;
  w << "size,window_over_time\n";
  for (const auto& [size, ratio] : fit.window_over_time) w << g17(size) << ',' << g17(ratio) << '\n';
  out.emit("window_" + model + ".csv", w.str());
  summary.push_back(model + ": a_constant=" + g17(fit.a_constant) + " b_exponent=" + g17(fit.b_exponent) +
                    " residual=" + g17(fit.residual) + " verdict=" + (fit.consistent ? "consistent" : "inconsistent"));
}

// ---------------------------------------------------------------------------

void cmd_tv_curve(const ExperimentConfig& cfg, OutputSet& out, RunResult& res) {
  const CurveRun run = run_curves(cfg, out, curve_floor(cfg));
  emit_plots(out, run, "plot");
  for (const auto& p : run.profiles) {
    std::string line = p.model + " n=" + std::to_string(p.n);
    for (std::size_t k = 0; k < p.eps_grid.size(); ++k)
      line += " t(" + g17(p.eps_grid[k]) + ")=" + std::to_string(p.t_eps[k]);
    res.summary.push_back(line);
  }
}

void cmd_cutoff_fit(const ExperimentConfig& cfg, OutputSet& out, RunResult& res) {
  const CurveRun run = run_curves(cfg, out, curve_floor(cfg));
  if (run.profiles.empty()) return;
  const CutoffFit fit = fit_cutoff(run.profiles, fit_options(cfg));
  write_fit(out, run.profiles.front().model, fit, res.summary);
}

void cmd_figure1(ExperimentConfig cfg, OutputSet& out, RunResult& res) {
  const CurveRun run = run_curves(cfg, out, cfg.number("tv_floor", 1e-3));
  emit_plots(out, run, "figure1");
  std::ostringstream w;
  w << "n,t_75,t_50,t_25,relative_window\n";
  bool decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& p : run.profiles) {
    auto at = [&](double e) {
      for (std::size_t k = 0; k < p.eps_grid.size(); ++k)
        if (p.eps_grid[k] == e) return double(p.t_eps[k]);
      fail(ErrorCode::Parameter, "figure 1 needs eps 0.25, 0.5 and 0.75 in the grid");
    };
    const double rel = (at(0.25) - at(0.75)) / at(0.5);
    w << p.n << ',' << at(0.75) << ',' << at(0.5) << ',' << at(0.25) << ',' << g17(rel) << '\n';
    if (!(rel < prev)) decreasing = false;
    prev = rel;
  }
  out.emit("figure1_windows.csv", w.str());
  res.summary.push_back(std::string("relative window strictly decreasing: ") + (decreasing ? "yes" : "no"));
}

void cmd_hitting(const ExperimentConfig& cfg, OutputSet& out, RunResult& res) {
  if (cfg.n_grid.empty()) return;
  const std::string model_name = family_name(cfg.model.family);
  if (cfg.model.family == Family::TopInAtRandom) {
    std::ostringstream t;
    t << "n,theta,zeta_mean,tau_mean,tau_exact_mean,tau_variance,tau_exact_variance,ci_lo,ci_hi\n";
    for (std::size_t n : cfg.n_grid)
      for (double theta : cfg.theta_grid) {
        if (theta > double(n)) continue;
        with_context(model_name, n, [&] {
          const TiarRun run = top_in_at_random_hitting(unsigned(n), unsigned(theta), cfg.replicas, cfg.seed);
          const HittingMoments exact = tiar_tau_moments(unsigned(n), unsigned(theta));
          const auto ci = run.tau.ci99();
          t << n << ',' << g17(theta) << ',' << g17(run.zeta.mean()) << ',' << g17(run.tau.mean()) << ','
            << g17(exact.mean) << ',' << g17(run.tau.variance()) << ',' << g17(exact.variance) << ',' << g17(ci.first)
            << ',' << g17(ci.second) << '\n';
          std::ostringstream mc;
          write_mc_csv(mc, run.zeta);
          out.emit("mc_" + model_name + "_n" + std::to_string(n) + "_theta" + g17(theta) + ".csv", mc.str());
          return 0;
        });
      }
    out.emit("hitting_" + model_name + ".csv", t.str());
    return;
  }

  std::ostringstream h, cant, drift_csv;
  h << "n,theta,mean,variance,sigma_over_mean,oracle_mean,oracle_variance\n";
  cant << "n,theta,tail,bound,pass\n";
  std::vector<DriftDiagnostic> drifts;
  for (std::size_t v : cfg.n_grid) {
    const ChainModel model = build_checked(cfg, v);
    with_context(model.id(), model.n(), [&] {
      StatePredicate target1;
      std::vector<std::pair<double, HittingMoments>> rows;
      std::function<StatePredicate(double)> target_at;
      const StateIndex start = default_start(model);
      if (model.family() == Family::CouponCollector || model.family() == Family::BiasedSegment) {
        // Single target: the absorbing state, or the far end of the segment.
        const StateIndex goal = model.family() == Family::CouponCollector ? 0 : model.state_count() - 1;
        target_at = [goal](double) { return StatePredicate([goal](StateIndex x) { return x == goal; }); };
        rows.push_back({1.0, bd_hitting_moments(model, start, goal)});
      } else {
        const NestedFamily fam = family_for(model);
        target_at = [fam](double theta) { return StatePredicate([fam, theta](StateIndex x) { return fam.contains(theta, x); }); };
        for (double theta : cfg.theta_grid) rows.push_back({theta, theta_hitting_moments(model, fam, theta)});
      }
      for (const auto& [theta, m] : rows) {
        h << model.n() << ',' << g17(theta) << ',' << g17(m.mean) << ',' << g17(m.variance) << ','
          << g17(m.mean > 0 ? quasi_determinism_ratio(m) : 0.0) << ',';
        if (model.state_count() <= kLinearSolveCap) {
          const HittingMoments o = linear_solve_hitting(model, start, target_at(theta));
          h << g17(o.mean) << ',' << g17(o.variance) << '\n';
        } else {
          h << "nan,nan\n";
        }
      }
      if (cfg.replicas > 0) {
        McOptions opts;
        opts.expected_mean = rows.front().second.mean;
        const McSample s = mc_hitting(model, start, target_at(1.0), cfg.replicas, cfg.seed, opts);
        std::ostringstream mc;
        write_mc_csv(mc, s);
        out.emit("mc_" + model.id() + "_n" + std::to_string(model.n()) + ".csv", mc.str());
        for (const CantelliRow& c : cantelli_check(s, cfg.theta_grid))
          cant << model.n() << ',' << g17(c.theta) << ',' << g17(c.tail) << ',' << g17(c.bound) << ','
               << (c.pass ? 1 : 0) << '\n';
        const auto ci = s.ci99();
        res.summary.push_back(model.id() + " n=" + std::to_string(model.n()) + ": closed-form mean " +
                              g17(rows.front().second.mean) + ", Monte Carlo 99% CI [" + g17(ci.first) + ", " +
                              g17(ci.second) + "]");
      }
      if (is_birth_death(model.family())) drifts.push_back(strong_drift_diagnostic(model));
      return 0;
    });
  }
  out.emit("hitting_" + model_name + ".csv", h.str());
  if (cfg.replicas > 0) out.emit("cantelli_" + model_name + ".csv", cant.str());
  if (!drifts.empty()) {
    write_drift_csv(drift_csv, drifts);
    out.emit("drift_" + model_name + ".csv", drift_csv.str());
  }
}

void cmd_coupling(const ExperimentConfig& cfg, OutputSet& out, RunResult& res) {
  if (cfg.n_grid.empty()) return;
  const std::string model_name = family_name(cfg.model.family);
  std::string kind = cfg.value("kind", "");
  if (kind.empty()) {
    switch (cfg.model.family) {
      case Family::EhrenfestUrn:
      case Family::IsingMagnetization: kind = "sandwich"; break;
      case Family::CylinderWalk: kind = "cylinder"; break;
      default: kind = "independent";
    }
  }
  const auto delta = delta_rule(cfg.value("delta", default_delta(cfg.model.family, true)));
  std::ostringstream tail;
  tail << "n,theta,tail\n";
  for (std::size_t v : cfg.n_grid) {
    const ChainModel model = build_checked(cfg, v);
    with_context(model.id(), model.n(), [&] {
      CoalescenceStats stats;
      std::ostringstream csv;
      const std::string file = "coupling_" + model.id() + "_n" + std::to_string(model.n()) + ".csv";
      if (kind == "sandwich") {
        const SandwichResult r =
            sandwich_coupling(model, cfg.number("sandwich_theta", 8.0), cfg.replicas, cfg.seed, std::nullopt,
                              delta(model), cfg.max_steps);
        stats = r.stats;
        write_coalescence_csv(csv, stats);
        res.summary.push_back(model.id() + " n=" + std::to_string(model.n()) + ": sandwich audit passed over " +
                              std::to_string(r.audited_steps) + " steps");
      } else if (kind == "cylinder") {
        const CylinderCouplingResult r = cylinder_coupling(model, 0, cfg.replicas, cfg.seed, std::nullopt, cfg.max_steps);
        stats = r.stats;
        stats.delta_n = delta(model);
        write_cylinder_coupling_csv(csv, r);
        res.summary.push_back(model.id() + " n=" + std::to_string(model.n()) + ": cylinder audit passed, " +
                              std::to_string(r.top_merges) + " top merges");
      } else if (kind == "independent") {
        StateIndex z0 = default_start(model);
        if (model.family() == Family::PartialDiffusive) z0 = model.geometry().flat_edge;
        z0 = StateIndex(cfg.number("z0", double(z0)));
        stats = independent_coupling(model, z0, cfg.replicas, cfg.seed, delta(model), cfg.max_steps);
        write_coalescence_csv(csv, stats);
      } else {
        fail(ErrorCode::Parameter, "unknown coupling kind '" + kind + "'");
      }
      out.emit(file, csv.str());
      for (const TailPoint& p : coalescence_tail(stats, cfg.theta_grid))
        tail << model.n() << ',' << g17(p.theta) << ',' << g17(p.tail) << '\n';
      return 0;
    });
  }
  out.emit("coupling_tail_" + model_name + ".csv", tail.str());
}

void cmd_hypotheses(const ExperimentConfig& cfg, OutputSet& out, RunResult& res) {
  if (cfg.n_grid.empty()) return;
  const std::string fam_kind = cfg.value("family", "standard");
  FamilyBuilder builder = family_for;
  if (fam_kind == "linear")
    builder = linear_misuse_family;
  else
    require(fam_kind == "standard", ErrorCode::Parameter, "family must be 'standard' or 'linear'");
  const auto delta = delta_rule(cfg.value("delta", default_delta(cfg.model.family, false)));
  std::vector<std::size_t> grid;
  ModelSpec tmpl = cfg.model;
  HypothesisReport rep;
  if (cfg.grid_key == "n") {
    rep = hypothesis_report(tmpl, cfg.n_grid, cfg.theta_grid, delta, builder);
  } else {
    for (std::size_t v : cfg.n_grid) {
      HypothesisReport one = hypothesis_report(spec_at(cfg, v), {spec_at(cfg, v).n}, cfg.theta_grid, delta, builder);
      rep.model = one.model;
      rep.rows.insert(rep.rows.end(), one.rows.begin(), one.rows.end());
    }
  }
  std::ostringstream csv;
  write_hypothesis_csv(csv, rep);
  out.emit("hypotheses_" + rep.model + (fam_kind == "linear" ? "_linear" : "") + ".csv", csv.str());
  res.summary.push_back(rep.model + ": sigma/E decreasing in n: " + (rep.sigma_decreasing ? "yes" : "no"));
  for (const auto& [theta, dec] : rep.eq9_decreasing)
    res.summary.push_back(rep.model + ": travel ratio at theta=" + g17(theta) + " decreasing in n: " +
                          (dec ? "yes" : "no"));
}

}  // namespace

// ---------------------------------------------------------------------------

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
  auto s = sections.find(section);
  if (s != sections.end()) {
    auto it = s->second.find(key);
    if (it != s->second.end()) return it->second;
  }
  auto it = global.find(key);
  if (it != global.end()) return it->second;
  return std::nullopt;
}

Config parse_config(const std::string& text) {
  Config cfg;
  std::map<std::string, std::string>* current = &cfg.global;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']' && line.size() > 2, ErrorCode::Parameter,
              "config line " + std::to_string(lineno) + ": malformed section header");
      current = &cfg.sections[trim(line.substr(1, line.size() - 2))];
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::Parameter,
            "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorCode::Parameter, "config line " + std::to_string(lineno) + ": empty key");
    (*current)[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

Config load_config(const fs::path& path) {
  std::ifstream f(path);
  require(bool(f), ErrorCode::Io, "cannot read config " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return parse_config(s.str());
}

std::string ExperimentConfig::value(const std::string& key, const std::string& fallback) const {
  auto it = extra.find(key);
  return it == extra.end() ? fallback : it->second;
}

double ExperimentConfig::number(const std::string& key, double fallback) const {
  auto it = extra.find(key);
  return it == extra.end() ? fallback : parse_double(key, it->second);
}

ExperimentConfig resolve_config(const Config& cfg, const std::string& subcommand) {
  require(std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) != kSubcommands.end(),
          ErrorCode::Parameter, "unknown subcommand '" + subcommand + "'");
  ExperimentConfig ec;
  std::map<std::string, std::string> merged = cfg.global;
  if (auto s = cfg.sections.find(subcommand); s != cfg.sections.end())
    for (const auto& [k, v] : s->second) merged[k] = v;

  if (subcommand == "reproduce-figure1") {
    ec.model.family = Family::BiasedSegment;
    ec.n_grid = {50, 100, 200, 400};
  }
  for (const auto& [key, v] : merged) {
    if (key == "model") {
      ec.model.family = parse_family(v);
    } else if (key == "n_grid") {
      ec.n_grid.clear();
      for (const auto& s : split_list(v)) ec.n_grid.push_back(std::size_t(parse_count(key, s)));
    } else if (key == "eps_grid") {
      ec.eps_grid.clear();
      for (const auto& s : split_list(v)) ec.eps_grid.push_back(parse_double(key, s));
    } else if (key == "theta_grid") {
      ec.theta_grid.clear();
      for (const auto& s : split_list(v)) ec.theta_grid.push_back(parse_double(key, s));
    } else if (key == "replicas") {
      ec.replicas = std::size_t(parse_count(key, v));
    } else if (key == "seed") {
      ec.seed = parse_count(key, v);
    } else if (key == "out") {
      ec.out_dir = v;
    } else if (key == "max_steps") {
      ec.max_steps = parse_count(key, v);
    } else if (key == "max_states") {
      ec.max_states = parse_count(key, v);
    } else if (key == "curve_budget") {
      ec.curve_budget = parse_count(key, v);
    } else if (key == "stride") {
      ec.stride = std::size_t(parse_count(key, v));
      require(ec.stride >= 1, ErrorCode::Parameter, "stride must be >= 1");
    } else if (key == "grid_key") {
      ec.grid_key = v;
    } else if (key.rfind("param.", 0) == 0) {
      ec.model.params[key.substr(6)] = parse_double(key, v);
    } else if (key == "n") {
      ec.model.n = std::size_t(parse_count(key, v));
    } else {
      ec.extra[key] = v;
    }
  }
  for (std::size_t i = 1; i < ec.n_grid.size(); ++i)
    require(ec.n_grid[i] > ec.n_grid[i - 1], ErrorCode::Parameter, "n_grid must be strictly increasing");
  require(!ec.eps_grid.empty(), ErrorCode::Parameter, "eps_grid must not be empty");
  for (std::size_t i = 0; i < ec.eps_grid.size(); ++i) {
    require(ec.eps_grid[i] > 0.0 && ec.eps_grid[i] < 1.0, ErrorCode::Parameter, "eps_grid values must lie in (0, 1)");
    if (i > 0)
      require(ec.eps_grid[i] < ec.eps_grid[i - 1], ErrorCode::Parameter, "eps_grid must be strictly decreasing");
  }
  for (std::size_t i = 0; i < ec.theta_grid.size(); ++i) {
    require(ec.theta_grid[i] >= 1.0, ErrorCode::Parameter, "theta_grid values must be >= 1");
    if (i > 0)
      require(ec.theta_grid[i] > ec.theta_grid[i - 1], ErrorCode::Parameter, "theta_grid must be strictly increasing");
  }
  return ec;
}

CutoffFit fit_cutoff(const std::vector<MixingProfile>& profiles, const FitOptions& opts) {
  require(profiles.size() >= 3, ErrorCode::Fit, "cutoff fit needs at least 3 profiles");
  const std::size_t P = profiles.size();
  require(opts.sizes.empty() || opts.sizes.size() == P, ErrorCode::Fit, "sizes must match the profiles");
  require(opts.form != AForm::Custom || opts.custom_scale.size() == P, ErrorCode::Fit,
          "custom form needs one scale per profile");
  auto eps_at = [](const MixingProfile& p, double e) -> double {
    for (std::size_t k = 0; k < p.eps_grid.size(); ++k)
      if (std::fabs(p.eps_grid[k] - e) < 1e-12) return double(p.t_eps[k]);
    fail(ErrorCode::Fit, "profile for n=" + std::to_string(p.n) + " lacks eps=" + g17(e));
  };
  CutoffFit fit;
  fit.a_form = opts.form;
  std::vector<double> x(P), mid(P), width(P);
  for (std::size_t i = 0; i < P; ++i) {
    x[i] = opts.sizes.empty() ? double(profiles[i].n) : opts.sizes[i];
    mid[i] = eps_at(profiles[i], 0.5);
    width[i] = eps_at(profiles[i], 0.25) - eps_at(profiles[i], 0.75);
    require(mid[i] > 0.0, ErrorCode::Fit, "t(1/2) must be positive");
    if (i > 0) {
      require(x[i] > x[i - 1], ErrorCode::Fit, "profile sizes must increase");
      require(mid[i] >= mid[i - 1], ErrorCode::Fit, "t(1/2) is not monotone across n");
    }
  }
  std::vector<double> resid(P);
  for (std::size_t i = 0; i < P; ++i) {
    double scale = 0.0;
    switch (opts.form) {
      case AForm::NLogN: scale = x[i] * std::log(x[i]); break;
      case AForm::NPow: scale = std::pow(x[i], opts.gamma); break;
      case AForm::Custom: scale = opts.custom_scale[i]; break;
    }
    require(scale > 0.0, ErrorCode::Fit, "scaling form is not positive at size " + g17(x[i]));
    resid[i] = std::log(mid[i]) - std::log(scale);
  }
  const double log_c = std::accumulate(resid.begin(), resid.end(), 0.0) / double(P);
  fit.a_constant = std::exp(log_c);
  for (double r : resid) fit.residual = std::max(fit.residual, std::fabs(r - log_c));

  fit.b_degenerate = std::any_of(width.begin(), width.end(), [](double w) { return w <= 0.0; });
  if (fit.b_degenerate) {
    fit.b_exponent = std::numeric_limits<double>::quiet_NaN();
  } else {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < P; ++i) {
      const double lx = std::log(x[i]), ly = std::log(width[i]);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double denom = double(P) * sxx - sx * sx;
    fit.b_exponent = (double(P) * sxy - sx * sy) / denom;
  }
  fit.consistent = true;
  for (std::size_t i = 0; i < P; ++i) {
    fit.window_over_time.push_back({x[i], width[i] / mid[i]});
    if (i > 0 && !(fit.window_over_time[i].second < fit.window_over_time[i - 1].second)) fit.consistent = false;
  }
  return fit;
}

PlotFiles emit_plot_data(const std::vector<TvCurve>& curves, const std::vector<MixingProfile>& profiles,
                         const fs::path& dir, const std::string& prefix) {
  require(!curves.empty(), ErrorCode::Parameter, "no curves to plot");
  require(profiles.empty() || profiles.size() == curves.size(), ErrorCode::Shape, "one profile per curve expected");
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create " + dir.string());
  PlotFiles pf;
  std::ostringstream index;
  index << "file model n\n";
  for (const TvCurve& c : curves) {
    const std::string name = prefix + "_" + c.model + "_n" + std::to_string(c.n) + ".dat";
    std::ofstream f(dir / name, std::ios::binary);
    require(bool(f), ErrorCode::Io, "cannot write " + (dir / name).string());
    f << "t tv\n";
    for (std::size_t k = 0; k < c.times.size(); ++k) f << c.times[k] << ' ' << g17(c.tv[k]) << '\n';
    pf.tables.push_back(dir / name);
    index << name << ' ' << c.model << ' ' << c.n << '\n';
  }
  pf.index = dir / (prefix + "_index.txt");
  {
    std::ofstream f(pf.index, std::ios::binary);
    require(bool(f), ErrorCode::Io, "cannot write " + pf.index.string());
    f << index.str();
  }
  if (!profiles.empty()) {
    pf.overlay = dir / (prefix + "_overlay.dat");
    std::ofstream f(*pf.overlay, std::ios::binary);
    require(bool(f), ErrorCode::Io, "cannot write " + pf.overlay->string());
    f << "model n t t_over_t_half tv\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
      double half = 0.0;
      for (std::size_t k = 0; k < profiles[i].eps_grid.size(); ++k)
        if (profiles[i].eps_grid[k] == 0.5) half = double(profiles[i].t_eps[k]);
      require(half > 0.0, ErrorCode::Parameter, "overlay needs a positive t(1/2)");
      const TvCurve& c = curves[i];
      for (std::size_t k = 0; k < c.times.size(); ++k)
        f << c.model << ' ' << c.n << ' ' << c.times[k] << ' ' << g17(double(c.times[k]) / half) << ' '
          << g17(c.tv[k]) << '\n';
    }
  }
  return pf;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  require(ctx != nullptr, ErrorCode::Io, "digest context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 && EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  require(ok, ErrorCode::Io, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

RunResult run_experiment(const std::string& subcommand, const Config& cfg, const RunOverrides& overrides) {
  ExperimentConfig ec = resolve_config(cfg, subcommand);
  if (overrides.seed) ec.seed = *overrides.seed;
  if (overrides.out) ec.out_dir = *overrides.out;
  OutputSet out(ec.out_dir);
  RunResult res;
  if (subcommand == "tv-curve")
    cmd_tv_curve(ec, out, res);
  else if (subcommand == "cutoff-fit")
    cmd_cutoff_fit(ec, out, res);
  else if (subcommand == "reproduce-figure1")
    cmd_figure1(ec, out, res);
  else if (subcommand == "hitting")
    cmd_hitting(ec, out, res);
  else if (subcommand == "coupling")
    cmd_coupling(ec, out, res);
  else
    cmd_hypotheses(ec, out, res);
  out.finish();
  res.files = out.entries();
  return res;
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Capacity:
    case ErrorCode::Timeout:
    case ErrorCode::Coverage:
      return 2;
    default:
      return 1;
  }
}

}  // namespace cutoff
