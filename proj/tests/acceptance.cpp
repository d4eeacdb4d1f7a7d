// Acceptance runner: `acceptance [criterion...]` prints one PASS/FAIL line per
// check and exits non-zero when any check fails. Lines tagged "info" report
// supplementary measurements that do not affect the exit status.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cutoff/coupling.hpp"
#include "cutoff/error.hpp"
#include "cutoff/evolution.hpp"
#include "cutoff/experiment.hpp"
#include "cutoff/hitting.hpp"
#include "cutoff/model.hpp"
#include "cutoff/nested_sets.hpp"
#include "cutoff/numeric.hpp"
#include "cutoff/permutation.hpp"

using namespace cutoff;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void check(const std::string& id, bool ok, const std::string& what) {
  std::printf("%s [%s] %s\n", ok ? "PASS" : "FAIL", id.c_str(), what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

void info(const std::string& id, const std::string& what) {
  std::printf("info [%s] %s\n", id.c_str(), what.c_str());
  std::fflush(stdout);
}

// Runs a check body; a library exception counts as a failure of that check.
void guarded(const std::string& id, const std::string& label, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    check(id, false, label + ": raised " + e.what());
  }
}

ChainModel make(Family f, std::size_t n, std::map<std::string, double> p = {}) { return build_model({f, n, p}); }

double rel(double a, double b) { return std::fabs(a - b) / std::max(1e-300, std::fabs(b)); }

MixingProfile profile_of(const ChainModel& m, const std::vector<double>& eps, std::size_t stride = 1) {
  const Distribution init = Distribution::delta(m.state_count(), default_start(m));
  const double floor = *std::min_element(eps.begin(), eps.end());
  return mixing_profile(tv_curve_until(m, init, floor, stride, 100'000'000), eps);
}

double t_at(const MixingProfile& p, double eps) {
  for (std::size_t k = 0; k < p.eps_grid.size(); ++k)
    if (p.eps_grid[k] == eps) return double(p.t_eps[k]);
  throw Error(ErrorCode::Coverage, "profile lacks eps");
}

const std::vector<double> kQuartiles{0.75, 0.5, 0.25};

double relative_window(const MixingProfile& p) { return (t_at(p, 0.25) - t_at(p, 0.75)) / t_at(p, 0.5); }

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v, const char* f = "%.4g") {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + fmt(f, x);
  return "{" + s + "}";
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void runtime(const std::string& id, const Timer& t, double limit) {
  const double s = t.seconds();
  check(id, s < limit, fmt("runtime %.1f s (limit %.0f s)", s, limit));
}

// Every descent or ascent used by the oracle-equivalence checks.
struct Passage {
  std::string label;
  ChainModel model;
  StateIndex from, to;
};

StatePredicate beyond(StateIndex from, StateIndex to) {
  if (to < from) return [to](StateIndex x) { return x <= to; };
  return [to](StateIndex x) { return x >= to; };
}

std::vector<Passage> bd_passages(std::size_t n) {
  std::vector<Passage> out;
  out.push_back({"CouponCollector", make(Family::CouponCollector, n), n, 0});
  out.push_back({"BiasedSegment", make(Family::BiasedSegment, n), 0, n});
  out.push_back({"EhrenfestUrn", make(Family::EhrenfestUrn, n), 0, n / 2});
  for (double beta : {0.3, 0.7}) {
    const auto m = make(Family::IsingMagnetization, n, {{"beta", beta}});
    out.push_back({fmt("IsingMagnetization(beta=%.1f)", beta), m, n, family_border(m, family_for(m), 1.0)});
  }
  for (double eps : {0.3, 0.4, 0.5}) {
    const auto m = make(Family::PartialDiffusive, n, {{"eps", eps}});
    out.push_back({fmt("PartialDiffusive(eps=%.1f)", eps), m, n, m.geometry().flat_edge});
  }
  out.push_back({"CylinderHeight(q=0.75)", make(Family::CylinderHeight, n), n - 1, 0});
  return out;
}

// ---------------------------------------------------------------------------

void criterion1() {
  Timer clock;
  guarded("1a", "coupon closed form vs oracle", [] {
    double worst = 0.0, worst_h = 0.0;
    for (std::size_t n : {10u, 100u, 500u, 1000u, 2000u}) {
      const auto m = make(Family::CouponCollector, n);
      const auto cf = bd_hitting_moments(m, n, 0);
      const auto ls = linear_solve_hitting(m, n, [](StateIndex x) { return x == 0; });
      long double h = 0;
      for (std::size_t k = 1; k <= n; ++k) h += 1.0L / k;
      worst = std::max(worst, rel(cf.mean, ls.mean));
      worst_h = std::max(worst_h, rel(cf.mean, double(n * h)));
    }
    check("1a", worst <= 1e-9 && worst_h <= 1e-9,
          fmt("E[T_{n->0}] closed form vs linear solve and vs n*H_n, n <= 2000: max rel err %.2e / %.2e (tol 1e-9)",
              worst, worst_h));
  });
  guarded("1b", "coupon midpoint", [] {
    const std::size_t n = 1600;
    const auto p = profile_of(make(Family::CouponCollector, n), kQuartiles);
    const double r = t_at(p, 0.5) / (n * std::log(double(n)));
    check("1b", r >= 0.9 && r <= 1.15, fmt("t(1/2)/(n ln n) at n=1600: %.4f (range [0.9, 1.15])", r));
  });
  guarded("1c", "coupon window", [] {
    // Gumbel limit: (t(1/4) - t(3/4))/n -> ln(-ln 1/4) - ln(-ln 3/4).
    const double gumbel = std::log(-std::log(0.25)) - std::log(-std::log(0.75));
    std::vector<double> w;
    for (std::size_t n : {100u, 200u, 400u, 800u, 1600u}) {
      const auto p = profile_of(make(Family::CouponCollector, n), kQuartiles);
      w.push_back((t_at(p, 0.25) - t_at(p, 0.75)) / double(n));
    }
    const double hi = *std::max_element(w.begin(), w.end()), lo = *std::min_element(w.begin(), w.end());
    check("1c", hi <= 2 * gumbel && hi / lo <= 1.5,
          fmt("(t(1/4)-t(3/4))/n over n=100..1600: %s; bounded by 2x Gumbel width %.3f, spread %.3f (<= 1.5)",
              join(w).c_str(), 2 * gumbel, hi / lo));
  });
  runtime("1z", clock, 60);
}

void criterion2() {
  Timer clock;
  guarded("2a", "hypercube lumping", [] {
    double worst = 0.0;
    std::size_t points = 0;
    for (std::size_t n = 1; n <= 12; ++n) {
      const auto cube = make(Family::HypercubeWalk, n);
      auto [coarse, lm] = lump(cube);
      const std::size_t T = std::size_t(3 * n * std::log(double(n) + 1) + 30);
      const auto fine = tv_curve(cube, Distribution::delta(cube.state_count(), 0), T, 1);
      const auto small = tv_curve(coarse, Distribution::delta(n + 1, 0), T, 1);
      for (std::size_t i = 0; i < fine.tv.size(); ++i) worst = std::max(worst, std::fabs(fine.tv[i] - small.tv[i]));
      points += fine.tv.size();
    }
    check("2a", worst <= 1e-12,
          fmt("hypercube vs lumped Ehrenfest TV, n=1..12, %zu sampled t: max |diff| %.2e (tol 1e-12)", points, worst));
  });
  guarded("2b", "Ehrenfest midpoint", [] {
    const std::size_t n = 1000;
    const auto p = profile_of(make(Family::EhrenfestUrn, n), kQuartiles);
    const double r = t_at(p, 0.5) / (0.5 * n * std::log(double(n)));
    check("2b", r >= 0.9 && r <= 1.1, fmt("t(1/2)/(n ln n / 2) at n=1000: %.4f (range [0.9, 1.1])", r));
  });
  guarded("2c", "Ehrenfest hitting oracle", [] {
    double worst = 0.0;
    for (std::size_t n : {10u, 100u, 250u, 500u, 1000u, 2000u}) {
      const auto m = make(Family::EhrenfestUrn, n);
      const auto fam = family_for(m);
      const auto cf = theta_hitting_moments(m, fam, 1.0);
      const auto ls = linear_solve_hitting(m, fam.start, [&](StateIndex x) { return fam.contains(1.0, x); });
      worst = std::max({worst, rel(cf.mean, ls.mean), rel(cf.variance, ls.variance)});
    }
    for (std::size_t n : {6u, 10u, 12u}) {
      const auto m = make(Family::HypercubeWalk, n);
      const auto fam = family_for(m);
      const auto cf = theta_hitting_moments(m, fam, 1.0);
      const auto ls = linear_solve_hitting(m, 0, [&](StateIndex x) { return fam.contains(1.0, x); });
      worst = std::max({worst, rel(cf.mean, ls.mean), rel(cf.variance, ls.variance)});
    }
    check("2c", worst <= 1e-9,
          fmt("E[zeta_1], Var[zeta_1] closed form vs linear solve (urn n<=2000, cube n<=12): max rel err %.2e "
              "(tol 1e-9)",
              worst));
  });
  runtime("2z", clock, 120);
}

void criterion3() {
  Timer clock;
  guarded("3a", "cylinder stationary", [] {
    const auto m = make(Family::CylinderWalk, 0, {{"l", 20}, {"m", 5}});
    const auto a = power_iteration_stationary(m);
    const auto b = stationary(m);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a.values[i] - b.values[i]));
    check("3a", worst <= 1e-10,
          fmt("power iteration vs closed form at l=20, m=5: max |diff| %.2e, L1 %.2e (tol 1e-10)", worst,
              2 * tv_distance(a, b)));
  });
  guarded("3b", "cylinder cutoff", [] {
    std::vector<double> ratios, windows;
    for (std::size_t l : {125u, 250u, 500u}) {
      const auto m = make(Family::CylinderWalk, 0, {{"l", double(l)}, {"m", 5}});
      const auto p = profile_of(m, kQuartiles);
      ratios.push_back(t_at(p, 0.5) / (double(l) / *m.drift_beta()));
      windows.push_back(relative_window(p));
    }
    bool in = std::all_of(ratios.begin(), ratios.end(), [](double r) { return r >= 0.85 && r <= 1.2; });
    check("3b", in, fmt("t(1/2)/(l/beta) at (l,m)=(125,5),(250,5),(500,5): %s (range [0.85, 1.2])", join(ratios).c_str()));
    check("3c", strictly_decreasing(windows),
          fmt("relative window (t(1/4)-t(3/4))/t(1/2): %s strictly decreasing", join(windows).c_str()));
  });
  guarded("3d", "cylinder coupling", [] {
    const auto m = make(Family::CylinderWalk, 0, {{"l", 40}, {"m", 8}});
    const auto r = cylinder_coupling(m, 0, 10000, 2024);
    std::size_t max_ok = 0;
    for (std::size_t i = 0; i < r.stats.samples.size(); ++i)
      max_ok += r.stats.samples[i] == std::max(r.gamma_H[i], r.gamma_Phi[i]);
    check("3d", max_ok == 10000,
          fmt("cylinder coupling, 10^4 replicas: H death-only and sticky audits clean, gamma = max(gamma_H, "
              "gamma_Phi) in %zu/10000",
              max_ok));
  });
  runtime("3z", clock, 300);
}

void criterion4() {
  Timer clock;
  const std::size_t n = 100000;
  for (double eps : {0.3, 0.4}) {
    const std::string tag = fmt("eps=%.1f", eps);
    guarded("4a", tag, [&] {
      const auto m = make(Family::PartialDiffusive, n, {{"eps", eps}});
      const auto z1 = theta_hitting_moments(m, family_for(m), 1.0);
      const double nlogn = double(n) * std::log(double(n));
      const double r = z1.mean / (2 * (1 - eps) * nlogn / std::log(2.0));
      check("4a", r >= 0.85 && r <= 1.15,
            fmt("%s: E[zeta_1]/(2(1-eps) n ln n/ln 2) at n=1e5: %.4f (range [0.85, 1.15])", tag.c_str(), r));
      info("4a", fmt("%s: E[zeta_1]/(4(1-eps) n ln n) = %.4f", tag.c_str(), z1.mean / (4 * (1 - eps) * nlogn)));
    });
    guarded("4b", tag, [&] {
      const auto m = make(Family::PartialDiffusive, n, {{"eps", eps}});
      const auto fam = family_for(m);
      const auto z1 = theta_hitting_moments(m, fam, 1.0);
      for (double theta : {4.0, 16.0}) {
        const auto zt = theta_hitting_moments(m, fam, theta);
        const double scale = 2 * std::pow(double(n), 2 * eps) * std::log(theta) / std::log(2.0);
        const double r = (z1.mean - zt.mean) / scale;
        check("4b", r >= 0.8 && r <= 1.2,
              fmt("%s theta=%g: E[zeta_1 - zeta_theta]/(2 n^{2eps} ln theta/ln 2) at n=1e5: %.4f (range [0.8, 1.2]); "
                  "border %zu -> %zu",
                  tag.c_str(), theta, r, family_border(m, fam, 1.0), family_border(m, fam, theta)));
      }
    });
    guarded("4c", tag, [&] {
      std::vector<double> ratios;
      for (std::size_t k : {1000u, 10000u, 100000u})
        ratios.push_back(strong_drift_diagnostic(make(Family::PartialDiffusive, k, {{"eps", eps}})).ratio);
      const bool up = ratios[0] < ratios[1] && ratios[1] < ratios[2];
      check("4c", up, fmt("%s: strong-drift ratio over n=1e3,1e4,1e5: %s strictly increasing", tag.c_str(),
                          join(ratios).c_str()));
    });
  }
  guarded("4d", "coalescence tail", [] {
    const std::size_t n = 10000, reps = 10000;
    const double eps = 0.4;
    const auto m = make(Family::PartialDiffusive, n, {{"eps", eps}});
    const double s = double(m.geometry().flat_edge);
    const double delta = 2 * (std::pow(double(n), 2 * eps) + std::pow(double(n), 1 - eps / 2));
    const auto st = independent_coupling(m, StateIndex(s), reps, 77, delta);
    for (const auto& p : coalescence_tail(st, {4, 8, 16})) {
      const double bound = 2 / p.theta + 1 / std::pow(double(n), eps) + 3 / std::sqrt(double(reps));
      check("4d", p.tail <= bound,
            fmt("n=1e4 eps=0.4 theta=%g: P(gamma > theta delta_n) = %.4f (bound %.4f)", p.theta, p.tail, bound));
    }
  });
  runtime("4z", clock, 180);
}

void criterion5() {
  Timer clock;
  guarded("5a", "Glauber lumping", [] {
    double worst = 0.0;
    for (double beta : {0.3, 0.7})
      for (std::size_t n : {2u, 4u, 6u, 8u, 10u}) {
        const auto g = make(Family::IsingGlauber, n, {{"beta", beta}});
        auto [coarse, lm] = lump(g);
        const auto start = default_start(g);
        const std::size_t T = 20 * n;
        const auto fine = tv_curve(g, Distribution::delta(g.state_count(), start), T, 1);
        const auto small = tv_curve(coarse, Distribution::delta(n + 1, lm.projection[start]), T, 1);
        for (std::size_t i = 0; i < fine.tv.size(); ++i) worst = std::max(worst, std::fabs(fine.tv[i] - small.tv[i]));
      }
    check("5a", worst <= 1e-12,
          fmt("Glauber vs magnetization TV, n<=10, beta in {0.3, 0.7}: max |diff| %.2e (tol 1e-12)", worst));
  });
  guarded("5b", "beta = 0 reduction", [] {
    std::size_t mismatches = 0;
    for (std::size_t n : {2u, 10u, 100u, 1000u}) {
      const auto a = make(Family::IsingMagnetization, n, {{"beta", 0.0}});
      const auto b = make(Family::EhrenfestUrn, n);
      for (StateIndex i = 0; i <= n; ++i) {
        const auto ra = a.row(i), rb = b.row(i);
        if (!std::equal(ra.begin(), ra.end(), rb.begin(), rb.end())) ++mismatches;
      }
    }
    check("5b", mismatches == 0, fmt("beta=0 magnetization rows bitwise equal to Ehrenfest: %zu mismatching rows", mismatches));
  });
  guarded("5c", "Ising midpoint", [] {
    const std::size_t n = 500;
    const double beta = 0.5;
    const auto p = profile_of(make(Family::IsingMagnetization, n, {{"beta", beta}}), kQuartiles);
    const double r = t_at(p, 0.5) / (n * std::log(double(n)) / (2 * (1 - beta)));
    check("5c", r >= 0.8 && r <= 1.25, fmt("t(1/2)/(n ln n/(2(1-beta))) at n=500, beta=0.5: %.4f (range [0.8, 1.25])", r));
  });
  guarded("5d", "Ising concentration", [] {
    const auto m = make(Family::IsingMagnetization, 500, {{"beta", 0.5}});
    const auto fam = family_for(m);
    const auto c = h_concentration(m, fam, 4.0);
    check("5d", c.mass_outside < c.bound,
          fmt("pi(outside A_{500,4}) = %.3e < c_beta/16 = %.3e (fitted c_beta = %.4f)", c.mass_outside, c.bound,
              fam.c_beta));
  });
  guarded("5e", "sandwich audit", [] {
    const auto m = make(Family::IsingMagnetization, 400, {{"beta", 0.5}});
    const auto r = sandwich_coupling(m, 8.0, 10000, 31);
    check("5e", r.stats.samples.size() == 10000,
          fmt("sandwich coupling n=400 beta=0.5, 10^4 replicas: 0 order violations over %llu audited steps "
              "(%zu replicas with W inside)",
              (unsigned long long)r.audited_steps, r.w_inside));
  });
  runtime("5z", clock, 300);
}

void criterion6() {
  Timer clock;
  guarded("6a", "rising-sequence counts", [] {
    std::size_t bad = 0, total = 0;
    for (unsigned n = 1; n <= 8; ++n)
      for (unsigned theta = 1; theta < n; ++theta) {
        ++total;
        if (count_R_theta(n, theta) != factorial(n) / factorial(theta + 1)) ++bad;
      }
    check("6a", bad == 0, fmt("|R_theta| = n!/(theta+1)! for n<=8, 1<=theta<n: %zu/%zu exact", total - bad, total));
  });
  guarded("6b", "card passage", [] {
    const unsigned n = 200;
    for (unsigned theta : {2u, 4u, 8u}) {
      const auto run = top_in_at_random_hitting(n, theta, 10000, 1000 + theta);
      const auto ci = run.tau.ci99();
      const double target = n * std::log(double(n)) - n * std::log(double(theta));
      check("6b", ci.first <= target && target <= ci.second,
            fmt("theta=%u: n ln n - n ln theta = %.1f vs 99%% CI [%.1f, %.1f]", theta, target, ci.first, ci.second));
      const double exact = tiar_tau_moments(n, theta).mean;
      info("6b", fmt("theta=%u: exact n(H_{n-1} - H_{theta-1}) = %.1f %s the CI", theta, exact,
                     ci.first <= exact && exact <= ci.second ? "inside" : "outside"));
      check("6c", run.zeta.values.size() == 10000,
            fmt("theta=%u: tau^{theta+1} <= zeta_theta <= tau^theta in all 10^4 replicas", theta));
    }
  });
  runtime("6z", clock, 120);
}

void criterion7() {
  Timer clock;
  std::vector<ChainModel> zoo{
      make(Family::CouponCollector, 500),
      make(Family::TopInAtRandom, 7),
      make(Family::BiasedSegment, 500),
      make(Family::EhrenfestUrn, 500),
      make(Family::HypercubeWalk, 12),
      make(Family::CylinderWalk, 0, {{"l", 60}, {"m", 7}, {"q", 0.8}, {"r", 0.6}}),
      make(Family::PartialDiffusive, 2000, {{"eps", 0.4}}),
      make(Family::IsingMagnetization, 500, {{"beta", 0.6}}),
      make(Family::IsingMagnetization, 200, {{"beta", 1.4}}),
      make(Family::IsingGlauber, 12, {{"beta", 0.5}}),
      make(Family::CylinderHeight, 300, {{"q", 0.6}}),
  };
  guarded("7a", "row-stochasticity", [&] {
    double worst = 0.0;
    std::size_t rows = 0;
    auto scan = [&](const ChainModel& m, std::size_t step) {
      for (StateIndex i = 0; i < m.state_count(); i += step) {
        double s = 0;
        for (const auto& t : m.row(i)) {
          if (t.prob < 0) worst = 1.0;
          s += t.prob;
        }
        worst = std::max(worst, std::fabs(s - 1.0));
        ++rows;
      }
    };
    for (const auto& m : zoo) scan(m, 1);
    scan(make(Family::PartialDiffusive, 400000, {{"eps", 0.3}}), 37);
    scan(make(Family::CylinderWalk, 200000, {{"omega", 0.3}}), 41);
    check("7a", worst <= 1e-12, fmt("row sums over %zu rows (exhaustive <= 1e5 states, sampled above): max |sum-1| %.2e", rows, worst));
  });
  guarded("7b", "TV monotonicity and mass", [&] {
    double worst_up = 0.0, worst_mass = 0.0;
    for (const auto& m : zoo) {
      const auto init = Distribution::delta(m.state_count(), default_start(m));
      const auto c = tv_curve(m, init, 2000, 1);
      for (std::size_t i = 1; i < c.tv.size(); ++i) worst_up = std::max(worst_up, c.tv[i] - c.tv[i - 1]);
      const auto d = evolve(m, init, 10000);
      worst_mass = std::max(worst_mass, std::fabs(d.total() - 1.0));
    }
    check("7b", worst_up <= 1e-12, fmt("largest TV increase along 2000-step curves: %.2e (tol 1e-12)", worst_up));
    check("7c", worst_mass <= 1e-12, fmt("mass drift after 10^4 steps: %.2e (tol 1e-12)", worst_mass));
  });
  guarded("7d", "Cantelli", [&] {
    std::size_t rows = 0, bad = 0;
    for (const auto& p : bd_passages(100)) {
      const auto s = mc_hitting(p.model, p.from, beyond(p.from, p.to), 4000, 5);
      for (const auto& r : cantelli_check(s, {1, 2, 4, 8})) {
        ++rows;
        bad += !r.pass;
      }
    }
    const auto t = top_in_at_random_hitting(100, 4, 4000, 5);
    for (const McSample* s : {&t.zeta, &t.tau, &t.tau_next})
      for (const auto& r : cantelli_check(*s, {1, 2, 4, 8})) {
        ++rows;
        bad += !r.pass;
      }
    check("7d", bad == 0, fmt("Cantelli bound with 3/sqrt(N) slack: %zu/%zu (theta, sample) pairs pass", rows - bad, rows));
  });
  guarded("7e", "nesting", [&] {
    std::size_t bad = 0, fams = 0;
    for (const auto& m : zoo) {
      NestedFamily fam;
      try {
        fam = family_for(m);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Unsupported || e.code() == ErrorCode::Parameter) continue;
        throw;
      }
      fam.theta_grid = {1, 1.5, 2, 3, 4, 6, 8, 16, 32};
      ++fams;
      bad += !check_nesting(m, fam);
    }
    const auto pd = make(Family::PartialDiffusive, 2000, {{"eps", 0.4}});
    auto lin = linear_misuse_family(pd);
    lin.theta_grid = {1, 2, 4, 8, 16};
    ++fams;
    bad += !check_nesting(pd, lin);
    check("7e", bad == 0, fmt("A_{n,theta} nested on the theta grid for %zu/%zu families", fams - bad, fams));
  });
  guarded("7f", "variance monotonicity", [&] {
    std::size_t rows = 0, bad = 0;
    for (const auto& tmpl : std::vector<ModelSpec>{{Family::EhrenfestUrn, 1000, {}},
                                                   {Family::PartialDiffusive, 10000, {{"eps", 0.3}}},
                                                   {Family::PartialDiffusive, 10000, {{"eps", 0.4}}},
                                                   {Family::IsingMagnetization, 1000, {{"beta", 0.5}}},
                                                   {Family::CylinderHeight, 200, {{"q", 0.7}}}}) {
      const auto m = build_model(tmpl);
      const auto fam = family_for(m);
      const auto v1 = theta_hitting_moments(m, fam, 1.0).variance;
      for (double theta : {2.0, 4.0, 8.0, 16.0, 64.0}) {
        ++rows;
        bad += theta_hitting_moments(m, fam, theta).variance > v1 * (1 + 1e-12);
      }
    }
    check("7f", bad == 0, fmt("Var[zeta_theta] <= Var[zeta_1]: %zu/%zu (family, theta) pairs", rows - bad, rows));
  });
  guarded("7g", "oracle equivalence", [&] {
    double worst = 0.0;
    std::string where;
    for (std::size_t n : {10u, 50u, 200u, 1000u, 2000u})
      for (const auto& p : bd_passages(n)) {
        const auto cf = bd_hitting_moments(p.model, p.from, p.to);
        const auto ls = linear_solve_hitting(p.model, p.from, beyond(p.from, p.to));
        const double e = std::max(rel(cf.mean, ls.mean), rel(cf.variance, ls.variance));
        if (e > worst) {
          worst = e;
          where = p.label + fmt(" n=%zu", n);
        }
      }
    check("7g", worst <= 1e-9,
          fmt("closed form vs linear solve on every birth-and-death family, n<=2000: max rel err %.2e at %s (tol 1e-9)",
              worst, where.c_str()));
  });
  guarded("7h", "determinism", [&] {
    const auto e = make(Family::EhrenfestUrn, 200);
    bool same = mc_hitting(e, 0, [](StateIndex x) { return x >= 90; }, 500, 9).values ==
                mc_hitting(e, 0, [](StateIndex x) { return x >= 90; }, 500, 9).values;
    const auto is = make(Family::IsingMagnetization, 200, {{"beta", 0.4}});
    same = same && sandwich_coupling(is, 8, 300, 4).stats.samples == sandwich_coupling(is, 8, 300, 4).stats.samples;
    const auto cyl = make(Family::CylinderWalk, 0, {{"l", 10}, {"m", 6}});
    same = same && cylinder_coupling(cyl, 0, 300, 4).stats.samples == cylinder_coupling(cyl, 0, 300, 4).stats.samples;
    same = same && top_in_at_random_hitting(50, 3, 200, 4).zeta.values ==
                       top_in_at_random_hitting(50, 3, 200, 4).zeta.values;
    const fs::path base = fs::temp_directory_path() / "cutoff_acceptance_determinism";
    const Config cfg = parse_config("model = PartialDiffusive\nparam.eps = 0.4\nn_grid = 200, 400\nreplicas = 200\n");
    std::string manifests[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path dir = base / std::to_string(k);
      fs::remove_all(dir);
      run_experiment("hitting", cfg, {std::nullopt, dir});
      std::ifstream f(dir / "manifest.txt");
      std::ostringstream s;
      s << f.rdbuf();
      manifests[k] = s.str();
    }
    fs::remove_all(base);
    same = same && manifests[0] == manifests[1];
    check("7h", same, "seeded Monte Carlo, couplings, shuffles and experiment manifests reproduce bit for bit");
  });
  guarded("7i", "window shrinkage", [&] {
    struct Grid {
      std::string label;
      std::vector<ChainModel> models;
    };
    std::vector<Grid> grids;
    Grid coupon{"CouponCollector", {}}, urn{"EhrenfestUrn", {}}, cyl{"CylinderWalk", {}}, ising{"IsingMagnetization", {}},
        seg{"BiasedSegment", {}}, pd{"PartialDiffusive", {}};
    for (std::size_t n : {100u, 200u, 400u, 800u, 1600u}) coupon.models.push_back(make(Family::CouponCollector, n));
    for (std::size_t n : {250u, 500u, 1000u, 2000u}) urn.models.push_back(make(Family::EhrenfestUrn, n));
    for (std::size_t l : {125u, 250u, 500u}) cyl.models.push_back(make(Family::CylinderWalk, 0, {{"l", double(l)}, {"m", 5}}));
    for (std::size_t n : {250u, 500u, 1000u}) ising.models.push_back(make(Family::IsingMagnetization, n, {{"beta", 0.5}}));
    for (std::size_t n : {50u, 100u, 200u, 400u}) seg.models.push_back(make(Family::BiasedSegment, n));
    for (std::size_t n : {1000u, 2000u, 4000u}) pd.models.push_back(make(Family::PartialDiffusive, n, {{"eps", 0.4}}));
    for (const auto& g : {coupon, urn, cyl, ising, seg, pd}) {
      std::vector<double> w;
      for (const auto& m : g.models) w.push_back(relative_window(profile_of(m, kQuartiles)));
      check("7i", strictly_decreasing(w),
            fmt("%s relative window over its grid: %s strictly decreasing", g.label.c_str(), join(w).c_str()));
    }
  });
  runtime("7z", clock, 180);
}

void criterion8() {
  Timer clock;
  guarded("8a", "figure 1", [] {
    const fs::path dir = fs::temp_directory_path() / "cutoff_acceptance_figure1";
    fs::remove_all(dir);
    const auto res = run_experiment("reproduce-figure1", Config{}, {std::nullopt, dir});
    std::size_t tables = 0;
    for (const auto& f : res.files) tables += f.path.rfind("figure1_BiasedSegment_n", 0) == 0;
    const bool index = fs::exists(dir / "figure1_index.txt");
    check("8a", tables == 4 && index, fmt("plot tables for n=50,100,200,400: %zu tables, index %s", tables,
                                           index ? "present" : "missing"));
    std::ifstream f(dir / "figure1_windows.csv");
    std::string line;
    std::getline(f, line);
    std::vector<double> w;
    while (std::getline(f, line)) w.push_back(std::stod(line.substr(line.rfind(',') + 1)));
    check("8b", w.size() == 4 && strictly_decreasing(w),
          fmt("relative window (t(1/4)-t(3/4))/t(1/2): %s strictly decreasing", join(w).c_str()));
    fs::remove_all(dir);
  });
  runtime("8z", clock, 60);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                    criterion5, criterion6, criterion7, criterion8};
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.push_back(std::atoi(argv[i]));
  if (chosen.empty())
    for (int i = 1; i <= 8; ++i) chosen.push_back(i);
  for (int c : chosen) {
    if (c < 1 || c > 8) {
      std::fprintf(stderr, "unknown criterion %d\n", c);
      return 2;
    }
    std::printf("== criterion %d\n", c);
    criteria[std::size_t(c - 1)]();
  }
  std::printf("%d failing check%s\n", g_failures, g_failures == 1 ? "" : "s");
  return g_failures == 0 ? 0 : 1;
}
