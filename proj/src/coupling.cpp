#include "cutoff/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "cutoff/error.hpp"
#include "cutoff/rng.hpp"

namespace cutoff {

namespace {

constexpr std::uint64_t kUnset = std::numeric_limits<std::uint64_t>::max();

class CdfSampler {
 public:
  explicit CdfSampler(const Distribution& d) : cdf_(d.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) cdf_[i] = acc += d.values[i];
  }
  StateIndex operator()(double u) const {
    const double target = u * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    if (it == cdf_.end()) --it;
    // Skip zero-mass states that share the cumulative value.
    return StateIndex(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

int order(long a, long b) { return (a > b) - (a < b); }

void audit_order(long before_a, long before_b, long after_a, long after_b, std::size_t replica, const char* pair) {
  if (order(before_a, before_b) * order(after_a, after_b) < 0)
    fail(ErrorCode::Audit, std::string("sandwich order flipped for ") + pair + " in replica " + std::to_string(replica));
}

}  // namespace

StateIndex sample_from(const Distribution& dist, double u) { return CdfSampler(dist)(u); }

CoalescenceStats independent_coupling(const ChainModel& model, StateIndex z0, std::size_t replicas, std::uint64_t seed,
                                      double delta_n, std::uint64_t max_steps) {
  require(replicas >= 1, ErrorCode::Parameter, "replicas must be >= 1");
  require(z0 < model.state_count(), ErrorCode::Index, "z0 out of range");
  require(delta_n > 0.0, ErrorCode::Parameter, "delta_n must be positive");
  const CdfSampler draw_pi(stationary(model));
  CoalescenceStats stats;
  stats.z0 = z0;
  stats.delta_n = delta_n;
  stats.samples.reserve(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    CounterRng rng(seed, r);
    StateIndex w = draw_pi(rng.uniform());
    StateIndex z = z0;
    std::uint64_t t = 0;
    while (z != w) {
      if (t >= max_steps)
        throw TimeoutError("independent coupling exceeded " + std::to_string(max_steps) + " steps", r);
      z = model.sample_next(z, rng.uniform());
      w = model.sample_next(w, rng.uniform());
      ++t;
    }
    stats.samples.push_back(t);
  }
  return stats;
}

long sandwich_step(const std::vector<double>& up, const std::vector<double>& down, std::size_t n, long k, double u) {
  const StateIndex i = magnetization_index(n, k);
  const double p = up[i], q = down[i];
  if (k > 0) {
    if (u < p) return k + 1;
    if (u > 1.0 - q) return k - 1;
    return k;
  }
  if (k < 0) {
    if (u < q) return k - 1;
    if (u > 1.0 - p) return k + 1;
    return k;
  }
  // At the centre the down interval sits next to the up interval so that
  // copies at -1 and 0 cannot exchange places.
  if (u < p) return 1;
  if (u > p && u < p + q) return -1;
  return 0;
}

SandwichResult sandwich_coupling(const ChainModel& model, double theta, std::size_t replicas, std::uint64_t seed,
                                 std::optional<SandwichStarts> starts, double delta_n, std::uint64_t max_steps) {
  require(model.family() == Family::EhrenfestUrn || model.family() == Family::IsingMagnetization,
          ErrorCode::Unsupported, "sandwich coupling needs the Ehrenfest or magnetization chain");
  const std::size_t n = model.n();
  require(n % 2 == 0, ErrorCode::Parameter, "sandwich coupling needs an even n");
  require(theta > 1.0, ErrorCode::Parameter, "sandwich coupling needs theta > 1");
  require(replicas >= 1, ErrorCode::Parameter, "replicas must be >= 1");
  const double beta = model.geometry().beta;
  require(beta < 1.0, ErrorCode::Parameter, "sandwich coupling needs beta < 1");
  const BdRates rates = birth_death_rates(model);
  const long half = long(n / 2);

  SandwichResult res;
  if (starts) {
    res.z0 = starts->z;
    res.z0_plus = starts->z_plus;
  } else {
    const double z0 = 0.5 * std::sqrt(double(n) / (1.0 - beta));
    res.z0 = long(std::floor(z0));
    res.z0_plus = long(std::floor(z0 * std::cbrt(theta)));
  }
  require(std::labs(res.z0) <= half && res.z0_plus <= half && res.z0_plus >= 0, ErrorCode::Parameter,
          "sandwich starts out of range");
  require(std::labs(res.z0) <= res.z0_plus, ErrorCode::Parameter, "z0 must lie within [-z0+, z0+]");
  res.stats.z0 = magnetization_index(n, res.z0);
  res.stats.delta_n = delta_n > 0.0 ? delta_n : double(n);
  res.stats.samples.reserve(replicas);
  res.tau0.reserve(replicas);

  const CdfSampler draw_pi(stationary(model));
  for (std::size_t r = 0; r < replicas; ++r) {
    CounterRng rng(seed, r);
    long w = (starts && starts->w) ? *starts->w : magnetization_of(n, draw_pi(rng.uniform()));
    require(std::labs(w) <= half, ErrorCode::Parameter, "W start out of range");
    long z = res.z0, zp = res.z0_plus, zm = -res.z0_plus;
    const bool inside = std::labs(w) <= res.z0_plus;
    if (inside) ++res.w_inside;
    std::uint64_t t = 0, gamma = (z == w) ? 0 : kUnset, tau0 = (zp == zm) ? 0 : kUnset;
    while (gamma == kUnset || tau0 == kUnset) {
      if (t >= max_steps)
        throw TimeoutError("sandwich coupling exceeded " + std::to_string(max_steps) + " steps", r);
      const double u = rng.uniform();
      const long z2 = sandwich_step(rates.up, rates.down, n, z, u);
      const long w2 = sandwich_step(rates.up, rates.down, n, w, u);
      const long zp2 = sandwich_step(rates.up, rates.down, n, zp, u);
      const long zm2 = sandwich_step(rates.up, rates.down, n, zm, u);
      ++t;
      audit_order(z, w, z2, w2, r, "(Z, W)");
      audit_order(zm, z, zm2, z2, r, "(Z-, Z)");
      audit_order(z, zp, z2, zp2, r, "(Z, Z+)");
      audit_order(zm, w, zm2, w2, r, "(Z-, W)");
      audit_order(w, zp, w2, zp2, r, "(W, Z+)");
      audit_order(zm, zp, zm2, zp2, r, "(Z-, Z+)");
      if (gamma != kUnset && z2 != w2)
        fail(ErrorCode::Audit, "coupled copies separated in replica " + std::to_string(r));
      z = z2;
      w = w2;
      zp = zp2;
      zm = zm2;
      if (tau0 == kUnset && zp != -zm)
        fail(ErrorCode::Audit, "antisymmetry Z+ = -Z- broken in replica " + std::to_string(r));
      if (!(zm <= z && z <= zp)) fail(ErrorCode::Audit, "Z left the sandwich in replica " + std::to_string(r));
      if (inside && !(zm <= w && w <= zp))
        fail(ErrorCode::Audit, "W left the sandwich in replica " + std::to_string(r));
      if (gamma == kUnset && z == w) gamma = t;
      if (tau0 == kUnset && zp == zm) tau0 = t;
    }
    if (inside && gamma > tau0)
      fail(ErrorCode::Audit, "coalescence after the sandwich closed in replica " + std::to_string(r));
    res.audited_steps += t;
    res.stats.samples.push_back(gamma);
    res.tau0.push_back(tau0);
  }
  return res;
}

std::pair<CylinderPoint, CylinderPoint> cylinder_coupled_step(const ChainModel& model, CylinderPoint z,
                                                              CylinderPoint w, double u) {
  const Geometry& g = model.geometry();
  const std::size_t l = g.layers, m = g.circumference;
  const double q = g.q, r = g.r;
  auto wrap = [m](std::size_t phi, int dir) { return dir > 0 ? (phi + 1) % m : (phi + m - 1) % m; };
  const std::size_t d_phi = z.phi > w.phi ? z.phi - w.phi : w.phi - z.phi;
  const std::size_t H = w.h - z.h, Phi = std::min(d_phi, m - d_phi);
  CylinderPoint z2 = z, w2 = w;
  auto shared = [&](double v) {
    if (v < q / 2.0) {
      if (z2.h > 0) --z2.h;
      if (w2.h > 0) --w2.h;
    } else if (v < 0.5) {
      if (z2.h + 1 < l) ++z2.h;
      if (w2.h + 1 < l) ++w2.h;
    } else {
      const int dir = v < 0.5 + r / 2.0 ? 1 : -1;
      z2.phi = wrap(z2.phi, dir);
      w2.phi = wrap(w2.phi, dir);
    }
  };
  // Horizontal move of one copy; sub-uniform v in [0,1) picks the direction.
  auto side = [&](CylinderPoint& c, double v) { c.phi = wrap(c.phi, v < r ? 1 : -1); };
  if (H > 0 || Phi == 0 || (z.h > 0 && z.h + 1 < l)) {
    shared(u);
  } else if (z.h == 0) {
    const double a = q / 2.0;
    if (u < a) {
      side(w2, u / a);
    } else if (u < 2.0 * a) {
      side(z2, (u - a) / a);
    } else if (u < q + (1.0 - q) / 2.0) {
      ++z2.h;
      ++w2.h;
    } else {
      const double v = (u - (q + (1.0 - q) / 2.0)) / ((1.0 - q) / 2.0);
      const int dir = v < r ? 1 : -1;
      z2.phi = wrap(z2.phi, dir);
      w2.phi = wrap(w2.phi, dir);
    }
  } else {
    // Top layer, same height: the up-clip mass (1-q)/2 drives the sideways moves.
    const double a = (1.0 - q) / 2.0;
    const double d = q / 2.0;
    if (u < d) {
      --z2.h;
      --w2.h;
    } else if (u < d + a) {
      side(w2, (u - d) / a);
    } else if (u < d + 2.0 * a) {
      side(z2, (u - d - a) / a);
    } else {
      const double v = (u - d - 2.0 * a) / (1.0 - d - 2.0 * a);
      const int dir = v < r ? 1 : -1;
      z2.phi = wrap(z2.phi, dir);
      w2.phi = wrap(w2.phi, dir);
    }
  }
  return {z2, w2};
}

CylinderCouplingResult cylinder_coupling(const ChainModel& model, StateIndex z0, std::size_t replicas,
                                         std::uint64_t seed, std::optional<StateIndex> w0, std::uint64_t max_steps) {
  require(model.family() == Family::CylinderWalk, ErrorCode::Unsupported, "cylinder coupling needs a cylinder model");
  require(replicas >= 1, ErrorCode::Parameter, "replicas must be >= 1");
  const std::size_t m = model.geometry().circumference;
  const CylinderPoint zstart = cylinder_point(model, z0);
  require(zstart.h == 0, ErrorCode::Parameter, "z0 must lie on the bottom layer");
  if (w0) (void)cylinder_point(model, *w0);

  CylinderCouplingResult res;
  res.stats.z0 = z0;
  res.stats.delta_n = double(m) * double(m);
  const CdfSampler draw_pi(stationary(model));

  auto circ = [m](std::size_t a, std::size_t b) {
    const std::size_t d = a > b ? a - b : b - a;
    return std::min(d, m - d);
  };

  for (std::size_t rep = 0; rep < replicas; ++rep) {
    CounterRng rng(seed, rep);
    CylinderPoint z = zstart;
    CylinderPoint w = cylinder_point(model, w0 ? *w0 : draw_pi(rng.uniform()));
    std::uint64_t t = 0;
    std::uint64_t gamma_h = (w.h == z.h) ? 0 : kUnset;
    std::uint64_t gamma_phi = (w.phi == z.phi) ? 0 : kUnset;
    bool top_merge = false;
    while (gamma_h == kUnset || gamma_phi == kUnset) {
      if (t >= max_steps)
        throw TimeoutError("cylinder coupling exceeded " + std::to_string(max_steps) + " steps", rep);
      const std::size_t H = w.h - z.h;
      const std::size_t Phi = circ(z.phi, w.phi);
      const auto [z2, w2] = cylinder_coupled_step(model, z, w, rng.uniform());
      ++t;
      if (z2.h > w2.h) fail(ErrorCode::Audit, "h(Z) > h(W) in replica " + std::to_string(rep));
      const std::size_t H2 = w2.h - z2.h;
      if (H2 > H) fail(ErrorCode::Audit, "height distance grew in replica " + std::to_string(rep));
      if (H > 0 && circ(z2.phi, w2.phi) != Phi)
        fail(ErrorCode::Audit, "angular distance moved before heights merged in replica " + std::to_string(rep));
      if (gamma_h != kUnset && H2 != 0) fail(ErrorCode::Audit, "heights separated in replica " + std::to_string(rep));
      if (gamma_h != kUnset && gamma_phi != kUnset && (z2.h != w2.h || z2.phi != w2.phi))
        fail(ErrorCode::Audit, "coupled copies separated in replica " + std::to_string(rep));
      if (gamma_h == kUnset && H2 == 0) {
        gamma_h = t;
        if (w2.h != 0) top_merge = true;
      }
      if (gamma_phi == kUnset && z2.phi == w2.phi) gamma_phi = t;
      z = z2;
      w = w2;
    }
    const std::uint64_t gamma = std::max(gamma_h, gamma_phi);
    if (z.h != w.h || z.phi != w.phi)
      fail(ErrorCode::Audit, "gamma != max(gamma_H, gamma_Phi) in replica " + std::to_string(rep));
    if (top_merge) ++res.top_merges;
    res.stats.samples.push_back(gamma);
    res.gamma_H.push_back(gamma_h);
    res.gamma_Phi.push_back(gamma_phi);
  }
  return res;
}

std::vector<TailPoint> coalescence_tail(const CoalescenceStats& stats, const std::vector<double>& theta_grid) {
  require(!stats.samples.empty(), ErrorCode::Parameter, "empty coalescence sample");
  require(stats.delta_n > 0.0, ErrorCode::Parameter, "delta_n must be positive");
  std::vector<std::uint64_t> sorted = stats.samples;
  std::sort(sorted.begin(), sorted.end());
  std::vector<TailPoint> out;
  for (double theta : theta_grid) {
    const double cut = theta * stats.delta_n;
    // Count gamma > cut.
    auto it = std::upper_bound(sorted.begin(), sorted.end(), cut,
                               [](double c, std::uint64_t v) { return c < double(v); });
    out.push_back({theta, double(sorted.end() - it) / double(sorted.size())});
  }
  return out;
}

void write_coalescence_csv(std::ostream& out, const CoalescenceStats& stats) {
  out << "replica,gamma\n";
  for (std::size_t r = 0; r < stats.samples.size(); ++r) out << r << ',' << stats.samples[r] << '\n';
}

void write_cylinder_coupling_csv(std::ostream& out, const CylinderCouplingResult& result) {
  out << "replica,gamma,gamma_H,gamma_Phi\n";
  for (std::size_t r = 0; r < result.stats.samples.size(); ++r)
    out << r << ',' << result.stats.samples[r] << ',' << result.gamma_H[r] << ',' << result.gamma_Phi[r] << '\n';
}

}  // namespace cutoff
