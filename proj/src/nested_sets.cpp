#include "cutoff/nested_sets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "cutoff/error.hpp"
#include "cutoff/numeric.hpp"
#include "cutoff/permutation.hpp"
#include "cutoff/rng.hpp"

namespace cutoff {

namespace {

void check_theta(double theta) {
  require(theta >= 1.0 && std::isfinite(theta), ErrorCode::Parameter, "theta must be >= 1");
}

// |2k| <= floor(theta * scale); k is a signed offset from the centre.
std::function<bool(double, StateIndex)> centred_band(std::size_t n, double scale,
                                                     std::function<long(StateIndex)> offset2) {
  return [n, scale, offset2](double theta, StateIndex x) {
    check_theta(theta);
    (void)n;
    const double reach = std::floor(theta * scale);
    return double(std::labs(offset2(x))) <= reach;
  };
}

NestedFamily ising_family(const ChainModel& model, double c_beta) {
  NestedFamily fam;
  fam.model = model.id();
  fam.family = model.family();
  const std::size_t n = model.n();
  const double beta = model.geometry().beta;
  require(beta < 1.0, ErrorCode::Parameter, "Ising nested sets need beta < 1");
  const double scale = std::sqrt(double(n) / (1.0 - beta));
  if (model.family() == Family::IsingGlauber) {
    fam.membership = centred_band(n, scale, [n](StateIndex x) { return 2 * long(std::popcount(x)) - long(n); });
  } else {
    fam.membership = centred_band(n, scale, [n](StateIndex x) { return 2 * long(x) - long(n); });
  }
  fam.c_beta = c_beta;
  fam.h_bound = [c_beta](double theta) { return c_beta / (theta * theta); };
  fam.start = default_start(model);
  return fam;
}

double outside_mass(const ChainModel& model, const NestedFamily& fam, double theta) {
  const auto lp = log_stationary(model);
  double log_out = numeric::kNegInf;
  for (std::size_t x = 0; x < lp.size(); ++x)
    if (!fam.contains(theta, x)) log_out = numeric::log_add(log_out, lp[x]);
  return std::exp(log_out);
}

}  // namespace

NestedFamily family_for(const ChainModel& model) {
  NestedFamily fam;
  fam.model = model.id();
  fam.family = model.family();
  fam.start = model.exact() ? default_start(model) : 0;
  const std::size_t n = model.n();
  switch (model.family()) {
    case Family::EhrenfestUrn:
    case Family::HypercubeWalk: {
      const double scale = std::sqrt(double(n));
      if (model.family() == Family::HypercubeWalk)
        fam.membership = centred_band(n, scale, [n](StateIndex x) { return 2 * long(std::popcount(x)) - long(n); });
      else
        fam.membership = centred_band(n, scale, [n](StateIndex x) { return 2 * long(x) - long(n); });
      fam.h_bound = [](double theta) { return 1.0 / (theta * theta); };
      return fam;
    }
    case Family::IsingMagnetization:
    case Family::IsingGlauber:
      return ising_family(model, fit_c_beta(model.geometry().beta));
    case Family::CylinderWalk:
    case Family::CylinderHeight: {
      const std::size_t m = model.family() == Family::CylinderWalk ? model.geometry().circumference : 1;
      const double alpha = (1.0 - model.geometry().q) / model.geometry().q;
      fam.membership = [m](double theta, StateIndex x) { return x / m < cylinder_inner_layers(theta); };
      fam.h_bound = [alpha](double theta) { return std::pow(alpha, double(cylinder_inner_layers(theta))); };
      return fam;
    }
    case Family::PartialDiffusive: {
      const double s = double(model.geometry().flat_edge);
      const double expo = std::pow(double(n), 2.0 * model.geometry().eps - 1.0);
      auto edge = [s, expo](double theta) {
        check_theta(theta);
        return std::floor(s * std::pow(theta, expo));
      };
      fam.membership = [edge](double theta, StateIndex x) { return double(x) <= edge(theta); };
      // Tail of the exact measure beyond b is at most (s/(b+1)) 2^{s-b} / (s+1).
      fam.h_bound = [edge, s](double theta) {
        const double b = edge(theta);
        return (s / (b + 1.0)) * std::exp2(s - b) / (s + 1.0);
      };
      return fam;
    }
    case Family::TopInAtRandom: {
      fam.membership = [n](double theta, StateIndex x) {
        check_theta(theta);
        const Deck deck = lehmer_unrank(x, unsigned(n));
        return double(rising_sequence_length(deck)) <= theta;
      };
      fam.h_bound = [](double theta) { return 1.0 / std::tgamma(std::floor(theta) + 1.0); };
      return fam;
    }
    default:
      fail(ErrorCode::Unsupported, model.id() + " has no nested-set family");
  }
}

NestedFamily linear_misuse_family(const ChainModel& model) {
  require(model.family() == Family::PartialDiffusive, ErrorCode::Unsupported,
          "the linear family is defined for the partially-diffusive walk only");
  NestedFamily fam = family_for(model);
  const double s = double(model.geometry().flat_edge);
  fam.membership = [s](double theta, StateIndex x) {
    check_theta(theta);
    return double(x) <= std::floor(theta * s);
  };
  fam.h_bound = [s](double theta) {
    const double b = std::floor(theta * s);
    return (s / (b + 1.0)) * std::exp2(s - b) / (s + 1.0);
  };
  return fam;
}

StateIndex family_border(const ChainModel& model, const NestedFamily& fam, double theta) {
  const std::size_t states = model.state_count();
  const StateIndex x = fam.start;
  if (fam.contains(theta, x)) return x;
  std::optional<StateIndex> below, above;
  for (StateIndex y = x; y-- > 0;)
    if (fam.contains(theta, y)) {
      below = y;
      break;
    }
  for (StateIndex y = x + 1; y < states; ++y)
    if (fam.contains(theta, y)) {
      above = y;
      break;
    }
  require(below || above, ErrorCode::Unreachable, "nested set is empty");
  if (!above) return *below;
  if (!below) return *above;
  return x - *below <= *above - x ? *below : *above;
}

HittingMoments theta_hitting_moments(const ChainModel& model, const NestedFamily& fam, double theta) {
  check_theta(theta);
  switch (model.family()) {
    case Family::CylinderWalk:
    case Family::CylinderHeight:
      return cylinder_hitting_moments(model, theta);
    case Family::HypercubeWalk:
    case Family::IsingGlauber: {
      auto [coarse, lm] = lump(model);
      NestedFamily cf = model.family() == Family::IsingGlauber ? ising_family(coarse, fam.c_beta) : family_for(coarse);
      cf.theta_grid = fam.theta_grid;
      return theta_hitting_moments(coarse, cf, theta);
    }
    default:
      break;
  }
  require(is_birth_death(model.family()), ErrorCode::Unsupported, model.id() + " has no closed-form hitting moments");
  return bd_hitting_moments(model, fam.start, family_border(model, fam, theta));
}

Concentration h_concentration(const ChainModel& model, const NestedFamily& fam, double theta) {
  Concentration c;
  if (model.family() == Family::TopInAtRandom && !model.exact()) {
    // Uniform measure; |complement| = n!/(floor(theta)+1)! by the rising-sequence count.
    check_theta(theta);
    const double t = std::floor(theta);
    c.mass_outside = t >= double(model.n()) ? 0.0 : 1.0 / std::tgamma(t + 2.0);
  } else {
    c.mass_outside = outside_mass(model, fam, theta);
  }
  c.bound = fam.h_bound(theta);
  c.pass = c.mass_outside < c.bound;
  return c;
}

bool check_nesting(const ChainModel& model, const NestedFamily& fam) {
  const std::size_t states = model.state_count();
  for (std::size_t g = 1; g < fam.theta_grid.size(); ++g) {
    const double lo = fam.theta_grid[g - 1], hi = fam.theta_grid[g];
    for (std::size_t x = 0; x < states; ++x)
      if (fam.contains(lo, x) && !fam.contains(hi, x)) return false;
  }
  return true;
}

HypothesisReport hypothesis_report(const ModelSpec& tmpl, const std::vector<std::size_t>& n_grid,
                                   const std::vector<double>& theta_grid, const DeltaRule& delta,
                                   const FamilyBuilder& builder) {
  require(!theta_grid.empty() && theta_grid.front() == 1.0, ErrorCode::Parameter,
          "theta grid must start at 1");
  HypothesisReport rep;
  rep.model = family_name(tmpl.family);
  double prev_sigma = std::numeric_limits<double>::infinity();
  double prev_eq8 = std::numeric_limits<double>::infinity();
  std::map<double, double> prev_eq9;
  for (std::size_t n : n_grid) {
    ModelSpec spec = tmpl;
    spec.n = n;
    const ChainModel model = build_model(spec);
    NestedFamily fam = builder(model);
    fam.theta_grid = theta_grid;
    const HittingMoments z1 = theta_hitting_moments(model, fam, 1.0);
    const double sigma_over_mean = quasi_determinism_ratio(z1);
    const double d = delta(model);
    const double eq8 = d / z1.mean;
    if (!(sigma_over_mean < prev_sigma)) rep.sigma_decreasing = false;
    if (!(eq8 < prev_eq8)) rep.eq8_decreasing = false;
    prev_sigma = sigma_over_mean;
    prev_eq8 = eq8;
    bool bounded = true;
    for (double theta : theta_grid) {
      const HittingMoments zt = theta_hitting_moments(model, fam, theta);
      HypothesisRow row;
      row.n = model.n();
      row.theta = theta;
      row.sigma_over_mean = sigma_over_mean;
      row.delta_n = d;
      row.eq8_ratio = eq8;
      row.eq9_ratio = (z1.mean - zt.mean) / (theta * d);
      row.var_monotone = zt.variance <= z1.variance * (1.0 + 1e-12);
      const Concentration c = h_concentration(model, fam, theta);
      row.mass_outside = c.mass_outside;
      row.h_bound = c.bound;
      if (!(std::isfinite(row.eq9_ratio) && row.eq9_ratio >= -1e-12)) bounded = false;
      if (theta > 1.0) {
        auto it = prev_eq9.find(theta);
        if (it != prev_eq9.end() && !(row.eq9_ratio < it->second)) rep.eq9_decreasing[theta] = false;
        rep.eq9_decreasing.emplace(theta, true);
        prev_eq9[theta] = row.eq9_ratio;
      }
      rep.rows.push_back(row);
    }
    rep.eq9_bounded[model.n()] = bounded;
  }
  return rep;
}

void write_hypothesis_csv(std::ostream& out, const HypothesisReport& report) {
  out << "n,theta,sigma_over_mean,eq8_ratio,eq9_ratio,var_monotone,mass_outside,h_bound\n";
  char buf[256];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n", r.n, r.theta, r.sigma_over_mean,
                  r.eq8_ratio, r.eq9_ratio, r.var_monotone ? 1 : 0, r.mass_outside, r.h_bound);
    out << buf;
  }
}

std::uint64_t count_R_theta(unsigned n, unsigned theta) {
  require(n >= 1 && n <= kMaxPermutationDeck, ErrorCode::Capacity,
          "rising-sequence enumeration refused above " + std::to_string(kMaxPermutationDeck) + " cards");
  require(theta >= 1, ErrorCode::Parameter, "theta must be >= 1");
  Deck deck(n);
  for (unsigned i = 0; i < n; ++i) deck[i] = std::uint8_t(i);
  std::uint64_t count = 0;
  do {
    if (rising_sequence_length(deck) >= theta + 1) ++count;
  } while (std::next_permutation(deck.begin(), deck.end()));
  return count;
}

TiarRun top_in_at_random_hitting(unsigned n, unsigned theta, std::size_t replicas, std::uint64_t seed) {
  require(n >= 2 && n <= 255, ErrorCode::Parameter, "deck size must lie in [2, 255]");
  require(theta >= 1 && theta <= n, ErrorCode::Parameter, "theta must lie in [1, n]");
  require(replicas >= 1, ErrorCode::Parameter, "replicas must be >= 1");
  TiarRun run;
  for (McSample* s : {&run.zeta, &run.tau, &run.tau_next}) {
    s->seed = seed;
    s->replicas = replicas;
    s->values.reserve(replicas);
  }
  // Face value c (1-based) is stored as c - 1.
  const std::uint8_t card_theta = std::uint8_t(theta - 1);
  const unsigned watched = std::min(theta + 1, n);  // cards 1..theta+1
  Deck deck(n);
  std::vector<unsigned> height(watched);
  for (std::size_t r = 0; r < replicas; ++r) {
    CounterRng rng(seed, r);
    for (unsigned i = 0; i < n; ++i) deck[i] = std::uint8_t(i);
    std::uint64_t t = 0;
    std::uint64_t zeta = theta >= n ? 0 : std::numeric_limits<std::uint64_t>::max();
    std::uint64_t tau = card_theta == n - 1 ? 0 : std::numeric_limits<std::uint64_t>::max();
    std::uint64_t tau_next = theta >= n ? 0 : (theta + 1 == n ? 0 : std::numeric_limits<std::uint64_t>::max());
    while (zeta == std::numeric_limits<std::uint64_t>::max() || tau == std::numeric_limits<std::uint64_t>::max()) {
      const std::uint8_t moved = deck.back();
      insert_top_card(deck, unsigned(rng.below(n)));
      ++t;
      const std::uint8_t top = deck.back();
      if (top == card_theta && tau == std::numeric_limits<std::uint64_t>::max()) tau = t;
      if (theta < n && top == theta && tau_next == std::numeric_limits<std::uint64_t>::max()) tau_next = t;
      if (zeta == std::numeric_limits<std::uint64_t>::max() && moved < watched) {
        for (unsigned pos = 0; pos < n; ++pos)
          if (deck[pos] < watched) height[deck[pos]] = pos;
        bool rising = true;
        for (unsigned c = 1; c < watched && rising; ++c) rising = height[c] > height[c - 1];
        if (!rising) zeta = t;
      }
    }
    require(tau_next <= zeta && zeta <= tau, ErrorCode::Audit,
            "rising-sequence sandwich violated in replica " + std::to_string(r));
    run.zeta.values.push_back(zeta);
    run.tau.values.push_back(tau);
    run.tau_next.values.push_back(tau_next);
  }
  return run;
}

HittingMoments tiar_tau_moments(unsigned n, unsigned theta) {
  require(theta >= 1 && theta <= n, ErrorCode::Parameter, "theta must lie in [1, n]");
  numeric::CompensatedSum mean, var;
  for (unsigned h = theta; h < n; ++h) {
    const double p = double(h) / double(n);
    mean.add(1.0 / p);
    var.add((1.0 - p) / (p * p));
  }
  return {mean.value(), var.value(), MomentSource::ClosedForm};
}

double fit_c_beta(double beta, const std::vector<std::size_t>& n_grid, double theta) {
  require(!n_grid.empty(), ErrorCode::Parameter, "c_beta fit needs a non-empty n grid");
  double c = 0.0;
  for (std::size_t n : n_grid) {
    const ChainModel model = build_model({Family::IsingMagnetization, n, {{"beta", beta}}});
    const NestedFamily fam = ising_family(model, 0.0);
    c = std::max(c, theta * theta * outside_mass(model, fam, theta));
  }
  return c;
}

}  // namespace cutoff
