#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cutoff/hitting.hpp"
#include "cutoff/model.hpp"

namespace cutoff {

inline const std::vector<double> kDefaultThetaGrid{1, 2, 4, 8, 16};

struct NestedFamily {
  std::string model;
  Family family = Family::EhrenfestUrn;
  std::vector<double> theta_grid = kDefaultThetaGrid;
  std::function<bool(double theta, StateIndex x)> membership;
  std::function<double(double theta)> h_bound;
  StateIndex start = 0;
  double c_beta = 0.0;  // Ising only

  bool contains(double theta, StateIndex x) const { return membership(theta, x); }
};

NestedFamily family_for(const ChainModel& model);

// Linear alternative {i <= theta * n^eps} for the partially-diffusive walk.
NestedFamily linear_misuse_family(const ChainModel& model);

// First state of A_{n,theta} met when walking from fam.start along the
// segment of a birth-and-death model.
StateIndex family_border(const ChainModel& model, const NestedFamily& fam, double theta);

// Moments of the hitting time of A_{n,theta} from fam.start.
HittingMoments theta_hitting_moments(const ChainModel& model, const NestedFamily& fam, double theta);

struct Concentration {
  double mass_outside = 0.0;
  double bound = 0.0;
  bool pass = false;
};
Concentration h_concentration(const ChainModel& model, const NestedFamily& fam, double theta);

// Checks A_{theta'} within A_{theta''} for consecutive grid points over the
// whole state space.
bool check_nesting(const ChainModel& model, const NestedFamily& fam);

using DeltaRule = std::function<double(const ChainModel&)>;
using FamilyBuilder = std::function<NestedFamily(const ChainModel&)>;

struct HypothesisRow {
  std::size_t n = 0;
  double theta = 0.0;
  double sigma_over_mean = 0.0;
  double delta_n = 0.0;
  double eq8_ratio = 0.0;
  double eq9_ratio = 0.0;
  bool var_monotone = true;
  double mass_outside = 0.0;
  double h_bound = 0.0;
};

struct HypothesisReport {
  std::string model;
  std::vector<HypothesisRow> rows;
  bool sigma_decreasing = true;             // sigma/E along the n grid
  bool eq8_decreasing = true;               // Delta_n / E along the n grid
  std::map<double, bool> eq9_decreasing;    // per theta, along the n grid
  std::map<std::size_t, bool> eq9_bounded;  // per n, ratios finite and non-negative
};

HypothesisReport hypothesis_report(const ModelSpec& tmpl, const std::vector<std::size_t>& n_grid,
                                   const std::vector<double>& theta_grid, const DeltaRule& delta,
                                   const FamilyBuilder& builder = family_for);

void write_hypothesis_csv(std::ostream& out, const HypothesisReport& report);

// Number of permutations of n cards whose first rising sequence has length
// at least theta + 1.
std::uint64_t count_R_theta(unsigned n, unsigned theta);

struct TiarRun {
  McSample zeta;       // hitting time of A_{n,theta}
  McSample tau;        // card theta reaches the top
  McSample tau_next;   // card theta + 1 reaches the top
};

// Shuffles from the sorted deck; throws Audit if tau_next <= zeta <= tau
// fails in any replica.
TiarRun top_in_at_random_hitting(unsigned n, unsigned theta, std::size_t replicas, std::uint64_t seed);

// Exact moments of tau^theta: sum over heights h = theta..n-1 of a geometric
// wait with success probability h/n.
HittingMoments tiar_tau_moments(unsigned n, unsigned theta);

inline const std::vector<std::size_t> kCBetaGrid{50, 100, 200, 400, 800, 1600};

// max over the grid of theta^2 * pi(outside A_{n,theta}) for the Ising
// magnetization chain.
double fit_c_beta(double beta, const std::vector<std::size_t>& n_grid = kCBetaGrid, double theta = 4.0);

}  // namespace cutoff
