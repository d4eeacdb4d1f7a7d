#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "cutoff/model.hpp"

namespace cutoff {

struct CoalescenceStats {
  std::vector<std::uint64_t> samples;  // gamma per replica
  StateIndex z0 = 0;
  double delta_n = 1.0;
};

struct TailPoint {
  double theta = 0.0;
  double tail = 0.0;
};

inline constexpr std::uint64_t kDefaultCouplingSteps = 100'000'000ULL;

// Z from z0, W drawn from pi, independent moves until they meet.
CoalescenceStats independent_coupling(const ChainModel& model, StateIndex z0, std::size_t replicas,
                                      std::uint64_t seed, double delta_n = 1.0,
                                      std::uint64_t max_steps = kDefaultCouplingSteps);

// Optional explicit starts, as magnetizations k (index = k + n/2).
struct SandwichStarts {
  long z = 0;
  long z_plus = 0;
  std::optional<long> w;  // drawn from pi when absent
};

struct SandwichResult {
  CoalescenceStats stats;
  std::vector<std::uint64_t> tau0;  // first time Z+ = Z- (= 0)
  long z0 = 0, z0_plus = 0;
  std::size_t w_inside = 0;         // replicas with |W^0| <= z0_plus
  std::uint64_t audited_steps = 0;
};

// Default starts: z0 = floor(sqrt(n/(1-beta))/2), z0+ = floor(that * theta^(1/3)).
SandwichResult sandwich_coupling(const ChainModel& model, double theta, std::size_t replicas, std::uint64_t seed,
                                 std::optional<SandwichStarts> starts = std::nullopt, double delta_n = 0.0,
                                 std::uint64_t max_steps = kDefaultCouplingSteps);

// Next magnetization under the shared-uniform monotone rule.
long sandwich_step(const std::vector<double>& up, const std::vector<double>& down, std::size_t n, long k, double u);

struct CylinderCouplingResult {
  CoalescenceStats stats;
  std::vector<std::uint64_t> gamma_H, gamma_Phi;
  std::size_t top_merges = 0;  // replicas where H reached 0 with W off the bottom layer
};

// One step of the cylinder coupling for a pair with h(z) <= h(w); u drives both copies.
std::pair<CylinderPoint, CylinderPoint> cylinder_coupled_step(const ChainModel& model, CylinderPoint z,
                                                              CylinderPoint w, double u);

CylinderCouplingResult cylinder_coupling(const ChainModel& model, StateIndex z0, std::size_t replicas,
                                         std::uint64_t seed, std::optional<StateIndex> w0 = std::nullopt,
                                         std::uint64_t max_steps = kDefaultCouplingSteps);

std::vector<TailPoint> coalescence_tail(const CoalescenceStats& stats, const std::vector<double>& theta_grid);

// Inverse-CDF draw from a distribution.
StateIndex sample_from(const Distribution& dist, double u);

void write_coalescence_csv(std::ostream& out, const CoalescenceStats& stats);
void write_cylinder_coupling_csv(std::ostream& out, const CylinderCouplingResult& result);

}  // namespace cutoff
