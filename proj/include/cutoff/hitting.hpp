#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "cutoff/model.hpp"

namespace cutoff {

enum class MomentSource { ClosedForm, LinearSolve, MonteCarlo };

struct HittingMoments {
  double mean = 0.0;      // steps
  double variance = 0.0;  // steps^2
  MomentSource source = MomentSource::ClosedForm;
};

struct McSample {
  std::vector<std::uint64_t> values;
  std::uint64_t seed = 0;
  std::size_t replicas = 0;

  double mean() const;
  double variance() const;  // unbiased
  double sd() const;
  // Normal-approximation 99% interval for the mean.
  std::pair<double, double> ci99() const;
};

struct DriftDiagnostic {
  std::size_t n = 0;
  double K_q = 0.0;
  double K_n = 0.0;
  double descent_mean = 0.0;
  double ratio = 0.0;
};

struct CantelliRow {
  double theta = 0.0;
  double tail = 0.0;
  double bound = 0.0;
  bool pass = true;
};

using StatePredicate = std::function<bool(StateIndex)>;

// Per-level descent moments m_k = E[T_{k->k-1}], v_k = Var[T_{k->k-1}] for
// k = 1..N of a birth-and-death chain; index 0 is unused.
struct LevelMoments {
  std::vector<double> mean, variance;
};
LevelMoments bd_descent_levels(const ChainModel& model);
// Same for the ascent k -> k+1, stored at index k (the top index is unused).
LevelMoments bd_ascent_levels(const ChainModel& model);

HittingMoments bd_visit_moments(const ChainModel& model, StateIndex k);

// First passage from `from` to `to`; descending when to < from, otherwise
// ascending.
HittingMoments bd_hitting_moments(const ChainModel& model, StateIndex from, StateIndex to);

// Passage of the cylinder walk from the top layer into {h < sqrt(theta)}.
HittingMoments cylinder_hitting_moments(const ChainModel& model, double theta);
// Number of layers h with h < sqrt(theta).
std::size_t cylinder_inner_layers(double theta);

struct McOptions {
  std::optional<double> expected_mean;  // sets the default budget to 1000x
  std::optional<std::uint64_t> step_budget;
};

McSample mc_hitting(const ChainModel& model, StateIndex init, const StatePredicate& target,
                    std::size_t replicas, std::uint64_t seed, const McOptions& opts = {});

std::vector<CantelliRow> cantelli_check(const McSample& sample, const std::vector<double>& theta_grid);

double quasi_determinism_ratio(const HittingMoments& m);

DriftDiagnostic strong_drift_diagnostic(const ChainModel& model);

inline constexpr std::size_t kLinearSolveCap = 20'000;

HittingMoments linear_solve_hitting(const ChainModel& model, StateIndex init, const StatePredicate& target);

void write_mc_csv(std::ostream& out, const McSample& sample);
void write_drift_csv(std::ostream& out, const std::vector<DriftDiagnostic>& rows);

}  // namespace cutoff
