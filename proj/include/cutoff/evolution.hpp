#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cutoff/model.hpp"

namespace cutoff {

struct TvCurve {
  std::string model;
  std::size_t n = 0;
  std::size_t stride = 1;
  std::vector<std::size_t> times;
  std::vector<double> tv;
};

struct MixingProfile {
  std::string model;
  std::size_t n = 0;
  std::vector<double> eps_grid;       // decreasing
  std::vector<std::size_t> t_eps;     // first sampled crossing per eps
  std::size_t quantization = 1;       // curve stride
};

// Work limit for curve computations, in units of state_count * samples.
inline constexpr std::uint64_t kDefaultCurveBudget = 4'000'000'000ULL;

Distribution evolve(const ChainModel& model, const Distribution& dist, std::size_t steps);

double tv_distance(const Distribution& a, const Distribution& b);

TvCurve tv_curve(const ChainModel& model, const Distribution& init, std::size_t t_max,
                 std::size_t stride, std::uint64_t budget = kDefaultCurveBudget);

// Samples every `stride` steps until tv <= floor; Coverage error past t_cap.
TvCurve tv_curve_until(const ChainModel& model, const Distribution& init, double floor,
                       std::size_t stride, std::size_t t_cap,
                       std::uint64_t budget = kDefaultCurveBudget);

MixingProfile mixing_profile(const TvCurve& curve, const std::vector<double>& eps_grid);

// Lazy power iteration from the uniform vector, stopping once successive
// iterates differ by less than tol in L1.
Distribution power_iteration_stationary(const ChainModel& model, double tol = 1e-13,
                                        std::size_t max_iter = 10'000'000);

// `model,n,t,tv` with 17 significant digits.
void write_tv_csv(std::ostream& out, const TvCurve& curve, bool header = true);

}  // namespace cutoff
