#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cutoff {

using StateIndex = std::size_t;

enum class Family {
  CouponCollector,
  TopInAtRandom,
  BiasedSegment,
  EhrenfestUrn,
  HypercubeWalk,
  CylinderWalk,
  PartialDiffusive,
  IsingMagnetization,
  IsingGlauber,
  // Height projection of CylinderWalk; produced by lump(), also buildable.
  CylinderHeight,
};

const char* family_name(Family f) noexcept;
Family parse_family(const std::string& name);
bool is_birth_death(Family f) noexcept;

struct ModelSpec {
  Family family = Family::EhrenfestUrn;
  std::size_t n = 0;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const;
  bool has(const std::string& key) const { return params.count(key) != 0; }
};

// Exact enumeration caps.
inline constexpr std::size_t kMaxPermutationDeck = 8;   // 8! = 40320 states
inline constexpr std::size_t kMaxGlauberSpins = 14;     // 2^14 states
inline constexpr std::size_t kMaxHypercubeDim = 20;

struct Transition {
  StateIndex to;
  double prob;
  bool operator==(const Transition&) const = default;
};

// Resolved, integer-rounded quantities a family needs. Fields irrelevant to a
// family keep their defaults.
struct Geometry {
  std::size_t layers = 0;     // cylinder l
  std::size_t circumference = 0;  // cylinder m
  std::size_t flat_edge = 0;  // partially-diffusive round(n^eps)
  double q = 0.0;             // cylinder vertical bias
  double r = 0.0;             // cylinder horizontal bias
  double eps = 0.0;
  double beta = 0.0;
  double down = 0.0, stay = 0.0, up = 0.0;  // biased segment
};

struct Distribution {
  std::vector<double> values;

  static Distribution delta(std::size_t size, StateIndex at);
  static Distribution uniform(std::size_t size);

  std::size_t size() const noexcept { return values.size(); }
  double total() const;
  // Throws Parameter if any entry is negative or the mass is off by > tol.
  void validate(double tol = 1e-12) const;
};

struct LumpMap {
  std::vector<StateIndex> projection;
  std::size_t coarse_count = 0;
};

// Immutable chain instance; copies share the transition storage.
class ChainModel {
 public:
  const ModelSpec& spec() const noexcept;
  Family family() const noexcept;
  std::size_t n() const noexcept;
  const Geometry& geometry() const noexcept;
  std::string id() const;

  // False for TopInAtRandom above the enumeration cap.
  bool exact() const noexcept;
  std::size_t state_count() const;
  std::size_t transition_count() const;
  std::size_t max_row_size() const;

  // Cylinder net vertical drift (2q - 1) / 2.
  std::optional<double> drift_beta() const noexcept;

  std::span<const Transition> row(StateIndex state) const;

  // Inverse-CDF draw of the successor of `state` given u in [0, 1).
  StateIndex sample_next(StateIndex state, double u) const;

 private:
  struct Impl;
  explicit ChainModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;

  friend ChainModel build_model(const ModelSpec& spec);
  friend class ModelBuilder;
};

ChainModel build_model(const ModelSpec& spec);

// Checked row access; Index error when out of range.
std::span<const Transition> transition_row(const ChainModel& model, StateIndex state);

// Closed-form stationary measure in log space (unnormalized entries are fine
// for ratios; the vector is normalized so that log_sum_exp == 0).
std::vector<double> log_stationary(const ChainModel& model);
Distribution stationary(const ChainModel& model);

// One push-style application next = cur * P. `next` is resized and zeroed.
void apply_transition(const ChainModel& model, std::span<const double> cur, std::vector<double>& next);

// ||dist * P - dist||_1.
double stationarity_residual(const ChainModel& model, const Distribution& dist);

// Conventional initial state for each family (worst-case start).
StateIndex default_start(const ChainModel& model);

std::pair<ChainModel, LumpMap> lump(const ChainModel& model);
Distribution project_distribution(const Distribution& dist, const LumpMap& lm);

// Nearest-neighbour rates of a birth-and-death model read off its rows.
struct BdRates {
  std::vector<double> up, down, hold;
  std::size_t size() const noexcept { return up.size(); }
};
BdRates birth_death_rates(const ChainModel& model);

// Cylinder coordinates; index = h * m + phi.
struct CylinderPoint {
  std::size_t h, phi;
};
CylinderPoint cylinder_point(const ChainModel& model, StateIndex index);
StateIndex cylinder_index(const ChainModel& model, CylinderPoint p);

// Magnetization index helpers: index i <-> k = i - n/2.
inline long magnetization_of(std::size_t n, StateIndex i) { return long(i) - long(n / 2); }
inline StateIndex magnetization_index(std::size_t n, long k) { return StateIndex(k + long(n / 2)); }

}  // namespace cutoff
