#include "cutoff/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "cutoff/error.hpp"
#include "cutoff/numeric.hpp"
#include "cutoff/permutation.hpp"

namespace cutoff {

namespace {

constexpr struct {
  Family family;
  const char* name;
} kFamilyNames[] = {
    {Family::CouponCollector, "CouponCollector"},
    {Family::TopInAtRandom, "TopInAtRandom"},
    {Family::BiasedSegment, "BiasedSegment"},
    {Family::EhrenfestUrn, "EhrenfestUrn"},
    {Family::HypercubeWalk, "HypercubeWalk"},
    {Family::CylinderWalk, "CylinderWalk"},
    {Family::PartialDiffusive, "PartialDiffusive"},
    {Family::IsingMagnetization, "IsingMagnetization"},
    {Family::IsingGlauber, "IsingGlauber"},
    {Family::CylinderHeight, "CylinderHeight"},
};

std::string fmt_num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

const char* family_name(Family f) noexcept {
  for (const auto& e : kFamilyNames)
    if (e.family == f) return e.name;
  return "?";
}

Family parse_family(const std::string& name) {
  for (const auto& e : kFamilyNames)
    if (name == e.name) return e.family;
  fail(ErrorCode::Parameter, "unknown model family '" + name + "'");
}

bool is_birth_death(Family f) noexcept {
  switch (f) {
    case Family::CouponCollector:
    case Family::BiasedSegment:
    case Family::EhrenfestUrn:
    case Family::PartialDiffusive:
    case Family::IsingMagnetization:
    case Family::CylinderHeight:
      return true;
    default:
      return false;
  }
}

double ModelSpec::param(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

Distribution Distribution::delta(std::size_t size, StateIndex at) {
  require(at < size, ErrorCode::Index, "delta index out of range");
  Distribution d{std::vector<double>(size, 0.0)};
  d.values[at] = 1.0;
  return d;
}

Distribution Distribution::uniform(std::size_t size) {
  require(size > 0, ErrorCode::Shape, "empty distribution");
  return Distribution{std::vector<double>(size, 1.0 / double(size))};
}

double Distribution::total() const { return numeric::sum(values); }

void Distribution::validate(double tol) const {
  for (double v : values)
    require(v >= 0.0 && std::isfinite(v), ErrorCode::Parameter, "distribution has a negative or non-finite entry");
  require(std::fabs(total() - 1.0) <= tol, ErrorCode::Parameter,
          "distribution mass " + fmt_num(total()) + " is not 1");
}

// ---------------------------------------------------------------------------

struct ChainModel::Impl {
  ModelSpec spec;
  Geometry geo;
  bool exact = true;
  std::size_t states = 0;
  std::vector<std::size_t> offsets;  // CSR row starts, size states + 1
  std::vector<Transition> entries;
};

class ModelBuilder {
 public:
  explicit ModelBuilder(ModelSpec spec) : impl_(std::make_shared<ChainModel::Impl>()) {
    impl_->spec = std::move(spec);
  }

  ChainModel::Impl& impl() { return *impl_; }

  void begin(std::size_t states) {
    impl_->states = states;
    impl_->offsets.assign(1, 0);
    impl_->offsets.reserve(states + 1);
  }

  // Appends one row; duplicate targets are merged, zero entries dropped.
  void push_row(std::vector<Transition>& row) {
    std::sort(row.begin(), row.end(), [](const Transition& a, const Transition& b) { return a.to < b.to; });
    std::size_t start = impl_->entries.size();
    for (const Transition& t : row) {
      if (t.prob == 0.0) continue;
      if (impl_->entries.size() > start && impl_->entries.back().to == t.to)
        impl_->entries.back().prob += t.prob;
      else
        impl_->entries.push_back(t);
    }
    impl_->offsets.push_back(impl_->entries.size());
    row.clear();
  }

  void push_bd_row(StateIndex i, double down, double hold, double up) {
    scratch_.clear();
    if (down > 0.0) scratch_.push_back({i - 1, down});
    if (hold > 0.0) scratch_.push_back({i, hold});
    if (up > 0.0) scratch_.push_back({i + 1, up});
    push_row(scratch_);
  }

  ChainModel finish() { return ChainModel(std::move(impl_)); }

 private:
  std::shared_ptr<ChainModel::Impl> impl_;
  std::vector<Transition> scratch_;
};

namespace {

void check_open_unit(double x, double lo, double hi, const std::string& what) {
  require(x > lo && x < hi, ErrorCode::Parameter,
          what + " = " + fmt_num(x) + " outside (" + fmt_num(lo) + ", " + fmt_num(hi) + ")");
}

// Up-rate of the magnetization chain at magnetization k. The down-rate at k is
// ising_up(n, beta, -k), which makes the k <-> -k symmetry bit-exact.
double ising_up(std::size_t n, double beta, long k) {
  const double nn = double(n);
  return (double(long(n / 2) - k) / nn) * numeric::logistic(4.0 * beta * (double(k) + 0.5) / nn);
}

void build_coupon(ModelBuilder& b, std::size_t n) {
  b.begin(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double q = double(i) / double(n);
    b.push_bd_row(i, q, double(n - i) / double(n), 0.0);
  }
}

void build_segment(ModelBuilder& b, std::size_t n) {
  auto& g = b.impl().geo;
  const auto& spec = b.impl().spec;
  g.down = spec.param("down", 1.0 / 6.0);
  g.stay = spec.param("stay", 1.0 / 3.0);
  g.up = spec.param("up", 1.0 / 2.0);
  require(g.down > 0.0 && g.up > 0.0 && g.stay >= 0.0, ErrorCode::Parameter,
          "segment rates must satisfy down > 0, up > 0, stay >= 0");
  require(std::fabs(g.down + g.stay + g.up - 1.0) <= 1e-12, ErrorCode::Parameter,
          "segment rates must sum to 1");
  b.begin(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    if (i == 0)
      b.push_bd_row(i, 0.0, g.stay + g.down, g.up);
    else if (i == n)
      b.push_bd_row(i, g.down, g.stay + g.up, 0.0);
    else
      b.push_bd_row(i, g.down, g.stay, g.up);
  }
}

void build_ehrenfest(ModelBuilder& b, std::size_t n) {
  b.begin(n + 1);
  const double nn = double(n);
  for (std::size_t i = 0; i <= n; ++i) {
    const double up = (double(n - i) / nn) * 0.5;
    const double down = (double(i) / nn) * 0.5;
    b.push_bd_row(i, down, 1.0 - up - down, up);
  }
}

void build_ising_magnetization(ModelBuilder& b, std::size_t n) {
  auto& g = b.impl().geo;
  g.beta = b.impl().spec.param("beta", 0.0);
  require(g.beta >= 0.0 && std::isfinite(g.beta), ErrorCode::Parameter, "beta must be >= 0");
  require(n >= 2 && n % 2 == 0, ErrorCode::Parameter, "Ising models need an even n >= 2");
  b.begin(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const long k = magnetization_of(n, i);
    const double up = ising_up(n, g.beta, k);
    const double down = ising_up(n, g.beta, -k);
    b.push_bd_row(i, down, 1.0 - up - down, up);
  }
}

void build_partial_diffusive(ModelBuilder& b, std::size_t n) {
  auto& g = b.impl().geo;
  g.eps = b.impl().spec.param("eps", 0.4);
  require(g.eps > 0.0 && g.eps <= 0.5, ErrorCode::Parameter, "eps must lie in (0, 1/2]");
  require(n >= 4, ErrorCode::Parameter, "PartialDiffusive needs n >= 4");
  const std::size_t s = std::size_t(std::llround(std::pow(double(n), g.eps)));
  require(s >= 1 && s < n, ErrorCode::Parameter, "rounded n^eps must lie in [1, n)");
  g.flat_edge = s;
  const double nn = double(n);
  b.begin(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    double down = 0.0, up = 0.0;
    if (i >= 1) down = (i <= s) ? 0.5 : double(i) / (2.0 * nn);
    if (i < n) up = (i < s) ? 0.5 : double(i) / (4.0 * nn);
    // State 0 holds with the mass the down-move would have used.
    b.push_bd_row(i, down, 1.0 - up - down, up);
  }
}

void build_cylinder_height(ModelBuilder& b, std::size_t l, double q) {
  b.begin(l);
  for (std::size_t h = 0; h < l; ++h) {
    const double down = q / 2.0, up = (1.0 - q) / 2.0;
    if (h == 0)
      b.push_bd_row(h, 0.0, 0.5 + down, up);
    else if (h == l - 1)
      b.push_bd_row(h, down, 0.5 + up, 0.0);
    else
      b.push_bd_row(h, down, 0.5, up);
  }
}

void build_cylinder(ModelBuilder& b) {
  auto& impl = b.impl();
  auto& g = impl.geo;
  auto& spec = impl.spec;
  g.q = spec.param("q", 0.75);
  g.r = spec.param("r", 0.75);
  check_open_unit(g.q, 0.5, 1.0, "q");
  check_open_unit(g.r, 0.5, 1.0, "r");
  std::size_t l = 0, m = 0;
  if (spec.has("l") || spec.has("m")) {
    require(spec.has("l") && spec.has("m"), ErrorCode::Parameter, "cylinder needs both l and m");
    l = std::size_t(std::llround(spec.param("l", 0)));
    m = std::size_t(std::llround(spec.param("m", 0)));
    require(l >= 2 && m >= 1, ErrorCode::Parameter, "cylinder needs l >= 2 and m >= 1");
  } else {
    const double omega = spec.param("omega", 0.2);
    check_open_unit(omega, 0.0, 1.0, "omega");
    require(spec.n >= 2, ErrorCode::Parameter, "cylinder needs n >= 2");
    l = std::size_t(std::llround(std::pow(double(spec.n), 1.0 - omega)));
    m = std::size_t(std::llround(std::pow(double(spec.n), omega)));
    require(l >= 2 && m >= 3, ErrorCode::Parameter, "rounded cylinder needs l >= 2 and m >= 3");
  }
  g.layers = l;
  g.circumference = m;
  spec.n = l * m;

  b.begin(l * m);
  std::vector<Transition> row;
  for (std::size_t h = 0; h < l; ++h) {
    for (std::size_t phi = 0; phi < m; ++phi) {
      const StateIndex here = h * m + phi;
      row.push_back({h == 0 ? here : here - m, g.q / 2.0});
      row.push_back({h == l - 1 ? here : here + m, (1.0 - g.q) / 2.0});
      row.push_back({h * m + (phi + 1) % m, g.r / 2.0});
      row.push_back({h * m + (phi + m - 1) % m, (1.0 - g.r) / 2.0});
      b.push_row(row);
    }
  }
}

void build_hypercube(ModelBuilder& b, std::size_t n) {
  require(n <= kMaxHypercubeDim, ErrorCode::Capacity,
          "hypercube dimension above " + std::to_string(kMaxHypercubeDim));
  const std::size_t states = std::size_t(1) << n;
  b.begin(states);
  std::vector<Transition> row;
  const double flip = 1.0 / (2.0 * double(n));
  for (std::size_t x = 0; x < states; ++x) {
    row.push_back({x, 0.5});
    for (std::size_t i = 0; i < n; ++i) row.push_back({x ^ (std::size_t(1) << i), flip});
    b.push_row(row);
  }
}

void build_glauber(ModelBuilder& b, std::size_t n) {
  auto& g = b.impl().geo;
  g.beta = b.impl().spec.param("beta", 0.0);
  require(g.beta >= 0.0 && std::isfinite(g.beta), ErrorCode::Parameter, "beta must be >= 0");
  require(n >= 2 && n % 2 == 0, ErrorCode::Parameter, "Ising models need an even n >= 2");
  require(n <= kMaxGlauberSpins, ErrorCode::Capacity,
          "Glauber enumeration refused above " + std::to_string(kMaxGlauberSpins) + " spins");
  const std::size_t states = std::size_t(1) << n;
  const double nn = double(n);
  b.begin(states);
  std::vector<Transition> row;
  for (std::size_t s = 0; s < states; ++s) {
    const long total = 2 * long(std::popcount(s)) - long(n);  // sum of spins
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t bit = std::size_t(1) << i;
      const long own = (s & bit) ? 1 : -1;
      const double field = double(total - own) / nn;
      const double p_plus = numeric::logistic(2.0 * g.beta * field);
      row.push_back({s | bit, p_plus / nn});
      row.push_back({s & ~bit, (1.0 - p_plus) / nn});
    }
    b.push_row(row);
  }
}

void build_top_in_at_random(ModelBuilder& b, std::size_t n) {
  require(n >= 2, ErrorCode::Parameter, "deck needs at least 2 cards");
  if (n > kMaxPermutationDeck) {
    b.impl().exact = false;
    b.impl().states = 0;
    return;
  }
  const std::uint64_t states = factorial(unsigned(n));
  b.begin(states);
  std::vector<Transition> row;
  const double p = 1.0 / double(n);
  for (std::uint64_t rank = 0; rank < states; ++rank) {
    const Deck deck = lehmer_unrank(rank, unsigned(n));
    for (unsigned slot = 0; slot < n; ++slot) {
      Deck next = deck;
      insert_top_card(next, slot);
      row.push_back({lehmer_rank(next), p});
    }
    b.push_row(row);
  }
}

}  // namespace

ChainModel build_model(const ModelSpec& spec) {
  require(spec.n >= 1 || spec.family == Family::CylinderWalk || spec.family == Family::CylinderHeight,
          ErrorCode::Parameter, "n must be positive");
  ModelBuilder b(spec);
  const std::size_t n = spec.n;
  switch (spec.family) {
    case Family::CouponCollector: build_coupon(b, n); break;
    case Family::TopInAtRandom: build_top_in_at_random(b, n); break;
    case Family::BiasedSegment: build_segment(b, n); break;
    case Family::EhrenfestUrn: build_ehrenfest(b, n); break;
    case Family::HypercubeWalk: build_hypercube(b, n); break;
    case Family::CylinderWalk: build_cylinder(b); break;
    case Family::PartialDiffusive: build_partial_diffusive(b, n); break;
    case Family::IsingMagnetization: build_ising_magnetization(b, n); break;
    case Family::IsingGlauber: build_glauber(b, n); break;
    case Family::CylinderHeight: {
      auto& impl = b.impl();
      impl.geo.q = spec.param("q", 0.75);
      check_open_unit(impl.geo.q, 0.5, 1.0, "q");
      const std::size_t l = spec.has("l") ? std::size_t(std::llround(spec.param("l", 0))) : n;
      require(l >= 2, ErrorCode::Parameter, "height chain needs l >= 2");
      impl.geo.layers = l;
      impl.spec.n = l;
      build_cylinder_height(b, l, impl.geo.q);
      break;
    }
  }
  return b.finish();
}

// ---------------------------------------------------------------------------

const ModelSpec& ChainModel::spec() const noexcept { return impl_->spec; }
Family ChainModel::family() const noexcept { return impl_->spec.family; }
std::size_t ChainModel::n() const noexcept { return impl_->spec.n; }
const Geometry& ChainModel::geometry() const noexcept { return impl_->geo; }
bool ChainModel::exact() const noexcept { return impl_->exact; }

std::string ChainModel::id() const { return family_name(family()); }

std::size_t ChainModel::state_count() const {
  require(impl_->exact, ErrorCode::Capacity, id() + " with n = " + std::to_string(n()) + " is simulation-only");
  return impl_->states;
}

std::size_t ChainModel::transition_count() const { return impl_->entries.size(); }

std::size_t ChainModel::max_row_size() const {
  std::size_t best = 0;
  for (std::size_t i = 0; i + 1 < impl_->offsets.size(); ++i)
    best = std::max(best, impl_->offsets[i + 1] - impl_->offsets[i]);
  return best;
}

std::optional<double> ChainModel::drift_beta() const noexcept {
  if (family() == Family::CylinderWalk || family() == Family::CylinderHeight)
    return (2.0 * impl_->geo.q - 1.0) / 2.0;
  return std::nullopt;
}

std::span<const Transition> ChainModel::row(StateIndex state) const {
  const auto& o = impl_->offsets;
  return {impl_->entries.data() + o[state], o[state + 1] - o[state]};
}

StateIndex ChainModel::sample_next(StateIndex state, double u) const {
  const auto r = row(state);
  double acc = 0.0;
  for (const Transition& t : r) {
    acc += t.prob;
    if (u < acc) return t.to;
  }
  return r.back().to;
}

std::span<const Transition> transition_row(const ChainModel& model, StateIndex state) {
  require(state < model.state_count(), ErrorCode::Index,
          "state " + std::to_string(state) + " out of range for " + model.id());
  return model.row(state);
}

// ---------------------------------------------------------------------------

std::vector<double> log_stationary(const ChainModel& model) {
  const std::size_t states = model.state_count();
  const std::size_t n = model.n();
  const Geometry& g = model.geometry();
  std::vector<double> lp(states, 0.0);
  switch (model.family()) {
    case Family::CouponCollector:
      std::fill(lp.begin() + 1, lp.end(), numeric::kNegInf);
      break;
    case Family::TopInAtRandom:
    case Family::HypercubeWalk:
      break;  // uniform
    case Family::BiasedSegment: {
      const double step = std::log(g.up / g.down);
      for (std::size_t i = 0; i < states; ++i) lp[i] = double(i) * step;
      break;
    }
    case Family::EhrenfestUrn:
      for (std::size_t i = 0; i < states; ++i) lp[i] = numeric::log_binomial(n, i);
      break;
    case Family::IsingMagnetization:
      for (std::size_t i = 0; i < states; ++i) {
        const double k = double(magnetization_of(n, i));
        lp[i] = 2.0 * g.beta * k * k / double(n) + numeric::log_binomial(n, i);
      }
      break;
    case Family::IsingGlauber:
      for (std::size_t s = 0; s < states; ++s) {
        const double total = 2.0 * double(std::popcount(s)) - double(n);
        lp[s] = g.beta / double(n) * (total * total - double(n)) / 2.0;
      }
      break;
    case Family::PartialDiffusive: {
      const std::size_t s = g.flat_edge;
      for (std::size_t i = s + 1; i < states; ++i)
        lp[i] = std::log(double(s) / double(i)) - double(i - s) * std::log(2.0);
      break;
    }
    case Family::CylinderWalk:
    case Family::CylinderHeight: {
      const double log_alpha = std::log((1.0 - g.q) / g.q);
      const std::size_t m = model.family() == Family::CylinderWalk ? g.circumference : 1;
      for (std::size_t i = 0; i < states; ++i) lp[i] = double(i / m) * log_alpha;
      break;
    }
  }
  const double z = numeric::log_sum_exp(lp);
  for (double& x : lp) x -= z;
  return lp;
}

void apply_transition(const ChainModel& model, std::span<const double> cur, std::vector<double>& next) {
  const std::size_t states = model.state_count();
  require(cur.size() == states, ErrorCode::Shape, "distribution length does not match " + model.id());
  next.assign(states, 0.0);
  for (std::size_t i = 0; i < states; ++i) {
    const double mass = cur[i];
    if (mass == 0.0) continue;
    for (const Transition& t : model.row(i)) next[t.to] += mass * t.prob;
  }
}

double stationarity_residual(const ChainModel& model, const Distribution& dist) {
  std::vector<double> next;
  apply_transition(model, dist.values, next);
  numeric::CompensatedSum acc;
  for (std::size_t i = 0; i < next.size(); ++i) acc.add(std::fabs(next[i] - dist.values[i]));
  return acc.value();
}

Distribution stationary(const ChainModel& model) {
  auto lp = log_stationary(model);
  Distribution d{std::vector<double>(lp.size())};
  std::transform(lp.begin(), lp.end(), d.values.begin(), [](double x) { return std::exp(x); });
  const double residual = stationarity_residual(model, d);
  require(residual < 1e-10, ErrorCode::Audit,
          "closed-form stationary measure of " + model.id() + " has residual " + fmt_num(residual));
  return d;
}

StateIndex default_start(const ChainModel& model) {
  const std::size_t n = model.n();
  switch (model.family()) {
    case Family::CouponCollector:
    case Family::PartialDiffusive:
    case Family::IsingMagnetization:
      return n;
    case Family::TopInAtRandom:
    case Family::BiasedSegment:
    case Family::EhrenfestUrn:
    case Family::HypercubeWalk:
      return 0;
    case Family::IsingGlauber:
      return (std::size_t(1) << n) - 1;
    case Family::CylinderWalk:
      return (model.geometry().layers - 1) * model.geometry().circumference;
    case Family::CylinderHeight:
      return model.geometry().layers - 1;
  }
  return 0;
}

std::pair<ChainModel, LumpMap> lump(const ChainModel& model) {
  const std::size_t states = model.state_count();
  LumpMap lm;
  lm.projection.resize(states);
  ModelSpec coarse;
  switch (model.family()) {
    case Family::HypercubeWalk:
      coarse = {Family::EhrenfestUrn, model.n(), {}};
      for (std::size_t x = 0; x < states; ++x) lm.projection[x] = std::size_t(std::popcount(x));
      break;
    case Family::IsingGlauber:
      coarse = {Family::IsingMagnetization, model.n(), {{"beta", model.geometry().beta}}};
      for (std::size_t x = 0; x < states; ++x) lm.projection[x] = std::size_t(std::popcount(x));
      break;
    case Family::CylinderWalk: {
      const auto& g = model.geometry();
      coarse = {Family::CylinderHeight, g.layers, {{"q", g.q}}};
      for (std::size_t x = 0; x < states; ++x) lm.projection[x] = x / g.circumference;
      break;
    }
    default:
      fail(ErrorCode::Unsupported, model.id() + " has no lumping projection");
  }
  ChainModel coarse_model = build_model(coarse);
  lm.coarse_count = coarse_model.state_count();
  return {std::move(coarse_model), std::move(lm)};
}

Distribution project_distribution(const Distribution& dist, const LumpMap& lm) {
  require(dist.size() == lm.projection.size(), ErrorCode::Shape,
          "distribution length " + std::to_string(dist.size()) + " does not match lump map " +
              std::to_string(lm.projection.size()));
  std::vector<numeric::CompensatedSum> acc(lm.coarse_count);
  for (std::size_t i = 0; i < dist.size(); ++i) acc[lm.projection[i]].add(dist.values[i]);
  Distribution out{std::vector<double>(lm.coarse_count)};
  for (std::size_t c = 0; c < lm.coarse_count; ++c) out.values[c] = acc[c].value();
  return out;
}

BdRates birth_death_rates(const ChainModel& model) {
  require(is_birth_death(model.family()), ErrorCode::Unsupported, model.id() + " is not birth-and-death");
  const std::size_t states = model.state_count();
  BdRates r;
  r.up.assign(states, 0.0);
  r.down.assign(states, 0.0);
  r.hold.assign(states, 0.0);
  for (std::size_t i = 0; i < states; ++i) {
    for (const Transition& t : model.row(i)) {
      if (t.to + 1 == i)
        r.down[i] = t.prob;
      else if (t.to == i)
        r.hold[i] = t.prob;
      else if (t.to == i + 1)
        r.up[i] = t.prob;
      else
        fail(ErrorCode::Unsupported, "row " + std::to_string(i) + " leaves the nearest-neighbour band");
    }
  }
  return r;
}

CylinderPoint cylinder_point(const ChainModel& model, StateIndex index) {
  require(model.family() == Family::CylinderWalk, ErrorCode::Unsupported, "not a cylinder model");
  const std::size_t m = model.geometry().circumference;
  return {index / m, index % m};
}

StateIndex cylinder_index(const ChainModel& model, CylinderPoint p) {
  require(model.family() == Family::CylinderWalk, ErrorCode::Unsupported, "not a cylinder model");
  const auto& g = model.geometry();
  require(p.h < g.layers && p.phi < g.circumference, ErrorCode::Index, "cylinder point out of range");
  return p.h * g.circumference + p.phi;
}

}  // namespace cutoff
