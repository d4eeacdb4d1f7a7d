#include "cutoff/hitting.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>

#include "cutoff/error.hpp"
#include "cutoff/numeric.hpp"
#include "cutoff/rng.hpp"

namespace cutoff {

namespace {

constexpr double kZ99 = 2.5758293035489004;

// Descent moments on a segment given rates and log-stationary weights.
LevelMoments descent_levels(const std::vector<double>& up, const std::vector<double>& down,
                            const std::vector<double>& lp) {
  const std::size_t N = up.size();
  LevelMoments lm;
  lm.mean.assign(N, 0.0);
  lm.variance.assign(N, 0.0);
  double suffix = numeric::kNegInf;
  double m_above = 0.0, v_above = 0.0;
  for (std::size_t k = N; k-- > 1;) {
    suffix = numeric::log_add(suffix, lp[k]);
    const double q = down[k], p = up[k];
    if (q <= 0.0) {
      // Level k cannot be left downward; every passage through it fails.
      lm.mean[k] = lm.variance[k] = std::numeric_limits<double>::infinity();
      m_above = v_above = std::numeric_limits<double>::infinity();
      continue;
    }
    double m;
    if (p == 0.0)
      m = 1.0 / q;
    else
      m = std::exp(suffix - lp[k]) / q;
    double qv = m - 1.0;
    if (p > 0.0) qv += p * v_above + p * m_above * m_above + p * m * m_above;
    lm.mean[k] = m;
    lm.variance[k] = std::max(0.0, qv / q);
    m_above = m;
    v_above = lm.variance[k];
  }
  return lm;
}

struct SegmentData {
  std::vector<double> up, down, lp;
};

SegmentData segment_of(const ChainModel& model) {
  BdRates r = birth_death_rates(model);
  return {std::move(r.up), std::move(r.down), log_stationary(model)};
}

HittingMoments sum_levels(const LevelMoments& lm, std::size_t lo, std::size_t hi) {
  numeric::CompensatedSum mean, var;
  for (std::size_t k = lo; k <= hi; ++k) {
    require(std::isfinite(lm.mean[k]), ErrorCode::Unreachable, "level " + std::to_string(k) + " has no exit");
    mean.add(lm.mean[k]);
    var.add(lm.variance[k]);
  }
  return {mean.value(), var.value(), MomentSource::ClosedForm};
}

}  // namespace

// ---------------------------------------------------------------------------

double McSample::mean() const {
  require(!values.empty(), ErrorCode::Undefined, "empty sample");
  numeric::CompensatedSum acc;
  for (auto v : values) acc.add(double(v));
  return acc.value() / double(values.size());
}

double McSample::variance() const {
  if (values.size() < 2) return 0.0;
  const double mu = mean();
  numeric::CompensatedSum acc;
  for (auto v : values) acc.add((double(v) - mu) * (double(v) - mu));
  return acc.value() / double(values.size() - 1);
}

double McSample::sd() const { return std::sqrt(variance()); }

std::pair<double, double> McSample::ci99() const {
  const double mu = mean();
  const double half = kZ99 * sd() / std::sqrt(double(values.size()));
  return {mu - half, mu + half};
}

// ---------------------------------------------------------------------------

LevelMoments bd_descent_levels(const ChainModel& model) {
  const SegmentData s = segment_of(model);
  return descent_levels(s.up, s.down, s.lp);
}

LevelMoments bd_ascent_levels(const ChainModel& model) {
  SegmentData s = segment_of(model);
  std::reverse(s.up.begin(), s.up.end());
  std::reverse(s.down.begin(), s.down.end());
  std::reverse(s.lp.begin(), s.lp.end());
  LevelMoments mirrored = descent_levels(s.down, s.up, s.lp);
  std::reverse(mirrored.mean.begin(), mirrored.mean.end());
  std::reverse(mirrored.variance.begin(), mirrored.variance.end());
  return mirrored;
}

HittingMoments bd_visit_moments(const ChainModel& model, StateIndex k) {
  require(k >= 1 && k < model.state_count(), ErrorCode::Index, "descent level out of range");
  const SegmentData s = segment_of(model);
  require(s.down[k] > 0.0, ErrorCode::Unreachable, "q_" + std::to_string(k) + " = 0");
  const LevelMoments lm = descent_levels(s.up, s.down, s.lp);
  return {lm.mean[k], lm.variance[k], MomentSource::ClosedForm};
}

HittingMoments bd_hitting_moments(const ChainModel& model, StateIndex from, StateIndex to) {
  const std::size_t states = model.state_count();
  require(from < states && to < states, ErrorCode::Index, "hitting endpoints out of range");
  if (from == to) return {0.0, 0.0, MomentSource::ClosedForm};
  if (to < from) return sum_levels(bd_descent_levels(model), to + 1, from);
  return sum_levels(bd_ascent_levels(model), from, to - 1);
}

std::size_t cylinder_inner_layers(double theta) {
  require(theta >= 1.0 && std::isfinite(theta), ErrorCode::Parameter, "theta must be >= 1");
  auto c = std::size_t(std::ceil(std::sqrt(theta)));
  while (c > 0 && double(c - 1) * double(c - 1) >= theta) --c;
  while (double(c) * double(c) < theta) ++c;
  return c;
}

HittingMoments cylinder_hitting_moments(const ChainModel& model, double theta) {
  require(model.family() == Family::CylinderWalk || model.family() == Family::CylinderHeight,
          ErrorCode::Unsupported, "cylinder moments need a cylinder model");
  const Geometry& g = model.geometry();
  const std::size_t l = g.layers;
  const std::size_t inner = cylinder_inner_layers(theta);
  require(inner <= l, ErrorCode::Parameter, "sqrt(theta) exceeds the number of layers");
  const double q = g.q, alpha = (1.0 - q) / q;
  const double p = (1.0 - q) / 2.0, qd = q / 2.0;
  // m_k = (2/q) sum_{i=k}^{l-1} alpha^{i-k}, accumulated from the top layer.
  numeric::CompensatedSum mean, var;
  double m_above = 0.0, v_above = 0.0;
  for (std::size_t k = l - 1; k >= inner && k >= 1; --k) {
    double geo = 0.0, a = 1.0;
    for (std::size_t i = k; i < l; ++i, a *= alpha) geo += a;
    const double m = (2.0 / q) * geo;
    double qv = m - 1.0;
    if (k < l - 1) qv += p * v_above + p * m_above * m_above + p * m * m_above;
    const double v = qv / qd;
    mean.add(m);
    var.add(v);
    m_above = m;
    v_above = v;
  }
  return {mean.value(), var.value(), MomentSource::ClosedForm};
}

McSample mc_hitting(const ChainModel& model, StateIndex init, const StatePredicate& target, std::size_t replicas,
                    std::uint64_t seed, const McOptions& opts) {
  require(replicas >= 1, ErrorCode::Parameter, "replicas must be >= 1");
  require(init < model.state_count(), ErrorCode::Index, "initial state out of range");
  std::uint64_t budget = 1'000'000'000ULL;
  if (opts.step_budget)
    budget = *opts.step_budget;
  else if (opts.expected_mean)
    budget = std::uint64_t(std::max(1.0, std::ceil(1e3 * *opts.expected_mean)));
  McSample out;
  out.seed = seed;
  out.replicas = replicas;
  out.values.reserve(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    CounterRng rng(seed, r);
    StateIndex x = init;
    std::uint64_t t = 0;
    while (!target(x)) {
      if (t >= budget)
        throw TimeoutError(model.id() + ": replica " + std::to_string(r) + " exceeded " + std::to_string(budget) +
                               " steps",
                           r);
      x = model.sample_next(x, rng.uniform());
      ++t;
    }
    out.values.push_back(t);
  }
  return out;
}

std::vector<CantelliRow> cantelli_check(const McSample& sample, const std::vector<double>& theta_grid) {
  std::vector<CantelliRow> rows;
  const std::size_t N = sample.values.size();
  double mu = 0.0, sigma = 0.0;
  if (N > 0) {
    mu = sample.mean();
    numeric::CompensatedSum acc;
    for (auto v : sample.values) acc.add((double(v) - mu) * (double(v) - mu));
    sigma = std::sqrt(acc.value() / double(N));
  }
  const double slack = N > 0 ? 3.0 / std::sqrt(double(N)) : 0.0;
  for (double theta : theta_grid) {
    CantelliRow row{theta, 0.0, 1.0 / (1.0 + theta * theta), true};
    if (sigma > 0.0) {
      std::size_t hits = 0;
      for (auto v : sample.values)
        if (double(v) - mu >= theta * sigma) ++hits;
      row.tail = double(hits) / double(N);
      row.pass = row.tail <= row.bound + slack;
    }
    rows.push_back(row);
  }
  return rows;
}

double quasi_determinism_ratio(const HittingMoments& m) {
  require(m.mean > 0.0, ErrorCode::Undefined, "quasi-determinism ratio needs a positive mean");
  return std::sqrt(std::max(0.0, m.variance)) / m.mean;
}

DriftDiagnostic strong_drift_diagnostic(const ChainModel& model) {
  const SegmentData s = segment_of(model);
  const std::size_t N = s.up.size();
  DriftDiagnostic d;
  d.n = model.n();
  d.K_q = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < N; ++i) d.K_q = std::min(d.K_q, s.down[i]);
  if (!(d.K_q > 0.0)) {
    d.K_q = 0.0;
    d.K_n = std::numeric_limits<double>::quiet_NaN();
    d.descent_mean = std::numeric_limits<double>::infinity();
    d.ratio = std::numeric_limits<double>::infinity();
    return d;
  }
  const LevelMoments lm = descent_levels(s.up, s.down, s.lp);
  numeric::CompensatedSum total;
  d.K_n = 0.0;
  for (std::size_t i = 1; i < N; ++i) {
    d.K_n = std::max(d.K_n, s.down[i] * lm.mean[i]);
    total.add(lm.mean[i]);
  }
  d.descent_mean = total.value();
  d.ratio = d.K_n * d.K_n / (d.K_q * d.descent_mean);
  return d;
}

HittingMoments linear_solve_hitting(const ChainModel& model, StateIndex init, const StatePredicate& target) {
  const std::size_t states = model.state_count();
  require(states <= kLinearSolveCap, ErrorCode::Capacity,
          model.id() + ": linear solve refused above " + std::to_string(kLinearSolveCap) + " states");
  require(init < states, ErrorCode::Index, "initial state out of range");
  if (target(init)) return {0.0, 0.0, MomentSource::LinearSolve};

  // Transient states: reachable from init without touching the target.
  std::vector<long> slot(states, -1);
  std::vector<bool> is_target(states);
  for (std::size_t i = 0; i < states; ++i) is_target[i] = target(i);
  std::vector<StateIndex> transient;
  std::deque<StateIndex> queue{init};
  slot[init] = 0;
  transient.push_back(init);
  while (!queue.empty()) {
    const StateIndex x = queue.front();
    queue.pop_front();
    for (const Transition& t : model.row(x)) {
      if (is_target[t.to] || slot[t.to] >= 0) continue;
      slot[t.to] = long(transient.size());
      transient.push_back(t.to);
      queue.push_back(t.to);
    }
  }

  // Every transient state must be able to reach the target.
  const std::size_t T = transient.size();
  std::vector<std::vector<std::size_t>> preds(T);
  std::vector<bool> escapes(T, false);
  std::deque<std::size_t> back;
  for (std::size_t a = 0; a < T; ++a) {
    for (const Transition& t : model.row(transient[a])) {
      if (is_target[t.to]) {
        if (!escapes[a]) {
          escapes[a] = true;
          back.push_back(a);
        }
      } else {
        preds[std::size_t(slot[t.to])].push_back(a);
      }
    }
  }
  std::size_t marked = back.size();
  while (!back.empty()) {
    const std::size_t b = back.front();
    back.pop_front();
    for (std::size_t a : preds[b])
      if (!escapes[a]) {
        escapes[a] = true;
        ++marked;
        back.push_back(a);
      }
  }
  require(marked == T, ErrorCode::Unreachable, model.id() + ": target not reachable from every transient state");

  using SpMat = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> trip, qtrip;
  for (std::size_t a = 0; a < T; ++a) {
    trip.emplace_back(int(a), int(a), 1.0);
    for (const Transition& t : model.row(transient[a])) {
      if (is_target[t.to]) continue;
      const int b = int(slot[t.to]);
      trip.emplace_back(int(a), b, -t.prob);
      qtrip.emplace_back(int(a), b, t.prob);
    }
  }
  const int dim = int(T);
  SpMat A(dim, dim), Q(dim, dim);
  A.setFromTriplets(trip.begin(), trip.end());
  Q.setFromTriplets(qtrip.begin(), qtrip.end());
  A.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.compute(A);
  require(lu.info() == Eigen::Success, ErrorCode::Unreachable, model.id() + ": singular hitting system");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(dim);
  const Eigen::VectorXd m = lu.solve(ones);
  const Eigen::VectorXd rhs = ones + 2.0 * (Q * m);
  const Eigen::VectorXd s = lu.solve(rhs);
  require(lu.info() == Eigen::Success && m.allFinite() && s.allFinite(), ErrorCode::Unreachable,
          model.id() + ": hitting system solve failed");
  const double mean = m[0];
  return {mean, std::max(0.0, s[0] - mean * mean), MomentSource::LinearSolve};
}

void write_mc_csv(std::ostream& out, const McSample& sample) {
  out << "replica,steps\n";
  for (std::size_t r = 0; r < sample.values.size(); ++r) out << r << ',' << sample.values[r] << '\n';
}

void write_drift_csv(std::ostream& out, const std::vector<DriftDiagnostic>& rows) {
  out << "n,Kq,Kn,descent_mean,ratio\n";
  char buf[160];
  for (const auto& d : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", d.n, d.K_q, d.K_n, d.descent_mean, d.ratio);
    out << buf;
  }
}

}  // namespace cutoff
