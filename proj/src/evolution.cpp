#include "cutoff/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cutoff/error.hpp"
#include "cutoff/numeric.hpp"

namespace cutoff {

namespace {

constexpr double kMonotoneSlack = 1e-12;

void check_budget(const ChainModel& model, std::size_t t_max, std::size_t stride, std::uint64_t budget) {
  const double work = double(model.state_count()) * double(t_max) / double(stride);
  require(work <= double(budget), ErrorCode::Capacity,
          model.id() + " n=" + std::to_string(model.n()) + ": curve work " + std::to_string(std::uint64_t(work)) +
              " exceeds budget " + std::to_string(budget));
}

class CurveBuilder {
 public:
  CurveBuilder(const ChainModel& model, const Distribution& init, std::size_t stride)
      : model_(model), pi_(stationary(model)), cur_(init) {
    require(stride >= 1, ErrorCode::Parameter, "stride must be >= 1");
    require(init.size() == model.state_count(), ErrorCode::Shape, "initial distribution has the wrong length");
    init.validate();
    curve_.model = model.id();
    curve_.n = model.n();
    curve_.stride = stride;
    record(0);
  }

  double last() const { return curve_.tv.back(); }

  void advance(std::size_t steps) {
    for (std::size_t s = 0; s < steps; ++s) {
      apply_transition(model_, cur_.values, scratch_);
      cur_.values.swap(scratch_);
    }
    record(curve_.times.back() + steps);
  }

  TvCurve take() { return std::move(curve_); }

 private:
  void record(std::size_t t) {
    const double d = tv_distance(cur_, pi_);
    if (!curve_.tv.empty())
      require(d <= curve_.tv.back() + kMonotoneSlack, ErrorCode::Audit,
              "total variation increased at t=" + std::to_string(t) + " for " + curve_.model);
    curve_.times.push_back(t);
    curve_.tv.push_back(d);
  }

  const ChainModel& model_;
  Distribution pi_;
  Distribution cur_;
  std::vector<double> scratch_;
  TvCurve curve_;
};

}  // namespace

Distribution evolve(const ChainModel& model, const Distribution& dist, std::size_t steps) {
  require(dist.size() == model.state_count(), ErrorCode::Shape, "distribution length does not match " + model.id());
  Distribution cur = dist;
  std::vector<double> next;
  const double mass0 = cur.total();
  for (std::size_t s = 0; s < steps; ++s) {
    apply_transition(model, cur.values, next);
    cur.values.swap(next);
  }
  const double drift = std::fabs(cur.total() - mass0);
  const double allowed = 1e-12 * std::max(1.0, double(steps) / 1e4);
  require(drift <= allowed, ErrorCode::Audit, "mass drift during evolution of " + model.id());
  return cur;
}

double tv_distance(const Distribution& a, const Distribution& b) {
  require(a.size() == b.size(), ErrorCode::Shape,
          "tv_distance length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  numeric::CompensatedSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(std::fabs(a.values[i] - b.values[i]));
  return std::clamp(0.5 * acc.value(), 0.0, 1.0);
}

TvCurve tv_curve(const ChainModel& model, const Distribution& init, std::size_t t_max, std::size_t stride,
                 std::uint64_t budget) {
  require(stride >= 1, ErrorCode::Parameter, "stride must be >= 1");
  check_budget(model, t_max, stride, budget);
  CurveBuilder b(model, init, stride);
  for (std::size_t t = 0; t < t_max;) {
    const std::size_t step = std::min(stride, t_max - t);
    b.advance(step);
    t += step;
  }
  return b.take();
}

TvCurve tv_curve_until(const ChainModel& model, const Distribution& init, double floor, std::size_t stride,
                       std::size_t t_cap, std::uint64_t budget) {
  require(stride >= 1, ErrorCode::Parameter, "stride must be >= 1");
  CurveBuilder b(model, init, stride);
  std::size_t t = 0;
  while (b.last() > floor) {
    if (t >= t_cap) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", floor);
      fail(ErrorCode::Coverage, model.id() + " n=" + std::to_string(model.n()) + ": tv stayed above " + buf +
                                    " for " + std::to_string(t_cap) + " steps");
    }
    check_budget(model, t + stride, stride, budget);
    b.advance(stride);
    t += stride;
  }
  return b.take();
}

MixingProfile mixing_profile(const TvCurve& curve, const std::vector<double>& eps_grid) {
  MixingProfile p;
  p.model = curve.model;
  p.n = curve.n;
  p.eps_grid = eps_grid;
  p.quantization = curve.stride;
  for (double eps : eps_grid) {
    require(eps > 0.0 && eps < 1.0, ErrorCode::Parameter, "eps must lie in (0, 1)");
    auto it = std::find_if(curve.tv.begin(), curve.tv.end(), [eps](double v) { return v <= eps; });
    if (it == curve.tv.end()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%g", eps);
      fail(ErrorCode::Coverage, curve.model + " n=" + std::to_string(curve.n) + ": curve never reaches eps=" + buf);
    }
    p.t_eps.push_back(curve.times[std::size_t(it - curve.tv.begin())]);
  }
  return p;
}

Distribution power_iteration_stationary(const ChainModel& model, double tol, std::size_t max_iter) {
  Distribution cur = Distribution::uniform(model.state_count());
  std::vector<double> next;
  for (std::size_t it = 0; it < max_iter; ++it) {
    apply_transition(model, cur.values, next);
    numeric::CompensatedSum diff;
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = 0.5 * (next[i] + cur.values[i]);
      diff.add(std::fabs(next[i] - cur.values[i]));
    }
    cur.values.swap(next);
    if (diff.value() < tol) return cur;
  }
  fail(ErrorCode::Coverage, "power iteration did not converge for " + model.id());
}

void write_tv_csv(std::ostream& out, const TvCurve& curve, bool header) {
  if (header) out << "model,n,t,tv\n";
  char buf[64];
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", curve.tv[k]);
    out << curve.model << ',' << curve.n << ',' << curve.times[k] << ',' << buf << '\n';
  }
}

}  // namespace cutoff
