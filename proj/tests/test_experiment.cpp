#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "cutoff/error.hpp"
#include "cutoff/experiment.hpp"
#include "doctest.h"

using namespace cutoff;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Undefined;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cutoff_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

MixingProfile synthetic(std::size_t n, double mid, double half_width) {
  MixingProfile p;
  p.model = "toy";
  p.n = n;
  p.eps_grid = {0.75, 0.5, 0.25};
  p.t_eps = {std::size_t(std::llround(mid - half_width)), std::size_t(std::llround(mid)),
             std::size_t(std::llround(mid + half_width))};
  return p;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("config grammar") {
    const Config c = parse_config(
        "# comment line\n"
        "model = EhrenfestUrn   # trailing comment\n"
        "seed=5\n"
        "\n"
        "[hitting]\n"
        "  replicas = 10\n"
        "seed = 9\n");
    CHECK(c.global.at("model") == "EhrenfestUrn");
    CHECK(c.get("hitting", "seed") == "9");
    CHECK(c.get("tv-curve", "seed") == "5");
    CHECK(c.get("hitting", "replicas") == "10");
    CHECK_FALSE(c.get("tv-curve", "replicas").has_value());
    CHECK(code_of([] { (void)parse_config("just words\n"); }) == ErrorCode::Parameter);
    CHECK(code_of([] { (void)parse_config("[broken\n"); }) == ErrorCode::Parameter);
    CHECK(code_of([] { (void)parse_config(" = 3\n"); }) == ErrorCode::Parameter);
    CHECK(code_of([] { (void)load_config("/nonexistent/config.txt"); }) == ErrorCode::Io);
  }

  TEST_CASE("resolved experiment settings") {
    const Config c = parse_config(
        "model = PartialDiffusive\nparam.eps = 0.4\nn_grid = 100, 200,400\nstride = 3\nform = nPow\n"
        "[coupling]\nreplicas = 77\n");
    const auto e = resolve_config(c, "coupling");
    CHECK(e.model.family == Family::PartialDiffusive);
    CHECK(e.model.params.at("eps") == 0.4);
    CHECK(e.n_grid == std::vector<std::size_t>{100, 200, 400});
    CHECK(e.replicas == 77);
    CHECK(e.stride == 3);
    CHECK(e.value("form", "") == "nPow");
    CHECK(e.eps_grid == kDefaultEpsGrid);
    CHECK(resolve_config(c, "hitting").replicas == 1000);

    const auto f = resolve_config(Config{}, "reproduce-figure1");
    CHECK(f.model.family == Family::BiasedSegment);
    CHECK(f.n_grid == std::vector<std::size_t>{50, 100, 200, 400});

    CHECK(code_of([] { (void)resolve_config(parse_config("n_grid = 10, 10\n"), "tv-curve"); }) == ErrorCode::Parameter);
    CHECK(code_of([] { (void)resolve_config(parse_config("eps_grid = 0.25, 0.5\n"), "tv-curve"); }) ==
          ErrorCode::Parameter);
    CHECK(code_of([] { (void)resolve_config(parse_config("eps_grid = 0.5, 1.0\n"), "tv-curve"); }) ==
          ErrorCode::Parameter);
    CHECK(code_of([] { (void)resolve_config(parse_config("replicas = 2.5\n"), "tv-curve"); }) == ErrorCode::Parameter);
    CHECK(code_of([] { (void)resolve_config(parse_config("model = Nope\n"), "tv-curve"); }) == ErrorCode::Parameter);
    CHECK(code_of([] { (void)resolve_config(Config{}, "draw"); }) == ErrorCode::Parameter);
  }

  TEST_CASE("fit on synthetic profiles") {
    std::vector<MixingProfile> zero;
    for (std::size_t n : {100u, 200u, 400u, 800u}) {
      auto p = synthetic(n, 2.0 * n * std::log(double(n)), 0.0);
      zero.push_back(p);
    }
    const auto f0 = fit_cutoff(zero);
    CHECK(f0.a_constant == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(f0.b_degenerate);
    CHECK(std::isnan(f0.b_exponent));
    CHECK(f0.residual >= 0.0);

    std::vector<MixingProfile> law;
    for (std::size_t n : {1000u, 4000u, 16000u, 64000u}) law.push_back(synthetic(n, 3.0 * std::pow(double(n), 1.5), 2.0 * n));
    FitOptions o;
    o.form = AForm::NPow;
    o.gamma = 1.5;
    const auto f1 = fit_cutoff(law, o);
    CHECK(f1.a_constant == doctest::Approx(3.0).epsilon(0.01));
    CHECK(f1.b_exponent == doctest::Approx(1.0).epsilon(0.01));
    CHECK(f1.consistent);
    for (const auto& [size, ratio] : f1.window_over_time) CHECK(ratio >= 0.0);

    CHECK(code_of([&] { (void)fit_cutoff({law[0], law[1]}); }) == ErrorCode::Fit);
    CHECK(code_of([&] { (void)fit_cutoff({law[0], law[2], law[1]}); }) == ErrorCode::Fit);
    auto shrinking = law;
    shrinking[2].t_eps[1] = 1;
    shrinking[2].n = 20000;
    CHECK(code_of([&] { (void)fit_cutoff(shrinking); }) == ErrorCode::Fit);
    FitOptions custom;
    custom.form = AForm::Custom;
    custom.custom_scale = {1, 2};
    CHECK(code_of([&] { (void)fit_cutoff(law, custom); }) == ErrorCode::Fit);
  }

  TEST_CASE("Ehrenfest fit recovers half n log n") {
    std::vector<MixingProfile> profiles;
    for (std::size_t n : {250u, 500u, 1000u, 2000u}) {
      const auto m = build_model({Family::EhrenfestUrn, n, {}});
      const auto c = tv_curve_until(m, Distribution::delta(n + 1, 0), 0.1, 1, 1000000);
      profiles.push_back(mixing_profile(c, kDefaultEpsGrid));
    }
    const auto fit = fit_cutoff(profiles);
    CHECK(fit.a_constant / 0.5 >= 0.9);
    CHECK(fit.a_constant / 0.5 <= 1.1);
    CHECK(fit.consistent);
  }

  TEST_CASE("sha256") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }

  TEST_CASE("plot tables") {
    const fs::path dir = scratch("plots");
    TvCurve c{"EhrenfestUrn", 4, 1, {0, 1, 2}, {0.9, 0.5, 0.2}};
    const auto pf = emit_plot_data({c}, {}, dir);
    CHECK(pf.tables.size() == 1);
    CHECK(slurp(pf.tables[0]) == "t tv\n0 0.90000000000000002\n1 0.5\n2 0.20000000000000001\n");
    CHECK(slurp(pf.index) == "file model n\nplot_EhrenfestUrn_n4.dat EhrenfestUrn 4\n");
    CHECK_FALSE(pf.overlay.has_value());
    MixingProfile p{"EhrenfestUrn", 4, {0.5}, {1}, 1};
    const auto with = emit_plot_data({c}, {p}, dir, "x");
    REQUIRE(with.overlay.has_value());
    CHECK(slurp(*with.overlay) ==
          "model n t t_over_t_half tv\nEhrenfestUrn 4 0 0 0.90000000000000002\nEhrenfestUrn 4 1 1 0.5\n"
          "EhrenfestUrn 4 2 2 0.20000000000000001\n");
    CHECK(code_of([&] { (void)emit_plot_data({}, {}, dir); }) == ErrorCode::Parameter);
    fs::remove_all(dir);
  }

  TEST_CASE("empty grid writes only a manifest") {
    const fs::path dir = scratch("empty");
    const auto r = run_experiment("tv-curve", parse_config("model = CouponCollector\nn_grid =\n"), {std::nullopt, dir});
    CHECK(r.files.empty());
    CHECK(slurp(dir / "manifest.txt") == "path,sha256,rows\n");
    fs::remove_all(dir);
  }

  TEST_CASE("coupon curves end to end and deterministic") {
    const Config c = parse_config("model = CouponCollector\nn_grid = 100, 200, 400, 800, 1600\n");
    const fs::path a = scratch("coupon_a"), b = scratch("coupon_b");
    const auto ra = run_experiment("tv-curve", c, {std::nullopt, a});
    const auto rb = run_experiment("tv-curve", c, {std::nullopt, b});
    std::size_t curves = 0, profiles = 0;
    for (const auto& f : ra.files) {
      curves += f.path.rfind("curve_", 0) == 0;
      profiles += f.path.rfind("profile_", 0) == 0;
      CHECK(slurp(a / f.path).size() > 0);
      CHECK(sha256_hex(slurp(a / f.path)) == f.sha256);
    }
    CHECK(curves == 5);
    CHECK(profiles == 1);
    REQUIRE(ra.files.size() == rb.files.size());
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
      CHECK(ra.files[i].sha256 == rb.files[i].sha256);
      CHECK(slurp(a / ra.files[i].path) == slurp(b / rb.files[i].path));
    }
    CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
    const std::string first = slurp(a / "curve_CouponCollector_n100.csv");
    CHECK(first.rfind("model,n,t,tv\nCouponCollector,100,0,", 0) == 0);
    fs::remove_all(a);
    fs::remove_all(b);
  }

  TEST_CASE("seeded Monte Carlo subcommands are reproducible and honour the seed override") {
    const Config c = parse_config(
        "model = EhrenfestUrn\nn_grid = 40, 80\nreplicas = 200\n"
        "[coupling]\nreplicas = 100\n");
    for (const std::string sub : {"hitting", "coupling", "hypotheses"}) {
      CAPTURE(sub);
      const fs::path a = scratch("mc_a"), b = scratch("mc_b"), d = scratch("mc_d");
      const auto ra = run_experiment(sub, c, {std::nullopt, a});
      const auto rb = run_experiment(sub, c, {std::nullopt, b});
      CHECK_FALSE(ra.files.empty());
      CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
      if (sub != "hypotheses") {
        const auto rd = run_experiment(sub, c, {std::uint64_t(99), d});
        CHECK(slurp(a / "manifest.txt") != slurp(d / "manifest.txt"));
      }
      for (const auto& p : {a, b, d}) fs::remove_all(p);
    }
  }

  TEST_CASE("other families through the runner") {
    const fs::path dir = scratch("families");
    auto run = [&](const std::string& sub, const std::string& text) {
      fs::remove_all(dir);
      return run_experiment(sub, parse_config(text), {std::nullopt, dir});
    };
    CHECK_FALSE(run("hitting", "model = TopInAtRandom\nn_grid = 20\ntheta_grid = 1, 2\nreplicas = 50\n").files.empty());
    CHECK_FALSE(run("hitting", "model = CouponCollector\nn_grid = 30\nreplicas = 50\n").files.empty());
    CHECK_FALSE(run("coupling", "model = CylinderWalk\nparam.l = 6\nn_grid = 3, 4\ngrid_key = m\nreplicas = 50\n").files.empty());
    CHECK_FALSE(run("coupling", "model = PartialDiffusive\nparam.eps = 0.4\nn_grid = 200\nreplicas = 50\n").files.empty());
    CHECK_FALSE(run("hypotheses", "model = PartialDiffusive\nparam.eps = 0.4\nn_grid = 1000, 2000\nfamily = linear\n").files.empty());
    CHECK_FALSE(run("hypotheses", "model = CylinderWalk\nparam.m = 4\ngrid_key = l\nn_grid = 10, 20\n").files.empty());
    const auto fig = run("reproduce-figure1", "");
    bool windows = false;
    for (const auto& f : fig.files) windows |= f.path == "figure1_windows.csv";
    CHECK(windows);
    const auto fit = run("cutoff-fit", "model = EhrenfestUrn\nn_grid = 100, 200, 400\n");
    CHECK(fs::exists(dir / "fit_EhrenfestUrn.csv"));
    CHECK(fs::exists(dir / "window_EhrenfestUrn.csv"));
    CHECK_FALSE(fit.summary.empty());
    fs::remove_all(dir);
  }

  TEST_CASE("budget errors name the model and size") {
    const fs::path dir = scratch("budget");
    try {
      (void)run_experiment("tv-curve", parse_config("model = EhrenfestUrn\nn_grid = 500\nmax_steps = 10\n"),
                           {std::nullopt, dir});
      FAIL("expected a coverage error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Coverage);
      CHECK(std::string(e.what()).find("EhrenfestUrn n=500") != std::string::npos);
      CHECK(exit_code_for(e.code()) == 2);
    }
    try {
      (void)run_experiment("tv-curve", parse_config("model = EhrenfestUrn\nn_grid = 500\nmax_states = 100\n"),
                           {std::nullopt, dir});
      FAIL("expected a capacity error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Capacity);
      CHECK(std::string(e.what()).find("n=500") != std::string::npos);
    }
    CHECK(exit_code_for(ErrorCode::Timeout) == 2);
    CHECK(exit_code_for(ErrorCode::Parameter) == 1);
    CHECK(exit_code_for(ErrorCode::Audit) == 1);
    fs::remove_all(dir);
  }
}
