#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "cutoff/cutoff.h"
#include "doctest.h"

namespace {

cutoff_model* create(const char* family, size_t n, std::vector<const char*> keys = {}, std::vector<double> vals = {}) {
  cutoff_model* m = nullptr;
  REQUIRE(cutoff_model_create(family, n, keys.data(), vals.data(), keys.size(), &m) == CUTOFF_OK);
  return m;
}

}  // namespace

TEST_CASE("model lifecycle and rows") {
  cutoff_model* m = create("EhrenfestUrn", 2);
  size_t count = 0, size = 0, start = 99;
  CHECK(cutoff_model_state_count(m, &count) == CUTOFF_OK);
  CHECK(count == 3);
  CHECK(cutoff_model_size(m, &size) == CUTOFF_OK);
  CHECK(size == 2);
  CHECK(cutoff_model_default_start(m, &start) == CUTOFF_OK);
  CHECK(start == 0);

  size_t targets[4];
  double probs[4];
  size_t len = 0;
  CHECK(cutoff_model_row(m, 0, targets, probs, 4, &len) == CUTOFF_OK);
  CHECK(len == 2);
  CHECK(targets[0] == 0);
  CHECK(probs[0] == doctest::Approx(0.5));
  CHECK(cutoff_model_row(m, 1, targets, probs, 1, &len) == CUTOFF_ERR_BUFFER);
  CHECK(len == 3);
  CHECK(cutoff_model_row(m, 7, targets, probs, 4, &len) == CUTOFF_ERR_INDEX);
  CHECK(std::strstr(cutoff_last_error(), "out of range") != nullptr);

  double pi[3];
  CHECK(cutoff_model_stationary(m, pi, 3) == CUTOFF_OK);
  CHECK(pi[1] == doctest::Approx(0.5));
  CHECK(cutoff_model_stationary(m, pi, 2) == CUTOFF_ERR_SHAPE);
  cutoff_model_destroy(m);
  cutoff_model_destroy(nullptr);
}

TEST_CASE("parameters pass through") {
  cutoff_model* m = create("CylinderWalk", 0, {"l", "m", "q"}, {4, 5, 0.8});
  size_t count = 0;
  CHECK(cutoff_model_state_count(m, &count) == CUTOFF_OK);
  CHECK(count == 20);
  cutoff_model_destroy(m);

  cutoff_model* bad = nullptr;
  const char* keys[] = {"q"};
  const double vals[] = {0.2};
  CHECK(cutoff_model_create("CylinderWalk", 100, keys, vals, 1, &bad) == CUTOFF_ERR_PARAMETER);
  CHECK(bad == nullptr);
  CHECK(cutoff_model_create("NoSuchChain", 10, nullptr, nullptr, 0, &bad) == CUTOFF_ERR_PARAMETER);
  CHECK(cutoff_model_create("IsingGlauber", 20, nullptr, nullptr, 0, &bad) == CUTOFF_ERR_CAPACITY);
  CHECK(cutoff_model_create(nullptr, 10, nullptr, nullptr, 0, &bad) == CUTOFF_ERR_NULL);
  CHECK(cutoff_model_create("EhrenfestUrn", 10, nullptr, nullptr, 0, nullptr) == CUTOFF_ERR_NULL);
}

TEST_CASE("evolution and distances") {
  cutoff_model* m = create("CouponCollector", 5);
  double in[6] = {0, 0, 0, 0, 0, 1}, out[6];
  CHECK(cutoff_evolve(m, in, out, 6, 1) == CUTOFF_OK);
  CHECK(out[4] == 1.0);
  double d = -1;
  CHECK(cutoff_tv_distance(in, out, 6, &d) == CUTOFF_OK);
  CHECK(d == 1.0);
  CHECK(cutoff_evolve(m, in, out, 5, 1) == CUTOFF_ERR_SHAPE);
  cutoff_model_destroy(m);
}

TEST_CASE("lumping") {
  cutoff_model* cube = create("HypercubeWalk", 3);
  cutoff_model* coarse = nullptr;
  size_t proj[8];
  CHECK(cutoff_model_lump(cube, &coarse, proj, 8) == CUTOFF_OK);
  CHECK(proj[7] == 3);
  CHECK(proj[5] == 2);
  size_t count = 0;
  CHECK(cutoff_model_state_count(coarse, &count) == CUTOFF_OK);
  CHECK(count == 4);
  cutoff_model_destroy(coarse);
  cutoff_model* e = create("EhrenfestUrn", 3);
  CHECK(cutoff_model_lump(e, &coarse, proj, 4) == CUTOFF_ERR_UNSUPPORTED);
  cutoff_model_destroy(e);
  cutoff_model_destroy(cube);
}

TEST_CASE("hitting moments agree across entry points") {
  cutoff_model* m = create("EhrenfestUrn", 4);
  double mean = 0, var = 0;
  CHECK(cutoff_bd_hitting_moments(m, 4, 3, &mean, &var) == CUTOFF_OK);
  CHECK(mean == doctest::Approx(2.0));
  const size_t targets[] = {0, 1, 2, 3};
  double lmean = 0, lvar = 0;
  CHECK(cutoff_linear_solve_hitting(m, 4, targets, 4, &lmean, &lvar) == CUTOFF_OK);
  CHECK(lmean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(lvar == doctest::Approx(var).epsilon(1e-12));

  std::vector<uint64_t> a(500), b(500);
  CHECK(cutoff_mc_hitting(m, 4, targets, 4, 500, 7, a.data()) == CUTOFF_OK);
  CHECK(cutoff_mc_hitting(m, 4, targets, 4, 500, 7, b.data()) == CUTOFF_OK);
  CHECK(a == b);
  double s = 0;
  for (auto v : a) s += double(v);
  CHECK(s / 500 == doctest::Approx(2.0).epsilon(0.2));
  cutoff_model_destroy(m);

  cutoff_model* c = create("CouponCollector", 5);
  const size_t top[] = {4};
  CHECK(cutoff_linear_solve_hitting(c, 2, top, 1, &lmean, &lvar) == CUTOFF_ERR_UNREACHABLE);
  cutoff_model_destroy(c);
}

TEST_CASE("status names and exit codes") {
  CHECK(std::string(cutoff_status_name(CUTOFF_ERR_CAPACITY)) == "capacity");
  CHECK(std::string(cutoff_status_name(CUTOFF_ERR_BUFFER)) == "buffer");
  CHECK(cutoff_exit_code(CUTOFF_OK) == 0);
  CHECK(cutoff_exit_code(CUTOFF_ERR_CAPACITY) == 2);
  CHECK(cutoff_exit_code(CUTOFF_ERR_TIMEOUT) == 2);
  CHECK(cutoff_exit_code(CUTOFF_ERR_PARAMETER) == 1);
  CHECK(cutoff_exit_code(CUTOFF_ERR_NULL) == 1);
}

TEST_CASE("running a subcommand") {
  const char* path = "capi_config.txt";
  std::FILE* f = std::fopen(path, "w");
  REQUIRE(f != nullptr);
  std::fputs("model = EhrenfestUrn\nn_grid = 20, 40\nreplicas = 20\n", f);
  std::fclose(f);
  CHECK(cutoff_run("hitting", path, nullptr, "capi_out") == CUTOFF_OK);
  CHECK(std::strstr(cutoff_last_summary(), "manifest.txt") != nullptr);
  const uint64_t seed = 3;
  CHECK(cutoff_run("coupling", path, &seed, "capi_out2") == CUTOFF_OK);
  CHECK(cutoff_run("bogus", path, nullptr, "capi_out") == CUTOFF_ERR_PARAMETER);
  CHECK(cutoff_run("hitting", "missing.txt", nullptr, "capi_out") == CUTOFF_ERR_IO);
  CHECK(cutoff_run(nullptr, path, nullptr, nullptr) == CUTOFF_ERR_NULL);
}
