#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cutoff/error.hpp"
#include "cutoff/evolution.hpp"
#include "cutoff/model.hpp"

namespace cutoff {

// Flat `key = value` text. Lines before the first `[section]` are global
// defaults; `#` starts a comment.
struct Config {
  std::map<std::string, std::string> global;
  std::map<std::string, std::map<std::string, std::string>> sections;

  // Section value, falling back to the global one.
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
};

Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

inline const std::vector<double> kDefaultEpsGrid{0.9, 0.75, 0.5, 0.25, 0.1};

struct ExperimentConfig {
  ModelSpec model;                      // n is filled per grid point
  std::string grid_key = "n";           // parameter the grid values feed
  std::vector<std::size_t> n_grid;
  std::vector<double> eps_grid = kDefaultEpsGrid;
  std::vector<double> theta_grid{1, 2, 4, 8, 16};
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  std::uint64_t max_steps = 10'000'000;
  std::uint64_t max_states = 5'000'000;
  std::uint64_t curve_budget = kDefaultCurveBudget;
  std::size_t stride = 1;
  std::map<std::string, std::string> extra;  // subcommand-specific keys

  std::string value(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
};

inline const std::vector<std::string> kSubcommands{"tv-curve", "hitting", "coupling",
                                                   "hypotheses", "cutoff-fit", "reproduce-figure1"};

ExperimentConfig resolve_config(const Config& cfg, const std::string& subcommand);

enum class AForm { NLogN, NPow, Custom };

struct CutoffFit {
  AForm a_form = AForm::NLogN;
  double a_constant = 0.0;
  double b_exponent = 0.0;
  bool b_degenerate = false;
  double residual = 0.0;
  std::vector<std::pair<double, double>> window_over_time;  // (size, ratio)
  bool consistent = false;  // window_over_time strictly decreasing
};

struct FitOptions {
  AForm form = AForm::NLogN;
  double gamma = 1.0;               // exponent for NPow
  std::vector<double> custom_scale; // a_n per profile for Custom
  std::vector<double> sizes;        // abscissa per profile; defaults to profile n
};

CutoffFit fit_cutoff(const std::vector<MixingProfile>& profiles, const FitOptions& opts = {});

struct PlotFiles {
  std::vector<std::filesystem::path> tables;
  std::filesystem::path index;
  std::optional<std::filesystem::path> overlay;
};

// `t tv` table per curve plus an index; an overlay with a t/t(1/2) column
// when profiles are supplied (one per curve, same order).
PlotFiles emit_plot_data(const std::vector<TvCurve>& curves, const std::vector<MixingProfile>& profiles,
                         const std::filesystem::path& dir, const std::string& prefix = "plot");

struct ManifestEntry {
  std::string path;
  std::string sha256;
  std::size_t rows = 0;
};

std::string sha256_hex(const std::string& bytes);

struct RunResult {
  std::vector<ManifestEntry> files;
  std::vector<std::string> summary;  // human-readable lines
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

RunResult run_experiment(const std::string& subcommand, const Config& cfg, const RunOverrides& overrides = {});

// 0 on success, 2 for budget-type failures, 1 otherwise.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace cutoff
