#pragma once

// Reproducible experiment runner behind the `ahakv` command line tool.
//
// A run is fully described by an ExperimentConfig: defaults for the
// experiment kind, overlaid by a JSON config file, overlaid by flags. The
// resolved config is written next to the results.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ahakv/numerics.hpp"
#include "ahakv/policies.hpp"
#include "ahakv/stats_verify.hpp"
#include "ahakv/table.hpp"

namespace ahakv {

/// Exit codes shared by every command.
inline constexpr int kExitPass = 0;
inline constexpr int kExitChecksFailed = 1;
inline constexpr int kExitInvalidInput = 2;

/// Raised for any invalid configuration; maps to kExitInvalidInput.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { verify_bias, verify_entropy, run_toy, sweep_sparsity };

std::string_view to_string(ExperimentKind kind) noexcept;
ExperimentKind experiment_from_string(std::string_view name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::verify_bias;
  std::uint64_t seed = 20250417;
  std::size_t trials = 1;
  std::filesystem::path out;
  OutputFormat format = OutputFormat::csv;

  // Synthetic Gaussian instances.
  std::size_t n = 512;
  std::size_t d = 64;

  // Policy.
  std::size_t total_budget = 256;
  std::size_t recent_budget = 32;
  std::size_t pool_kernel = 7;
  std::optional<double> lambda_floor;  // default 1/sqrt(head dim)

  // verify-entropy.
  std::vector<std::size_t> i_values{64, 256, 1024};
  std::vector<double> lambdas{0.0, 1.0};
  double entropy_rel_tol = 0.05;
  std::size_t calibration_i = 1024;
  std::size_t calibration_k = 64;
  double calibration_rel_tol = 0.10;
  std::size_t lognormal_trials = 1000000;
  std::vector<GaussianParams> lognormal_params{{0.0, 0.0}, {0.0, 1.0}, {1.0, 4.0}};

  // run-toy.
  std::size_t vocab = 256;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t mlp_mult = 4;
  std::size_t prompt_len = 2048;
  std::size_t steps = 8;
  std::vector<PolicyKind> policies{PolicyKind::full, PolicyKind::sink, PolicyKind::h2o,
                                   PolicyKind::recent_accum, PolicyKind::aha};
  std::vector<std::size_t> budgets{256};

  // sweep-sparsity.
  std::size_t threshold_count = 111;
  double tau_max = 1.1;
  SparsityBase sparsity_base = SparsityBase::aha;

  /// Defaults for `kind`.
  static ExperimentConfig defaults(ExperimentKind kind);

  /// Overlays keys from a JSON object. Unknown keys, wrong types, or a
  /// "kind" that disagrees with this config throw ConfigError.
  void apply_json(const std::string& json_text);
  void apply_file(const std::filesystem::path& path);

  /// Throws ConfigError when a field violates its module's invariants.
  void validate() const;

  /// Canonical JSON of every field.
  std::string to_json() const;

  /// Policy settings for synthetic runs with head dimension `head_dim`.
  PolicyConfig policy_config(PolicyKind kind, std::size_t budget, std::size_t head_dim) const;
};

/// `base` with `suffix` inserted before the extension: out.csv -> out.<suffix>.csv.
std::filesystem::path sidecar_path(const std::filesystem::path& base, std::string_view suffix,
                                   std::string_view ext);

int cmd_verify_bias(const ExperimentConfig& cfg, std::ostream& log);
int cmd_verify_entropy(const ExperimentConfig& cfg, std::ostream& log);
int cmd_run_toy(const ExperimentConfig& cfg, std::ostream& log);
int cmd_sweep_sparsity(const ExperimentConfig& cfg, std::ostream& log);

/// Validates, writes the resolved config, and dispatches on cfg.kind.
/// Returns one of the kExit* codes; invalid input is reported on `err`.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err);

}  // namespace ahakv
