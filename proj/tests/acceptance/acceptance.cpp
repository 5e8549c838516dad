// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion holds. All tolerances and sizes are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ahakv/attention_sim.hpp"
#include "ahakv/cache_manager.hpp"
#include "ahakv/experiment.hpp"
#include "ahakv/numerics.hpp"
#include "ahakv/policies.hpp"
#include "ahakv/rng.hpp"
#include "ahakv/stats_verify.hpp"
#include "ahakv/toy_model.hpp"
#include "reference/algorithm1_reference.hpp"

using namespace ahakv;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20250417;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// ---------------------------------------------------------------- AC1
Outcome score_gap() {
  const auto r = mc_score_gap(512, 64, 200, kSeed);
  const auto two = mc_score_gap(2, 64, 200, derive_seed(kSeed, 2));
  const bool gap_negative = r.gap_mid.estimate <= -5.0 * r.gap_mid.std_error;
  const bool agree = std::abs(r.agreement_mid.estimate) <= 3.0 * r.agreement_mid.std_error;
  const bool anchor_mean = std::abs(two.gap_full.estimate + 1.0) <= 3.0 * two.gap_full.std_error;
  const bool anchor_diag = two.neg_diag_full.estimate == -1.0;
  return {gap_negative && agree && anchor_mean && anchor_diag,
          "gap " + fmt(r.gap_mid.estimate) + " (" + fmt(r.gap_mid.estimate / r.gap_mid.std_error) +
              " se), gap+diag " + fmt(r.agreement_mid.estimate) + " (" +
              fmt(r.agreement_mid.estimate / r.agreement_mid.std_error) + " se), n=2 gap " +
              fmt(two.gap_full.estimate) + " diag " + fmt(two.neg_diag_full.estimate)};
}

// ---------------------------------------------------------------- AC2
Outcome debias() {
  const auto r = mc_position_bias(512, 64, 32, 200, kSeed);
  const auto& h = r.h2o.slope;
  const auto& a = r.recent.slope;
  const bool h2o_down = h.estimate <= -5.0 * h.std_error;
  const bool recent_flat = std::abs(a.estimate) <= 3.0 * a.std_error;
  return {h2o_down && recent_flat, "h2o slope " + fmt(h.estimate) + " (" + fmt(h.estimate / h.std_error) +
                                       " se), recent slope " + fmt(a.estimate) + " (" +
                                       fmt(a.estimate / a.std_error) + " se)"};
}

// ---------------------------------------------------------------- AC3
Outcome entropy_law() {
  bool ok = true;
  std::string detail;
  std::uint64_t stream = 0;
  for (std::size_t i : {256u, 1024u}) {
    for (double lambda : {0.0, 1.0}) {
      const auto r = mc_entropy(i, 64, lambda, 200, derive_seed(kSeed, 100 + stream++),
                                ScaleMode::scaled_by_sqrt_d, 0.05, EntropyTarget::empirical_variance);
      const double rel = std::abs(r.report.estimate - r.target_empirical) / r.target_empirical;
      ok = ok && r.in_regime && rel <= 0.05;
      detail += "H(" + std::to_string(i) + "," + fmt(lambda) + ")=" + fmt(r.report.estimate) + "/" +
                fmt(r.target_empirical) + " ";
    }
  }
  const GaussianParams params[] = {{0.0, 0.0}, {0.0, 1.0}, {1.0, 4.0}};
  const double band[] = {0.0, 0.01, 0.02};
  for (std::size_t k = 0; k < 3; ++k) {
    auto [ex, xex] = mc_lognormal(params[k], 1000000, derive_seed(kSeed, 200 + k));
    for (const McReport* r : {&ex, &xex}) {
      const bool sigma_ok = std::abs(r->estimate - r->target) <= 3.0 * r->std_error;
      const double allowed = band[k] * std::max(1.0, std::abs(r->target));
      const bool band_ok = std::abs(r->estimate - r->target) <= allowed;
      ok = ok && sigma_ok && band_ok;
      if (!sigma_ok || !band_ok)
        detail += "[" + r->name + " mu=" + fmt(params[k].mu) + " s2=" + fmt(params[k].sigma2) + " off] ";
    }
  }
  detail += "lognormal moments checked at 1e6 samples";
  return {ok, detail};
}

// ---------------------------------------------------------------- AC4
Outcome calibration() {
  const double lambda = lambda_for({64, 64, 0.0}, 1024);
  const auto r = mc_entropy(1024, 64, lambda, 200, derive_seed(kSeed, 300), ScaleMode::unscaled, 0.10,
                            EntropyTarget::nominal_variance);
  const double target = std::log(64.0);
  const double rel = std::abs(r.report.estimate - target) / target;
  return {rel <= 0.10 && std::abs(r.report.target - target) <= 1e-12,
          "lambda " + fmt(lambda) + ", H " + fmt(r.report.estimate) + " vs ln 64 " + fmt(target) +
              " (rel " + fmt(rel) + ")"};
}

// ---------------------------------------------------------------- AC5
Outcome positional() {
  const std::size_t seeds = 50;
  double aha = 0, h2o = 0;
  std::size_t ks_wins = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto r = positional_retention(2048, 64, 256, 32, derive_seed(kSeed, 500 + s));
    aha += r.aha_all.mean_retained_index_ratio;
    h2o += r.h2o_all.mean_retained_index_ratio;
    ks_wins += r.aha_selected.ks_to_uniform <= r.h2o_selected.ks_to_uniform;
  }
  aha /= seeds;
  h2o /= seeds;
  const double ks_frac = static_cast<double>(ks_wins) / seeds;
  return {aha >= 0.40 && aha <= 0.60 && aha - h2o >= 0.05 && ks_frac >= 0.90,
          "aha ratio " + fmt(aha) + ", h2o ratio " + fmt(h2o) + ", KS wins " + fmt(ks_frac)};
}

// ---------------------------------------------------------------- AC6
Outcome sparsity() {
  const std::size_t seeds = 50;
  const auto grid = threshold_grid(111, 1.1);
  const auto cfg = PolicyConfig::make(PolicyKind::aha, 256, 32, 64);
  std::size_t good = 0;
  double worst = 1.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto c = sparsity_instance(2048, 64, cfg, SparsityBase::aha, derive_seed(kSeed, 600 + s), grid);
    const double frac = c.fraction_refined_at_or_below();
    worst = std::min(worst, frac);
    good += frac >= 0.90;
  }
  const double seed_frac = static_cast<double>(good) / seeds;
  return {seed_frac >= 0.90, "seeds passing " + fmt(seed_frac) + ", worst seed " + fmt(worst)};
}

// ---------------------------------------------------------------- AC7
ahakv_ref::Mat to_ref(const Matrix& m) {
  ahakv_ref::Mat out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

Outcome oracle_equivalence() {
  std::size_t instances = 0, mismatches = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t d = 1; d <= 4; ++d) {
      for (std::size_t b = 1; b <= n + 4; ++b) {
        for (std::size_t br = 1; br <= b; ++br) {
          for (std::size_t kernel : {1u, 3u, 7u}) {
            for (double floor : {-1.0, 0.0}) {
              for (std::uint64_t rep = 0; rep < 2; ++rep) {
                auto cfg = PolicyConfig::make(PolicyKind::aha, b, br, d);
                cfg.pool_kernel = kernel;
                if (floor >= 0.0) cfg.lambda_schedule.floor = floor;
                const std::uint64_t seed = derive_seed(kSeed, ((n * 8 + d) * 16 + b) * 16 + br) ^ (rep << 40) ^
                                           (kernel << 48) ^ (floor >= 0.0 ? 1ULL << 60 : 0);
                const auto prompt = gaussian_qkv({n, d, seed, ScaleMode::scaled_by_sqrt_d});
                const auto extra = gaussian_qkv({4, d, seed ^ 0x5eed, ScaleMode::scaled_by_sqrt_d});
                const ahakv_ref::Params p{b, br, kernel, cfg.lambda_schedule.floor};
                ++instances;
                auto state = prefill_head(prompt, cfg);
                auto ref = ahakv_ref::ref_prefill(to_ref(prompt.q), to_ref(prompt.k), to_ref(prompt.v), p);
                bool same = state.indices == ref.live;
                for (std::size_t t = 0; t < 4 && same; ++t) {
                  generation_step(state, extra.q.row(t), extra.k.row(t), extra.v.row(t), cfg);
                  const std::vector<double> q(extra.q.row(t).begin(), extra.q.row(t).end());
                  const std::vector<double> k(extra.k.row(t).begin(), extra.k.row(t).end());
                  const std::vector<double> v(extra.v.row(t).begin(), extra.v.row(t).end());
                  ahakv_ref::ref_generate(ref, q, k, v, p);
                  same = state.indices == ref.live;
                }
                mismatches += !same;
              }
            }
          }
        }
      }
    }
  }
  return {mismatches == 0 && instances > 0,
          std::to_string(instances) + " instances, " + std::to_string(mismatches) + " mismatches"};
}

// ---------------------------------------------------------------- AC8
std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[fs::relative(e.path(), dir).generic_string()] = os.str();
  }
  return out;
}

Outcome invariants() {
  std::size_t cases = 0, violations = 0;
  CounterRng rng(kSeed, 800);
  const PolicyKind kinds[] = {PolicyKind::aha, PolicyKind::h2o, PolicyKind::recent_accum, PolicyKind::sink,
                              PolicyKind::full};
  for (std::size_t c = 0; c < 12000; ++c) {
    const std::size_t n = 1 + rng.next_u64() % 48;
    const std::size_t d = 1 + rng.next_u64() % 8;
    const std::size_t br = 1 + rng.next_u64() % 8;
    const std::size_t b = br + rng.next_u64() % 24;
    const std::size_t steps = rng.next_u64() % 9;
    const PolicyKind kind = kinds[c % 5];
    auto cfg = PolicyConfig::make(kind, b, br, d);
    cfg.pool_kernel = 1 + 2 * (rng.next_u64() % 4);
    const auto prompt = gaussian_qkv({n, d, rng.next_u64(), ScaleMode::scaled_by_sqrt_d});
    const auto extra = gaussian_qkv({std::max<std::size_t>(steps, 1), d, rng.next_u64(), ScaleMode::scaled_by_sqrt_d});
    ++cases;
    bool ok = true;
    auto check = [&](const HeadCacheState& s) {
      if (kind != PolicyKind::full && s.size() > b) ok = false;
      const std::size_t w = std::min(br, s.processed);
      for (std::size_t t = s.processed - w; t < s.processed; ++t)
        if (!std::binary_search(s.indices.begin(), s.indices.end(), t)) ok = false;
      try {
        s.check_invariants(cfg);
      } catch (const std::exception&) {
        ok = false;
      }
    };
    auto state = prefill_head(prompt, cfg);
    check(state);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto before = state;
      const auto out = generation_step(state, extra.q.row(t), extra.k.row(t), extra.v.row(t), cfg);
      check(state);
      if (out.evicted.has_value() && (before.size() + 1 <= b && kind != PolicyKind::full)) ok = false;
      for (std::size_t a = 0; a < before.size(); ++a) {
        auto it = std::lower_bound(state.indices.begin(), state.indices.end(), before.indices[a]);
        if (it != state.indices.end() && *it == before.indices[a] &&
            state.scores[static_cast<std::size_t>(it - state.indices.begin())] < before.scores[a])
          ok = false;
      }
    }
    violations += !ok;
  }

  // Full budget: every policy decodes exactly like the uncached reference.
  std::size_t decode_cases = 0;
  for (std::uint64_t s = 0; s < 6; ++s) {
    const auto model = build_toy_model({64, 2, 2, 8, 2, derive_seed(kSeed, 900 + s)});
    const auto prompt = random_prompt(20 + 7 * s, 64, derive_seed(kSeed, 950 + s));
    const std::size_t steps = 6;
    const auto ref = reference_decode(model, prompt, steps);
    FullKvCache full(2, 2);
    violations += greedy_decode(model, prompt, steps, full) != ref;
    for (auto kind : kinds) {
      const auto cfg = PolicyConfig::make(kind, prompt.size() + steps, 4, 8);
      violations += run_policy_end_to_end(model, prompt, steps, cfg).tokens != ref;
      ++decode_cases;
    }
  }

  // Identical seeds give byte-identical experiment outputs.
  const auto root = fs::temp_directory_path() / "ahakv_acceptance_cli";
  const std::pair<ExperimentKind, const char*> runs[] = {
      {ExperimentKind::verify_bias, R"({"n": 64, "d": 8, "recent_budget": 8, "trials": 20})"},
      {ExperimentKind::verify_entropy, R"({"i_values": [16, 64], "trials": 20, "lognormal_trials": 2000, "calibration_i": 64, "calibration_k": 8})"},
      {ExperimentKind::run_toy, R"({"vocab": 32, "layers": 1, "heads": 2, "head_dim": 4, "prompt_len": 64, "steps": 4, "budgets": [16, 80], "recent_budget": 4})"},
      {ExperimentKind::sweep_sparsity, R"({"n": 256, "d": 16, "total_budget": 32, "recent_budget": 4, "trials": 3})"}};
  std::size_t cli_runs = 0;
  for (const auto& [kind, json] : runs) {
    for (auto format : {OutputFormat::csv, OutputFormat::json}) {
      std::map<std::string, std::string> first;
      for (int rep = 0; rep < 2; ++rep) {
        fs::remove_all(root);
        auto cfg = ExperimentConfig::defaults(kind);
        cfg.apply_json(json);
        cfg.format = format;
        cfg.out = root / ("out" + std::string(extension(format)));
        std::ostringstream log, err;
        const int code = run_experiment(cfg, log, err);
        if (code == kExitInvalidInput) ++violations;
        auto files = read_dir(root);
        if (rep == 0) first = std::move(files);
        else violations += files != first || first.empty();
      }
      ++cli_runs;
    }
  }
  fs::remove_all(root);

  return {violations == 0, std::to_string(cases) + " cache cases, " + std::to_string(decode_cases) +
                               " full-budget decodes, " + std::to_string(cli_runs) + " repeated runs, " +
                               std::to_string(violations) + " violations"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"AC1", "score-gap bias", 120, score_gap},
      {"AC2", "recent-window de-biasing", 120, debias},
      {"AC3", "entropy law and lognormal moments", 180, entropy_law},
      {"AC4", "lambda calibration", 120, calibration},
      {"AC5", "positional retention", 300, positional},
      {"AC6", "value-prior sparsity", 60, sparsity},
      {"AC7", "selection oracle equivalence", 60, oracle_equivalence},
      {"AC8", "budget, recency and determinism invariants", 180, invariants},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] %s %s: %s; %.1f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
