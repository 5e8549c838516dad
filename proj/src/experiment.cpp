#include "ahakv/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "ahakv/cache_manager.hpp"
#include "ahakv/rng.hpp"
#include "ahakv/toy_model.hpp"

namespace ahakv {

using json = nlohmann::ordered_json;

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::verify_bias: return "verify-bias";
    case ExperimentKind::verify_entropy: return "verify-entropy";
    case ExperimentKind::run_toy: return "run-toy";
    case ExperimentKind::sweep_sparsity: return "sweep-sparsity";
  }
  return "?";
}

ExperimentKind experiment_from_string(std::string_view name) {
  for (auto kind : {ExperimentKind::verify_bias, ExperimentKind::verify_entropy,
                    ExperimentKind::run_toy, ExperimentKind::sweep_sparsity}) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ExperimentKind::verify_bias:
      cfg.n = 512;
      cfg.trials = 200;
      break;
    case ExperimentKind::verify_entropy:
      cfg.trials = 200;
      break;
    case ExperimentKind::run_toy:
      cfg.trials = 1;
      break;
    case ExperimentKind::sweep_sparsity:
      cfg.n = 2048;
      cfg.trials = 1;
      break;
  }
  cfg.out = std::string(to_string(kind)) + std::string(extension(cfg.format));
  return cfg;
}

namespace {

std::size_t as_count(const json& v, std::string_view key) {
  if (!v.is_number_unsigned())
    throw ConfigError("config key '" + std::string(key) + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

double as_real(const json& v, std::string_view key) {
  if (!v.is_number()) throw ConfigError("config key '" + std::string(key) + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError("config key '" + std::string(key) + "' must be finite");
  return x;
}

std::string as_string(const json& v, std::string_view key) {
  if (!v.is_string()) throw ConfigError("config key '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, std::string_view key) {
  if (!v.is_array()) throw ConfigError("config key '" + std::string(key) + "' must be an array");
  return v;
}

}  // namespace

void ExperimentConfig::apply_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  for (const auto& [key, v] : doc.items()) {
    if (key == "kind") {
      if (experiment_from_string(as_string(v, key)) != kind)
        throw ConfigError("config kind '" + v.get<std::string>() + "' does not match command '" +
                          std::string(to_string(kind)) + "'");
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) throw ConfigError("config key 'seed' must be an unsigned integer");
      seed = v.get<std::uint64_t>();
    } else if (key == "trials") {
      trials = as_count(v, key);
    } else if (key == "out") {
      out = as_string(v, key);
    } else if (key == "format") {
      try {
        format = output_format_from_string(as_string(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "n") {
      n = as_count(v, key);
    } else if (key == "d") {
      d = as_count(v, key);
    } else if (key == "total_budget") {
      total_budget = as_count(v, key);
    } else if (key == "recent_budget") {
      recent_budget = as_count(v, key);
    } else if (key == "pool_kernel") {
      pool_kernel = as_count(v, key);
    } else if (key == "lambda_floor") {
      lambda_floor = as_real(v, key);
    } else if (key == "i_values") {
      i_values.clear();
      for (const auto& x : as_array(v, key)) i_values.push_back(as_count(x, key));
    } else if (key == "lambdas") {
      lambdas.clear();
      for (const auto& x : as_array(v, key)) lambdas.push_back(as_real(x, key));
    } else if (key == "entropy_rel_tol") {
      entropy_rel_tol = as_real(v, key);
    } else if (key == "calibration_i") {
      calibration_i = as_count(v, key);
    } else if (key == "calibration_k") {
      calibration_k = as_count(v, key);
    } else if (key == "calibration_rel_tol") {
      calibration_rel_tol = as_real(v, key);
    } else if (key == "lognormal_trials") {
      lognormal_trials = as_count(v, key);
    } else if (key == "lognormal_params") {
      lognormal_params.clear();
      for (const auto& x : as_array(v, key)) {
        if (!x.is_object() || x.size() != 2 || !x.contains("mu") || !x.contains("sigma2"))
          throw ConfigError("lognormal_params entries must be {\"mu\": x, \"sigma2\": y}");
        lognormal_params.push_back({as_real(x["mu"], "mu"), as_real(x["sigma2"], "sigma2")});
      }
    } else if (key == "vocab") {
      vocab = as_count(v, key);
    } else if (key == "layers") {
      layers = as_count(v, key);
    } else if (key == "heads") {
      heads = as_count(v, key);
    } else if (key == "head_dim") {
      head_dim = as_count(v, key);
    } else if (key == "mlp_mult") {
      mlp_mult = as_count(v, key);
    } else if (key == "prompt_len") {
      prompt_len = as_count(v, key);
    } else if (key == "steps") {
      steps = as_count(v, key);
    } else if (key == "policies") {
      policies.clear();
      for (const auto& x : as_array(v, key)) {
        try {
          policies.push_back(policy_from_string(as_string(x, key)));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
    } else if (key == "budgets") {
      budgets.clear();
      for (const auto& x : as_array(v, key)) budgets.push_back(as_count(x, key));
    } else if (key == "threshold_count") {
      threshold_count = as_count(v, key);
    } else if (key == "tau_max") {
      tau_max = as_real(v, key);
    } else if (key == "sparsity_base") {
      try {
        sparsity_base = sparsity_base_from_string(as_string(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

void ExperimentConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_json(text.str());
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(trials >= 1, "trials must be >= 1");
  require(!out.empty(), "out path must be set");
  if (lambda_floor) require(*lambda_floor >= 0.0, "lambda_floor must be >= 0");
  require(pool_kernel >= 1 && pool_kernel % 2 == 1, "pool_kernel must be odd and >= 1");
  require(recent_budget >= 1, "recent_budget must be >= 1");

  switch (kind) {
    case ExperimentKind::verify_bias:
      require(trials >= 2, "verify-bias needs trials >= 2");
      require(d >= 1, "d must be >= 1");
      require(n >= recent_budget + 3, "verify-bias needs n >= recent_budget + 3");
      break;
    case ExperimentKind::verify_entropy:
      require(d >= 1, "d must be >= 1");
      require(!i_values.empty(), "i_values must be nonempty");
      for (auto i : i_values) require(i >= 2, "every i in i_values must be >= 2");
      require(!lambdas.empty(), "lambdas must be nonempty");
      for (double l : lambdas) require(l >= 0.0, "lambdas must be >= 0");
      require(entropy_rel_tol > 0.0 && calibration_rel_tol > 0.0, "tolerances must be > 0");
      require(calibration_i >= 2 && calibration_k >= 1, "calibration_i >= 2 and calibration_k >= 1");
      require(lognormal_trials >= 2, "lognormal_trials must be >= 2");
      for (const auto& p : lognormal_params) require(p.sigma2 >= 0.0, "sigma2 must be >= 0");
      break;
    case ExperimentKind::run_toy:
      require(vocab >= 1 && layers >= 1 && heads >= 1 && head_dim >= 1 && mlp_mult >= 1,
              "toy model counts must be >= 1");
      require(prompt_len >= 1, "prompt_len must be >= 1");
      require(steps >= 1, "steps must be >= 1");
      require(!policies.empty(), "policies must be nonempty");
      require(!budgets.empty(), "budgets must be nonempty");
      for (auto b : budgets) require(b >= recent_budget, "every budget must be >= recent_budget");
      break;
    case ExperimentKind::sweep_sparsity:
      require(d >= 1, "d must be >= 1");
      require(n > recent_budget, "sweep-sparsity needs n > recent_budget");
      require(total_budget >= recent_budget, "total_budget must be >= recent_budget");
      require(threshold_count >= 2, "threshold_count must be >= 2");
      require(tau_max > 0.0, "tau_max must be > 0");
      break;
  }
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  j["seed"] = seed;
  j["trials"] = trials;
  j["out"] = out.generic_string();
  j["format"] = ahakv::to_string(format);
  j["n"] = n;
  j["d"] = d;
  j["total_budget"] = total_budget;
  j["recent_budget"] = recent_budget;
  j["pool_kernel"] = pool_kernel;
  j["lambda_floor"] = lambda_floor ? json(*lambda_floor) : json(nullptr);
  j["i_values"] = i_values;
  j["lambdas"] = lambdas;
  j["entropy_rel_tol"] = entropy_rel_tol;
  j["calibration_i"] = calibration_i;
  j["calibration_k"] = calibration_k;
  j["calibration_rel_tol"] = calibration_rel_tol;
  j["lognormal_trials"] = lognormal_trials;
  j["lognormal_params"] = json::array();
  for (const auto& p : lognormal_params) j["lognormal_params"].push_back({{"mu", p.mu}, {"sigma2", p.sigma2}});
  j["vocab"] = vocab;
  j["layers"] = layers;
  j["heads"] = heads;
  j["head_dim"] = head_dim;
  j["mlp_mult"] = mlp_mult;
  j["prompt_len"] = prompt_len;
  j["steps"] = steps;
  j["policies"] = json::array();
  for (auto p : policies) j["policies"].push_back(ahakv::to_string(p));
  j["budgets"] = budgets;
  j["threshold_count"] = threshold_count;
  j["tau_max"] = tau_max;
  j["sparsity_base"] = ahakv::to_string(sparsity_base);
  return j.dump(2) + "\n";
}

PolicyConfig ExperimentConfig::policy_config(PolicyKind policy, std::size_t budget,
                                             std::size_t dim) const {
  auto cfg = PolicyConfig::make(policy, budget, recent_budget, dim);
  cfg.pool_kernel = pool_kernel;
  if (lambda_floor) cfg.lambda_schedule.floor = *lambda_floor;
  return cfg;
}

std::filesystem::path sidecar_path(const std::filesystem::path& base, std::string_view suffix,
                                   std::string_view ext) {
  auto name = base.stem().string();
  name += '.';
  name += suffix;
  name += ext;
  return base.parent_path() / name;
}

namespace {

struct CheckList {
  Table table{{"check", "estimate", "stderr", "target", "trials", "rule", "pass"}};
  bool all_pass = true;

  void add(const McReport& r, std::ostream& log) {
    table.add_row({r.name, r.estimate, r.std_error, r.target, static_cast<std::int64_t>(r.trials),
                   r.rule.describe(), r.judged() ? Cell(r.pass) : Cell(std::string("n/a"))});
    if (r.judged()) {
      all_pass = all_pass && r.pass;
      log << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": estimate " << format_double(r.estimate)
          << " se " << format_double(r.std_error) << " target " << format_double(r.target) << " ("
          << r.rule.describe() << ")\n";
    }
  }

  void add_bool(const std::string& name, double value, bool pass, std::ostream& log) {
    table.add_row({name, value, 0.0, 0.0, std::int64_t{1}, std::string("boolean"), pass});
    all_pass = all_pass && pass;
    log << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << format_double(value) << "\n";
  }
};

Table position_table(const PositionProfile& p) {
  Table t({"position", "mean_score", "stderr"});
  for (std::size_t j = 0; j < p.mean.size(); ++j)
    t.add_row({static_cast<std::int64_t>(j), p.mean[j], p.std_error[j]});
  return t;
}

std::string ext_of(const ExperimentConfig& cfg) { return std::string(extension(cfg.format)); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
}

}  // namespace

int cmd_verify_bias(const ExperimentConfig& cfg, std::ostream& log) {
  const auto gap = mc_score_gap(cfg.n, cfg.d, cfg.trials, cfg.seed);
  const auto anchor = mc_score_gap(2, cfg.d, cfg.trials, derive_seed(cfg.seed, 2));
  const auto debias = mc_position_bias(cfg.n, cfg.d, cfg.recent_budget, cfg.trials, cfg.seed);

  CheckList checks;
  checks.add(gap.gap_mid, log);
  checks.add(gap.neg_diag_mid, log);
  checks.add(gap.agreement_mid, log);
  checks.add(gap.gap_full, log);
  checks.add(gap.neg_diag_full, log);
  checks.add(gap.agreement_full, log);
  // Two tokens: S_2 - S_1 = -2 a_{2,1}, whose mean is -1 by exchangeability of
  // the two keys, while a_{1,1} = 1 exactly.
  checks.add(McReport::make("score_gap_n2", anchor.gap_full.estimate, anchor.gap_full.std_error,
                            anchor.gap_full.trials, -1.0, PassRule::within_sigmas(3.0)),
             log);
  checks.add(McReport::make("neg_diag_n2", anchor.neg_diag_full.estimate, 0.0,
                            anchor.neg_diag_full.trials, -1.0, PassRule::relative(1e-12)),
             log);
  checks.add(debias.h2o.slope, log);
  checks.add(debias.recent.slope, log);

  position_table(debias.h2o).write_file(cfg.out, cfg.format);
  position_table(debias.recent).write_file(sidecar_path(cfg.out, "recent", ext_of(cfg)), cfg.format);
  checks.table.write_file(sidecar_path(cfg.out, "summary", ext_of(cfg)), cfg.format);
  return checks.all_pass ? kExitPass : kExitChecksFailed;
}

int cmd_verify_entropy(const ExperimentConfig& cfg, std::ostream& log) {
  Table rows({"i", "lambda", "empirical_H", "target_H", "stderr", "pass", "mode", "rel_tol",
              "logit_variance"});
  CheckList checks;
  auto add_row = [&](const EntropyReport& r, ScaleMode mode, double tol) {
    rows.add_row({static_cast<std::int64_t>(r.i), r.lambda, r.report.estimate, r.report.target,
                  r.report.std_error,
                  r.report.judged() ? std::string(r.report.pass ? "pass" : "fail") : std::string("n/a"),
                  std::string(to_string(mode)), tol, r.logit_variance});
    auto named = r.report;
    named.name = "entropy_" + std::string(to_string(mode)) + "_i" + std::to_string(r.i) + "_lambda" +
                 format_double(r.lambda);
    checks.add(named, log);
  };

  auto sorted_i = cfg.i_values;
  std::sort(sorted_i.begin(), sorted_i.end());
  std::uint64_t stream = 0;
  for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
    double previous = -std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (std::size_t i : sorted_i) {
      const auto r = mc_entropy(i, cfg.d, cfg.lambdas[li], cfg.trials, derive_seed(cfg.seed, stream++),
                                ScaleMode::scaled_by_sqrt_d, cfg.entropy_rel_tol,
                                EntropyTarget::empirical_variance);
      add_row(r, ScaleMode::scaled_by_sqrt_d, cfg.entropy_rel_tol);
      monotone = monotone && r.report.estimate > previous;
      previous = r.report.estimate;
    }
    if (sorted_i.size() > 1)
      checks.add_bool("entropy_increasing_in_i_lambda" + format_double(cfg.lambdas[li]),
                      cfg.lambdas[li], monotone, log);
  }

  // Budget calibration: lambda from the schedule (floor 0) on unscaled
  // logits should pull the mean entropy down to ln k.
  const double lambda = lambda_for({cfg.calibration_k, cfg.d, 0.0}, cfg.calibration_i);
  add_row(mc_entropy(cfg.calibration_i, cfg.d, lambda, cfg.trials, derive_seed(cfg.seed, stream++),
                     ScaleMode::unscaled, cfg.calibration_rel_tol, EntropyTarget::nominal_variance),
          ScaleMode::unscaled, cfg.calibration_rel_tol);

  Table moments({"mu", "sigma2", "quantity", "estimate", "stderr", "target", "trials", "pass"});
  for (std::size_t k = 0; k < cfg.lognormal_params.size(); ++k) {
    const auto p = cfg.lognormal_params[k];
    auto [ex, xex] = mc_lognormal(p, cfg.lognormal_trials, derive_seed(cfg.seed, 0x4C4E0000ULL + k));
    for (auto* r : {&ex, &xex}) {
      moments.add_row({p.mu, p.sigma2, r->name, r->estimate, r->std_error, r->target,
                       static_cast<std::int64_t>(r->trials), r->pass});
      r->name = r->name + "_mu" + format_double(p.mu) + "_s2" + format_double(p.sigma2);
      checks.add(*r, log);
    }
  }

  rows.write_file(cfg.out, cfg.format);
  moments.write_file(sidecar_path(cfg.out, "lognormal", ext_of(cfg)), cfg.format);
  checks.table.write_file(sidecar_path(cfg.out, "summary", ext_of(cfg)), cfg.format);
  return checks.all_pass ? kExitPass : kExitChecksFailed;
}

namespace {

struct HeadSummary {
  double ratio = 0.0;
  double ks = 0.0;
  double selected_ratio = 0.0;
  double selected_ks = 0.0;
  std::size_t max_retained = 0;
  bool budget_ok = true;
  bool recency_ok = true;
};

HeadSummary summarize_trace(const GenerationTrace& trace, std::size_t prompt_len,
                            const PolicyConfig& pc) {
  HeadSummary s;
  for (const auto& rec : trace.records) {
    const std::size_t processed = prompt_len + rec.step;
    const std::size_t window = std::min(pc.recent_budget, processed);
    for (const auto& idx : rec.retained) {
      s.max_retained = std::max(s.max_retained, idx.size());
      if (pc.policy != PolicyKind::full && idx.size() > pc.total_budget) s.budget_ok = false;
      for (std::size_t t = processed - window; t < processed; ++t) {
        if (!std::binary_search(idx.begin(), idx.end(), t)) s.recency_ok = false;
      }
    }
  }
  const auto& last = trace.records.back();
  const std::size_t processed = prompt_len + last.step;
  const auto heads = static_cast<double>(last.retained.size());
  for (const auto& idx : last.retained) {
    const auto all = bias_metrics(idx, processed);
    s.ratio += all.mean_retained_index_ratio / heads;
    s.ks += all.ks_to_uniform / heads;
    RetainedSet selected;
    const std::size_t cut = processed - std::min(pc.recent_budget, processed);
    for (std::size_t j : idx) {
      if (j < cut) selected.push_back(j);
    }
    if (!selected.empty()) {
      const auto sel = bias_metrics(selected, 0, cut - 1);
      s.selected_ratio += sel.mean_retained_index_ratio / heads;
      s.selected_ks += sel.ks_to_uniform / heads;
    }
  }
  return s;
}

std::string join_tokens(const std::vector<TokenId>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(tokens[i]);
  }
  return out + "\n";
}

}  // namespace

int cmd_run_toy(const ExperimentConfig& cfg, std::ostream& log) {
  const ToyModel model = build_toy_model(
      {cfg.vocab, cfg.layers, cfg.heads, cfg.head_dim, cfg.mlp_mult, derive_seed(cfg.seed, 0)});
  Table metrics({"trial", "policy", "budget", "mean_index_ratio", "ks_to_uniform",
                 "selected_index_ratio", "selected_ks", "max_retained", "budget_ok", "recency_ok",
                 "tokens_match_full"});
  CheckList checks;

  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const auto prompt = random_prompt(cfg.prompt_len, cfg.vocab, derive_seed(cfg.seed, 1 + trial));
    std::optional<std::vector<TokenId>> full_tokens;
    for (std::size_t budget : cfg.budgets) {
      std::optional<double> aha_ratio, h2o_ratio;
      for (PolicyKind policy : cfg.policies) {
        const auto pc = cfg.policy_config(policy, budget, cfg.head_dim);
        auto result = run_policy_end_to_end(model, prompt, cfg.steps, pc);
        if (policy == PolicyKind::full && !full_tokens) full_tokens = result.tokens;
        const auto s = summarize_trace(result.trace, cfg.prompt_len, pc);

        const bool never_evicts =
            policy == PolicyKind::full || budget >= cfg.prompt_len + cfg.steps;
        Cell match = std::string("n/a");
        if (never_evicts && full_tokens) {
          const bool same = result.tokens == *full_tokens;
          match = same;
          checks.add_bool("full_equivalence_t" + std::to_string(trial) + "_" +
                              std::string(to_string(policy)) + "_B" + std::to_string(budget),
                          same ? 1.0 : 0.0, same, log);
        }
        metrics.add_row({static_cast<std::int64_t>(trial), std::string(to_string(policy)),
                         static_cast<std::int64_t>(budget), s.ratio, s.ks, s.selected_ratio,
                         s.selected_ks, static_cast<std::int64_t>(s.max_retained), s.budget_ok,
                         s.recency_ok, match});
        const std::string tag = "t" + std::to_string(trial) + "." + std::string(to_string(policy)) +
                                ".B" + std::to_string(budget);
        checks.add_bool("budget_" + tag, static_cast<double>(s.max_retained), s.budget_ok, log);
        checks.add_bool("recency_" + tag, s.recency_ok ? 1.0 : 0.0, s.recency_ok, log);
        write_text(sidecar_path(cfg.out, tag + ".tokens", ".txt"), join_tokens(result.tokens));
        write_text(sidecar_path(cfg.out, tag + ".trace", ".tsv"), result.trace.serialize());

        if (policy == PolicyKind::aha) aha_ratio = s.ratio;
        if (policy == PolicyKind::h2o) h2o_ratio = s.ratio;
      }
      if (aha_ratio && h2o_ratio && budget < cfg.prompt_len) {
        const std::string tag = "_t" + std::to_string(trial) + "_B" + std::to_string(budget);
        checks.add_bool("aha_ratio_in_band" + tag, *aha_ratio, *aha_ratio >= 0.40 && *aha_ratio <= 0.60,
                        log);
        checks.add_bool("h2o_below_aha" + tag, *aha_ratio - *h2o_ratio, *h2o_ratio < *aha_ratio, log);
      }
    }
  }

  metrics.write_file(cfg.out, cfg.format);
  checks.table.write_file(sidecar_path(cfg.out, "summary", ext_of(cfg)), cfg.format);
  return checks.all_pass ? kExitPass : kExitChecksFailed;
}

int cmd_sweep_sparsity(const ExperimentConfig& cfg, std::ostream& log) {
  const auto thresholds = threshold_grid(cfg.threshold_count, cfg.tau_max);
  const auto pc = cfg.policy_config(PolicyKind::aha, cfg.total_budget, cfg.d);
  std::vector<double> plain(thresholds.size(), 0.0), refined(thresholds.size(), 0.0);
  Table per_seed({"seed_index", "fraction_refined_at_or_below", "pass"});
  std::size_t good = 0;
  for (std::size_t s = 0; s < cfg.trials; ++s) {
    const auto curves =
        sparsity_instance(cfg.n, cfg.d, pc, cfg.sparsity_base, derive_seed(cfg.seed, s), thresholds);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      plain[t] += curves.plain[t];
      refined[t] += curves.refined[t];
    }
    const double frac = curves.fraction_refined_at_or_below();
    const bool ok = frac >= 0.9;
    good += ok ? 1 : 0;
    per_seed.add_row({static_cast<std::int64_t>(s), frac, ok});
  }
  Table rows({"threshold", "frac_plain", "frac_refined"});
  const auto seeds = static_cast<double>(cfg.trials);
  for (std::size_t t = 0; t < thresholds.size(); ++t)
    rows.add_row({thresholds[t], plain[t] / seeds, refined[t] / seeds});

  CheckList checks;
  const double seed_fraction = static_cast<double>(good) / static_cast<double>(cfg.trials);
  checks.add_bool("refined_at_or_below_plain_seed_fraction", seed_fraction, seed_fraction >= 0.9, log);

  rows.write_file(cfg.out, cfg.format);
  per_seed.write_file(sidecar_path(cfg.out, "seeds", ext_of(cfg)), cfg.format);
  checks.table.write_file(sidecar_path(cfg.out, "summary", ext_of(cfg)), cfg.format);
  return checks.all_pass ? kExitPass : kExitChecksFailed;
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate();
    write_text(sidecar_path(cfg.out, "config", ".json"), cfg.to_json());
    switch (cfg.kind) {
      case ExperimentKind::verify_bias: return cmd_verify_bias(cfg, log);
      case ExperimentKind::verify_entropy: return cmd_verify_entropy(cfg, log);
      case ExperimentKind::run_toy: return cmd_run_toy(cfg, log);
      case ExperimentKind::sweep_sparsity: return cmd_sweep_sparsity(cfg, log);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
  return kExitInvalidInput;
}

}  // namespace ahakv
