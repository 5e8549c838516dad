#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ahakv/attention_sim.hpp"
#include "ahakv/cache_manager.hpp"
#include "ahakv/experiment.hpp"
#include "ahakv/numerics.hpp"
#include "ahakv/policies.hpp"
#include "ahakv/stats_verify.hpp"
#include "ahakv/toy_model.hpp"

namespace py = pybind11;
using namespace ahakv;

namespace {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Matrix& m) {
  Rows out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

Rows to_rows(const LowerTriangular& t) {
  Rows out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i].assign(t.row(i).begin(), t.row(i).end());
  return out;
}

CausalLogits logits_of(const Rows& q, const Rows& k, const std::string& mode) {
  return causal_logits(Matrix::from_rows(q), Matrix::from_rows(k), scale_mode_from_string(mode));
}

LambdaSchedule schedule_of(std::size_t budget, std::size_t head_dim, std::optional<double> floor) {
  auto s = LambdaSchedule::with_default_floor(budget, head_dim);
  if (floor) s.floor = *floor;
  return s;
}

py::dict report_dict(const McReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["estimate"] = r.estimate;
  d["std_error"] = r.std_error;
  d["trials"] = r.trials;
  d["target"] = r.target;
  d["rule"] = r.rule.describe();
  d["judged"] = r.judged();
  d["pass"] = r.pass;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core numerics, eviction policies and Monte Carlo checks";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("softmax", [](const std::vector<double>& x) { return softmax(x); }, py::arg("logits"));
  m.def("sg_softmax", [](const std::vector<double>& x, double lambda) { return sg_softmax(x, lambda); },
        py::arg("logits"), py::arg("lam"));
  m.def("row_entropy", [](const std::vector<double>& p) { return row_entropy(p); }, py::arg("probs"));
  m.def("sg_entropy", [](const std::vector<double>& x, double lambda) { return sg_entropy(x, lambda); },
        py::arg("logits"), py::arg("lam"));
  m.def("lambda_for",
        [](std::size_t budget, std::size_t head_dim, std::size_t i, std::optional<double> floor) {
          return lambda_for(schedule_of(budget, head_dim, floor), i);
        },
        py::arg("budget"), py::arg("head_dim"), py::arg("i"), py::arg("floor") = py::none());
  m.def("expected_entropy", &expected_entropy, py::arg("i"), py::arg("sigma2_logit"));
  m.def("lognormal_mean", [](double mu, double s2) { return lognormal_mean({mu, s2}); },
        py::arg("mu"), py::arg("sigma2"));
  m.def("lognormal_xexp_mean", [](double mu, double s2) { return lognormal_xexp_mean({mu, s2}); },
        py::arg("mu"), py::arg("sigma2"));
  m.def("avgpool_1d", [](const std::vector<double>& v, std::size_t k) { return avgpool_1d(v, k); },
        py::arg("values"), py::arg("kernel"));

  m.def("gaussian_qkv",
        [](std::size_t n, std::size_t d, std::uint64_t seed, const std::string& mode) {
          const auto qkv = gaussian_qkv({n, d, seed, scale_mode_from_string(mode)});
          py::dict out;
          out["q"] = to_rows(qkv.q);
          out["k"] = to_rows(qkv.k);
          out["v"] = to_rows(qkv.v);
          return out;
        },
        py::arg("n"), py::arg("d"), py::arg("seed"), py::arg("scale_mode") = "scaled");
  m.def("causal_logits",
        [](const Rows& q, const Rows& k, const std::string& mode) { return to_rows(logits_of(q, k, mode).w); },
        py::arg("q"), py::arg("k"), py::arg("scale_mode") = "scaled");
  m.def("attention_matrix",
        [](const Rows& q, const Rows& k, const std::string& mode) {
          return to_rows(attention_matrix(logits_of(q, k, mode)));
        },
        py::arg("q"), py::arg("k"), py::arg("scale_mode") = "scaled");

  m.def("h2o_scores", [](const Rows& attn) { return h2o_scores(LowerTriangular::from_rows(attn)); },
        py::arg("attn"));
  m.def("recent_accum_scores",
        [](const Rows& attn, std::size_t r) { return recent_accum_scores(LowerTriangular::from_rows(attn), r); },
        py::arg("attn"), py::arg("r"));
  m.def("sg_recent_scores",
        [](const Rows& q, const Rows& k, std::size_t r, std::size_t budget, std::optional<double> floor,
           const std::string& mode) {
          const auto logits = logits_of(q, k, mode);
          return sg_recent_scores(logits, r, schedule_of(budget, q.empty() ? 1 : q[0].size(), floor));
        },
        py::arg("q"), py::arg("k"), py::arg("r"), py::arg("budget"), py::arg("floor") = py::none(),
        py::arg("scale_mode") = "scaled");
  m.def("value_prior",
        [](const Rows& v, std::size_t kernel) { return value_prior(Matrix::from_rows(v), kernel).gamma_bar; },
        py::arg("values"), py::arg("kernel") = 7);
  m.def("refine_scores",
        [](const std::vector<double>& scores, const std::vector<double>& gamma_bar) {
          return refine_scores(scores, ValuePrior{gamma_bar, 1});
        },
        py::arg("scores"), py::arg("gamma_bar"));
  m.def("select_retained",
        [](const std::vector<double>& scores, std::size_t recent, std::size_t selected) {
          return select_retained(scores, scores.size(), recent, selected);
        },
        py::arg("scores"), py::arg("recent"), py::arg("selected"));

  py::class_<PolicyConfig>(m, "PolicyConfig")
      .def(py::init([](const std::string& policy, std::size_t total, std::size_t recent,
                       std::size_t head_dim, std::size_t pool_kernel, std::optional<double> floor) {
             auto cfg = PolicyConfig::make(policy_from_string(policy), total, recent, head_dim);
             cfg.pool_kernel = pool_kernel;
             if (floor) cfg.lambda_schedule.floor = *floor;
             cfg.validate();
             return cfg;
           }),
           py::arg("policy"), py::arg("total_budget"), py::arg("recent_budget"), py::arg("head_dim"),
           py::arg("pool_kernel") = 7, py::arg("lambda_floor") = py::none())
      .def_property_readonly("policy", [](const PolicyConfig& c) { return std::string(to_string(c.policy)); })
      .def_readonly("total_budget", &PolicyConfig::total_budget)
      .def_readonly("recent_budget", &PolicyConfig::recent_budget)
      .def_readonly("selected_budget", &PolicyConfig::selected_budget)
      .def_readonly("pool_kernel", &PolicyConfig::pool_kernel);

  py::class_<HeadCacheState>(m, "CacheState")
      .def_readonly("indices", &HeadCacheState::indices)
      .def_readonly("scores", &HeadCacheState::scores)
      .def_readonly("step", &HeadCacheState::step)
      .def_readonly("processed", &HeadCacheState::processed)
      .def("__len__", &HeadCacheState::size)
      .def("check_invariants", &HeadCacheState::check_invariants, py::arg("cfg"));

  m.def("prefill_head",
        [](const Rows& q, const Rows& k, const Rows& v, const PolicyConfig& cfg) {
          return prefill_head({Matrix::from_rows(q), Matrix::from_rows(k), Matrix::from_rows(v)}, cfg);
        },
        py::arg("q"), py::arg("k"), py::arg("v"), py::arg("cfg"));
  m.def("generation_step",
        [](HeadCacheState& state, const std::vector<double>& q, const std::vector<double>& k,
           const std::vector<double>& v, const PolicyConfig& cfg) {
          auto out = generation_step(state, q, k, v, cfg);
          return py::make_tuple(out.output, out.evicted);
        },
        py::arg("state"), py::arg("q"), py::arg("k"), py::arg("v"), py::arg("cfg"));

  py::class_<ToyModel>(m, "ToyModel")
      .def(py::init([](std::size_t vocab, std::size_t layers, std::size_t heads, std::size_t head_dim,
                       std::size_t mlp_mult, std::uint64_t seed) {
             return build_toy_model({vocab, layers, heads, head_dim, mlp_mult, seed});
           }),
           py::arg("vocab") = 64, py::arg("layers") = 2, py::arg("heads") = 2, py::arg("head_dim") = 8,
           py::arg("mlp_mult") = 4, py::arg("seed") = 0)
      .def("forward", [](const ToyModel& mdl, const std::vector<TokenId>& t) { return mdl.forward(t); },
           py::arg("tokens"))
      .def("greedy_decode",
           [](const ToyModel& mdl, const std::vector<TokenId>& prompt, std::size_t steps) {
             FullKvCache cache(mdl.config().layers, mdl.config().heads);
             return greedy_decode(mdl, prompt, steps, cache);
           },
           py::arg("prompt"), py::arg("steps"))
      .def("reference_decode",
           [](const ToyModel& mdl, const std::vector<TokenId>& prompt, std::size_t steps) {
             return reference_decode(mdl, prompt, steps);
           },
           py::arg("prompt"), py::arg("steps"));

  m.def("random_prompt", &random_prompt, py::arg("length"), py::arg("vocab"), py::arg("seed"));
  m.def("run_policy_end_to_end",
        [](const ToyModel& mdl, const std::vector<TokenId>& prompt, std::size_t steps, const PolicyConfig& cfg) {
          auto r = run_policy_end_to_end(mdl, prompt, steps, cfg);
          return py::make_tuple(r.tokens, r.trace.serialize());
        },
        py::arg("model"), py::arg("prompt"), py::arg("steps"), py::arg("cfg"),
        "Greedy decode under a policy; returns (tokens, trace text).");

  py::class_<McReport>(m, "McReport")
      .def_readonly("name", &McReport::name)
      .def_readonly("estimate", &McReport::estimate)
      .def_readonly("std_error", &McReport::std_error)
      .def_readonly("trials", &McReport::trials)
      .def_readonly("target", &McReport::target)
      .def_readonly("passed", &McReport::pass)
      .def_property_readonly("judged", &McReport::judged)
      .def("as_dict", &report_dict)
      .def("__repr__", [](const McReport& r) {
        std::ostringstream os;
        os << "McReport(" << r.name << ", estimate=" << r.estimate << ", se=" << r.std_error
           << ", target=" << r.target << ", pass=" << (r.pass ? "True" : "False") << ")";
        return os.str();
      });

  m.def("mc_score_gap",
        [](std::size_t n, std::size_t d, std::size_t trials, std::uint64_t seed) {
          const auto r = mc_score_gap(n, d, trials, seed);
          py::dict out;
          out["gap_mid"] = r.gap_mid;
          out["neg_diag_mid"] = r.neg_diag_mid;
          out["agreement_mid"] = r.agreement_mid;
          out["gap_full"] = r.gap_full;
          out["neg_diag_full"] = r.neg_diag_full;
          out["agreement_full"] = r.agreement_full;
          return out;
        },
        py::arg("n"), py::arg("d"), py::arg("trials"), py::arg("seed"));
  m.def("mc_position_bias",
        [](std::size_t n, std::size_t d, std::size_t r, std::size_t trials, std::uint64_t seed) {
          const auto rep = mc_position_bias(n, d, r, trials, seed);
          py::dict out;
          out["h2o_mean"] = rep.h2o.mean;
          out["recent_mean"] = rep.recent.mean;
          out["h2o_slope"] = rep.h2o.slope;
          out["recent_slope"] = rep.recent.slope;
          return out;
        },
        py::arg("n"), py::arg("d"), py::arg("r"), py::arg("trials"), py::arg("seed"));
  m.def("mc_entropy",
        [](std::size_t i, std::size_t d, double lambda, std::size_t trials, std::uint64_t seed,
           const std::string& mode, double rel_tol) {
          return mc_entropy(i, d, lambda, trials, seed, scale_mode_from_string(mode), rel_tol).report;
        },
        py::arg("i"), py::arg("d"), py::arg("lam"), py::arg("trials"), py::arg("seed"),
        py::arg("scale_mode") = "scaled", py::arg("rel_tol") = 0.05);
  m.def("mc_lognormal",
        [](double mu, double sigma2, std::size_t trials, std::uint64_t seed) {
          return mc_lognormal({mu, sigma2}, trials, seed);
        },
        py::arg("mu"), py::arg("sigma2"), py::arg("trials"), py::arg("seed"));
  m.def("bias_metrics",
        [](const std::vector<std::size_t>& retained, std::size_t n) {
          const auto b = bias_metrics(retained, n);
          return py::make_tuple(b.mean_retained_index_ratio, b.ks_to_uniform);
        },
        py::arg("retained"), py::arg("n"), "Returns (mean retained-index ratio, KS to uniform).");

  m.def("run_experiment",
        [](const std::string& kind, const std::string& config_json, const std::string& out) {
          auto cfg = ExperimentConfig::defaults(experiment_from_string(kind));
          cfg.apply_json(config_json);
          if (!out.empty()) cfg.out = out;
          std::ostringstream log, err;
          const int code = run_experiment(cfg, log, err);
          return py::make_tuple(code, log.str(), err.str());
        },
        py::arg("kind"), py::arg("config_json") = "{}", py::arg("out") = "",
        "Runs a CLI experiment in process; returns (exit code, log, errors).");
}
