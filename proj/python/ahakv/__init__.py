"""Python bindings for the AhaKV cache-eviction core."""

from ._core import (
    CacheState,
    McReport,
    PolicyConfig,
    ToyModel,
    attention_matrix,
    avgpool_1d,
    bias_metrics,
    causal_logits,
    expected_entropy,
    gaussian_qkv,
    generation_step,
    h2o_scores,
    lambda_for,
    lognormal_mean,
    lognormal_xexp_mean,
    mc_entropy,
    mc_lognormal,
    mc_position_bias,
    mc_score_gap,
    prefill_head,
    random_prompt,
    recent_accum_scores,
    refine_scores,
    row_entropy,
    run_experiment,
    run_policy_end_to_end,
    select_retained,
    sg_entropy,
    sg_recent_scores,
    sg_softmax,
    softmax,
    value_prior,
)

__all__ = [name for name in dir() if not name.startswith("_")]
