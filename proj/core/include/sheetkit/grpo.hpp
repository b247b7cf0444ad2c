#pragma once

#include <vector>

namespace sheetkit::grpo {

/// Group-relative advantages: (R_i - mean) / (std + sigma_floor), population
/// standard deviation. The floor keeps zero-variance groups (common with
/// binary rewards) at zero advantage instead of dividing by zero. With
/// divide_by_std false the result is mean-centering only.
/// Throws Error when the group has fewer than two rewards or a non-finite one.
std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double sigma_floor = 1e-6,
                                     bool divide_by_std = true);

/// Aligned per-token log-probabilities for one rollout under the policy being
/// optimized, the rollout-generating policy, and a frozen reference.
struct TokenLogProbs {
    std::vector<double> logp_new;
    std::vector<double> logp_old;
    std::vector<double> logp_ref;
};

struct ObjectiveParams {
    double epsilon = 0.2; ///< clip half-width; must be > 0
    double beta = 0.0;    ///< KL penalty coefficient; >= 0
};

/// Clipped-surrogate objective: per-token importance ratios
/// exp(logp_new - logp_old) with per-token clipping against the rollout's
/// advantage, token-averaged per rollout, group-averaged, minus
/// beta * mean per-rollout kl_lowvar(new, ref).
/// Throws Error on misaligned lengths or invalid params.
double grpo_objective(const std::vector<TokenLogProbs>& group,
                      const std::vector<double>& advantages,
                      const ObjectiveParams& params);

/// Low-variance KL estimate: mean over tokens of exp(d) - d - 1 with
/// d = logp_ref - logp_new. Non-negative, zero iff the vectors are equal.
double kl_lowvar(const std::vector<double>& logp_new, const std::vector<double>& logp_ref);

} // namespace sheetkit::grpo
