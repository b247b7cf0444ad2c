#include "sheetkit/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "sheetkit/error.hpp"

namespace sheetkit::grpo {

namespace {

void require_finite(const std::vector<double>& xs, const char* what) {
    for (double x : xs) {
        if (!std::isfinite(x)) throw Error(std::string(what) + " contains a non-finite value");
    }
}

} // namespace

std::vector<double> group_advantages(const std::vector<double>& rewards, double sigma_floor,
                                     bool divide_by_std) {
    if (rewards.size() < 2) throw Error("advantage group needs at least two rewards");
    if (!(sigma_floor >= 0.0)) throw Error("sigma floor must be non-negative");
    require_finite(rewards, "reward group");

    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;

    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n; // population variance
    const double denom = divide_by_std ? std::sqrt(var) + sigma_floor : 1.0;

    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) out.push_back((r - mean) / denom);
    return out;
}

double kl_lowvar(const std::vector<double>& logp_new, const std::vector<double>& logp_ref) {
    if (logp_new.size() != logp_ref.size())
        throw Error("kl estimate needs aligned log-prob vectors");
    if (logp_new.empty()) throw Error("kl estimate needs at least one token");
    require_finite(logp_new, "logp_new");
    require_finite(logp_ref, "logp_ref");

    double acc = 0.0;
    for (std::size_t i = 0; i < logp_new.size(); ++i) {
        const double d = logp_ref[i] - logp_new[i];
        acc += std::exp(d) - d - 1.0;
    }
    return acc / static_cast<double>(logp_new.size());
}

double grpo_objective(const std::vector<TokenLogProbs>& group,
                      const std::vector<double>& advantages, const ObjectiveParams& params) {
    if (group.empty()) throw Error("objective needs at least one rollout");
    if (group.size() != advantages.size())
        throw Error("one advantage per rollout required");
    if (!(params.epsilon > 0.0)) throw Error("clip width must be positive");
    if (!(params.beta >= 0.0)) throw Error("kl coefficient must be non-negative");
    require_finite(advantages, "advantages");

    const double lo = 1.0 - params.epsilon;
    const double hi = 1.0 + params.epsilon;

    double surrogate = 0.0;
    double kl = 0.0;
    for (std::size_t i = 0; i < group.size(); ++i) {
        const TokenLogProbs& t = group[i];
        if (t.logp_new.size() != t.logp_old.size())
            throw Error("rollout log-prob vectors are misaligned");
        if (t.logp_new.empty()) throw Error("rollout has no tokens");
        require_finite(t.logp_new, "logp_new");
        require_finite(t.logp_old, "logp_old");

        const double adv = advantages[i];
        double rollout = 0.0;
        for (std::size_t k = 0; k < t.logp_new.size(); ++k) {
            const double ratio = std::exp(t.logp_new[k] - t.logp_old[k]);
            const double clipped = std::clamp(ratio, lo, hi);
            rollout += std::min(ratio * adv, clipped * adv);
        }
        surrogate += rollout / static_cast<double>(t.logp_new.size());

        if (params.beta > 0.0) kl += kl_lowvar(t.logp_new, t.logp_ref);
    }

    const double n = static_cast<double>(group.size());
    return surrogate / n - params.beta * (kl / n);
}

} // namespace sheetkit::grpo
