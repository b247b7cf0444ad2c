#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <sheetkit/error.hpp>
#include <sheetkit/grpo.hpp>

using namespace sheetkit;
using namespace sheetkit::grpo;

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Independent oracle: direct two-pass mean / population-std normalization.
std::vector<double> naive_advantages(const std::vector<double>& r, double floor_sigma) {
    const double m = mean_of(r);
    double var = 0.0;
    for (double x : r) var += (x - m) * (x - m);
    var /= static_cast<double>(r.size());
    std::vector<double> out;
    for (double x : r) out.push_back((x - m) / (std::sqrt(var) + floor_sigma));
    return out;
}

TokenLogProbs rollout_of(std::vector<double> lp_new, std::vector<double> lp_old,
                         std::vector<double> lp_ref) {
    return TokenLogProbs{std::move(lp_new), std::move(lp_old), std::move(lp_ref)};
}

} // namespace

TEST_CASE("advantages match the hand-computed binary example") {
    // mean .5, population std .5 -> (1-.5)/.5 = 1, (0-.5)/.5 = -1.
    const auto a = group_advantages({1, 0, 0, 1}, 0.0);
    REQUIRE(a.size() == 4);
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(a[1] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(a[2] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(a[3] == doctest::Approx(1.0).epsilon(1e-9));

    // With the default floor the result only moves by O(floor).
    const auto soft = group_advantages({1, 0, 0, 1});
    CHECK(std::fabs(soft[0] - 1.0) < 1e-5);

    const auto pair = group_advantages({1, 0}, 0.0);
    CHECK(pair[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pair[1] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("zero-variance groups yield exactly zero advantages") {
    for (const double v : {0.0, 1.0, -3.25}) {
        const auto a = group_advantages({v, v, v, v});
        for (double x : a) CHECK(x == 0.0);
    }
}

TEST_CASE("mean-only mode just centers") {
    const auto a = group_advantages({1, 0, 0, 1}, 1e-6, /*divide_by_std=*/false);
    CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("advantage input validation") {
    CHECK_THROWS_AS(group_advantages({}), Error);
    CHECK_THROWS_AS(group_advantages({1.0}), Error);
    CHECK_THROWS_AS(group_advantages({1.0, std::nan("")}), Error);
    CHECK_THROWS_AS(group_advantages({1.0, std::numeric_limits<double>::infinity()}), Error);
}

TEST_CASE("advantage properties over 10,000 random groups") {
    std::mt19937 rng(20240817);
    std::uniform_int_distribution<int> size_dist(2, 17);
    std::uniform_real_distribution<double> reward_dist(-5.0, 5.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> shift_dist(-100.0, 100.0);
    std::uniform_real_distribution<double> scale_dist(0.1, 50.0);

    for (int trial = 0; trial < 10000; ++trial) {
        const int n = size_dist(rng);
        std::vector<double> rewards(n);
        const bool binary = unit(rng) < 0.3; // binary rewards are the common case in practice
        for (auto& r : rewards) r = binary ? (unit(rng) < 0.5 ? 1.0 : 0.0) : reward_dist(rng);

        const auto adv = group_advantages(rewards);
        REQUIRE(adv.size() == rewards.size());

        // Zero-sum.
        double sum = 0.0;
        for (double a : adv) sum += a;
        CHECK(std::fabs(sum) < 1e-12);

        // Matches the independent normalization oracle.
        const auto want = naive_advantages(rewards, 1e-6);
        for (int i = 0; i < n; ++i) CHECK(adv[i] == doctest::Approx(want[i]).epsilon(1e-12));

        // Shift invariance.
        const double c = shift_dist(rng);
        std::vector<double> shifted = rewards;
        for (auto& r : shifted) r += c;
        const auto adv_shift = group_advantages(shifted);
        for (int i = 0; i < n; ++i) CHECK(std::fabs(adv_shift[i] - adv[i]) < 1e-9);

        // Scale invariance at zero floor (needs genuine variance).
        const double m = mean_of(rewards);
        double var = 0.0;
        for (double r : rewards) var += (r - m) * (r - m);
        if (var / n > 1e-8) {
            const double k = scale_dist(rng);
            std::vector<double> scaled = rewards;
            for (auto& r : scaled) r *= k;
            const auto a0 = group_advantages(rewards, 0.0);
            const auto a1 = group_advantages(scaled, 0.0);
            for (int i = 0; i < n; ++i) CHECK(a1[i] == doctest::Approx(a0[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("objective with unit ratios is the mean advantage") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> lp(-3.0, 0.0);
    std::vector<TokenLogProbs> group;
    std::vector<double> adv = {1.25, -0.5, 0.0, -0.75};
    for (size_t i = 0; i < adv.size(); ++i) {
        std::vector<double> probs(5 + i);
        for (auto& p : probs) p = lp(rng);
        group.push_back(rollout_of(probs, probs, probs)); // new == old -> every ratio 1
    }
    const double got = grpo_objective(group, adv, {});
    CHECK(got == doctest::Approx(mean_of(adv)).epsilon(1e-12));

    // Normalized advantages make it zero.
    const auto norm = group_advantages({1, 0, 0, 1});
    const double zero = grpo_objective(group, norm, {});
    CHECK(std::fabs(zero) < 1e-12);
}

TEST_CASE("objective clips the ratio against the advantage") {
    // One rollout, one token, ratio 1.5, advantage 1, epsilon .2:
    // min(1.5 * 1, clamp(1.5, .8, 1.2) * 1) = 1.2.
    const auto up = rollout_of({std::log(1.5)}, {0.0}, {0.0});
    CHECK(grpo_objective({up}, {1.0}, {0.2, 0.0}) ==
          doctest::Approx(std::clamp(1.5, 0.8, 1.2) * 1.0).epsilon(1e-9));

    // Negative advantage clips from the other side:
    // min(0.5 * -1, clamp(0.5, .8, 1.2) * -1) = -0.8.
    const auto down = rollout_of({std::log(0.5)}, {0.0}, {0.0});
    CHECK(grpo_objective({down}, {-1.0}, {0.2, 0.0}) ==
          doctest::Approx(std::clamp(0.5, 0.8, 1.2) * -1.0).epsilon(1e-9));

    // Inside the band nothing clips.
    const auto mild = rollout_of({std::log(1.1)}, {0.0}, {0.0});
    CHECK(grpo_objective({mild}, {1.0}, {0.2, 0.0}) == doctest::Approx(1.1).epsilon(1e-9));
}

TEST_CASE("KL penalty subtracts and vanishes when new equals ref") {
    const std::vector<double> probs = {-1.0, -2.0, -0.5};
    const auto same_ref = rollout_of(probs, probs, probs);
    const double base = grpo_objective({same_ref}, {1.0}, {0.2, 0.0});
    CHECK(grpo_objective({same_ref}, {1.0}, {0.2, 0.5}) == doctest::Approx(base).epsilon(1e-12));

    // Single token with log-gap ln 2 toward the reference: penalty is
    // beta * (2 - ln 2 - 1).
    const auto gap = rollout_of({0.0}, {0.0}, {std::log(2.0)});
    const double with_kl = grpo_objective({gap}, {1.0}, {0.2, 0.25});
    CHECK(with_kl == doctest::Approx(1.0 - 0.25 * (2.0 - std::log(2.0) - 1.0)).epsilon(1e-9));
}

TEST_CASE("raising a positive-advantage token inside the band never hurts") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> lp(-2.0, 0.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<TokenLogProbs> group;
        std::vector<double> adv;
        for (int i = 0; i < 4; ++i) {
            std::vector<double> probs(6);
            for (auto& p : probs) p = lp(rng);
            group.push_back(rollout_of(probs, probs, probs));
            adv.push_back(i % 2 == 0 ? 1.0 : -1.0);
        }
        const double before = grpo_objective(group, adv, {0.2, 0.0});
        group[0].logp_new[2] += 0.05; // stays within ln(1.2) of old
        const double after = grpo_objective(group, adv, {0.2, 0.0});
        CHECK(after >= before - 1e-12);
    }
}

TEST_CASE("objective input validation") {
    const auto r = rollout_of({0.0}, {0.0}, {0.0});
    CHECK_THROWS_AS(grpo_objective({r}, {1.0, 2.0}, {}), Error);       // group/advantage mismatch
    CHECK_THROWS_AS(grpo_objective({r}, {1.0}, {0.0, 0.0}), Error);    // epsilon must be positive
    CHECK_THROWS_AS(grpo_objective({r}, {1.0}, {-0.1, 0.0}), Error);   // negative epsilon
    const auto bad = rollout_of({0.0, 0.0}, {0.0}, {0.0});
    CHECK_THROWS_AS(grpo_objective({bad}, {1.0}, {}), Error);          // ragged token vectors
    const auto empty = rollout_of({}, {}, {});
    CHECK_THROWS_AS(grpo_objective({empty}, {1.0}, {}), Error);        // no tokens
}

TEST_CASE("low-variance KL estimator") {
    CHECK(kl_lowvar({-1.0, -2.0}, {-1.0, -2.0}) == 0.0);

    // Per-token gap ln 2 -> 2 - ln 2 - 1 each.
    const double want = 2.0 - std::log(2.0) - 1.0;
    CHECK(kl_lowvar({0.0}, {std::log(2.0)}) == doctest::Approx(want).epsilon(1e-9));
    CHECK(kl_lowvar({0.0, 0.0}, {std::log(2.0), 0.0}) == doctest::Approx(want / 2).epsilon(1e-9));

    CHECK_THROWS_AS(kl_lowvar({0.0}, {0.0, 0.0}), Error);
    CHECK_THROWS_AS(kl_lowvar({}, {}), Error);
}

TEST_CASE("KL estimator is nonnegative over random vectors") {
    std::mt19937 rng(4242);
    std::uniform_real_distribution<double> lp(-4.0, 0.0);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> a(8), b(8);
        for (auto& x : a) x = lp(rng);
        for (auto& x : b) x = lp(rng);
        const double kl = kl_lowvar(a, b);
        CHECK(kl >= 0.0);
        // Strict positivity when the vectors genuinely differ.
        double max_gap = 0.0;
        for (size_t i = 0; i < a.size(); ++i) max_gap = std::max(max_gap, std::fabs(a[i] - b[i]));
        if (max_gap > 1e-3) CHECK(kl > 0.0);
    }
}
