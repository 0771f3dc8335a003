#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "survfuse/stats.hpp"

using namespace survfuse;
using Catch::Matchers::WithinAbs;

namespace {

// Independent oracle: integrate the t density by adaptive Simpson.
double t_density(double x, double df) {
    return std::exp(std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0)) /
           std::sqrt(df * std::numbers::pi) *
           std::pow(1.0 + x * x / df, -(df + 1.0) / 2.0);
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa,
               double fb, double fm, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, fm, flm, eps / 2.0, depth - 1) +
           simpson(f, m, b, fm, fb, frm, eps / 2.0, depth - 1);
}

// Upper-tail probability P(T > t) for Student's t with the given df.
double t_tail_oracle(double t, double df) {
    auto f = [df](double x) { return t_density(x, df); };
    const double hi = std::max(t + 200.0, 400.0);
    const double m = 0.5 * (t + hi);
    return simpson(f, t, hi, f(t), f(hi), f(m), 1e-16, 48);
}

} // namespace

TEST_CASE("welch t-test from summary statistics") {
    SECTION("identical statistics give p = 1") {
        const SummaryStat s{0.7, 0.05, 10};
        REQUIRE_THAT(t_test_summary(s, s), WithinAbs(1.0, 1e-12));
    }
    SECTION("well-separated means are overwhelmingly significant") {
        const double p = t_test_summary({1.0, 0.1, 10}, {0.0, 0.1, 10});
        REQUIRE(p < 1e-6);
    }
    SECTION("one-sided is half of two-sided in the observed direction") {
        const SummaryStat a{0.5, 0.2, 8}, b{0.4, 0.25, 8};
        const double two = t_test_summary(a, b, Tail::two_sided);
        const double greater = t_test_summary(a, b, Tail::greater);
        REQUIRE_THAT(greater, WithinAbs(two / 2.0, 1e-12));
        const double less = t_test_summary(a, b, Tail::less);
        REQUIRE_THAT(less + greater, WithinAbs(1.0, 1e-12));
    }
    SECTION("matches the quadrature oracle") {
        const SummaryStat a{0.62, 0.08, 5}, b{0.55, 0.1, 5};
        const double va = a.sd * a.sd / a.n, vb = b.sd * b.sd / b.n;
        const double t = (a.mean - b.mean) / std::sqrt(va + vb);
        const double df =
            (va + vb) * (va + vb) / (va * va / (a.n - 1) + vb * vb / (b.n - 1));
        const double oracle_two = 2.0 * t_tail_oracle(std::abs(t), df);
        REQUIRE_THAT(t_test_summary(a, b), WithinAbs(oracle_two, 1e-10));
        REQUIRE_THAT(t_test_summary(a, b, Tail::greater),
                     WithinAbs(t_tail_oracle(t, df), 1e-10));
    }
    SECTION("degenerate zero-variance cases") {
        REQUIRE(t_test_summary({0.5, 0.0, 4}, {0.5, 0.0, 4}) == 1.0);
        REQUIRE(t_test_summary({0.6, 0.0, 4}, {0.5, 0.0, 4}, Tail::greater) == 0.0);
        REQUIRE(t_test_summary({0.4, 0.0, 4}, {0.5, 0.0, 4}, Tail::greater) == 1.0);
    }
    SECTION("summary validation") {
        REQUIRE_THROWS_AS(t_test_summary({0.5, 0.1, 1}, {0.5, 0.1, 5}), ContractError);
        REQUIRE_THROWS_AS(t_test_summary({0.5, -0.1, 5}, {0.5, 0.1, 5}), ContractError);
    }
}

TEST_CASE("holm-bonferroni step-down") {
    SECTION("hand example") {
        const auto adj = holm_bonferroni({0.01, 0.04, 0.03});
        REQUIRE_THAT(adj[0], WithinAbs(0.03, 1e-15));
        REQUIRE_THAT(adj[1], WithinAbs(0.06, 1e-15));
        REQUIRE_THAT(adj[2], WithinAbs(0.06, 1e-15));
    }
    SECTION("single p-value unchanged") {
        REQUIRE(holm_bonferroni({0.2})[0] == 0.2);
        REQUIRE(holm_bonferroni({1.0})[0] == 1.0);
    }
    SECTION("all ones stay ones") {
        const auto adj = holm_bonferroni({1.0, 1.0, 1.0, 1.0});
        for (double p : adj) REQUIRE(p == 1.0);
    }
    SECTION("monotone in the sorted order and capped at 1") {
        const auto adj = holm_bonferroni({0.5, 0.4, 0.9, 0.001});
        for (double p : adj) {
            REQUIRE(p >= 0.0);
            REQUIRE(p <= 1.0);
        }
        // adjusted values never drop below the raw ones
        const std::vector<double> raw{0.5, 0.4, 0.9, 0.001};
        for (std::size_t i = 0; i < raw.size(); ++i) REQUIRE(adj[i] >= raw[i]);
    }
    SECTION("out-of-range p rejected") {
        REQUIRE_THROWS_AS(holm_bonferroni({1.5}), DomainError);
        REQUIRE_THROWS_AS(holm_bonferroni({-0.1}), DomainError);
    }
}

TEST_CASE("top-3 seed aggregation") {
    SECTION("picks the three best by CI-IBS") {
        std::vector<SeedMetrics> seeds;
        for (int i = 1; i <= 5; ++i)
            seeds.push_back({static_cast<std::uint64_t>(i),
                             {0.1 * i + 0.2},
                             {0.2}}); // CI-IBS = 0.1*i
        const auto agg = aggregate_seeds(seeds);
        REQUIRE(agg.selected_seeds == std::vector<std::uint64_t>{5, 4, 3});
        REQUIRE_THAT(agg.c_index[0].mean, WithinAbs(0.6, 1e-12));
        REQUIRE_THAT(agg.ci_minus_ibs, WithinAbs(0.4, 1e-12));
    }
    SECTION("identical seeds give zero spread") {
        std::vector<SeedMetrics> seeds(4, SeedMetrics{0, {0.7}, {0.2}});
        const auto agg = aggregate_seeds(seeds);
        REQUIRE(agg.c_index[0].sd == 0.0);
        REQUIRE(agg.ibs[0].sd == 0.0);
    }
    SECTION("exactly three seeds aggregates all") {
        std::vector<SeedMetrics> seeds{{1, {0.6}, {0.2}}, {2, {0.7}, {0.2}},
                                       {3, {0.8}, {0.2}}};
        const auto agg = aggregate_seeds(seeds);
        REQUIRE_THAT(agg.c_index[0].mean, WithinAbs(0.7, 1e-12));
        REQUIRE(agg.c_index[0].n == 3);
    }
    SECTION("fewer than three seeds rejected") {
        std::vector<SeedMetrics> seeds{{1, {0.6}, {0.2}}, {2, {0.7}, {0.2}}};
        REQUIRE_THROWS_AS(aggregate_seeds(seeds), ContractError);
    }
}

TEST_CASE("two-stage configuration selection") {
    SECTION("single configuration wins trivially") {
        std::vector<ConfigResult> res{
            {"only", {{0.7, 0.02, 3}}, {{0.2, 0.01, 3}}, 0.5}};
        const auto sel = select_configuration(res);
        REQUIRE(sel.winner == "only");
        REQUIRE(sel.audit.size() == 1);
        REQUIRE(sel.audit[0].survived);
        REQUIRE(sel.audit[0].p_ci_hb == 1.0);
    }
    SECTION("appendix-style table: max CI-IBS survivor selected") {
        // mimics the published DNAm sweep: one clear best, close runners-up
        // that survive, and a clearly worse config that is discarded
        std::vector<ConfigResult> res{
            {"latent5_hidden10", {{0.58, 0.02, 3}}, {{0.21, 0.01, 3}}, 0.37},
            {"latent10_hidden50", {{0.72, 0.02, 3}}, {{0.187, 0.01, 3}}, 0.533},
            {"latent10_hidden5", {{0.715, 0.02, 3}}, {{0.19, 0.01, 3}}, 0.525},
            {"latent50_hidden500", {{0.45, 0.02, 3}}, {{0.30, 0.01, 3}}, 0.15},
        };
        const auto sel = select_configuration(res, 0.01);
        REQUIRE(sel.winner == "latent10_hidden50");
        bool best_survived = false, close_survived = false, worse_discarded = false;
        for (const auto& row : sel.audit) {
            if (row.config == "latent10_hidden50") best_survived = row.survived;
            if (row.config == "latent10_hidden5") close_survived = row.survived;
            if (row.config == "latent50_hidden500") worse_discarded = !row.survived;
        }
        REQUIRE(best_survived);
        REQUIRE(close_survived);
        REQUIRE(worse_discarded);
    }
    SECTION("best-observed config always survives stage one") {
        std::vector<ConfigResult> res{
            {"a", {{0.9, 0.001, 3}}, {{0.1, 0.001, 3}}, 0.8},
            {"b", {{0.2, 0.001, 3}}, {{0.5, 0.001, 3}}, -0.3},
        };
        const auto sel = select_configuration(res, 0.5);
        for (const auto& row : sel.audit)
            if (row.config == "a") {
                REQUIRE(row.survived);
                REQUIRE(row.p_ci_hb == 1.0);
                REQUIRE(row.p_ibs_hb == 1.0);
            }
        REQUIRE(sel.winner == "a");
    }
    SECTION("identical configs tie, broken by declaration order") {
        std::vector<ConfigResult> res{
            {"cfg_a", {{0.7, 0.02, 3}}, {{0.2, 0.01, 3}}, 0.5},
            {"cfg_b", {{0.7, 0.02, 3}}, {{0.2, 0.01, 3}}, 0.5},
        };
        const auto sel = select_configuration(res);
        REQUIRE(sel.audit[0].survived);
        REQUIRE(sel.audit[1].survived);
        REQUIRE(sel.winner == "cfg_a");
    }
    SECTION("empty input rejected") {
        REQUIRE_THROWS_AS(select_configuration({}), ContractError);
    }
    SECTION("audit CSV header layout") {
        std::vector<ConfigResult> res{
            {"only", {{0.7, 0.02, 3}}, {{0.2, 0.01, 3}}, 0.5}};
        const auto sel = select_configuration(res);
        const std::string csv = audit_to_csv(sel.audit);
        REQUIRE(csv.rfind("config,c_index,ibs,ci_minus_ibs,p_ci_hb,p_ibs_hb,survived\n",
                          0) == 0);
    }
}
