#ifndef SURVFUSE_STATS_HPP
#define SURVFUSE_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "survfuse/errors.hpp"

namespace survfuse {

struct SummaryStat {
    double mean = 0.0;
    double sd = 0.0;
    int n = 0;

    void validate() const {
        if (n < 2)
            throw ContractError("SummaryStat: sample size must be >= 2");
        if (sd < 0.0)
            throw ContractError("SummaryStat: standard deviation must be >= 0");
    }
};

enum class Tail {
    two_sided,
    less,    // alternative: mean_a < mean_b
    greater, // alternative: mean_a > mean_b
};

// Welch two-sample t-test from summary statistics, with
// Welch-Satterthwaite degrees of freedom.
inline double t_test_summary(const SummaryStat& a, const SummaryStat& b,
                             Tail tail = Tail::two_sided) {
    a.validate();
    b.validate();
    const double va = a.sd * a.sd / a.n;
    const double vb = b.sd * b.sd / b.n;
    if (va + vb == 0.0) {
        // degenerate: no variance at all
        if (a.mean == b.mean) return 1.0;
        switch (tail) {
            case Tail::two_sided: return 0.0;
            case Tail::less: return a.mean < b.mean ? 0.0 : 1.0;
            case Tail::greater: return a.mean > b.mean ? 0.0 : 1.0;
        }
    }
    const double t = (a.mean - b.mean) / std::sqrt(va + vb);
    const double df = (va + vb) * (va + vb) /
                      (va * va / (a.n - 1) + vb * vb / (b.n - 1));
    const boost::math::students_t dist(df);
    switch (tail) {
        case Tail::two_sided: return 2.0 * boost::math::cdf(dist, -std::abs(t));
        case Tail::less: return boost::math::cdf(dist, t);
        case Tail::greater: return boost::math::cdf(dist, -t);
    }
    throw ContractError("t_test_summary: unknown tail");
}

// Holm-Bonferroni step-down adjustment; output in the input order.
inline std::vector<double> holm_bonferroni(const std::vector<double>& p) {
    const std::size_t m = p.size();
    for (double x : p)
        if (!(x >= 0.0 && x <= 1.0))
            throw DomainError("holm_bonferroni: p-value outside [0,1]");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t rank = 0; rank < m; ++rank) {
        const double scaled = std::min(1.0, static_cast<double>(m - rank) * p[order[rank]]);
        running = std::max(running, scaled);
        adjusted[order[rank]] = running;
    }
    return adjusted;
}

// One seed's evaluation outcome: per-risk C-index and IBS.
struct SeedMetrics {
    std::uint64_t seed = 0;
    std::vector<double> c_index; // per risk
    std::vector<double> ibs;     // per risk

    double ci_minus_ibs() const {
        const double c = std::accumulate(c_index.begin(), c_index.end(), 0.0) /
                         static_cast<double>(c_index.size());
        const double b = std::accumulate(ibs.begin(), ibs.end(), 0.0) /
                         static_cast<double>(ibs.size());
        return c - b;
    }
};

struct AggregateResult {
    std::vector<SummaryStat> c_index; // per risk, over the selected seeds
    std::vector<SummaryStat> ibs;
    std::vector<std::uint64_t> selected_seeds;
    double ci_minus_ibs = 0.0;
};

namespace detail {
inline SummaryStat summarize(const std::vector<double>& xs) {
    SummaryStat s;
    s.n = static_cast<int>(xs.size());
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const bool all_equal =
        std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; });
    if (all_equal) s.mean = xs[0]; // avoid a spurious spread from mean rounding
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / (xs.size() - 1));
    return s;
}
} // namespace detail

// Selects the 3 seeds with the highest CI-IBS and summarizes their metrics.
inline AggregateResult aggregate_seeds(const std::vector<SeedMetrics>& per_seed) {
    if (per_seed.size() < 3)
        throw ContractError("aggregate_seeds: need at least 3 seeds, got " +
                            std::to_string(per_seed.size()));
    const std::size_t num_risks = per_seed[0].c_index.size();
    for (const auto& s : per_seed)
        if (s.c_index.size() != num_risks || s.ibs.size() != num_risks)
            throw ContractError("aggregate_seeds: inconsistent risk counts across seeds");
    std::vector<std::size_t> order(per_seed.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return per_seed[i].ci_minus_ibs() > per_seed[j].ci_minus_ibs();
    });
    AggregateResult out;
    for (std::size_t r = 0; r < num_risks; ++r) {
        std::vector<double> cs, bs;
        for (std::size_t t = 0; t < 3; ++t) {
            cs.push_back(per_seed[order[t]].c_index[r]);
            bs.push_back(per_seed[order[t]].ibs[r]);
        }
        out.c_index.push_back(detail::summarize(cs));
        out.ibs.push_back(detail::summarize(bs));
    }
    for (std::size_t t = 0; t < 3; ++t)
        out.selected_seeds.push_back(per_seed[order[t]].seed);
    double c = 0.0, b = 0.0;
    for (std::size_t r = 0; r < num_risks; ++r) {
        c += out.c_index[r].mean;
        b += out.ibs[r].mean;
    }
    out.ci_minus_ibs = c / num_risks - b / num_risks;
    return out;
}

// One candidate configuration in the selection protocol.
struct ConfigResult {
    std::string id;
    std::vector<SummaryStat> c_index; // per risk
    std::vector<SummaryStat> ibs;     // per risk
    double ci_minus_ibs = 0.0;
};

struct AuditRow {
    std::string config;
    double c_index_mean = 0.0;
    double ibs_mean = 0.0;
    double ci_minus_ibs = 0.0;
    double p_ci_hb = 1.0;
    double p_ibs_hb = 1.0;
    bool survived = false;
    std::string discard_reason;
};

struct SelectionResult {
    std::string winner;
    std::vector<AuditRow> audit;
};

// Two-stage selection: one-sided Welch tests against the best-observed
// configuration (highest CI-IBS), Holm-Bonferroni corrected per metric
// family; survivors compete on CI-IBS. C-index tests higher-is-better
// (alternative: worse means lower), IBS lower-is-better.
inline SelectionResult select_configuration(const std::vector<ConfigResult>& results,
                                            double alpha = 0.01) {
    if (results.empty())
        throw ContractError("select_configuration: no configurations");
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i)
        if (results[i].ci_minus_ibs > results[best].ci_minus_ibs) best = i;
    const ConfigResult& ref = results[best];
    const std::size_t num_risks = ref.c_index.size();

    // raw one-sided p-values, averaged across risks per metric family
    std::vector<double> p_ci(results.size()), p_ibs(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].c_index.size() != num_risks || results[i].ibs.size() != num_risks)
            throw ContractError("select_configuration: risk count mismatch for config " +
                                results[i].id);
        if (i == best) {
            p_ci[i] = 1.0;
            p_ibs[i] = 1.0;
            continue;
        }
        double pc = 0.0, pb = 0.0;
        for (std::size_t r = 0; r < num_risks; ++r) {
            pc += t_test_summary(results[i].c_index[r], ref.c_index[r], Tail::less);
            pb += t_test_summary(results[i].ibs[r], ref.ibs[r], Tail::greater);
        }
        p_ci[i] = pc / num_risks;
        p_ibs[i] = pb / num_risks;
    }
    const std::vector<double> hb_ci = holm_bonferroni(p_ci);
    const std::vector<double> hb_ibs = holm_bonferroni(p_ibs);

    SelectionResult out;
    std::size_t winner = results.size();
    for (std::size_t i = 0; i < results.size(); ++i) {
        AuditRow row;
        row.config = results[i].id;
        double cm = 0.0, bm = 0.0;
        for (std::size_t r = 0; r < num_risks; ++r) {
            cm += results[i].c_index[r].mean;
            bm += results[i].ibs[r].mean;
        }
        row.c_index_mean = cm / num_risks;
        row.ibs_mean = bm / num_risks;
        row.ci_minus_ibs = results[i].ci_minus_ibs;
        row.p_ci_hb = hb_ci[i];
        row.p_ibs_hb = hb_ibs[i];
        row.survived = hb_ci[i] >= alpha && hb_ibs[i] >= alpha;
        if (!row.survived)
            row.discard_reason = hb_ci[i] < alpha ? "c_index significantly worse"
                                                  : "ibs significantly worse";
        if (row.survived &&
            (winner == results.size() ||
             results[i].ci_minus_ibs > results[winner].ci_minus_ibs))
            winner = i; // ties broken by declaration order
        out.audit.push_back(std::move(row));
    }
    // the best-observed config tests against itself with p = 1, so a winner
    // always exists
    out.winner = results[winner].id;
    return out;
}

inline std::string audit_to_csv(const std::vector<AuditRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << "config,c_index,ibs,ci_minus_ibs,p_ci_hb,p_ibs_hb,survived\n";
    for (const auto& r : rows)
        os << r.config << "," << r.c_index_mean << "," << r.ibs_mean << ","
           << r.ci_minus_ibs << "," << r.p_ci_hb << "," << r.p_ibs_hb << ","
           << (r.survived ? 1 : 0) << "\n";
    return os.str();
}

} // namespace survfuse

#endif
