#ifndef SURVFUSE_METRICS_HPP
#define SURVFUSE_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "survfuse/errors.hpp"
#include "survfuse/estimators.hpp"

namespace survfuse {

// Model outputs on a time grid: F(t|x) per patient for single risk, or
// CIF_k(t|x) for one cause. Rows are patients, columns follow the grid.
struct PredictionMatrix {
    std::vector<double> grid;
    std::vector<std::vector<double>> values; // patients x grid, non-decreasing rows
    std::vector<double> times;               // observed time per patient
    std::vector<int> events;                 // 0 = censored, k = event type

    std::size_t n() const { return values.size(); }

    // Right-continuous lookup along the grid.
    double at(std::size_t patient, double t) const {
        const auto& row = values[patient];
        auto it = std::upper_bound(grid.begin(), grid.end(), t);
        if (it == grid.begin()) return row.front();
        return row[static_cast<std::size_t>(it - grid.begin()) - 1];
    }

    void validate() const {
        if (values.empty())
            throw DataError("PredictionMatrix: empty predictions");
        if (times.size() != values.size() || events.size() != values.size())
            throw DataError("PredictionMatrix: outcome arrays must match patient count");
        for (const auto& row : values)
            if (row.size() != grid.size())
                throw DataError("PredictionMatrix: row length must match grid");
    }
};

struct MetricOptions {
    // Paper-literal compatibility switches. Defaults follow the standard
    // conventions: higher predicted incidence for the earlier-failing patient
    // counts as concordant, and the cause-specific Brier event indicator
    // requires the event to be of the scored cause.
    bool paper_compat = false;
};

namespace detail {

inline double c_index_impl(const PredictionMatrix& pred, int cause, double t_eval,
                           const MetricOptions& opts, bool* no_pairs_warning) {
    pred.validate();
    const std::size_t n = pred.n();
    double comparable = 0.0;
    double concordant = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (pred.events[i] != cause) continue;
        if (pred.times[i] > t_eval) continue;
        const double fi = pred.at(i, t_eval);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || !(pred.times[i] < pred.times[j])) continue;
            comparable += 1.0;
            const double fj = pred.at(j, t_eval);
            if (opts.paper_compat) {
                if (fi <= fj) concordant += 1.0;
            } else {
                if (fi > fj) concordant += 1.0;
                else if (fi == fj) concordant += 0.5;
            }
        }
    }
    if (comparable == 0.0) {
        if (no_pairs_warning) *no_pairs_warning = true;
        return 0.5;
    }
    if (no_pairs_warning) *no_pairs_warning = false;
    return concordant / comparable;
}

} // namespace detail

// Time-dependent C-index over comparable pairs (i experienced the event,
// T_i < T_j, T_i <= t_eval). Prediction ties get half credit.
inline double c_index_single(const PredictionMatrix& pred, double t_eval,
                             bool* no_pairs_warning = nullptr,
                             const MetricOptions& opts = {}) {
    return detail::c_index_impl(pred, 1, t_eval, opts, no_pairs_warning);
}

// Cause-specific C-index; `pred.values` holds CIF_cause rows.
inline double c_index_cause(const PredictionMatrix& pred, int cause, double t_eval,
                            bool* no_pairs_warning = nullptr,
                            const MetricOptions& opts = {}) {
    if (cause < 1)
        throw ContractError("c_index_cause: cause must be >= 1");
    return detail::c_index_impl(pred, cause, t_eval, opts, no_pairs_warning);
}

struct BrierResult {
    double score = 0.0;
    std::size_t n_excluded_g_zero = 0;
};

namespace detail {

// Shared IPCW Brier kernel. `incidence(i)` is F or CIF_cause at time t;
// event_match decides which observed events enter the first term.
template <typename IncidenceFn, typename EventMatchFn>
BrierResult brier_impl(const PredictionMatrix& pred, double t, const StepFunction& G,
                       IncidenceFn incidence, EventMatchFn event_match) {
    pred.validate();
    const std::size_t n = pred.n();
    double sum = 0.0;
    std::size_t included = 0, excluded = 0;
    const double g_at_t = G(t);
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = pred.times[i];
        const double inc = incidence(i);
        if (ti < t && event_match(pred.events[i])) {
            const double g = G.left_limit(ti);
            if (g <= 0.0) { excluded += 1; continue; }
            const double s = 1.0 - inc;
            sum += s * s / g;
            included += 1;
        } else if (ti >= t) {
            if (g_at_t <= 0.0) { excluded += 1; continue; }
            sum += inc * inc / g_at_t;
            included += 1;
        } else {
            included += 1; // censored before t contributes 0
        }
    }
    BrierResult r;
    r.n_excluded_g_zero = excluded;
    r.score = included > 0 ? sum / static_cast<double>(included) : 0.0;
    return r;
}

} // namespace detail

// IPCW Brier score at time t for single risk. Rows of `pred` hold F = 1 - S.
inline BrierResult brier_score_single(const PredictionMatrix& pred, double t,
                                      const StepFunction& G) {
    return detail::brier_impl(
        pred, t, G, [&](std::size_t i) { return pred.at(i, t); },
        [](int e) { return e == 1; });
}

// Cause-specific Brier score; rows hold CIF_cause. The first-term event
// indicator uses y_i == cause by default, y_i != 0 under paper compatibility.
inline BrierResult brier_score_cause(const PredictionMatrix& pred, int cause, double t,
                                     const StepFunction& G,
                                     const MetricOptions& opts = {}) {
    if (cause < 1)
        throw ContractError("brier_score_cause: cause must be >= 1");
    return detail::brier_impl(
        pred, t, G, [&](std::size_t i) { return pred.at(i, t); },
        [&](int e) { return opts.paper_compat ? e != 0 : e == cause; });
}

struct IbsResult {
    double score = 0.0;
    std::size_t n_excluded_g_zero = 0;
};

// Trapezoidal time average of BS over `grid`, normalized by the grid span.
inline IbsResult integrated_brier(const PredictionMatrix& pred,
                                  const std::vector<double>& grid,
                                  const StepFunction& G, int cause = 0,
                                  const MetricOptions& opts = {}) {
    if (grid.size() < 2)
        throw ContractError("integrated_brier: need at least two grid points");
    if (!(grid.back() > 0.0))
        throw ContractError("integrated_brier: t_max must be positive");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ContractError("integrated_brier: grid must be strictly increasing");
    std::vector<double> bs(grid.size());
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const BrierResult r = cause == 0
                                  ? brier_score_single(pred, grid[i], G)
                                  : brier_score_cause(pred, cause, grid[i], G, opts);
        bs[i] = r.score;
        excluded = std::max(excluded, r.n_excluded_g_zero);
    }
    double integral = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        integral += 0.5 * (bs[i] + bs[i - 1]) * (grid[i] - grid[i - 1]);
    IbsResult out;
    out.score = integral / (grid.back() - grid.front());
    out.n_excluded_g_zero = excluded;
    return out;
}

// Per-seed metrics and the aggregated report used by model selection.
struct RiskMetrics {
    int risk = 1;
    double c_index = 0.0;
    double ibs = 0.0;
};

struct EvalReport {
    std::vector<RiskMetrics> per_risk;                      // aggregated (top-3 mean)
    std::map<std::string, std::vector<RiskMetrics>> seeds;  // seed id -> metrics
    std::size_t n_excluded_g_zero = 0;

    double ci_minus_ibs() const {
        if (per_risk.empty())
            throw ContractError("ci_minus_ibs: no risks in report");
        double c = 0.0, b = 0.0;
        for (const auto& r : per_risk) {
            c += r.c_index;
            b += r.ibs;
        }
        const double k = static_cast<double>(per_risk.size());
        return c / k - b / k;
    }
};

// CI-IBS scalar: mean C-index across risks minus mean IBS across risks.
inline double ci_minus_ibs(const EvalReport& report) { return report.ci_minus_ibs(); }

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["risks"] = nlohmann::json::array();
    for (const auto& m : r.per_risk)
        j["risks"].push_back({{"risk", m.risk}, {"c_index", m.c_index}, {"ibs", m.ibs}});
    j["ci_minus_ibs"] = r.ci_minus_ibs();
    j["n_excluded_G_zero"] = r.n_excluded_g_zero;
    j["seeds"] = nlohmann::json::object();
    for (const auto& [seed, ms] : r.seeds) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& m : ms)
            arr.push_back({{"risk", m.risk}, {"c_index", m.c_index}, {"ibs", m.ibs}});
        j["seeds"][seed] = arr;
    }
    return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
    EvalReport r;
    for (const auto& m : j.at("risks"))
        r.per_risk.push_back({m.at("risk").get<int>(), m.at("c_index").get<double>(),
                              m.at("ibs").get<double>()});
    r.n_excluded_g_zero = j.value("n_excluded_G_zero", std::size_t{0});
    if (j.contains("seeds"))
        for (auto it = j["seeds"].begin(); it != j["seeds"].end(); ++it) {
            std::vector<RiskMetrics> ms;
            for (const auto& m : it.value())
                ms.push_back({m.at("risk").get<int>(), m.at("c_index").get<double>(),
                              m.at("ibs").get<double>()});
            r.seeds[it.key()] = std::move(ms);
        }
    return r;
}

} // namespace survfuse

#endif
