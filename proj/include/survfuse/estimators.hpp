#ifndef SURVFUSE_ESTIMATORS_HPP
#define SURVFUSE_ESTIMATORS_HPP

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/errors.hpp"

namespace survfuse {

// Right-continuous piecewise-constant function over time.
struct StepFunction {
    std::vector<double> knots;  // strictly increasing
    std::vector<double> values; // one per knot
    double value_before_first = 1.0;

    double operator()(double t) const {
        // value of the largest knot <= t
        auto it = std::upper_bound(knots.begin(), knots.end(), t);
        if (it == knots.begin()) return value_before_first;
        return values[static_cast<std::size_t>(it - knots.begin()) - 1];
    }

    // Left limit: value just before t (excludes a jump exactly at t).
    double left_limit(double t) const {
        auto it = std::lower_bound(knots.begin(), knots.end(), t);
        if (it == knots.begin()) return value_before_first;
        return values[static_cast<std::size_t>(it - knots.begin()) - 1];
    }

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(17);
        os << "time,value\n";
        for (std::size_t i = 0; i < knots.size(); ++i)
            os << knots[i] << "," << values[i] << "\n";
        return os.str();
    }
};

enum class KmTarget { event, censoring };

// Product-limit estimator. With target = censoring the indicator is flipped,
// giving G(t), the probability of remaining uncensored. Ties: events at a
// time are processed against the full risk set at that time; same-time
// non-events leave the risk set afterwards.
inline StepFunction kaplan_meier(const std::vector<double>& times,
                                 const std::vector<int>& events,
                                 KmTarget target = KmTarget::event) {
    if (times.empty() || times.size() != events.size())
        throw DataError("kaplan_meier: need nonempty, equal-length times and events");
    for (double t : times)
        if (t < 0.0) throw DataError("kaplan_meier: negative time");

    // counts of (events, total) at each distinct time
    std::map<double, std::pair<int, int>> at; // time -> {d, total leaving}
    for (std::size_t i = 0; i < times.size(); ++i) {
        const bool ev = target == KmTarget::event ? events[i] != 0 : events[i] == 0;
        auto& slot = at[times[i]];
        if (ev) slot.first += 1;
        slot.second += 1;
    }
    StepFunction out;
    double surv = 1.0;
    double n_risk = static_cast<double>(times.size());
    for (const auto& [t, dc] : at) {
        const auto [d, total] = dc;
        if (d > 0) {
            surv *= 1.0 - static_cast<double>(d) / n_risk;
            out.knots.push_back(t);
            out.values.push_back(surv);
        }
        n_risk -= static_cast<double>(total);
    }
    return out;
}

// Aalen-Johansen cumulative incidence, one StepFunction per cause 1..K.
// CIF_k(t) = sum over event times t_j <= t of S_all(t_j-) * d_kj / n_j.
inline std::vector<StepFunction> aalen_johansen(const std::vector<double>& times,
                                                const std::vector<int>& events,
                                                int num_risks) {
    if (times.empty() || times.size() != events.size())
        throw DataError("aalen_johansen: need nonempty, equal-length times and events");
    if (num_risks < 1)
        throw DataError("aalen_johansen: need at least one risk");
    for (int e : events)
        if (e < 0 || e > num_risks)
            throw DataError("aalen_johansen: event label " + std::to_string(e) +
                            " outside [0," + std::to_string(num_risks) + "]");

    std::map<double, std::pair<std::vector<int>, int>> at; // time -> {d per cause, total}
    for (std::size_t i = 0; i < times.size(); ++i) {
        auto& slot = at[times[i]];
        if (slot.first.empty()) slot.first.assign(static_cast<std::size_t>(num_risks), 0);
        if (events[i] != 0) slot.first[static_cast<std::size_t>(events[i]) - 1] += 1;
        slot.second += 1;
    }
    std::vector<StepFunction> cifs(static_cast<std::size_t>(num_risks));
    for (auto& c : cifs) c.value_before_first = 0.0;
    std::vector<double> acc(static_cast<std::size_t>(num_risks), 0.0);
    double surv_all = 1.0;
    double n_risk = static_cast<double>(times.size());
    for (const auto& [t, slot] : at) {
        const auto& [d, total] = slot;
        int d_all = 0;
        for (int dk : d) d_all += dk;
        if (d_all > 0) {
            for (int k = 0; k < num_risks; ++k) {
                acc[static_cast<std::size_t>(k)] +=
                    surv_all * static_cast<double>(d[static_cast<std::size_t>(k)]) / n_risk;
                cifs[static_cast<std::size_t>(k)].knots.push_back(t);
                cifs[static_cast<std::size_t>(k)].values.push_back(
                    acc[static_cast<std::size_t>(k)]);
            }
            surv_all *= 1.0 - static_cast<double>(d_all) / n_risk;
            // with a single risk the incidence is 1 - S by definition; tie the
            // stored value to the product-limit survival so the complement
            // identity holds exactly in floating point
            if (num_risks == 1) {
                acc[0] = 1.0 - surv_all;
                cifs[0].values.back() = acc[0];
            }
        }
        n_risk -= static_cast<double>(total);
    }
    return cifs;
}

} // namespace survfuse

#endif
