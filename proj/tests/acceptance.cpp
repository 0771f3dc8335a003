// Acceptance harness: one pass/fail line per criterion, nonzero exit on any
// failure. Each check is self-contained and uses independent oracles where a
// ground truth exists.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/data.hpp"
#include "survfuse/estimators.hpp"
#include "survfuse/metrics.hpp"
#include "survfuse/samvae.hpp"
#include "survfuse/stats.hpp"

using namespace survfuse;

namespace {

// ---- shared helpers ----

ModalitySchema gaussian_schema(const std::string& name, std::size_t dim) {
    ModalitySchema s;
    s.name = name;
    s.kind = ModalityKind::tabular;
    for (std::size_t i = 0; i < dim; ++i) {
        ColumnSpec col;
        col.name = "x" + std::to_string(i);
        col.likelihood = ColumnLikelihood::gaussian();
        s.columns.push_back(std::move(col));
    }
    return s;
}

SamvaeConfig toy_config(int M, int K, std::size_t latent, std::size_t hidden) {
    SamvaeConfig cfg;
    cfg.num_risks = K;
    cfg.time_head_hidden = 4;
    cfg.classifier_hidden = 4;
    for (int m = 0; m < M; ++m) {
        ModalityConfig mc;
        mc.schema = gaussian_schema("mod" + std::to_string(m + 1), 2);
        mc.latent_dim = latent;
        mc.hidden = {hidden};
        cfg.modalities.push_back(std::move(mc));
    }
    return cfg;
}

std::vector<PatientRecord> random_patients(const SamvaeConfig& cfg, std::size_t n,
                                           std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PatientRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord r;
        r.id = "p" + std::to_string(i);
        for (const auto& mc : cfg.modalities) {
            std::vector<double> block(mc.schema.raw_dim());
            for (auto& v : block)
                v = mc.schema.kind == ModalityKind::image ? rng.uniform() : rng.normal();
            r.features[mc.schema.name] = std::move(block);
        }
        r.time = 0.2 + 2.0 * rng.uniform();
        r.event = static_cast<int>(
            rng.below(static_cast<std::uint64_t>(cfg.num_risks) + 1));
        out.push_back(std::move(r));
    }
    return out;
}

// ---- criterion 1: gradient correctness ----

bool check_gradients(std::string& detail) {
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        SamvaeConfig cfg;
        switch (draw % 4) {
            case 0: cfg = toy_config(2, 1, 2, 4); break;
            case 1: cfg = toy_config(2, 2, 2, 4); break;
            case 2: {
                cfg.num_risks = 1;
                cfg.time_head_hidden = 4;
                ModalityConfig mc;
                mc.schema.name = "img";
                mc.schema.kind = ModalityKind::image;
                mc.schema.channels = 1;
                mc.schema.height = 8;
                mc.schema.width = 8;
                mc.latent_dim = 2;
                mc.hidden = {2, 3};
                cfg.modalities.push_back(std::move(mc));
                break;
            }
            default: cfg = toy_config(2, 1, 4, 4); break;
        }
        SamvaeModel model(cfg, 100 + static_cast<std::uint64_t>(draw));
        // Nudge every parameter off its initial value. Freshly built models
        // carry zero biases, which can park a ReLU pre-activation exactly at
        // the kink when its entire input row is inactive; there the analytic
        // subgradient and a central difference legitimately disagree, so the
        // check is only meaningful away from that measure-zero configuration.
        {
            Rng nrng(400 + static_cast<std::uint64_t>(draw));
            for (auto& [name, e] : model.store.all())
                for (double& v : e.value.values)
                    v += 0.05 + 0.1 * nrng.uniform();
        }
        const auto patients =
            random_patients(cfg, 3, 200 + static_cast<std::uint64_t>(draw));
        const ModelBatch batch = model.make_batch(patients);
        Rng rng(300 + static_cast<std::uint64_t>(draw));
        const NoiseBatch noise = model.draw_noise(3, rng);
        const bool competing = cfg.num_risks > 1;
        {
            model.store.zero_grad();
            ad::Tape tape;
            const auto lb = competing ? model.loss_competing_risks(tape, batch, noise)
                                      : model.loss_single_risk(tape, batch, noise);
            tape.backward(lb.total_node.id);
        }
        const auto rep = ad::finite_diff_check(
            [&](ad::ParamStore&) {
                ad::Tape tape;
                tape.tracking = false;
                return competing
                           ? model.loss_competing_risks(tape, batch, noise).total
                           : model.loss_single_risk(tape, batch, noise).total;
            },
            model.store, 1e-5, 1e-4);
        worst = std::max(worst, rep.max_rel_error);
        if (!rep.pass) {
            detail = "draw " + std::to_string(draw) + " failed at " + rep.worst_param +
                     " (rel err " + std::to_string(rep.max_rel_error) + ")";
            return false;
        }
    }
    std::ostringstream os;
    os << "20 draws, worst relative error " << worst;
    detail = os.str();
    return true;
}

// ---- criterion 2: covariate-free Weibull recovery ----

bool check_weibull_recovery(std::string& detail) {
    SynthSpec spec;
    spec.n_patients = 2000;
    spec.modality_dims = {1};
    spec.beta = {{0.0}};
    spec.weibull_shape = {1.5};
    spec.baseline_scale = 2.0;
    spec.censoring_fraction = 0.2;
    spec.seed = 77;
    const SimResult sim = simulate_single_risk(spec);
    const std::size_t n = sim.records.size();

    Tensor log_t = Tensor::zeros({n, 1});
    Tensor ev = Tensor::zeros({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
        log_t.values[i] = std::log(std::max(sim.records[i].time, 1e-8));
        ev.values[i] = sim.records[i].event != 0 ? 1.0 : 0.0;
    }
    const Tensor ones = Tensor::full({n, 1}, 1.0);

    ad::ParamStore store;
    store.add("raw_k", Tensor::full({1, 1}, 0.5));
    store.add("raw_lam", Tensor::full({1, 1}, 0.5));
    for (int step = 0; step < 1500; ++step) {
        ad::Tape tape;
        ad::Var ones_v = ad::constant(tape, ones);
        ad::Var k_col = ad::matmul(
            ones_v, ad::add_const(ad::softplus(ad::param(tape, store, "raw_k")), 1e-6));
        ad::Var lam_col = ad::matmul(
            ones_v,
            ad::add_const(ad::softplus(ad::param(tape, store, "raw_lam")), 1e-6));
        ad::Var d = ad::sub(ad::constant(tape, log_t), ad::log_op(lam_col));
        ad::Var log_h = ad::add(ad::sub(ad::log_op(k_col), ad::log_op(lam_col)),
                                ad::mul(ad::add_const(k_col, -1.0), d));
        ad::Var log_s = ad::neg(ad::exp_op(ad::mul(k_col, d)));
        ad::Var ll = ad::add(ad::mul_const(log_h, ev), log_s);
        ad::Var loss = ad::scale(ad::sum_all(ll), -1.0 / static_cast<double>(n));
        tape.backward(loss.id);
        ad::adam_step(store, 0.02);
    }
    auto softplus1 = [](double x) { return std::log1p(std::exp(x)) + 1e-6; };
    const double k_hat = softplus1(store.entry("raw_k").value.values[0]);
    const double lam_hat = softplus1(store.entry("raw_lam").value.values[0]);
    const double k_err = std::abs(k_hat - 1.5) / 1.5;
    const double lam_err = std::abs(lam_hat - 2.0) / 2.0;
    std::ostringstream os;
    os << "k_hat " << k_hat << " (true 1.5), lambda_hat " << lam_hat << " (true 2.0)";
    detail = os.str();
    return k_err < 0.10 && lam_err < 0.10;
}

// ---- criteria 3/4: oracle-backed discrimination ----

struct DiscriminationResult {
    double oracle_min = 1.0;
    double model_c_index = 0.0;
};

DiscriminationResult run_discrimination(int K, std::size_t n, double beta_scale,
                                        int epochs) {
    SynthSpec spec;
    spec.n_patients = n;
    spec.num_risks = K;
    spec.modality_dims = {2, 2};
    spec.beta.assign(static_cast<std::size_t>(K), std::vector<double>(4, 0.0));
    for (int k = 0; k < K; ++k)
        for (int d = 0; d < 2; ++d)
            spec.beta[static_cast<std::size_t>(k)][static_cast<std::size_t>(2 * k + d)] =
                beta_scale;
    spec.weibull_shape.assign(static_cast<std::size_t>(K), 1.5);
    spec.censoring_fraction = 0.2;
    spec.seed = 90 + static_cast<std::uint64_t>(K);
    const SimResult sim = simulate_cohort(spec);

    DiscriminationResult out;
    for (double o : sim.oracle_c_index) out.oracle_min = std::min(out.oracle_min, o);

    Split split = split_dataset(sim.records, 0.2, 42);
    std::vector<ModalitySchema> schemas = sim.schemas;
    fit_normalization(schemas, split.train);

    SamvaeConfig cfg;
    cfg.num_risks = K;
    cfg.time_head_hidden = 16;
    cfg.classifier_hidden = 16;
    for (const auto& schema : schemas) {
        ModalityConfig mc;
        mc.schema = schema;
        mc.latent_dim = 3;
        mc.hidden = {16};
        cfg.modalities.push_back(mc);
    }

    const std::vector<double> grid = evaluation_grid(split.test);
    double t_eval = 0.0;
    for (const auto& r : split.test)
        if (r.event != 0) t_eval = std::max(t_eval, r.time);

    std::vector<SeedMetrics> per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SamvaeModel model(cfg, seed);
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = 64;
        tc.lr = 1e-3;
        tc.seed = seed;
        model.train(split.train, tc);
        SeedMetrics sm;
        sm.seed = seed;
        for (int k = 1; k <= K; ++k) {
            const PredictionMatrix pm = predict_matrix(model, split.test, grid, k, 0);
            const double ci = K == 1 ? c_index_single(pm, t_eval)
                                     : c_index_cause(pm, k, t_eval);
            sm.c_index.push_back(ci);
            sm.ibs.push_back(0.0); // rank seeds by C-index alone
        }
        per_seed.push_back(std::move(sm));
    }
    const AggregateResult agg = aggregate_seeds(per_seed);
    double mean_ci = 0.0;
    for (const auto& s : agg.c_index) mean_ci += s.mean;
    out.model_c_index = mean_ci / static_cast<double>(agg.c_index.size());
    return out;
}

bool check_single_risk_discrimination(std::string& detail) {
    const auto r = run_discrimination(1, 600, 1.5, 60);
    std::ostringstream os;
    os << "oracle C-index " << r.oracle_min << " (need >= 0.80), model C-index "
       << r.model_c_index << " (need >= 0.70, best 3 of 5 seeds)";
    detail = os.str();
    return r.oracle_min >= 0.80 && r.model_c_index >= 0.70;
}

bool check_competing_discrimination(std::string& detail) {
    const auto r = run_discrimination(2, 800, 1.5, 60);
    std::ostringstream os;
    os << "oracle per-risk C-index >= " << r.oracle_min
       << " (need >= 0.75), model mean C-index " << r.model_c_index
       << " (need >= 0.65, best 3 of 5 seeds)";
    detail = os.str();
    return r.oracle_min >= 0.75 && r.model_c_index >= 0.65;
}

// ---- criterion 5: estimator identities ----

double km_oracle(const std::vector<double>& times, const std::vector<int>& events,
                 double t, bool censoring_target) {
    std::set<double> distinct(times.begin(), times.end());
    double s = 1.0;
    for (double u : distinct) {
        if (u > t) break;
        int d = 0, n = 0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (times[i] >= u) ++n;
            const bool ev = censoring_target ? events[i] == 0 : events[i] != 0;
            if (times[i] == u && ev) ++d;
        }
        s *= 1.0 - static_cast<double>(d) / n;
    }
    return s;
}

double aj_oracle(const std::vector<double>& times, const std::vector<int>& events,
                 int cause, double t) {
    std::set<double> distinct(times.begin(), times.end());
    double cif = 0.0, s_all = 1.0;
    for (double u : distinct) {
        int d_cause = 0, d_all = 0, n = 0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (times[i] >= u) ++n;
            if (times[i] == u && events[i] != 0) {
                ++d_all;
                if (events[i] == cause) ++d_cause;
            }
        }
        if (u <= t) cif += s_all * static_cast<double>(d_cause) / n;
        s_all *= 1.0 - static_cast<double>(d_all) / n;
    }
    return cif;
}

bool check_estimator_identities(std::string& detail) {
    // random datasets: sum of AJ CIFs complements the all-cause KM
    Rng rng(111);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(40);
        const int K = 1 + static_cast<int>(rng.below(3));
        std::vector<double> times(n);
        std::vector<int> events(n);
        for (std::size_t i = 0; i < n; ++i) {
            times[i] = 0.25 * (1.0 + static_cast<double>(rng.below(12)));
            events[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(K) + 1));
        }
        const auto km = kaplan_meier(times, events);
        const auto cifs = aalen_johansen(times, events, K);
        std::set<double> knots(times.begin(), times.end());
        for (double t : knots) {
            double cif_sum = 0.0;
            for (const auto& c : cifs) cif_sum += c(t);
            if (std::abs(cif_sum + km(t) - 1.0) > 1e-12) {
                detail = "identity violated on random dataset " + std::to_string(trial);
                return false;
            }
        }
        // K=1 must equal 1-KM exactly
        const auto one = aalen_johansen(times, std::vector<int>(n, 1), 1);
        const auto km1 = kaplan_meier(times, std::vector<int>(n, 1));
        for (double t : knots)
            if (one[0](t) != 1.0 - km1(t)) {
                detail = "AJ(K=1) != 1-KM on random dataset " + std::to_string(trial);
                return false;
            }
    }

    // exhaustive oracle match on every dataset of size <= 6
    const double time_pool[] = {1.0, 2.0, 3.0};
    const double probes[] = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
    long checked = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        std::vector<std::size_t> code(n, 0); // base-9 digit: time*3 + event
        std::vector<double> times(n);
        std::vector<int> events(n);
        for (;;) {
            for (std::size_t i = 0; i < n; ++i) {
                times[i] = time_pool[code[i] / 3];
                events[i] = static_cast<int>(code[i] % 3);
            }
            const auto km = kaplan_meier(times, events);
            const auto g = kaplan_meier(times, events, KmTarget::censoring);
            const auto cifs = aalen_johansen(times, events, 2);
            for (double t : probes) {
                if (std::abs(km(t) - km_oracle(times, events, t, false)) > 1e-12 ||
                    std::abs(g(t) - km_oracle(times, events, t, true)) > 1e-12) {
                    detail = "KM oracle mismatch, n=" + std::to_string(n);
                    return false;
                }
                for (int k = 1; k <= 2; ++k)
                    if (std::abs(cifs[static_cast<std::size_t>(k - 1)](t) -
                                 aj_oracle(times, events, k, t)) > 1e-12) {
                        detail = "AJ oracle mismatch, n=" + std::to_string(n);
                        return false;
                    }
            }
            ++checked;
            std::size_t i = 0;
            while (i < n && ++code[i] == 9) code[i++] = 0;
            if (i == n) break;
        }
    }
    detail = "200 random datasets + " + std::to_string(checked) +
             " exhaustive datasets of size <= 6";
    return true;
}

// ---- criterion 6: metric oracles ----

double c_index_oracle(const PredictionMatrix& pm, int cause, double t_eval) {
    double comparable = 0.0, concordant = 0.0;
    for (std::size_t i = 0; i < pm.n(); ++i) {
        if (pm.events[i] != cause || pm.times[i] > t_eval) continue;
        for (std::size_t j = 0; j < pm.n(); ++j) {
            if (j == i || !(pm.times[i] < pm.times[j])) continue;
            comparable += 1.0;
            const double fi = pm.at(i, t_eval), fj = pm.at(j, t_eval);
            if (fi > fj) concordant += 1.0;
            else if (fi == fj) concordant += 0.5;
        }
    }
    return comparable == 0.0 ? 0.5 : concordant / comparable;
}

double brier_oracle_g1(const PredictionMatrix& pm, double t) {
    // direct formula with G == 1: no exclusions possible
    double sum = 0.0;
    std::size_t included = 0;
    for (std::size_t i = 0; i < pm.n(); ++i) {
        const double f = pm.at(i, t);
        if (pm.times[i] < t && pm.events[i] == 1) {
            sum += (1.0 - f) * (1.0 - f);
            ++included;
        } else if (pm.times[i] >= t) {
            sum += f * f;
            ++included;
        } else {
            ++included; // censored before t contributes 0
        }
    }
    return included ? sum / static_cast<double>(included) : 0.0;
}

bool check_metric_oracles(std::string& detail) {
    // hand case: C-index 2/3
    {
        PredictionMatrix pm;
        pm.grid = {3.0};
        pm.values = {{0.9}, {0.3}, {0.5}};
        pm.times = {1.0, 2.0, 3.0};
        pm.events = {1, 1, 1};
        if (c_index_single(pm, 3.0) != 2.0 / 3.0) {
            detail = "hand C-index case != 2/3";
            return false;
        }
    }
    // hand case: Brier 0.065
    {
        PredictionMatrix pm;
        pm.grid = {1.5};
        pm.values = {{0.8}, {0.3}};
        pm.times = {1.0, 2.0};
        pm.events = {1, 1};
        StepFunction g_one;
        if (std::abs(brier_score_single(pm, 1.5, g_one).score - 0.065) > 1e-15) {
            detail = "hand Brier case != 0.065";
            return false;
        }
    }
    // exhaustive single-risk datasets of size <= 6: times in {1,2,3},
    // events in {0,1}, deterministic pseudo-random incidence curves
    const double time_pool[] = {1.0, 2.0, 3.0};
    const std::vector<double> grid{0.0, 1.0, 2.0, 3.0, 4.0};
    StepFunction g_one;
    Rng rng(222);
    long checked = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        std::vector<std::size_t> code(n, 0); // base-6 digit: time*2 + event
        for (;;) {
            PredictionMatrix pm;
            pm.grid = grid;
            pm.times.resize(n);
            pm.events.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                pm.times[i] = time_pool[code[i] / 2];
                pm.events[i] = static_cast<int>(code[i] % 2);
                const double rate = 0.1 + 1.9 * rng.uniform();
                std::vector<double> row;
                for (double t : grid) row.push_back(1.0 - std::exp(-rate * t));
                pm.values.push_back(std::move(row));
            }
            if (std::abs(c_index_single(pm, 3.0) - c_index_oracle(pm, 1, 3.0)) > 1e-12) {
                detail = "C-index oracle mismatch, n=" + std::to_string(n);
                return false;
            }
            const auto br = brier_score_single(pm, 2.0, g_one);
            if (br.n_excluded_g_zero != 0 ||
                std::abs(br.score - brier_oracle_g1(pm, 2.0)) > 1e-12) {
                detail = "Brier oracle mismatch, n=" + std::to_string(n);
                return false;
            }
            ++checked;
            std::size_t i = 0;
            while (i < n && ++code[i] == 6) code[i++] = 0;
            if (i == n) break;
        }
    }
    detail = "hand cases exact + " + std::to_string(checked) + " exhaustive datasets";
    return true;
}

// ---- criterion 7: model-output coherence ----

bool check_output_coherence(std::string& detail) {
    int pairs = 0;
    for (int m = 0; m < 10; ++m) {
        const int K = 1 + m % 3;
        SynthSpec spec;
        spec.n_patients = 40;
        spec.num_risks = K;
        spec.modality_dims = {2};
        spec.beta.assign(static_cast<std::size_t>(K), {1.0, -1.0});
        spec.weibull_shape.assign(static_cast<std::size_t>(K), 1.5);
        spec.censoring_fraction = 0.2;
        spec.seed = 500 + static_cast<std::uint64_t>(m);
        const SimResult sim = simulate_cohort(spec);

        SamvaeConfig cfg;
        cfg.num_risks = K;
        cfg.time_head_hidden = 4;
        cfg.classifier_hidden = 4;
        for (const auto& schema : sim.schemas) {
            ModalityConfig mc;
            mc.schema = schema;
            mc.latent_dim = 2;
            mc.hidden = {4};
            cfg.modalities.push_back(mc);
        }
        SamvaeModel model(cfg, 600 + static_cast<std::uint64_t>(m));
        TrainConfig tc;
        tc.epochs = 2;
        tc.batch_size = 16;
        tc.seed = static_cast<std::uint64_t>(m) + 1;
        model.train(sim.records, tc);

        std::vector<double> grid;
        for (int g = 0; g <= 40; ++g) grid.push_back(0.1 * g);
        for (int p = 0; p < 10; ++p) {
            const PatientRecord& rec = sim.records[static_cast<std::size_t>(p)];
            const auto surv = model.predict_survival_curve(rec, grid, 0);
            const auto& s = surv.trajectories[0];
            std::vector<std::vector<double>> cif(grid.size());
            for (std::size_t g = 0; g < grid.size(); ++g)
                cif[g] = model.predict_cif(rec, grid[g], 0);
            if (s[0] != 1.0) {
                detail = "S(0) != 1";
                return false;
            }
            for (std::size_t g = 0; g < grid.size(); ++g) {
                double cif_sum = 0.0;
                for (double v : cif[g]) cif_sum += v;
                if (cif_sum < 0.0 || cif_sum > 1.0 + 1e-12) {
                    detail = "sum of CIFs outside [0,1]";
                    return false;
                }
                if (std::abs(s[g] + cif_sum - 1.0) > 1e-12) {
                    detail = "S + sum CIF != 1";
                    return false;
                }
                if (g > 0)
                    for (int k = 0; k < K; ++k)
                        if (cif[g][static_cast<std::size_t>(k)] <
                            cif[g - 1][static_cast<std::size_t>(k)]) {
                            detail = "CIF not non-decreasing";
                            return false;
                        }
            }
            ++pairs;
        }
    }
    detail = std::to_string(pairs) + " trained-model/patient pairs on dense grids";
    return true;
}

// ---- criterion 8: selection protocol ----

bool check_selection_protocol(std::string& detail) {
    const auto adj = holm_bonferroni({0.01, 0.04, 0.03});
    if (std::abs(adj[0] - 0.03) > 1e-15 || std::abs(adj[1] - 0.06) > 1e-15 ||
        std::abs(adj[2] - 0.06) > 1e-15) {
        detail = "Holm hand example failed";
        return false;
    }
    std::vector<ConfigResult> res{
        {"latent5_hidden10", {{0.58, 0.02, 3}}, {{0.21, 0.01, 3}}, 0.37},
        {"latent10_hidden50", {{0.72, 0.02, 3}}, {{0.187, 0.01, 3}}, 0.533},
        {"latent10_hidden5", {{0.715, 0.02, 3}}, {{0.19, 0.01, 3}}, 0.525},
        {"latent50_hidden500", {{0.45, 0.02, 3}}, {{0.30, 0.01, 3}}, 0.15},
    };
    const auto sel = select_configuration(res, 0.01);
    if (sel.winner != "latent10_hidden50") {
        detail = "synthetic audit table picked " + sel.winner;
        return false;
    }
    for (const auto& row : sel.audit)
        if (row.config == "latent10_hidden50" && !row.survived) {
            detail = "best-observed config eliminated in stage 1";
            return false;
        }
    detail = "Holm hand example, audit-table winner, best config survives";
    return true;
}

// ---- criterion 9: CI-IBS arithmetic ----

bool check_ci_minus_ibs(std::string& detail) {
    SeedMetrics sm{0, {0.773}, {0.201}};
    const double v = sm.ci_minus_ibs();
    std::ostringstream os;
    os << "0.773 - 0.201 = " << v;
    detail = os.str();
    return std::abs(v - 0.572) < 1e-12;
}

// ---- criterion 10: architecture invariant ----

bool check_network_counts(std::string& detail) {
    for (int M = 1; M <= 3; ++M)
        for (int K = 1; K <= 3; ++K) {
            SamvaeModel model(toy_config(M, K, 2, 4), 1);
            const int expect = K == 1 ? 2 * M + 1 : 2 * M + K + 1;
            if (model.network_count() != expect) {
                detail = "M=" + std::to_string(M) + " K=" + std::to_string(K) +
                         ": got " + std::to_string(model.network_count()) +
                         ", expected " + std::to_string(expect);
                return false;
            }
        }
    detail = "2M+1 (K=1) and 2M+K+1 (K>1) for M,K in {1,2,3}";
    return true;
}

// ---- criterion 11: determinism ----

std::string run_pipeline_once() {
    SynthSpec spec;
    spec.n_patients = 80;
    spec.modality_dims = {2};
    spec.beta = {{1.0, 1.0}};
    spec.censoring_fraction = 0.2;
    spec.seed = 7;
    const SimResult sim = simulate_single_risk(spec);
    Split split = split_dataset(sim.records, 0.2, 42);
    std::vector<ModalitySchema> schemas = sim.schemas;
    fit_normalization(schemas, split.train);

    SamvaeConfig cfg;
    cfg.num_risks = 1;
    cfg.time_head_hidden = 4;
    for (const auto& schema : schemas) {
        ModalityConfig mc;
        mc.schema = schema;
        mc.latent_dim = 2;
        mc.hidden = {4};
        cfg.modalities.push_back(mc);
    }

    const std::vector<double> grid = evaluation_grid(split.test);
    std::vector<double> times;
    std::vector<int> events;
    for (const auto& r : split.test) {
        times.push_back(r.time);
        events.push_back(r.event);
    }
    const StepFunction G = kaplan_meier(times, events, KmTarget::censoring);
    double t_eval = 0.0;
    for (const auto& r : split.test)
        if (r.event != 0) t_eval = std::max(t_eval, r.time);
    std::vector<double> ibs_grid;
    for (double t : grid)
        if (ibs_grid.empty() || t > ibs_grid.back()) ibs_grid.push_back(t);

    std::ostringstream transcript;
    transcript.precision(17);
    EvalReport report;
    std::vector<SeedMetrics> per_seed;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        SamvaeModel model(cfg, seed);
        TrainConfig tc;
        tc.epochs = 3;
        tc.batch_size = 16;
        tc.seed = seed;
        const TrainLog log = model.train(split.train, tc);
        transcript << log.to_csv();
        const PredictionMatrix pm = predict_matrix(model, split.test, grid, 1, 5);
        RiskMetrics rm;
        rm.risk = 1;
        rm.c_index = c_index_single(pm, t_eval);
        rm.ibs = integrated_brier(pm, ibs_grid, G).score;
        report.seeds[std::to_string(seed)] = {rm};
        per_seed.push_back({seed, {rm.c_index}, {rm.ibs}});
    }
    const AggregateResult agg = aggregate_seeds(per_seed);
    report.per_risk.push_back({1, agg.c_index[0].mean, agg.ibs[0].mean});
    transcript << eval_report_to_json(report).dump();
    return transcript.str();
}

bool check_determinism(std::string& detail) {
    const std::string a = run_pipeline_once();
    const std::string b = run_pipeline_once();
    if (a != b) {
        detail = "train+evaluate transcripts differ between identical runs";
        return false;
    }
    detail = "two full train+evaluate runs, byte-identical loss logs and reports";
    return true;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Criterion> criteria{
        {"gradient correctness (autodiff vs finite differences)", check_gradients},
        {"Weibull parameter recovery on simulated data", check_weibull_recovery},
        {"single-risk discrimination vs oracle", check_single_risk_discrimination},
        {"competing-risks discrimination vs oracle", check_competing_discrimination},
        {"estimator identities (KM / Aalen-Johansen)", check_estimator_identities},
        {"metric oracles (C-index / Brier)", check_metric_oracles},
        {"model-output coherence (CIF / survival)", check_output_coherence},
        {"selection protocol (Holm + two-stage)", check_selection_protocol},
        {"CI-IBS arithmetic", check_ci_minus_ibs},
        {"architecture network-count invariant", check_network_counts},
        {"end-to-end determinism", check_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool pass = false;
        try {
            pass = criteria[i].fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        std::printf("[%s] %2zu. %s (%.1fs) %s\n", pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].name, secs, detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    if (failures == 0)
        std::printf("all %zu acceptance criteria passed\n", criteria.size());
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
