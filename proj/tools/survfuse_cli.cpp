// survfuse command-line tool: simulate, train, evaluate, gridsearch, curves.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "survfuse/data.hpp"
#include "survfuse/errors.hpp"
#include "survfuse/estimators.hpp"
#include "survfuse/metrics.hpp"
#include "survfuse/samvae.hpp"
#include "survfuse/stats.hpp"
#include "survfuse/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace survfuse;

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel g_log_level = LogLevel::info;
std::mutex g_log_mutex;

void init_logging() {
    const char* env = std::getenv("SURVFUSE_LOG");
    if (!env) return;
    const std::string v = env;
    if (v == "error") g_log_level = LogLevel::error;
    else if (v == "info") g_log_level = LogLevel::info;
    else if (v == "debug") g_log_level = LogLevel::debug;
}

void log_at(LogLevel lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(g_log_level)) return;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    const char* tag = lvl == LogLevel::error ? "error" : lvl == LogLevel::info ? "info" : "debug";
    std::cerr << "[" << tag << "] " << msg << "\n";
}

void log_info(const std::string& msg) { log_at(LogLevel::info, msg); }
void log_debug(const std::string& msg) { log_at(LogLevel::debug, msg); }

// Write to a temp file in the target directory, then rename into place.
void atomic_write(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw DataError("cannot write file: " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open config: " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const std::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// ---- run configuration ----

struct RunConfig {
    fs::path manifest;
    std::vector<std::pair<std::string, ModalityConfig>> modality_overrides; // by name
    int epochs = 100;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int samples = 100;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 42;
    std::size_t time_head_hidden = 32;
    std::size_t classifier_hidden = 32;
};

RunConfig parse_run_config(const json& j, const fs::path& base) {
    RunConfig rc;
    rc.manifest = base / j.at("manifest").get<std::string>();
    if (j.contains("modalities"))
        for (const auto& m : j["modalities"]) {
            ModalityConfig mc;
            mc.latent_dim = m.value("latent_dim", std::size_t{5});
            mc.hidden = m.value("hidden", std::vector<std::size_t>{50});
            rc.modality_overrides.emplace_back(m.at("name").get<std::string>(), mc);
        }
    rc.epochs = j.value("epochs", 100);
    rc.batch_size = j.value("batch_size", std::size_t{64});
    rc.lr = j.value("lr", 1e-3);
    if (j.contains("seeds")) rc.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    rc.samples = j.value("samples", 100);
    rc.test_fraction = j.value("test_fraction", 0.2);
    rc.split_seed = j.value("split_seed", std::uint64_t{42});
    rc.time_head_hidden = j.value("time_head_hidden", std::size_t{32});
    rc.classifier_hidden = j.value("classifier_hidden", std::size_t{32});
    return rc;
}

SamvaeConfig build_model_config(const RunConfig& rc, const Dataset& ds) {
    SamvaeConfig cfg;
    cfg.num_risks = ds.num_risks;
    cfg.time_head_hidden = rc.time_head_hidden;
    cfg.classifier_hidden = rc.classifier_hidden;
    for (const auto& schema : ds.schemas) {
        ModalityConfig mc;
        mc.schema = schema;
        mc.latent_dim = 5;
        mc.hidden = {50};
        for (const auto& [name, ov] : rc.modality_overrides)
            if (name == schema.name) {
                mc.latent_dim = ov.latent_dim;
                mc.hidden = ov.hidden;
            }
        cfg.modalities.push_back(std::move(mc));
    }
    return cfg;
}

// ---- simulate ----

int cmd_simulate(const fs::path& config_path, const fs::path& out_dir,
                 std::uint64_t seed_override, bool seed_given) {
    const json j = load_json(config_path);
    SynthSpec spec;
    spec.n_patients = j.value("n", std::size_t{1000});
    spec.num_risks = j.value("k", 1);
    spec.modality_dims = j.value("modality_dims", std::vector<std::size_t>{4});
    spec.beta = j.at("beta").get<std::vector<std::vector<double>>>();
    spec.weibull_shape = j.value("weibull_shape", std::vector<double>(spec.beta.size(), 1.5));
    spec.baseline_scale = j.value("baseline_scale", 1.0);
    spec.censoring_fraction = j.value("censoring_fraction", 0.0);
    spec.seed = seed_given ? seed_override : j.value("seed", std::uint64_t{1});

    const SimResult sim = simulate_cohort(spec);
    log_info("simulated " + std::to_string(sim.records.size()) + " patients, K=" +
             std::to_string(spec.num_risks));

    // outcomes
    std::ostringstream outcomes;
    outcomes << "patient_id,time,event\n";
    for (const auto& r : sim.records)
        outcomes << r.id << "," << fmt_num(r.time) << "," << r.event << "\n";
    atomic_write(out_dir / "outcomes.csv", outcomes.str());

    // one CSV per modality
    json manifest;
    manifest["k"] = spec.num_risks;
    manifest["outcomes"] = "outcomes.csv";
    manifest["modalities"] = json::array();
    for (std::size_t m = 0; m < sim.schemas.size(); ++m) {
        const auto& schema = sim.schemas[m];
        std::ostringstream os;
        os << "patient_id";
        for (const auto& c : schema.columns) os << "," << c.name;
        os << "\n";
        for (const auto& r : sim.records) {
            os << r.id;
            for (double v : r.features.at(schema.name)) os << "," << fmt_num(v);
            os << "\n";
        }
        const std::string fname = schema.name + ".csv";
        atomic_write(out_dir / fname, os.str());
        manifest["modalities"].push_back(
            {{"name", schema.name}, {"kind", "tabular"}, {"path", fname}});
    }
    atomic_write(out_dir / "manifest.json", manifest.dump(2) + "\n");

    json oracle;
    oracle["oracle_c_index"] = sim.oracle_c_index;
    atomic_write(out_dir / "oracle.json", oracle.dump(2) + "\n");
    return 0;
}

// ---- train ----

struct TrainedSeed {
    std::uint64_t seed;
    TrainLog log;
};

TrainedSeed train_one_seed(const RunConfig& rc, const Dataset& ds, std::uint64_t seed,
                           const fs::path& seed_dir) {
    Split split = split_dataset(ds.records, rc.test_fraction, rc.split_seed);
    std::vector<ModalitySchema> schemas = ds.schemas;
    fit_normalization(schemas, split.train);
    Dataset fitted = ds;
    fitted.schemas = schemas;
    SamvaeModel model(build_model_config(rc, fitted), seed);
    TrainConfig tc;
    tc.epochs = rc.epochs;
    tc.batch_size = rc.batch_size;
    tc.lr = rc.lr;
    tc.seed = seed;
    TrainLog log = model.train(split.train, tc);
    log_debug("seed " + std::to_string(seed) + " final loss " +
              fmt_num(log.epochs.back().total));
    atomic_write(seed_dir / "model.ckpt", model.to_json().dump() + "\n");
    atomic_write(seed_dir / "loss.csv", log.to_csv());
    return {seed, std::move(log)};
}

int cmd_train(const fs::path& config_path, const fs::path& out_dir,
              std::vector<std::uint64_t> seeds_override, bool select) {
    const json j = load_json(config_path);
    RunConfig rc = parse_run_config(j, config_path.parent_path());
    if (!seeds_override.empty()) rc.seeds = seeds_override;
    if (select && rc.seeds.size() < 3)
        throw DataError("selection protocol needs at least 3 seeds, got " +
                        std::to_string(rc.seeds.size()));
    Dataset ds = load_dataset(rc.manifest);
    if (ds.records.empty())
        throw DataError("dataset is empty after joining modalities");
    log_info("loaded " + std::to_string(ds.records.size()) + " patients (" +
             std::to_string(ds.n_dropped_incomplete) + " dropped incomplete)");
    for (std::uint64_t seed : rc.seeds) {
        log_info("training seed " + std::to_string(seed));
        train_one_seed(rc, ds, seed, out_dir / ("seed_" + std::to_string(seed)));
    }
    return 0;
}

// ---- evaluate ----

std::vector<RiskMetrics> evaluate_model(SamvaeModel& model,
                                        const std::vector<PatientRecord>& test,
                                        int samples, bool paper_compat,
                                        std::size_t* excluded_out) {
    MetricOptions opts;
    opts.paper_compat = paper_compat;
    std::vector<double> times;
    std::vector<int> events;
    for (const auto& r : test) {
        times.push_back(r.time);
        events.push_back(r.event);
    }
    const StepFunction G = kaplan_meier(times, events, KmTarget::censoring);
    const std::vector<double> grid = evaluation_grid(test);
    double t_eval = 0.0;
    for (const auto& r : test)
        if (r.event != 0) t_eval = std::max(t_eval, r.time);
    if (t_eval == 0.0) t_eval = grid.back();

    std::vector<RiskMetrics> out;
    std::size_t excluded = 0;
    // IBS grid must be strictly increasing; drop the leading zero duplicate risk
    std::vector<double> ibs_grid;
    for (double t : grid)
        if (ibs_grid.empty() || t > ibs_grid.back()) ibs_grid.push_back(t);
    for (int k = 1; k <= model.cfg.num_risks; ++k) {
        PredictionMatrix pm = predict_matrix(model, test, grid, k, samples);
        bool no_pairs = false;
        RiskMetrics rm;
        rm.risk = k;
        rm.c_index = model.cfg.num_risks == 1
                         ? c_index_single(pm, t_eval, &no_pairs, opts)
                         : c_index_cause(pm, k, t_eval, &no_pairs, opts);
        if (no_pairs)
            log_info("risk " + std::to_string(k) + ": no comparable pairs, C-index = 0.5");
        const IbsResult ibs = integrated_brier(pm, ibs_grid, G,
                                               model.cfg.num_risks == 1 ? 0 : k, opts);
        rm.ibs = ibs.score;
        excluded += ibs.n_excluded_g_zero;
        out.push_back(rm);
    }
    if (excluded_out) *excluded_out = excluded;
    return out;
}

EvalReport evaluate_run(const RunConfig& rc, const fs::path& out_dir, int samples,
                        bool paper_compat) {
    Dataset ds = load_dataset(rc.manifest);
    Split split = split_dataset(ds.records, rc.test_fraction, rc.split_seed);

    EvalReport report;
    std::vector<SeedMetrics> per_seed;
    for (std::uint64_t seed : rc.seeds) {
        const fs::path ckpt = out_dir / ("seed_" + std::to_string(seed)) / "model.ckpt";
        if (!fs::exists(ckpt))
            throw DataError("missing checkpoint: " + ckpt.string());
        SamvaeModel model = SamvaeModel::from_json(load_json(ckpt));
        if (static_cast<std::size_t>(model.cfg.modalities.size()) != ds.schemas.size())
            throw DataError("checkpoint/schema mismatch: model has " +
                            std::to_string(model.cfg.modalities.size()) +
                            " modalities, dataset has " + std::to_string(ds.schemas.size()));
        for (std::size_t m = 0; m < ds.schemas.size(); ++m)
            if (model.cfg.modalities[m].schema.name != ds.schemas[m].name ||
                model.cfg.modalities[m].schema.raw_dim() != ds.schemas[m].raw_dim())
                throw DataError("checkpoint/schema mismatch for modality '" +
                                ds.schemas[m].name + "'");
        std::size_t excluded = 0;
        const auto metrics =
            evaluate_model(model, split.test, samples, paper_compat, &excluded);
        report.seeds[std::to_string(seed)] = metrics;
        report.n_excluded_g_zero += excluded;
        SeedMetrics sm;
        sm.seed = seed;
        for (const auto& m : metrics) {
            sm.c_index.push_back(m.c_index);
            sm.ibs.push_back(m.ibs);
        }
        per_seed.push_back(std::move(sm));
        log_info("seed " + std::to_string(seed) + " evaluated, CI-IBS = " +
                 fmt_num(per_seed.back().ci_minus_ibs()));
    }
    if (per_seed.size() >= 3) {
        const AggregateResult agg = aggregate_seeds(per_seed);
        for (std::size_t r = 0; r < agg.c_index.size(); ++r)
            report.per_risk.push_back({static_cast<int>(r) + 1, agg.c_index[r].mean,
                                       agg.ibs[r].mean});
    } else {
        // fewer than 3 seeds: plain mean over what we have
        const std::size_t nr = per_seed[0].c_index.size();
        for (std::size_t r = 0; r < nr; ++r) {
            double c = 0.0, b = 0.0;
            for (const auto& s : per_seed) {
                c += s.c_index[r];
                b += s.ibs[r];
            }
            report.per_risk.push_back({static_cast<int>(r) + 1,
                                       c / per_seed.size(), b / per_seed.size()});
        }
    }
    return report;
}

int cmd_evaluate(const fs::path& config_path, const fs::path& out_dir, int samples,
                 bool samples_given, bool paper_compat) {
    const json j = load_json(config_path);
    RunConfig rc = parse_run_config(j, config_path.parent_path());
    const int n_samples = samples_given ? samples : rc.samples;
    const EvalReport report = evaluate_run(rc, out_dir, n_samples, paper_compat);
    atomic_write(out_dir / "metrics.json", eval_report_to_json(report).dump(2) + "\n");
    std::ostringstream csv;
    csv.precision(17);
    csv << "risk,c_index,ibs\n";
    for (const auto& m : report.per_risk)
        csv << m.risk << "," << m.c_index << "," << m.ibs << "\n";
    atomic_write(out_dir / "metrics.csv", csv.str());
    std::cout << "ci_minus_ibs " << fmt_num(report.ci_minus_ibs()) << "\n";
    return 0;
}

// ---- gridsearch ----

int cmd_gridsearch(const fs::path& config_path, const fs::path& out_dir, int jobs,
                   double alpha, bool paper_compat) {
    const json j = load_json(config_path);
    RunConfig base = parse_run_config(j, config_path.parent_path());
    if (base.seeds.size() < 3)
        throw DataError("gridsearch selection protocol needs at least 3 seeds, got " +
                        std::to_string(base.seeds.size()));
    if (!j.contains("grid") || j["grid"].empty())
        throw DataError("gridsearch: config needs a nonempty 'grid' array");
    if (jobs < 1)
        throw DataError("gridsearch: --jobs must be >= 1");

    struct GridEntry {
        std::string id;
        RunConfig rc;
    };
    std::vector<GridEntry> entries;
    for (const auto& g : j["grid"]) {
        GridEntry e;
        e.id = g.at("id").get<std::string>();
        e.rc = base;
        if (g.contains("modalities")) {
            e.rc.modality_overrides.clear();
            for (const auto& m : g["modalities"]) {
                ModalityConfig mc;
                mc.latent_dim = m.value("latent_dim", std::size_t{5});
                mc.hidden = m.value("hidden", std::vector<std::size_t>{50});
                e.rc.modality_overrides.emplace_back(m.at("name").get<std::string>(), mc);
            }
        }
        entries.push_back(std::move(e));
    }

    Dataset ds = load_dataset(base.manifest);
    const std::uint64_t master = j.value("seed", std::uint64_t{1});

    std::vector<ConfigResult> results(entries.size());
    std::vector<char> ok(entries.size(), 0);
    std::vector<std::string> failures(entries.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t ci = next.fetch_add(1);
            if (ci >= entries.size()) return;
            const GridEntry& e = entries[ci];
            try {
                std::vector<SeedMetrics> per_seed;
                for (std::size_t si = 0; si < base.seeds.size(); ++si) {
                    const std::uint64_t eff_seed = Rng::derive(master, ci, si).next_u64();
                    const fs::path seed_dir = out_dir / ("config_" + e.id) /
                                              ("seed_" + std::to_string(base.seeds[si]));
                    train_one_seed(e.rc, ds, eff_seed, seed_dir);
                    SamvaeModel model = SamvaeModel::from_json(load_json(seed_dir / "model.ckpt"));
                    Split split = split_dataset(ds.records, e.rc.test_fraction, e.rc.split_seed);
                    std::size_t excluded = 0;
                    const auto metrics = evaluate_model(model, split.test, e.rc.samples,
                                                        paper_compat, &excluded);
                    SeedMetrics sm;
                    sm.seed = base.seeds[si];
                    for (const auto& m : metrics) {
                        sm.c_index.push_back(m.c_index);
                        sm.ibs.push_back(m.ibs);
                    }
                    per_seed.push_back(std::move(sm));
                }
                const AggregateResult agg = aggregate_seeds(per_seed);
                ConfigResult cr;
                cr.id = e.id;
                cr.c_index = agg.c_index;
                cr.ibs = agg.ibs;
                cr.ci_minus_ibs = agg.ci_minus_ibs;
                results[ci] = std::move(cr);
                ok[ci] = 1;
                log_info("config " + e.id + " done, CI-IBS = " + fmt_num(agg.ci_minus_ibs));
            } catch (const std::exception& ex) {
                failures[ci] = ex.what();
                log_at(LogLevel::error, "config " + e.id + " failed: " + ex.what());
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                                        entries.size());
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::vector<ConfigResult> surviving;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (ok[i]) surviving.push_back(results[i]);
    if (surviving.empty())
        throw NumericalError("gridsearch: every configuration failed");

    const SelectionResult sel = select_configuration(surviving, alpha);
    atomic_write(out_dir / "audit.csv", audit_to_csv(sel.audit));
    json winner;
    winner["winner"] = sel.winner;
    json fails = json::object();
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (!ok[i]) fails[entries[i].id] = failures[i];
    winner["failures"] = fails;
    atomic_write(out_dir / "winner.json", winner.dump(2) + "\n");
    std::cout << "winner " << sel.winner << "\n";
    return 0;
}

// ---- curves ----

int cmd_curves(const fs::path& config_path, const fs::path& out_dir,
               const std::string& patient, int samples, bool samples_given, bool svg,
               std::uint64_t seed_override, bool seed_given) {
    const json j = load_json(config_path);
    RunConfig rc = parse_run_config(j, config_path.parent_path());
    const int n_samples = samples_given ? samples : rc.samples;
    const std::uint64_t seed = seed_given ? seed_override : rc.seeds.at(0);
    const fs::path ckpt = out_dir / ("seed_" + std::to_string(seed)) / "model.ckpt";
    if (!fs::exists(ckpt))
        throw DataError("missing checkpoint: " + ckpt.string());
    SamvaeModel model = SamvaeModel::from_json(load_json(ckpt));

    Dataset ds = load_dataset(rc.manifest);
    Split split = split_dataset(ds.records, rc.test_fraction, rc.split_seed);
    const std::vector<PatientRecord>& test = split.test;

    std::vector<double> times;
    std::vector<int> events;
    for (const auto& r : test) {
        times.push_back(r.time);
        events.push_back(r.event);
    }
    std::vector<double> grid = evaluation_grid(test);

    std::vector<const PatientRecord*> targets;
    if (patient == "population") {
        for (const auto& r : test) targets.push_back(&r);
    } else {
        for (const auto& r : test)
            if (r.id == patient) targets.push_back(&r);
        if (targets.empty()) {
            std::string avail;
            for (std::size_t i = 0; i < std::min<std::size_t>(test.size(), 20); ++i)
                avail += (i ? ", " : "") + test[i].id;
            throw DataError("unknown patient id '" + patient + "'; available (test split): " +
                            avail + (test.size() > 20 ? ", ..." : ""));
        }
    }

    const int K = model.cfg.num_risks;
    // per-target curves, then pointwise mean / percentile across everything
    auto summarize = [&](const std::vector<std::vector<double>>& rows) {
        std::vector<double> mean(grid.size(), 0.0), p5(grid.size()), p95(grid.size());
        std::vector<double> col(rows.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            for (std::size_t r = 0; r < rows.size(); ++r) col[r] = rows[r][g];
            double s = 0.0;
            for (double v : col) s += v;
            mean[g] = s / static_cast<double>(col.size());
            std::sort(col.begin(), col.end());
            auto q = [&](double f) {
                if (col.size() == 1) return col[0];
                const double pos = f * static_cast<double>(col.size() - 1);
                const std::size_t lo = static_cast<std::size_t>(pos);
                const std::size_t hi = std::min(col.size() - 1, lo + 1);
                return col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
            };
            p5[g] = q(0.05);
            p95[g] = q(0.95);
        }
        return std::make_tuple(mean, p5, p95);
    };

    if (K == 1) {
        std::vector<std::vector<double>> all_traj;
        for (const auto* rec : targets) {
            SurvivalCurves sc = model.predict_survival_curve(*rec, grid, n_samples);
            for (auto& t : sc.trajectories) all_traj.push_back(std::move(t));
        }
        auto [mean, p5, p95] = summarize(all_traj);
        const StepFunction km = kaplan_meier(times, events, KmTarget::event);
        std::ostringstream csv;
        csv.precision(17);
        csv << "time,model_mean,model_p5,model_p95,km\n";
        for (std::size_t g = 0; g < grid.size(); ++g)
            csv << grid[g] << "," << mean[g] << "," << p5[g] << "," << p95[g] << ","
                << km(grid[g]) << "\n";
        const std::string stem = patient == "population" ? "population" : patient;
        atomic_write(out_dir / ("curves_" + stem + ".csv"), csv.str());
        if (svg) {
            SvgChart chart(0.0, grid.back(), 0.0, 1.0, "time", "S(t)");
            chart.add_band(grid, p5, p95, "steelblue");
            chart.add_line(grid, mean, "steelblue");
            std::vector<double> km_vals;
            for (double t : grid) km_vals.push_back(km(t));
            chart.add_line(grid, km_vals, "black", true);
            chart.add_legend_entry("model", "steelblue");
            chart.add_legend_entry("KM", "black");
            atomic_write(out_dir / ("curves_" + stem + ".svg"), chart.render());
        }
    } else {
        const auto aj = aalen_johansen(times, events, K);
        const std::string stem = patient == "population" ? "population" : patient;
        for (int k = 1; k <= K; ++k) {
            std::vector<std::vector<double>> rows;
            Rng rng = Rng::derive(1234, 0xc3, static_cast<std::uint64_t>(k));
            for (const auto* rec : targets) {
                const int draws = std::max(1, n_samples);
                for (int s = 0; s < draws; ++s) {
                    NoiseBatch eps = n_samples == 0 ? model.zero_noise(1)
                                                    : model.draw_noise(1, rng);
                    const auto rp = model.risk_params_for(*rec, &eps);
                    std::vector<double> row;
                    row.reserve(grid.size());
                    for (double t : grid)
                        row.push_back(
                            weibull_terms(rp.weibull[static_cast<std::size_t>(k - 1)],
                                          t / model.time_scale)
                                .cdf *
                            rp.probs[static_cast<std::size_t>(k - 1)]);
                    rows.push_back(std::move(row));
                }
            }
            auto [mean, p5, p95] = summarize(rows);
            std::ostringstream csv;
            csv.precision(17);
            csv << "time,model_mean,model_p5,model_p95,aj\n";
            for (std::size_t g = 0; g < grid.size(); ++g)
                csv << grid[g] << "," << mean[g] << "," << p5[g] << "," << p95[g] << ","
                    << aj[static_cast<std::size_t>(k - 1)](grid[g]) << "\n";
            atomic_write(out_dir / ("cif_risk" + std::to_string(k) + "_" + stem + ".csv"),
                         csv.str());
            if (svg) {
                SvgChart chart(0.0, grid.back(), 0.0, 1.0, "time",
                               "CIF_" + std::to_string(k));
                chart.add_band(grid, p5, p95, "firebrick");
                chart.add_line(grid, mean, "firebrick");
                std::vector<double> aj_vals;
                for (double t : grid) aj_vals.push_back(aj[static_cast<std::size_t>(k - 1)](t));
                chart.add_line(grid, aj_vals, "black", true);
                chart.add_legend_entry("model", "firebrick");
                chart.add_legend_entry("AJ", "black");
                atomic_write(out_dir / ("cif_risk" + std::to_string(k) + "_" + stem + ".svg"),
                             chart.render());
            }
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    init_logging();
    CLI::App app{"survfuse: multimodal parametric survival analysis"};
    app.require_subcommand(1);

    std::string config, out = ".", patient = "population";
    std::vector<std::uint64_t> seeds;
    std::uint64_t seed = 0;
    int jobs = 1, samples = 100;
    bool svg = false, paper_compat = false, select = false;
    double alpha = 0.01;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic cohort");
    sim->add_option("--config", config, "simulation config JSON")->required();
    sim->add_option("--out", out, "output directory")->required();
    auto* sim_seed = sim->add_option("--seed", seed, "override the config seed");

    auto* tr = app.add_subcommand("train", "train one model per seed");
    tr->add_option("--config", config, "run config JSON")->required();
    tr->add_option("--out", out, "output directory")->required();
    tr->add_option("--seeds", seeds, "override the config seeds");
    tr->add_flag("--select", select, "enforce the selection protocol seed minimum");

    auto* ev = app.add_subcommand("evaluate", "evaluate trained checkpoints");
    ev->add_option("--config", config, "run config JSON")->required();
    ev->add_option("--out", out, "directory holding seed_*/model.ckpt")->required();
    auto* ev_samples = ev->add_option("--samples", samples, "Monte-Carlo samples");
    ev->add_flag("--paper-compat", paper_compat, "paper-literal metric forms");

    auto* gs = app.add_subcommand("gridsearch", "train and select across a grid");
    gs->add_option("--config", config, "grid config JSON")->required();
    gs->add_option("--out", out, "output directory")->required();
    gs->add_option("--jobs", jobs, "max concurrent configurations");
    gs->add_option("--alpha", alpha, "selection threshold");
    gs->add_flag("--paper-compat", paper_compat, "paper-literal metric forms");

    auto* cv = app.add_subcommand("curves", "export survival / CIF curves");
    cv->add_option("--config", config, "run config JSON")->required();
    cv->add_option("--out", out, "directory holding seed_*/model.ckpt")->required();
    cv->add_option("--patient", patient, "patient id or 'population'");
    auto* cv_samples = cv->add_option("--samples", samples, "trajectories per patient");
    cv->add_flag("--svg", svg, "also write SVG plots");
    auto* cv_seed = cv->add_option("--seed", seed, "which seed's checkpoint to use");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(config, out, seed, sim_seed->count() > 0);
        if (tr->parsed())
            return cmd_train(config, out, seeds, select);
        if (ev->parsed())
            return cmd_evaluate(config, out, samples, ev_samples->count() > 0, paper_compat);
        if (gs->parsed())
            return cmd_gridsearch(config, out, jobs, alpha, paper_compat);
        if (cv->parsed())
            return cmd_curves(config, out, patient, samples, cv_samples->count() > 0, svg,
                              seed, cv_seed->count() > 0);
    } catch (const NumericalError& e) {
        log_at(LogLevel::error, e.what());
        return 3;
    } catch (const std::exception& e) {
        log_at(LogLevel::error, e.what());
        return 2;
    }
    return 2;
}
