#ifndef SURVFUSE_SAMVAE_HPP
#define SURVFUSE_SAMVAE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "survfuse/autodiff.hpp"
#include "survfuse/data.hpp"
#include "survfuse/errors.hpp"
#include "survfuse/likelihoods.hpp"
#include "survfuse/metrics.hpp"
#include "survfuse/rng.hpp"

namespace survfuse {

struct ModalityConfig {
    ModalitySchema schema;
    std::vector<std::size_t> hidden; // MLP widths, or CNN channel counts for images
    std::size_t latent_dim = 2;

    void validate() const {
        if (latent_dim < 1)
            throw ContractError("modality '" + schema.name + "': latent dim must be >= 1");
        if (hidden.empty())
            throw ContractError("modality '" + schema.name + "': hidden sizes must be nonempty");
    }
};

struct SamvaeConfig {
    std::vector<ModalityConfig> modalities;
    int num_risks = 1;
    std::size_t time_head_hidden = 32;
    std::size_t classifier_hidden = 32;

    std::size_t total_latent_dim() const {
        std::size_t d = 0;
        for (const auto& m : modalities) d += m.latent_dim;
        return d;
    }
};

// Featurized minibatch ready for the networks.
struct ModelBatch {
    std::vector<Tensor> inputs;        // per modality, [n x encoder_input_dim]
    std::vector<Tensor> tabular_targets; // per modality, [n x ncols] (empty for images)
    std::vector<double> times;         // rescaled
    std::vector<int> events;
    std::size_t n = 0;
};

// Per-modality standard-normal draws, [n x latent_dim_m] each.
using NoiseBatch = std::vector<Tensor>;

struct LatentSample {
    std::vector<ad::Var> mu, log_var, eps, z_m;
    ad::Var z; // concatenation of all z_m
};

struct LossBreakdown {
    ad::Var total_node;
    double total = 0.0;
    double kl = 0.0;
    double time_ll = 0.0;       // single risk
    double event_time_ll = 0.0; // competing risks, uncensored term
    double classifier_ll = 0.0;
    double censor_ll = 0.0;
    std::vector<double> recon_ll; // per modality
};

struct TrainConfig {
    int epochs = 100;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::uint64_t seed = 1;
};

struct EpochLog {
    int epoch = 0;
    double total = 0.0, kl = 0.0, time_ll = 0.0, recon_ll = 0.0;
    double classifier_ll = 0.0, censor_ll = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(17);
        os << "epoch,total,kl,time_ll,recon_ll,classifier_ll,censor_ll\n";
        for (const auto& e : epochs)
            os << e.epoch << "," << e.total << "," << e.kl << "," << e.time_ll << ","
               << e.recon_ll << "," << e.classifier_ll << "," << e.censor_ll << "\n";
        return os.str();
    }
};

struct SurvivalCurves {
    std::vector<double> grid;                      // original time units
    std::vector<std::vector<double>> trajectories; // sample x grid
    std::vector<double> mean, p5, p95;
};

class SamvaeModel {
public:
    SamvaeConfig cfg;
    ad::ParamStore store;
    double time_scale = 1.0;
    static constexpr int kCheckpointVersion = 1;

    SamvaeModel(SamvaeConfig config, std::uint64_t init_seed)
        : cfg(std::move(config)) {
        if (cfg.num_risks < 1)
            throw ContractError("SamvaeModel: num_risks must be >= 1");
        if (cfg.modalities.empty())
            throw ContractError("SamvaeModel: need at least one modality");
        for (const auto& m : cfg.modalities) m.validate();
        Rng rng = Rng::derive(init_seed, 0x1417);
        for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
            build_encoder(m, rng);
            build_decoder(m, rng);
        }
        const std::size_t zdim = cfg.total_latent_dim();
        for (int k = 0; k < cfg.num_risks; ++k) {
            const std::string p = "head" + std::to_string(k);
            add_dense(p + ".l0", zdim, cfg.time_head_hidden, rng);
            add_dense(p + ".out", cfg.time_head_hidden, 2, rng);
        }
        if (cfg.num_risks > 1) {
            add_dense("clf.l0", zdim, cfg.classifier_hidden, rng);
            add_dense("clf.out", cfg.classifier_hidden,
                      static_cast<std::size_t>(cfg.num_risks), rng);
        }
    }

    // M encoders + M decoders + K time heads + classifier (competing risks only).
    int network_count() const {
        const int m = static_cast<int>(cfg.modalities.size());
        return 2 * m + cfg.num_risks + (cfg.num_risks > 1 ? 1 : 0);
    }

    // ---- batch building ----

    ModelBatch make_batch(const std::vector<const PatientRecord*>& records) const {
        ModelBatch b;
        b.n = records.size();
        for (const auto& mc : cfg.modalities) {
            const ModalitySchema& schema = mc.schema;
            const std::size_t in_dim = schema.encoder_input_dim();
            Tensor input = Tensor::zeros({b.n, in_dim});
            for (std::size_t i = 0; i < b.n; ++i) {
                const auto row = schema.featurize(*records[i]);
                std::copy(row.begin(), row.end(), input.values.begin() +
                                                      static_cast<std::ptrdiff_t>(i * in_dim));
            }
            b.inputs.push_back(std::move(input));
            if (schema.kind == ModalityKind::tabular) {
                Tensor tgt = Tensor::zeros({b.n, schema.columns.size()});
                for (std::size_t i = 0; i < b.n; ++i) {
                    const auto& raw = records[i]->features.at(schema.name);
                    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
                        const ColumnSpec& col = schema.columns[c];
                        switch (col.likelihood.kind) {
                            case ColumnKind::gaussian:
                                tgt.at(i, c) = (raw[c] - col.norm_mean) /
                                               std::max(col.norm_std, 1e-12);
                                break;
                            case ColumnKind::categorical:
                                tgt.at(i, c) = col.level_index(raw[c]);
                                break;
                            default:
                                tgt.at(i, c) = raw[c];
                        }
                    }
                }
                b.tabular_targets.push_back(std::move(tgt));
            } else {
                b.tabular_targets.emplace_back();
            }
        }
        for (const auto* r : records) {
            if (r->event < 0 || r->event > cfg.num_risks)
                throw DataError("event label " + std::to_string(r->event) +
                                " exceeds K=" + std::to_string(cfg.num_risks) +
                                " for patient " + r->id);
            b.times.push_back(r->time / time_scale);
            b.events.push_back(r->event);
        }
        return b;
    }

    ModelBatch make_batch(const std::vector<PatientRecord>& records) const {
        std::vector<const PatientRecord*> ptrs;
        ptrs.reserve(records.size());
        for (const auto& r : records) ptrs.push_back(&r);
        return make_batch(ptrs);
    }

    NoiseBatch draw_noise(std::size_t n, Rng& rng) const {
        NoiseBatch noise;
        for (const auto& mc : cfg.modalities) {
            Tensor eps = Tensor::zeros({n, mc.latent_dim});
            for (auto& v : eps.values) v = rng.normal();
            noise.push_back(std::move(eps));
        }
        return noise;
    }

    NoiseBatch zero_noise(std::size_t n) const {
        NoiseBatch noise;
        for (const auto& mc : cfg.modalities)
            noise.push_back(Tensor::zeros({n, mc.latent_dim}));
        return noise;
    }

    // ---- forward ----

    LatentSample encode_and_sample(ad::Tape& tape, const ModelBatch& batch,
                                   const NoiseBatch& noise) {
        if (noise.size() != cfg.modalities.size())
            throw ContractError("encode_and_sample: one noise block per modality required");
        LatentSample out;
        for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
            const ModalityConfig& mc = cfg.modalities[m];
            ad::Var h = ad::constant(tape, batch.inputs[m]);
            ad::Var enc_out = mc.schema.kind == ModalityKind::tabular
                                  ? forward_mlp(tape, h, "m" + std::to_string(m) + ".enc",
                                                mc.hidden.size())
                                  : forward_conv_encoder(tape, h, m);
            const std::size_t L = mc.latent_dim;
            ad::Var mu = ad::slice_cols(enc_out, 0, L);
            ad::Var lv = ad::clamp(ad::slice_cols(enc_out, L, 2 * L), kLogVarMin, kLogVarMax);
            ad::Var eps = ad::constant(tape, noise[m]);
            ad::Var sigma = ad::exp_op(ad::scale(lv, 0.5));
            ad::Var z_m = ad::add(mu, ad::mul(sigma, eps));
            out.mu.push_back(mu);
            out.log_var.push_back(lv);
            out.eps.push_back(eps);
            out.z_m.push_back(z_m);
        }
        out.z = ad::concat_cols(out.z_m);
        return out;
    }

    ad::Var decode_modality(ad::Tape& tape, ad::Var z, std::size_t m) {
        return forward_mlp(tape, z, "m" + std::to_string(m) + ".dec",
                           cfg.modalities[m].hidden.size());
    }

    // Weibull parameter columns for head k: {shape [n x 1], scale [n x 1]}.
    std::pair<ad::Var, ad::Var> time_head(ad::Tape& tape, ad::Var z, int k) {
        const std::string p = "head" + std::to_string(k);
        ad::Var h = ad::dense_forward(z, ad::param(tape, store, p + ".l0.W"),
                                      ad::param(tape, store, p + ".l0.b"),
                                      ad::Activation::relu);
        ad::Var out = ad::dense_forward(h, ad::param(tape, store, p + ".out.W"),
                                        ad::param(tape, store, p + ".out.b"),
                                        ad::Activation::identity);
        ad::Var pos = ad::add_const(ad::softplus(out), 1e-6);
        return {ad::slice_cols(pos, 0, 1), ad::slice_cols(pos, 1, 2)};
    }

    ad::Var classifier_probs(ad::Tape& tape, ad::Var z) {
        ad::Var h = ad::dense_forward(z, ad::param(tape, store, "clf.l0.W"),
                                      ad::param(tape, store, "clf.l0.b"),
                                      ad::Activation::relu);
        return ad::dense_forward(h, ad::param(tape, store, "clf.out.W"),
                                 ad::param(tape, store, "clf.out.b"),
                                 ad::Activation::softmax);
    }

    // ---- losses ----

    LossBreakdown loss_single_risk(ad::Tape& tape, const ModelBatch& batch,
                                   const NoiseBatch& noise) {
        if (cfg.num_risks != 1)
            throw ContractError("loss_single_risk requires K=1; use loss_competing_risks");
        if (batch.n == 0)
            throw DataError("loss_single_risk: empty batch");
        LatentSample lat = encode_and_sample(tape, batch, noise);
        ad::Var kl = kl_term(tape, lat);
        auto [k_col, lam_col] = time_head(tape, lat.z, 0);
        auto tt = time_terms(tape, k_col, lam_col, batch.times);
        // event indicator mask
        Tensor ev = Tensor::zeros({batch.n, 1});
        for (std::size_t i = 0; i < batch.n; ++i)
            ev.values[i] = batch.events[i] != 0 ? 1.0 : 0.0;
        ad::Var time_ll = ad::add(ad::mul_const(tt.log_hazard, ev), tt.log_survival);
        std::vector<ad::Var> recon = reconstruction_terms(tape, lat.z, batch);
        ad::Var recon_sum = recon[0];
        for (std::size_t m = 1; m < recon.size(); ++m) recon_sum = ad::add(recon_sum, recon[m]);
        ad::Var per_patient = ad::add(ad::sub(time_ll, kl), recon_sum);
        ad::Var total = ad::scale(ad::sum_all(per_patient), -1.0 / static_cast<double>(batch.n));

        LossBreakdown out;
        out.total_node = total;
        out.total = total.val().values[0];
        out.kl = mean_of(kl);
        out.time_ll = mean_of(time_ll);
        for (const auto& r : recon) out.recon_ll.push_back(mean_of(r));
        return out;
    }

    LossBreakdown loss_competing_risks(ad::Tape& tape, const ModelBatch& batch,
                                       const NoiseBatch& noise) {
        if (cfg.num_risks < 2)
            throw ContractError("loss_competing_risks requires K>=2; use loss_single_risk");
        if (batch.n == 0)
            throw DataError("loss_competing_risks: empty batch");
        const int K = cfg.num_risks;
        LatentSample lat = encode_and_sample(tape, batch, noise);
        ad::Var kl = kl_term(tape, lat);
        ad::Var probs = classifier_probs(tape, lat.z); // [n x K]
        ad::Var log_probs = ad::log_op(ad::clamp(probs, 1e-12, 1.0));

        Tensor ones = Tensor::full({batch.n, 1}, 1.0);
        ad::Var event_terms{};
        ad::Var classifier_terms{};
        ad::Var sum_cif{};
        bool first = true;
        for (int k = 0; k < K; ++k) {
            auto [k_col, lam_col] = time_head(tape, lat.z, k);
            auto tt = time_terms(tape, k_col, lam_col, batch.times);
            Tensor mask = Tensor::zeros({batch.n, 1});
            for (std::size_t i = 0; i < batch.n; ++i)
                mask.values[i] = batch.events[i] == k + 1 ? 1.0 : 0.0;
            ad::Var ev_k = ad::mul_const(ad::add(tt.log_hazard, tt.log_survival), mask);
            ad::Var clf_k = ad::mul_const(
                ad::slice_cols(log_probs, static_cast<std::size_t>(k),
                               static_cast<std::size_t>(k) + 1),
                mask);
            ad::Var cdf_k = ad::sub(ad::constant(tape, ones), ad::exp_op(tt.log_survival));
            ad::Var cif_k = ad::mul(cdf_k, ad::slice_cols(probs, static_cast<std::size_t>(k),
                                                          static_cast<std::size_t>(k) + 1));
            if (first) {
                event_terms = ev_k;
                classifier_terms = clf_k;
                sum_cif = cif_k;
                first = false;
            } else {
                event_terms = ad::add(event_terms, ev_k);
                classifier_terms = ad::add(classifier_terms, clf_k);
                sum_cif = ad::add(sum_cif, cif_k);
            }
        }
        Tensor censored = Tensor::zeros({batch.n, 1});
        for (std::size_t i = 0; i < batch.n; ++i)
            censored.values[i] = batch.events[i] == 0 ? 1.0 : 0.0;
        ad::Var censor_arg =
            ad::clamp(ad::sub(ad::constant(tape, ones), sum_cif), 1e-12, 1.0 - 1e-12);
        ad::Var censor_term = ad::mul_const(ad::log_op(censor_arg), censored);

        std::vector<ad::Var> recon = reconstruction_terms(tape, lat.z, batch);
        ad::Var recon_sum = recon[0];
        for (std::size_t m = 1; m < recon.size(); ++m) recon_sum = ad::add(recon_sum, recon[m]);

        ad::Var per_patient = ad::add(
            ad::add(ad::sub(event_terms, kl), ad::add(classifier_terms, censor_term)),
            recon_sum);
        ad::Var total = ad::scale(ad::sum_all(per_patient), -1.0 / static_cast<double>(batch.n));

        LossBreakdown out;
        out.total_node = total;
        out.total = total.val().values[0];
        out.kl = mean_of(kl);
        out.event_time_ll = mean_of(event_terms);
        out.classifier_ll = mean_of(classifier_terms);
        out.censor_ll = mean_of(censor_term);
        for (const auto& r : recon) out.recon_ll.push_back(mean_of(r));
        return out;
    }

    // ---- training ----

    TrainLog train(const std::vector<PatientRecord>& train_set, const TrainConfig& tc) {
        if (train_set.empty())
            throw DataError("train: empty dataset");
        if (tc.epochs < 1 || tc.batch_size < 1)
            throw ContractError("train: epochs and batch_size must be >= 1");
        if (tc.lr < 0.0)
            throw ContractError("train: negative learning rate");
        double mean_t = 0.0;
        for (const auto& r : train_set) mean_t += r.time;
        time_scale = mean_t / static_cast<double>(train_set.size());
        if (!(time_scale > 0.0))
            throw DataError("train: nonpositive mean event time");

        TrainLog log;
        for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
            // common random numbers across epochs: with lr = 0 the loss log
            // is exactly constant
            Rng shuffle_rng = Rng::derive(tc.seed, 0x5f1e);
            Rng noise_rng = Rng::derive(tc.seed, 0xe125);
            std::vector<std::size_t> order(train_set.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            shuffle_rng.shuffle(order);
            EpochLog el;
            el.epoch = epoch;
            double weight = 0.0;
            for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
                const std::size_t end = std::min(order.size(), start + tc.batch_size);
                std::vector<const PatientRecord*> chunk;
                for (std::size_t i = start; i < end; ++i) chunk.push_back(&train_set[order[i]]);
                ModelBatch batch = make_batch(chunk);
                NoiseBatch noise = draw_noise(batch.n, noise_rng);
                ad::Tape tape;
                LossBreakdown lb = cfg.num_risks == 1
                                       ? loss_single_risk(tape, batch, noise)
                                       : loss_competing_risks(tape, batch, noise);
                const double w = static_cast<double>(batch.n);
                el.total += lb.total * w;
                el.kl += lb.kl * w;
                el.time_ll += (cfg.num_risks == 1 ? lb.time_ll : lb.event_time_ll) * w;
                el.classifier_ll += lb.classifier_ll * w;
                el.censor_ll += lb.censor_ll * w;
                for (double r : lb.recon_ll) el.recon_ll += r * w;
                weight += w;
                if (tc.lr > 0.0) {
                    tape.backward(lb.total_node.id);
                    ad::adam_step(store, tc.lr);
                }
            }
            el.total /= weight;
            el.kl /= weight;
            el.time_ll /= weight;
            el.recon_ll /= weight;
            el.classifier_ll /= weight;
            el.censor_ll /= weight;
            if (!std::isfinite(el.total))
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
            log.epochs.push_back(el);
        }
        return log;
    }

    // ---- prediction ----

    // Weibull parameters per risk plus classifier probabilities for one
    // latent draw (eps = nullptr means posterior means).
    struct RiskParams {
        std::vector<WeibullParams> weibull; // per risk
        std::vector<double> probs;          // classifier, length K (single risk: {1})
    };

    RiskParams risk_params_for(const PatientRecord& record, const NoiseBatch* eps) {
        std::vector<const PatientRecord*> one{&record};
        ModelBatch batch = make_batch(one);
        NoiseBatch noise = eps ? *eps : zero_noise(1);
        ad::Tape tape;
        tape.tracking = false;
        LatentSample lat = encode_and_sample(tape, batch, noise);
        RiskParams out;
        for (int k = 0; k < cfg.num_risks; ++k) {
            auto [kc, lc] = time_head(tape, lat.z, k);
            out.weibull.push_back({kc.val().values[0], lc.val().values[0]});
        }
        if (cfg.num_risks > 1) {
            ad::Var p = classifier_probs(tape, lat.z);
            out.probs.assign(p.val().values.begin(), p.val().values.end());
        } else {
            out.probs = {1.0};
        }
        return out;
    }

    // Monte-Carlo CIF estimate at time t (original units). num_samples = 0
    // uses the posterior means deterministically.
    std::vector<double> predict_cif(const PatientRecord& record, double t, int num_samples,
                                    std::uint64_t sample_seed = 1234) {
        if (t < 0.0)
            throw DomainError("predict_cif: t must be nonnegative");
        if (num_samples < 0)
            throw ContractError("predict_cif: num_samples must be >= 0");
        const double ts = t / time_scale;
        std::vector<double> acc(static_cast<std::size_t>(cfg.num_risks), 0.0);
        const int draws = std::max(1, num_samples);
        Rng rng = Rng::derive(sample_seed, 0xc1f);
        for (int s = 0; s < draws; ++s) {
            NoiseBatch eps = num_samples == 0 ? zero_noise(1) : draw_noise(1, rng);
            const RiskParams rp = risk_params_for(record, &eps);
            for (int k = 0; k < cfg.num_risks; ++k)
                acc[static_cast<std::size_t>(k)] +=
                    weibull_terms(rp.weibull[static_cast<std::size_t>(k)], ts).cdf *
                    rp.probs[static_cast<std::size_t>(k)];
        }
        for (auto& v : acc) v /= static_cast<double>(draws);
        return acc;
    }

    // Per-trajectory survival curves with mean and 5th/95th percentile band.
    SurvivalCurves predict_survival_curve(const PatientRecord& record,
                                          const std::vector<double>& grid, int num_samples,
                                          std::uint64_t sample_seed = 1234) {
        if (grid.empty() || grid.front() != 0.0)
            throw ContractError("predict_survival_curve: grid must start at 0");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw ContractError("predict_survival_curve: grid must be sorted ascending");
        SurvivalCurves out;
        out.grid = grid;
        const int draws = std::max(1, num_samples);
        Rng rng = Rng::derive(sample_seed, 0xcu);
        for (int s = 0; s < draws; ++s) {
            NoiseBatch eps = num_samples == 0 ? zero_noise(1) : draw_noise(1, rng);
            const RiskParams rp = risk_params_for(record, &eps);
            std::vector<double> traj;
            traj.reserve(grid.size());
            for (double t : grid) {
                double cif_sum = 0.0;
                for (int k = 0; k < cfg.num_risks; ++k)
                    cif_sum += weibull_terms(rp.weibull[static_cast<std::size_t>(k)],
                                             t / time_scale)
                                   .cdf *
                               rp.probs[static_cast<std::size_t>(k)];
                traj.push_back(1.0 - cif_sum);
            }
            out.trajectories.push_back(std::move(traj));
        }
        const std::size_t g = grid.size();
        out.mean.assign(g, 0.0);
        out.p5.assign(g, 0.0);
        out.p95.assign(g, 0.0);
        std::vector<double> col(out.trajectories.size());
        for (std::size_t j = 0; j < g; ++j) {
            for (std::size_t s = 0; s < out.trajectories.size(); ++s)
                col[s] = out.trajectories[s][j];
            out.mean[j] = std::accumulate(col.begin(), col.end(), 0.0) /
                          static_cast<double>(col.size());
            std::sort(col.begin(), col.end());
            out.p5[j] = quantile_sorted(col, 0.05);
            out.p95[j] = quantile_sorted(col, 0.95);
        }
        return out;
    }

    // ---- checkpoint ----

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = kCheckpointVersion;
        j["time_scale"] = time_scale;
        j["k"] = cfg.num_risks;
        j["time_head_hidden"] = cfg.time_head_hidden;
        j["classifier_hidden"] = cfg.classifier_hidden;
        j["modalities"] = nlohmann::json::array();
        for (const auto& mc : cfg.modalities) {
            nlohmann::json m;
            m["name"] = mc.schema.name;
            m["kind"] = mc.schema.kind == ModalityKind::image ? "image" : "tabular";
            m["latent_dim"] = mc.latent_dim;
            m["hidden"] = mc.hidden;
            if (mc.schema.kind == ModalityKind::image) {
                m["channels"] = mc.schema.channels;
                m["height"] = mc.schema.height;
                m["width"] = mc.schema.width;
            } else {
                m["columns"] = nlohmann::json::array();
                for (const auto& col : mc.schema.columns) {
                    nlohmann::json cj;
                    cj["name"] = col.name;
                    switch (col.likelihood.kind) {
                        case ColumnKind::gaussian: cj["kind"] = "gaussian"; break;
                        case ColumnKind::bernoulli: cj["kind"] = "bernoulli"; break;
                        case ColumnKind::categorical:
                            cj["kind"] = "categorical";
                            cj["levels"] = col.likelihood.levels;
                            cj["level_values"] = col.level_values;
                            break;
                        case ColumnKind::image_mse: cj["kind"] = "image_mse"; break;
                    }
                    cj["norm_mean"] = col.norm_mean;
                    cj["norm_std"] = col.norm_std;
                    m["columns"].push_back(std::move(cj));
                }
            }
            j["modalities"].push_back(std::move(m));
        }
        j["params"] = nlohmann::json::object();
        for (const auto& [name, e] : store.all())
            j["params"][name] = {{"shape", e.value.shape}, {"values", e.value.values}};
        return j;
    }

    static SamvaeModel from_json(const nlohmann::json& j) {
        if (!j.contains("version"))
            throw DataError("checkpoint: missing version field");
        if (j["version"].get<int>() != kCheckpointVersion)
            throw DataError("checkpoint: unsupported version " +
                            j["version"].dump());
        SamvaeConfig cfg;
        cfg.num_risks = j.at("k").get<int>();
        cfg.time_head_hidden = j.value("time_head_hidden", std::size_t{32});
        cfg.classifier_hidden = j.value("classifier_hidden", std::size_t{32});
        for (const auto& m : j.at("modalities")) {
            ModalityConfig mc;
            mc.schema.name = m.at("name").get<std::string>();
            mc.latent_dim = m.at("latent_dim").get<std::size_t>();
            mc.hidden = m.at("hidden").get<std::vector<std::size_t>>();
            if (m.at("kind").get<std::string>() == "image") {
                mc.schema.kind = ModalityKind::image;
                mc.schema.channels = m.at("channels").get<std::size_t>();
                mc.schema.height = m.at("height").get<std::size_t>();
                mc.schema.width = m.at("width").get<std::size_t>();
            } else {
                mc.schema.kind = ModalityKind::tabular;
                for (const auto& cj : m.at("columns")) {
                    ColumnSpec col;
                    col.name = cj.at("name").get<std::string>();
                    const std::string kind = cj.at("kind").get<std::string>();
                    if (kind == "gaussian") col.likelihood = ColumnLikelihood::gaussian();
                    else if (kind == "bernoulli") col.likelihood = ColumnLikelihood::bernoulli();
                    else if (kind == "categorical") {
                        col.likelihood =
                            ColumnLikelihood::categorical(cj.at("levels").get<int>());
                        col.level_values = cj.at("level_values").get<std::vector<double>>();
                    } else if (kind == "image_mse")
                        col.likelihood = ColumnLikelihood::image_mse();
                    else
                        throw DataError("checkpoint: unknown column kind " + kind);
                    col.norm_mean = cj.at("norm_mean").get<double>();
                    col.norm_std = cj.at("norm_std").get<double>();
                    mc.schema.columns.push_back(std::move(col));
                }
            }
            cfg.modalities.push_back(std::move(mc));
        }
        SamvaeModel model(std::move(cfg), 0);
        model.time_scale = j.at("time_scale").get<double>();
        for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it) {
            auto& e = model.store.entry(it.key());
            const auto shape = it.value().at("shape").get<std::vector<std::size_t>>();
            const auto values = it.value().at("values").get<std::vector<double>>();
            if (shape != e.value.shape)
                throw DataError("checkpoint: parameter shape mismatch for " + it.key());
            e.value.values = values;
        }
        return model;
    }

private:
    struct ConvStage {
        std::size_t in_c, out_c, kh, kw, h_in, w_in, h_conv, w_conv;
        bool pool;
        std::size_t h_out, w_out;
    };

    struct TimeTerms {
        ad::Var log_hazard;
        ad::Var log_survival;
    };

    static double mean_of(const ad::Var& col) {
        const Tensor& v = col.val();
        double s = 0.0;
        for (double x : v.values) s += x;
        return s / static_cast<double>(v.numel());
    }

    static double quantile_sorted(const std::vector<double>& sorted, double q) {
        if (sorted.size() == 1) return sorted[0];
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(sorted.size() - 1, lo + 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    }

    std::vector<ConvStage> plan_conv(const ModalitySchema& schema,
                                     const std::vector<std::size_t>& channels) const {
        std::vector<ConvStage> plan;
        std::size_t c = schema.channels, h = schema.height, w = schema.width;
        for (std::size_t f : channels) {
            ConvStage st;
            st.in_c = c;
            st.out_c = f;
            st.h_in = h;
            st.w_in = w;
            st.kh = std::min<std::size_t>(3, h);
            st.kw = std::min<std::size_t>(3, w);
            st.h_conv = h - st.kh + 1;
            st.w_conv = w - st.kw + 1;
            st.pool = st.h_conv >= 4 && st.w_conv >= 4;
            st.h_out = st.pool ? (st.h_conv - 2) / 2 + 1 : st.h_conv;
            st.w_out = st.pool ? (st.w_conv - 2) / 2 + 1 : st.w_conv;
            plan.push_back(st);
            c = f;
            h = st.h_out;
            w = st.w_out;
        }
        return plan;
    }

    void add_dense(const std::string& prefix, std::size_t fan_in, std::size_t fan_out,
                   Rng& rng) {
        store.add(prefix + ".W", ad::glorot_uniform(fan_in, fan_out, rng));
        store.add(prefix + ".b", Tensor::zeros({fan_out}));
    }

    void add_conv(const std::string& prefix, const ConvStage& st, Rng& rng) {
        const std::size_t fan_in = st.in_c * st.kh * st.kw;
        const std::size_t fan_out = st.out_c * st.kh * st.kw;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor k = Tensor::zeros({st.out_c, st.in_c, st.kh, st.kw});
        for (auto& x : k.values) x = rng.uniform(-limit, limit);
        store.add(prefix + ".K", std::move(k));
        store.add(prefix + ".b", Tensor::zeros({st.out_c}));
    }

    void build_encoder(std::size_t m, Rng& rng) {
        const ModalityConfig& mc = cfg.modalities[m];
        const std::string p = "m" + std::to_string(m) + ".enc";
        if (mc.schema.kind == ModalityKind::tabular) {
            std::size_t prev = mc.schema.encoder_input_dim();
            for (std::size_t l = 0; l < mc.hidden.size(); ++l) {
                add_dense(p + ".l" + std::to_string(l), prev, mc.hidden[l], rng);
                prev = mc.hidden[l];
            }
            add_dense(p + ".out", prev, 2 * mc.latent_dim, rng);
        } else {
            const auto plan = plan_conv(mc.schema, mc.hidden);
            for (std::size_t l = 0; l < plan.size(); ++l)
                add_conv(p + ".conv" + std::to_string(l), plan[l], rng);
            const ConvStage& last = plan.back();
            add_dense(p + ".out", last.out_c * last.h_out * last.w_out, 2 * mc.latent_dim,
                      rng);
        }
    }

    void build_decoder(std::size_t m, Rng& rng) {
        const ModalityConfig& mc = cfg.modalities[m];
        const std::string p = "m" + std::to_string(m) + ".dec";
        std::vector<std::size_t> widths(mc.hidden.rbegin(), mc.hidden.rend());
        std::size_t prev = cfg.total_latent_dim();
        for (std::size_t l = 0; l < widths.size(); ++l) {
            add_dense(p + ".l" + std::to_string(l), prev, widths[l], rng);
            prev = widths[l];
        }
        add_dense(p + ".out", prev, mc.schema.decoder_output_dim(), rng);
    }

    // Shared dense stack: hidden layers with relu, identity output layer.
    ad::Var forward_mlp(ad::Tape& tape, ad::Var h, const std::string& prefix,
                        std::size_t n_hidden) {
        for (std::size_t l = 0; l < n_hidden; ++l) {
            const std::string lp = prefix + ".l" + std::to_string(l);
            h = ad::dense_forward(h, ad::param(tape, store, lp + ".W"),
                                  ad::param(tape, store, lp + ".b"), ad::Activation::relu);
        }
        return ad::dense_forward(h, ad::param(tape, store, prefix + ".out.W"),
                                 ad::param(tape, store, prefix + ".out.b"),
                                 ad::Activation::identity);
    }

    ad::Var forward_conv_encoder(ad::Tape& tape, ad::Var flat_input, std::size_t m) {
        const ModalityConfig& mc = cfg.modalities[m];
        const std::string p = "m" + std::to_string(m) + ".enc";
        const auto plan = plan_conv(mc.schema, mc.hidden);
        const std::size_t n = flat_input.rows();
        ad::Var h = ad::reshape(flat_input,
                                {n, mc.schema.channels, mc.schema.height, mc.schema.width});
        for (std::size_t l = 0; l < plan.size(); ++l) {
            const std::string lp = p + ".conv" + std::to_string(l);
            h = ad::relu(ad::conv2d(h, ad::param(tape, store, lp + ".K"),
                                    ad::param(tape, store, lp + ".b"), 1));
            if (plan[l].pool) h = ad::avg_pool2d(h, 2, 2);
        }
        const ConvStage& last = plan.back();
        h = ad::reshape(h, {n, last.out_c * last.h_out * last.w_out});
        return ad::dense_forward(h, ad::param(tape, store, p + ".out.W"),
                                 ad::param(tape, store, p + ".out.b"),
                                 ad::Activation::identity);
    }

    ad::Var kl_term(ad::Tape& tape, const LatentSample& lat) {
        ad::Var kl{};
        bool first = true;
        for (std::size_t m = 0; m < lat.mu.size(); ++m) {
            // 0.5 * sum_d (mu^2 + exp(lv) - lv - 1)
            ad::Var inner = ad::add_const(
                ad::sub(ad::add(ad::square(lat.mu[m]), ad::exp_op(lat.log_var[m])),
                        lat.log_var[m]),
                -1.0);
            ad::Var term = ad::scale(ad::row_sum(inner), 0.5);
            kl = first ? term : ad::add(kl, term);
            first = false;
        }
        return kl;
    }

    TimeTerms time_terms(ad::Tape& tape, ad::Var k_col, ad::Var lam_col,
                         const std::vector<double>& times) {
        const std::size_t n = times.size();
        Tensor log_t = Tensor::zeros({n, 1});
        for (std::size_t i = 0; i < n; ++i) {
            if (times[i] < 0.0)
                throw DomainError("time_terms: negative time");
            log_t.values[i] = std::log(std::max(times[i], kTimeFloor));
        }
        ad::Var log_t_c = ad::constant(tape, log_t);
        ad::Var log_k = ad::log_op(k_col);
        ad::Var log_lam = ad::log_op(lam_col);
        ad::Var lt_minus_ll = ad::sub(log_t_c, log_lam);
        TimeTerms out;
        out.log_hazard = ad::add(ad::sub(log_k, log_lam),
                                 ad::mul(ad::add_const(k_col, -1.0), lt_minus_ll));
        out.log_survival = ad::neg(ad::exp_op(ad::mul(k_col, lt_minus_ll)));
        return out;
    }

    // Per-modality reconstruction log-likelihood columns [n x 1].
    std::vector<ad::Var> reconstruction_terms(ad::Tape& tape, ad::Var z,
                                              const ModelBatch& batch) {
        std::vector<ad::Var> out;
        for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
            const ModalitySchema& schema = cfg.modalities[m].schema;
            ad::Var dec = decode_modality(tape, z, m);
            if (schema.kind == ModalityKind::image) {
                ad::Var x = ad::constant(tape, batch.inputs[m]);
                out.push_back(ad::scale(ad::row_sum(ad::square(ad::sub(x, dec))), -0.5));
                continue;
            }
            const std::size_t n = batch.n;
            const Tensor& targets = batch.tabular_targets[m];
            ad::Var ll{};
            bool first = true;
            std::size_t off = 0;
            for (std::size_t c = 0; c < schema.columns.size(); ++c) {
                const ColumnSpec& col = schema.columns[c];
                Tensor x = Tensor::zeros({n, 1});
                for (std::size_t i = 0; i < n; ++i) x.values[i] = targets.at(i, c);
                ad::Var term{};
                switch (col.likelihood.kind) {
                    case ColumnKind::gaussian: {
                        ad::Var mu = ad::slice_cols(dec, off, off + 1);
                        ad::Var lv = ad::clamp(ad::slice_cols(dec, off + 1, off + 2),
                                               kLogVarMin, kLogVarMax);
                        ad::Var xc = ad::constant(tape, x);
                        ad::Var sq = ad::mul(ad::square(ad::sub(xc, mu)),
                                             ad::exp_op(ad::neg(lv)));
                        term = ad::scale(
                            ad::add_const(ad::add(lv, sq), std::log(2.0 * std::numbers::pi)),
                            -0.5);
                        off += 2;
                        break;
                    }
                    case ColumnKind::bernoulli: {
                        ad::Var p = ad::clamp(ad::sigmoid(ad::slice_cols(dec, off, off + 1)),
                                              1e-12, 1.0 - 1e-12);
                        Tensor ones = Tensor::full({n, 1}, 1.0);
                        Tensor one_minus_x = ones;
                        for (std::size_t i = 0; i < n; ++i)
                            one_minus_x.values[i] -= x.values[i];
                        ad::Var log_p = ad::log_op(p);
                        ad::Var log_q = ad::log_op(ad::sub(ad::constant(tape, ones), p));
                        term = ad::add(ad::mul_const(log_p, x),
                                       ad::mul_const(log_q, one_minus_x));
                        off += 1;
                        break;
                    }
                    case ColumnKind::categorical: {
                        const std::size_t L =
                            static_cast<std::size_t>(col.likelihood.levels);
                        ad::Var probs =
                            ad::clamp(ad::softmax_rows(ad::slice_cols(dec, off, off + L)),
                                      1e-12, 1.0);
                        Tensor onehot = Tensor::zeros({n, L});
                        for (std::size_t i = 0; i < n; ++i) {
                            const int idx = static_cast<int>(x.values[i]);
                            if (idx < 0 || idx >= static_cast<int>(L))
                                throw DomainError("categorical target outside levels");
                            onehot.at(i, static_cast<std::size_t>(idx)) = 1.0;
                        }
                        term = ad::row_sum(ad::mul_const(ad::log_op(probs), onehot));
                        off += L;
                        break;
                    }
                    case ColumnKind::image_mse:
                        throw ContractError("image_mse column in tabular modality");
                }
                ll = first ? term : ad::add(ll, term);
                first = false;
            }
            out.push_back(ll);
        }
        return out;
    }
};

// ---- evaluation helpers ----

// 100-point grid from 0 to the latest observed event time.
inline std::vector<double> evaluation_grid(const std::vector<PatientRecord>& test) {
    double t_max = 0.0;
    for (const auto& r : test)
        if (r.event != 0) t_max = std::max(t_max, r.time);
    if (t_max == 0.0)
        for (const auto& r : test) t_max = std::max(t_max, r.time);
    std::vector<double> grid;
    for (int i = 0; i < 100; ++i)
        grid.push_back(t_max * static_cast<double>(i) / 99.0);
    return grid;
}

// Build the patients x grid incidence matrix for one cause (F for K=1).
inline PredictionMatrix predict_matrix(SamvaeModel& model,
                                       const std::vector<PatientRecord>& patients,
                                       const std::vector<double>& grid, int cause,
                                       int num_samples, std::uint64_t sample_seed = 1234) {
    PredictionMatrix pm;
    pm.grid = grid;
    Rng rng = Rng::derive(sample_seed, 0x9a7);
    for (const auto& rec : patients) {
        const int draws = std::max(1, num_samples);
        std::vector<double> row(grid.size(), 0.0);
        for (int s = 0; s < draws; ++s) {
            NoiseBatch eps = num_samples == 0 ? model.zero_noise(1) : model.draw_noise(1, rng);
            const SamvaeModel::RiskParams rp = model.risk_params_for(rec, &eps);
            const auto& wb = rp.weibull[static_cast<std::size_t>(cause - 1)];
            const double p = rp.probs[static_cast<std::size_t>(cause - 1)];
            for (std::size_t j = 0; j < grid.size(); ++j)
                row[j] += weibull_terms(wb, grid[j] / model.time_scale).cdf * p;
        }
        for (auto& v : row) v /= static_cast<double>(draws);
        pm.values.push_back(std::move(row));
        pm.times.push_back(rec.time);
        pm.events.push_back(rec.event);
    }
    return pm;
}

} // namespace survfuse

#endif
