#ifndef SURVFUSE_DATA_HPP
#define SURVFUSE_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "survfuse/errors.hpp"
#include "survfuse/likelihoods.hpp"
#include "survfuse/rng.hpp"

namespace survfuse {

struct PatientRecord {
    std::string id;
    std::map<std::string, std::vector<double>> features; // modality -> raw block
    double time = 0.0;
    int event = 0; // 0 = censored, k = event type
};

enum class ModalityKind { tabular, image };

struct ColumnSpec {
    std::string name;
    ColumnLikelihood likelihood;
    std::vector<double> level_values; // categorical: raw value per level index
    double norm_mean = 0.0;           // gaussian normalization, train split only
    double norm_std = 1.0;

    int level_index(double raw) const {
        for (std::size_t i = 0; i < level_values.size(); ++i)
            if (level_values[i] == raw) return static_cast<int>(i);
        throw DataError("column '" + name + "': value " + std::to_string(raw) +
                        " not among the " + std::to_string(level_values.size()) +
                        " known levels");
    }
};

struct ModalitySchema {
    std::string name;
    ModalityKind kind = ModalityKind::tabular;
    std::vector<ColumnSpec> columns; // tabular
    std::size_t channels = 0, height = 0, width = 0; // image

    std::size_t raw_dim() const {
        return kind == ModalityKind::image ? channels * height * width : columns.size();
    }

    // Width of the featurized (one-hot expanded, normalized) input.
    std::size_t encoder_input_dim() const {
        if (kind == ModalityKind::image) return channels * height * width;
        std::size_t d = 0;
        for (const auto& c : columns)
            d += c.likelihood.kind == ColumnKind::categorical
                     ? static_cast<std::size_t>(c.likelihood.levels)
                     : 1;
        return d;
    }

    // Width of the decoder output: 2 units per gaussian column (mean,
    // log-variance), 1 per bernoulli, one per categorical level, and the
    // pixel count for images.
    std::size_t decoder_output_dim() const {
        if (kind == ModalityKind::image) return channels * height * width;
        std::size_t d = 0;
        for (const auto& c : columns) {
            switch (c.likelihood.kind) {
                case ColumnKind::gaussian: d += 2; break;
                case ColumnKind::bernoulli: d += 1; break;
                case ColumnKind::categorical:
                    d += static_cast<std::size_t>(c.likelihood.levels);
                    break;
                case ColumnKind::image_mse: d += 1; break;
            }
        }
        return d;
    }

    std::vector<double> featurize(const PatientRecord& rec) const {
        auto it = rec.features.find(name);
        if (it == rec.features.end())
            throw DataError("patient '" + rec.id + "' is missing modality '" + name + "'");
        const std::vector<double>& raw = it->second;
        if (raw.size() != raw_dim())
            throw DataError("patient '" + rec.id + "': modality '" + name +
                            "' block has wrong size");
        if (kind == ModalityKind::image) return raw;
        std::vector<double> out;
        out.reserve(encoder_input_dim());
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const ColumnSpec& col = columns[c];
            switch (col.likelihood.kind) {
                case ColumnKind::gaussian:
                    out.push_back((raw[c] - col.norm_mean) /
                                  std::max(col.norm_std, 1e-12));
                    break;
                case ColumnKind::bernoulli:
                    out.push_back(raw[c]);
                    break;
                case ColumnKind::categorical: {
                    const int idx = col.level_index(raw[c]);
                    for (int l = 0; l < col.likelihood.levels; ++l)
                        out.push_back(l == idx ? 1.0 : 0.0);
                    break;
                }
                case ColumnKind::image_mse:
                    out.push_back(raw[c]);
                    break;
            }
        }
        return out;
    }

    double denormalize(std::size_t column, double normalized) const {
        const ColumnSpec& col = columns[column];
        return normalized * std::max(col.norm_std, 1e-12) + col.norm_mean;
    }
};

struct Dataset {
    std::vector<PatientRecord> records;
    std::vector<ModalitySchema> schemas;
    int num_risks = 1;
    std::size_t n_dropped_incomplete = 0;
};

// ---- CSV ----

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') { cur += '"'; ++i; }
                else quoted = false;
            } else cur += ch;
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open CSV file: " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line))
        throw DataError("empty CSV file: " + path.string());
    t.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw DataError("CSV row width mismatch in " + path.string());
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("cannot parse number '" + s + "' in " + where);
    }
}

} // namespace detail

// ---- portable anymap images ----

struct Image {
    std::size_t channels = 0, height = 0, width = 0;
    std::vector<double> pixels; // scaled to [0,1], CHW order
};

inline Image read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open image: " + path.string());
    std::string magic;
    in >> magic;
    const bool binary = magic == "P5" || magic == "P6";
    const bool ascii = magic == "P2" || magic == "P3";
    if (!binary && !ascii)
        throw DataError("unsupported PNM magic '" + magic + "' in " + path.string());
    const std::size_t channels = (magic == "P6" || magic == "P3") ? 3 : 1;
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') { std::string rest; std::getline(in, rest); continue; }
            return tok;
        }
        throw DataError("truncated PNM header in " + path.string());
    };
    const std::size_t w = std::stoul(next_token());
    const std::size_t h = std::stoul(next_token());
    const std::size_t maxval = std::stoul(next_token());
    Image img;
    img.channels = channels;
    img.height = h;
    img.width = w;
    img.pixels.resize(channels * h * w);
    const std::size_t n = h * w;
    if (binary) {
        in.get(); // single whitespace after maxval
        std::vector<unsigned char> buf(n * channels);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in)
            throw DataError("truncated PNM pixel data in " + path.string());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < channels; ++c)
                img.pixels[c * n + i] =
                    static_cast<double>(buf[i * channels + c]) / static_cast<double>(maxval);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < channels; ++c) {
                std::size_t v = std::stoul(next_token());
                img.pixels[c * n + i] =
                    static_cast<double>(v) / static_cast<double>(maxval);
            }
    }
    return img;
}

inline void write_pgm(const std::filesystem::path& path, std::size_t h, std::size_t w,
                      const std::vector<double>& pixels01) {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n" << w << " " << h << "\n255\n";
    for (double p : pixels01) {
        const int v = static_cast<int>(std::lround(std::min(1.0, std::max(0.0, p)) * 255.0));
        out.put(static_cast<char>(v));
    }
}

// Binary image pack: "SFPK1\n", uint32 patient count, then per patient:
// uint16 id length, id bytes, uint32 c/h/w, c*h*w float64 pixels in [0,1].
inline std::map<std::string, Image> read_image_pack(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open image pack: " + path.string());
    char magic[6];
    in.read(magic, 6);
    if (!in || std::string(magic, 6) != "SFPK1\n")
        throw DataError("bad image pack magic in " + path.string());
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    std::map<std::string, Image> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 2);
        std::string id(len, '\0');
        in.read(id.data(), len);
        std::uint32_t c = 0, h = 0, w = 0;
        in.read(reinterpret_cast<char*>(&c), 4);
        in.read(reinterpret_cast<char*>(&h), 4);
        in.read(reinterpret_cast<char*>(&w), 4);
        Image img;
        img.channels = c;
        img.height = h;
        img.width = w;
        img.pixels.resize(static_cast<std::size_t>(c) * h * w);
        in.read(reinterpret_cast<char*>(img.pixels.data()),
                static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
        if (!in)
            throw DataError("truncated image pack: " + path.string());
        if (out.count(id))
            throw DataError("duplicate patient id in image pack: " + id);
        out.emplace(std::move(id), std::move(img));
    }
    return out;
}

// ---- schema inference ----

// <= this many distinct integer values makes a column categorical unless
// overridden in the manifest.
inline constexpr std::size_t kCategoricalThreshold = 10;

inline ColumnSpec infer_column(const std::string& name, const std::vector<double>& values) {
    ColumnSpec spec;
    spec.name = name;
    std::set<double> distinct(values.begin(), values.end());
    bool all_int = true;
    for (double v : distinct)
        if (v != std::floor(v)) { all_int = false; break; }
    const bool binary01 = distinct.size() <= 2 && all_int &&
                          std::all_of(distinct.begin(), distinct.end(),
                                      [](double v) { return v == 0.0 || v == 1.0; });
    if (binary01) {
        spec.likelihood = ColumnLikelihood::bernoulli();
    } else if (all_int && distinct.size() <= kCategoricalThreshold && distinct.size() >= 2) {
        spec.likelihood = ColumnLikelihood::categorical(static_cast<int>(distinct.size()));
        spec.level_values.assign(distinct.begin(), distinct.end());
    } else {
        spec.likelihood = ColumnLikelihood::gaussian();
    }
    return spec;
}

// Train-split-only normalization statistics for gaussian columns.
inline void fit_normalization(std::vector<ModalitySchema>& schemas,
                              const std::vector<PatientRecord>& train) {
    for (auto& schema : schemas) {
        if (schema.kind != ModalityKind::tabular) continue;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            ColumnSpec& col = schema.columns[c];
            if (col.likelihood.kind != ColumnKind::gaussian) continue;
            double mean = 0.0;
            for (const auto& r : train) mean += r.features.at(schema.name)[c];
            mean /= static_cast<double>(train.size());
            double var = 0.0;
            for (const auto& r : train) {
                const double d = r.features.at(schema.name)[c] - mean;
                var += d * d;
            }
            var /= static_cast<double>(train.size());
            col.norm_mean = mean;
            col.norm_std = std::sqrt(std::max(var, 1e-24));
        }
    }
}

// ---- manifest loading ----

// Manifest JSON: {"k": K, "outcomes": "outcomes.csv", "modalities": [
//   {"name": ..., "kind": "tabular"|"image", "path": ...,
//    "overrides": {"col": {"kind": "categorical", "levels": 2}}}]}
inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in)
        throw DataError("cannot open manifest: " + manifest_path.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const std::exception& e) {
        throw DataError("malformed manifest JSON: " + std::string(e.what()));
    }
    const auto base = manifest_path.parent_path();
    Dataset ds;
    ds.num_risks = manifest.value("k", 1);
    if (ds.num_risks < 1)
        throw DataError("manifest: k must be >= 1");

    // outcomes
    const auto outcomes = detail::read_csv(base / manifest.at("outcomes").get<std::string>());
    std::map<std::string, std::pair<double, int>> outcome_by_id;
    std::vector<std::string> bad_time_rows;
    for (std::size_t r = 0; r < outcomes.rows.size(); ++r) {
        const auto& row = outcomes.rows[r];
        const std::string& id = row[0];
        if (outcome_by_id.count(id))
            throw DataError("duplicate patient id in outcomes: " + id);
        const double t = detail::parse_double(row[1], "outcomes row " + std::to_string(r + 2));
        const int e = static_cast<int>(
            detail::parse_double(row[2], "outcomes row " + std::to_string(r + 2)));
        if (!(t > 0.0) || !std::isfinite(t))
            bad_time_rows.push_back(std::to_string(r + 2));
        if (e < 0 || e > ds.num_risks)
            throw DataError("outcomes: event label " + std::to_string(e) +
                            " outside [0," + std::to_string(ds.num_risks) + "] for " + id);
        outcome_by_id[id] = {t, e};
    }
    if (!bad_time_rows.empty()) {
        std::string rows;
        for (const auto& s : bad_time_rows) rows += (rows.empty() ? "" : ", ") + s;
        throw DataError("outcomes: nonpositive times at rows " + rows);
    }

    // modality blocks keyed by patient id
    std::map<std::string, std::map<std::string, std::vector<double>>> blocks;
    for (const auto& mod : manifest.at("modalities")) {
        ModalitySchema schema;
        schema.name = mod.at("name").get<std::string>();
        const std::string kind = mod.value("kind", "tabular");
        const auto path = base / mod.at("path").get<std::string>();
        if (kind == "tabular") {
            schema.kind = ModalityKind::tabular;
            const auto table = detail::read_csv(path);
            if (table.header.empty() || table.header[0] != "patient_id")
                throw DataError("tabular modality '" + schema.name +
                                "': first column must be patient_id");
            const std::size_t ncols = table.header.size() - 1;
            std::vector<std::vector<double>> colvals(ncols);
            std::set<std::string> seen;
            for (const auto& row : table.rows) {
                if (!seen.insert(row[0]).second)
                    throw DataError("duplicate patient id '" + row[0] + "' in modality '" +
                                    schema.name + "'");
                std::vector<double> vals(ncols);
                for (std::size_t c = 0; c < ncols; ++c) {
                    vals[c] = detail::parse_double(row[c + 1], schema.name + " column " +
                                                                    table.header[c + 1]);
                    colvals[c].push_back(vals[c]);
                }
                blocks[row[0]][schema.name] = std::move(vals);
            }
            for (std::size_t c = 0; c < ncols; ++c) {
                ColumnSpec spec = infer_column(table.header[c + 1], colvals[c]);
                if (mod.contains("overrides") && mod["overrides"].contains(spec.name)) {
                    const auto& ov = mod["overrides"][spec.name];
                    const std::string k = ov.at("kind").get<std::string>();
                    if (k == "gaussian") {
                        spec.likelihood = ColumnLikelihood::gaussian();
                        spec.level_values.clear();
                    } else if (k == "bernoulli") {
                        spec.likelihood = ColumnLikelihood::bernoulli();
                        spec.level_values.clear();
                    } else if (k == "categorical") {
                        spec.likelihood = ColumnLikelihood::categorical(ov.at("levels").get<int>());
                        std::set<double> distinct(colvals[c].begin(), colvals[c].end());
                        spec.level_values.assign(distinct.begin(), distinct.end());
                        if (spec.level_values.size() >
                            static_cast<std::size_t>(spec.likelihood.levels))
                            throw DataError("override for column '" + spec.name +
                                            "': more distinct values than levels");
                        while (spec.level_values.size() <
                               static_cast<std::size_t>(spec.likelihood.levels))
                            spec.level_values.push_back(
                                (spec.level_values.empty() ? 0.0
                                                           : spec.level_values.back() + 1.0));
                    } else {
                        throw DataError("unknown override kind '" + k + "'");
                    }
                }
                schema.columns.push_back(std::move(spec));
            }
        } else if (kind == "image") {
            schema.kind = ModalityKind::image;
            std::map<std::string, Image> images;
            if (std::filesystem::is_directory(path)) {
                for (const auto& entry : std::filesystem::directory_iterator(path)) {
                    const auto ext = entry.path().extension().string();
                    if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm") continue;
                    images[entry.path().stem().string()] = read_pnm(entry.path());
                }
            } else {
                images = read_image_pack(path);
            }
            if (images.empty())
                throw DataError("image modality '" + schema.name + "': no images found");
            const Image& first = images.begin()->second;
            schema.channels = first.channels;
            schema.height = first.height;
            schema.width = first.width;
            for (auto& [id, img] : images) {
                if (img.channels != schema.channels || img.height != schema.height ||
                    img.width != schema.width)
                    throw DataError("image modality '" + schema.name +
                                    "': inconsistent dimensions for patient " + id);
                blocks[id][schema.name] = std::move(img.pixels);
            }
        } else {
            throw DataError("unknown modality kind '" + kind + "'");
        }
        ds.schemas.push_back(std::move(schema));
    }

    // inner join across modalities and outcomes; drop incomplete patients
    for (auto& [id, mods] : blocks) {
        auto oit = outcome_by_id.find(id);
        if (oit == outcome_by_id.end() || mods.size() != ds.schemas.size()) {
            ds.n_dropped_incomplete += 1;
            continue;
        }
        PatientRecord rec;
        rec.id = id;
        rec.features = std::move(mods);
        rec.time = oit->second.first;
        rec.event = oit->second.second;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

// ---- splitting ----

struct Split {
    std::vector<PatientRecord> train;
    std::vector<PatientRecord> test;
    std::vector<int> singleton_labels; // labels forced into train
};

// Stratified by event label, deterministic given the seed.
inline Split split_dataset(const std::vector<PatientRecord>& records, double test_fraction,
                           std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ContractError("split: test_fraction must be in (0,1)");
    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < records.size(); ++i)
        strata[records[i].event].push_back(i);
    Split out;
    Rng rng = Rng::derive(seed, 0x5117);
    std::vector<char> to_test(records.size(), 0);
    for (auto& [label, idx] : strata) {
        if (idx.size() < 2) {
            out.singleton_labels.push_back(label);
            continue;
        }
        rng.shuffle(idx);
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(idx.size())));
        n_test = std::min(idx.size() - 1, std::max<std::size_t>(1, n_test));
        for (std::size_t i = 0; i < n_test; ++i) to_test[idx[i]] = 1;
    }
    for (std::size_t i = 0; i < records.size(); ++i)
        (to_test[i] ? out.test : out.train).push_back(records[i]);
    return out;
}

// ---- synthetic cohorts ----

struct SynthSpec {
    std::size_t n_patients = 1000;
    int num_risks = 1;
    std::vector<std::size_t> modality_dims = {4};
    std::vector<std::vector<double>> beta; // one coefficient vector per risk,
                                           // length = sum of modality dims
    std::vector<double> weibull_shape = {1.5}; // per risk
    double baseline_scale = 1.0;
    std::vector<double> baseline_scale_per_risk; // optional, overrides the scalar
    double censoring_fraction = 0.0;
    std::uint64_t seed = 1;
};

struct SimResult {
    std::vector<PatientRecord> records;
    std::vector<ModalitySchema> schemas;
    std::vector<std::vector<double>> true_scale;  // patient x risk: lambda_{k,i}
    std::vector<std::vector<double>> risk_score;  // patient x risk: beta_k . x
    std::vector<double> oracle_c_index;           // per risk, brute-force pairs
};

namespace detail {

inline double weibull_draw(Rng& rng, double shape, double scale) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    return scale * std::pow(-std::log(u), 1.0 / shape);
}

// Brute-force pair concordance of the true risk ranking on observed data.
inline double oracle_c_index(const std::vector<double>& times, const std::vector<int>& events,
                             int cause, const std::vector<double>& scores) {
    double comparable = 0.0, concordant = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (events[i] != cause) continue;
        for (std::size_t j = 0; j < times.size(); ++j) {
            if (i == j || !(times[i] < times[j])) continue;
            comparable += 1.0;
            if (scores[i] > scores[j]) concordant += 1.0;
            else if (scores[i] == scores[j]) concordant += 0.5;
        }
    }
    return comparable > 0.0 ? concordant / comparable : 0.5;
}

} // namespace detail

inline SimResult simulate_cohort(const SynthSpec& spec) {
    if (spec.num_risks < 1)
        throw ContractError("simulate: num_risks must be >= 1");
    if (!(spec.censoring_fraction >= 0.0 && spec.censoring_fraction < 1.0))
        throw ContractError("simulate: censoring fraction must be in [0,1)");
    std::size_t total_dim = 0;
    for (std::size_t d : spec.modality_dims) {
        if (d < 1)
            throw ContractError("simulate: modality dims must be >= 1");
        total_dim += d;
    }
    if (spec.beta.size() != static_cast<std::size_t>(spec.num_risks) ||
        spec.weibull_shape.size() != static_cast<std::size_t>(spec.num_risks))
        throw ContractError("simulate: need one beta vector and shape per risk");
    for (const auto& b : spec.beta)
        if (b.size() != total_dim)
            throw ContractError("simulate: beta length must equal total feature dim");
    if (!spec.baseline_scale_per_risk.empty() &&
        spec.baseline_scale_per_risk.size() != static_cast<std::size_t>(spec.num_risks))
        throw ContractError("simulate: per-risk baseline scales must match num_risks");

    Rng rng = Rng::derive(spec.seed, 0xda7a);
    const std::size_t n = spec.n_patients;
    SimResult out;
    out.true_scale.assign(n, std::vector<double>(spec.num_risks, 0.0));
    out.risk_score.assign(n, std::vector<double>(spec.num_risks, 0.0));

    std::vector<double> event_times(n);
    std::vector<int> causes(n);
    std::vector<double> unit_u(n); // pre-drawn censoring uniforms
    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord rec;
        {
            std::ostringstream id;
            id << "p" << std::setw(5) << std::setfill('0') << i;
            rec.id = id.str();
        }
        std::vector<double> x(total_dim);
        for (auto& v : x) v = rng.normal();
        std::size_t off = 0;
        for (std::size_t m = 0; m < spec.modality_dims.size(); ++m) {
            rec.features["mod" + std::to_string(m + 1)] = std::vector<double>(
                x.begin() + static_cast<std::ptrdiff_t>(off),
                x.begin() + static_cast<std::ptrdiff_t>(off + spec.modality_dims[m]));
            off += spec.modality_dims[m];
        }
        double t_min = 0.0;
        int cause = 0;
        for (int k = 0; k < spec.num_risks; ++k) {
            double s = 0.0;
            for (std::size_t d = 0; d < total_dim; ++d)
                s += spec.beta[static_cast<std::size_t>(k)][d] * x[d];
            const double lam0 = spec.baseline_scale_per_risk.empty()
                                    ? spec.baseline_scale
                                    : spec.baseline_scale_per_risk[static_cast<std::size_t>(k)];
            const double lam = std::exp(-s) * lam0;
            out.risk_score[i][static_cast<std::size_t>(k)] = s;
            out.true_scale[i][static_cast<std::size_t>(k)] = lam;
            const double tk = detail::weibull_draw(
                rng, spec.weibull_shape[static_cast<std::size_t>(k)], lam);
            if (k == 0 || tk < t_min) {
                t_min = tk;
                cause = k + 1;
            }
        }
        event_times[i] = t_min;
        causes[i] = cause;
        unit_u[i] = rng.uniform();
        rec.time = t_min;
        rec.event = cause;
        out.records.push_back(std::move(rec));
    }

    if (spec.censoring_fraction > 0.0) {
        auto censored_fraction = [&](double c_max) {
            std::size_t c = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (unit_u[i] * c_max < event_times[i]) ++c;
            return static_cast<double>(c) / static_cast<double>(n);
        };
        double lo = 1e-12, hi = 1.0;
        while (censored_fraction(hi) > spec.censoring_fraction && hi < 1e15) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (censored_fraction(mid) > spec.censoring_fraction) lo = mid;
            else hi = mid;
        }
        const double c_max = hi;
        const double achieved = censored_fraction(c_max);
        if (std::abs(achieved - spec.censoring_fraction) > 0.02) {
            const double lo_frac = censored_fraction(1e15);
            throw DataError("simulate: cannot hit censoring fraction " +
                            std::to_string(spec.censoring_fraction) + " within 2%; " +
                            "achievable down to about " + std::to_string(lo_frac));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double c = unit_u[i] * c_max;
            if (c < event_times[i]) {
                out.records[i].time = std::max(c, 1e-12);
                out.records[i].event = 0;
            }
        }
    }

    // schemas: all-gaussian tabular modalities
    for (std::size_t m = 0; m < spec.modality_dims.size(); ++m) {
        ModalitySchema schema;
        schema.name = "mod" + std::to_string(m + 1);
        schema.kind = ModalityKind::tabular;
        for (std::size_t d = 0; d < spec.modality_dims[m]; ++d) {
            ColumnSpec col;
            col.name = "x" + std::to_string(d + 1);
            col.likelihood = ColumnLikelihood::gaussian();
            schema.columns.push_back(std::move(col));
        }
        out.schemas.push_back(std::move(schema));
    }

    std::vector<double> obs_times(n);
    std::vector<int> obs_events(n);
    for (std::size_t i = 0; i < n; ++i) {
        obs_times[i] = out.records[i].time;
        obs_events[i] = out.records[i].event;
    }
    for (int k = 1; k <= spec.num_risks; ++k) {
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i)
            scores[i] = out.risk_score[i][static_cast<std::size_t>(k - 1)];
        out.oracle_c_index.push_back(
            detail::oracle_c_index(obs_times, obs_events, k, scores));
    }
    return out;
}

inline SimResult simulate_single_risk(const SynthSpec& spec) {
    if (spec.num_risks != 1)
        throw ContractError("simulate_single_risk: num_risks must be 1");
    return simulate_cohort(spec);
}

inline SimResult simulate_competing_risks(const SynthSpec& spec) {
    if (spec.num_risks < 2)
        throw ContractError("simulate_competing_risks: num_risks must be >= 2");
    return simulate_cohort(spec);
}

} // namespace survfuse

#endif
