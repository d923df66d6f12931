// SPDX-License-Identifier: Apache-2.0
#include "relreg/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "relreg/core/error.hpp"
#include "relreg/core/metrics.hpp"

namespace relreg::harness {

using nlohmann::json;

namespace {

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context) {
    const std::string message = context + ": " + e.what();
    const std::string& kind = e.kind();
    if (kind == "shape") throw ShapeError(message);
    if (kind == "config") throw ConfigError(message);
    if (kind == "diverged") throw DivergedError(message);
    if (kind == "io") throw IoError(message);
    if (kind == "undefined") throw UndefinedError(message);
    if (kind == "timeout") throw TimeoutError(message);
    throw Error(kind, message);
}

std::filesystem::path resolve(const std::filesystem::path& p) { return p.is_absolute() ? p : data_root() / p; }

/// Orders "a2" before "a10".
bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
            std::size_t ie = i, je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            const std::string na = a.substr(i, ie - i), nb = b.substr(j, je - j);
            if (na.size() != nb.size()) return na.size() < nb.size();
            if (na != nb) return na < nb;
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() - i < b.size() - j;
}

bool wildcard_match(std::string_view pattern, std::string_view text) {
    const auto star = pattern.find('*');
    if (star == std::string_view::npos) return pattern == text;
    const auto head = pattern.substr(0, star);
    const auto tail = pattern.substr(star + 1);
    if (text.size() < head.size() + tail.size()) return false;
    if (text.substr(0, head.size()) != head) return false;
    for (std::size_t k = head.size(); k + tail.size() <= text.size(); ++k)
        if (wildcard_match(tail, text.substr(k))) return true;
    return false;
}

struct TableData {
    io::Table table;
    Matrix r;
};

TableData load_table_dataset(const DatasetSpec& spec, std::optional<double> year) {
    io::TableSource src = spec.table;
    src.path = resolve(src.path);
    if (year) src.year = year;
    TableData out;
    out.table = io::load_table(src);
    const auto& keys = out.table.keys;
    const RelationSpec& rel = spec.relations;
    switch (rel.kind) {
        case RelationKind::none: out.r = Matrix(keys.size(), keys.size()); break;
        case RelationKind::pair_list:
            out.r = io::build_pair_relations(keys, io::load_pair_list(resolve(rel.path), rel.delimiter)).r;
            break;
        case RelationKind::taxonomy: {
            const io::Taxonomy tax = io::load_taxonomy(resolve(rel.path), rel.key_column, rel.level_columns, rel.delimiter);
            out.r = io::build_taxonomy_relations(keys, tax, rel.level).r;
            break;
        }
        case RelationKind::category: out.r = io::build_category_relations(out.table.text.at(rel.category_column)); break;
    }
    return out;
}

SplitIndex group_split(const std::vector<std::string>& keys, std::size_t trial_groups, std::size_t validation_groups,
                       std::uint64_t seed) {
    std::vector<std::string> groups;
    std::map<std::string, std::size_t> seen;
    for (const auto& k : keys)
        if (seen.emplace(k, groups.size()).second) groups.push_back(k);
    if (groups.size() <= trial_groups + validation_groups) {
        throw ConfigError("group split needs more than " + std::to_string(trial_groups + validation_groups) +
                          " groups, found " + std::to_string(groups.size()));
    }
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(datagen::derive_seed(seed, "split"));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> role(groups.size(), 0);
    for (std::size_t k = 0; k < trial_groups; ++k) role[order[k]] = 1;
    for (std::size_t k = trial_groups; k < trial_groups + validation_groups; ++k) role[order[k]] = 2;
    SplitIndex split;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        switch (role[seen.at(keys[i])]) {
            case 0: split.background.push_back(i); break;
            case 1: split.trial.push_back(i); break;
            default: split.validation.push_back(i); break;
        }
    }
    return split;
}

/// Everything a dataset needs before its seeds run.
struct LoadedDataset {
    std::vector<std::string> units{""};
    std::vector<meta::TreatmentDataset> ihdp;
    std::optional<TableData> table;
};

LoadedDataset load_dataset(const DatasetSpec& spec) {
    LoadedDataset out;
    if (spec.kind == DatasetKind::ihdp) {
        out.units.clear();
        for (const auto& path : resolve_files(spec.files)) {
            out.units.push_back(path.filename().string());
            out.ihdp.push_back(io::load_ihdp(path, spec.category_covariate));
        }
    } else if (spec.kind == DatasetKind::table) {
        out.table = load_table_dataset(spec, std::nullopt);
    }
    return out;
}

struct Prepared {
    RelDataset data;
    std::optional<meta::TreatmentDataset> treatment;
    SplitIndex split;
    std::vector<int> clusters;
    double cluster_scale = 0.0;
};

Matrix column_of(const Vector& y) { return Matrix(y.size(), 1, y); }

Prepared prepare(const DatasetSpec& spec, const LoadedDataset& loaded, std::size_t unit,
                 const std::array<double, 3>& fractions, std::uint64_t seed) {
    Prepared p;
    switch (spec.kind) {
        case DatasetKind::synthetic: {
            datagen::SyntheticSpec s;
            s.family = spec.family;
            s.n = spec.n;
            s.cluster_scale = spec.cluster_scale.value_or(datagen::default_cluster_scale(spec.family));
            s.r_mode = spec.r_mode;
            s.seed = seed;
            datagen::SyntheticData gen = datagen::generate(s);
            p.data = std::move(gen.data);
            p.clusters = std::move(gen.clusters);
            p.cluster_scale = s.cluster_scale;
            p.split = datagen::split_dataset(p.data.size(), fractions, seed);
            break;
        }
        case DatasetKind::additive_effect:
            p.treatment = meta::gen_additive_effect(spec.n, spec.effect, seed, spec.noise_std);
            p.split = datagen::split_dataset(spec.n, fractions, seed);
            break;
        case DatasetKind::ihdp:
            p.treatment = loaded.ihdp.at(unit);
            p.split = datagen::split_dataset(p.treatment->size(), fractions, seed);
            break;
        case DatasetKind::table: {
            const TableData& t = *loaded.table;
            p.split = spec.trial_groups > 0 || spec.validation_groups > 0
                          ? group_split(t.table.keys, spec.trial_groups, spec.validation_groups, seed)
                          : datagen::split_dataset(t.table.size(), fractions, seed);
            const io::Preprocessor xp = io::Preprocessor::fit(t.table.x, spec.x_ops, p.split.background);
            const io::Preprocessor yp = io::Preprocessor::fit(column_of(t.table.y), spec.y_ops, p.split.background);
            p.data.x = xp.apply(t.table.x);
            p.data.y = yp.apply(column_of(t.table.y)).storage();
            p.data.r = t.r;
            break;
        }
    }
    if (p.treatment) p.data = p.treatment->outcome_dataset();
    return p;
}

nw::FitConfig nw_config(const EstimatorSpec& e, const ExperimentConfig& config, std::uint64_t seed) {
    nw::FitConfig c = e.nw;
    c.seed = seed;
    c.timeout_seconds = config.timeout_seconds;
    return c;
}

tabrel::TabRelFitConfig tabrel_config(const EstimatorSpec& e, const ExperimentConfig& config, std::uint64_t seed) {
    tabrel::TabRelFitConfig c = e.tabrel_fit;
    c.seed = seed;
    c.timeout_seconds = config.timeout_seconds;
    return c;
}

bool plottable(const DatasetSpec& d) {
    return d.kind == DatasetKind::synthetic && (d.family == datagen::Family::parabolas || d.family == datagen::Family::step);
}

std::vector<PlotRow> plot_curves(const DatasetSpec& spec, const EstimatorSpec& est, const Prepared& p,
                                 const nw::NwModel& model, std::uint64_t seed) {
    constexpr int kGrid = 101;
    const auto& bg = p.split.background;
    const Matrix bx = select_rows(p.data.x, bg);
    Vector by;
    for (std::size_t i : bg) by.push_back(p.data.y[i]);
    const Matrix brows = select(p.data.r, bg, bg);
    Matrix qx(kGrid, 1);
    for (int k = 0; k < kGrid; ++k) qx(k, 0) = -1.0 + 2.0 * k / (kGrid - 1);
    std::vector<PlotRow> rows;
    for (int c = 0; c < 3; ++c) {
        Matrix rq(kGrid, bg.size());
        for (int k = 0; k < kGrid; ++k)
            for (std::size_t j = 0; j < bg.size(); ++j) rq(k, j) = p.clusters[bg[j]] == c && est.relations ? 1.0 : 0.0;
        const nw::Background background{bx, by, &brows};
        const Vector pred = nw::nw_predict(model, background, qx, rq);
        for (int k = 0; k < kGrid; ++k) {
            const double x = qx(k, 0);
            const double base = spec.family == datagen::Family::parabolas ? x * x
                                                                         : (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
            rows.push_back({spec.tag, est.tag, seed, c, x, pred[k], base + p.cluster_scale * c});
        }
    }
    return rows;
}

struct WorkItem {
    std::size_t dataset;
    std::size_t unit;
    std::uint64_t seed;
};

struct WorkOutput {
    std::vector<SeedRecord> records;
    std::vector<PlotRow> plot;
};

WorkOutput run_item(const ExperimentConfig& config, const WorkItem& item, const LoadedDataset& loaded,
                    bool plots_only) {
    const DatasetSpec& spec = config.datasets[item.dataset];
    const Prepared p = prepare(spec, loaded, item.unit, config.fractions, item.seed);
    WorkOutput out;
    for (const EstimatorSpec& est : config.estimators) {
        if (plots_only && est.kind != EstimatorKind::nw) continue;
        const std::uint64_t fit_seed = datagen::derive_seed(item.seed, est.tag);
        RelDataset data = p.data;
        if (!est.relations) data.r.fill(0.0);

        if (p.treatment) {
            meta::TreatmentDataset t = *p.treatment;
            t.r = data.r;
            const meta::BaseRegressor base =
                est.kind == EstimatorKind::nw
                    ? meta::nw_regressor(est.variant, nw_config(est, config, fit_seed))
                    : meta::tabrel_regressor(est.tabrel, tabrel_config(est, config, fit_seed));
            for (meta::LearnerKind kind : config.learners) {
                const auto start = std::chrono::steady_clock::now();
                const meta::CateEstimate e = meta::run_learner(kind, t, p.split, base, fit_seed);
                if (!t.tau_true) throw ConfigError("dataset '" + spec.tag + "' has no true effects for pehe");
                Vector tv, tt;
                for (std::size_t i : p.split.validation) tv.push_back((*t.tau_true)[i]);
                for (std::size_t i : p.split.trial) tt.push_back((*t.tau_true)[i]);
                SeedRecord rec{spec.tag, est.tag, meta::to_string(kind), loaded.units[item.unit], item.seed, {}, 0.0};
                rec.metrics.emplace_back("pehe", meta::pehe(e.tau_hat, tv));
                rec.metrics.emplace_back("pehe_in_sample", meta::pehe(e.tau_hat_trial, tt));
                rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                out.records.push_back(std::move(rec));
            }
            continue;
        }

        const auto start = std::chrono::steady_clock::now();
        double mse = 0.0, r2 = 0.0;
        if (est.kind == EstimatorKind::nw) {
            const nw::FitResult fit = nw::nw_fit(data, p.split, est.variant, nw_config(est, config, fit_seed));
            mse = fit.validation_mse;
            r2 = fit.validation_r2;
            if ((config.plot_data || plots_only) && plottable(spec)) {
                auto rows = plot_curves(spec, est, p, fit.model, item.seed);
                out.plot.insert(out.plot.end(), rows.begin(), rows.end());
            }
        } else {
            const tabrel::TabRelFit fit =
                tabrel::tabrel_fit(data, p.split, est.tabrel, tabrel_config(est, config, fit_seed));
            mse = fit.validation_mse;
            r2 = fit.validation_r2;
        }
        SeedRecord rec{spec.tag, est.tag, "", loaded.units[item.unit], item.seed, {}, 0.0};
        for (Metric m : config.metrics) {
            if (m == Metric::mse) rec.metrics.emplace_back("mse", mse);
            if (m == Metric::r2) rec.metrics.emplace_back("r2", r2);
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.records.push_back(std::move(rec));
    }
    return out;
}

ExperimentResult execute(const ExperimentConfig& config, const Progress& progress, bool plots_only) {
    config.validate();
    std::vector<LoadedDataset> loaded;
    std::vector<WorkItem> items;
    for (std::size_t d = 0; d < config.datasets.size(); ++d) {
        try {
            loaded.push_back(load_dataset(config.datasets[d]));
        } catch (const Error& e) {
            rethrow_with_context(e, "dataset '" + config.datasets[d].tag + "'");
        }
        for (std::size_t u = 0; u < loaded.back().units.size(); ++u)
            for (std::uint64_t s : config.seeds) items.push_back({d, u, s});
    }

    std::vector<WorkOutput> outputs(items.size());
    std::vector<std::exception_ptr> errors(items.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < items.size() && !failed; i = next++) {
            const WorkItem& item = items[i];
            const DatasetSpec& spec = config.datasets[item.dataset];
            std::string context = "dataset '" + spec.tag + "'";
            if (!loaded[item.dataset].units[item.unit].empty()) context += " (" + loaded[item.dataset].units[item.unit] + ")";
            context += ", seed " + std::to_string(item.seed);
            try {
                try {
                    outputs[i] = run_item(config, item, loaded[item.dataset], plots_only);
                } catch (const Error& e) {
                    rethrow_with_context(e, context);
                }
                if (progress) {
                    std::lock_guard lock(progress_mutex);
                    progress(context + " done");
                }
            } catch (...) {
                errors[i] = std::current_exception();
                failed = true;
            }
        }
    };
    const std::size_t threads = std::min(config.jobs, items.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    ExperimentResult result;
    for (auto& o : outputs) {
        result.records.insert(result.records.end(), o.records.begin(), o.records.end());
        result.plot.insert(result.plot.end(), o.plot.begin(), o.plot.end());
    }
    result.rows = aggregate(result.records);
    return result;
}

json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return std::strtod(format_number(v).c_str(), nullptr);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::vector<std::filesystem::path> resolve_files(const std::vector<std::string>& files) {
    std::vector<std::filesystem::path> out;
    for (const auto& entry : files) {
        const std::filesystem::path full = resolve(entry);
        const std::string name = full.filename().string();
        if (name.find('*') == std::string::npos) {
            if (!std::filesystem::exists(full)) throw IoError("missing data file " + full.string());
            out.push_back(full);
            continue;
        }
        const auto dir = full.parent_path();
        if (!std::filesystem::is_directory(dir)) throw IoError("missing data directory " + dir.string());
        std::vector<std::string> names;
        for (const auto& f : std::filesystem::directory_iterator(dir))
            if (f.is_regular_file() && wildcard_match(name, f.path().filename().string()))
                names.push_back(f.path().filename().string());
        std::sort(names.begin(), names.end(), natural_less);
        if (names.empty()) throw IoError("no files match " + full.string());
        for (const auto& n : names) out.push_back(dir / n);
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Progress& progress) {
    return execute(config, progress, false);
}

std::vector<ResultRow> aggregate(const std::vector<SeedRecord>& records) {
    std::vector<ResultRow> rows;
    std::map<std::tuple<std::string, std::string, std::string, std::string>, std::size_t> index;
    std::vector<std::vector<double>> values;
    for (const auto& rec : records) {
        for (const auto& [metric, value] : rec.metrics) {
            const auto key = std::make_tuple(rec.dataset, rec.estimator, rec.learner, metric);
            auto [it, inserted] = index.emplace(key, rows.size());
            if (inserted) {
                rows.push_back({rec.dataset, rec.estimator, rec.learner, metric, 0.0, 0.0, 0, 0.0});
                values.emplace_back();
            }
            values[it->second].push_back(value);
            rows[it->second].wall_seconds += rec.seconds;
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].mean = mean(values[i]);
        rows[i].std = sample_std(values[i]);
        rows[i].seed_count = values[i].size();
    }
    return rows;
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", value);
    return buf;
}

std::string format_results(const std::vector<ResultRow>& rows, Format format, const std::string& experiment) {
    std::ostringstream out;
    switch (format) {
        case Format::csv:
            out << "dataset,estimator,learner,metric,mean,std,seeds\n";
            for (const auto& r : rows) {
                out << csv_field(r.dataset) << ',' << csv_field(r.estimator) << ',' << csv_field(r.learner) << ','
                    << csv_field(r.metric) << ',' << format_number(r.mean) << ',' << format_number(r.std) << ','
                    << r.seed_count << '\n';
            }
            break;
        case Format::markdown:
            out << "| dataset | estimator | learner | metric | mean | std | seeds |\n";
            out << "|---|---|---|---|---|---|---|\n";
            for (const auto& r : rows) {
                out << "| " << r.dataset << " | " << r.estimator << " | " << (r.learner.empty() ? "-" : r.learner)
                    << " | " << r.metric << " | " << format_number(r.mean) << " | " << format_number(r.std) << " | "
                    << r.seed_count << " |\n";
            }
            break;
        case Format::json: {
            json j;
            j["experiment"] = experiment;
            j["rows"] = json::array();
            for (const auto& r : rows) {
                j["rows"].push_back({{"dataset", r.dataset},
                                     {"estimator", r.estimator},
                                     {"learner", r.learner},
                                     {"metric", r.metric},
                                     {"mean", number_or_null(r.mean)},
                                     {"std", number_or_null(r.std)},
                                     {"seeds", r.seed_count}});
            }
            out << j.dump(2) << '\n';
            break;
        }
    }
    return out.str();
}

void emit_results(const std::vector<ResultRow>& rows, Format format, const std::filesystem::path& path,
                  const std::string& experiment) {
    if (rows.empty()) throw ConfigError("no result rows to write");
    write_file(path, format_results(rows, format, experiment));
}

std::string format_seed_log(const std::vector<SeedRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        json j;
        j["dataset"] = rec.dataset;
        j["estimator"] = rec.estimator;
        j["learner"] = rec.learner;
        j["unit"] = rec.unit;
        j["seed"] = rec.seed;
        json m = json::object();
        for (const auto& [name, value] : rec.metrics) m[name] = std::isfinite(value) ? json(value) : json(nullptr);
        j["metrics"] = m;
        out += j.dump() + "\n";
    }
    return out;
}

std::string format_plot_data(const std::vector<PlotRow>& rows) {
    std::ostringstream out;
    out << "dataset,estimator,seed,cluster,x,prediction,truth\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g", r.x, r.prediction, r.truth);
        out << csv_field(r.dataset) << ',' << csv_field(r.estimator) << ',' << r.seed << ',' << r.cluster << ','
            << buf << '\n';
    }
    return out.str();
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    if (result.rows.empty()) throw ConfigError("no result rows to write");
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
    const auto& dir = config.output_dir;
    emit_results(result.rows, Format::csv, dir / "results.csv", config.name);
    emit_results(result.rows, Format::json, dir / "results.json", config.name);
    emit_results(result.rows, Format::markdown, dir / "results.md", config.name);
    write_file(dir / "seeds.jsonl", format_seed_log(result.records));
    if (!result.plot.empty()) write_file(dir / "plot_data.csv", format_plot_data(result.plot));

    json t;
    t["experiment"] = config.name;
    t["rows"] = json::array();
    double total = 0.0;
    for (const auto& r : result.rows) {
        t["rows"].push_back({{"dataset", r.dataset}, {"estimator", r.estimator}, {"learner", r.learner},
                             {"metric", r.metric}, {"wall_seconds", r.wall_seconds}});
    }
    for (const auto& rec : result.records) total += rec.seconds;
    t["total_fit_seconds"] = total;
    write_file(dir / "timings.json", t.dump(2) + "\n");
}

std::vector<PlotRow> compute_plot_data(const ExperimentConfig& config) {
    for (const auto& d : config.datasets) {
        if (!plottable(d)) {
            throw ConfigError("plot data needs 1-D synthetic datasets (parabolas or step); '" + d.tag + "' is not");
        }
    }
    const bool any_nw = std::any_of(config.estimators.begin(), config.estimators.end(),
                                    [](const EstimatorSpec& e) { return e.kind == EstimatorKind::nw; });
    if (!any_nw) throw ConfigError("plot data needs at least one NW estimator");
    return execute(config, {}, true).plot;
}

std::vector<Diagnosis> diagnose_relations(const ExperimentConfig& config) {
    std::vector<Diagnosis> out;
    for (const auto& spec : config.datasets) {
        try {
            switch (spec.kind) {
                case DatasetKind::table: {
                    const TableData t = load_table_dataset(spec, spec.diagnostic_year);
                    out.push_back({spec.tag, "", io::ks_informativeness(t.table.y, t.r)});
                    break;
                }
                case DatasetKind::ihdp: {
                    for (const auto& path : resolve_files(spec.files)) {
                        const meta::TreatmentDataset d = io::load_ihdp(path, spec.category_covariate);
                        out.push_back({spec.tag, path.filename().string(), io::ks_informativeness(d.y, d.r)});
                    }
                    break;
                }
                default: {
                    const std::uint64_t seed = config.seeds.empty() ? 0 : config.seeds.front();
                    const Prepared p = prepare(spec, LoadedDataset{}, 0, config.fractions, seed);
                    out.push_back({spec.tag, "", io::ks_informativeness(p.data.y, p.data.r)});
                    break;
                }
            }
        } catch (const Error& e) {
            rethrow_with_context(e, "dataset '" + spec.tag + "'");
        }
    }
    return out;
}

std::string format_diagnosis(const std::vector<Diagnosis>& results) {
    json j = json::array();
    for (const auto& d : results) {
        j.push_back({{"dataset", d.dataset},
                     {"unit", d.unit},
                     {"statistic", d.ks.statistic},
                     {"p_value", d.ks.p_value},
                     {"related_pairs", d.ks.n_related},
                     {"unrelated_pairs", d.ks.n_unrelated}});
    }
    return j.dump(2) + "\n";
}

}  // namespace relreg::harness
