// SPDX-License-Identifier: Apache-2.0
#include "relreg/harness/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "relreg/core/error.hpp"

namespace relreg::harness {

using nlohmann::json;

std::string_view to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::synthetic: return "synthetic";
        case DatasetKind::additive_effect: return "additive_effect";
        case DatasetKind::ihdp: return "ihdp";
        case DatasetKind::table: return "table";
    }
    return "?";
}

std::string_view to_string(RelationKind kind) {
    switch (kind) {
        case RelationKind::none: return "none";
        case RelationKind::pair_list: return "pair_list";
        case RelationKind::taxonomy: return "taxonomy";
        case RelationKind::category: return "category";
    }
    return "?";
}

std::string_view to_string(EstimatorKind kind) { return kind == EstimatorKind::nw ? "nw" : "tabrel"; }

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::mse: return "mse";
        case Metric::r2: return "r2";
        case Metric::pehe: return "pehe";
    }
    return "?";
}

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& text, const std::array<E, N>& values, const char* what) {
    std::string allowed;
    for (E v : values) {
        if (to_string(v) == text) return v;
        allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(v));
    }
    throw ConfigError("unknown " + std::string(what) + " '" + text + "' (expected one of " + allowed + ")");
}

constexpr std::array kDatasetKinds{DatasetKind::synthetic, DatasetKind::additive_effect, DatasetKind::ihdp,
                                   DatasetKind::table};
constexpr std::array kRelationKinds{RelationKind::none, RelationKind::pair_list, RelationKind::taxonomy,
                                    RelationKind::category};
constexpr std::array kEstimatorKinds{EstimatorKind::nw, EstimatorKind::tabrel};
constexpr std::array kMetrics{Metric::mse, Metric::r2, Metric::pehe};

/// Reads members of one JSON object and rejects any it did not consume.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw ConfigError(where_ + " must be an object");
    }
    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
        }
    }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    bool has(const std::string& key) const { return j_.contains(key); }
    const json& at(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }
    std::string where(const std::string& key) const { return where_ + "." + key; }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("bad value for " + where(key) + ": " + e.what());
        }
    }
    template <typename E, std::size_t N>
    void get_enum(const std::string& key, E& out, const std::array<E, N>& values) {
        if (!has(key)) return;
        std::string text;
        get(key, text);
        out = parse_enum(text, values, key.c_str());
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

char read_delimiter(Reader& r, const std::string& key, char fallback) {
    std::string text(1, fallback);
    r.get(key, text);
    if (text == "\\t" || text == "tab") return '\t';
    if (text.size() != 1) throw ConfigError(r.where(key) + " must be a single character");
    return text[0];
}

std::vector<io::PreprocessKind> read_ops(Reader& r, const std::string& key) {
    std::vector<std::string> names;
    r.get(key, names);
    std::vector<io::PreprocessKind> ops;
    for (const auto& n : names) ops.push_back(io::parse_preprocess(n));
    return ops;
}

RelationSpec read_relations(const json& j, const std::string& where) {
    Reader r(j, where);
    RelationSpec s;
    r.get_enum("kind", s.kind, kRelationKinds);
    r.get("path", s.path);
    s.delimiter = read_delimiter(r, "delimiter", ',');
    r.get("key_column", s.key_column);
    r.get("level_columns", s.level_columns);
    if (r.has("level")) {
        std::string level;
        r.get("level", level);
        s.level = io::parse_taxon_level(level);
    }
    r.get("category_column", s.category_column);
    return s;
}

io::TableSource read_table(const json& j, const std::string& where) {
    Reader r(j, where);
    io::TableSource t;
    std::string path;
    r.get("path", path);
    t.path = path;
    t.delimiter = read_delimiter(r, "delimiter", ',');
    r.get("features", t.feature_columns);
    r.get("target", t.target_column);
    r.get("key", t.key_column);
    r.get("text_columns", t.text_columns);
    r.get("year_column", t.year_column);
    if (r.has("year")) {
        double year = 0.0;
        r.get("year", year);
        t.year = year;
    }
    return t;
}

DatasetSpec read_dataset(const json& j, const std::string& where) {
    Reader r(j, where);
    DatasetSpec d;
    r.get("tag", d.tag);
    r.get_enum("kind", d.kind, kDatasetKinds);
    if (r.has("family")) {
        std::string f;
        r.get("family", f);
        d.family = datagen::parse_family(f);
    }
    r.get("n", d.n);
    if (r.has("cluster_scale")) {
        double c = 0.0;
        r.get("cluster_scale", c);
        d.cluster_scale = c;
    }
    if (r.has("r_mode")) {
        std::string m;
        r.get("r_mode", m);
        d.r_mode = datagen::parse_relation_mode(m);
    }
    r.get("effect", d.effect);
    r.get("noise_std", d.noise_std);
    r.get("files", d.files);
    r.get("category_covariate", d.category_covariate);
    if (r.has("table")) d.table = read_table(r.at("table"), r.where("table"));
    if (r.has("relations")) d.relations = read_relations(r.at("relations"), r.where("relations"));
    d.x_ops = read_ops(r, "x_preprocess");
    d.y_ops = read_ops(r, "y_preprocess");
    r.get("trial_groups", d.trial_groups);
    r.get("validation_groups", d.validation_groups);
    if (r.has("diagnostic_year")) {
        double y = 0.0;
        r.get("diagnostic_year", y);
        d.diagnostic_year = y;
    }
    return d;
}

void read_nw(const json& j, const std::string& where, nw::FitConfig& c) {
    Reader r(j, where);
    r.get("epochs", c.epochs);
    r.get("learning_rate", c.learning_rate);
    r.get("mlp_learning_rate", c.mlp_learning_rate);
    r.get("patience", c.patience);
    r.get("min_improvement", c.min_improvement);
    r.get("standardize", c.standardize);
    r.get("mlp_hidden1", c.mlp.hidden1);
    r.get("mlp_hidden2", c.mlp.hidden2);
    r.get("mlp_output", c.mlp.output);
    r.get("mlp_dropout", c.mlp.dropout);
}

void read_tabrel(const json& j, const std::string& where, EstimatorSpec& e) {
    Reader r(j, where);
    r.get("embed_dim", e.tabrel.embed_dim);
    r.get("num_heads", e.tabrel.num_heads);
    r.get("depth", e.tabrel.depth);
    r.get("dropout", e.tabrel.dropout);
    r.get("feature_embed_dim", e.tabrel.feature_embed_dim);
    r.get("layer_norm", e.tabrel.layer_norm);
    r.get("feed_forward", e.tabrel.feed_forward);
    if (r.has("mask_scope")) {
        std::string scope;
        r.get("mask_scope", scope);
        if (scope == "all_rows") e.tabrel.mask_scope = tabrel::MaskScope::all_rows;
        else if (scope == "trial_pairs") e.tabrel.mask_scope = tabrel::MaskScope::trial_pairs;
        else throw ConfigError("unknown mask_scope '" + scope + "' (expected all_rows or trial_pairs)");
    }
    r.get("epochs", e.tabrel_fit.epochs);
    r.get("learning_rate", e.tabrel_fit.learning_rate);
    r.get("patience", e.tabrel_fit.patience);
    r.get("min_improvement", e.tabrel_fit.min_improvement);
}

EstimatorSpec read_estimator(const json& j, const std::string& where) {
    Reader r(j, where);
    EstimatorSpec e;
    r.get("tag", e.tag);
    r.get_enum("kind", e.kind, kEstimatorKinds);
    if (r.has("variant")) {
        std::string v;
        r.get("variant", v);
        e.variant = nw::parse_variant(v);
    }
    r.get("relations", e.relations);
    if (r.has("nw")) read_nw(r.at("nw"), r.where("nw"), e.nw);
    if (r.has("tabrel")) read_tabrel(r.at("tabrel"), r.where("tabrel"), e);
    if (e.tag.empty()) {
        e.tag = e.kind == EstimatorKind::tabrel ? "tabrel" : "nw_" + std::string(nw::to_string(e.variant));
    }
    return e;
}

std::string mask_scope_name(tabrel::MaskScope s) { return s == tabrel::MaskScope::all_rows ? "all_rows" : "trial_pairs"; }

json write_dataset(const DatasetSpec& d) {
    json j;
    j["tag"] = d.tag;
    j["kind"] = to_string(d.kind);
    switch (d.kind) {
        case DatasetKind::synthetic:
            j["family"] = datagen::to_string(d.family);
            j["n"] = d.n;
            if (d.cluster_scale) j["cluster_scale"] = *d.cluster_scale;
            j["r_mode"] = datagen::to_string(d.r_mode);
            break;
        case DatasetKind::additive_effect:
            j["n"] = d.n;
            j["effect"] = d.effect;
            j["noise_std"] = d.noise_std;
            break;
        case DatasetKind::ihdp:
            j["files"] = d.files;
            j["category_covariate"] = d.category_covariate;
            break;
        case DatasetKind::table: {
            json t;
            t["path"] = d.table.path.string();
            t["delimiter"] = d.table.delimiter == '\t' ? std::string("\\t") : std::string(1, d.table.delimiter);
            t["features"] = d.table.feature_columns;
            t["target"] = d.table.target_column;
            t["key"] = d.table.key_column;
            if (!d.table.text_columns.empty()) t["text_columns"] = d.table.text_columns;
            if (!d.table.year_column.empty()) t["year_column"] = d.table.year_column;
            if (d.table.year) t["year"] = *d.table.year;
            j["table"] = t;
            json rel;
            rel["kind"] = to_string(d.relations.kind);
            if (!d.relations.path.empty()) rel["path"] = d.relations.path;
            if (d.relations.kind == RelationKind::taxonomy) {
                rel["key_column"] = d.relations.key_column;
                rel["level_columns"] = d.relations.level_columns;
                rel["level"] = io::to_string(d.relations.level);
            }
            if (d.relations.kind == RelationKind::category) rel["category_column"] = d.relations.category_column;
            j["relations"] = rel;
            std::vector<std::string> xo, yo;
            for (auto op : d.x_ops) xo.emplace_back(io::to_string(op));
            for (auto op : d.y_ops) yo.emplace_back(io::to_string(op));
            j["x_preprocess"] = xo;
            j["y_preprocess"] = yo;
            j["trial_groups"] = d.trial_groups;
            j["validation_groups"] = d.validation_groups;
            if (d.diagnostic_year) j["diagnostic_year"] = *d.diagnostic_year;
            break;
        }
    }
    return j;
}

json write_estimator(const EstimatorSpec& e) {
    json j;
    j["tag"] = e.tag;
    j["kind"] = to_string(e.kind);
    j["relations"] = e.relations;
    if (e.kind == EstimatorKind::nw) {
        j["variant"] = nw::to_string(e.variant);
        j["nw"] = {{"epochs", e.nw.epochs},
                   {"learning_rate", e.nw.learning_rate},
                   {"mlp_learning_rate", e.nw.mlp_learning_rate},
                   {"patience", e.nw.patience},
                   {"min_improvement", e.nw.min_improvement},
                   {"standardize", e.nw.standardize},
                   {"mlp_hidden1", e.nw.mlp.hidden1},
                   {"mlp_hidden2", e.nw.mlp.hidden2},
                   {"mlp_output", e.nw.mlp.output},
                   {"mlp_dropout", e.nw.mlp.dropout}};
    } else {
        j["tabrel"] = {{"embed_dim", e.tabrel.embed_dim},
                       {"num_heads", e.tabrel.num_heads},
                       {"depth", e.tabrel.depth},
                       {"dropout", e.tabrel.dropout},
                       {"feature_embed_dim", e.tabrel.feature_embed_dim},
                       {"layer_norm", e.tabrel.layer_norm},
                       {"feed_forward", e.tabrel.feed_forward},
                       {"mask_scope", mask_scope_name(e.tabrel.mask_scope)},
                       {"epochs", e.tabrel_fit.epochs},
                       {"learning_rate", e.tabrel_fit.learning_rate},
                       {"patience", e.tabrel_fit.patience},
                       {"min_improvement", e.tabrel_fit.min_improvement}};
    }
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (datasets.empty()) throw ConfigError("config needs at least one dataset");
    if (estimators.empty()) throw ConfigError("config needs at least one estimator");
    if (seeds.empty()) throw ConfigError("config needs at least one seed");
    if (metrics.empty()) throw ConfigError("config needs at least one metric");
    if (jobs == 0) throw ConfigError("jobs must be >= 1");
    if (timeout_seconds < 0.0) throw ConfigError("timeout_seconds must be >= 0");
    double total = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw ConfigError("split fractions must be nonnegative");
        total += f;
    }
    if (total > 1.0 + 1e-9) throw ConfigError("split fractions sum to more than 1");
    std::set<std::string> tags;
    for (const auto& d : datasets) {
        if (d.tag.empty()) throw ConfigError("every dataset needs a tag");
        if (!tags.insert("d:" + d.tag).second) throw ConfigError("duplicate dataset tag '" + d.tag + "'");
        const bool treatment = d.kind == DatasetKind::ihdp || d.kind == DatasetKind::additive_effect;
        if (treatment && learners.empty()) {
            throw ConfigError("dataset '" + d.tag + "' is a treatment dataset and needs learners");
        }
        if (!treatment && !learners.empty()) {
            throw ConfigError("learners need treatment datasets, '" + d.tag + "' is a regression dataset");
        }
        if (d.kind == DatasetKind::synthetic || d.kind == DatasetKind::additive_effect) {
            if (d.n < 3) throw ConfigError("dataset '" + d.tag + "' needs n >= 3");
        }
        if (d.kind == DatasetKind::ihdp && d.files.empty()) {
            throw ConfigError("ihdp dataset '" + d.tag + "' lists no files");
        }
        if (d.kind == DatasetKind::table) {
            if (d.table.path.empty() || d.table.target_column.empty() || d.table.feature_columns.empty()) {
                throw ConfigError("table dataset '" + d.tag + "' needs path, target and features");
            }
            if ((d.trial_groups > 0 || d.validation_groups > 0) && d.table.key_column.empty()) {
                throw ConfigError("group split of '" + d.tag + "' needs a key column");
            }
            if (d.relations.kind == RelationKind::category &&
                std::find(d.table.text_columns.begin(), d.table.text_columns.end(), d.relations.category_column) ==
                    d.table.text_columns.end()) {
                throw ConfigError("category column '" + d.relations.category_column +
                                  "' must be listed in table.text_columns");
            }
        }
    }
    for (const auto& e : estimators) {
        if (e.tag.empty()) throw ConfigError("every estimator needs a tag");
        if (!tags.insert("e:" + e.tag).second) throw ConfigError("duplicate estimator tag '" + e.tag + "'");
        if (e.kind == EstimatorKind::tabrel) e.tabrel.validate();
    }
    for (Metric m : metrics) {
        if (m == Metric::pehe && learners.empty()) throw ConfigError("metric pehe needs learners");
        if (m != Metric::pehe && !learners.empty()) {
            throw ConfigError("treatment experiments report pehe only, got " + std::string(to_string(m)));
        }
    }
}

ExperimentConfig parse_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(0, e.byte, std::string("invalid JSON: ") + e.what());
    }
    ExperimentConfig c;
    {
        Reader r(j, "config");
        r.get("name", c.name);
        if (r.has("datasets")) {
            const json& ds = r.at("datasets");
            if (!ds.is_array()) throw ConfigError("config.datasets must be an array");
            for (std::size_t i = 0; i < ds.size(); ++i)
                c.datasets.push_back(read_dataset(ds[i], "datasets[" + std::to_string(i) + "]"));
        }
        if (r.has("estimators")) {
            const json& es = r.at("estimators");
            if (!es.is_array()) throw ConfigError("config.estimators must be an array");
            for (std::size_t i = 0; i < es.size(); ++i)
                c.estimators.push_back(read_estimator(es[i], "estimators[" + std::to_string(i) + "]"));
        }
        std::vector<std::string> learners;
        r.get("learners", learners);
        for (const auto& l : learners) c.learners.push_back(meta::parse_learner(l));
        r.get("fractions", c.fractions);
        if (r.has("seeds")) {
            const json& s = r.at("seeds");
            if (s.is_number_unsigned()) {
                c.seeds = seed_range(s.get<std::size_t>());
            } else {
                try {
                    c.seeds = s.get<std::vector<std::uint64_t>>();
                } catch (const json::exception&) {
                    throw ConfigError("config.seeds must be a count or a list of nonnegative integers");
                }
            }
        }
        if (r.has("metrics")) {
            std::vector<std::string> names;
            r.get("metrics", names);
            c.metrics.clear();
            for (const auto& n : names) c.metrics.push_back(parse_enum(n, kMetrics, "metric"));
        }
        std::string out;
        r.get("output_dir", out);
        if (!out.empty()) c.output_dir = out;
        r.get("timeout_seconds", c.timeout_seconds);
        r.get("jobs", c.jobs);
        r.get("plot_data", c.plot_data);
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["datasets"] = json::array();
    for (const auto& d : c.datasets) j["datasets"].push_back(write_dataset(d));
    j["estimators"] = json::array();
    for (const auto& e : c.estimators) j["estimators"].push_back(write_estimator(e));
    std::vector<std::string> learners;
    for (auto l : c.learners) learners.push_back(meta::to_string(l));
    if (!learners.empty()) j["learners"] = learners;
    j["fractions"] = c.fractions;
    j["seeds"] = c.seeds;
    std::vector<std::string> metrics;
    for (auto m : c.metrics) metrics.emplace_back(to_string(m));
    j["metrics"] = metrics;
    j["output_dir"] = c.output_dir.string();
    j["timeout_seconds"] = c.timeout_seconds;
    j["jobs"] = c.jobs;
    j["plot_data"] = c.plot_data;
    return j.dump(2) + "\n";
}

std::vector<std::uint64_t> seed_range(std::size_t count) {
    std::vector<std::uint64_t> seeds(count);
    for (std::size_t i = 0; i < count; ++i) seeds[i] = i;
    return seeds;
}

std::filesystem::path data_root() {
    const char* env = std::getenv("RELREG_DATA_DIR");
    return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path("data");
}

}  // namespace relreg::harness
