// SPDX-License-Identifier: Apache-2.0
#include "relreg/core/error.hpp"
#include "relreg/harness/config.hpp"

namespace relreg::harness {

namespace {

DatasetSpec synthetic(datagen::Family family, std::size_t n, datagen::RelationMode mode) {
    DatasetSpec d;
    d.tag = std::string(datagen::to_string(family));
    d.kind = DatasetKind::synthetic;
    d.family = family;
    d.n = n;
    d.r_mode = mode;
    return d;
}

EstimatorSpec nw_estimator(std::string tag, nw::Variant variant, bool relations = true) {
    EstimatorSpec e;
    e.tag = std::move(tag);
    e.kind = EstimatorKind::nw;
    e.variant = variant;
    e.relations = relations;
    return e;
}

EstimatorSpec tabrel_estimator() {
    EstimatorSpec e;
    e.tag = "tabrel";
    e.kind = EstimatorKind::tabrel;
    return e;
}

ExperimentConfig base(std::string name) {
    ExperimentConfig c;
    c.name = name;
    c.seeds = seed_range(30);
    c.output_dir = "results/" + name;
    return c;
}

ExperimentConfig one_dim(std::string name, datagen::RelationMode mode) {
    ExperimentConfig c = base(std::move(name));
    c.datasets = {synthetic(datagen::Family::parabolas, 300, mode), synthetic(datagen::Family::step, 300, mode)};
    c.estimators = {nw_estimator("nw", nw::Variant::vanilla), nw_estimator("nw_rel_features", nw::Variant::rel_features),
                    nw_estimator("nw_rel", nw::Variant::rel_kernel), tabrel_estimator()};
    return c;
}

ExperimentConfig two_dim(std::string name, std::size_t n) {
    ExperimentConfig c = base(std::move(name));
    for (auto f : {datagen::Family::linear2d, datagen::Family::square2d, datagen::Family::sin2d})
        c.datasets.push_back(synthetic(f, n, datagen::RelationMode::deterministic));
    c.estimators = {nw_estimator("nw", nw::Variant::vanilla),
                    nw_estimator("nw_learnable", nw::Variant::learnable_norm, false),
                    nw_estimator("nw_rel_features", nw::Variant::rel_features),
                    nw_estimator("nw_rel", nw::Variant::rel_kernel),
                    nw_estimator("nw_rel_learnable", nw::Variant::learnable_norm),
                    nw_estimator("nw_rel_mlp", nw::Variant::mlp_embed),
                    tabrel_estimator()};
    return c;
}

std::vector<EstimatorSpec> full_roster() {
    return {nw_estimator("nw", nw::Variant::vanilla),
            nw_estimator("nw_rel_features", nw::Variant::rel_features),
            nw_estimator("nw_rel", nw::Variant::rel_kernel),
            nw_estimator("nw_rel_learnable", nw::Variant::learnable_norm),
            nw_estimator("nw_rel_mlp", nw::Variant::mlp_embed),
            tabrel_estimator()};
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"table1", "table2", "table3_n300", "table3_n1000", "table4",
                                                "table5", "fig1",   "lifeexp",     "birds"};
    return names;
}

ExperimentConfig preset(std::string_view name) {
    if (name == "table1") return one_dim("table1", datagen::RelationMode::deterministic);
    if (name == "table2") return one_dim("table2", datagen::RelationMode::random_half);
    if (name == "table3_n300") return two_dim("table3_n300", 300);
    if (name == "table3_n1000") return two_dim("table3_n1000", 1000);
    if (name == "table4") {
        ExperimentConfig c = base("table4");
        c.datasets = {synthetic(datagen::Family::noisy7d, 300, datagen::RelationMode::random_half)};
        c.estimators = full_roster();
        return c;
    }
    if (name == "table5") {
        ExperimentConfig c = base("table5");
        DatasetSpec d;
        d.tag = "ihdp";
        d.kind = DatasetKind::ihdp;
        d.files = {"ihdp/ihdp_npci_*.csv"};
        c.datasets = {d};
        c.estimators = full_roster();
        c.learners = {meta::LearnerKind::s, meta::LearnerKind::t, meta::LearnerKind::x};
        c.metrics = {Metric::pehe};
        c.seeds = {0};
        return c;
    }
    if (name == "fig1") {
        ExperimentConfig c = base("fig1");
        c.datasets = {synthetic(datagen::Family::parabolas, 300, datagen::RelationMode::deterministic)};
        c.estimators = {nw_estimator("nw", nw::Variant::vanilla), nw_estimator("nw_rel", nw::Variant::rel_kernel)};
        c.plot_data = true;
        return c;
    }
    if (name == "lifeexp") {
        ExperimentConfig c = base("lifeexp");
        DatasetSpec d;
        d.tag = "lifeexp";
        d.kind = DatasetKind::table;
        d.table.path = "lifeexp/life_expectancy.csv";
        d.table.feature_columns = {"Hepatitis_B", "Polio", "Diphtheria", "Incidents_HIV", "BMI"};
        d.table.target_column = "Life_expectancy";
        d.table.key_column = "Country";
        d.table.year_column = "Year";
        d.relations.kind = RelationKind::pair_list;
        d.relations.path = "lifeexp/borders.csv";
        d.trial_groups = 30;
        d.validation_groups = 30;
        d.diagnostic_year = 2015;
        c.datasets = {d};
        c.estimators = full_roster();
        return c;
    }
    if (name == "birds") {
        ExperimentConfig c = base("birds");
        DatasetSpec d;
        d.tag = "birds";
        d.kind = DatasetKind::table;
        d.table.path = "birds/birds.csv";
        d.table.feature_columns = {"body_mass", "breeding_range"};
        d.table.target_column = "genetic_richness";
        d.table.key_column = "species";
        d.relations.kind = RelationKind::taxonomy;
        d.relations.path = "birds/taxonomy.csv";
        d.relations.key_column = "species";
        d.relations.level = io::TaxonLevel::order;
        d.x_ops = {io::PreprocessKind::log};
        d.y_ops = {io::PreprocessKind::log};
        c.datasets = {d};
        c.estimators = full_roster();
        return c;
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

}  // namespace relreg::harness
