// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relreg/datagen/datagen.hpp"
#include "relreg/io/io.hpp"
#include "relreg/meta/meta.hpp"
#include "relreg/nw/fit.hpp"
#include "relreg/tabrel/tabrel.hpp"

namespace relreg::harness {

enum class DatasetKind { synthetic, additive_effect, ihdp, table };
enum class RelationKind { none, pair_list, taxonomy, category };
enum class EstimatorKind { nw, tabrel };
enum class Metric { mse, r2, pehe };

std::string_view to_string(DatasetKind kind);
std::string_view to_string(RelationKind kind);
std::string_view to_string(EstimatorKind kind);
std::string_view to_string(Metric metric);

struct RelationSpec {
    RelationKind kind = RelationKind::none;
    std::string path;
    char delimiter = ',';
    /// taxonomy: key column and order/family/genus column names.
    std::string key_column = "species";
    std::array<std::string, 3> level_columns{"order", "family", "genus"};
    io::TaxonLevel level = io::TaxonLevel::order;
    /// category: a text column of the table.
    std::string category_column;
};

struct DatasetSpec {
    std::string tag;
    DatasetKind kind = DatasetKind::synthetic;

    datagen::Family family = datagen::Family::parabolas;
    std::size_t n = 300;
    /// Unset means the family default.
    std::optional<double> cluster_scale;
    datagen::RelationMode r_mode = datagen::RelationMode::deterministic;

    double effect = 2.0;
    double noise_std = 0.0;

    /// ihdp: file names under the data root; an entry containing '*' expands
    /// to every matching file in that directory, in natural order.
    std::vector<std::string> files;
    std::size_t category_covariate = 3;

    io::TableSource table;
    RelationSpec relations;
    std::vector<io::PreprocessKind> x_ops;
    std::vector<io::PreprocessKind> y_ops;
    /// Nonzero: trial/validation are whole key groups of these sizes.
    std::size_t trial_groups = 0;
    std::size_t validation_groups = 0;
    /// Year used by the relation diagnostic instead of table.year.
    std::optional<double> diagnostic_year;
};

struct EstimatorSpec {
    std::string tag;
    EstimatorKind kind = EstimatorKind::nw;
    nw::Variant variant = nw::Variant::rel_kernel;
    /// false replaces R with zeros before fitting.
    bool relations = true;
    nw::FitConfig nw;
    tabrel::TabRelConfig tabrel;
    tabrel::TabRelFitConfig tabrel_fit;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::vector<DatasetSpec> datasets;
    std::vector<EstimatorSpec> estimators;
    std::vector<meta::LearnerKind> learners;
    std::array<double, 3> fractions{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    std::vector<std::uint64_t> seeds;
    std::vector<Metric> metrics{Metric::mse, Metric::r2};
    std::filesystem::path output_dir = "results";
    /// Per-fit wall-clock limit in seconds; 0 disables.
    double timeout_seconds = 600.0;
    std::size_t jobs = 1;
    /// Also write plot_data.csv (1-D synthetic datasets, NW estimators).
    bool plot_data = false;

    /// Throws ConfigError describing the first violated precondition.
    void validate() const;
};

/// Parses the JSON config text; unknown keys are rejected.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

std::vector<std::uint64_t> seed_range(std::size_t count);

/// Names accepted by `preset`.
const std::vector<std::string>& preset_names();
ExperimentConfig preset(std::string_view name);

/// Directory that relative data paths resolve against: $RELREG_DATA_DIR or "data".
std::filesystem::path data_root();

}  // namespace relreg::harness
