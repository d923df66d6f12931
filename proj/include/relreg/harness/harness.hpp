// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "relreg/harness/config.hpp"

namespace relreg::harness {

/// Metrics of one (dataset, unit, seed, estimator, learner) evaluation.
struct SeedRecord {
    std::string dataset;
    std::string estimator;
    /// Empty for plain regression.
    std::string learner;
    /// IHDP realization file name; empty otherwise.
    std::string unit;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> metrics;
    double seconds = 0.0;
};

struct ResultRow {
    std::string dataset;
    std::string estimator;
    std::string learner;
    std::string metric;
    double mean = 0.0;
    /// Sample standard deviation; 0 for a single seed.
    double std = 0.0;
    std::size_t seed_count = 0;
    double wall_seconds = 0.0;
};

struct PlotRow {
    std::string dataset;
    std::string estimator;
    std::uint64_t seed = 0;
    int cluster = 0;
    double x = 0.0;
    double prediction = 0.0;
    double truth = 0.0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<SeedRecord> records;
    std::vector<PlotRow> plot;
};

/// Called with a short line after each finished evaluation.
using Progress = std::function<void(const std::string&)>;

/// Runs every dataset × seed × estimator (× learner) of the config and
/// aggregates per metric in config order. Errors carry the failing seed.
ExperimentResult run_experiment(const ExperimentConfig& config, const Progress& progress = {});

/// Grouped mean and sample std of the records, in first-appearance order.
std::vector<ResultRow> aggregate(const std::vector<SeedRecord>& records);

enum class Format { csv, json, markdown };

/// 4 significant digits; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double value);
std::string format_results(const std::vector<ResultRow>& rows, Format format, const std::string& experiment = "");
void emit_results(const std::vector<ResultRow>& rows, Format format, const std::filesystem::path& path,
                  const std::string& experiment = "");
std::string format_seed_log(const std::vector<SeedRecord>& records);
std::string format_plot_data(const std::vector<PlotRow>& rows);

/// results.{csv,json,md}, seeds.jsonl, timings.json and, when present,
/// plot_data.csv under config.output_dir. Wall times go to timings.json only.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

/// Prediction curves: a grid over [−1, 1] per cluster and seed
/// for every NW estimator. Throws ConfigError for non 1-D synthetic data.
std::vector<PlotRow> compute_plot_data(const ExperimentConfig& config);

/// KS diagnostic of every dataset in the config over all of its rows.
struct Diagnosis {
    std::string dataset;
    std::string unit;
    io::KsResult ks;
};
std::vector<Diagnosis> diagnose_relations(const ExperimentConfig& config);
std::string format_diagnosis(const std::vector<Diagnosis>& results);

/// Resolves `files` entries (with '*' wildcards) against the data root.
std::vector<std::filesystem::path> resolve_files(const std::vector<std::string>& files);

}  // namespace relreg::harness
