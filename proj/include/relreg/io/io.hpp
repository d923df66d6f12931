// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relreg/core/matrix.hpp"
#include "relreg/meta/meta.hpp"

namespace relreg::io {

struct TableSource {
    std::filesystem::path path;
    char delimiter = ',';
    std::vector<std::string> feature_columns;
    std::string target_column;
    /// Entity id column; empty uses the row number.
    std::string key_column;
    /// Extra text columns carried along verbatim (e.g. a taxonomy level).
    std::vector<std::string> text_columns;
    std::string year_column;
    std::optional<double> year;
};

/// Rows with a missing selected value ("", NA, NaN, null) are dropped.
struct Table {
    std::vector<std::string> keys;
    Matrix x;
    Vector y;
    std::vector<double> years;
    std::map<std::string, std::vector<std::string>> text;
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
};

/// Splits one delimited record, honouring double quotes and "" escapes.
std::vector<std::string> split_record(std::string_view line, char delimiter);

/// Reads every record of a delimited text file; the first is the header.
std::vector<std::vector<std::string>> read_records(const std::filesystem::path& path, char delimiter);

Table load_table(const TableSource& source);

struct PairRelations {
    Matrix r;
    /// Listed pairs naming a key that is absent from the table.
    std::vector<std::pair<std::string, std::string>> skipped;
};

std::vector<std::pair<std::string, std::string>> load_pair_list(const std::filesystem::path& path,
                                                                char delimiter = ',');
/// r_ij = 1 when the keys of rows i and j are listed as a pair (either order).
PairRelations build_pair_relations(const std::vector<std::string>& keys,
                                   const std::vector<std::pair<std::string, std::string>>& pairs);

enum class TaxonLevel { order, family, genus };
std::string_view to_string(TaxonLevel level);
TaxonLevel parse_taxon_level(std::string_view text);

/// key → taxon name at each level.
struct Taxonomy {
    std::map<std::string, std::array<std::string, 3>> entries;
};

Taxonomy load_taxonomy(const std::filesystem::path& path, const std::string& key_column,
                       const std::array<std::string, 3>& level_columns, char delimiter = ',');

struct TaxonomyRelations {
    Matrix r;
    std::vector<std::string> uncovered;
};

TaxonomyRelations build_taxonomy_relations(const std::vector<std::string>& keys, const Taxonomy& taxonomy,
                                           TaxonLevel level);

/// r_ij = 1 when labels i and j are equal and i ≠ j; empty labels relate to nothing.
Matrix build_category_relations(const std::vector<std::string>& labels);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n_related = 0;
    std::size_t n_unrelated = 0;
};

/// Two-sample two-sided Kolmogorov-Smirnov statistic between two samples.
double ks_statistic(std::vector<double> a, std::vector<double> b);
/// Asymptotic Kolmogorov survival function Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²).
double kolmogorov_sf(double lambda);
/// Compares |y_i − y_j| over related pairs (r_ij > 0, i < j) against
/// unrelated pairs. Throws UndefinedError when either population is empty.
KsResult ks_informativeness(std::span<const double> y, const Matrix& r);

enum class PreprocessKind { standardize, log };
std::string_view to_string(PreprocessKind kind);
PreprocessKind parse_preprocess(std::string_view text);

/// Column transforms applied in order; standardization statistics come from
/// the fitting rows only.
class Preprocessor {
public:
    static Preprocessor fit(const Matrix& m, std::span<const PreprocessKind> ops, std::span<const std::size_t> rows);
    [[nodiscard]] Matrix apply(const Matrix& m) const;
    [[nodiscard]] const std::vector<PreprocessKind>& ops() const noexcept { return ops_; }
    [[nodiscard]] const std::vector<Standardizer>& scalers() const noexcept { return scalers_; }

private:
    std::vector<PreprocessKind> ops_;
    std::vector<Standardizer> scalers_;
};

/// One replication file in the CEVAE column layout: treatment, y_factual,
/// y_cfactual, mu0, mu1, x1..x25. tau_true = mu1 − mu0. The covariate with
/// zero-based index `category_covariate` becomes the relation source.
meta::TreatmentDataset load_ihdp(const std::filesystem::path& path, std::size_t category_covariate = 3);

}  // namespace relreg::io
