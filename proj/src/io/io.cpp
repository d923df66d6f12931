// SPDX-License-Identifier: Apache-2.0
#include "relreg/io/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <unordered_map>

#include "relreg/core/error.hpp"

namespace relreg::io {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

bool is_missing(const std::string& cell) {
    std::string lower;
    for (char c : cell) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return lower.empty() || lower == "na" || lower == "nan" || lower == "null" || lower == "n/a";
}

/// Parses a numeric cell; nullopt for a missing marker.
std::optional<double> parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    if (is_missing(cell)) return std::nullopt;
    double value = 0.0;
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ParseError(row, col, "cannot parse '" + cell + "' as a number");
    }
    return value;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::filesystem::path& path) {
    const std::string wanted = trim(name);
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == wanted) return i;
    throw ConfigError("column '" + wanted + "' not found in " + path.string());
}

}  // namespace

std::vector<std::string> split_record(std::string_view line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            cells.push_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    cells.push_back(trim(cell));
    return cells;
}

std::vector<std::vector<std::string>> read_records(const std::filesystem::path& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<std::string>> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        records.push_back(split_record(line, delimiter));
    }
    return records;
}

Table load_table(const TableSource& source) {
    const auto records = read_records(source.path, source.delimiter);
    if (records.empty()) throw IoError(source.path.string() + " is empty");
    const auto& header = records.front();
    if (source.target_column.empty()) throw ConfigError("table source needs a target column");

    std::vector<std::size_t> feature_idx;
    for (const auto& name : source.feature_columns) feature_idx.push_back(column_index(header, name, source.path));
    const std::size_t target_idx = column_index(header, source.target_column, source.path);
    const std::optional<std::size_t> key_idx =
        source.key_column.empty() ? std::nullopt : std::optional(column_index(header, source.key_column, source.path));
    const std::optional<std::size_t> year_idx =
        source.year_column.empty() ? std::nullopt
                                   : std::optional(column_index(header, source.year_column, source.path));
    if (source.year && !year_idx) throw ConfigError("year filter needs a year column");
    std::vector<std::size_t> text_idx;
    for (const auto& name : source.text_columns) text_idx.push_back(column_index(header, name, source.path));

    Table table;
    std::vector<double> values;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size()) {
            throw ParseError(r, rec.size(), "record has " + std::to_string(rec.size()) + " fields, header has " +
                                                std::to_string(header.size()));
        }
        std::optional<double> year;
        if (year_idx) {
            year = parse_cell(rec[*year_idx], r, *year_idx);
            if (source.year && (!year || *year != *source.year)) continue;
        }
        ++table.rows_read;
        std::vector<double> row;
        bool missing = false;
        for (std::size_t c : feature_idx) {
            const auto v = parse_cell(rec[c], r, c);
            missing = missing || !v;
            row.push_back(v.value_or(0.0));
        }
        const auto target = parse_cell(rec[target_idx], r, target_idx);
        if (missing || !target || (key_idx && rec[*key_idx].empty())) {
            ++table.rows_dropped;
            continue;
        }
        values.insert(values.end(), row.begin(), row.end());
        table.y.push_back(*target);
        table.keys.push_back(key_idx ? rec[*key_idx] : std::to_string(r - 1));
        table.years.push_back(year.value_or(0.0));
        for (std::size_t t = 0; t < text_idx.size(); ++t) table.text[source.text_columns[t]].push_back(rec[text_idx[t]]);
    }
    if (records.size() == 1) throw IoError(source.path.string() + " has no data rows");
    table.x = Matrix(table.y.size(), feature_idx.size(), std::move(values));
    return table;
}

std::vector<std::pair<std::string, std::string>> load_pair_list(const std::filesystem::path& path, char delimiter) {
    std::vector<std::pair<std::string, std::string>> pairs;
    const auto records = read_records(path, delimiter);
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].size() != 2) throw ParseError(r, records[r].size(), "pair list lines need exactly two keys");
        pairs.emplace_back(records[r][0], records[r][1]);
    }
    return pairs;
}

PairRelations build_pair_relations(const std::vector<std::string>& keys,
                                   const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::unordered_map<std::string, std::vector<std::size_t>> rows_of;
    for (std::size_t i = 0; i < keys.size(); ++i) rows_of[keys[i]].push_back(i);
    PairRelations out;
    out.r = Matrix(keys.size(), keys.size());
    for (const auto& [a, b] : pairs) {
        const auto ia = rows_of.find(a);
        const auto ib = rows_of.find(b);
        if (ia == rows_of.end() || ib == rows_of.end()) {
            out.skipped.emplace_back(a, b);
            continue;
        }
        if (a == b) continue;
        for (std::size_t i : ia->second)
            for (std::size_t j : ib->second) {
                out.r(i, j) = 1.0;
                out.r(j, i) = 1.0;
            }
    }
    return out;
}

std::string_view to_string(TaxonLevel level) {
    switch (level) {
        case TaxonLevel::order: return "order";
        case TaxonLevel::family: return "family";
        case TaxonLevel::genus: return "genus";
    }
    return "?";
}

TaxonLevel parse_taxon_level(std::string_view text) {
    if (text == "order") return TaxonLevel::order;
    if (text == "family") return TaxonLevel::family;
    if (text == "genus") return TaxonLevel::genus;
    throw ConfigError("unknown taxonomy level '" + std::string(text) + "' (expected order, family or genus)");
}

Taxonomy load_taxonomy(const std::filesystem::path& path, const std::string& key_column,
                       const std::array<std::string, 3>& level_columns, char delimiter) {
    const auto records = read_records(path, delimiter);
    if (records.empty()) throw IoError(path.string() + " is empty");
    const auto& header = records.front();
    const std::size_t key = column_index(header, key_column, path);
    std::array<std::size_t, 3> level{};
    for (std::size_t l = 0; l < 3; ++l) level[l] = column_index(header, level_columns[l], path);
    Taxonomy tax;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size()) throw ParseError(r, rec.size(), "taxonomy record has the wrong field count");
        if (rec[key].empty()) continue;
        tax.entries.try_emplace(rec[key], std::array<std::string, 3>{rec[level[0]], rec[level[1]], rec[level[2]]});
    }
    return tax;
}

TaxonomyRelations build_taxonomy_relations(const std::vector<std::string>& keys, const Taxonomy& taxonomy,
                                           TaxonLevel level) {
    TaxonomyRelations out;
    std::vector<std::string> labels;
    labels.reserve(keys.size());
    for (const auto& k : keys) {
        const auto it = taxonomy.entries.find(k);
        if (it == taxonomy.entries.end()) {
            out.uncovered.push_back(k);
            labels.emplace_back();
        } else {
            labels.push_back(it->second[static_cast<std::size_t>(level)]);
        }
    }
    out.r = build_category_relations(labels);
    return out;
}

Matrix build_category_relations(const std::vector<std::string>& labels) {
    const std::size_t n = labels.size();
    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i].empty()) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (labels[i] == labels[j]) {
                r(i, j) = 1.0;
                r(j, i) = 1.0;
            }
        }
    }
    return r;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw UndefinedError("KS statistic needs two nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double kolmogorov_sf(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    constexpr double pi = std::numbers::pi;
    if (lambda < 1.18) {
        // Jacobi-theta form of the same distribution; converges fast for small λ.
        double cdf = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double term = std::exp(-odd * odd * pi * pi / (8.0 * lambda * lambda));
            cdf += term;
            if (term < 1e-18 * cdf) break;
        }
        cdf *= std::sqrt(2.0 * pi) / lambda;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        q += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-18 * std::abs(q) || term == 0.0) break;
    }
    return std::clamp(q, 0.0, 1.0);
}

KsResult ks_informativeness(std::span<const double> y, const Matrix& r) {
    if (r.rows() != y.size() || r.cols() != y.size()) {
        throw ShapeError("relation matrix " + r.shape_string() + " does not match " + std::to_string(y.size()) +
                         " targets");
    }
    std::vector<double> related, unrelated;
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = i + 1; j < y.size(); ++j) (r(i, j) > 0.0 ? related : unrelated).push_back(std::abs(y[i] - y[j]));
    if (related.empty()) throw UndefinedError("no related pairs: KS diagnostic undefined");
    if (unrelated.empty()) throw UndefinedError("no unrelated pairs: KS diagnostic undefined");
    KsResult out;
    out.n_related = related.size();
    out.n_unrelated = unrelated.size();
    const double n1 = static_cast<double>(out.n_related), n2 = static_cast<double>(out.n_unrelated);
    out.statistic = ks_statistic(std::move(related), std::move(unrelated));
    out.p_value = kolmogorov_sf(std::sqrt(n1 * n2 / (n1 + n2)) * out.statistic);
    return out;
}

std::string_view to_string(PreprocessKind kind) { return kind == PreprocessKind::log ? "log" : "standardize"; }

PreprocessKind parse_preprocess(std::string_view text) {
    if (text == "log") return PreprocessKind::log;
    if (text == "standardize") return PreprocessKind::standardize;
    throw ConfigError("unknown preprocessing op '" + std::string(text) + "' (expected log or standardize)");
}

namespace {

Matrix apply_log(const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (!(m(r, c) > 0.0)) {
                throw ConfigError("log of non-positive value " + std::to_string(m(r, c)) + " at row " +
                                  std::to_string(r) + ", column " + std::to_string(c));
            }
            out(r, c) = std::log(m(r, c));
        }
    return out;
}

}  // namespace

Preprocessor Preprocessor::fit(const Matrix& m, std::span<const PreprocessKind> ops, std::span<const std::size_t> rows) {
    Preprocessor p;
    p.ops_.assign(ops.begin(), ops.end());
    Matrix current = m;
    for (PreprocessKind op : ops) {
        if (op == PreprocessKind::log) {
            current = apply_log(current);
            p.scalers_.push_back(Standardizer::identity(m.cols()));
        } else {
            Standardizer s = Standardizer::fit(current, rows);
            current = s.apply(current);
            p.scalers_.push_back(std::move(s));
        }
    }
    return p;
}

Matrix Preprocessor::apply(const Matrix& m) const {
    Matrix current = m;
    for (std::size_t k = 0; k < ops_.size(); ++k)
        current = ops_[k] == PreprocessKind::log ? apply_log(current) : scalers_[k].apply(current);
    return current;
}

meta::TreatmentDataset load_ihdp(const std::filesystem::path& path, std::size_t category_covariate) {
    const auto records = read_records(path, ',');
    if (records.empty()) throw IoError(path.string() + " is empty");
    const std::size_t cols = records.front().size();
    if (cols < 6) throw ParseError(0, cols, "IHDP rows need treatment, outcomes, means and covariates");
    const std::size_t n = records.size(), d = cols - 5;
    Matrix x(n, d);
    Vector w(n), y(n), tau(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (records[r].size() != cols) throw ParseError(r, records[r].size(), "IHDP row has the wrong field count");
        std::vector<double> v(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            const auto cell = parse_cell(records[r][c], r, c);
            if (!cell) throw ParseError(r, c, "missing value in IHDP file");
            v[c] = *cell;
        }
        w[r] = v[0];
        y[r] = v[1];
        tau[r] = v[4] - v[3];
        for (std::size_t c = 0; c < d; ++c) x(r, c) = v[5 + c];
    }
    return meta::build_ihdp_rel(x, std::move(w), std::move(y), std::move(tau), category_covariate);
}

}  // namespace relreg::io
