#ifndef OSDECOMP_CSV_HPP
#define OSDECOMP_CSV_HPP

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "osdecomp/table.hpp"

namespace osdecomp {

// Column mapping for load_table. Covariate columns carry their kind.
struct SchemaConfig {
    std::string outcome_column;
    std::string group_column;
    std::string weight_column;  // empty: all weights default to 1
    std::vector<CovariateSpec> covariates;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::string trim(std::string s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

// 17 significant digits round-trips IEEE doubles exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline ObservationTable load_table(std::istream& in, const SchemaConfig& cfg) {
    std::string header;
    if (!std::getline(in, header))
        throw EmptyInput("load_table: empty input");
    auto cols = detail::split_csv_line(header);
    for (auto& c : cols) c = detail::trim(c);

    auto find_col = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return i;
        throw UnknownColumn("column '" + name + "' not found in header");
    };

    const std::size_t outcome_idx = find_col(cfg.outcome_column);
    const std::size_t group_idx = find_col(cfg.group_column);
    const bool has_weight = !cfg.weight_column.empty();
    const std::size_t weight_idx = has_weight ? find_col(cfg.weight_column) : 0;
    std::vector<std::size_t> cov_idx;
    for (const auto& cv : cfg.covariates) cov_idx.push_back(find_col(cv.name));

    std::vector<Observation> rows;
    std::vector<std::string> labels;  // order of first appearance
    std::string line;
    std::size_t row_no = 0;  // 1-based data row index
    while (std::getline(in, line)) {
        ++row_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != cols.size())
            throw NonNumericValue("row " + std::to_string(row_no) + ": expected " +
                                  std::to_string(cols.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        auto numeric = [&](std::size_t col, const char* what) {
            double v;
            if (!detail::parse_double(fields[col], v) || !std::isfinite(v))
                throw NonNumericValue("row " + std::to_string(row_no) + ", column '" +
                                      cols[col] + "': bad " + what + " value '" +
                                      detail::trim(fields[col]) + "'");
            return v;
        };

        Observation obs;
        obs.outcome = numeric(outcome_idx, "outcome");
        if (has_weight) {
            obs.weight = numeric(weight_idx, "weight");
            if (!(obs.weight > 0.0))
                throw NonNumericValue("row " + std::to_string(row_no) + ", column '" +
                                      cols[weight_idx] + "': weight must be > 0");
        }
        for (std::size_t k = 0; k < cov_idx.size(); ++k)
            obs.covariates.push_back(numeric(cov_idx[k], "covariate"));

        std::string label = detail::trim(fields[group_idx]);
        if (label.empty())
            throw NonNumericValue("row " + std::to_string(row_no) + ": empty group label");
        std::size_t g = labels.size();
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) { g = i; break; }
        if (g == labels.size()) {
            if (labels.size() == 2)
                throw MoreThanTwoGroups("third group label '" + label + "' at row " +
                                        std::to_string(row_no));
            labels.push_back(label);
        }
        obs.group = static_cast<int>(g);
        rows.push_back(std::move(obs));
    }
    if (labels.size() < 2)
        throw FewerThanTwoGroups("need exactly two group labels, found " +
                                 std::to_string(labels.size()));
    return ObservationTable(std::move(rows), {labels[0], labels[1]}, cfg.covariates);
}

inline ObservationTable load_table(const std::string& path, const SchemaConfig& cfg) {
    std::ifstream in(path);
    if (!in)
        throw EmptyInput("load_table: cannot open '" + path + "'");
    return load_table(in, cfg);
}

// Writes the standard CSV schema: outcome, group, weight, covariates.
// Bit-exact round trip with load_table for finite inputs.
inline void save_table(std::ostream& out, const ObservationTable& table,
                       const std::string& outcome_name = "outcome",
                       const std::string& group_name = "group",
                       const std::string& weight_name = "weight") {
    out << outcome_name << ',' << group_name << ',' << weight_name;
    for (const auto& cv : table.schema()) out << ',' << cv.name;
    out << '\n';
    for (const auto& r : table.rows()) {
        out << detail::format_double(r.outcome) << ','
            << table.group_labels()[static_cast<std::size_t>(r.group)] << ','
            << detail::format_double(r.weight);
        for (double x : r.covariates) out << ',' << detail::format_double(x);
        out << '\n';
    }
}

inline SchemaConfig standard_schema(const std::vector<CovariateSpec>& covariates) {
    return SchemaConfig{"outcome", "group", "weight", covariates};
}

}  // namespace osdecomp

#endif
