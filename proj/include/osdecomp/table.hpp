#ifndef OSDECOMP_TABLE_HPP
#define OSDECOMP_TABLE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace osdecomp {

// All contract violations surface as subclasses of Error; the `code()`
// string is stable and machine-readable (the CLI echoes it in error JSON).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define OSDECOMP_DEFINE_ERROR(Name)                        \
    class Name : public Error {                            \
    public:                                                \
        explicit Name(const std::string& what)             \
            : Error(#Name, what) {}                        \
    }

OSDECOMP_DEFINE_ERROR(UnknownColumn);
OSDECOMP_DEFINE_ERROR(NonNumericValue);
OSDECOMP_DEFINE_ERROR(FewerThanTwoGroups);
OSDECOMP_DEFINE_ERROR(MoreThanTwoGroups);
OSDECOMP_DEFINE_ERROR(EmptyGroup);
OSDECOMP_DEFINE_ERROR(EmptyInput);
OSDECOMP_DEFINE_ERROR(LengthMismatch);
OSDECOMP_DEFINE_ERROR(DegenerateOutcome);
OSDECOMP_DEFINE_ERROR(StrategyMismatch);
OSDECOMP_DEFINE_ERROR(RankDeficientDesign);
OSDECOMP_DEFINE_ERROR(NonConformableCovariates);
OSDECOMP_DEFINE_ERROR(EmptySelector);
OSDECOMP_DEFINE_ERROR(GridMismatch);
OSDECOMP_DEFINE_ERROR(EmptyCommonSupport);
OSDECOMP_DEFINE_ERROR(WrongMode);
OSDECOMP_DEFINE_ERROR(InvalidSpec);
OSDECOMP_DEFINE_ERROR(NotDiscrete);
OSDECOMP_DEFINE_ERROR(InvalidTable);
OSDECOMP_DEFINE_ERROR(InvalidGrid);

#undef OSDECOMP_DEFINE_ERROR

enum class CovariateKind { Continuous, Discrete };

struct CovariateSpec {
    std::string name;
    CovariateKind kind = CovariateKind::Continuous;
};

struct Observation {
    double outcome = 0.0;
    int group = 0;  // index into ObservationTable::group_labels
    double weight = 1.0;
    std::vector<double> covariates;
};

// The weighted sample both groups share. Immutable after construction.
class ObservationTable {
public:
    ObservationTable(std::vector<Observation> rows,
                     std::array<std::string, 2> group_labels,
                     std::vector<CovariateSpec> schema)
        : rows_(std::move(rows)),
          group_labels_(std::move(group_labels)),
          schema_(std::move(schema)) {
        validate();
    }

    const std::vector<Observation>& rows() const { return rows_; }
    const std::array<std::string, 2>& group_labels() const { return group_labels_; }
    const std::vector<CovariateSpec>& schema() const { return schema_; }
    std::size_t size() const { return rows_.size(); }

    int group_index(const std::string& label) const {
        if (label == group_labels_[0]) return 0;
        if (label == group_labels_[1]) return 1;
        throw InvalidTable("unknown group label '" + label + "'");
    }

    std::size_t count(int group) const {
        std::size_t n = 0;
        for (const auto& r : rows_)
            if (r.group == group) ++n;
        return n;
    }

    // Swaps the two group labels (and every row's group index). Used for
    // the alternative counterfactual direction and relabeling checks.
    ObservationTable swapped() const {
        std::vector<Observation> rows = rows_;
        for (auto& r : rows) r.group = 1 - r.group;
        return ObservationTable(std::move(rows), {group_labels_[1], group_labels_[0]}, schema_);
    }

private:
    void validate() const {
        if (group_labels_[0] == group_labels_[1])
            throw InvalidTable("group labels must be distinct");
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const auto& r = rows_[i];
            if (r.group != 0 && r.group != 1)
                throw InvalidTable("row " + std::to_string(i) + ": bad group index");
            if (!(r.weight > 0.0) || !std::isfinite(r.weight))
                throw InvalidTable("row " + std::to_string(i) + ": weight must be finite and > 0");
            if (!std::isfinite(r.outcome))
                throw InvalidTable("row " + std::to_string(i) + ": non-finite outcome");
            if (r.covariates.size() != schema_.size())
                throw InvalidTable("row " + std::to_string(i) + ": covariate length mismatch");
            for (double x : r.covariates)
                if (!std::isfinite(x))
                    throw InvalidTable("row " + std::to_string(i) + ": non-finite covariate");
            (r.group == 0 ? n0 : n1)++;
        }
        if (n0 < 2 || n1 < 2)
            throw EmptyGroup("each group needs at least 2 rows (got " + std::to_string(n0) +
                             " and " + std::to_string(n1) + ")");
    }

    std::vector<Observation> rows_;
    std::array<std::string, 2> group_labels_;
    std::vector<CovariateSpec> schema_;
};

}  // namespace osdecomp

#endif
