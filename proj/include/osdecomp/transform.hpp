#ifndef OSDECOMP_TRANSFORM_HPP
#define OSDECOMP_TRANSFORM_HPP

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "osdecomp/table.hpp"

namespace osdecomp {

enum class Link { Logit, Probit };

inline const char* to_string(Link l) { return l == Link::Logit ? "logit" : "probit"; }

inline Link link_from_string(const std::string& s) {
    if (s == "logit") return Link::Logit;
    if (s == "probit") return Link::Probit;
    throw InvalidSpec("unknown link '" + s + "'");
}

inline double link_cdf(Link link, double t) {
    if (link == Link::Logit) return 1.0 / (1.0 + std::exp(-t));
    return 0.5 * std::erfc(-t / std::sqrt(2.0));
}

inline double link_pdf(Link link, double t) {
    if (link == Link::Logit) {
        double p = link_cdf(Link::Logit, t);
        return p * (1.0 - p);
    }
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
}

inline double link_quantile(Link link, double p) {
    if (link == Link::Logit) return std::log(p / (1.0 - p));
    // Newton on the probit; p is always interior when this is called.
    double t = 0.0;
    for (int it = 0; it < 100; ++it) {
        double f = link_cdf(Link::Probit, t) - p;
        double d = link_pdf(Link::Probit, t);
        double step = f / d;
        t -= step;
        if (std::abs(step) < 1e-14) break;
    }
    return t;
}

// Deterministic basis map x -> T(x): intercept, polynomial terms in each
// continuous covariate, dummy expansion of discrete covariates, optional
// pairwise raw-product interactions. A transform can instead be marked
// saturated (full interaction of discrete covariates, no continuous
// ones); saturated fits are handled cell-wise in distreg.
class CovariateTransform {
public:
    struct Term {
        enum Kind { Intercept, Power, Dummy, Interaction } kind = Intercept;
        std::size_t cov = 0;      // Power/Dummy: covariate index; Interaction: first index
        std::size_t cov2 = 0;     // Interaction: second index
        int degree = 1;           // Power
        double level = 0.0;       // Dummy
    };

    // Polynomial basis of the given degree in each continuous covariate,
    // dummies for each discrete covariate's non-base levels (levels read
    // from the table), plus optional named interaction pairs.
    static CovariateTransform polynomial(
        const ObservationTable& table, int degree = 3,
        const std::vector<std::pair<std::string, std::string>>& interactions = {}) {
        CovariateTransform t;
        t.schema_ = table.schema();
        t.terms_.push_back(Term{Term::Intercept, 0, 0, 1, 0.0});
        for (std::size_t k = 0; k < t.schema_.size(); ++k) {
            if (t.schema_[k].kind == CovariateKind::Continuous) {
                for (int d = 1; d <= degree; ++d)
                    t.terms_.push_back(Term{Term::Power, k, 0, d, 0.0});
            } else {
                std::set<double> levels;
                for (const auto& r : table.rows()) levels.insert(r.covariates[k]);
                bool first = true;
                for (double v : levels) {
                    if (first) { first = false; continue; }  // base level
                    t.terms_.push_back(Term{Term::Dummy, k, 0, 1, v});
                }
            }
        }
        for (const auto& [a, b] : interactions) {
            std::size_t ka = t.index_of(a), kb = t.index_of(b);
            t.terms_.push_back(Term{Term::Interaction, ka, kb, 1, 0.0});
        }
        return t;
    }

    // Saturated on the discrete covariates: one free probability per
    // observed cell. Requires an all-discrete schema.
    static CovariateTransform saturated(const ObservationTable& table) {
        CovariateTransform t;
        t.schema_ = table.schema();
        t.saturated_ = true;
        for (const auto& cv : t.schema_)
            if (cv.kind != CovariateKind::Discrete)
                throw StrategyMismatch("saturated transform requires all-discrete covariates");
        return t;
    }

    bool is_saturated() const { return saturated_; }
    std::size_t dimension() const { return terms_.size(); }
    const std::vector<CovariateSpec>& schema() const { return schema_; }

    Eigen::VectorXd operator()(const std::vector<double>& x) const {
        if (x.size() != schema_.size())
            throw NonConformableCovariates("expected " + std::to_string(schema_.size()) +
                                           " covariates, got " + std::to_string(x.size()));
        Eigen::VectorXd row(static_cast<Eigen::Index>(terms_.size()));
        for (std::size_t j = 0; j < terms_.size(); ++j) {
            const Term& t = terms_[j];
            double v = 1.0;
            switch (t.kind) {
                case Term::Intercept: v = 1.0; break;
                case Term::Power: v = std::pow(x[t.cov], t.degree); break;
                case Term::Dummy: v = (x[t.cov] == t.level) ? 1.0 : 0.0; break;
                case Term::Interaction: v = x[t.cov] * x[t.cov2]; break;
            }
            row[static_cast<Eigen::Index>(j)] = v;
        }
        return row;
    }

    // Cell key for saturated fits: the full discrete covariate vector.
    std::vector<double> cell_key(const std::vector<double>& x) const {
        if (x.size() != schema_.size())
            throw NonConformableCovariates("cell_key: covariate length mismatch");
        return x;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["saturated"] = saturated_;
        j["schema"] = nlohmann::json::array();
        for (const auto& cv : schema_)
            j["schema"].push_back({{"name", cv.name},
                                   {"kind", cv.kind == CovariateKind::Continuous
                                                ? "continuous" : "discrete"}});
        j["terms"] = nlohmann::json::array();
        for (const auto& t : terms_) {
            static const char* kinds[] = {"intercept", "power", "dummy", "interaction"};
            j["terms"].push_back({{"kind", kinds[t.kind]},
                                  {"cov", t.cov},
                                  {"cov2", t.cov2},
                                  {"degree", t.degree},
                                  {"level", t.level}});
        }
        return j;
    }

    static CovariateTransform from_json(const nlohmann::json& j) {
        CovariateTransform t;
        t.saturated_ = j.at("saturated").get<bool>();
        for (const auto& s : j.at("schema")) {
            CovariateSpec cv;
            cv.name = s.at("name").get<std::string>();
            cv.kind = s.at("kind").get<std::string>() == "continuous"
                          ? CovariateKind::Continuous : CovariateKind::Discrete;
            t.schema_.push_back(cv);
        }
        for (const auto& tj : j.at("terms")) {
            Term term;
            std::string kind = tj.at("kind").get<std::string>();
            term.kind = kind == "intercept" ? Term::Intercept
                      : kind == "power" ? Term::Power
                      : kind == "dummy" ? Term::Dummy : Term::Interaction;
            term.cov = tj.at("cov").get<std::size_t>();
            term.cov2 = tj.at("cov2").get<std::size_t>();
            term.degree = tj.at("degree").get<int>();
            term.level = tj.at("level").get<double>();
            t.terms_.push_back(term);
        }
        return t;
    }

private:
    std::size_t index_of(const std::string& name) const {
        for (std::size_t k = 0; k < schema_.size(); ++k)
            if (schema_[k].name == name) return k;
        throw UnknownColumn("interaction names unknown covariate '" + name + "'");
    }

    std::vector<CovariateSpec> schema_;
    std::vector<Term> terms_;
    bool saturated_ = false;
};

}  // namespace osdecomp

#endif
