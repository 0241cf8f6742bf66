#ifndef OSDECOMP_DISTREG_HPP
#define OSDECOMP_DISTREG_HPP

#include <atomic>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include "osdecomp/grid.hpp"
#include "osdecomp/table.hpp"
#include "osdecomp/transform.hpp"

namespace osdecomp {

enum class ThresholdFlag { Fitted, AllBelow, AllAbove, SeparationFallback };

inline const char* to_string(ThresholdFlag f) {
    switch (f) {
        case ThresholdFlag::Fitted: return "FITTED";
        case ThresholdFlag::AllBelow: return "ALL_BELOW";
        case ThresholdFlag::AllAbove: return "ALL_ABOVE";
        default: return "SEPARATION_FALLBACK";
    }
}

inline ThresholdFlag threshold_flag_from_string(const std::string& s) {
    if (s == "FITTED") return ThresholdFlag::Fitted;
    if (s == "ALL_BELOW") return ThresholdFlag::AllBelow;
    if (s == "ALL_ABOVE") return ThresholdFlag::AllAbove;
    if (s == "SEPARATION_FALLBACK") return ThresholdFlag::SeparationFallback;
    throw InvalidSpec("unknown threshold flag '" + s + "'");
}

struct SolverConfig {
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;
    double ridge_jitter = 1e-10;       // added to the Hessian diagonal
    double separation_bound = 1e4;     // coefficient norm triggering fallback
    int threads = 1;                   // >1 fits thresholds in parallel
};

struct ThresholdDiagnostic {
    ThresholdFlag flag = ThresholdFlag::Fitted;
    bool converged = true;
    double gradient_norm = 0.0;
    int iterations = 0;
};

// Monotonization by running maximum. Preserves already-monotone curves
// and dominates the input pointwise.
inline std::vector<double> rearrange(std::vector<double> curve) {
    for (std::size_t m = 1; m < curve.size(); ++m)
        if (curve[m] < curve[m - 1]) curve[m] = curve[m - 1];
    return curve;
}

// Fitted conditional c.d.f. H(y|x) for one group: one binary model per
// grid threshold, link-linear in T(x) or saturated on discrete cells.
class ConditionalCdf {
public:
    const std::string& group() const { return group_; }
    const EvaluationGrid& grid() const { return *grid_; }
    const CovariateTransform& transform() const { return transform_; }
    Link link() const { return link_; }
    const std::vector<ThresholdDiagnostic>& diagnostics() const { return diagnostics_; }
    const Eigen::VectorXd& coefficients(std::size_t m) const { return coefficients_[m]; }

    // Thresholds where the solver failed to meet tolerance.
    std::vector<std::size_t> divergent_thresholds() const {
        std::vector<std::size_t> out;
        for (std::size_t m = 0; m < diagnostics_.size(); ++m)
            if (diagnostics_[m].flag == ThresholdFlag::Fitted && !diagnostics_[m].converged)
                out.push_back(m);
        return out;
    }

    // Raw (pre-rearrangement) prediction at grid index m.
    double raw_at(const std::vector<double>& x, std::size_t m) const {
        switch (diagnostics_[m].flag) {
            case ThresholdFlag::AllAbove: return 0.0;
            case ThresholdFlag::AllBelow: return 1.0;
            case ThresholdFlag::SeparationFallback: return fallback_[m];
            case ThresholdFlag::Fitted: break;
        }
        if (transform_.is_saturated()) {
            const auto& cells = cell_probs_[m];
            auto it = cells.find(transform_.cell_key(x));
            return it != cells.end() ? it->second : fallback_[m];
        }
        return link_cdf(link_, transform_(x).dot(coefficients_[m]));
    }

    // Monotone curve over the full grid for a fixed x, clamped to [0,1].
    std::vector<double> predict_curve(const std::vector<double>& x) const {
        if (x.size() != transform_.schema().size())
            throw NonConformableCovariates(
                "predict: expected " + std::to_string(transform_.schema().size()) +
                " covariates, got " + std::to_string(x.size()));
        std::vector<double> curve(grid_->size());
        for (std::size_t m = 0; m < curve.size(); ++m) {
            double v = raw_at(x, m);
            curve[m] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        }
        return rearrange(std::move(curve));
    }

    // Step interpolation: value at the largest grid point <= y; 0 below
    // the grid.
    double predict(const std::vector<double>& x, double y) const {
        std::size_t m = grid_->index_at(y);
        if (m == EvaluationGrid::npos) return 0.0;
        return predict_curve(x)[m];
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["group"] = group_;
        j["grid"] = grid_->points();
        j["link"] = std::string(to_string(link_));
        j["transform"] = transform_.to_json();
        j["thresholds"] = nlohmann::json::array();
        for (std::size_t m = 0; m < diagnostics_.size(); ++m) {
            nlohmann::json t;
            t["flag"] = std::string(to_string(diagnostics_[m].flag));
            t["converged"] = diagnostics_[m].converged;
            t["gradient_norm"] = diagnostics_[m].gradient_norm;
            t["iterations"] = diagnostics_[m].iterations;
            t["fallback"] = fallback_[m];
            if (transform_.is_saturated()) {
                nlohmann::json cells = nlohmann::json::array();
                for (const auto& [key, p] : cell_probs_[m])
                    cells.push_back({{"cell", key}, {"p", p}});
                t["cells"] = cells;
            } else {
                std::vector<double> c(coefficients_[m].data(),
                                      coefficients_[m].data() + coefficients_[m].size());
                t["coefficients"] = c;
            }
            j["thresholds"].push_back(t);
        }
        return j;
    }

    static ConditionalCdf from_json(const nlohmann::json& j) {
        ConditionalCdf model;
        model.group_ = j.at("group").get<std::string>();
        model.grid_ = std::make_shared<EvaluationGrid>(j.at("grid").get<std::vector<double>>());
        model.link_ = link_from_string(j.at("link").get<std::string>());
        model.transform_ = CovariateTransform::from_json(j.at("transform"));
        for (const auto& t : j.at("thresholds")) {
            ThresholdDiagnostic d;
            d.flag = threshold_flag_from_string(t.at("flag").get<std::string>());
            d.converged = t.at("converged").get<bool>();
            d.gradient_norm = t.at("gradient_norm").get<double>();
            d.iterations = t.at("iterations").get<int>();
            model.diagnostics_.push_back(d);
            model.fallback_.push_back(t.at("fallback").get<double>());
            if (model.transform_.is_saturated()) {
                std::map<std::vector<double>, double> cells;
                for (const auto& c : t.at("cells"))
                    cells[c.at("cell").get<std::vector<double>>()] = c.at("p").get<double>();
                model.cell_probs_.push_back(std::move(cells));
                model.coefficients_.emplace_back();
            } else {
                auto c = t.at("coefficients").get<std::vector<double>>();
                model.coefficients_.push_back(
                    Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
                model.cell_probs_.emplace_back();
            }
        }
        return model;
    }

private:
    friend ConditionalCdf fit_conditional_cdf(const ObservationTable&, const std::string&,
                                              const EvaluationGrid&, const CovariateTransform&,
                                              Link, const SolverConfig&);

    std::string group_;
    std::shared_ptr<const EvaluationGrid> grid_;
    CovariateTransform transform_;
    Link link_ = Link::Logit;
    std::vector<Eigen::VectorXd> coefficients_;                    // link-linear
    std::vector<std::map<std::vector<double>, double>> cell_probs_;  // saturated
    std::vector<double> fallback_;  // per-threshold weighted ECDF constant
    std::vector<ThresholdDiagnostic> diagnostics_;
};

namespace detail {

struct ThresholdFit {
    Eigen::VectorXd beta;
    std::map<std::vector<double>, double> cells;
    double fallback = 0.0;
    ThresholdDiagnostic diag;
};

inline double weighted_loglik(Link link, const Eigen::VectorXd& eta,
                              const Eigen::VectorXd& z, const Eigen::VectorXd& w) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double mu = link_cdf(link, eta[i]);
        mu = std::min(1.0 - 1e-15, std::max(1e-15, mu));
        ll += w[i] * (z[i] * std::log(mu) + (1.0 - z[i]) * std::log(1.0 - mu));
    }
    return ll;
}

// Newton / IRLS with step-halving for one threshold's weighted binary MLE.
// Columns are equilibrated (scaled to unit max-abs) before iterating:
// Newton is affine invariant, so this changes nothing analytically, but
// it keeps the Hessian solve accurate for badly scaled designs (e.g.
// polynomial bases). Gradient norm and separation bound are always
// checked in the original coordinates.
inline ThresholdFit fit_threshold(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& w, Link link,
                                  const SolverConfig& cfg) {
    ThresholdFit out;
    const Eigen::Index n = X.rows(), p = X.cols();
    const double wsum = w.sum();
    const double pbar = w.dot(z) / wsum;
    out.fallback = pbar;

    if (pbar == 0.0) {
        out.diag.flag = ThresholdFlag::AllAbove;
        return out;
    }
    if (pbar == 1.0) {
        out.diag.flag = ThresholdFlag::AllBelow;
        return out;
    }

    Eigen::VectorXd scale = X.cwiseAbs().colwise().maxCoeff();
    for (Eigen::Index j = 0; j < p; ++j)
        if (scale[j] == 0.0) scale[j] = 1.0;  // zero columns rejected upstream
    const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();

    // beta is in the scaled coordinates; eta = Xs * beta is unchanged
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta[0] = link_quantile(link, pbar) * scale[0];  // intercept is always term 0
    Eigen::VectorXd eta = Xs * beta;
    double ll = weighted_loglik(link, eta, z, w);

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        Eigen::VectorXd s(n), irls_w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double mu = link_cdf(link, eta[i]);
            mu = std::min(1.0 - 1e-12, std::max(1e-12, mu));
            if (link == Link::Logit) {
                s[i] = z[i] - mu;
                irls_w[i] = w[i] * mu * (1.0 - mu);
            } else {
                double phi = link_pdf(Link::Probit, eta[i]);
                s[i] = phi * (z[i] - mu) / (mu * (1.0 - mu));
                irls_w[i] = w[i] * phi * phi / (mu * (1.0 - mu));
            }
        }
        Eigen::VectorXd grad = Xs.transpose() * (w.cwiseProduct(s));
        // in original coordinates grad_orig = D * grad_scaled, D = diag(scale)
        out.diag.gradient_norm = grad.cwiseProduct(scale).norm();
        out.diag.iterations = it - 1;
        if (out.diag.gradient_norm <= cfg.gradient_tolerance) {
            out.beta = beta.cwiseQuotient(scale);
            out.diag.flag = ThresholdFlag::Fitted;
            out.diag.converged = true;
            return out;
        }

        Eigen::MatrixXd H = Xs.transpose() * irls_w.asDiagonal() * Xs;
        H.diagonal().array() += cfg.ridge_jitter;
        Eigen::VectorXd delta = H.ldlt().solve(grad);

        // Step-halving accepts rounding-level likelihood degradation:
        // near the optimum the true improvement per step falls below the
        // precision of the log likelihood itself, and insisting on strict
        // ascent would reject the full Newton step and stall.
        const double ll_slack = 1e-10 * (1.0 + std::abs(ll));
        double t = 1.0;
        Eigen::VectorXd beta_new;
        double ll_new = -std::numeric_limits<double>::infinity();
        for (int h = 0; h < 40; ++h) {
            beta_new = beta + t * delta;
            ll_new = weighted_loglik(link, Xs * beta_new, z, w);
            if (ll_new >= ll - ll_slack) break;
            t *= 0.5;
        }
        beta = beta_new;
        eta = Xs * beta;
        ll = ll_new;

        if (beta.cwiseQuotient(scale).norm() > cfg.separation_bound) {
            // Divergent coefficients with non-degenerate responses:
            // replace the threshold with the weighted ECDF constant.
            out.diag.flag = ThresholdFlag::SeparationFallback;
            out.diag.converged = true;
            out.diag.iterations = it;
            return out;
        }
    }

    // Failure to meet tolerance is reported via diagnostics (converged =
    // false); the fit continues with the last iterate.
    out.beta = beta.cwiseQuotient(scale);
    out.diag.flag = ThresholdFlag::Fitted;
    out.diag.converged = false;
    out.diag.iterations = cfg.max_iterations;
    return out;
}

}  // namespace detail

// One weighted binary MLE per grid threshold with responses 1{Y <= y_m}.
// Sampling weights enter as case weights, normalized to mean 1 so the
// fit is invariant to rescaling all weights. Saturated transforms are
// solved exactly cell by cell (the MLE of a saturated binary model is
// the within-cell weighted response share).
inline ConditionalCdf fit_conditional_cdf(const ObservationTable& table,
                                          const std::string& group,
                                          const EvaluationGrid& grid,
                                          const CovariateTransform& transform,
                                          Link link = Link::Logit,
                                          const SolverConfig& config = {}) {
    const int g = table.group_index(group);
    std::vector<const Observation*> obs;
    for (const auto& r : table.rows())
        if (r.group == g) obs.push_back(&r);
    if (obs.size() < 2)
        throw EmptyGroup("fit_conditional_cdf: fewer than 2 rows in group '" + group + "'");

    const std::size_t n = obs.size();
    const std::size_t M = grid.size();

    double wmean = 0.0;
    for (const auto* o : obs) wmean += o->weight;
    wmean /= static_cast<double>(n);
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) w[static_cast<Eigen::Index>(i)] = obs[i]->weight / wmean;

    ConditionalCdf model;
    model.group_ = group;
    model.grid_ = std::make_shared<EvaluationGrid>(grid);
    model.transform_ = transform;
    model.link_ = link;
    model.coefficients_.resize(M);
    model.cell_probs_.resize(M);
    model.fallback_.assign(M, 0.0);
    model.diagnostics_.resize(M);

    if (transform.is_saturated()) {
        // Group rows by cell once; each threshold is a weighted share.
        std::map<std::vector<double>, std::vector<std::size_t>> cells;
        for (std::size_t i = 0; i < n; ++i)
            cells[transform.cell_key(obs[i]->covariates)].push_back(i);
        for (std::size_t m = 0; m < M; ++m) {
            const double ym = grid[m];
            double num = 0.0, den = 0.0;
            for (const auto& [key, idx] : cells) {
                double cnum = 0.0, cden = 0.0;
                for (std::size_t i : idx) {
                    cden += obs[i]->weight;
                    if (obs[i]->outcome <= ym) cnum += obs[i]->weight;
                }
                model.cell_probs_[m][key] = cnum / cden;
                num += cnum;
                den += cden;
            }
            model.fallback_[m] = num / den;
            model.diagnostics_[m].flag = ThresholdFlag::Fitted;
        }
        return model;
    }

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(transform.dimension()));
    for (std::size_t i = 0; i < n; ++i)
        X.row(static_cast<Eigen::Index>(i)) = transform(obs[i]->covariates).transpose();
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (X.col(j).cwiseAbs().maxCoeff() == 0.0)
            throw RankDeficientDesign("design column " + std::to_string(j) + " is all zeros");

    // Thresholds are independent fits into preallocated slots, so results
    // are bit-identical whether run serially or in parallel.
    auto fit_one = [&](std::size_t m) {
        Eigen::VectorXd z(static_cast<Eigen::Index>(n));
        const double ym = grid[m];
        for (std::size_t i = 0; i < n; ++i)
            z[static_cast<Eigen::Index>(i)] = obs[i]->outcome <= ym ? 1.0 : 0.0;
        auto fit = detail::fit_threshold(X, z, w, link, config);
        model.coefficients_[m] = std::move(fit.beta);
        model.fallback_[m] = fit.fallback;
        model.diagnostics_[m] = fit.diag;
    };

    if (config.threads <= 1) {
        for (std::size_t m = 0; m < M; ++m) fit_one(m);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t m = next.fetch_add(1); m < M; m = next.fetch_add(1)) fit_one(m);
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < config.threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return model;
}

}  // namespace osdecomp

#endif
