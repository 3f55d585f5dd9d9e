#include "metrology/cfa.hpp"

#include "json_util.hpp"
#include "metrology/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

namespace metrology {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Above this gradient norm an unconverged fit is an error rather than a warning.
constexpr double kHardGradientLimit = 1e-4;

struct Optimum {
    Eigen::VectorXd theta;
    double f = kInf;
    double gradient_norm = kInf;
    std::size_t iterations = 0;
};

// BFGS on the inverse Hessian with Armijo backtracking. Accepted steps never
// increase f.
Optimum minimize(const Discrepancy& d, Eigen::VectorXd x, const CfaOptions& options) {
    const auto m = static_cast<Eigen::Index>(d.size());
    Eigen::VectorXd g(m);
    double f = d.value_and_gradient(x, g);
    if (!std::isfinite(f)) throw computation_error("bad_start", "model-implied covariance is not positive definite at the start");
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m);
    Optimum out;
    std::size_t iter = 0;
    for (; iter < options.max_iter; ++iter) {
        if (m == 0 || g.cwiseAbs().maxCoeff() < options.gradient_tolerance) break;
        Eigen::VectorXd dir = -h * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            h.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd x_new, g_new(m);
        double f_new = kInf;
        for (int tries = 0; tries < 60; ++tries, step *= 0.5) {
            x_new = x + step * dir;
            f_new = d.value_and_gradient(x_new, g_new);
            if (!std::isfinite(f_new)) continue;
            if (f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            // At the rounding floor of f, accept non-increasing steps that shrink the gradient.
            if (f_new <= f && g_new.cwiseAbs().maxCoeff() < g.cwiseAbs().maxCoeff()) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (h.isIdentity()) break;
            h.setIdentity();
            continue;
        }
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(m, m) - rho * s * y.transpose();
            h = left * h * left.transpose() + rho * s * s.transpose();
        }
        x = std::move(x_new);
        g = g_new;
        f = f_new;
    }
    out.theta = std::move(x);
    out.f = f;
    out.gradient_norm = m == 0 ? 0.0 : g.cwiseAbs().maxCoeff();
    out.iterations = iter;
    return out;
}

Eigen::MatrixXd implied(const CfaParameters& params) {
    Eigen::MatrixXd sigma = params.loadings * params.phi * params.loadings.transpose();
    sigma.diagonal() += params.uniquenesses;
    return sigma;
}

// Flip factors whose loadings sum negative, with the matching Phi rows and columns.
void orient(CfaParameters& params) {
    for (Eigen::Index f = 0; f < params.loadings.cols(); ++f) {
        if (params.loadings.col(f).sum() < 0.0) {
            params.loadings.col(f) *= -1.0;
            params.phi.row(f) *= -1.0;
            params.phi.col(f) *= -1.0;
        }
    }
}

std::vector<std::size_t> factor_index(const ConfirmatorySpec& spec) {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < spec.structure.size(); ++f) {
        for (std::size_t m = 0; m < spec.structure[f].second.size(); ++m) out.push_back(f);
    }
    return out;
}

// Fit on a correlation matrix and fill the standardized parts of the model.
MeasurementModel fit_correlation(const Eigen::MatrixXd& r, const ConfirmatorySpec& spec, std::size_t n,
                                 const CfaOptions& options) {
    const auto factor_of = factor_index(spec);
    const auto p = static_cast<Eigen::Index>(factor_of.size());
    const auto k = static_cast<Eigen::Index>(spec.structure.size());
    const Discrepancy d(r, factor_of);

    CfaParameters start;
    start.loadings = Eigen::MatrixXd::Zero(p, k);
    for (Eigen::Index j = 0; j < p; ++j) start.loadings(j, static_cast<Eigen::Index>(factor_of[j])) = 0.7;
    start.uniquenesses = Eigen::VectorXd::Constant(p, 0.3);
    start.phi = Eigen::MatrixXd::Identity(k, k);
    Optimum best = minimize(d, d.pack(start), options);

    if (options.multi_start) {
        std::mt19937_64 rng(options.seed);
        std::uniform_real_distribution<double> scale(0.5, 1.5);
        std::normal_distribution<double> jitter(0.0, 0.3);
        for (std::size_t s = 1; s < options.starts; ++s) {
            Eigen::VectorXd theta = d.pack(start);
            for (Eigen::Index j = 0; j < p; ++j) theta(j) *= scale(rng);
            for (Eigen::Index i = 2 * p; i < theta.size(); ++i) theta(i) = jitter(rng);
            try {
                Optimum candidate = minimize(d, theta, options);
                if (candidate.f < best.f - 1e-12) best = std::move(candidate);
            } catch (const Error&) {
                // A start with a non-PD implied matrix is skipped.
            }
        }
    }

    if (best.gradient_norm > kHardGradientLimit) {
        throw computation_error("no_convergence", "CFA did not converge: gradient norm " + std::to_string(best.gradient_norm) +
                                                      " after " + std::to_string(best.iterations) + " iterations");
    }

    CfaParameters est = d.unpack(best.theta);
    orient(est);
    const Eigen::MatrixXd sigma = implied(est);

    MeasurementModel model;
    model.spec = spec;
    model.metrics = spec.metrics();
    model.factors = spec.factor_names();
    model.factor_correlations = est.phi;
    model.standardized_loadings = sigma.diagonal().cwiseSqrt().cwiseInverse().asDiagonal() * est.loadings;
    model.standardized_uniquenesses = est.uniquenesses.cwiseQuotient(sigma.diagonal());
    model.score_coefficients = score_coefficients(est.loadings, est.phi, est.uniquenesses);
    model.discrepancy = std::max(0.0, best.f);
    model.gradient_norm = best.gradient_norm;
    model.iterations = best.iterations;
    model.converged = best.gradient_norm <= options.gradient_tolerance;
    if (!model.converged) {
        model.warnings.push_back("gradient norm " + std::to_string(best.gradient_norm) + " above tolerance");
    }
    model.n = n;
    for (Eigen::Index j = 0; j < p; ++j) {
        const bool heywood = est.uniquenesses(j) - kUniquenessFloor < kUniquenessFloor;
        model.heywood_flags.push_back(heywood);
        if (heywood) model.warnings.push_back("Heywood case: uniqueness of " + model.metrics[j] + " at its lower bound");
    }
    for (auto& w : spec.warnings()) model.warnings.push_back(std::move(w));
    // Standardized-scale estimates; callers rescale.
    model.loadings = est.loadings;
    model.uniquenesses = est.uniquenesses;
    return model;
}

void rescale(MeasurementModel& model, const Eigen::VectorXd& sds, const Eigen::VectorXd& means) {
    model.loadings = sds.asDiagonal() * model.loadings;
    model.uniquenesses = model.uniquenesses.cwiseProduct(sds.cwiseAbs2());
    model.sds = sds;
    model.means = means;
}

Eigen::MatrixXd checked_correlation(const Eigen::MatrixXd& s) {
    const auto p = s.rows();
    if (s.cols() != p) throw validation_error("shape_mismatch", "covariance matrix must be square");
    if ((s.diagonal().array() <= 0.0).any()) throw computation_error("singular_matrix", "sample covariance has a zero variance");
    const Eigen::VectorXd inv_sd = s.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd r = inv_sd.asDiagonal() * s * inv_sd.asDiagonal();
    r.diagonal().setOnes();
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success || Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r, Eigen::EigenvaluesOnly).eigenvalues()(0) <= 1e-12) {
        throw computation_error("singular_matrix", "sample covariance matrix is not positive definite");
    }
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConfirmatorySpec
// ---------------------------------------------------------------------------

std::vector<std::string> ConfirmatorySpec::factor_names() const {
    std::vector<std::string> out;
    for (const auto& [f, _] : structure) out.push_back(f);
    return out;
}

std::vector<std::string> ConfirmatorySpec::metrics() const {
    std::vector<std::string> out;
    for (const auto& [_, ms] : structure) out.insert(out.end(), ms.begin(), ms.end());
    return out;
}

void ConfirmatorySpec::validate() const {
    if (structure.empty()) throw validation_error("empty_structure", "confirmatory structure has no factors");
    std::set<std::string> seen_factors, seen_metrics;
    for (const auto& [f, ms] : structure) {
        if (!seen_factors.insert(f).second) throw validation_error("duplicate_factor", "factor '" + f + "' listed twice");
        if (ms.empty()) throw validation_error("empty_factor", "factor '" + f + "' has no metrics");
        for (const auto& m : ms) {
            if (!seen_metrics.insert(m).second) {
                throw validation_error("duplicate_metric", "metric '" + m + "' assigned to more than one factor");
            }
        }
    }
}

std::vector<std::string> ConfirmatorySpec::warnings() const {
    std::vector<std::string> out;
    for (const auto& [f, ms] : structure) {
        if (ms.size() < 3) {
            out.push_back("factor '" + f + "' has " + std::to_string(ms.size()) + " metrics; at least 3 are needed for identification");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Discrepancy
// ---------------------------------------------------------------------------

Discrepancy::Discrepancy(Eigen::MatrixXd s, std::vector<std::size_t> factor_of)
    : s_(std::move(s)), factor_of_(std::move(factor_of)) {
    p_ = factor_of_.size();
    k_ = factor_of_.empty() ? 0 : *std::max_element(factor_of_.begin(), factor_of_.end()) + 1;
    if (static_cast<std::size_t>(s_.rows()) != p_ || s_.rows() != s_.cols()) {
        throw validation_error("shape_mismatch", "covariance size does not match the structure");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s_);
    if (llt.info() != Eigen::Success) throw computation_error("singular_matrix", "sample covariance is not positive definite");
    log_det_s_ = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

std::size_t Discrepancy::size() const { return 2 * p_ + k_ * (k_ - 1) / 2; }

CfaParameters Discrepancy::unpack(const Eigen::VectorXd& theta) const {
    const auto p = static_cast<Eigen::Index>(p_);
    const auto k = static_cast<Eigen::Index>(k_);
    CfaParameters out;
    out.loadings = Eigen::MatrixXd::Zero(p, k);
    out.uniquenesses.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        out.loadings(j, static_cast<Eigen::Index>(factor_of_[j])) = theta(j);
        out.uniquenesses(j) = kUniquenessFloor + std::exp(theta(p + j));
    }
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(k, k);
    Eigen::Index idx = 2 * p;
    for (Eigen::Index i = 1; i < k; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) c(i, j) = theta(idx++);
        c.row(i).normalize();
    }
    out.phi = c * c.transpose();
    out.phi.diagonal().setOnes();
    return out;
}

Eigen::VectorXd Discrepancy::pack(const CfaParameters& params) const {
    const auto p = static_cast<Eigen::Index>(p_);
    const auto k = static_cast<Eigen::Index>(k_);
    Eigen::VectorXd theta(static_cast<Eigen::Index>(size()));
    for (Eigen::Index j = 0; j < p; ++j) {
        theta(j) = params.loadings(j, static_cast<Eigen::Index>(factor_of_[j]));
        theta(p + j) = std::log(std::max(params.uniquenesses(j) - kUniquenessFloor, 1e-300));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(params.phi);
    if (llt.info() != Eigen::Success) throw validation_error("bad_phi", "factor correlation matrix is not positive definite");
    const Eigen::MatrixXd c = llt.matrixL();
    Eigen::Index idx = 2 * p;
    for (Eigen::Index i = 1; i < k; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) theta(idx++) = c(i, j) / c(i, i);
    }
    return theta;
}

double Discrepancy::value(const Eigen::VectorXd& theta) const {
    const Eigen::MatrixXd sigma = implied(unpack(theta));
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) return kInf;
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return log_det + llt.solve(s_).trace() - log_det_s_ - static_cast<double>(p_);
}

double Discrepancy::value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const {
    const auto p = static_cast<Eigen::Index>(p_);
    const auto k = static_cast<Eigen::Index>(k_);
    const CfaParameters params = unpack(theta);
    const Eigen::MatrixXd sigma = implied(params);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    gradient.setZero(static_cast<Eigen::Index>(size()));
    if (llt.info() != Eigen::Success) return kInf;
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd sigma_inv_s = sigma_inv * s_;
    const double f = log_det + sigma_inv_s.trace() - log_det_s_ - static_cast<double>(p_);

    // dF = tr(W dSigma), W = Sigma^-1 - Sigma^-1 S Sigma^-1.
    const Eigen::MatrixXd w = sigma_inv - sigma_inv_s * sigma_inv;
    const Eigen::MatrixXd grad_l = 2.0 * w * params.loadings * params.phi;
    for (Eigen::Index j = 0; j < p; ++j) {
        gradient(j) = grad_l(j, static_cast<Eigen::Index>(factor_of_[j]));
        gradient(p + j) = w(j, j) * (params.uniquenesses(j) - kUniquenessFloor);
    }
    if (k > 1) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(k, k);
        Eigen::Index idx = 2 * p;
        for (Eigen::Index i = 1; i < k; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) m(i, j) = theta(idx++);
        }
        Eigen::MatrixXd c = m;
        for (Eigen::Index i = 0; i < k; ++i) c.row(i).normalize();
        const Eigen::MatrixXd grad_c = 2.0 * (params.loadings.transpose() * w * params.loadings) * c;
        idx = 2 * p;
        for (Eigen::Index i = 1; i < k; ++i) {
            const Eigen::RowVectorXd ci = c.row(i);
            const Eigen::RowVectorXd gi = grad_c.row(i);
            const Eigen::RowVectorXd gm = (gi - ci * ci.dot(gi)) / m.row(i).norm();
            for (Eigen::Index j = 0; j < i; ++j) gradient(idx++) = gm(j);
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Fitting and scores
// ---------------------------------------------------------------------------

Eigen::MatrixXd MeasurementModel::implied_covariance() const {
    Eigen::MatrixXd sigma = loadings * factor_correlations * loadings.transpose();
    sigma.diagonal() += uniquenesses;
    return sigma;
}

MeasurementModel fit(const MetricDataset& ds, const ConfirmatorySpec& spec, const CfaOptions& options) {
    spec.validate();
    const auto metrics = spec.metrics();
    for (const auto& m : metrics) {
        if (!ds.find(m)) throw validation_error("unknown_metric", "metric '" + m + "' is not in the dataset");
    }
    const MetricDataset sub = ds.select(metrics);
    const Eigen::MatrixXd x = sub.complete_cases();
    const auto n = static_cast<std::size_t>(x.rows());
    if (n <= metrics.size()) {
        throw validation_error("insufficient_cases", "CFA needs more complete cases (" + std::to_string(n) +
                                                         ") than metrics (" + std::to_string(metrics.size()) + ")");
    }
    const Eigen::VectorXd means = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - means.transpose();
    const Eigen::MatrixXd s = centered.transpose() * centered / static_cast<double>(n - 1);
    MeasurementModel model = fit_correlation(checked_correlation(s), spec, n, options);
    rescale(model, s.diagonal().cwiseSqrt(), means);
    return model;
}

MeasurementModel fit_covariance(const Eigen::MatrixXd& s, const ConfirmatorySpec& spec, std::size_t n,
                                const CfaOptions& options) {
    spec.validate();
    if (static_cast<std::size_t>(s.rows()) != spec.metrics().size()) {
        throw validation_error("shape_mismatch", "covariance size does not match the structure");
    }
    MeasurementModel model = fit_correlation(checked_correlation(s), spec, n, options);
    rescale(model, s.diagonal().cwiseSqrt(), Eigen::VectorXd::Zero(s.rows()));
    return model;
}

Eigen::MatrixXd score_coefficients(const Eigen::MatrixXd& loadings, const Eigen::MatrixXd& phi,
                                   const Eigen::VectorXd& uniquenesses) {
    Eigen::MatrixXd sigma = loadings * phi * loadings.transpose();
    sigma.diagonal() += uniquenesses;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw computation_error("singular_matrix", "model-implied covariance is not positive definite");
    // B = Phi L' Sigma^-1 = (Sigma^-1 L Phi)'.
    return llt.solve(loadings * phi).transpose();
}

MeasurementModel make_model(const ConfirmatorySpec& spec, const Eigen::MatrixXd& loadings, const Eigen::MatrixXd& phi,
                            const Eigen::VectorXd& uniquenesses) {
    spec.validate();
    MeasurementModel model;
    model.spec = spec;
    model.metrics = spec.metrics();
    model.factors = spec.factor_names();
    const auto p = static_cast<Eigen::Index>(model.metrics.size());
    const auto k = static_cast<Eigen::Index>(model.factors.size());
    if (loadings.rows() != p || loadings.cols() != k || phi.rows() != k || phi.cols() != k || uniquenesses.size() != p) {
        throw validation_error("shape_mismatch", "parameter shapes do not match the structure");
    }
    model.loadings = loadings;
    model.factor_correlations = phi;
    model.uniquenesses = uniquenesses;
    const Eigen::VectorXd var = model.implied_covariance().diagonal();
    model.standardized_loadings = var.cwiseSqrt().cwiseInverse().asDiagonal() * loadings;
    model.standardized_uniquenesses = uniquenesses.cwiseQuotient(var);
    model.means = Eigen::VectorXd::Zero(p);
    model.sds = Eigen::VectorXd::Ones(p);
    model.score_coefficients = score_coefficients(loadings, phi, uniquenesses);
    model.converged = true;
    for (Eigen::Index j = 0; j < p; ++j) model.heywood_flags.push_back(uniquenesses(j) < 2.0 * kUniquenessFloor);
    return model;
}

Eigen::MatrixXd factor_scores(const MeasurementModel& model, const MetricDataset& ds) {
    std::vector<std::size_t> cols;
    for (const auto& m : model.metrics) {
        const auto idx = ds.find(m);
        if (!idx) throw validation_error("unknown_metric", "metric '" + m + "' is not in the dataset");
        cols.push_back(*idx);
    }
    const auto n = static_cast<Eigen::Index>(ds.n_entities());
    const auto p = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd scores(n, static_cast<Eigen::Index>(model.k()));
    Eigen::VectorXd z(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        bool complete = true;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (ds.is_missing(static_cast<std::size_t>(i), cols[j])) {
                complete = false;
                break;
            }
            z(j) = (ds.values()(i, static_cast<Eigen::Index>(cols[j])) - model.means(j)) / model.sds(j);
        }
        if (complete) {
            scores.row(i) = (model.score_coefficients * z).transpose();
        } else {
            scores.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

std::string export_formulas(const MeasurementModel& model) {
    using detail::json;
    json structure = json::array();
    for (const auto& [f, ms] : model.spec.structure) structure.push_back({{"factor", f}, {"metrics", ms}});
    json heywood = json::array();
    for (bool h : model.heywood_flags) heywood.push_back(h);
    const json doc = {
        {"schema", "metrology.measurement_model"},
        {"version", 1},
        {"structure", structure},
        {"metrics", model.metrics},
        {"factors", model.factors},
        {"loadings", detail::to_json(model.loadings)},
        {"standardized_loadings", detail::to_json(model.standardized_loadings)},
        {"factor_correlations", detail::to_json(model.factor_correlations)},
        {"uniquenesses", detail::to_json(model.uniquenesses)},
        {"standardized_uniquenesses", detail::to_json(model.standardized_uniquenesses)},
        {"standardization", {{"means", detail::to_json(model.means)}, {"sds", detail::to_json(model.sds)}}},
        {"score_coefficients", detail::to_json(model.score_coefficients)},
        {"score_method", model.score_method},
        {"discrepancy", model.discrepancy},
        {"converged", model.converged},
        {"iterations", model.iterations},
        {"gradient_norm", detail::number(model.gradient_norm)},
        {"heywood_flags", heywood},
        {"n", model.n},
        {"warnings", model.warnings},
    };
    return doc.dump(2);
}

MeasurementModel import_formulas(std::string_view json_text) {
    using detail::json;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw validation_error("bad_json", std::string("measurement model is not valid JSON: ") + e.what());
    }
    if (detail::require(doc, "schema") != "metrology.measurement_model") {
        throw validation_error("bad_schema", "document is not a measurement model");
    }
    if (detail::require(doc, "version") != 1) throw validation_error("bad_version", "unsupported measurement model version");
    MeasurementModel model;
    for (const auto& entry : detail::require(doc, "structure")) {
        model.spec.structure.emplace_back(detail::require(entry, "factor").get<std::string>(),
                                          detail::require(entry, "metrics").get<std::vector<std::string>>());
    }
    model.spec.validate();
    model.metrics = model.spec.metrics();
    model.factors = model.spec.factor_names();
    model.loadings = detail::matrix_from(detail::require(doc, "loadings"), "loadings");
    model.standardized_loadings = detail::matrix_from(detail::require(doc, "standardized_loadings"), "standardized_loadings");
    model.factor_correlations = detail::matrix_from(detail::require(doc, "factor_correlations"), "factor_correlations");
    model.uniquenesses = detail::vector_from(detail::require(doc, "uniquenesses"), "uniquenesses");
    model.standardized_uniquenesses =
        detail::vector_from(detail::require(doc, "standardized_uniquenesses"), "standardized_uniquenesses");
    const auto& standardization = detail::require(doc, "standardization");
    model.means = detail::vector_from(detail::require(standardization, "means"), "means");
    model.sds = detail::vector_from(detail::require(standardization, "sds"), "sds");
    model.score_coefficients = detail::matrix_from(detail::require(doc, "score_coefficients"), "score_coefficients");
    model.score_method = detail::require(doc, "score_method").get<std::string>();
    model.discrepancy = detail::as_double(detail::require(doc, "discrepancy"), "discrepancy");
    model.converged = detail::require(doc, "converged").get<bool>();
    model.iterations = detail::require(doc, "iterations").get<std::size_t>();
    model.gradient_norm = detail::as_double(detail::require(doc, "gradient_norm"), "gradient_norm");
    model.heywood_flags = detail::require(doc, "heywood_flags").get<std::vector<bool>>();
    model.n = detail::require(doc, "n").get<std::size_t>();
    model.warnings = detail::require(doc, "warnings").get<std::vector<std::string>>();

    const auto p = static_cast<Eigen::Index>(model.metrics.size());
    const auto k = static_cast<Eigen::Index>(model.factors.size());
    if (model.loadings.rows() != p || model.loadings.cols() != k || model.score_coefficients.rows() != k ||
        model.score_coefficients.cols() != p || model.means.size() != p || model.sds.size() != p) {
        throw validation_error("shape_mismatch", "measurement model arrays do not match its structure");
    }
    return model;
}

}  // namespace metrology
