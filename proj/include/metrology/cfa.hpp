#pragma once

#include "metrology/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace metrology {

// Factor -> metrics. Factors keep insertion order; every metric belongs to
// exactly one factor. Identification is by unit factor variances.
struct ConfirmatorySpec {
    std::vector<std::pair<std::string, std::vector<std::string>>> structure;

    std::vector<std::string> factor_names() const;
    // Metrics in factor order, then listed order within the factor.
    std::vector<std::string> metrics() const;
    // Throws on empty structure, empty factor, or a metric listed twice.
    void validate() const;
    // Under-identification notes (factors with fewer than 3 metrics).
    std::vector<std::string> warnings() const;

    bool operator==(const ConfirmatorySpec&) const = default;
};

struct CfaOptions {
    std::size_t max_iter = 2000;
    double gradient_tolerance = 1e-9;
    // Extra starts with jittered loadings and factor correlations; best discrepancy wins.
    bool multi_start = false;
    std::size_t starts = 5;
    std::uint64_t seed = 1;
};

inline constexpr double kUniquenessFloor = 1e-4;

struct MeasurementModel {
    ConfirmatorySpec spec;
    std::vector<std::string> metrics;
    std::vector<std::string> factors;
    Eigen::MatrixXd loadings;                 // p x k, raw metric scale
    Eigen::MatrixXd standardized_loadings;    // p x k
    Eigen::MatrixXd factor_correlations;      // k x k
    Eigen::VectorXd uniquenesses;             // p, raw scale
    Eigen::VectorXd standardized_uniquenesses;
    Eigen::VectorXd means;                    // standardization constants
    Eigen::VectorXd sds;
    Eigen::MatrixXd score_coefficients;       // k x p, applied to standardized metrics
    std::string score_method = "regression";
    double discrepancy = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    std::vector<bool> heywood_flags;
    std::size_t n = 0;
    std::vector<std::string> warnings;

    std::size_t p() const { return metrics.size(); }
    std::size_t k() const { return factors.size(); }
    Eigen::MatrixXd implied_covariance() const;
};

// ML fit to the listwise correlation matrix of the spec's metrics; raw
// estimates are rescaled by the sample standard deviations.
MeasurementModel fit(const MetricDataset& ds, const ConfirmatorySpec& spec, const CfaOptions& options = {});

// ML fit to a given covariance matrix whose rows follow spec.metrics().
// Means are 0 and standardization sds are sqrt(diag(S)).
MeasurementModel fit_covariance(const Eigen::MatrixXd& s, const ConfirmatorySpec& spec, std::size_t n,
                                const CfaOptions& options = {});

// Model from given standardized-scale parameters, with unit sds and zero means.
MeasurementModel make_model(const ConfirmatorySpec& spec, const Eigen::MatrixXd& loadings, const Eigen::MatrixXd& phi,
                            const Eigen::VectorXd& uniquenesses);

// B = Phi L' Sigma^-1 on the standardized scale.
Eigen::MatrixXd score_coefficients(const Eigen::MatrixXd& loadings, const Eigen::MatrixXd& phi,
                                   const Eigen::VectorXd& uniquenesses);

// Entities x k regression scores. Rows with a missing model metric are NaN.
Eigen::MatrixXd factor_scores(const MeasurementModel& model, const MetricDataset& ds);

// ---------------------------------------------------------------------------
// Discrepancy function, exposed for gradient checks.
// ---------------------------------------------------------------------------

// Free parameters: one loading per metric, then log(uniqueness - floor) per
// metric, then the strictly-lower entries of the row-normalized triangular
// factor of Phi (row-major).
struct CfaParameters {
    Eigen::MatrixXd loadings;
    Eigen::MatrixXd phi;
    Eigen::VectorXd uniquenesses;
};

class Discrepancy {
public:
    Discrepancy(Eigen::MatrixXd s, std::vector<std::size_t> factor_of);

    std::size_t size() const;
    CfaParameters unpack(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd pack(const CfaParameters& params) const;
    // F_ML; +inf when Sigma is not positive definite.
    double value(const Eigen::VectorXd& theta) const;
    double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const;

private:
    Eigen::MatrixXd s_;
    double log_det_s_ = 0.0;
    std::vector<std::size_t> factor_of_;
    std::size_t p_ = 0;
    std::size_t k_ = 0;
};

std::string export_formulas(const MeasurementModel& model);
MeasurementModel import_formulas(std::string_view json_text);

}  // namespace metrology
