#pragma once

#include "metrology/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace metrology {

// metric raw name -> construct name
using ExpectedMap = std::map<std::string, std::string>;

// Expected construct of every column, taken from the Construct segment of its header.
ExpectedMap expected_from_headers(const MetricDataset& ds);

// ---------------------------------------------------------------------------
// Adequacy
// ---------------------------------------------------------------------------

struct CorrelatedPair {
    std::string a;
    std::string b;
    double r = 0.0;
};

struct AdequacyReport {
    std::vector<std::string> labels;
    double kmo_overall = 0.0;
    std::vector<double> kmo_per_variable;
    double bartlett_chi2 = 0.0;
    std::size_t bartlett_df = 0;
    double bartlett_p = 1.0;
    std::vector<CorrelatedPair> multicollinear_pairs;
    std::size_t n = 0;
    double obs_per_variable = 0.0;
    std::vector<std::string> warnings;

    // KMO >= 0.5 and Bartlett significant at 0.05.
    bool acceptable() const { return kmo_overall >= 0.5 && bartlett_p < 0.05; }
};

// Pairs with |r| at or above this are reported as near-duplicates.
inline constexpr double kMulticollinearR = 0.9;

AdequacyReport adequacy(const CorrelationMatrix& r, std::size_t n);

// ---------------------------------------------------------------------------
// Factor-count advice
// ---------------------------------------------------------------------------

struct ParallelConfig {
    std::size_t reps = 100;
    double quantile = 0.95;
    // Compare against the mean random eigenvalue instead of the quantile.
    bool use_mean = false;
    std::uint64_t seed = 1;
};

struct FactorCountAdvice {
    std::vector<double> eigenvalues;
    std::size_t parallel_suggested = 0;
    std::vector<double> parallel_thresholds;
    std::size_t kaiser_suggested = 0;
    std::vector<double> scree_series;
    // Advisory only: factor counts sitting just before a sharp bend.
    std::vector<std::size_t> scree_elbow_candidates;
    std::optional<std::size_t> theory_suggested;
};

std::size_t kaiser_count(std::span<const double> eigenvalues);
std::vector<std::size_t> scree_elbows(std::span<const double> eigenvalues, std::size_t max_candidates = 3);

// Descending eigenvalues of a symmetric matrix.
Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& symmetric);

FactorCountAdvice advise_factor_count(const MetricDataset& ds, const ParallelConfig& config = {},
                                      std::optional<std::size_t> theory = std::nullopt);

// ---------------------------------------------------------------------------
// Extraction and rotation
// ---------------------------------------------------------------------------

enum class Rotation { none, oblimin };

std::string to_string(Rotation rotation);
Rotation rotation_from_string(std::string_view text);

struct ExtractionConfig {
    std::size_t max_iter = 200;
    double tolerance = 1e-6;
};

struct RotationConfig {
    Rotation method = Rotation::oblimin;
    double gamma = 0.0;
    // Random orthonormal starts tried in addition to the identity start.
    std::size_t restarts = 10;
    std::uint64_t seed = 1;
    double tolerance = 1e-8;
    std::size_t max_iter = 5000;
};

inline constexpr double kHeywoodCap = 1.0 - 1e-6;

struct FactorSolution {
    std::vector<MetricName> labels;
    Eigen::MatrixXd loadings;             // p x k pattern loadings
    Eigen::MatrixXd factor_correlations;  // k x k, unit diagonal
    Eigen::VectorXd communalities;        // diag(L Phi L')
    Eigen::VectorXd eigenvalues;          // of the full correlation matrix, descending
    double variance_explained = 0.0;
    std::vector<std::size_t> assignment;  // argmax |loading| per metric
    std::vector<bool> heywood;
    double suppress_threshold = 0.3;
    Rotation rotation = Rotation::none;
    double gamma = 0.0;
    std::size_t extraction_iterations = 0;
    double rotation_criterion = 0.0;
    std::size_t n_used = 0;

    std::size_t p() const { return labels.size(); }
    std::size_t k() const { return static_cast<std::size_t>(loadings.cols()); }
    bool suppressed(std::size_t metric, std::size_t factor) const;
    bool any_heywood() const;
    std::vector<std::string> names() const;
    // Metrics per factor under the argmax assignment.
    std::vector<std::size_t> factor_sizes() const;
};

// Iterated principal-axis factoring, unrotated.
FactorSolution extract(const CorrelationMatrix& r, std::size_t k, const ExtractionConfig& config = {});

// Gradient-projection oblique rotation. k == 1 or Rotation::none returns the input.
FactorSolution rotate(const FactorSolution& solution, const RotationConfig& config = {});

// Oblimin criterion value of a loading matrix.
double oblimin_criterion(const Eigen::MatrixXd& loadings, double gamma);

struct EfaConfig {
    MissingPolicy missing = MissingPolicy::listwise;
    ExtractionConfig extraction;
    RotationConfig rotation;
    double suppress_threshold = 0.3;
    bool override_adequacy = false;
};

// correlation -> adequacy gate -> extract -> rotate.
FactorSolution run_efa(const MetricDataset& ds, std::size_t k, const EfaConfig& config = {});

// ---------------------------------------------------------------------------
// Diagnosis
// ---------------------------------------------------------------------------

struct DiagnoseThresholds {
    double communality = 0.5;
    double cross_loading = 0.3;
    double wrong_factor = 0.5;
};

enum class ProblemKind { low_communality, cross_loading, wrong_factor };

std::string to_string(ProblemKind kind);

struct Problem {
    ProblemKind kind = ProblemKind::low_communality;  // most severe of `kinds`
    std::vector<ProblemKind> kinds;
    std::string metric;
    double severity = 0.0;  // higher is worse
    bool retain_for_now = false;
    std::string note;
    // Evidence.
    double h2 = 0.0;
    std::optional<std::size_t> expected_factor;
    std::size_t primary_factor = 0;
    double correct_loading = 0.0;
    double max_incorrect_loading = 0.0;
    std::optional<std::size_t> max_incorrect_factor;
};

// Each factor's construct label ("" when no construct is matched). Greedy
// one-to-one matching on the summed |loading| of a construct's metrics.
std::vector<std::string> label_factors(const FactorSolution& solution, const ExpectedMap& expected);

// Ranked worst first; retained problems come after every actionable one.
std::vector<Problem> diagnose(const FactorSolution& solution, const ExpectedMap& expected,
                              const DiagnoseThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Scale audit
// ---------------------------------------------------------------------------

struct AuditPair {
    std::string a;
    std::string b;
    double abs_r = 0.0;
    bool intra = false;
};

struct ScaleAudit {
    double min_intra = 0.0;
    double max_inter = 0.0;
    bool pass = false;
    // Intra pairs at or below max_inter and inter pairs at or above min_intra.
    std::vector<AuditPair> offending_pairs;
};

ScaleAudit audit_scales(const CorrelationMatrix& r, const ExpectedMap& assignment);

// Loadings table with |loading| < threshold blanked, 2-decimal cells and an h2 column.
std::string render_loadings_table(const FactorSolution& solution, const std::vector<std::string>& factor_names = {});

}  // namespace metrology
