#include "metrology/cfa.hpp"
#include "metrology/error.hpp"

#include "../support/synthetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace metrology;

namespace {

std::string error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "no error";
}

ConfirmatorySpec two_by_four() {
    return {{{"Size", {"Size.M1", "Size.M2", "Size.M3", "Size.M4"}},
             {"Cohesion", {"Cohesion.M1", "Cohesion.M2", "Cohesion.M3", "Cohesion.M4"}}}};
}

Eigen::MatrixXd two_by_four_loadings() {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(8, 2);
    l.block(0, 0, 4, 1) << 0.9, 0.8, 0.7, 0.6;
    l.block(4, 1, 4, 1) << 0.65, 0.75, 0.85, 0.6;
    return l;
}

std::vector<std::size_t> two_by_four_index() { return {0, 0, 0, 0, 1, 1, 1, 1}; }

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

}  // namespace

TEST(Discrepancy, AnalyticGradientMatchesCentralDifferences) {
    std::mt19937_64 rng(17);
    const auto sample = synthetic::generate(two_by_four_loadings(), synthetic::uniform_phi(2, 0.3), 300, 5);
    const Eigen::MatrixXd s = pearson(sample.x);
    const Discrepancy d(s, two_by_four_index());
    std::normal_distribution<double> normal(0.0, 0.5);
    for (int point = 0; point < 20; ++point) {
        Eigen::VectorXd theta(static_cast<Eigen::Index>(d.size()));
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = normal(rng);
        theta.head(8).array() += 0.7;
        Eigen::VectorXd analytic;
        const double f = d.value_and_gradient(theta, analytic);
        ASSERT_TRUE(std::isfinite(f));
        EXPECT_NEAR(f, d.value(theta), 1e-12);
        Eigen::VectorXd numeric(theta.size());
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Eigen::VectorXd up = theta, down = theta;
            up(i) += h;
            down(i) -= h;
            numeric(i) = (d.value(up) - d.value(down)) / (2.0 * h);
        }
        EXPECT_LT((analytic - numeric).norm() / std::max(numeric.norm(), 1e-8), 1e-5) << "point " << point;
    }
}

TEST(Discrepancy, NonNegativeAndZeroAtSampleMatrix) {
    const Eigen::MatrixXd l = two_by_four_loadings();
    const Eigen::MatrixXd phi = synthetic::uniform_phi(2, 0.3);
    const Eigen::VectorXd theta_u = Eigen::VectorXd::Ones(8) - (l * phi * l.transpose()).diagonal();
    Eigen::MatrixXd s = l * phi * l.transpose();
    s.diagonal() += theta_u;
    const Discrepancy d(s, two_by_four_index());
    EXPECT_NEAR(d.value(d.pack({l, phi, theta_u})), 0.0, 1e-12);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd theta(static_cast<Eigen::Index>(d.size()));
        for (Eigen::Index j = 0; j < theta.size(); ++j) theta(j) = normal(rng);
        EXPECT_GE(d.value(theta), -1e-12);
    }
}

TEST(Discrepancy, PackUnpackRoundTrip) {
    const Eigen::MatrixXd l = two_by_four_loadings();
    const Eigen::MatrixXd phi = synthetic::uniform_phi(2, -0.45);
    const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(8, 0.2, 0.6);
    const Discrepancy d(Eigen::MatrixXd::Identity(8, 8), two_by_four_index());
    const auto back = d.unpack(d.pack({l, phi, u}));
    EXPECT_LT((back.loadings - l).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((back.phi - phi).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((back.uniquenesses - u).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fit, ZeroDiscrepancyAtModelImpliedCovariance) {
    Eigen::VectorXd sds(8);
    sds << 1.0, 2.5, 0.3, 10.0, 1.2, 4.0, 0.8, 55.0;
    const Eigen::MatrixXd l = sds.asDiagonal() * two_by_four_loadings();
    const Eigen::MatrixXd phi = synthetic::uniform_phi(2, 0.3);
    Eigen::VectorXd theta_u(8);
    theta_u << 0.19, 0.36, 0.51, 0.64, 0.5775, 0.4375, 0.2775, 0.64;
    theta_u = theta_u.cwiseProduct(sds.cwiseAbs2());
    Eigen::MatrixXd s = l * phi * l.transpose();
    s.diagonal() += theta_u;

    const auto model = fit_covariance(s, two_by_four(), 500);
    EXPECT_TRUE(model.converged);
    EXPECT_LT(model.discrepancy, 1e-8);
    EXPECT_LT((model.loadings - l).cwiseAbs().maxCoeff(), 1e-4 * sds.maxCoeff());
    EXPECT_LT((model.loadings - l).cwiseQuotient(sds.replicate(1, 2)).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(model.factor_correlations(0, 1), 0.3, 1e-4);
    EXPECT_LT((model.uniquenesses - theta_u).cwiseQuotient(sds.cwiseAbs2()).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT((model.standardized_loadings - two_by_four_loadings()).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT((model.implied_covariance() - s).cwiseQuotient(sds * sds.transpose()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Fit, RecoversSyntheticLoadings) {
    const auto sample = synthetic::generate(two_by_four_loadings(), synthetic::uniform_phi(2, 0.3), 2000, 42);
    std::vector<std::string> headers = two_by_four().metrics();
    const auto model = fit(MetricDataset::from_matrix(headers, sample.x), two_by_four());
    EXPECT_TRUE(model.converged);
    EXPECT_LT((model.standardized_loadings - two_by_four_loadings()).cwiseAbs().maxCoeff(), 0.05);
    EXPECT_NEAR(model.factor_correlations(0, 1), 0.3, 0.05);
    for (Eigen::Index j = 0; j < 8; ++j) {
        EXPECT_EQ(model.loadings(j, 1 - (j < 4 ? 0 : 1)), 0.0) << "off-structure loading must be exactly zero";
    }
    for (bool h : model.heywood_flags) EXPECT_FALSE(h);
    Eigen::LLT<Eigen::MatrixXd> llt(model.implied_covariance());
    EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Fit, FlagsHeywoodCase) {
    // Population covariance of a generator whose first metric has uniqueness below the floor.
    Eigen::MatrixXd l = two_by_four_loadings();
    l(0, 0) = 1.0;
    const Eigen::MatrixXd phi = synthetic::uniform_phi(2, 0.3);
    Eigen::VectorXd uniq = Eigen::VectorXd::Ones(8) - (l * phi * l.transpose()).diagonal();
    uniq(0) = 1e-6;
    Eigen::MatrixXd s = l * phi * l.transpose();
    s.diagonal() += uniq;
    const auto model = fit_covariance(s, two_by_four(), 1000);
    EXPECT_TRUE(model.heywood_flags[0]);
    for (std::size_t j = 1; j < 8; ++j) EXPECT_FALSE(model.heywood_flags[j]) << j;
    EXPECT_FALSE(model.warnings.empty());
    EXPECT_GE(model.uniquenesses(0), kUniquenessFloor);
}

TEST(Fit, FlagsImpliedLoadingAboveOne) {
    // One factor, three metrics: r12 r13 / r23 = 1.12 forces a negative uniqueness.
    Eigen::MatrixXd s(3, 3);
    s << 1, 0.8, 0.7, 0.8, 1, 0.5, 0.7, 0.5, 1;
    const auto model = fit_covariance(s, ConfirmatorySpec{{{"F", {"A.x", "A.y", "A.z"}}}}, 300);
    EXPECT_TRUE(model.heywood_flags[0]);
    EXPECT_FALSE(model.heywood_flags[1]);
    EXPECT_FALSE(model.heywood_flags[2]);
}

TEST(Fit, InvariantToMetricOrderWithinFactor) {
    const auto sample = synthetic::generate(two_by_four_loadings(), synthetic::uniform_phi(2, 0.3), 800, 3);
    const auto ds = MetricDataset::from_matrix(two_by_four().metrics(), sample.x);
    const auto base = fit(ds, two_by_four());
    ConfirmatorySpec shuffled{{{"Size", {"Size.M3", "Size.M1", "Size.M4", "Size.M2"}},
                               {"Cohesion", {"Cohesion.M2", "Cohesion.M4", "Cohesion.M1", "Cohesion.M3"}}}};
    const auto other = fit(ds, shuffled);
    for (std::size_t j = 0; j < 8; ++j) {
        const auto pos = static_cast<Eigen::Index>(std::find(other.metrics.begin(), other.metrics.end(), base.metrics[j]) - other.metrics.begin());
        EXPECT_NEAR(base.standardized_loadings.row(static_cast<Eigen::Index>(j)).sum(), other.standardized_loadings.row(pos).sum(), 1e-6);
    }
    EXPECT_NEAR(base.discrepancy, other.discrepancy, 1e-10);
}

TEST(Fit, MultiStartNeverWorse) {
    const auto sample = synthetic::generate(two_by_four_loadings(), synthetic::uniform_phi(2, 0.3), 400, 9);
    const auto ds = MetricDataset::from_matrix(two_by_four().metrics(), sample.x);
    CfaOptions options;
    options.multi_start = true;
    EXPECT_LE(fit(ds, two_by_four(), options).discrepancy, fit(ds, two_by_four()).discrepancy + 1e-12);
}

TEST(Fit, Errors) {
    const auto sample = synthetic::generate(two_by_four_loadings(), synthetic::uniform_phi(2, 0.3), 100, 1);
    const auto ds = MetricDataset::from_matrix(two_by_four().metrics(), sample.x);
    EXPECT_EQ(error_code([&] { fit(ds, ConfirmatorySpec{}); }), "empty_structure");
    EXPECT_EQ(error_code([&] { fit(ds, ConfirmatorySpec{{{"A", {"Size.M1", "Size.M2"}}, {"B", {"Size.M2", "Size.M3"}}}}); }),
              "duplicate_metric");
    EXPECT_EQ(error_code([&] { fit(ds, ConfirmatorySpec{{{"A", {"Size.M1", "Size.Nope", "Size.M2"}}}}); }), "unknown_metric");
    Eigen::MatrixXd x = sample.x;
    x.col(1) = x.col(0);
    EXPECT_EQ(error_code([&] { fit(MetricDataset::from_matrix(two_by_four().metrics(), x), two_by_four()); }), "singular_matrix");
}

TEST(Spec, WarnsBelowThreeMetrics) {
    const ConfirmatorySpec spec{{{"A", {"A.x", "A.y"}}, {"B", {"B.x", "B.y", "B.z"}}}};
    ASSERT_EQ(spec.warnings().size(), 1u);
    EXPECT_NE(spec.warnings()[0].find("'A'"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Scores and export
// ---------------------------------------------------------------------------

TEST(Scores, HandComputedTwoMetricCoefficients) {
    // Sigma = [[1, .48], [.48, 1]]; B = L' Sigma^-1 = [0.8 - 0.288, 0.6 - 0.384] / (1 - 0.2304).
    const ConfirmatorySpec spec{{{"F", {"A.x", "A.y"}}}};
    const auto model = make_model(spec, (Eigen::MatrixXd(2, 1) << 0.8, 0.6).finished(), Eigen::MatrixXd::Ones(1, 1),
                                  (Eigen::VectorXd(2) << 0.36, 0.64).finished());
    ASSERT_EQ(model.score_coefficients.rows(), 1);
    ASSERT_EQ(model.score_coefficients.cols(), 2);
    EXPECT_NEAR(model.score_coefficients(0, 0), 0.512 / 0.7696, 1e-10);
    EXPECT_NEAR(model.score_coefficients(0, 1), 0.216 / 0.7696, 1e-10);
    const auto back = import_formulas(export_formulas(model));
    EXPECT_NEAR(back.score_coefficients(0, 0), 0.512 / 0.7696, 1e-10);
}

TEST(Scores, PerfectIndicatorReproducesStandardizedValue) {
    const ConfirmatorySpec spec{{{"F", {"A.x"}}}};
    auto model = make_model(spec, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 1e-9));
    model.means << 10.0;
    model.sds << 2.0;
    const auto ds = parse_dataset("id,A.x\na,10\nb,14\nc,7\n");
    const auto scores = factor_scores(model, ds);
    EXPECT_NEAR(scores(0, 0), 0.0, 1e-6);
    EXPECT_NEAR(scores(1, 0), 2.0, 1e-6);
    EXPECT_NEAR(scores(2, 0), -1.5, 1e-6);
}

TEST(Scores, ZeroLoadingsGiveZeroScores) {
    const ConfirmatorySpec spec{{{"F", {"A.x", "A.y", "A.z"}}}};
    const auto model = make_model(spec, Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(3));
    const auto scores = factor_scores(model, parse_dataset("id,A.x,A.y,A.z\na,1,2,3\nb,-4,0,9\n"));
    EXPECT_EQ(scores.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Scores, TrackTrueFactorDraws) {
    const auto sample = synthetic::generate(two_by_four_loadings(), synthetic::uniform_phi(2, 0.3), 2000, 77);
    const auto ds = MetricDataset::from_matrix(two_by_four().metrics(), sample.x);
    const auto model = fit(ds, two_by_four());
    const auto scores = factor_scores(model, ds);
    for (Eigen::Index f = 0; f < 2; ++f) EXPECT_GT(correlation(scores.col(f), sample.factors.col(f)), 0.9);
}

TEST(Scores, MissingRowsAreNaNAndUnknownMetricRejected) {
    const ConfirmatorySpec spec{{{"F", {"A.x", "A.y"}}}};
    const auto model = make_model(spec, (Eigen::MatrixXd(2, 1) << 0.8, 0.6).finished(), Eigen::MatrixXd::Ones(1, 1),
                                  (Eigen::VectorXd(2) << 0.36, 0.64).finished());
    const auto scores = factor_scores(model, parse_dataset("id,A.x,A.y\na,1,\nb,1,2\n"));
    EXPECT_TRUE(std::isnan(scores(0, 0)));
    EXPECT_FALSE(std::isnan(scores(1, 0)));
    EXPECT_EQ(error_code([&] { factor_scores(model, parse_dataset("id,A.x,A.q\na,1,2\n")); }), "unknown_metric");
}

TEST(Export, RoundTripGivesBitIdenticalScores) {
    const auto sample = synthetic::generate(two_by_four_loadings(), synthetic::uniform_phi(2, 0.3), 500, 12);
    Eigen::MatrixXd x = sample.x * 3.7;
    x.array() += 12.0;
    const auto ds = MetricDataset::from_matrix(two_by_four().metrics(), x);
    const auto model = fit(ds, two_by_four());
    const auto text = export_formulas(model);
    const auto back = import_formulas(text);
    EXPECT_EQ(back.spec, model.spec);
    EXPECT_EQ(back.score_coefficients.rows(), 2);
    EXPECT_EQ(back.score_coefficients.cols(), 8);
    const Eigen::MatrixXd a = factor_scores(model, ds);
    const Eigen::MatrixXd b = factor_scores(back, ds);
    EXPECT_TRUE((a.array() == b.array()).all());
    EXPECT_EQ(export_formulas(back), text);
}

TEST(Export, RejectsForeignDocuments) {
    EXPECT_EQ(error_code([] { import_formulas("{\"schema\": \"other\", \"version\": 1}"); }), "bad_schema");
    EXPECT_EQ(error_code([] { import_formulas("not json"); }), "bad_json");
}
