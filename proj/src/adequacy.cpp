#include "metrology/efa.hpp"

#include "metrology/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace metrology {

ExpectedMap expected_from_headers(const MetricDataset& ds) {
    ExpectedMap out;
    for (const auto& c : ds.columns()) out[c.raw] = c.construct;
    return out;
}

namespace {

std::vector<CorrelatedPair> near_duplicates(const CorrelationMatrix& r) {
    std::vector<CorrelatedPair> pairs;
    const auto p = static_cast<Eigen::Index>(r.size());
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            if (std::abs(r.r(i, j)) >= kMulticollinearR) pairs.push_back({r.labels[i].raw, r.labels[j].raw, r.r(i, j)});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto& x, const auto& y) { return std::abs(x.r) > std::abs(y.r); });
    return pairs;
}

}  // namespace

AdequacyReport adequacy(const CorrelationMatrix& r, std::size_t n) {
    const auto p = static_cast<Eigen::Index>(r.size());
    if (p < 2) throw validation_error("too_few_metrics", "adequacy needs at least 2 metrics");
    if (n <= static_cast<std::size_t>(p)) {
        throw validation_error("insufficient_cases", "sample size " + std::to_string(n) +
                                                         " must exceed the number of metrics " + std::to_string(p));
    }

    AdequacyReport report;
    report.labels = r.names();
    report.n = n;
    report.multicollinear_pairs = near_duplicates(r);

    Eigen::LLT<Eigen::MatrixXd> llt(r.r);
    const Eigen::VectorXd eig = sorted_eigenvalues(r.r);
    if (llt.info() != Eigen::Success || eig(p - 1) <= 1e-12 * static_cast<double>(p)) {
        std::ostringstream msg;
        msg << "correlation matrix is not positive definite (multicollinearity)";
        if (!report.multicollinear_pairs.empty()) {
            msg << "; near-duplicate pairs:";
            for (const auto& pair : report.multicollinear_pairs) msg << " (" << pair.a << ", " << pair.b << ", r=" << pair.r << ")";
        }
        throw computation_error("singular_matrix", msg.str());
    }

    const Eigen::MatrixXd s = llt.solve(Eigen::MatrixXd::Identity(p, p));
    double sum_r2 = 0.0;
    double sum_q2 = 0.0;
    report.kmo_per_variable.resize(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) {
        double row_r2 = 0.0;
        double row_q2 = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (i == j) continue;
            const double rij = r.r(i, j);
            // With two variables the conditioning set is empty and the partial is r itself.
            const double q2 = p == 2 ? rij * rij : s(i, j) * s(i, j) / (s(i, i) * s(j, j));
            row_r2 += rij * rij;
            row_q2 += q2;
        }
        report.kmo_per_variable[static_cast<std::size_t>(i)] = row_r2 / (row_r2 + row_q2);
        sum_r2 += row_r2;
        sum_q2 += row_q2;
    }
    report.kmo_overall = sum_r2 / (sum_r2 + sum_q2);

    const auto& lower = llt.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) log_det += 2.0 * std::log(lower(i, i));
    const double pd = static_cast<double>(p);
    const double multiplier = static_cast<double>(n) - 1.0 - (2.0 * pd + 5.0) / 6.0;
    report.bartlett_chi2 = std::max(0.0, -multiplier * log_det);
    report.bartlett_df = static_cast<std::size_t>(p * (p - 1) / 2);
    report.bartlett_p = boost::math::gamma_q(static_cast<double>(report.bartlett_df) / 2.0, report.bartlett_chi2 / 2.0);

    report.obs_per_variable = static_cast<double>(n) / pd;
    if (report.obs_per_variable < 10.0) {
        report.warnings.push_back("fewer than ten observations per metric");
    }
    if (report.kmo_overall < 0.5) report.warnings.push_back("overall KMO below 0.5");
    for (std::size_t i = 0; i < report.kmo_per_variable.size(); ++i) {
        if (report.kmo_per_variable[i] < 0.5) report.warnings.push_back("KMO below 0.5 for '" + report.labels[i] + "'");
    }
    if (report.bartlett_p >= 0.05) report.warnings.push_back("Bartlett's test is not significant");
    return report;
}

}  // namespace metrology
