#include "metrology/efa.hpp"

#include "efa_detail.hpp"
#include "metrology/error.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace metrology {

namespace {

struct CriterionEval {
    double value = 0.0;
    Eigen::MatrixXd gradient;  // d criterion / d loadings
};

// Direct oblimin: f = 1/4 * sum(L^2 .* (C L^2 N)), C = I - gamma/p 11', N = 11' - I.
CriterionEval oblimin(const Eigen::MatrixXd& l, double gamma) {
    const auto p = l.rows();
    const auto k = l.cols();
    const Eigen::MatrixXd l2 = l.array().square().matrix();
    const Eigen::MatrixXd n = Eigen::MatrixXd::Ones(k, k) - Eigen::MatrixXd::Identity(k, k);
    Eigen::MatrixXd x = l2 * n;
    if (gamma != 0.0) {
        const Eigen::RowVectorXd col_sums = x.colwise().sum();
        x.rowwise() -= (gamma / static_cast<double>(p)) * col_sums;
    }
    CriterionEval out;
    out.value = (l2.array() * x.array()).sum() / 4.0;
    out.gradient = (l.array() * x.array()).matrix();
    return out;
}

struct GpaResult {
    Eigen::MatrixXd rotation;  // T, columns of unit length
    double criterion = 0.0;
    bool converged = false;
};

// Gradient projection for oblique rotation: loadings = A * inv(T)'.
GpaResult gpa_oblique(const Eigen::MatrixXd& a, Eigen::MatrixXd t, const RotationConfig& config) {
    auto loadings_for = [&](const Eigen::MatrixXd& tm) -> Eigen::MatrixXd {
        return a * tm.inverse().transpose();
    };
    Eigen::MatrixXd l = loadings_for(t);
    CriterionEval eval = oblimin(l, config.gamma);
    Eigen::MatrixXd g = -(l.transpose() * eval.gradient * t.inverse()).transpose();
    double step = 1.0;
    GpaResult result;
    for (std::size_t iter = 0; iter <= config.max_iter; ++iter) {
        const Eigen::RowVectorXd tg = (t.array() * g.array()).colwise().sum();
        const Eigen::MatrixXd gp = g - t * tg.asDiagonal();
        const double s = gp.norm();
        if (s < config.tolerance) {
            result.converged = true;
            break;
        }
        step *= 2.0;
        Eigen::MatrixXd t_new;
        CriterionEval eval_new;
        Eigen::MatrixXd l_new;
        for (int half = 0; half <= 10; ++half) {
            Eigen::MatrixXd x = t - step * gp;
            const Eigen::RowVectorXd norms = x.colwise().norm();
            t_new = x * norms.cwiseInverse().asDiagonal();
            l_new = loadings_for(t_new);
            eval_new = oblimin(l_new, config.gamma);
            if (eval.value - eval_new.value > 0.5 * s * s * step) break;
            step /= 2.0;
        }
        t = std::move(t_new);
        l = std::move(l_new);
        eval = std::move(eval_new);
        g = -(l.transpose() * eval.gradient * t.inverse()).transpose();
    }
    result.rotation = std::move(t);
    result.criterion = eval.value;
    return result;
}

Eigen::MatrixXd random_orthonormal(Eigen::Index k, std::uint64_t seed, std::uint64_t start) {
    std::seed_seq seq{seed, start};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd z(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) z(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    return qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
}

}  // namespace

double oblimin_criterion(const Eigen::MatrixXd& loadings, double gamma) { return oblimin(loadings, gamma).value; }

FactorSolution rotate(const FactorSolution& solution, const RotationConfig& config) {
    if (config.method == Rotation::none || solution.k() < 2) return solution;
    const auto k = static_cast<Eigen::Index>(solution.k());
    const Eigen::MatrixXd& a = solution.loadings;

    GpaResult best;
    best.criterion = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t start = 0; start <= config.restarts; ++start) {
        const Eigen::MatrixXd t0 =
            start == 0 ? Eigen::MatrixXd::Identity(k, k) : random_orthonormal(k, config.seed, start);
        auto result = gpa_oblique(a, t0, config);
        if (!result.converged || !std::isfinite(result.criterion)) continue;
        // Strict improvement beyond round-off keeps the earliest start on ties.
        if (!any || result.criterion < best.criterion - 1e-12) {
            best = std::move(result);
            any = true;
        }
    }
    if (!any) {
        throw computation_error("no_convergence", "oblimin rotation did not converge from any of " +
                                                      std::to_string(config.restarts + 1) + " starts");
    }

    FactorSolution out = solution;
    out.loadings = a * best.rotation.inverse().transpose();
    out.factor_correlations = best.rotation.transpose() * best.rotation;
    out.factor_correlations.diagonal().setOnes();
    out.rotation = Rotation::oblimin;
    out.gamma = config.gamma;
    out.rotation_criterion = best.criterion;
    detail::order_and_sign(out);
    detail::finalize_solution(out);
    return out;
}

}  // namespace metrology
