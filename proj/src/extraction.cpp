#include "metrology/efa.hpp"

#include "efa_detail.hpp"
#include "metrology/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace metrology {

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw computation_error("eigen_failed", "eigendecomposition failed");
    return solver.eigenvalues().reverse();
}

std::size_t kaiser_count(std::span<const double> eigenvalues) {
    return static_cast<std::size_t>(std::count_if(eigenvalues.begin(), eigenvalues.end(), [](double v) { return v > 1.0; }));
}

std::vector<std::size_t> scree_elbows(std::span<const double> eigenvalues, std::size_t max_candidates) {
    struct Bend {
        std::size_t count;
        double acceleration;
    };
    std::vector<double> accel(eigenvalues.size(), 0.0);
    for (std::size_t i = 1; i + 1 < eigenvalues.size(); ++i) {
        accel[i] = eigenvalues[i - 1] - 2.0 * eigenvalues[i] + eigenvalues[i + 1];
    }
    std::vector<Bend> bends;
    for (std::size_t i = 1; i + 1 < eigenvalues.size(); ++i) {
        const bool peak = accel[i] > 0.0 && accel[i] >= accel[i - 1] && (i + 2 >= eigenvalues.size() || accel[i] >= accel[i + 1]);
        if (peak) bends.push_back({i, accel[i]});
    }
    std::stable_sort(bends.begin(), bends.end(), [](const Bend& a, const Bend& b) { return a.acceleration > b.acceleration; });
    if (bends.size() > max_candidates) bends.resize(max_candidates);
    std::vector<std::size_t> out;
    for (const auto& b : bends) out.push_back(b.count);
    std::sort(out.begin(), out.end());
    return out;
}

FactorCountAdvice advise_factor_count(const MetricDataset& ds, const ParallelConfig& config,
                                      std::optional<std::size_t> theory) {
    if (config.reps < 50) throw validation_error("too_few_reps", "parallel analysis needs at least 50 replications");
    if (!(config.quantile > 0.0 && config.quantile < 1.0)) {
        throw validation_error("bad_quantile", "quantile must lie in (0, 1)");
    }
    const auto p = static_cast<Eigen::Index>(ds.n_metrics());
    if (p < 2) throw validation_error("too_few_metrics", "factor-count advice needs at least 2 metrics");

    const auto cm = correlation_matrix(ds, MissingPolicy::listwise);
    const auto n = static_cast<Eigen::Index>(cm.n_used);
    const Eigen::VectorXd actual = sorted_eigenvalues(cm.r);

    Eigen::MatrixXd random_eigs(static_cast<Eigen::Index>(config.reps), p);
    for (std::size_t rep = 0; rep < config.reps; ++rep) {
        std::seed_seq seq{static_cast<std::uint64_t>(config.seed), static_cast<std::uint64_t>(rep)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal;
        Eigen::MatrixXd x(n, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
        }
        random_eigs.row(static_cast<Eigen::Index>(rep)) = sorted_eigenvalues(pearson(x)).transpose();
    }

    FactorCountAdvice advice;
    advice.eigenvalues.assign(actual.data(), actual.data() + p);
    advice.scree_series = advice.eigenvalues;
    advice.kaiser_suggested = kaiser_count(advice.eigenvalues);
    advice.scree_elbow_candidates = scree_elbows(advice.eigenvalues);
    advice.theory_suggested = theory;
    bool retaining = true;
    for (Eigen::Index i = 0; i < p; ++i) {
        std::vector<double> col(random_eigs.col(i).data(), random_eigs.col(i).data() + random_eigs.rows());
        double threshold = 0.0;
        if (config.use_mean) {
            threshold = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
        } else {
            std::sort(col.begin(), col.end());
            const double pos = config.quantile * static_cast<double>(col.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, col.size() - 1);
            threshold = col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
        }
        advice.parallel_thresholds.push_back(threshold);
        if (retaining && actual(i) > threshold) {
            ++advice.parallel_suggested;
        } else {
            retaining = false;
        }
    }
    return advice;
}

std::string to_string(Rotation rotation) { return rotation == Rotation::oblimin ? "oblimin" : "none"; }

Rotation rotation_from_string(std::string_view text) {
    if (text == "oblimin") return Rotation::oblimin;
    if (text == "none") return Rotation::none;
    throw validation_error("bad_rotation", "rotation must be 'oblimin' or 'none'");
}

bool FactorSolution::suppressed(std::size_t metric, std::size_t factor) const {
    return std::abs(loadings(static_cast<Eigen::Index>(metric), static_cast<Eigen::Index>(factor))) < suppress_threshold;
}

bool FactorSolution::any_heywood() const { return std::find(heywood.begin(), heywood.end(), true) != heywood.end(); }

std::vector<std::string> FactorSolution::names() const {
    std::vector<std::string> out;
    for (const auto& l : labels) out.push_back(l.raw);
    return out;
}

std::vector<std::size_t> FactorSolution::factor_sizes() const {
    std::vector<std::size_t> sizes(k(), 0);
    for (auto f : assignment) sizes[f]++;
    return sizes;
}

namespace detail {

// Recomputes communalities, variance explained and the argmax assignment.
void finalize_solution(FactorSolution& s) {
    const Eigen::MatrixXd common = s.loadings * s.factor_correlations * s.loadings.transpose();
    s.communalities = common.diagonal();
    s.variance_explained = s.communalities.sum() / static_cast<double>(s.p());
    s.assignment.assign(s.p(), 0);
    s.heywood.assign(s.p(), false);
    for (Eigen::Index j = 0; j < s.loadings.rows(); ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index f = 1; f < s.loadings.cols(); ++f) {
            if (std::abs(s.loadings(j, f)) > std::abs(s.loadings(j, best))) best = f;
        }
        s.assignment[static_cast<std::size_t>(j)] = static_cast<std::size_t>(best);
        s.heywood[static_cast<std::size_t>(j)] = s.communalities(j) >= kHeywoodCap;
    }
}

// Orders factors by descending sum of squared pattern loadings and makes the
// largest-magnitude loading of each factor positive.
void order_and_sign(FactorSolution& s) {
    const auto k = s.loadings.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    const Eigen::VectorXd ss = s.loadings.colwise().squaredNorm().transpose();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return ss(a) > ss(b); });
    Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index f = 0; f < k; ++f) perm(order[static_cast<std::size_t>(f)], f) = 1.0;
    Eigen::MatrixXd loadings = s.loadings * perm;
    Eigen::MatrixXd phi = perm.transpose() * s.factor_correlations * perm;
    for (Eigen::Index f = 0; f < k; ++f) {
        Eigen::Index arg = 0;
        loadings.col(f).cwiseAbs().maxCoeff(&arg);
        if (loadings(arg, f) < 0.0) {
            loadings.col(f) *= -1.0;
            phi.row(f) *= -1.0;
            phi.col(f) *= -1.0;
        }
    }
    s.loadings = std::move(loadings);
    s.factor_correlations = std::move(phi);
}

}  // namespace detail

FactorSolution extract(const CorrelationMatrix& r, std::size_t k, const ExtractionConfig& config) {
    const auto p = static_cast<Eigen::Index>(r.size());
    const auto kk = static_cast<Eigen::Index>(k);
    if (k < 1 || kk >= p) {
        throw validation_error("bad_factor_count", "factor count must satisfy 1 <= k < p (k=" + std::to_string(k) +
                                                        ", p=" + std::to_string(p) + ")");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(r.r);
    if (llt.info() != Eigen::Success) {
        throw computation_error("singular_matrix", "correlation matrix is not positive definite");
    }
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::VectorXd h2 = (1.0 - inv.diagonal().array().inverse()).matrix();
    h2 = h2.cwiseMax(0.0).cwiseMin(kHeywoodCap);

    Eigen::MatrixXd loadings(p, kk);
    double delta = 0.0;
    std::size_t iter = 0;
    bool converged = false;
    for (iter = 1; iter <= config.max_iter; ++iter) {
        Eigen::MatrixXd reduced = r.r;
        reduced.diagonal() = h2;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(reduced);
        if (solver.info() != Eigen::Success) throw computation_error("eigen_failed", "eigendecomposition failed");
        // Eigen sorts ascending; take the top k.
        for (Eigen::Index f = 0; f < kk; ++f) {
            const Eigen::Index src = p - 1 - f;
            const double value = std::max(0.0, solver.eigenvalues()(src));
            loadings.col(f) = solver.eigenvectors().col(src) * std::sqrt(value);
        }
        Eigen::VectorXd next = loadings.rowwise().squaredNorm().cwiseMin(kHeywoodCap);
        delta = (next - h2).cwiseAbs().maxCoeff();
        h2 = next;
        if (delta < config.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw computation_error("no_convergence", "principal-axis factoring did not converge after " +
                                                      std::to_string(config.max_iter) + " iterations (last change " +
                                                      format_double(delta) + ")");
    }

    FactorSolution s;
    s.labels = r.labels;
    s.loadings = loadings;
    s.factor_correlations = Eigen::MatrixXd::Identity(kk, kk);
    s.eigenvalues = sorted_eigenvalues(r.r);
    s.extraction_iterations = iter;
    s.n_used = r.n_used;
    detail::order_and_sign(s);
    detail::finalize_solution(s);
    return s;
}

FactorSolution run_efa(const MetricDataset& ds, std::size_t k, const EfaConfig& config) {
    const auto cm = correlation_matrix(ds, config.missing);
    if (!config.override_adequacy) {
        const auto report = adequacy(cm, cm.n_used);
        if (!report.acceptable()) {
            throw validation_error("inadequate_data", "adequacy check failed (KMO=" + format_double(report.kmo_overall) +
                                                          ", Bartlett p=" + format_double(report.bartlett_p) +
                                                          "); pass override to proceed");
        }
    }
    auto solution = rotate(extract(cm, k, config.extraction), config.rotation);
    solution.suppress_threshold = config.suppress_threshold;
    return solution;
}

}  // namespace metrology
