#include "metrology/reliability.hpp"

#include "metrology/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace metrology {

std::string to_string(Coefficient c) {
    switch (c) {
        case Coefficient::alpha: return "alpha";
        case Coefficient::percent_agreement: return "percent_agreement";
        case Coefficient::krippendorff_alpha: return "krippendorff_alpha";
        case Coefficient::composite_reliability: return "composite_reliability";
        case Coefficient::omega_total: return "omega_total";
    }
    return "unknown";
}

std::string interpretation_band(double value) {
    if (value > 0.9) return "excellent";
    if (value > 0.7) return "acceptable";
    return "poor";
}

std::string to_string(MeasurementLevel level) {
    switch (level) {
        case MeasurementLevel::nominal: return "nominal";
        case MeasurementLevel::ordinal: return "ordinal";
        case MeasurementLevel::interval: return "interval";
        case MeasurementLevel::ratio: return "ratio";
    }
    return "unknown";
}

MeasurementLevel measurement_level_from_string(std::string_view text) {
    if (text == "nominal") return MeasurementLevel::nominal;
    if (text == "ordinal") return MeasurementLevel::ordinal;
    if (text == "interval") return MeasurementLevel::interval;
    if (text == "ratio") return MeasurementLevel::ratio;
    throw validation_error("bad_level", "level must be nominal, ordinal, interval or ratio");
}

namespace {

double alpha_from_covariance(const Eigen::MatrixXd& cov) {
    const double k = static_cast<double>(cov.rows());
    const double total = cov.sum();
    return k / (k - 1.0) * (1.0 - cov.diagonal().sum() / total);
}

double standardized_from_correlation(const Eigen::MatrixXd& r, double* mean_r = nullptr) {
    const auto k = r.rows();
    const double off = (r.sum() - r.diagonal().sum()) / static_cast<double>(k * (k - 1));
    if (mean_r) *mean_r = off;
    const double kd = static_cast<double>(k);
    return kd * off / (1.0 + (kd - 1.0) * off);
}

Eigen::MatrixXd drop_index(const Eigen::MatrixXd& m, Eigen::Index skip) {
    const auto k = m.rows();
    Eigen::MatrixXd out(k - 1, k - 1);
    for (Eigen::Index i = 0, oi = 0; i < k; ++i) {
        if (i == skip) continue;
        for (Eigen::Index j = 0, oj = 0; j < k; ++j) {
            if (j == skip) continue;
            out(oi, oj++) = m(i, j);
        }
        ++oi;
    }
    return out;
}

}  // namespace

ReliabilityReport cronbach_alpha(const Eigen::MatrixXd& items, std::vector<std::string> names) {
    const auto n = items.rows();
    const auto k = items.cols();
    if (k < 2) throw validation_error("too_few_items", "alpha needs at least 2 items");
    if (n < 2) throw validation_error("insufficient_cases", "alpha needs at least 2 complete cases");
    if (!items.allFinite()) throw validation_error("missing_values", "alpha requires complete cases");
    if (names.empty()) {
        for (Eigen::Index j = 0; j < k; ++j) names.push_back("item" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(names.size()) != k) {
        throw validation_error("shape_mismatch", "item names do not match item count");
    }

    const Eigen::MatrixXd centered = items.rowwise() - items.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (cov(j, j) <= 0.0) throw validation_error("constant_item", "item '" + names[j] + "' has zero variance");
    }
    if (!(cov.sum() > 0.0)) throw computation_error("zero_total_variance", "total score has zero variance");

    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    const Eigen::MatrixXd r = cov.array() / (sd * sd.transpose()).array();

    ReliabilityReport report;
    report.coefficient = Coefficient::alpha;
    report.value = alpha_from_covariance(cov);
    report.standardized_alpha = standardized_from_correlation(r, &report.mean_inter_item_r);
    report.n = static_cast<std::size_t>(n);
    report.band = interpretation_band(report.value);
    if (k > 2) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const Eigen::MatrixXd sub_cov = drop_index(cov, j);
            const Eigen::MatrixXd sub_r = drop_index(r, j);
            DropOneAlpha d;
            d.item = names[j];
            d.alpha = sub_cov.sum() > 0.0 ? alpha_from_covariance(sub_cov) : 0.0;
            d.standardized_alpha = standardized_from_correlation(sub_r);
            report.drop_one.push_back(std::move(d));
        }
    }
    report.items = std::move(names);
    return report;
}

ReliabilityReport cronbach_alpha(const MetricDataset& ds, std::span<const std::string> metrics) {
    const auto sub = ds.select(metrics);
    return cronbach_alpha(sub.complete_cases(), sub.metric_names());
}

namespace {

struct Pairable {
    std::vector<std::vector<double>> units;  // values of units with >= 2 ratings
    std::size_t raters = 0;
};

Pairable pairable_units(const RatingTable& table) {
    if (table.ratings.cols() < 2) throw validation_error("too_few_raters", "rating table needs at least 2 raters");
    Pairable out;
    out.raters = static_cast<std::size_t>(table.ratings.cols());
    for (Eigen::Index u = 0; u < table.ratings.rows(); ++u) {
        std::vector<double> vals;
        for (Eigen::Index c = 0; c < table.ratings.cols(); ++c) {
            const double v = table.ratings(u, c);
            if (std::isnan(v)) continue;
            if (!std::isfinite(v)) throw validation_error("non_finite", "ratings must be finite or missing");
            vals.push_back(v);
        }
        if (vals.size() >= 2) out.units.push_back(std::move(vals));
    }
    if (out.units.empty()) throw validation_error("no_pairable_units", "no unit is rated by at least 2 raters");
    return out;
}

std::vector<std::string> rater_names(std::size_t raters) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < raters; ++i) names.push_back("rater" + std::to_string(i + 1));
    return names;
}

}  // namespace

ReliabilityReport percent_agreement(const RatingTable& table) {
    if (table.level != MeasurementLevel::nominal && table.level != MeasurementLevel::ordinal) {
        throw validation_error("bad_level", "percent agreement applies to nominal or ordinal ratings");
    }
    const auto data = pairable_units(table);
    double matches = 0.0;
    double pairs = 0.0;
    for (const auto& vals : data.units) {
        for (std::size_t a = 0; a < vals.size(); ++a) {
            for (std::size_t b = a + 1; b < vals.size(); ++b) {
                pairs += 1.0;
                if (vals[a] == vals[b]) matches += 1.0;
            }
        }
    }
    ReliabilityReport report;
    report.coefficient = Coefficient::percent_agreement;
    report.value = matches / pairs;
    report.items = rater_names(data.raters);
    report.n = data.units.size();
    report.band = interpretation_band(report.value);
    return report;
}

ReliabilityReport krippendorff_alpha(const RatingTable& table) {
    const auto data = pairable_units(table);

    std::map<double, std::size_t> index;
    for (const auto& vals : data.units) {
        for (double v : vals) index.emplace(v, 0);
    }
    std::vector<double> values;
    for (auto& [v, i] : index) {
        i = values.size();
        values.push_back(v);
    }
    const auto m = static_cast<Eigen::Index>(values.size());

    Eigen::MatrixXd coincidence = Eigen::MatrixXd::Zero(m, m);
    for (const auto& vals : data.units) {
        const double weight = 1.0 / static_cast<double>(vals.size() - 1);
        for (std::size_t a = 0; a < vals.size(); ++a) {
            for (std::size_t b = 0; b < vals.size(); ++b) {
                if (a == b) continue;
                coincidence(static_cast<Eigen::Index>(index[vals[a]]), static_cast<Eigen::Index>(index[vals[b]])) += weight;
            }
        }
    }
    const Eigen::VectorXd marginals = coincidence.rowwise().sum();
    const double total = marginals.sum();

    auto delta2 = [&](Eigen::Index c, Eigen::Index k) -> double {
        if (c == k) return 0.0;
        switch (table.level) {
            case MeasurementLevel::nominal: return 1.0;
            case MeasurementLevel::ordinal: {
                const Eigen::Index lo = std::min(c, k);
                const Eigen::Index hi = std::max(c, k);
                const double s = marginals.segment(lo, hi - lo + 1).sum() - 0.5 * (marginals(lo) + marginals(hi));
                return s * s;
            }
            case MeasurementLevel::interval: {
                const double d = values[c] - values[k];
                return d * d;
            }
            case MeasurementLevel::ratio: {
                const double sum = values[c] + values[k];
                if (sum == 0.0) return 0.0;
                const double d = (values[c] - values[k]) / sum;
                return d * d;
            }
        }
        return 0.0;
    };

    double observed = 0.0;
    double expected = 0.0;
    for (Eigen::Index c = 0; c < m; ++c) {
        for (Eigen::Index k = 0; k < m; ++k) {
            const double d = delta2(c, k);
            observed += coincidence(c, k) * d;
            expected += marginals(c) * marginals(k) * d;
        }
    }
    observed /= total;
    expected /= total * (total - 1.0);
    if (!(expected > 0.0)) {
        throw computation_error("degenerate_data",
                                "expected disagreement is zero (all pairable ratings identical); alpha is undefined");
    }

    ReliabilityReport report;
    report.coefficient = Coefficient::krippendorff_alpha;
    report.value = 1.0 - observed / expected;
    report.items = rater_names(data.raters);
    report.n = data.units.size();
    report.band = interpretation_band(report.value);
    return report;
}

namespace {

ReliabilityReport composite(Coefficient kind, std::span<const double> loadings, std::span<const double> uniquenesses,
                            std::vector<std::string> names) {
    if (loadings.size() != uniquenesses.size()) {
        throw validation_error("shape_mismatch", "loadings and uniquenesses differ in length");
    }
    if (loadings.size() < 2) throw validation_error("too_few_items", "composite reliability needs at least 2 items");
    double sum_l = 0.0;
    double sum_t = 0.0;
    for (std::size_t i = 0; i < loadings.size(); ++i) {
        if (uniquenesses[i] < 0.0) throw validation_error("negative_uniqueness", "uniquenesses must be >= 0");
        sum_l += loadings[i];
        sum_t += uniquenesses[i];
    }
    const double common = sum_l * sum_l;
    if (!(common + sum_t > 0.0)) throw computation_error("degenerate_data", "composite has zero variance");
    if (names.empty()) {
        for (std::size_t i = 0; i < loadings.size(); ++i) names.push_back("item" + std::to_string(i + 1));
    }
    ReliabilityReport report;
    report.coefficient = kind;
    report.value = common / (common + sum_t);
    report.items = std::move(names);
    report.n = loadings.size();
    report.band = interpretation_band(report.value);
    return report;
}

}  // namespace

ReliabilityReport composite_reliability(std::span<const double> loadings, std::span<const double> uniquenesses,
                                        std::vector<std::string> names) {
    return composite(Coefficient::composite_reliability, loadings, uniquenesses, std::move(names));
}

ReliabilityReport omega_total(std::span<const double> loadings, std::span<const double> uniquenesses,
                              std::vector<std::string> names) {
    return composite(Coefficient::omega_total, loadings, uniquenesses, std::move(names));
}

}  // namespace metrology
