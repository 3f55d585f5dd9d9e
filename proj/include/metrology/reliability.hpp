#pragma once

#include "metrology/dataset.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metrology {

enum class Coefficient { alpha, percent_agreement, krippendorff_alpha, composite_reliability, omega_total };

std::string to_string(Coefficient c);

// Advisory label: "excellent" above 0.9, "acceptable" above 0.7, otherwise "poor".
std::string interpretation_band(double value);

struct DropOneAlpha {
    std::string item;
    double alpha = 0.0;
    double standardized_alpha = 0.0;
};

struct ReliabilityReport {
    Coefficient coefficient = Coefficient::alpha;
    double value = 0.0;
    std::vector<std::string> items;
    std::size_t n = 0;
    std::string band;
    // Alpha only.
    double standardized_alpha = 0.0;
    double mean_inter_item_r = 0.0;
    std::vector<DropOneAlpha> drop_one;
};

// Items as columns, complete cases only. Variances use the n-1 denominator.
ReliabilityReport cronbach_alpha(const Eigen::MatrixXd& items, std::vector<std::string> names = {});
// Listwise deletion over the named columns of a dataset.
ReliabilityReport cronbach_alpha(const MetricDataset& ds, std::span<const std::string> metrics);

enum class MeasurementLevel { nominal, ordinal, interval, ratio };

std::string to_string(MeasurementLevel level);
MeasurementLevel measurement_level_from_string(std::string_view text);

// Units (rows) x raters (columns). NaN marks a missing rating.
struct RatingTable {
    Eigen::MatrixXd ratings;
    MeasurementLevel level = MeasurementLevel::nominal;
};

// Fraction of matching rater pairs over all co-rated pairs within units.
ReliabilityReport percent_agreement(const RatingTable& table);

// Coincidence-matrix formulation with missing-data support; 1 - D_o / D_e.
ReliabilityReport krippendorff_alpha(const RatingTable& table);

// (sum loadings)^2 / ((sum loadings)^2 + sum uniquenesses), standardized inputs.
ReliabilityReport composite_reliability(std::span<const double> loadings, std::span<const double> uniquenesses,
                                        std::vector<std::string> names = {});

// Same formula evaluated on a one-factor solution's loadings and uniquenesses.
ReliabilityReport omega_total(std::span<const double> loadings, std::span<const double> uniquenesses,
                              std::vector<std::string> names = {});

}  // namespace metrology
