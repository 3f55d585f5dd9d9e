#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace metrology {

// Observation = true score + systematic offset + Gaussian random error.
struct ErrorModel {
    double true_score = 0.0;
    double random_sd = 0.0;
    double systematic_offset = 0.0;
    std::uint64_t seed = 0;
};

std::vector<double> simulate_observations(const ErrorModel& model, std::size_t n);

struct DetectabilityReport {
    double effect = 0.0;
    double per_obs_sd = 0.0;
    // P(one observation of the better condition is ranked behind one of the worse).
    double misorder_probability = 0.0;
    // Overlapping coefficient of the two observation densities: 2 * Phi(-|effect| / (2 sd)).
    double distribution_overlap = 0.0;
};

DetectabilityReport detectability(double effect, double per_obs_sd);

// Two-sample z test, two-sided `alpha`, per-group n.
std::size_t required_sample_size(double effect, double per_obs_sd, double alpha = 0.05, double power = 0.8);

// Fraction of index-paired draws where the lower-mean condition produces the larger value.
double empirical_misorder_rate(const ErrorModel& lower, const ErrorModel& higher, std::size_t n);

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

// Equal-width bins spanning [min, max] of the samples.
std::vector<HistogramBin> histogram(const std::vector<double>& samples, std::size_t bins);

struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
};

SampleSummary summarize(const std::vector<double>& samples);

}  // namespace metrology
