#include "metrology/truescore.hpp"

#include "metrology/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace metrology {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

}  // namespace

std::vector<double> simulate_observations(const ErrorModel& model, std::size_t n) {
    if (n == 0) throw validation_error("bad_n", "number of observations must be at least 1");
    if (!(model.random_sd >= 0.0) || !std::isfinite(model.random_sd)) {
        throw validation_error("bad_sd", "random error sd must be finite and >= 0");
    }
    const double center = model.true_score + model.systematic_offset;
    std::vector<double> out(n, center);
    if (model.random_sd == 0.0) return out;
    std::mt19937_64 rng(model.seed);
    std::normal_distribution<double> noise(0.0, model.random_sd);
    for (auto& x : out) x = center + noise(rng);
    return out;
}

DetectabilityReport detectability(double effect, double per_obs_sd) {
    if (!std::isfinite(effect) || !std::isfinite(per_obs_sd) || per_obs_sd < 0.0) {
        throw validation_error("bad_arguments", "effect must be finite and sd finite and >= 0");
    }
    if (effect == 0.0 && per_obs_sd == 0.0) {
        throw validation_error("undefined", "detectability is undefined when both effect and sd are zero");
    }
    DetectabilityReport r;
    r.effect = effect;
    r.per_obs_sd = per_obs_sd;
    if (per_obs_sd == 0.0) {
        r.misorder_probability = 0.0;
        r.distribution_overlap = 0.0;
        return r;
    }
    const double gap = std::abs(effect);
    r.misorder_probability = normal_cdf(-gap / (per_obs_sd * std::sqrt(2.0)));
    r.distribution_overlap = 2.0 * normal_cdf(-gap / (2.0 * per_obs_sd));
    return r;
}

std::size_t required_sample_size(double effect, double per_obs_sd, double alpha, double power) {
    if (effect == 0.0 || !std::isfinite(effect)) {
        throw validation_error("zero_effect", "a zero effect cannot reach the target power");
    }
    if (!(per_obs_sd >= 0.0) || !std::isfinite(per_obs_sd)) throw validation_error("bad_sd", "sd must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("bad_alpha", "alpha must lie in (0, 1)");
    if (!(power > 0.5 && power < 1.0)) throw validation_error("bad_power", "power must lie in (0.5, 1)");
    const double z = normal_quantile(1.0 - alpha / 2.0) + normal_quantile(power);
    const double ratio = per_obs_sd / effect;
    const double n = 2.0 * z * z * ratio * ratio;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(n)));
}

double empirical_misorder_rate(const ErrorModel& lower, const ErrorModel& higher, std::size_t n) {
    if (lower.seed == higher.seed && lower.random_sd > 0.0 && higher.random_sd > 0.0) {
        throw validation_error("shared_seed", "the two conditions need distinct seeds");
    }
    const auto a = simulate_observations(lower, n);
    const auto b = simulate_observations(higher, n);
    std::size_t misordered = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] > b[i]) ++misordered;
    }
    return static_cast<double>(misordered) / static_cast<double>(n);
}

std::vector<HistogramBin> histogram(const std::vector<double>& samples, std::size_t bins) {
    if (samples.empty()) throw validation_error("empty", "no samples to bin");
    if (bins == 0) throw validation_error("bad_bins", "bin count must be at least 1");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lower = lo + width * static_cast<double>(b);
        out[b].upper = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
    }
    for (double x : samples) {
        auto b = static_cast<std::size_t>((x - lo) / width);
        out[std::min(b, bins - 1)].count++;
    }
    return out;
}

SampleSummary summarize(const std::vector<double>& samples) {
    SampleSummary s;
    s.n = samples.size();
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double x : samples) sum += x;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double x : samples) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

}  // namespace metrology
