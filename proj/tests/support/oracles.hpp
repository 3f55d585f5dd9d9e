#pragma once

// Brute-force reference implementations used only by tests. They work on
// plain nested vectors and hand-written loops so that they share no code path
// with the library.

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

// Two-pass covariance definition of Pearson r.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// columns[j][i]: item j, case i.
inline double cronbach_alpha(const Matrix& columns) {
    const std::size_t k = columns.size();
    const std::size_t n = columns[0].size();
    double sum_item_var = 0.0;
    for (const auto& c : columns) sum_item_var += variance(c);
    std::vector<double> total(n, 0.0);
    for (const auto& c : columns) {
        for (std::size_t i = 0; i < n; ++i) total[i] += c[i];
    }
    const double kd = static_cast<double>(k);
    return kd / (kd - 1.0) * (1.0 - sum_item_var / variance(total));
}

// units[u] = ratings of unit u, NaN = missing.
inline double percent_agreement(const Matrix& units) {
    double match = 0.0, total = 0.0;
    for (const auto& u : units) {
        for (std::size_t a = 0; a < u.size(); ++a) {
            for (std::size_t b = a + 1; b < u.size(); ++b) {
                if (std::isnan(u[a]) || std::isnan(u[b])) continue;
                total += 1.0;
                if (u[a] == u[b]) match += 1.0;
            }
        }
    }
    return match / total;
}

// Pairwise-disagreement form of Krippendorff's alpha for nominal or interval data:
// D_o averages delta over ordered within-unit pairs weighted by 1/(m_u - 1);
// D_e averages delta over all ordered pairs of pairable values.
inline double krippendorff_alpha(const Matrix& units, bool interval) {
    auto delta = [&](double a, double b) { return interval ? (a - b) * (a - b) : (a == b ? 0.0 : 1.0); };
    std::vector<double> pool;
    double observed = 0.0;
    for (const auto& u : units) {
        std::vector<double> vals;
        for (double v : u) {
            if (!std::isnan(v)) vals.push_back(v);
        }
        if (vals.size() < 2) continue;
        double within = 0.0;
        for (std::size_t a = 0; a < vals.size(); ++a) {
            for (std::size_t b = 0; b < vals.size(); ++b) {
                if (a != b) within += delta(vals[a], vals[b]);
            }
        }
        observed += within / static_cast<double>(vals.size() - 1);
        pool.insert(pool.end(), vals.begin(), vals.end());
    }
    const double n = static_cast<double>(pool.size());
    double expected = 0.0;
    for (std::size_t a = 0; a < pool.size(); ++a) {
        for (std::size_t b = 0; b < pool.size(); ++b) {
            if (a != b) expected += delta(pool[a], pool[b]);
        }
    }
    observed /= n;
    expected /= n * (n - 1.0);
    return 1.0 - observed / expected;
}

// Gauss-Jordan inverse with partial pivoting.
inline Matrix inverse(Matrix a) {
    const std::size_t n = a.size();
    Matrix inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        std::swap(a[c], a[piv]);
        std::swap(inv[c], inv[piv]);
        const double d = a[c][c];
        if (d == 0.0) throw std::runtime_error("singular");
        for (std::size_t j = 0; j < n; ++j) {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[c][j];
                inv[r][j] -= f * inv[c][j];
            }
        }
    }
    return inv;
}

// log|A| by Doolittle LU with partial pivoting; A assumed to have positive determinant.
inline double log_det(Matrix a) {
    const std::size_t n = a.size();
    double ld = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        std::swap(a[c], a[piv]);
        ld += std::log(std::abs(a[c][c]));
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
        }
    }
    return ld;
}

struct KmoBartlett {
    double kmo = 0.0;
    std::vector<double> msa;
    double chi2 = 0.0;
    double df = 0.0;
};

// Textbook KMO (anti-image partial correlations from the explicit inverse) and
// Bartlett's statistic from the log-determinant.
inline KmoBartlett kmo_bartlett(const Matrix& r, std::size_t n) {
    const std::size_t p = r.size();
    const Matrix s = inverse(r);
    KmoBartlett out;
    double num = 0.0, q_total = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        double rr = 0.0, qq = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (i == j) continue;
            const double q = -s[i][j] / std::sqrt(s[i][i] * s[j][j]);
            rr += r[i][j] * r[i][j];
            qq += q * q;
        }
        out.msa.push_back(rr / (rr + qq));
        num += rr;
        q_total += qq;
    }
    out.kmo = num / (num + q_total);
    const double pd = static_cast<double>(p);
    out.chi2 = -(static_cast<double>(n) - 1.0 - (2.0 * pd + 5.0) / 6.0) * log_det(r);
    out.df = pd * (pd - 1.0) / 2.0;
    return out;
}

}  // namespace oracle
