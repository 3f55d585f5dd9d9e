#include "metrology/efa.hpp"

#include "metrology/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace metrology {

std::string to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::low_communality: return "low_communality";
        case ProblemKind::cross_loading: return "cross_loading";
        case ProblemKind::wrong_factor: return "wrong_factor";
    }
    return "unknown";
}

std::vector<std::string> label_factors(const FactorSolution& solution, const ExpectedMap& expected) {
    std::vector<std::string> constructs;
    for (const auto& [metric, construct] : expected) {
        if (std::find(constructs.begin(), constructs.end(), construct) == constructs.end()) constructs.push_back(construct);
    }
    std::sort(constructs.begin(), constructs.end());

    const auto k = solution.k();
    std::vector<std::vector<double>> score(k, std::vector<double>(constructs.size(), 0.0));
    for (std::size_t j = 0; j < solution.p(); ++j) {
        auto it = expected.find(solution.labels[j].raw);
        if (it == expected.end()) continue;
        const auto c = static_cast<std::size_t>(std::find(constructs.begin(), constructs.end(), it->second) - constructs.begin());
        for (std::size_t f = 0; f < k; ++f) {
            score[f][c] += std::abs(solution.loadings(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f)));
        }
    }

    std::vector<std::string> labels(k);
    std::vector<bool> factor_used(k, false);
    std::vector<bool> construct_used(constructs.size(), false);
    while (true) {
        double best = 0.0;
        std::size_t bf = k;
        std::size_t bc = constructs.size();
        for (std::size_t f = 0; f < k; ++f) {
            if (factor_used[f]) continue;
            for (std::size_t c = 0; c < constructs.size(); ++c) {
                if (!construct_used[c] && score[f][c] > best) {
                    best = score[f][c];
                    bf = f;
                    bc = c;
                }
            }
        }
        if (bf == k) break;
        labels[bf] = constructs[bc];
        factor_used[bf] = true;
        construct_used[bc] = true;
    }
    return labels;
}

std::vector<Problem> diagnose(const FactorSolution& solution, const ExpectedMap& expected,
                              const DiagnoseThresholds& thresholds) {
    for (const auto& label : solution.labels) {
        if (!expected.contains(label.raw)) {
            throw validation_error("expected_incomplete", "expected assignment has no construct for '" + label.raw + "'");
        }
    }
    const auto factor_labels = label_factors(solution, expected);
    const auto k = solution.k();
    const auto& lam = solution.loadings;
    auto at = [&](std::size_t j, std::size_t f) {
        return std::abs(lam(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f)));
    };
    auto expected_factor = [&](std::size_t j) -> std::optional<std::size_t> {
        const auto& construct = expected.at(solution.labels[j].raw);
        for (std::size_t f = 0; f < k; ++f) {
            if (factor_labels[f] == construct) return f;
        }
        return std::nullopt;
    };

    // Smallest primary loading among metrics that load primarily where expected.
    double min_correct_primary = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < solution.p(); ++j) {
        const auto e = expected_factor(j);
        if (e && solution.assignment[j] == *e) min_correct_primary = std::min(min_correct_primary, at(j, *e));
    }

    std::vector<Problem> problems;
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < solution.p(); ++j) {
        Problem pr;
        pr.metric = solution.labels[j].raw;
        pr.h2 = solution.communalities(static_cast<Eigen::Index>(j));
        pr.expected_factor = expected_factor(j);
        pr.primary_factor = solution.assignment[j];
        pr.correct_loading = pr.expected_factor ? at(j, *pr.expected_factor) : 0.0;
        std::size_t salient = 0;
        bool high_elsewhere = false;
        for (std::size_t f = 0; f < k; ++f) {
            const double v = at(j, f);
            if (v >= thresholds.cross_loading) ++salient;
            if (pr.expected_factor && f == *pr.expected_factor) continue;
            if (!pr.max_incorrect_factor || v > pr.max_incorrect_loading) {
                pr.max_incorrect_loading = v;
                pr.max_incorrect_factor = f;
            }
            if (v > thresholds.wrong_factor) high_elsewhere = true;
        }
        const bool primary_wrong = (!pr.expected_factor || pr.primary_factor != *pr.expected_factor) &&
                                   at(j, pr.primary_factor) >= thresholds.cross_loading;
        const bool low = pr.h2 < thresholds.communality;
        const bool wrong = high_elsewhere || primary_wrong;
        const bool cross = salient >= 2;
        if (low) pr.kinds.push_back(ProblemKind::low_communality);
        if (wrong) pr.kinds.push_back(ProblemKind::wrong_factor);
        if (cross) pr.kinds.push_back(ProblemKind::cross_loading);
        if (pr.kinds.empty()) continue;
        pr.kind = pr.kinds.front();

        if (low && wrong) {
            pr.severity = 3.0 + (1.0 - pr.h2);
            pr.note = "low communality and loads on the wrong factor";
        } else if (low) {
            pr.severity = 2.0 + (1.0 - pr.h2);
            pr.note = "low communality";
            if (!cross && pr.expected_factor && pr.correct_loading > thresholds.wrong_factor) {
                pr.retain_for_now = true;
                pr.note = "low communality but loads well and solely on the correct factor";
            }
        } else {
            const double margin = std::clamp(pr.max_incorrect_loading - pr.correct_loading, -1.0, 1.0);
            pr.severity = 1.0 + (1.0 + margin) / 2.0;
            pr.note = wrong ? "loads on the wrong factor" : "cross-loads";
            if (!wrong && cross && pr.expected_factor && pr.correct_loading > pr.max_incorrect_loading &&
                pr.max_incorrect_loading < min_correct_primary) {
                pr.retain_for_now = true;
                pr.note = "cross-loads but loads much higher on the correct factor";
            }
        }
        problems.push_back(std::move(pr));
        order.push_back(j);
    }

    std::vector<std::size_t> idx(problems.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = problems[a];
        const auto& pb = problems[b];
        if (pa.retain_for_now != pb.retain_for_now) return !pa.retain_for_now;
        if (pa.severity != pb.severity) return pa.severity > pb.severity;
        return order[a] < order[b];
    });
    std::vector<Problem> ranked;
    ranked.reserve(problems.size());
    for (auto i : idx) ranked.push_back(std::move(problems[i]));
    return ranked;
}

ScaleAudit audit_scales(const CorrelationMatrix& r, const ExpectedMap& assignment) {
    const auto p = r.size();
    std::vector<std::string> construct(p);
    std::map<std::string, std::size_t> sizes;
    for (std::size_t j = 0; j < p; ++j) {
        auto it = assignment.find(r.labels[j].raw);
        if (it == assignment.end()) {
            throw validation_error("unassigned_metric", "metric '" + r.labels[j].raw + "' has no construct");
        }
        construct[j] = it->second;
        sizes[it->second]++;
    }
    for (const auto& [metric, c] : assignment) {
        bool found = false;
        for (const auto& l : r.labels) found = found || l.raw == metric;
        if (!found) throw validation_error("unknown_metric", "unknown metric '" + metric + "'");
    }
    if (sizes.size() < 2) throw validation_error("too_few_constructs", "audit needs at least 2 constructs");
    for (const auto& [c, n] : sizes) {
        if (n < 2) throw validation_error("single_metric_construct", "construct '" + c + "' has a single metric");
    }

    std::vector<AuditPair> pairs;
    ScaleAudit audit;
    audit.min_intra = std::numeric_limits<double>::infinity();
    audit.max_inter = 0.0;
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a + 1; b < p; ++b) {
            AuditPair pair{r.labels[a].raw, r.labels[b].raw,
                           std::abs(r.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))), construct[a] == construct[b]};
            if (pair.intra) {
                audit.min_intra = std::min(audit.min_intra, pair.abs_r);
            } else {
                audit.max_inter = std::max(audit.max_inter, pair.abs_r);
            }
            pairs.push_back(std::move(pair));
        }
    }
    audit.pass = audit.min_intra > audit.max_inter;
    if (!audit.pass) {
        for (auto& pair : pairs) {
            if ((pair.intra && pair.abs_r <= audit.max_inter) || (!pair.intra && pair.abs_r >= audit.min_intra)) {
                audit.offending_pairs.push_back(pair);
            }
        }
    }
    return audit;
}

std::string render_loadings_table(const FactorSolution& solution, const std::vector<std::string>& factor_names) {
    const auto k = solution.k();
    std::vector<std::string> headers;
    for (std::size_t f = 0; f < k; ++f) {
        headers.push_back(f < factor_names.size() && !factor_names[f].empty() ? factor_names[f] : "F" + std::to_string(f + 1));
    }
    headers.push_back("h2");

    std::size_t name_width = 0;
    for (const auto& l : solution.labels) name_width = std::max(name_width, l.raw.size());
    std::vector<std::size_t> widths;
    for (const auto& h : headers) widths.push_back(std::max<std::size_t>(h.size(), 5));

    auto cell = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    auto pad_left = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
    auto pad_right = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };

    std::ostringstream out;
    out << pad_right("", name_width);
    for (std::size_t c = 0; c < headers.size(); ++c) out << "  " << pad_left(headers[c], widths[c]);
    out << '\n';
    for (std::size_t j = 0; j < solution.p(); ++j) {
        out << pad_right(solution.labels[j].raw, name_width);
        for (std::size_t f = 0; f < k; ++f) {
            const double v = solution.loadings(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f));
            out << "  " << pad_left(solution.suppressed(j, f) ? "" : cell(v), widths[f]);
        }
        out << "  " << pad_left(cell(solution.communalities(static_cast<Eigen::Index>(j))), widths[k]);
        out << '\n';
    }
    return out.str();
}

}  // namespace metrology
