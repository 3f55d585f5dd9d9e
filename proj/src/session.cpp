#include "metrology/session.hpp"

#include "metrology/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace metrology {

namespace {

std::string fixed(double v, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

void fnv(std::uint64_t& h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffU;
        h *= 0x100000001b3ULL;
    }
}

std::string kinds_text(const Problem& p) {
    std::string out;
    for (auto k : p.kinds) out += (out.empty() ? "" : "+") + to_string(k);
    return out;
}

}  // namespace

bool SessionConfig::operator==(const SessionConfig& o) const {
    return efa.missing == o.efa.missing && efa.extraction.max_iter == o.efa.extraction.max_iter &&
           efa.extraction.tolerance == o.efa.extraction.tolerance && efa.rotation.method == o.efa.rotation.method &&
           efa.rotation.gamma == o.efa.rotation.gamma && efa.rotation.restarts == o.efa.rotation.restarts &&
           efa.rotation.seed == o.efa.rotation.seed && efa.rotation.tolerance == o.efa.rotation.tolerance &&
           efa.rotation.max_iter == o.efa.rotation.max_iter && efa.suppress_threshold == o.efa.suppress_threshold &&
           efa.override_adequacy == o.efa.override_adequacy && thresholds.communality == o.thresholds.communality &&
           thresholds.cross_loading == o.thresholds.cross_loading && thresholds.wrong_factor == o.thresholds.wrong_factor &&
           min_variance_explained == o.min_variance_explained && min_metrics_per_factor == o.min_metrics_per_factor;
}

std::vector<std::string> threshold_names() {
    return {"suppress", "communality", "cross_loading", "wrong_factor", "min_variance_explained", "gamma"};
}

std::string to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::drop: return "drop";
        case ActionKind::set_k: return "set_k";
        case ActionKind::set_threshold: return "set_threshold";
    }
    return "drop";
}

ActionKind action_kind_from_string(std::string_view text) {
    if (text == "drop") return ActionKind::drop;
    if (text == "set_k") return ActionKind::set_k;
    if (text == "set_threshold") return ActionKind::set_threshold;
    throw validation_error("unknown_action", "unknown action '" + std::string(text) + "'");
}

Action Action::drop(std::string metric) {
    Action a;
    a.kind = ActionKind::drop;
    a.metric = std::move(metric);
    return a;
}

Action Action::set_k(std::size_t k) {
    Action a;
    a.kind = ActionKind::set_k;
    a.k = k;
    return a;
}

Action Action::set_threshold(std::string name, double value) {
    Action a;
    a.kind = ActionKind::set_threshold;
    a.name = std::move(name);
    a.value = value;
    return a;
}

std::string Action::describe() const {
    switch (kind) {
        case ActionKind::drop: return "drop " + metric;
        case ActionKind::set_k: return "set_k " + std::to_string(k);
        case ActionKind::set_threshold: return "set_threshold " + name + "=" + fixed(value, 3);
    }
    return {};
}

std::string solution_digest(const FactorSolution& solution) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    fnv(h, static_cast<std::uint64_t>(solution.loadings.rows()));
    fnv(h, static_cast<std::uint64_t>(solution.loadings.cols()));
    for (Eigen::Index j = 0; j < solution.loadings.rows(); ++j) {
        for (Eigen::Index f = 0; f < solution.loadings.cols(); ++f) {
            fnv(h, static_cast<std::uint64_t>(std::llround(solution.loadings(j, f) * 1e10)));
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RefinementSession RefinementSession::create(std::shared_ptr<const MetricDataset> ds, ExpectedMap expected, std::size_t k,
                                            SessionConfig config, std::string id) {
    if (!ds) throw validation_error("no_dataset", "session needs a dataset");
    for (const auto& name : ds->metric_names()) {
        if (!expected.contains(name)) {
            throw validation_error("expected_incomplete", "expected construct map has no entry for metric '" + name + "'");
        }
    }
    for (const auto& [metric, _] : expected) {
        if (!ds->find(metric)) throw validation_error("unknown_metric", "expected map names unknown metric '" + metric + "'");
    }
    RefinementSession s;
    s.id_ = std::move(id);
    s.dataset_ = std::move(ds);
    s.expected_ = std::move(expected);
    s.states_.push_back(s.evaluate(k, std::move(config), {}));
    return s;
}

std::vector<std::string> RefinementSession::active_metrics() const {
    std::vector<std::string> out;
    const auto& dropped = current().dropped;
    for (const auto& name : dataset_->metric_names()) {
        if (std::find(dropped.begin(), dropped.end(), name) == dropped.end()) out.push_back(name);
    }
    return out;
}

RefinementSession::State RefinementSession::evaluate(std::size_t k, SessionConfig config, std::vector<std::string> dropped) const {
    State st;
    st.k = k;
    st.config = std::move(config);
    st.dropped = std::move(dropped);
    const MetricDataset active = dataset_->without(st.dropped);
    st.solution = run_efa(active, k, st.config.efa);
    ExpectedMap expected;
    for (const auto& name : active.metric_names()) expected[name] = expected_.at(name);
    st.problems = diagnose(st.solution, expected, st.config.thresholds);
    st.labels = label_factors(st.solution, expected);
    st.digest = solution_digest(st.solution);

    st.stop.no_problems = std::none_of(st.problems.begin(), st.problems.end(), [](const Problem& p) { return !p.retain_for_now; });
    st.stop.variance_ok = st.solution.variance_explained >= st.config.min_variance_explained;
    if (!st.stop.variance_ok) {
        st.stop.warnings.push_back("variance explained " + fixed(st.solution.variance_explained) + " is less than " +
                                   fixed(st.config.min_variance_explained));
    }
    st.stop.factor_sizes_ok = true;
    const auto sizes = st.solution.factor_sizes();
    for (std::size_t f = 0; f < sizes.size(); ++f) {
        if (sizes[f] < st.config.min_metrics_per_factor) {
            st.stop.factor_sizes_ok = false;
            const std::string label = st.labels[f].empty() ? "F" + std::to_string(f + 1) : st.labels[f];
            st.stop.warnings.push_back("factor " + label + " has " + std::to_string(sizes[f]) + " metrics; the minimum is " +
                                       std::to_string(st.config.min_metrics_per_factor));
        }
    }
    st.stop.clean = st.stop.no_problems && st.stop.variance_ok && st.stop.factor_sizes_ok;
    return st;
}

const RefinementStep& RefinementSession::apply(const Action& action, std::string rationale, bool automatic) {
    const State& now = current();
    std::size_t k = now.k;
    SessionConfig config = now.config;
    std::vector<std::string> dropped = now.dropped;
    std::vector<std::string> warnings;

    switch (action.kind) {
        case ActionKind::drop: {
            if (!dataset_->find(action.metric)) throw validation_error("unknown_metric", "unknown metric '" + action.metric + "'");
            if (std::find(dropped.begin(), dropped.end(), action.metric) != dropped.end()) {
                throw validation_error("already_dropped", "metric '" + action.metric + "' is already dropped");
            }
            dropped.push_back(action.metric);
            const std::string& construct = expected_.at(action.metric);
            std::size_t remaining = 0;
            for (const auto& name : dataset_->metric_names()) {
                if (expected_.at(name) == construct && std::find(dropped.begin(), dropped.end(), name) == dropped.end()) ++remaining;
            }
            if (remaining < config.min_metrics_per_factor) {
                warnings.push_back("construct " + construct + " is left with " + std::to_string(remaining) +
                                   " metrics; the minimum is " + std::to_string(config.min_metrics_per_factor));
            }
            break;
        }
        case ActionKind::set_k:
            if (action.k < 1) throw validation_error("bad_factor_count", "factor count must be at least 1");
            k = action.k;
            break;
        case ActionKind::set_threshold: {
            const double v = action.value;
            if (!std::isfinite(v)) throw validation_error("bad_threshold", "threshold must be finite");
            const bool unit = action.name != "gamma";
            if (unit && (v < 0.0 || v > 1.0)) throw validation_error("bad_threshold", "threshold " + action.name + " must lie in [0, 1]");
            if (action.name == "suppress") config.efa.suppress_threshold = v;
            else if (action.name == "communality") config.thresholds.communality = v;
            else if (action.name == "cross_loading") config.thresholds.cross_loading = v;
            else if (action.name == "wrong_factor") config.thresholds.wrong_factor = v;
            else if (action.name == "min_variance_explained") config.min_variance_explained = v;
            else if (action.name == "gamma") config.efa.rotation.gamma = v;
            else throw validation_error("unknown_threshold", "unknown threshold '" + action.name + "'");
            break;
        }
    }

    State next = evaluate(k, std::move(config), std::move(dropped));
    RefinementStep step;
    step.action = action;
    step.rationale = std::move(rationale);
    step.automatic = automatic;
    step.digest = next.digest;
    step.problems = next.problems;
    step.warnings = std::move(warnings);
    step.warnings.insert(step.warnings.end(), next.stop.warnings.begin(), next.stop.warnings.end());
    states_.push_back(std::move(next));
    history_.push_back(std::move(step));
    return history_.back();
}

void RefinementSession::undo() {
    if (history_.empty()) throw validation_error("nothing_to_undo", "session history is empty");
    history_.pop_back();
    states_.pop_back();
}

AutoRefineResult RefinementSession::auto_refine(std::size_t max_steps) {
    AutoRefineResult result;
    while (true) {
        const auto& problems = current().problems;
        const auto worst = std::find_if(problems.begin(), problems.end(), [](const Problem& p) { return !p.retain_for_now; });
        if (worst == problems.end()) {
            result.stop_reason = current().stop.clean ? "clean" : "no actionable problems";
            break;
        }
        if (result.steps >= max_steps) {
            result.stop_reason = "max_steps reached";
            break;
        }
        const std::string rationale = "automatic: worst remaining problem (" + kinds_text(*worst) + ", h2 " + fixed(worst->h2) +
                                      ", severity " + fixed(worst->severity, 3) + ")";
        try {
            apply(Action::drop(worst->metric), rationale, true);
        } catch (const Error& e) {
            result.stop_reason = "stopped before dropping " + worst->metric + ": " + e.what();
            break;
        }
        ++result.steps;
    }
    return result;
}

ExportedModel RefinementSession::export_model() const {
    const State& st = current();
    ExportedModel out;
    out.config = st.config;
    out.k = st.k;
    out.dropped = st.dropped;
    for (std::size_t f = 0; f < st.solution.k(); ++f) {
        std::vector<std::string> metrics;
        for (std::size_t j = 0; j < st.solution.p(); ++j) {
            if (st.solution.assignment[j] == f) metrics.push_back(st.solution.labels[j].raw);
        }
        if (metrics.empty()) continue;
        const std::string name = st.labels[f].empty() ? "F" + std::to_string(f + 1) : st.labels[f];
        out.content_validity_checklist.push_back("Confirm that the metrics of " + name +
                                                 " still cover the content of the construct.");
        out.spec.structure.emplace_back(name, std::move(metrics));
    }
    for (const auto& d : st.dropped) {
        out.content_validity_checklist.push_back("Re-assess content validity after dropping " + d + ".");
    }
    for (auto& w : out.spec.warnings()) out.content_validity_checklist.push_back(std::move(w));
    return out;
}

}  // namespace metrology
