#pragma once

#include "metrology/cfa.hpp"
#include "metrology/dataset.hpp"
#include "metrology/efa.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace metrology {

struct SessionConfig {
    EfaConfig efa;
    DiagnoseThresholds thresholds;
    double min_variance_explained = 0.6;
    std::size_t min_metrics_per_factor = 3;

    bool operator==(const SessionConfig& other) const;
};

// Threshold names accepted by set_threshold: suppress, communality,
// cross_loading, wrong_factor, min_variance_explained, gamma.
std::vector<std::string> threshold_names();

enum class ActionKind { drop, set_k, set_threshold };

std::string to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view text);

struct Action {
    ActionKind kind = ActionKind::drop;
    std::string metric;   // drop
    std::size_t k = 0;    // set_k
    std::string name;     // set_threshold
    double value = 0.0;   // set_threshold

    static Action drop(std::string metric);
    static Action set_k(std::size_t k);
    static Action set_threshold(std::string name, double value);
    std::string describe() const;
};

struct StopReport {
    bool clean = false;
    bool no_problems = false;  // no actionable (non-retained) problems
    bool variance_ok = false;
    bool factor_sizes_ok = false;
    std::vector<std::string> warnings;
};

struct RefinementStep {
    Action action;
    std::string rationale;
    bool automatic = false;
    std::string digest;  // solution after the step
    std::vector<Problem> problems;
    std::vector<std::string> warnings;
};

// Content hash of loadings rounded to 1e-10 (FNV-1a, hex).
std::string solution_digest(const FactorSolution& solution);

struct ExportedModel {
    ConfirmatorySpec spec;
    SessionConfig config;
    std::size_t k = 0;
    std::vector<std::string> dropped;
    std::vector<std::string> content_validity_checklist;
};

struct AutoRefineResult {
    std::size_t steps = 0;
    std::string stop_reason;
};

class RefinementSession {
public:
    // Throws expected_incomplete naming the first uncovered metric, and the
    // EFA errors (inadequate_data unless overridden).
    static RefinementSession create(std::shared_ptr<const MetricDataset> ds, ExpectedMap expected, std::size_t k,
                                    SessionConfig config = {}, std::string id = {});

    const std::string& id() const { return id_; }
    const MetricDataset& dataset() const { return *dataset_; }
    std::shared_ptr<const MetricDataset> dataset_ptr() const { return dataset_; }
    const ExpectedMap& expected() const { return expected_; }
    std::size_t k() const { return current().k; }
    std::size_t initial_k() const { return states_.front().k; }
    const SessionConfig& config() const { return current().config; }
    const SessionConfig& initial_config() const { return states_.front().config; }
    const std::vector<RefinementStep>& history() const { return history_; }
    const std::vector<std::string>& dropped() const { return current().dropped; }
    std::vector<std::string> active_metrics() const;
    const FactorSolution& solution() const { return current().solution; }
    const std::vector<Problem>& problems() const { return current().problems; }
    const std::vector<std::string>& factor_labels() const { return current().labels; }
    const StopReport& stop_report() const { return current().stop; }
    const std::string& digest() const { return current().digest; }
    const std::string& initial_digest() const { return states_.front().digest; }

    // Appends a step. Invalid actions throw and leave the session unchanged.
    const RefinementStep& apply(const Action& action, std::string rationale = {}, bool automatic = false);
    // Removes exactly the last step; throws nothing_to_undo on an empty history.
    void undo();
    AutoRefineResult auto_refine(std::size_t max_steps);
    ExportedModel export_model() const;

private:
    struct State {
        std::size_t k = 0;
        SessionConfig config;
        std::vector<std::string> dropped;
        FactorSolution solution;
        std::vector<Problem> problems;
        std::vector<std::string> labels;
        StopReport stop;
        std::string digest;
    };

    RefinementSession() = default;
    const State& current() const { return states_.back(); }
    State evaluate(std::size_t k, SessionConfig config, std::vector<std::string> dropped) const;

    std::string id_;
    std::shared_ptr<const MetricDataset> dataset_;
    ExpectedMap expected_;
    std::vector<RefinementStep> history_;
    std::vector<State> states_;  // states_[i] is the state after i steps
};

}  // namespace metrology
