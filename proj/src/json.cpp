#include "metrology/json.hpp"

#include "json_util.hpp"
#include "metrology/error.hpp"

#include <set>

namespace metrology {

using detail::number;

namespace {

Json optional_index(const std::optional<std::size_t>& v) { return v ? Json(*v) : Json(nullptr); }

template <typename T>
void read(const Json& j, const char* field, T& out) {
    if (!j.contains(field)) return;
    try {
        out = j.at(field).get<T>();
    } catch (const Json::exception&) {
        throw validation_error("bad_field", std::string("field '") + field + "' has the wrong type");
    }
}

void read_number(const Json& j, const char* field, double& out) {
    if (!j.contains(field)) return;
    if (!j.at(field).is_number()) throw validation_error("bad_field", std::string("field '") + field + "' must be a number");
    out = j.at(field).get<double>();
}

void read_count(const Json& j, const char* field, std::size_t& out) {
    if (!j.contains(field)) return;
    const auto& v = j.at(field);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw validation_error("bad_field", std::string("field '") + field + "' must be a non-negative integer");
    }
    out = v.get<std::size_t>();
}

}  // namespace

Json encode(const MetricDataset& ds) {
    std::set<std::string> constructs;
    Json columns = Json::array();
    for (const auto& c : ds.columns()) {
        constructs.insert(c.construct);
        columns.push_back({{"name", c.raw}, {"construct", c.construct}, {"metric", c.metric},
                           {"tool", c.tool ? Json(*c.tool) : Json(nullptr)}});
    }
    return {{"n_entities", ds.n_entities()},
            {"n_metrics", ds.n_metrics()},
            {"metrics", ds.metric_names()},
            {"columns", columns},
            {"constructs", std::vector<std::string>(constructs.begin(), constructs.end())},
            {"missing_cells", ds.missing().count()},
            {"complete_cases", ds.complete_cases().rows()},
            {"provenance", ds.provenance()}};
}

Json encode(const CorrelationMatrix& cm) {
    Json out = {{"labels", cm.names()},
                {"r", detail::to_json(cm.r)},
                {"n_used", cm.n_used},
                {"missing_policy", to_string(cm.missing_policy)},
                {"warnings", cm.warnings}};
    if (cm.pair_counts.size() > 0) out["pair_counts"] = detail::to_json(Eigen::MatrixXd(cm.pair_counts.cast<double>()));
    return out;
}

Json encode(const ReliabilityReport& report) {
    Json out = {{"coefficient", to_string(report.coefficient)},
                {"value", number(report.value)},
                {"items", report.items},
                {"n", report.n},
                {"band", report.band}};
    if (report.coefficient == Coefficient::alpha) {
        out["standardized_alpha"] = number(report.standardized_alpha);
        out["mean_inter_item_r"] = number(report.mean_inter_item_r);
        Json drops = Json::array();
        for (const auto& d : report.drop_one) {
            drops.push_back({{"item", d.item}, {"alpha", number(d.alpha)}, {"standardized_alpha", number(d.standardized_alpha)}});
        }
        out["drop_one"] = drops;
    }
    return out;
}

Json encode(const AdequacyReport& report) {
    Json pairs = Json::array();
    for (const auto& p : report.multicollinear_pairs) pairs.push_back({{"a", p.a}, {"b", p.b}, {"r", number(p.r)}});
    Json per = Json::array();
    for (double v : report.kmo_per_variable) per.push_back(number(v));
    return {{"labels", report.labels},
            {"kmo_overall", number(report.kmo_overall)},
            {"kmo_per_variable", per},
            {"bartlett_chi2", number(report.bartlett_chi2)},
            {"bartlett_df", report.bartlett_df},
            {"bartlett_p", number(report.bartlett_p)},
            {"multicollinear_pairs", pairs},
            {"n", report.n},
            {"obs_per_variable", number(report.obs_per_variable)},
            {"acceptable", report.acceptable()},
            {"warnings", report.warnings}};
}

Json encode(const FactorCountAdvice& advice) {
    return {{"eigenvalues", advice.eigenvalues},
            {"parallel_suggested", advice.parallel_suggested},
            {"parallel_thresholds", advice.parallel_thresholds},
            {"kaiser_suggested", advice.kaiser_suggested},
            {"scree_series", advice.scree_series},
            {"scree_elbow_candidates", advice.scree_elbow_candidates},
            {"theory_suggested", optional_index(advice.theory_suggested)}};
}

Json encode(const FactorSolution& s) {
    Json suppressed = Json::array();
    for (std::size_t j = 0; j < s.p(); ++j) {
        Json row = Json::array();
        for (std::size_t f = 0; f < s.k(); ++f) row.push_back(s.suppressed(j, f));
        suppressed.push_back(row);
    }
    Json heywood = Json::array();
    for (bool h : s.heywood) heywood.push_back(h);
    return {{"labels", s.names()},
            {"p", s.p()},
            {"k", s.k()},
            {"loadings", detail::to_json(s.loadings)},
            {"suppressed", suppressed},
            {"suppress_threshold", s.suppress_threshold},
            {"factor_correlations", detail::to_json(s.factor_correlations)},
            {"communalities", detail::to_json(s.communalities)},
            {"eigenvalues", detail::to_json(s.eigenvalues)},
            {"variance_explained", number(s.variance_explained)},
            {"assignment", s.assignment},
            {"heywood", heywood},
            {"rotation", to_string(s.rotation)},
            {"gamma", s.gamma},
            {"extraction_iterations", s.extraction_iterations},
            {"rotation_criterion", number(s.rotation_criterion)},
            {"n_used", s.n_used}};
}

Json encode(const Problem& p) {
    Json kinds = Json::array();
    for (auto k : p.kinds) kinds.push_back(to_string(k));
    return {{"kind", to_string(p.kind)},
            {"kinds", kinds},
            {"metric", p.metric},
            {"severity", number(p.severity)},
            {"retain_for_now", p.retain_for_now},
            {"note", p.note},
            {"h2", number(p.h2)},
            {"expected_factor", optional_index(p.expected_factor)},
            {"primary_factor", p.primary_factor},
            {"correct_loading", number(p.correct_loading)},
            {"max_incorrect_loading", number(p.max_incorrect_loading)},
            {"max_incorrect_factor", optional_index(p.max_incorrect_factor)}};
}

Json encode(const std::vector<Problem>& problems) {
    Json out = Json::array();
    for (const auto& p : problems) out.push_back(encode(p));
    return out;
}

Json encode(const ScaleAudit& audit) {
    Json pairs = Json::array();
    for (const auto& p : audit.offending_pairs) {
        pairs.push_back({{"a", p.a}, {"b", p.b}, {"abs_r", number(p.abs_r)}, {"intra", p.intra}});
    }
    return {{"min_intra", number(audit.min_intra)},
            {"max_inter", number(audit.max_inter)},
            {"pass", audit.pass},
            {"offending_pairs", pairs}};
}

Json encode(const DetectabilityReport& r) {
    return {{"effect", number(r.effect)},
            {"per_obs_sd", number(r.per_obs_sd)},
            {"misorder_probability", number(r.misorder_probability)},
            {"distribution_overlap", number(r.distribution_overlap)}};
}

Json encode(const SampleSummary& s) { return {{"n", s.n}, {"mean", number(s.mean)}, {"sd", number(s.sd)}}; }

Json encode(const std::vector<HistogramBin>& bins) {
    Json out = Json::array();
    for (const auto& b : bins) out.push_back({{"lower", number(b.lower)}, {"upper", number(b.upper)}, {"count", b.count}});
    return out;
}

Json encode(const SessionConfig& c) {
    return {{"missing", to_string(c.efa.missing)},
            {"suppress_threshold", c.efa.suppress_threshold},
            {"override_adequacy", c.efa.override_adequacy},
            {"extraction", {{"max_iter", c.efa.extraction.max_iter}, {"tolerance", c.efa.extraction.tolerance}}},
            {"rotation",
             {{"method", to_string(c.efa.rotation.method)},
              {"gamma", c.efa.rotation.gamma},
              {"restarts", c.efa.rotation.restarts},
              {"seed", c.efa.rotation.seed},
              {"tolerance", c.efa.rotation.tolerance},
              {"max_iter", c.efa.rotation.max_iter}}},
            {"thresholds",
             {{"communality", c.thresholds.communality},
              {"cross_loading", c.thresholds.cross_loading},
              {"wrong_factor", c.thresholds.wrong_factor}}},
            {"min_variance_explained", c.min_variance_explained},
            {"min_metrics_per_factor", c.min_metrics_per_factor}};
}

SessionConfig decode_session_config(const Json& j, SessionConfig c) {
    if (j.is_null()) return c;
    if (!j.is_object()) throw validation_error("bad_field", "config must be an object");
    if (j.contains("missing")) c.efa.missing = missing_policy_from_string(j.at("missing").get<std::string>());
    read_number(j, "suppress_threshold", c.efa.suppress_threshold);
    read(j, "override_adequacy", c.efa.override_adequacy);
    if (j.contains("extraction")) {
        const auto& e = j.at("extraction");
        read_count(e, "max_iter", c.efa.extraction.max_iter);
        read_number(e, "tolerance", c.efa.extraction.tolerance);
    }
    if (j.contains("rotation")) {
        const auto& r = j.at("rotation");
        if (r.contains("method")) c.efa.rotation.method = rotation_from_string(r.at("method").get<std::string>());
        read_number(r, "gamma", c.efa.rotation.gamma);
        read_count(r, "restarts", c.efa.rotation.restarts);
        read(r, "seed", c.efa.rotation.seed);
        read_number(r, "tolerance", c.efa.rotation.tolerance);
        read_count(r, "max_iter", c.efa.rotation.max_iter);
    }
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        read_number(t, "communality", c.thresholds.communality);
        read_number(t, "cross_loading", c.thresholds.cross_loading);
        read_number(t, "wrong_factor", c.thresholds.wrong_factor);
    }
    read_number(j, "min_variance_explained", c.min_variance_explained);
    read_count(j, "min_metrics_per_factor", c.min_metrics_per_factor);
    return c;
}

Json encode(const Action& a) {
    switch (a.kind) {
        case ActionKind::drop: return {{"type", "drop"}, {"metric", a.metric}};
        case ActionKind::set_k: return {{"type", "set_k"}, {"k", a.k}};
        case ActionKind::set_threshold: return {{"type", "set_threshold"}, {"name", a.name}, {"value", a.value}};
    }
    return {};
}

Action decode_action(const Json& j) {
    const auto kind = action_kind_from_string(detail::require(j, "type").get<std::string>());
    switch (kind) {
        case ActionKind::drop: {
            const auto& m = detail::require(j, "metric");
            if (!m.is_string()) throw validation_error("bad_field", "field 'metric' must be a string");
            return Action::drop(m.get<std::string>());
        }
        case ActionKind::set_k: {
            std::size_t k = 0;
            detail::require(j, "k");
            read_count(j, "k", k);
            return Action::set_k(k);
        }
        case ActionKind::set_threshold: {
            double v = 0.0;
            detail::require(j, "value");
            read_number(j, "value", v);
            return Action::set_threshold(detail::require(j, "name").get<std::string>(), v);
        }
    }
    throw validation_error("unknown_action", "unknown action");
}

Json encode(const StopReport& r) {
    return {{"clean", r.clean},
            {"no_problems", r.no_problems},
            {"variance_ok", r.variance_ok},
            {"factor_sizes_ok", r.factor_sizes_ok},
            {"warnings", r.warnings}};
}

Json encode(const RefinementStep& step) {
    return {{"action", encode(step.action)},
            {"rationale", step.rationale},
            {"automatic", step.automatic},
            {"digest", step.digest},
            {"problems", encode(step.problems)},
            {"warnings", step.warnings}};
}

Json encode(const ConfirmatorySpec& spec) {
    Json structure = Json::array();
    for (const auto& [f, ms] : spec.structure) structure.push_back({{"factor", f}, {"metrics", ms}});
    return {{"schema", "metrology.confirmatory_spec"}, {"version", 1}, {"structure", structure}, {"warnings", spec.warnings()}};
}

Json encode(const ExportedModel& m) {
    Json out = encode(m.spec);
    out["k"] = m.k;
    out["config"] = encode(m.config);
    out["dropped"] = m.dropped;
    out["content_validity_checklist"] = m.content_validity_checklist;
    return out;
}

ConfirmatorySpec decode_spec(const Json& j) {
    ConfirmatorySpec spec;
    const Json* source = &j;
    if (j.is_object() && j.contains("structure")) source = &j.at("structure");
    try {
        if (source->is_array()) {
            for (const auto& entry : *source) {
                spec.structure.emplace_back(detail::require(entry, "factor").get<std::string>(),
                                            detail::require(entry, "metrics").get<std::vector<std::string>>());
            }
        } else if (source->is_object()) {
            for (const auto& [factor, metrics] : source->items()) {
                spec.structure.emplace_back(factor, metrics.get<std::vector<std::string>>());
            }
        } else {
            throw validation_error("bad_field", "structure must be an array or object");
        }
    } catch (const Json::exception&) {
        throw validation_error("bad_field", "structure entries need a factor name and a list of metric names");
    }
    spec.validate();
    return spec;
}

Json encode(const MeasurementModel& model) { return Json::parse(export_formulas(model)); }

CfaOptions decode_cfa_options(const Json& j) {
    CfaOptions o;
    if (j.is_null()) return o;
    read_count(j, "max_iter", o.max_iter);
    read_number(j, "gradient_tolerance", o.gradient_tolerance);
    read(j, "multi_start", o.multi_start);
    read_count(j, "starts", o.starts);
    read(j, "seed", o.seed);
    return o;
}

ErrorModel decode_error_model(const Json& j) {
    ErrorModel m;
    read_number(j, "true_score", m.true_score);
    read_number(j, "random_sd", m.random_sd);
    read_number(j, "systematic_offset", m.systematic_offset);
    read(j, "seed", m.seed);
    return m;
}

Json session_state(const RefinementSession& s) {
    Json history = Json::array();
    for (const auto& step : s.history()) history.push_back(encode(step));
    return {{"id", s.id()},
            {"k", s.k()},
            {"initial_k", s.initial_k()},
            {"config", encode(s.config())},
            {"metrics", s.dataset().metric_names()},
            {"active_metrics", s.active_metrics()},
            {"dropped", s.dropped()},
            {"factor_labels", s.factor_labels()},
            {"digest", s.digest()},
            {"initial_digest", s.initial_digest()},
            {"solution", encode(s.solution())},
            {"problems", encode(s.problems())},
            {"stop_report", encode(s.stop_report())},
            {"history", history}};
}

Json save_session(const RefinementSession& s) {
    Json steps = Json::array();
    for (const auto& step : s.history()) {
        steps.push_back({{"action", encode(step.action)},
                         {"rationale", step.rationale},
                         {"automatic", step.automatic},
                         {"digest", step.digest}});
    }
    return {{"schema", "metrology.session"},
            {"version", 1},
            {"id", s.id()},
            {"dataset", {{"metrics", s.dataset().metric_names()}, {"n_entities", s.dataset().n_entities()}}},
            {"expected", s.expected()},
            {"k", s.initial_k()},
            {"config", encode(s.initial_config())},
            {"initial_digest", s.initial_digest()},
            {"steps", steps},
            {"digest", s.digest()}};
}

RefinementSession load_session(const Json& doc, std::shared_ptr<const MetricDataset> ds) {
    if (detail::require(doc, "schema") != "metrology.session") throw validation_error("bad_schema", "document is not a session");
    if (detail::require(doc, "version") != 1) throw validation_error("bad_version", "unsupported session version");
    const auto metrics = detail::require(detail::require(doc, "dataset"), "metrics").get<std::vector<std::string>>();
    if (!ds || metrics != ds->metric_names()) {
        throw validation_error("dataset_mismatch", "session was recorded against a dataset with different metrics");
    }
    auto session = RefinementSession::create(std::move(ds), detail::require(doc, "expected").get<ExpectedMap>(),
                                             detail::require(doc, "k").get<std::size_t>(),
                                             decode_session_config(detail::require(doc, "config")),
                                             doc.value("id", std::string{}));
    if (session.initial_digest() != detail::require(doc, "initial_digest").get<std::string>()) {
        throw computation_error("digest_mismatch", "initial solution digest differs from the recorded one");
    }
    std::size_t index = 0;
    for (const auto& step : detail::require(doc, "steps")) {
        const auto& applied = session.apply(decode_action(detail::require(step, "action")), step.value("rationale", std::string{}),
                                            step.value("automatic", false));
        if (applied.digest != detail::require(step, "digest").get<std::string>()) {
            throw computation_error("digest_mismatch", "replayed step " + std::to_string(index + 1) + " (" +
                                                           applied.action.describe() + ") differs from the recorded solution");
        }
        ++index;
    }
    return session;
}

Json ok_envelope(Json result) { return {{"ok", true}, {"result", std::move(result)}, {"error", nullptr}}; }

Json error_envelope(const std::string& code, const std::string& message) {
    return {{"ok", false}, {"result", nullptr}, {"error", {{"code", code}, {"message", message}}}};
}

namespace {

constexpr const char* kSchema = R"JSON(
{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "$id": "metrology.api",
  "title": "metrology API payloads",
  "$defs": {
    "number_or_null": {"type": ["number", "null"]},
    "numbers": {"type": "array", "items": {"$ref": "#/$defs/number_or_null"}},
    "matrix": {"type": "array", "items": {"$ref": "#/$defs/numbers"}},
    "strings": {"type": "array", "items": {"type": "string"}},
    "count": {"type": "integer", "minimum": 0},

    "envelope": {
      "type": "object",
      "required": ["ok", "result", "error"],
      "properties": {
        "ok": {"type": "boolean"},
        "result": true,
        "error": {
          "oneOf": [
            {"type": "null"},
            {"type": "object", "required": ["code", "message"],
             "properties": {"code": {"type": "string"}, "message": {"type": "string"}}}
          ]
        }
      },
      "oneOf": [
        {"properties": {"ok": {"const": true}, "error": {"type": "null"}}},
        {"properties": {"ok": {"const": false}, "result": {"type": "null"}, "error": {"type": "object"}}}
      ]
    },

    "dataset_summary": {
      "type": "object",
      "required": ["n_entities", "n_metrics", "metrics", "columns", "constructs", "missing_cells"],
      "properties": {
        "id": {"type": "string"},
        "n_entities": {"$ref": "#/$defs/count"},
        "n_metrics": {"$ref": "#/$defs/count"},
        "metrics": {"$ref": "#/$defs/strings"},
        "columns": {"type": "array", "items": {
          "type": "object", "required": ["name", "construct", "metric", "tool"],
          "properties": {"name": {"type": "string"}, "construct": {"type": "string"},
                         "metric": {"type": "string"}, "tool": {"type": ["string", "null"]}}}},
        "constructs": {"$ref": "#/$defs/strings"},
        "missing_cells": {"$ref": "#/$defs/count"},
        "complete_cases": {"$ref": "#/$defs/count"},
        "provenance": {"$ref": "#/$defs/strings"}
      }
    },

    "correlations": {
      "type": "object",
      "required": ["labels", "r", "n_used", "missing_policy", "warnings"],
      "properties": {
        "labels": {"$ref": "#/$defs/strings"},
        "r": {"$ref": "#/$defs/matrix"},
        "n_used": {"$ref": "#/$defs/count"},
        "missing_policy": {"enum": ["listwise", "pairwise"]},
        "pair_counts": {"$ref": "#/$defs/matrix"},
        "warnings": {"$ref": "#/$defs/strings"}
      }
    },

    "reliability_report": {
      "type": "object",
      "required": ["coefficient", "value", "items", "n", "band"],
      "properties": {
        "coefficient": {"enum": ["alpha", "percent_agreement", "krippendorff_alpha", "composite_reliability", "omega_total"]},
        "value": {"type": "number"},
        "items": {"$ref": "#/$defs/strings"},
        "n": {"$ref": "#/$defs/count"},
        "band": {"enum": ["excellent", "acceptable", "poor"]},
        "standardized_alpha": {"$ref": "#/$defs/number_or_null"},
        "mean_inter_item_r": {"$ref": "#/$defs/number_or_null"},
        "drop_one": {"type": "array", "items": {
          "type": "object", "required": ["item", "alpha", "standardized_alpha"],
          "properties": {"item": {"type": "string"}, "alpha": {"$ref": "#/$defs/number_or_null"},
                         "standardized_alpha": {"$ref": "#/$defs/number_or_null"}}}}
      }
    },

    "adequacy_report": {
      "type": "object",
      "required": ["kmo_overall", "kmo_per_variable", "bartlett_chi2", "bartlett_df", "bartlett_p",
                   "multicollinear_pairs", "obs_per_variable", "n", "warnings"],
      "properties": {
        "labels": {"$ref": "#/$defs/strings"},
        "kmo_overall": {"type": "number", "minimum": 0, "maximum": 1},
        "kmo_per_variable": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "bartlett_chi2": {"type": "number", "minimum": 0},
        "bartlett_df": {"$ref": "#/$defs/count"},
        "bartlett_p": {"type": "number", "minimum": 0, "maximum": 1},
        "multicollinear_pairs": {"type": "array", "items": {
          "type": "object", "required": ["a", "b", "r"],
          "properties": {"a": {"type": "string"}, "b": {"type": "string"}, "r": {"type": "number"}}}},
        "n": {"$ref": "#/$defs/count"},
        "obs_per_variable": {"type": "number"},
        "acceptable": {"type": "boolean"},
        "warnings": {"$ref": "#/$defs/strings"}
      }
    },

    "factor_count_advice": {
      "type": "object",
      "required": ["eigenvalues", "parallel_suggested", "parallel_thresholds", "kaiser_suggested",
                   "scree_series", "scree_elbow_candidates", "theory_suggested"],
      "properties": {
        "eigenvalues": {"type": "array", "items": {"type": "number"}},
        "parallel_suggested": {"$ref": "#/$defs/count"},
        "parallel_thresholds": {"type": "array", "items": {"type": "number"}},
        "kaiser_suggested": {"$ref": "#/$defs/count"},
        "scree_series": {"type": "array", "items": {"type": "number"}},
        "scree_elbow_candidates": {"type": "array", "items": {"$ref": "#/$defs/count"}},
        "theory_suggested": {"type": ["integer", "null"], "minimum": 0}
      }
    },

    "factor_solution": {
      "type": "object",
      "required": ["labels", "p", "k", "loadings", "suppressed", "suppress_threshold", "factor_correlations",
                   "communalities", "eigenvalues", "variance_explained", "assignment", "heywood", "rotation"],
      "properties": {
        "labels": {"$ref": "#/$defs/strings"},
        "p": {"$ref": "#/$defs/count"},
        "k": {"$ref": "#/$defs/count"},
        "loadings": {"$ref": "#/$defs/matrix"},
        "suppressed": {"type": "array", "items": {"type": "array", "items": {"type": "boolean"}}},
        "suppress_threshold": {"type": "number"},
        "factor_correlations": {"$ref": "#/$defs/matrix"},
        "communalities": {"$ref": "#/$defs/numbers"},
        "eigenvalues": {"$ref": "#/$defs/numbers"},
        "variance_explained": {"type": "number"},
        "assignment": {"type": "array", "items": {"$ref": "#/$defs/count"}},
        "heywood": {"type": "array", "items": {"type": "boolean"}},
        "rotation": {"enum": ["none", "oblimin"]},
        "gamma": {"type": "number"},
        "extraction_iterations": {"$ref": "#/$defs/count"},
        "rotation_criterion": {"$ref": "#/$defs/number_or_null"},
        "n_used": {"$ref": "#/$defs/count"}
      }
    },

    "problem": {
      "type": "object",
      "required": ["kind", "kinds", "metric", "severity", "retain_for_now", "h2", "primary_factor"],
      "properties": {
        "kind": {"enum": ["low_communality", "cross_loading", "wrong_factor"]},
        "kinds": {"type": "array", "items": {"enum": ["low_communality", "cross_loading", "wrong_factor"]}},
        "metric": {"type": "string"},
        "severity": {"type": "number"},
        "retain_for_now": {"type": "boolean"},
        "note": {"type": "string"},
        "h2": {"type": "number"},
        "expected_factor": {"type": ["integer", "null"]},
        "primary_factor": {"$ref": "#/$defs/count"},
        "correct_loading": {"type": "number"},
        "max_incorrect_loading": {"type": "number"},
        "max_incorrect_factor": {"type": ["integer", "null"]}
      }
    },

    "efa_result": {
      "type": "object",
      "required": ["solution", "factor_labels", "problems", "table"],
      "properties": {
        "solution": {"$ref": "#/$defs/factor_solution"},
        "factor_labels": {"$ref": "#/$defs/strings"},
        "problems": {"type": "array", "items": {"$ref": "#/$defs/problem"}},
        "table": {"type": "string"},
        "adequacy": {"$ref": "#/$defs/adequacy_report"}
      }
    },

    "scale_audit": {
      "type": "object",
      "required": ["min_intra", "max_inter", "pass", "offending_pairs"],
      "properties": {
        "min_intra": {"type": "number"},
        "max_inter": {"type": "number"},
        "pass": {"type": "boolean"},
        "offending_pairs": {"type": "array", "items": {
          "type": "object", "required": ["a", "b", "abs_r", "intra"],
          "properties": {"a": {"type": "string"}, "b": {"type": "string"},
                         "abs_r": {"type": "number"}, "intra": {"type": "boolean"}}}}
      }
    },

    "session_config": {
      "type": "object",
      "required": ["missing", "suppress_threshold", "override_adequacy", "extraction", "rotation", "thresholds",
                   "min_variance_explained", "min_metrics_per_factor"],
      "properties": {
        "missing": {"enum": ["listwise", "pairwise"]},
        "suppress_threshold": {"type": "number"},
        "override_adequacy": {"type": "boolean"},
        "extraction": {"type": "object"},
        "rotation": {"type": "object"},
        "thresholds": {"type": "object"},
        "min_variance_explained": {"type": "number"},
        "min_metrics_per_factor": {"$ref": "#/$defs/count"}
      }
    },

    "action": {
      "type": "object",
      "required": ["type"],
      "properties": {
        "type": {"enum": ["drop", "set_k", "set_threshold", "undo", "auto_refine"]},
        "metric": {"type": "string"},
        "k": {"$ref": "#/$defs/count"},
        "name": {"type": "string"},
        "value": {"type": "number"},
        "max_steps": {"$ref": "#/$defs/count"},
        "rationale": {"type": "string"}
      }
    },

    "stop_report": {
      "type": "object",
      "required": ["clean", "no_problems", "variance_ok", "factor_sizes_ok", "warnings"],
      "properties": {
        "clean": {"type": "boolean"},
        "no_problems": {"type": "boolean"},
        "variance_ok": {"type": "boolean"},
        "factor_sizes_ok": {"type": "boolean"},
        "warnings": {"$ref": "#/$defs/strings"}
      }
    },

    "refinement_step": {
      "type": "object",
      "required": ["action", "rationale", "automatic", "digest", "problems", "warnings"],
      "properties": {
        "action": {"$ref": "#/$defs/action"},
        "rationale": {"type": "string"},
        "automatic": {"type": "boolean"},
        "digest": {"type": "string", "pattern": "^[0-9a-f]{16}$"},
        "problems": {"type": "array", "items": {"$ref": "#/$defs/problem"}},
        "warnings": {"$ref": "#/$defs/strings"}
      }
    },

    "session_state": {
      "type": "object",
      "required": ["id", "k", "config", "active_metrics", "dropped", "factor_labels", "digest",
                   "solution", "problems", "stop_report", "history"],
      "properties": {
        "id": {"type": "string"},
        "k": {"$ref": "#/$defs/count"},
        "initial_k": {"$ref": "#/$defs/count"},
        "config": {"$ref": "#/$defs/session_config"},
        "metrics": {"$ref": "#/$defs/strings"},
        "active_metrics": {"$ref": "#/$defs/strings"},
        "dropped": {"$ref": "#/$defs/strings"},
        "factor_labels": {"$ref": "#/$defs/strings"},
        "digest": {"type": "string"},
        "initial_digest": {"type": "string"},
        "solution": {"$ref": "#/$defs/factor_solution"},
        "problems": {"type": "array", "items": {"$ref": "#/$defs/problem"}},
        "stop_report": {"$ref": "#/$defs/stop_report"},
        "history": {"type": "array", "items": {"$ref": "#/$defs/refinement_step"}},
        "auto_refine": {"type": "object"}
      }
    },

    "refine_result": {
      "type": "object",
      "required": ["session", "steps_taken", "stop_reason", "export"],
      "properties": {
        "session": {"$ref": "#/$defs/session_state"},
        "steps_taken": {"$ref": "#/$defs/count"},
        "stop_reason": {"type": "string"},
        "export": {"$ref": "#/$defs/confirmatory_spec"}
      }
    },

    "session_document": {
      "type": "object",
      "required": ["schema", "version", "dataset", "expected", "k", "config", "initial_digest", "steps", "digest"],
      "properties": {
        "schema": {"const": "metrology.session"},
        "version": {"const": 1},
        "id": {"type": "string"},
        "dataset": {"type": "object", "required": ["metrics"]},
        "expected": {"type": "object", "additionalProperties": {"type": "string"}},
        "k": {"$ref": "#/$defs/count"},
        "config": {"$ref": "#/$defs/session_config"},
        "initial_digest": {"type": "string"},
        "steps": {"type": "array"},
        "digest": {"type": "string"}
      }
    },

    "confirmatory_spec": {
      "type": "object",
      "required": ["schema", "version", "structure"],
      "properties": {
        "schema": {"const": "metrology.confirmatory_spec"},
        "version": {"const": 1},
        "structure": {"type": "array", "minItems": 1, "items": {
          "type": "object", "required": ["factor", "metrics"],
          "properties": {"factor": {"type": "string"}, "metrics": {"type": "array", "minItems": 1, "items": {"type": "string"}}}}},
        "warnings": {"$ref": "#/$defs/strings"},
        "k": {"$ref": "#/$defs/count"},
        "config": {"$ref": "#/$defs/session_config"},
        "dropped": {"$ref": "#/$defs/strings"},
        "content_validity_checklist": {"$ref": "#/$defs/strings"}
      }
    },

    "measurement_model": {
      "type": "object",
      "required": ["schema", "version", "structure", "metrics", "factors", "loadings", "standardized_loadings",
                   "factor_correlations", "uniquenesses", "standardization", "score_coefficients", "score_method",
                   "discrepancy", "converged", "heywood_flags"],
      "properties": {
        "schema": {"const": "metrology.measurement_model"},
        "version": {"const": 1},
        "structure": {"type": "array"},
        "metrics": {"$ref": "#/$defs/strings"},
        "factors": {"$ref": "#/$defs/strings"},
        "loadings": {"$ref": "#/$defs/matrix"},
        "standardized_loadings": {"$ref": "#/$defs/matrix"},
        "factor_correlations": {"$ref": "#/$defs/matrix"},
        "uniquenesses": {"$ref": "#/$defs/numbers"},
        "standardized_uniquenesses": {"$ref": "#/$defs/numbers"},
        "standardization": {"type": "object", "required": ["means", "sds"]},
        "score_coefficients": {"$ref": "#/$defs/matrix"},
        "score_method": {"const": "regression"},
        "discrepancy": {"type": "number", "minimum": 0},
        "converged": {"type": "boolean"},
        "iterations": {"$ref": "#/$defs/count"},
        "gradient_norm": {"$ref": "#/$defs/number_or_null"},
        "heywood_flags": {"type": "array", "items": {"type": "boolean"}},
        "n": {"$ref": "#/$defs/count"},
        "warnings": {"$ref": "#/$defs/strings"}
      }
    },

    "cfa_result": {
      "type": "object",
      "required": ["model"],
      "properties": {
        "model": {"$ref": "#/$defs/measurement_model"},
        "scores": {"$ref": "#/$defs/matrix"}
      }
    },

    "simulation": {
      "type": "object",
      "required": ["model", "summary", "histogram"],
      "properties": {
        "model": {"type": "object", "required": ["true_score", "random_sd", "systematic_offset", "seed"]},
        "summary": {"type": "object", "required": ["n", "mean", "sd"]},
        "histogram": {"type": "array", "items": {"type": "object", "required": ["lower", "upper", "count"]}},
        "observations": {"$ref": "#/$defs/numbers"},
        "detectability": {"type": "object", "required": ["effect", "per_obs_sd", "misorder_probability", "distribution_overlap"]},
        "required_sample_size": {"$ref": "#/$defs/count"}
      }
    }
  }
}
)JSON";

}  // namespace

const Json& api_schema() {
    static const Json schema = Json::parse(kSchema);
    return schema;
}

}  // namespace metrology
