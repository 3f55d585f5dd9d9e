#pragma once

// JSON encodings shared by the service, the CLI and session save/load.

#include "metrology/cfa.hpp"
#include "metrology/dataset.hpp"
#include "metrology/efa.hpp"
#include "metrology/reliability.hpp"
#include "metrology/session.hpp"
#include "metrology/truescore.hpp"

#include <json.hpp>

#include <memory>

namespace metrology {

using Json = nlohmann::json;

Json encode(const MetricDataset& ds);  // summary, not the values
Json encode(const CorrelationMatrix& cm);
Json encode(const ReliabilityReport& report);
Json encode(const AdequacyReport& report);
Json encode(const FactorCountAdvice& advice);
Json encode(const FactorSolution& solution);
Json encode(const Problem& problem);
Json encode(const std::vector<Problem>& problems);
Json encode(const ScaleAudit& audit);
Json encode(const DetectabilityReport& report);
Json encode(const SampleSummary& summary);
Json encode(const std::vector<HistogramBin>& bins);
Json encode(const SessionConfig& config);
Json encode(const Action& action);
Json encode(const StopReport& report);
Json encode(const RefinementStep& step);
Json encode(const ExportedModel& model);
Json encode(const ConfirmatorySpec& spec);
Json encode(const MeasurementModel& model);

// Unset fields keep the values of `base`.
SessionConfig decode_session_config(const Json& j, SessionConfig base = {});
Action decode_action(const Json& j);
// Accepts {"structure": [{factor, metrics}...]}, an exported model document,
// or a plain {factor: [metrics]} object (factors then sorted by name).
ConfirmatorySpec decode_spec(const Json& j);
CfaOptions decode_cfa_options(const Json& j);
ErrorModel decode_error_model(const Json& j);

// Current solution, ranked problems, stop report and history.
Json session_state(const RefinementSession& session);

// Replayable document: initial inputs plus the action log with digests.
Json save_session(const RefinementSession& session);
// Replays the log against `ds`; throws digest_mismatch when a step differs.
RefinementSession load_session(const Json& doc, std::shared_ptr<const MetricDataset> ds);

// {"ok": true, "result": ...} or {"ok": false, "error": {code, message}}.
Json ok_envelope(Json result);
Json error_envelope(const std::string& code, const std::string& message);

// JSON Schema (2020-12) for every payload and the envelope.
const Json& api_schema();

}  // namespace metrology
