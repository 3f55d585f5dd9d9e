#pragma once

// JSON-over-HTTP front end. Service::handle is transport-free so it can be
// driven directly in tests; serve() binds it to an httplib server.

#include "metrology/json.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

namespace metrology {

// Result payloads shared by the service and the CLI's --json output.

Json efa_result(const MetricDataset& ds, std::size_t k, const ExpectedMap& expected, const SessionConfig& config = {});

struct SimulationRequest {
    ErrorModel model;
    std::size_t n = 1000;
    std::size_t bins = 30;
    // Difference between two conditions; enables detectability and sample size.
    std::optional<double> effect;
    double alpha = 0.05;
    double power = 0.8;
    bool include_observations = false;
};

SimulationRequest decode_simulation(const Json& j);
Json simulation_result(const SimulationRequest& request, const std::vector<double>& observations);
Json simulation_result(const SimulationRequest& request);

Json cfa_result(const MetricDataset& ds, const ConfirmatorySpec& spec, const CfaOptions& options, bool with_scores);

// session_state plus the auto_refine outcome and the exported structure.
Json refine_result(const RefinementSession& session, const AutoRefineResult& outcome);

// Payload forms: {"items": rows, "names"?}, {"dataset", "metrics"?},
// {"ratings": rows with nulls, "level"?, "coefficient"?},
// {"loadings", "uniquenesses", "coefficient"?}.
ReliabilityReport reliability_from_request(const Json& j, const MetricDataset* dataset);

struct ServiceConfig {
    std::string workdir = ".";
    std::size_t max_upload_bytes = 50u * 1024u * 1024u;
};

struct Response {
    int status = 200;
    Json body;
};

class Service {
public:
    explicit Service(ServiceConfig config = {});

    // `target` may carry a query string. Never throws.
    Response handle(std::string_view method, std::string_view target, std::string_view body);

    const ServiceConfig& config() const { return config_; }

private:
    struct SessionSlot {
        std::mutex writer;
        std::unique_ptr<RefinementSession> session;
    };

    std::shared_ptr<const MetricDataset> dataset(const std::string& id) const;
    std::shared_ptr<SessionSlot> slot(const std::string& id) const;
    std::string add_dataset(std::shared_ptr<const MetricDataset> ds);

    Json post_dataset(std::string_view body);
    Json get_correlations(const std::string& id, const std::map<std::string, std::string>& query);
    Json post_reliability(const Json& body);
    Json post_adequacy(const Json& body);
    Json post_advice(const Json& body);
    Json post_efa(const Json& body);
    Json post_session(const Json& body);
    Json get_session(const std::string& id, bool document);
    Json post_action(const std::string& id, const Json& body);
    Json post_export(const std::string& id);
    Json post_cfa(const Json& body);

    ServiceConfig config_;
    mutable std::shared_mutex registry_;
    std::map<std::string, std::shared_ptr<const MetricDataset>> datasets_;
    std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
    std::uint64_t next_dataset_ = 1;
    std::uint64_t next_session_ = 1;
};

// httplib front end for a Service.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();

    // Returns the bound port; port 0 picks a free one.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Blocks. Loopback only unless `host` says otherwise.
void serve(Service& service, const std::string& host, int port);

}  // namespace metrology
