#include "metrology/service.hpp"

#include "json_util.hpp"
#include "metrology/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <filesystem>

namespace metrology {

namespace {

Error not_found(const std::string& what, const std::string& id) {
    return Error(ErrorKind::not_found, "not_found", "no " + what + " with id '" + id + "'");
}

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::not_found: return 404;
        case ErrorKind::conflict: return 409;
        case ErrorKind::validation:
        case ErrorKind::computation: return 422;
    }
    return 500;
}

Json encode_model(const ErrorModel& m) {
    return {{"true_score", m.true_score}, {"random_sd", m.random_sd}, {"systematic_offset", m.systematic_offset}, {"seed", m.seed}};
}

std::string string_field(const Json& j, const std::string& field) {
    const auto& v = detail::require(j, field);
    if (!v.is_string()) throw validation_error("bad_field", "field '" + field + "' must be a string");
    return v.get<std::string>();
}

std::size_t count_field(const Json& j, const std::string& field) {
    const auto& v = detail::require(j, field);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw validation_error("bad_field", "field '" + field + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::vector<std::string> strings_field(const Json& j, const std::string& field) {
    const auto& v = detail::require(j, field);
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); })) {
        throw validation_error("bad_field", "field '" + field + "' must be an array of strings");
    }
    return v.get<std::vector<std::string>>();
}

ExpectedMap expected_field(const Json& j, const MetricDataset& ds) {
    if (!j.contains("expected") || j.at("expected").is_null()) return expected_from_headers(ds);
    const auto& v = j.at("expected");
    if (!v.is_object()) throw validation_error("bad_field", "field 'expected' must map metric names to constructs");
    ExpectedMap out;
    for (const auto& [metric, construct] : v.items()) {
        if (!construct.is_string()) throw validation_error("bad_field", "field 'expected' must map metric names to constructs");
        out[metric] = construct.get<std::string>();
    }
    return out;
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        if (path[i] == '/') {
            ++i;
            continue;
        }
        const auto end = path.find('/', i);
        const auto stop = end == std::string_view::npos ? path.size() : end;
        out.emplace_back(path.substr(i, stop - i));
        i = stop;
    }
    return out;
}

std::map<std::string, std::string> split_query(std::string_view query) {
    std::map<std::string, std::string> out;
    std::size_t i = 0;
    while (i < query.size()) {
        auto end = query.find('&', i);
        if (end == std::string_view::npos) end = query.size();
        const auto pair = query.substr(i, end - i);
        const auto eq = pair.find('=');
        if (!pair.empty()) {
            out[std::string(pair.substr(0, eq))] = eq == std::string_view::npos ? "" : std::string(pair.substr(eq + 1));
        }
        i = end + 1;
    }
    return out;
}

Json parse_body(std::string_view body) {
    if (body.empty()) return Json::object();
    try {
        return Json::parse(body);
    } catch (const Json::parse_error& e) {
        throw validation_error("bad_json", std::string("request body is not valid JSON: ") + e.what());
    }
}

}  // namespace

Json efa_result(const MetricDataset& ds, std::size_t k, const ExpectedMap& expected, const SessionConfig& config) {
    const auto cm = correlation_matrix(ds, config.efa.missing);
    const auto adequacy_report = adequacy(cm, cm.n_used);
    const auto solution = run_efa(ds, k, config.efa);
    const auto labels = label_factors(solution, expected);
    std::vector<std::string> names;
    for (std::size_t f = 0; f < labels.size(); ++f) names.push_back(labels[f].empty() ? "F" + std::to_string(f + 1) : labels[f]);
    return {{"solution", encode(solution)},
            {"factor_labels", labels},
            {"problems", encode(diagnose(solution, expected, config.thresholds))},
            {"table", render_loadings_table(solution, names)},
            {"adequacy", encode(adequacy_report)}};
}

SimulationRequest decode_simulation(const Json& j) {
    SimulationRequest r;
    r.model = decode_error_model(detail::require(j, "model"));
    if (j.contains("n")) r.n = count_field(j, "n");
    if (j.contains("bins")) r.bins = count_field(j, "bins");
    if (j.contains("effect") && !j.at("effect").is_null()) r.effect = detail::as_double(j.at("effect"), "effect");
    if (j.contains("alpha")) r.alpha = detail::as_double(j.at("alpha"), "alpha");
    if (j.contains("power")) r.power = detail::as_double(j.at("power"), "power");
    if (j.contains("include_observations")) {
        if (!j.at("include_observations").is_boolean()) throw validation_error("bad_field", "field 'include_observations' must be a boolean");
        r.include_observations = j.at("include_observations").get<bool>();
    }
    return r;
}

Json simulation_result(const SimulationRequest& request, const std::vector<double>& observations) {
    Json out = {{"model", encode_model(request.model)},
                {"summary", encode(summarize(observations))},
                {"histogram", encode(histogram(observations, request.bins))}};
    if (request.include_observations) {
        Json obs = Json::array();
        for (double x : observations) obs.push_back(detail::number(x));
        out["observations"] = std::move(obs);
    }
    if (request.effect) {
        out["detectability"] = encode(detectability(*request.effect, request.model.random_sd));
        if (*request.effect != 0.0) {
            out["required_sample_size"] = required_sample_size(*request.effect, request.model.random_sd, request.alpha, request.power);
        }
    }
    return out;
}

Json simulation_result(const SimulationRequest& request) {
    return simulation_result(request, simulate_observations(request.model, request.n));
}

Json cfa_result(const MetricDataset& ds, const ConfirmatorySpec& spec, const CfaOptions& options, bool with_scores) {
    const auto model = fit(ds, spec, options);
    Json out = {{"model", encode(model)}};
    if (with_scores) out["scores"] = detail::to_json(factor_scores(model, ds));
    return out;
}

Json refine_result(const RefinementSession& session, const AutoRefineResult& outcome) {
    return {{"session", session_state(session)},
            {"steps_taken", outcome.steps},
            {"stop_reason", outcome.stop_reason},
            {"export", encode(session.export_model())}};
}

ReliabilityReport reliability_from_request(const Json& j, const MetricDataset* dataset) {
    if (!j.is_object()) throw validation_error("bad_field", "reliability request must be an object");
    const std::string coefficient = j.contains("coefficient") ? string_field(j, "coefficient") : std::string{};
    const auto names = j.contains("names") ? strings_field(j, "names") : std::vector<std::string>{};

    if (j.contains("items")) {
        if (!coefficient.empty() && coefficient != "alpha") {
            throw validation_error("bad_field", "item payloads support coefficient 'alpha' only");
        }
        return cronbach_alpha(detail::matrix_from(j.at("items"), "items"), names);
    }
    if (j.contains("dataset")) {
        if (!dataset) throw not_found("dataset", j.at("dataset").dump());
        if (!coefficient.empty() && coefficient != "alpha") {
            throw validation_error("bad_field", "dataset payloads support coefficient 'alpha' only");
        }
        const auto metrics = j.contains("metrics") ? strings_field(j, "metrics") : dataset->metric_names();
        return cronbach_alpha(*dataset, metrics);
    }
    if (j.contains("ratings")) {
        RatingTable table;
        table.ratings = detail::matrix_from(j.at("ratings"), "ratings");
        if (j.contains("level")) table.level = measurement_level_from_string(string_field(j, "level"));
        if (coefficient.empty() || coefficient == "krippendorff_alpha") return krippendorff_alpha(table);
        if (coefficient == "percent_agreement") return percent_agreement(table);
        throw validation_error("bad_field", "rating payloads support krippendorff_alpha or percent_agreement");
    }
    if (j.contains("loadings")) {
        const Eigen::VectorXd l = detail::vector_from(j.at("loadings"), "loadings");
        const Eigen::VectorXd u = detail::vector_from(detail::require(j, "uniquenesses"), "uniquenesses");
        const std::span<const double> ls(l.data(), static_cast<std::size_t>(l.size()));
        const std::span<const double> us(u.data(), static_cast<std::size_t>(u.size()));
        if (coefficient.empty() || coefficient == "composite_reliability") return composite_reliability(ls, us, names);
        if (coefficient == "omega_total") return omega_total(ls, us, names);
        throw validation_error("bad_field", "loading payloads support composite_reliability or omega_total");
    }
    throw validation_error("missing_field", "reliability request needs one of 'items', 'dataset', 'ratings' or 'loadings'");
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {}

std::shared_ptr<const MetricDataset> Service::dataset(const std::string& id) const {
    std::shared_lock lock(registry_);
    const auto it = datasets_.find(id);
    if (it == datasets_.end()) throw not_found("dataset", id);
    return it->second;
}

std::shared_ptr<Service::SessionSlot> Service::slot(const std::string& id) const {
    std::shared_lock lock(registry_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("session", id);
    return it->second;
}

std::string Service::add_dataset(std::shared_ptr<const MetricDataset> ds) {
    std::unique_lock lock(registry_);
    std::string id = "d" + std::to_string(next_dataset_++);
    datasets_.emplace(id, std::move(ds));
    return id;
}

Json Service::post_dataset(std::string_view body) {
    const auto first = body.find_first_not_of(" \t\r\n");
    std::shared_ptr<const MetricDataset> ds;
    if (first != std::string_view::npos && body[first] == '{') {
        // {"csv": text} or {"path": file relative to the working directory}
        const Json j = parse_body(body);
        if (j.contains("csv")) {
            ds = std::make_shared<const MetricDataset>(parse_dataset(string_field(j, "csv")));
        } else {
            const std::filesystem::path rel = string_field(j, "path");
            if (rel.is_absolute() || std::any_of(rel.begin(), rel.end(), [](const auto& part) { return part == ".."; })) {
                throw validation_error("bad_path", "path must stay inside the working directory");
            }
            ds = std::make_shared<const MetricDataset>(load_dataset_file((std::filesystem::path(config_.workdir) / rel).string()));
        }
    } else {
        ds = std::make_shared<const MetricDataset>(parse_dataset(body));
    }
    Json out = encode(*ds);
    out["id"] = add_dataset(std::move(ds));
    return out;
}

Json Service::get_correlations(const std::string& id, const std::map<std::string, std::string>& query) {
    const auto ds = dataset(id);
    const auto it = query.find("missing");
    const auto policy = it == query.end() ? MissingPolicy::listwise : missing_policy_from_string(it->second);
    return encode(correlation_matrix(*ds, policy));
}

Json Service::post_reliability(const Json& body) {
    std::shared_ptr<const MetricDataset> ds;
    if (body.is_object() && body.contains("dataset")) ds = dataset(string_field(body, "dataset"));
    return encode(reliability_from_request(body, ds.get()));
}

Json Service::post_adequacy(const Json& body) {
    auto ds = dataset(string_field(body, "dataset"));
    const MetricDataset active = body.contains("metrics") ? ds->select(strings_field(body, "metrics")) : *ds;
    const auto policy = body.contains("missing") ? missing_policy_from_string(string_field(body, "missing")) : MissingPolicy::listwise;
    const auto cm = correlation_matrix(active, policy);
    return encode(adequacy(cm, cm.n_used));
}

Json Service::post_advice(const Json& body) {
    const auto ds = dataset(string_field(body, "dataset"));
    ParallelConfig config;
    if (body.contains("reps")) config.reps = count_field(body, "reps");
    if (body.contains("seed")) config.seed = count_field(body, "seed");
    if (body.contains("quantile")) config.quantile = detail::as_double(body.at("quantile"), "quantile");
    std::optional<std::size_t> theory;
    if (body.contains("theory")) theory = count_field(body, "theory");
    return encode(advise_factor_count(*ds, config, theory));
}

Json Service::post_efa(const Json& body) {
    const auto ds = dataset(string_field(body, "dataset"));
    const auto config = decode_session_config(body.value("config", Json()));
    return efa_result(*ds, count_field(body, "k"), expected_field(body, *ds), config);
}

Json Service::post_session(const Json& body) {
    const auto ds = dataset(string_field(body, "dataset"));
    std::string id;
    {
        std::unique_lock lock(registry_);
        id = "s" + std::to_string(next_session_++);
    }
    auto created = std::make_shared<SessionSlot>();
    if (body.contains("document")) {
        Json doc = body.at("document");
        doc["id"] = id;
        created->session = std::make_unique<RefinementSession>(load_session(doc, ds));
    } else {
        created->session = std::make_unique<RefinementSession>(RefinementSession::create(
            ds, expected_field(body, *ds), count_field(body, "k"), decode_session_config(body.value("config", Json())), id));
    }
    Json out = session_state(*created->session);
    std::unique_lock lock(registry_);
    sessions_.emplace(id, std::move(created));
    return out;
}

Json Service::get_session(const std::string& id, bool document) {
    const auto s = slot(id);
    std::lock_guard lock(s->writer);
    return document ? save_session(*s->session) : session_state(*s->session);
}

Json Service::post_action(const std::string& id, const Json& body) {
    const auto s = slot(id);
    std::unique_lock lock(s->writer, std::try_to_lock);
    if (!lock.owns_lock()) throw Error(ErrorKind::conflict, "session_busy", "session '" + id + "' is being modified by another request");
    auto& session = *s->session;
    const std::string type = string_field(body, "type");
    if (type == "undo") {
        session.undo();
        return session_state(session);
    }
    if (type == "auto_refine") {
        const std::size_t max_steps = body.contains("max_steps") ? count_field(body, "max_steps") : session.dataset().n_metrics();
        const auto outcome = session.auto_refine(max_steps);
        Json out = session_state(session);
        out["auto_refine"] = {{"steps_taken", outcome.steps}, {"stop_reason", outcome.stop_reason}};
        return out;
    }
    session.apply(decode_action(body), body.value("rationale", std::string{}));
    return session_state(session);
}

Json Service::post_export(const std::string& id) {
    const auto s = slot(id);
    std::lock_guard lock(s->writer);
    return encode(s->session->export_model());
}

Json Service::post_cfa(const Json& body) {
    const auto ds = dataset(string_field(body, "dataset"));
    const auto spec = decode_spec(detail::require(body, "spec"));
    const auto options = decode_cfa_options(body.value("options", Json()));
    bool scores = false;
    if (body.contains("scores")) {
        if (!body.at("scores").is_boolean()) throw validation_error("bad_field", "field 'scores' must be a boolean");
        scores = body.at("scores").get<bool>();
    }
    return cfa_result(*ds, spec, options, scores);
}

Response Service::handle(std::string_view method, std::string_view target, std::string_view body) {
    try {
        if (body.size() > config_.max_upload_bytes) {
            return {413, error_envelope("payload_too_large", "request body exceeds " + std::to_string(config_.max_upload_bytes) + " bytes")};
        }
        const auto q = target.find('?');
        const auto path = split_path(target.substr(0, q));
        const auto query = q == std::string_view::npos ? std::map<std::string, std::string>{} : split_query(target.substr(q + 1));
        const bool get = method == "GET";
        const bool post = method == "POST";
        const auto n = path.size();
        auto route = [&](std::initializer_list<std::string_view> shape) {
            if (shape.size() != n) return false;
            std::size_t i = 0;
            for (auto part : shape) {
                if (part != "*" && part != path[i]) return false;
                ++i;
            }
            return true;
        };

        std::optional<Json> result;
        bool known_path = true;
        if (route({"schema"})) {
            if (get) result = api_schema();
        } else if (route({"datasets"})) {
            if (post) result = post_dataset(body);
        } else if (route({"datasets", "*"})) {
            if (get) {
                Json out = encode(*dataset(path[1]));
                out["id"] = path[1];
                result = out;
            }
        } else if (route({"datasets", "*", "correlations"})) {
            if (get) result = get_correlations(path[1], query);
        } else if (route({"reliability"})) {
            if (post) result = post_reliability(parse_body(body));
        } else if (route({"adequacy"})) {
            if (post) result = post_adequacy(parse_body(body));
        } else if (route({"advice"})) {
            if (post) result = post_advice(parse_body(body));
        } else if (route({"efa"})) {
            if (post) result = post_efa(parse_body(body));
        } else if (route({"sessions"})) {
            if (post) result = post_session(parse_body(body));
        } else if (route({"sessions", "*"})) {
            if (get) result = get_session(path[1], false);
        } else if (route({"sessions", "*", "document"})) {
            if (get) result = get_session(path[1], true);
        } else if (route({"sessions", "*", "actions"})) {
            if (post) result = post_action(path[1], parse_body(body));
        } else if (route({"sessions", "*", "export"})) {
            if (post) result = post_export(path[1]);
        } else if (route({"cfa", "fit"})) {
            if (post) result = post_cfa(parse_body(body));
        } else if (route({"simulate"})) {
            if (post) result = simulation_result(decode_simulation(parse_body(body)));
        } else {
            known_path = false;
        }
        if (!known_path) return {404, error_envelope("not_found", "no route for " + std::string(target))};
        if (!result) return {405, error_envelope("method_not_allowed", std::string(method) + " is not supported on " + std::string(target))};
        return {200, ok_envelope(std::move(*result))};
    } catch (const Error& e) {
        return {status_for(e.kind()), error_envelope(e.code(), e.what())};
    } catch (const Json::exception& e) {
        return {422, error_envelope("bad_field", e.what())};
    } catch (const std::exception& e) {
        return {500, error_envelope("internal_error", e.what())};
    }
}

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>()) {
    // Oversized bodies get an envelope from handle() rather than a bare 413.
    impl_->server.set_payload_max_length(service.config().max_upload_bytes + 1024 * 1024);
    auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
        // The raw target: form-encoded bodies are also parsed into req.params.
        const auto out = service.handle(req.method, req.target, req.body);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    impl_->server.Get(".*", forward);
    impl_->server.Post(".*", forward);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw validation_error("bind_failed", "cannot listen on " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void serve(Service& service, const std::string& host, int port) {
    HttpServer server(service);
    server.bind(host, port);
    server.listen();
}

}  // namespace metrology
