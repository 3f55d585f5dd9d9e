#include "metrology/cli.hpp"

#include "metrology/error.hpp"
#include "metrology/service.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace metrology {

namespace {

namespace fs = std::filesystem;

fs::path resolve(const std::string& path) {
    const fs::path p(path);
    if (p.is_absolute()) return p;
    if (const char* dir = std::getenv("METROLOGY_WORKDIR"); dir && *dir) return fs::path(dir) / p;
    return p;
}

std::string read_text(const std::string& path) {
    std::ifstream in(resolve(path), std::ios::binary);
    if (!in) throw validation_error("cannot_open", "cannot open '" + resolve(path).string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Json read_json(const std::string& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw validation_error("bad_json", "'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(resolve(path), std::ios::binary);
    if (!out) throw validation_error("cannot_write", "cannot write '" + resolve(path).string() + "'");
    out << text;
}

std::shared_ptr<const MetricDataset> load(const std::string& path) {
    return std::make_shared<const MetricDataset>(load_dataset_file(resolve(path).string()));
}

ExpectedMap load_expected(const std::string& path, const MetricDataset& ds) {
    if (path.empty()) return expected_from_headers(ds);
    const Json j = read_json(path);
    if (!j.is_object()) throw validation_error("bad_expected", "expected map must be a JSON object of metric -> construct");
    ExpectedMap out;
    for (const auto& [metric, construct] : j.items()) {
        if (!construct.is_string()) throw validation_error("bad_expected", "construct of '" + metric + "' must be a string");
        out[metric] = construct.get<std::string>();
    }
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string fixed(double v, int decimals) {
    if (!std::isfinite(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) { return s.size() >= width ? s : s + std::string(width - s.size(), ' '); }

std::string lpad(const std::string& s, std::size_t width) { return s.size() >= width ? s : std::string(width - s.size(), ' ') + s; }

// Units x raters, header row, first column is the unit id, empty cells missing.
RatingTable read_ratings(const std::string& path, char delimiter) {
    std::stringstream in(read_text(path));
    std::string line;
    std::vector<std::vector<double>> rows;
    std::size_t raters = 0;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, delimiter)) cells.push_back(cell);
        if (line.back() == delimiter) cells.emplace_back();
        if (header) {
            if (cells.size() < 2) throw validation_error("bad_ratings", "ratings need a unit column and at least one rater");
            raters = cells.size() - 1;
            header = false;
            continue;
        }
        if (cells.size() != raters + 1) throw validation_error("ragged_row", "ratings row for '" + cells.front() + "' has the wrong width");
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (cells[c].empty()) {
                row.push_back(std::nan(""));
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(cells[c].c_str(), &end);
            if (end == cells[c].c_str() || *end != '\0') throw validation_error("bad_cell", "rating '" + cells[c] + "' is not a number");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    RatingTable table;
    table.ratings.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(raters));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < raters; ++c) table.ratings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
    return table;
}

void print_reliability(std::ostream& out, const ReliabilityReport& r) {
    out << "coefficient  " << to_string(r.coefficient) << "\n";
    out << "value        " << fixed(r.value, 3) << "  (" << r.band << ")\n";
    out << "n            " << r.n << "\n";
    if (r.coefficient != Coefficient::alpha) return;
    out << "standardized " << fixed(r.standardized_alpha, 3) << "\n";
    out << "mean r       " << fixed(r.mean_inter_item_r, 3) << "\n\n";
    std::size_t width = 4;
    for (const auto& d : r.drop_one) width = std::max(width, d.item.size());
    out << pad("item", width) << "  alpha if dropped\n";
    for (const auto& d : r.drop_one) out << pad(d.item, width) << "  " << fixed(d.alpha, 3) << "\n";
}

void print_adequacy(std::ostream& out, const AdequacyReport& a) {
    out << "KMO          " << fixed(a.kmo_overall, 3) << "\n";
    out << "Bartlett     chi2 " << fixed(a.bartlett_chi2, 2) << ", df " << a.bartlett_df << ", p " << fixed(a.bartlett_p, 4) << "\n";
    out << "n            " << a.n << " (" << fixed(a.obs_per_variable, 1) << " per metric)\n";
    out << "verdict      " << (a.acceptable() ? "adequate" : "inadequate") << "\n";
    std::size_t width = 6;
    for (const auto& l : a.labels) width = std::max(width, l.size());
    out << "\n" << pad("metric", width) << "  KMO\n";
    for (std::size_t i = 0; i < a.labels.size(); ++i) out << pad(a.labels[i], width) << "  " << fixed(a.kmo_per_variable[i], 3) << "\n";
    for (const auto& p : a.multicollinear_pairs) out << "near-duplicate: " << p.a << " ~ " << p.b << " (r " << fixed(p.r, 3) << ")\n";
    for (const auto& w : a.warnings) out << "warning: " << w << "\n";
}

void print_advice(std::ostream& out, const FactorCountAdvice& a) {
    out << "parallel analysis suggests " << a.parallel_suggested << " factors; Kaiser suggests " << a.kaiser_suggested;
    if (!a.scree_elbow_candidates.empty()) {
        out << "; scree bends after";
        for (auto c : a.scree_elbow_candidates) out << " " << c;
    }
    out << "\n";
}

void print_problems(std::ostream& out, const Json& problems) {
    if (problems.empty()) {
        out << "no problems\n";
        return;
    }
    for (const auto& p : problems) {
        std::string kinds;
        for (const auto& k : p.at("kinds")) kinds += (kinds.empty() ? "" : "+") + k.get<std::string>();
        out << (p.at("retain_for_now").get<bool>() ? "  keep  " : "  fix   ") << pad(p.at("metric").get<std::string>(), 28) << " "
            << pad(kinds, 30) << " h2 " << fixed(p.at("h2").is_number() ? p.at("h2").get<double>() : NAN, 2) << "  "
            << p.at("note").get<std::string>() << "\n";
    }
}

std::vector<std::string> factor_names(const std::vector<std::string>& labels) {
    std::vector<std::string> names;
    for (std::size_t f = 0; f < labels.size(); ++f) names.push_back(labels[f].empty() ? "F" + std::to_string(f + 1) : labels[f]);
    return names;
}

void print_model(std::ostream& out, const MeasurementModel& m) {
    std::size_t width = 6;
    for (const auto& name : m.metrics) width = std::max(width, name.size());
    out << pad("metric", width);
    for (const auto& f : m.factors) out << "  " << lpad(f.substr(0, 10), 10);
    out << "  " << lpad("uniq", 6) << "\n";
    for (std::size_t j = 0; j < m.p(); ++j) {
        out << pad(m.metrics[j], width);
        for (std::size_t f = 0; f < m.k(); ++f) {
            const double v = m.standardized_loadings(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f));
            out << "  " << lpad(v == 0.0 ? "" : fixed(v, 2), 10);
        }
        out << "  " << lpad(fixed(m.standardized_uniquenesses(static_cast<Eigen::Index>(j)), 2), 6);
        if (m.heywood_flags[j]) out << "  Heywood";
        out << "\n";
    }
    out << "\nfactor correlations\n";
    for (std::size_t a = 0; a < m.k(); ++a) {
        out << pad(m.factors[a].substr(0, 10), 10);
        for (std::size_t b = 0; b <= a; ++b) out << "  " << lpad(fixed(m.factor_correlations(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), 2), 6);
        out << "\n";
    }
    out << "\ndiscrepancy " << fixed(m.discrepancy, 6) << ", " << (m.converged ? "converged" : "not converged") << " after " << m.iterations
        << " iterations\n";
    for (const auto& w : m.warnings) out << "warning: " << w << "\n";
}

int fail(std::ostream& out, std::ostream& err, bool json, const std::string& code, const std::string& message, int status) {
    if (json) out << error_envelope(code, message).dump(2) << "\n";
    err << "error: " << message << "\n";
    return status;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Software metric measurement-quality toolkit", "metrology"};
    app.require_subcommand(1);
    app.fallthrough();
    bool json = false;
    app.add_flag("--json", json, "Machine-readable output (ApiEnvelope JSON)");

    // reliability
    auto* rel = app.add_subcommand("reliability", "Cronbach's alpha, rater agreement or composite reliability");
    std::string rel_data, rel_items, rel_ratings, rel_level = "nominal", rel_coef;
    rel->add_option("data", rel_data, "Metric CSV (items as columns)");
    rel->add_option("--items", rel_items, "Comma-separated item columns (default: all)");
    rel->add_option("--ratings", rel_ratings, "Units x raters CSV for agreement coefficients");
    rel->add_option("--level", rel_level, "Rating level: nominal, ordinal, interval, ratio");
    rel->add_option("--coefficient", rel_coef, "alpha, krippendorff_alpha or percent_agreement");

    // adequacy
    auto* adq = app.add_subcommand("adequacy", "KMO and Bartlett's test");
    std::string adq_data, adq_metrics, adq_missing = "listwise";
    adq->add_option("data", adq_data, "Metric CSV")->required();
    adq->add_option("--metrics", adq_metrics, "Comma-separated subset of columns");
    adq->add_option("--missing", adq_missing, "listwise or pairwise");

    // efa
    auto* efa = app.add_subcommand("efa", "Exploratory factor analysis with oblimin rotation");
    std::string efa_data, efa_expected, efa_missing = "listwise";
    std::size_t efa_k = 0, efa_reps = 100;
    double efa_suppress = 0.3, efa_gamma = 0.0;
    bool efa_override = false;
    efa->add_option("data", efa_data, "Metric CSV")->required();
    efa->add_option("--k", efa_k, "Number of factors (default: parallel analysis)");
    efa->add_option("--expected", efa_expected, "JSON map metric -> construct (default: header constructs)");
    efa->add_option("--suppress", efa_suppress, "Blank loadings below this magnitude");
    efa->add_option("--gamma", efa_gamma, "Oblimin gamma");
    efa->add_option("--missing", efa_missing, "listwise or pairwise");
    efa->add_option("--reps", efa_reps, "Parallel-analysis replicates when --k is omitted");
    efa->add_flag("--override-adequacy", efa_override, "Run even when KMO or Bartlett fail");

    // refine
    auto* ref = app.add_subcommand("refine", "Guided refinement session");
    std::string ref_data, ref_expected, ref_load, ref_save, ref_export;
    std::size_t ref_k = 0, ref_max = 0;
    bool ref_auto = false, ref_override = false;
    std::vector<std::string> ref_drops;
    ref->add_option("data", ref_data, "Metric CSV")->required();
    ref->add_option("--k", ref_k, "Number of factors");
    ref->add_option("--expected", ref_expected, "JSON map metric -> construct (default: header constructs)");
    ref->add_option("--drop", ref_drops, "Drop a metric (repeatable, applied in order)");
    ref->add_flag("--auto", ref_auto, "Drop the worst actionable metric until clean");
    ref->add_option("--max-steps", ref_max, "Bound on automatic drops (default: number of metrics)");
    ref->add_option("--load", ref_load, "Replay a saved session document");
    ref->add_option("--save", ref_save, "Write the session document");
    ref->add_option("--export", ref_export, "Write the confirmatory spec");
    ref->add_flag("--override-adequacy", ref_override, "Run even when KMO or Bartlett fail");

    // cfa
    auto* cfa = app.add_subcommand("cfa", "Confirmatory factor analysis");
    std::string cfa_data, cfa_spec, cfa_scores, cfa_model;
    std::size_t cfa_starts = 0;
    std::uint64_t cfa_seed = 1;
    cfa->add_option("data", cfa_data, "Metric CSV")->required();
    cfa->add_option("--spec", cfa_spec, "Factor structure JSON (refine --export output works)")->required();
    cfa->add_option("--starts", cfa_starts, "Extra random starts");
    cfa->add_option("--seed", cfa_seed, "Seed for random starts");
    cfa->add_option("--scores", cfa_scores, "Write regression factor scores to this CSV");
    cfa->add_option("--model", cfa_model, "Write the measurement model JSON");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte-Carlo observations under a true-score error model");
    SimulationRequest sim_req;
    double sim_effect = 0.0;
    std::string sim_out = "simulation";
    sim->add_option("--t", sim_req.model.true_score, "True score")->required();
    sim->add_option("--es", sim_req.model.systematic_offset, "Systematic offset");
    sim->add_option("--sd", sim_req.model.random_sd, "Random error sd");
    sim->add_option("--n", sim_req.n, "Number of observations");
    sim->add_option("--seed", sim_req.model.seed, "Generator seed");
    sim->add_option("--bins", sim_req.bins, "Histogram bins");
    auto* effect_opt = sim->add_option("--effect", sim_effect, "Difference to detect; adds detectability and sample size");
    sim->add_option("--alpha", sim_req.alpha, "Significance for the sample size");
    sim->add_option("--power", sim_req.power, "Target power for the sample size");
    sim->add_option("--out", sim_out, "Output prefix for <prefix>_samples.csv and <prefix>_histogram.csv");

    // audit
    auto* aud = app.add_subcommand("audit", "Intra- versus inter-scale correlation audit");
    std::string aud_data, aud_expected, aud_missing = "listwise";
    aud->add_option("data", aud_data, "Metric CSV")->required();
    aud->add_option("--expected", aud_expected, "JSON map metric -> construct (default: header constructs)");
    aud->add_option("--missing", aud_missing, "listwise or pairwise");

    // serve
    auto* srv = app.add_subcommand("serve", "Start the local HTTP API");
    int srv_port = 8080;
    std::string srv_host = "127.0.0.1";
    std::size_t srv_max_mb = 50;
    srv->add_option("--port", srv_port, "Port (0 picks a free one)");
    srv->add_option("--host", srv_host, "Bind address");
    srv->add_option("--max-upload-mb", srv_max_mb, "Upload cap in megabytes");

    app.add_subcommand("schema", "Print the JSON Schema of every API payload");

    if (args.empty()) {
        err << app.help();
        return 1;
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }
    Json result;
    std::ostringstream txt;
    try {
        if (rel->parsed()) {
            ReliabilityReport r;
            if (!rel_ratings.empty()) {
                auto table = read_ratings(rel_ratings, ',');
                table.level = measurement_level_from_string(rel_level);
                if (rel_coef.empty() || rel_coef == "krippendorff_alpha") r = krippendorff_alpha(table);
                else if (rel_coef == "percent_agreement") r = percent_agreement(table);
                else throw validation_error("bad_coefficient", "ratings support krippendorff_alpha or percent_agreement");
            } else {
                if (rel_data.empty()) throw validation_error("missing_input", "reliability needs a data CSV or --ratings");
                if (!rel_coef.empty() && rel_coef != "alpha") throw validation_error("bad_coefficient", "item data supports alpha only");
                const auto ds = load(rel_data);
                r = cronbach_alpha(*ds, rel_items.empty() ? ds->metric_names() : split_list(rel_items));
            }
            result = encode(r);
            print_reliability(txt, r);
        } else if (adq->parsed()) {
            const auto ds = load(adq_data);
            const MetricDataset active = adq_metrics.empty() ? *ds : ds->select(split_list(adq_metrics));
            const auto cm = correlation_matrix(active, missing_policy_from_string(adq_missing));
            const auto report = adequacy(cm, cm.n_used);
            result = encode(report);
            print_adequacy(txt, report);
        } else if (efa->parsed()) {
            const auto ds = load(efa_data);
            SessionConfig config;
            config.efa.missing = missing_policy_from_string(efa_missing);
            config.efa.suppress_threshold = efa_suppress;
            config.efa.rotation.gamma = efa_gamma;
            config.efa.override_adequacy = efa_override;
            std::optional<FactorCountAdvice> advice;
            std::size_t k = efa_k;
            if (k == 0) {
                ParallelConfig pc;
                pc.reps = efa_reps;
                advice = advise_factor_count(*ds, pc);
                k = advice->parallel_suggested;
                if (k == 0) throw computation_error("no_factors", "parallel analysis retains no factors; pass --k");
            }
            const auto expected = load_expected(efa_expected, *ds);
            result = efa_result(*ds, k, expected, config);
            if (advice) {
                result["advice"] = encode(*advice);
                print_advice(txt, *advice);
            }
            txt << result.at("table").get<std::string>() << "\n";
            txt << "variance explained " << fixed(result.at("solution").at("variance_explained").get<double>(), 3) << "\n\nproblems\n";
            print_problems(txt, result.at("problems"));
        } else if (ref->parsed()) {
            const auto ds = load(ref_data);
            std::optional<RefinementSession> session;
            if (!ref_load.empty()) {
                session.emplace(load_session(read_json(ref_load), ds));
            } else {
                if (ref_k == 0) throw validation_error("missing_k", "refine needs --k or --load");
                SessionConfig config;
                config.efa.override_adequacy = ref_override;
                session.emplace(RefinementSession::create(ds, load_expected(ref_expected, *ds), ref_k, config));
            }
            for (const auto& m : ref_drops) session->apply(Action::drop(m), "requested on the command line");
            AutoRefineResult outcome;
            if (ref_auto) {
                outcome = session->auto_refine(ref_max == 0 ? ds->n_metrics() : ref_max);
            } else {
                outcome.stop_reason = session->stop_report().clean ? "clean" : "not refined";
            }
            if (!ref_save.empty()) write_text(ref_save, save_session(*session).dump(2) + "\n");
            if (!ref_export.empty()) write_text(ref_export, encode(session->export_model()).dump(2) + "\n");
            result = refine_result(*session, outcome);

            std::size_t i = 0;
            for (const auto& step : session->history()) {
                txt << "step " << ++i << ": " << step.action.describe() << "  [" << step.digest << "]\n";
                if (!step.rationale.empty()) txt << "        " << step.rationale << "\n";
                for (const auto& w : step.warnings) txt << "        warning: " << w << "\n";
            }
            if (i > 0) txt << "\n";
            txt << "stopped: " << outcome.stop_reason << "\n\n";
            txt << render_loadings_table(session->solution(), factor_names(session->factor_labels())) << "\n";
            txt << "variance explained " << fixed(session->solution().variance_explained, 3) << "\n\nproblems\n";
            print_problems(txt, encode(session->problems()));
            for (const auto& w : session->stop_report().warnings) txt << "warning: " << w << "\n";
        } else if (cfa->parsed()) {
            const auto ds = load(cfa_data);
            const auto spec = decode_spec(read_json(cfa_spec));
            CfaOptions options;
            options.multi_start = cfa_starts > 0;
            options.starts = cfa_starts;
            options.seed = cfa_seed;
            const auto model = fit(*ds, spec, options);
            result = {{"model", encode(model)}};
            if (!cfa_scores.empty()) {
                const auto scores = factor_scores(model, *ds);
                std::ostringstream csv;
                csv << "id";
                for (const auto& f : model.factors) csv << "," << f;
                csv << "\n";
                for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                    csv << ds->entity_ids()[static_cast<std::size_t>(i)];
                    for (Eigen::Index f = 0; f < scores.cols(); ++f) {
                        csv << ",";
                        if (std::isfinite(scores(i, f))) csv << format_double(scores(i, f));
                    }
                    csv << "\n";
                }
                write_text(cfa_scores, csv.str());
            }
            if (!cfa_model.empty()) write_text(cfa_model, export_formulas(model) + "\n");
            print_model(txt, model);
        } else if (sim->parsed()) {
            if (effect_opt->count() > 0) sim_req.effect = sim_effect;
            const auto observations = simulate_observations(sim_req.model, sim_req.n);
            result = simulation_result(sim_req, observations);
            const auto bins = histogram(observations, sim_req.bins);
            std::ostringstream samples;
            samples << "value\n";
            for (double x : observations) samples << format_double(x) << "\n";
            write_text(sim_out + "_samples.csv", samples.str());
            std::ostringstream hist;
            hist << "value,count\n";
            for (const auto& b : bins) hist << format_double((b.lower + b.upper) / 2.0) << "," << b.count << "\n";
            write_text(sim_out + "_histogram.csv", hist.str());

            const auto summary = summarize(observations);
            txt << "n     " << summary.n << "\nmean  " << fixed(summary.mean, 4) << "\nsd    " << fixed(summary.sd, 4) << "\n";
            if (sim_req.effect) {
                const auto d = detectability(*sim_req.effect, sim_req.model.random_sd);
                txt << "P(misorder)  " << d.misorder_probability << "\noverlap      " << fixed(d.distribution_overlap, 4) << "\n";
                if (result.contains("required_sample_size")) txt << "n per group  " << result["required_sample_size"].get<std::size_t>() << "\n";
            }
            txt << "wrote " << resolve(sim_out + "_samples.csv").string() << " and " << resolve(sim_out + "_histogram.csv").string() << "\n";
        } else if (aud->parsed()) {
            const auto ds = load(aud_data);
            const auto cm = correlation_matrix(*ds, missing_policy_from_string(aud_missing));
            const auto audit = audit_scales(cm, load_expected(aud_expected, *ds));
            result = encode(audit);
            txt << "min |r| within scales  " << fixed(audit.min_intra, 3) << "\n";
            txt << "max |r| across scales  " << fixed(audit.max_inter, 3) << "\n";
            txt << "verdict                " << (audit.pass ? "pass" : "fail") << "\n";
            for (const auto& p : audit.offending_pairs) {
                txt << "  " << (p.intra ? "within " : "across ") << p.a << " ~ " << p.b << "  |r| " << fixed(p.abs_r, 3) << "\n";
            }
        } else if (srv->parsed()) {
            ServiceConfig config;
            if (const char* dir = std::getenv("METROLOGY_WORKDIR"); dir && *dir) config.workdir = dir;
            config.max_upload_bytes = srv_max_mb * 1024u * 1024u;
            Service service(config);
            HttpServer server(service);
            const int port = server.bind(srv_host, srv_port);
            err << "serving on http://" << srv_host << ":" << port << std::endl;
            server.listen();
            return 0;
        } else {
            result = api_schema();
            txt << result.dump(2) << "\n";
        }

        if (json) out << ok_envelope(result).dump(2) << "\n";
        else out << txt.str();
        return 0;
    } catch (const Error& e) {
        const int status = e.kind() == ErrorKind::computation ? 2 : 1;
        return fail(out, err, json, e.code(), e.what(), status);
    } catch (const std::exception& e) {
        return fail(out, err, json, "internal_error", e.what(), 2);
    }
}

}  // namespace metrology
