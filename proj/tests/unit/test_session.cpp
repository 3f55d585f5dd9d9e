#include "metrology/error.hpp"
#include "metrology/json.hpp"
#include "metrology/session.hpp"

#include "../support/synthetic.hpp"

#include <gtest/gtest.h>

using namespace metrology;

namespace {

std::string error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "no error";
}

std::shared_ptr<const MetricDataset> make_dataset(const synthetic::SixFactorCase& c, std::size_t n, std::uint64_t seed) {
    const auto sample = synthetic::generate(c.loadings, c.phi, n, seed);
    return std::make_shared<const MetricDataset>(synthetic::dataset(sample.x, c.headers));
}

std::shared_ptr<const MetricDataset> three_factor_dataset(std::uint64_t seed, std::size_t junk = 0) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(12 + static_cast<Eigen::Index>(junk), 3);
    l.topRows(12) = synthetic::cluster_loadings(3, 4, 0.8);
    auto headers = synthetic::headers(3, 4);
    const std::vector<std::string> junk_names{"Cohesion.Junk", "Out-Coupling.Junk"};
    for (std::size_t j = 0; j < junk; ++j) headers.push_back(junk_names[j]);
    const auto sample = synthetic::generate(l, Eigen::MatrixXd::Identity(3, 3), 800, seed);
    return std::make_shared<const MetricDataset>(synthetic::dataset(sample.x, headers));
}

RefinementSession start(std::shared_ptr<const MetricDataset> ds, std::size_t k) {
    return RefinementSession::create(ds, expected_from_headers(*ds), k);
}

}  // namespace

TEST(Session, SixFactorDatasetGivesSixFactors) {
    const auto ds = make_dataset(synthetic::six_factor_case(1), 1000, 1);
    const auto s = start(ds, 6);
    EXPECT_EQ(s.solution().k(), 6u);
    EXPECT_EQ(s.k(), 6u);
    EXPECT_TRUE(s.history().empty());
    EXPECT_TRUE(s.stop_report().clean);
}

TEST(Session, ExpectedMapMustCoverEveryMetric) {
    const auto ds = three_factor_dataset(2);
    auto expected = expected_from_headers(*ds);
    expected.erase("In-Coupling.M2");
    try {
        RefinementSession::create(ds, expected, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "expected_incomplete");
        EXPECT_NE(std::string(e.what()).find("In-Coupling.M2"), std::string::npos);
    }
}

TEST(Session, IdenticalInputsGiveIdenticalSolutions) {
    const auto ds = three_factor_dataset(3);
    EXPECT_EQ(start(ds, 3).digest(), start(ds, 3).digest());
}

TEST(Session, DropThenUndoRestoresDigest) {
    const auto ds = three_factor_dataset(4);
    auto s = start(ds, 3);
    const auto before = s.digest();
    s.apply(Action::drop("In-Coupling.M1"), "check");
    EXPECT_NE(s.digest(), before);
    EXPECT_EQ(s.history().size(), 1u);
    EXPECT_EQ(s.history()[0].rationale, "check");
    s.undo();
    EXPECT_EQ(s.digest(), before);
    EXPECT_TRUE(s.history().empty());
    EXPECT_TRUE(s.dropped().empty());
    EXPECT_EQ(error_code([&] { s.undo(); }), "nothing_to_undo");
}

TEST(Session, CurrentEqualsEfaOverActiveMetrics) {
    const auto ds = three_factor_dataset(5);
    auto s = start(ds, 3);
    s.apply(Action::drop("Cohesion.M4"));
    s.apply(Action::set_threshold("suppress", 0.4));
    const std::vector<std::string> dropped{"Cohesion.M4"};
    EfaConfig config;
    config.suppress_threshold = 0.4;
    const auto direct = run_efa(ds->without(dropped), 3, config);
    EXPECT_EQ(s.digest(), solution_digest(direct));
    EXPECT_EQ(s.solution().suppress_threshold, 0.4);
    EXPECT_EQ(s.active_metrics().size(), 11u);
    // The dataset itself is untouched.
    EXPECT_EQ(s.dataset().n_metrics(), 12u);
}

TEST(Session, SetKRecordsAndChangesFactorCount) {
    const auto ds = three_factor_dataset(6);
    auto s = start(ds, 3);
    s.apply(Action::set_k(2));
    EXPECT_EQ(s.k(), 2u);
    EXPECT_EQ(s.solution().k(), 2u);
    EXPECT_EQ(s.history().back().action.kind, ActionKind::set_k);
    EXPECT_EQ(s.initial_k(), 3u);
}

TEST(Session, InvalidActionsLeaveSessionUnchanged) {
    const auto ds = three_factor_dataset(7);
    auto s = start(ds, 3);
    const auto digest = s.digest();
    EXPECT_EQ(error_code([&] { s.apply(Action::drop("Size.Nope")); }), "unknown_metric");
    s.apply(Action::drop("In-Coupling.M1"));
    EXPECT_EQ(error_code([&] { s.apply(Action::drop("In-Coupling.M1")); }), "already_dropped");
    EXPECT_EQ(error_code([&] { s.apply(Action::set_threshold("communality", 1.5)); }), "bad_threshold");
    EXPECT_EQ(error_code([&] { s.apply(Action::set_threshold("nope", 0.5)); }), "unknown_threshold");
    EXPECT_EQ(error_code([&] { s.apply(Action::set_k(0)); }), "bad_factor_count");
    EXPECT_EQ(error_code([&] { s.apply(Action::set_k(11)); }), "bad_factor_count");
    EXPECT_EQ(s.history().size(), 1u);
    s.undo();
    EXPECT_EQ(s.digest(), digest);
}

TEST(Session, DroppingBelowThreeMetricsWarns) {
    const auto ds = three_factor_dataset(8);
    SessionConfig config;
    config.efa.extraction.max_iter = 5000;  // two-indicator factors converge slowly
    auto s = RefinementSession::create(ds, expected_from_headers(*ds), 3, config);
    EXPECT_TRUE(s.apply(Action::drop("In-Coupling.M1")).warnings.empty());
    const auto& step = s.apply(Action::drop("In-Coupling.M2"));
    ASSERT_FALSE(step.warnings.empty());
    EXPECT_NE(step.warnings.front().find("In-Coupling"), std::string::npos);
    EXPECT_FALSE(s.stop_report().factor_sizes_ok);
}

TEST(Session, HistoryLengthTracksAppliesMinusUndos) {
    const auto ds = three_factor_dataset(9);
    auto s = start(ds, 3);
    s.apply(Action::drop("In-Coupling.M1"));
    s.apply(Action::drop("Cohesion.M1"));
    s.undo();
    s.apply(Action::set_threshold("communality", 0.4));
    s.apply(Action::set_k(2));
    s.undo();
    EXPECT_EQ(s.history().size(), 2u);
}

TEST(AutoRefine, CleanSolutionTakesNoSteps) {
    auto s = start(three_factor_dataset(10), 3);
    ASSERT_TRUE(s.stop_report().clean);
    const auto result = s.auto_refine(10);
    EXPECT_EQ(result.steps, 0u);
    EXPECT_EQ(result.stop_reason, "clean");
}

TEST(AutoRefine, DropsExactlyThePlantedJunk) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto s = start(three_factor_dataset(seed, 2), 3);
        const auto result = s.auto_refine(10);
        EXPECT_EQ(result.steps, 2u);
        auto dropped = s.dropped();
        std::sort(dropped.begin(), dropped.end());
        EXPECT_EQ(dropped, (std::vector<std::string>{"Cohesion.Junk", "Out-Coupling.Junk"}));
        EXPECT_TRUE(s.stop_report().clean);
        for (const auto& step : s.history()) {
            EXPECT_TRUE(step.automatic);
            EXPECT_NE(step.rationale.find("automatic"), std::string::npos);
        }
    }
}

TEST(AutoRefine, StepBoundIsRespected) {
    auto s = start(three_factor_dataset(11, 2), 3);
    const auto result = s.auto_refine(1);
    EXPECT_EQ(result.steps, 1u);
    EXPECT_EQ(s.history().size(), 1u);
    EXPECT_EQ(result.stop_reason, "max_steps reached");
}

TEST(AutoRefine, PlantedDefectsMirrorTheRefinementNarrative) {
    const auto c = synthetic::planted_defect_case(2);
    auto s = start(make_dataset(c, 1000, 2), 6);
    ASSERT_FALSE(s.problems().empty());
    EXPECT_EQ(s.problems().front().metric, "Cohesion.Stray");
    bool cross_retained = false;
    for (const auto& p : s.problems()) cross_retained = cross_retained || (p.metric == "In-Coupling.Cross" && p.retain_for_now);
    EXPECT_TRUE(cross_retained);
    const auto result = s.auto_refine(5);
    EXPECT_EQ(s.dropped(), std::vector<std::string>{"Cohesion.Stray"});
    EXPECT_LE(result.steps, s.dataset().n_metrics());
}

TEST(Export, StructureFollowsAssignment) {
    auto s = start(three_factor_dataset(12, 2), 3);
    const auto initial = s.export_model();
    EXPECT_EQ(initial.spec.metrics().size(), 14u);
    s.auto_refine(10);
    const auto exported = s.export_model();
    ASSERT_EQ(exported.spec.structure.size(), 3u);
    for (const auto& [factor, metrics] : exported.spec.structure) {
        EXPECT_EQ(metrics.size(), 4u);
        for (const auto& m : metrics) EXPECT_EQ(m.substr(0, factor.size()), factor);
    }
    EXPECT_EQ(exported.dropped.size(), 2u);
    EXPECT_GE(exported.content_validity_checklist.size(), 5u);
}

TEST(Export, RoundTripsIntoCfa) {
    auto s = start(three_factor_dataset(13), 3);
    const auto exported = s.export_model();
    const auto spec = decode_spec(encode(exported));
    EXPECT_EQ(spec, exported.spec);
    const auto model = fit(s.dataset(), spec);
    EXPECT_EQ(model.spec, exported.spec);
    EXPECT_EQ(model.metrics, exported.spec.metrics());
}

TEST(Replay, SavedLogReproducesEveryDigest) {
    const auto ds = three_factor_dataset(14, 2);
    auto s = RefinementSession::create(ds, expected_from_headers(*ds), 3, {}, "s1");
    s.apply(Action::set_threshold("communality", 0.45), "looser");
    s.auto_refine(10);
    s.apply(Action::set_k(2));
    s.undo();
    const Json doc = save_session(s);
    const auto replayed = load_session(Json::parse(doc.dump()), ds);
    ASSERT_EQ(replayed.history().size(), s.history().size());
    for (std::size_t i = 0; i < s.history().size(); ++i) EXPECT_EQ(replayed.history()[i].digest, s.history()[i].digest);
    EXPECT_EQ(replayed.digest(), s.digest());
    EXPECT_EQ(replayed.id(), "s1");
    EXPECT_EQ(replayed.history()[0].rationale, "looser");
}

TEST(Replay, TamperedDigestDetected) {
    const auto ds = three_factor_dataset(15);
    auto s = start(ds, 3);
    s.apply(Action::drop("In-Coupling.M1"));
    Json doc = save_session(s);
    doc["steps"][0]["digest"] = "0000000000000000";
    EXPECT_EQ(error_code([&] { load_session(doc, ds); }), "digest_mismatch");
    Json other = save_session(s);
    EXPECT_EQ(error_code([&] { load_session(other, three_factor_dataset(15, 1)); }), "dataset_mismatch");
}

TEST(Digest, SensitiveAtTenthDecimal) {
    FactorSolution a;
    a.loadings = Eigen::MatrixXd::Constant(2, 1, 0.5);
    FactorSolution b = a;
    b.loadings(1, 0) += 1e-12;
    EXPECT_EQ(solution_digest(a), solution_digest(b));
    b.loadings(1, 0) += 2e-10;
    EXPECT_NE(solution_digest(a), solution_digest(b));
}
