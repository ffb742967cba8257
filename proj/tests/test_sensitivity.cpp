#include <doctest.h>

#include <cmath>
#include <set>

#include "textdistill/errors.hpp"
#include "textdistill/sensitivity.hpp"

using namespace textdistill;

namespace {

SweepGrid tiny_grid(std::uint64_t seed = 3) {
    SweepGrid grid;
    grid.distillers = {
        {DistillMethod::topic_removal, {0, 2, 4}},
        {DistillMethod::inlp, {1, 2}},
    };
    grid.tdm_sizes = {64};
    grid.n_bootstrap = 8;
    grid.seed = seed;
    grid.lda.n_topics = 6;
    grid.lda.sweeps = 30;
    grid.propensity.lambda_policy = LambdaPolicy::fixed;
    grid.propensity.lambda = 1e-2;
    return grid;
}

Dataset small_synthetic(std::uint64_t seed = 7, int n = 40) {
    GeneratorConfig cfg;
    cfg.n_units = n;
    cfg.seed = seed;
    cfg.k_paragraphs = 6;
    cfg.paragraph_length = 12;
    return generate_dataset(cfg);
}

}  // namespace

TEST_CASE("paper default grid counts 291 cells") {
    SweepGrid grid = paper_default_grid();
    CHECK(paper_cosine_grid().size() == 22);
    CHECK(paper_classifier_grid().size() == 11);
    CHECK(paper_inlp_grid().size() == 7);
    CHECK(paper_topic_grid().size() == 17);
    CHECK(paper_tdm_sizes() == std::vector<int>{64, 256, 1024, 4096, 16384});
    // (22 + 11 + 7 + 17) * 5 distiller cells + 5 text baselines + 1 tabular
    CHECK(grid.total_cell_count() == 291);

    // the published endpoints
    CHECK(paper_cosine_grid().front() == doctest::Approx(0.1));
    CHECK(paper_cosine_grid().back() == doctest::Approx(0.0001));
    CHECK(paper_classifier_grid().front() == doctest::Approx(0.999));
    CHECK(paper_classifier_grid().back() == doctest::Approx(0.01));
    CHECK(paper_topic_grid().front() == 0.0);
    CHECK(paper_topic_grid().back() == 16.0);
}

TEST_CASE("grid validation enforces stringency monotonicity and ranges") {
    SweepGrid grid = tiny_grid();
    grid.exemplars.passages.push_back({"austerity"});
    CHECK_NOTHROW(grid.validate());

    SweepGrid bad = grid;
    bad.distillers[0].stringency_grid = {4, 2, 0};  // must increase for topic removal
    CHECK_THROWS_AS(bad.validate(), config_error);

    bad = grid;
    bad.distillers.push_back({DistillMethod::similarity, {0.1, 0.2}});  // must decrease
    CHECK_THROWS_AS(bad.validate(), config_error);

    bad = grid;
    bad.distillers.push_back({DistillMethod::similarity, {0.2, 0.1}});
    bad.exemplars.passages.clear();
    CHECK_THROWS_AS(bad.validate(), config_error);  // exemplars required

    bad = grid;
    bad.tdm_sizes = {};
    CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("cell seeds depend on every component") {
    std::uint64_t a = cell_seed(1, "similarity", 64, 0.5);
    CHECK(a == cell_seed(1, "similarity", 64, 0.5));
    CHECK(a != cell_seed(2, "similarity", 64, 0.5));
    CHECK(a != cell_seed(1, "inlp", 64, 0.5));
    CHECK(a != cell_seed(1, "similarity", 256, 0.5));
    CHECK(a != cell_seed(1, "similarity", 64, 0.25));
}

TEST_CASE("run_sweep produces baselines plus one row per grid cell" * doctest::timeout(600)) {
    Dataset ds = small_synthetic();
    SweepGrid grid = tiny_grid();
    SweepReport report = run_sweep(ds, grid);

    CHECK(report.baseline_tabular.has_value());
    CHECK(report.baseline_text.size() == 1);
    CHECK(report.cells.size() == 5);  // 3 topic + 2 inlp
    for (const auto& cell : report.cells) CHECK(cell.status == "ok");

    REQUIRE(report.lower_bound.has_value());
    REQUIRE(report.upper_bound.has_value());
    CHECK(report.lower_bound->estimate.tau_hat <= report.upper_bound->estimate.tau_hat);

    // csv round trip preserves all rows
    std::string csv = report.to_csv();
    auto parsed = parse_sweep_csv(csv);
    CHECK(parsed.size() == 7);

    // csv starts with the documented header
    CHECK(csv.rfind("method,t,s,estimand,tau_hat,se,ci90_lo,ci90_hi,ci95_lo,ci95_hi,status", 0) ==
          0);
}

TEST_CASE("sweep is deterministic and resumable" * doctest::timeout(600)) {
    Dataset ds = small_synthetic();
    SweepGrid grid = tiny_grid();

    SweepReport a = run_sweep(ds, grid);
    SweepReport b = run_sweep(ds, grid);
    CHECK(a.to_csv() == b.to_csv());

    // resume from a partial cell list reproduces the identical csv
    std::vector<SweepCell> partial(a.cells.begin(), a.cells.begin() + 2);
    partial.push_back(*a.baseline_tabular);
    SweepOptions options;
    options.resume_cells = &partial;
    SweepReport c = run_sweep(ds, grid, options);
    CHECK(a.to_csv() == c.to_csv());

    // parallel execution matches serial output
    SweepOptions par;
    par.jobs = 2;
    SweepReport d = run_sweep(ds, grid, par);
    CHECK(a.to_csv() == d.to_csv());
}

TEST_CASE("identity stringency cell equals the undistilled estimate bit for bit" *
          doctest::timeout(600)) {
    Dataset ds = small_synthetic(11);
    SweepGrid grid = tiny_grid(17);
    SweepReport report = run_sweep(ds, grid);

    // the K=0 topic cell is an identity distillation of the topic
    // representation: recompute the undistilled-topic estimate directly with
    // the same cell seed and compare exactly
    const SweepCell* k0 = nullptr;
    for (const auto& cell : report.cells)
        if (cell.method == "topic_removal" && cell.s == 0.0) k0 = &cell;
    REQUIRE(k0 != nullptr);

    auto vocab = build_vocabulary(ds.documents, 64);
    LdaConfig lda = grid.lda;
    lda.seed = cell_seed(grid.seed, "lda", 64, 0.0);
    TopicModel model = fit_lda(ds.documents, vocab, lda);
    Representation topics = infer_topics(model, ds.documents);

    PropensityConfig prop = grid.propensity;
    prop.seed = cell_seed(grid.seed, "cvlambda", 64, 0.0);
    std::uint64_t seed = cell_seed(grid.seed, "topic_removal", 64, 0.0);
    EstimateResult direct = estimate_effect(ds, &topics.matrix, grid.estimand, prop,
                                            grid.n_bootstrap, seed);
    CHECK(direct.tau_hat == k0->estimate.tau_hat);
    CHECK(direct.bootstrap_se == k0->estimate.bootstrap_se);
    CHECK(direct.ci95 == k0->estimate.ci95);
}

TEST_CASE("bounds sandwich: identity similarity cell pins the text baseline inside bounds" *
          doctest::timeout(600)) {
    Dataset ds = small_synthetic(13);
    GeneratorConfig cfg;
    cfg.n_units = 1;
    cfg.seed = 1;
    SweepGrid grid;
    // 0.995 exceeds every cosine score in this corpus, so the lenient end is
    // a true identity distillation
    grid.distillers = {{DistillMethod::similarity, {0.995, 0.2, 0.05}}};
    grid.tdm_sizes = {64};
    grid.n_bootstrap = 6;
    grid.seed = 19;
    grid.propensity.lambda_policy = LambdaPolicy::fixed;
    grid.propensity.lambda = 1e-2;
    grid.exemplars = exemplars_from_prompts(cfg);
    SweepReport report = run_sweep(ds, grid);

    const SweepCell* identity = nullptr;
    for (const auto& cell : report.cells)
        if (cell.s == 0.995) identity = &cell;
    REQUIRE(identity != nullptr);
    CHECK(identity->estimate.tau_hat == report.baseline_text[0].estimate.tau_hat);

    double lo = report.lower_bound->estimate.tau_hat;
    double hi = report.upper_bound->estimate.tau_hat;
    CHECK(report.baseline_text[0].estimate.tau_hat >= lo);
    CHECK(report.baseline_text[0].estimate.tau_hat <= hi);
}

TEST_CASE("failing cells are tagged and the sweep continues; too many failures abort" *
          doctest::timeout(600)) {
    Dataset ds = small_synthetic(41, 30);
    SweepGrid grid = tiny_grid(43);
    // N=70 exceeds the 64-term feature dimension: those cells error out
    grid.distillers.push_back({DistillMethod::inlp, {70}});
    SweepReport report = run_sweep(ds, grid);

    int failed = 0, ok = 0;
    for (const auto& cell : report.cells) {
        if (cell.status.rfind("error", 0) == 0) {
            ++failed;
            CHECK(cell.s == 70.0);
        } else {
            ++ok;
        }
    }
    CHECK(failed == 1);
    CHECK(ok == 5);
    // the error row keeps the csv parseable
    auto parsed = parse_sweep_csv(report.to_csv());
    CHECK(parsed.size() == 8);

    // a grid where most cells fail aborts with a data error
    SweepGrid doomed;
    doomed.distillers = {{DistillMethod::inlp, {70, 71, 72}}};
    doomed.tdm_sizes = {64};
    doomed.n_bootstrap = 4;
    doomed.propensity.lambda_policy = LambdaPolicy::fixed;
    CHECK_THROWS_AS(run_sweep(ds, doomed), data_error);
}

TEST_CASE("compute_bounds picks min and max with deterministic tie break") {
    SweepReport report;
    auto cell = [](const std::string& m, int mi, int t, double s, int si, double tau) {
        SweepCell c;
        c.method = m;
        c.method_index = mi;
        c.t = t;
        c.s = s;
        c.s_index = si;
        c.estimate.tau_hat = tau;
        return c;
    };
    report.cells = {cell("a", 0, 64, 1, 0, 2.0), cell("a", 0, 64, 2, 1, 3.5),
                    cell("a", 0, 64, 3, 2, 1.2)};
    auto [lo, hi] = compute_bounds(report);
    CHECK(lo.estimate.tau_hat == 1.2);
    CHECK(hi.estimate.tau_hat == 3.5);

    // tie: first in canonical order wins
    report.cells.push_back(cell("b", 1, 64, 9, 0, 1.2));
    auto [lo2, hi2] = compute_bounds(report);
    CHECK(lo2.method == "a");
    CHECK(lo2.s == 3.0);

    // single successful cell: lower == upper
    SweepReport one;
    one.cells = {cell("a", 0, 64, 1, 0, 2.25)};
    auto [l1, u1] = compute_bounds(one);
    CHECK(l1.estimate.tau_hat == u1.estimate.tau_hat);

    SweepReport none;
    CHECK_THROWS_AS(compute_bounds(none), data_error);

    // failed cells are ignored
    SweepCell failed = cell("a", 0, 64, 4, 3, -99.0);
    failed.status = "error[x]";
    report.cells.push_back(failed);
    auto [lo3, hi3] = compute_bounds(report);
    CHECK(lo3.estimate.tau_hat == 1.2);
}

TEST_CASE("leakage diagnostic belly depth matches hand computations") {
    SweepReport report;
    auto cell = [](int t, double s, int si, double tau, double se) {
        SweepCell c;
        c.method = "similarity";
        c.method_index = 0;
        c.t = t;
        c.s = s;
        c.s_index = si;
        c.estimate.tau_hat = tau;
        c.estimate.bootstrap_se = se;
        return c;
    };

    // flat trajectory: depth 0, not flagged
    report.cells = {cell(64, 0.9, 0, 1.0, 0.1), cell(64, 0.5, 1, 1.0, 0.1),
                    cell(64, 0.1, 2, 1.0, 0.1)};
    auto diags = leakage_diagnostic(report);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].belly_depth == doctest::Approx(0.0));
    CHECK(!diags[0].leakage_suspected);
    CHECK(diags[0].total_variation == doctest::Approx(0.0));

    // {2.0, 1.0, 2.1} with median se 0.2: chord midpoint 2.05, depth 1.05
    report.cells = {cell(64, 0.9, 0, 2.0, 0.2), cell(64, 0.5, 1, 1.0, 0.2),
                    cell(64, 0.1, 2, 2.1, 0.2)};
    diags = leakage_diagnostic(report);
    CHECK(diags[0].belly_depth == doctest::Approx(1.05));
    CHECK(diags[0].leakage_suspected);
    CHECK(diags[0].total_variation == doctest::Approx(1.0 + 1.1));

    // fewer than 3 points anywhere is an error
    SweepReport sparse;
    sparse.cells = {cell(64, 0.9, 0, 1.0, 0.1), cell(64, 0.5, 1, 1.2, 0.1)};
    CHECK_THROWS_AS(leakage_diagnostic(sparse), data_error);
}

TEST_CASE("sweep summary json carries bounds and diagnostics") {
    Dataset ds = small_synthetic(23, 30);
    SweepGrid grid = tiny_grid(29);
    SweepReport report = run_sweep(ds, grid);
    std::string json = sweep_summary_json(report);
    CHECK(json.find("\"bounds\"") != std::string::npos);
    CHECK(json.find("\"baseline_tabular\"") != std::string::npos);
    CHECK(json.find("\"diagnostics\"") != std::string::npos);
}
