#include <doctest.h>

#include <cmath>
#include <limits>

#include "textdistill/errors.hpp"
#include "textdistill/estimate.hpp"
#include "textdistill/rng.hpp"

using namespace textdistill;

TEST_CASE("ipw ate matches the hand examples") {
    Eigen::VectorXd y(2);
    y << 3.0, 1.0;
    std::vector<int> t = {1, 0};
    Eigen::VectorXd p(2);
    p << 0.5, 0.5;
    CHECK(ipw_ate(y, t, p) == doctest::Approx(2.0).epsilon(1e-12));

    // all treated at p = 0.99 with constant outcome c
    Eigen::VectorXd yc = Eigen::VectorXd::Constant(5, 2.5);
    std::vector<int> all1(5, 1);
    Eigen::VectorXd p99 = Eigen::VectorXd::Constant(5, 0.99);
    CHECK(ipw_ate(yc, all1, p99) == doctest::Approx(2.5 / 0.99).epsilon(1e-12));

    // zero outcomes give zero regardless of scores
    Eigen::VectorXd zeros = Eigen::VectorXd::Zero(4);
    std::vector<int> mixed = {1, 0, 1, 0};
    Eigen::VectorXd ps(4);
    ps << 0.2, 0.7, 0.9, 0.4;
    CHECK(ipw_ate(zeros, mixed, ps) == 0.0);

    // scores at the boundary are rejected
    Eigen::VectorXd bad(2);
    bad << 1.0, 0.5;
    CHECK_THROWS_AS(ipw_ate(y, t, bad), data_error);
}

TEST_CASE("ipw att matches the hand example and reduces to difference in means") {
    Eigen::VectorXd y(3);
    y << 5.0, 1.0, 3.0;
    std::vector<int> t = {1, 0, 0};
    Eigen::VectorXd p(3);
    p << 0.5, 0.8, 0.2;
    // weights 4 and 0.25; weighted control mean 4.75/4.25
    CHECK(ipw_att(y, t, p) == doctest::Approx(5.0 - 4.75 / 4.25).epsilon(1e-9));
    CHECK(ipw_att(y, t, p) == doctest::Approx(3.8824).epsilon(1e-4));

    // constant propensity reduces ATT to the difference in means
    Eigen::VectorXd yc(4);
    yc << 4.0, 6.0, 1.0, 3.0;
    std::vector<int> tc = {1, 1, 0, 0};
    Eigen::VectorXd phalf = Eigen::VectorXd::Constant(4, 0.5);
    CHECK(ipw_att(yc, tc, phalf) == doctest::Approx(5.0 - 2.0));

    // equal outcomes in both arms give zero
    Eigen::VectorXd same = Eigen::VectorXd::Constant(4, 7.0);
    CHECK(ipw_att(same, tc, phalf) == doctest::Approx(0.0));

    std::vector<int> no_treated = {0, 0, 0, 0};
    CHECK_THROWS_AS(ipw_att(yc, no_treated, phalf), data_error);
    std::vector<int> no_control = {1, 1, 1, 1};
    CHECK_THROWS_AS(ipw_att(yc, no_control, phalf), data_error);
}

TEST_CASE("fit_propensity clips when asked and flags text usage") {
    Rng rng(4);
    const int n = 120;
    Eigen::MatrixXd x(n, 1);
    std::vector<int> t(n);
    for (int i = 0; i < n; ++i) {
        t[i] = i % 2;
        x(i, 0) = t[i] == 1 ? 3.0 + rng.normal() * 0.01 : -3.0 + rng.normal() * 0.01;
    }
    PropensityConfig cfg;
    cfg.lambda_policy = LambdaPolicy::fixed;
    cfg.lambda = 1e-4;
    cfg.clip = true;
    PropensityScores scores = fit_propensity(standardize_columns(x), nullptr, t, cfg);
    CHECK(scores.clipped);
    CHECK(!scores.used_text);
    CHECK(scores.values.minCoeff() >= 0.01);
    CHECK(scores.values.maxCoeff() <= 0.99);

    Eigen::MatrixXd rep = Eigen::MatrixXd::Zero(n, 2);
    PropensityScores with_text = fit_propensity(standardize_columns(x), &rep, t, cfg);
    CHECK(with_text.used_text);
}

TEST_CASE("fit_propensity rejects single-class treatment and non-finite inputs") {
    Eigen::MatrixXd x(4, 1);
    x << 0.1, -0.2, 0.3, -0.4;
    PropensityConfig cfg;
    cfg.lambda_policy = LambdaPolicy::fixed;
    CHECK_THROWS_AS(fit_propensity(x, nullptr, {1, 1, 1, 1}, cfg), single_class_error);

    Eigen::MatrixXd bad = x;
    bad(2, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(fit_propensity(bad, nullptr, {0, 1, 0, 1}, cfg), data_error);

    Eigen::MatrixXd rep(3, 1);  // row mismatch
    CHECK_THROWS_AS(fit_propensity(x, &rep, {0, 1, 0, 1}, cfg), data_error);
}

TEST_CASE("permuted labels give scores near the base rate over seeds") {
    double total_dev = 0.0;
    const int n_seeds = 10;
    for (int s = 0; s < n_seeds; ++s) {
        Rng rng(40 + s);
        const int n = 200;
        Eigen::MatrixXd x(n, 3);
        std::vector<int> t(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
            t[i] = rng.bernoulli(0.6) ? 1 : 0;  // independent of x
            pos += t[i];
        }
        double base = static_cast<double>(pos) / n;
        PropensityConfig cfg;
        cfg.lambda_policy = LambdaPolicy::fixed;
        cfg.lambda = 1e-2;
        PropensityScores scores = fit_propensity(standardize_columns(x), nullptr, t, cfg);
        double dev = 0.0;
        for (Eigen::Index i = 0; i < scores.values.size(); ++i)
            dev += std::abs(scores.values[i] - base);
        total_dev += dev / n;
    }
    CHECK(total_dev / n_seeds < 0.1);
}

TEST_CASE("bootstrap of a constant estimator has zero se and determinism") {
    auto constant = [](const std::vector<int>&) { return 3.25; };
    BootstrapResult a = bootstrap_se(constant, 50, 64, 9);
    CHECK(a.se == 0.0);
    CHECK(a.ci90[0] == doctest::Approx(3.25));
    CHECK(a.ci95[1] == doctest::Approx(3.25));

    auto noisy = [](const std::vector<int>& idx) {
        double s = 0.0;
        for (int i : idx) s += i;
        return s / idx.size();
    };
    BootstrapResult b1 = bootstrap_se(noisy, 50, 64, 9);
    BootstrapResult b2 = bootstrap_se(noisy, 50, 64, 9);
    CHECK(b1.se == b2.se);
    CHECK(b1.ci90 == b2.ci90);
    CHECK(b1.ci95 == b2.ci95);
    CHECK(b1.se > 0.0);
    // ci95 contains ci90
    CHECK(b1.ci95[0] <= b1.ci90[0]);
    CHECK(b1.ci95[1] >= b1.ci90[1]);
}

TEST_CASE("bootstrap discards degenerate replicates and errors past 20%") {
    int calls = 0;
    auto flaky = [&calls](const std::vector<int>&) -> double {
        if (++calls % 3 == 0) throw single_class_error("degenerate");
        return 1.0;
    };
    CHECK_THROWS_AS(bootstrap_se(flaky, 20, 30, 3), data_error);

    calls = 0;
    auto rare = [&calls](const std::vector<int>&) -> double {
        if (++calls == 5) throw single_class_error("degenerate");
        return static_cast<double>(calls);
    };
    BootstrapResult res = bootstrap_se(rare, 20, 30, 3);
    CHECK(res.n_discarded == 1);
    CHECK(res.n_draws == 30);
}

TEST_CASE("estimate_effect recovers tau on oracle-adjusted synthetic data" *
          doctest::timeout(300)) {
    GeneratorConfig cfg;
    cfg.n_units = 1500;
    cfg.seed = 99;
    cfg.k_paragraphs = 1;
    cfg.paragraph_length = 2;
    Dataset ds = generate_dataset(cfg);

    Eigen::MatrixXd u(ds.units.size(), 1);
    for (std::size_t i = 0; i < ds.units.size(); ++i) u(static_cast<Eigen::Index>(i), 0) = *ds.units[i].u;

    PropensityConfig prop;
    prop.lambda_policy = LambdaPolicy::fixed;
    prop.lambda = 1e-3;
    EstimateResult res = estimate_effect(ds, &u, Estimand::ate, prop, 200, 11);
    CHECK(std::abs(res.tau_hat - cfg.tau_true) < 0.25);
    CHECK(res.bootstrap_se > 0.0);
    CHECK(res.ci95[0] <= res.ci90[0]);
    CHECK(res.ci95[1] >= res.ci90[1]);

    // ATT equals ATE up to joint uncertainty under a homogeneous effect
    EstimateResult att = estimate_effect(ds, &u, Estimand::att, prop, 200, 11);
    double joint = 3.0 * std::sqrt(res.bootstrap_se * res.bootstrap_se +
                                   att.bootstrap_se * att.bootstrap_se);
    CHECK(std::abs(att.tau_hat - res.tau_hat) < joint);
}

TEST_CASE("estimate csv row carries provenance") {
    EstimateResult res;
    res.estimand = Estimand::att;
    res.tau_hat = 1.5;
    res.bootstrap_se = 0.25;
    res.ci90 = {1.1, 1.9};
    res.ci95 = {1.0, 2.0};
    res.n_bootstrap = 100;
    res.provenance = {"similarity", 0.05, 256, 42};
    std::string row = res.csv_row();
    CHECK(row.find("ATT") == 0);
    CHECK(row.find("similarity") != std::string::npos);
    CHECK(row.find("256") != std::string::npos);
    CHECK(std::string(EstimateResult::csv_header()).find("tau_hat") != std::string::npos);
}

TEST_CASE("text propensity fits no worse than tabular on leaky synthetic data" *
          doctest::timeout(600)) {
    // held-out log-likelihood comparison over seeds
    int text_wins = 0;
    const int n_seeds = 10;
    for (int s = 0; s < n_seeds; ++s) {
        GeneratorConfig cfg;
        cfg.n_units = 120;
        cfg.seed = 700 + s;
        cfg.k_paragraphs = 8;
        cfg.paragraph_length = 15;
        Dataset ds = generate_dataset(cfg);
        auto vocab = build_vocabulary(ds.documents, 150);
        Eigen::MatrixXd text = tfidf_representation(ds, vocab).matrix;
        Eigen::MatrixXd x = standardize_columns(covariate_matrix(ds));
        std::vector<int> t = treatment_labels(ds);

        LogisticConfig lc;
        lc.lambda = 1e-2;
        auto heldout_ll = [&](const Eigen::MatrixXd& features) {
            Eigen::VectorXd oof = kfold_oof_probabilities(features, t, 4, lc, 5);
            double ll = 0.0;
            for (Eigen::Index i = 0; i < oof.size(); ++i)
                ll += t[static_cast<std::size_t>(i)] ? std::log(oof[i]) : std::log(1 - oof[i]);
            return ll;
        };
        Eigen::MatrixXd combined(x.rows(), x.cols() + text.cols());
        combined.leftCols(x.cols()) = x;
        combined.rightCols(text.cols()) = text;
        text_wins += heldout_ll(combined) >= heldout_ll(x);
    }
    CHECK(text_wins >= 9);
}
