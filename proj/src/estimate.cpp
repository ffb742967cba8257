#include "textdistill/estimate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "textdistill/errors.hpp"
#include "textdistill/rng.hpp"

namespace textdistill {

const char* estimand_name(Estimand e) { return e == Estimand::ate ? "ATE" : "ATT"; }

std::optional<Estimand> estimand_from_name(const std::string& name) {
    if (name == "ATE" || name == "ate") return Estimand::ate;
    if (name == "ATT" || name == "att") return Estimand::att;
    return std::nullopt;
}

PropensityScores fit_propensity(const Eigen::MatrixXd& covariates,
                                const Eigen::MatrixXd* text_representation,
                                const std::vector<int>& treatment, const PropensityConfig& cfg) {
    const Eigen::Index n = covariates.rows();
    if (text_representation && text_representation->rows() != n)
        throw data_error("fit_propensity: representation row count mismatch");
    if (!covariates.allFinite() ||
        (text_representation && !text_representation->allFinite()))
        throw data_error("fit_propensity: non-finite inputs");

    Eigen::Index text_cols = text_representation ? text_representation->cols() : 0;
    Eigen::MatrixXd features(n, covariates.cols() + text_cols);
    features.leftCols(covariates.cols()) = covariates;
    if (text_cols > 0) features.rightCols(text_cols) = *text_representation;

    LogisticConfig lcfg;
    lcfg.penalty = cfg.penalty;
    lcfg.tol = cfg.tol;
    lcfg.max_iter = cfg.max_iter;
    lcfg.seed = cfg.seed;
    lcfg.lambda = cfg.lambda;
    if (cfg.lambda_policy == LambdaPolicy::cv)
        lcfg.lambda = select_lambda_cv(features, treatment, cfg.penalty, default_lambda_grid(),
                                       cfg.cv_folds, cfg.seed);

    PropensityScores scores;
    scores.model = fit_logistic(features, treatment, lcfg);
    scores.values = predict_proba(scores.model, features);
    scores.used_text = text_cols > 0;
    if (cfg.clip) {
        for (Eigen::Index i = 0; i < scores.values.size(); ++i)
            scores.values[i] = std::clamp(scores.values[i], cfg.clip_lo, cfg.clip_hi);
        scores.clipped = true;
    }
    return scores;
}

double ipw_ate(const Eigen::VectorXd& y, const std::vector<int>& t,
               const Eigen::VectorXd& scores) {
    const Eigen::Index n = y.size();
    if (static_cast<Eigen::Index>(t.size()) != n || scores.size() != n)
        throw data_error("ipw_ate: length mismatch");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = scores[i];
        if (p <= 0.0 || p >= 1.0)
            throw data_error("ipw_ate: propensity score at 0 or 1");
        if (t[static_cast<std::size_t>(i)] == 1)
            acc += y[i] / p;
        else
            acc -= y[i] / (1.0 - p);
    }
    return acc / static_cast<double>(n);
}

double ipw_att(const Eigen::VectorXd& y, const std::vector<int>& t,
               const Eigen::VectorXd& scores) {
    const Eigen::Index n = y.size();
    if (static_cast<Eigen::Index>(t.size()) != n || scores.size() != n)
        throw data_error("ipw_att: length mismatch");
    double treated_sum = 0.0, treated_n = 0.0;
    double ctrl_weighted = 0.0, ctrl_weight = 0.0, ctrl_n = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = scores[i];
        if (p <= 0.0 || p >= 1.0)
            throw data_error("ipw_att: propensity score at 0 or 1");
        if (t[static_cast<std::size_t>(i)] == 1) {
            treated_sum += y[i];
            treated_n += 1.0;
        } else {
            double w = p / (1.0 - p);
            ctrl_weighted += w * y[i];
            ctrl_weight += w;
            ctrl_n += 1.0;
        }
    }
    if (treated_n == 0.0) throw data_error("ipw_att: no treated units");
    if (ctrl_n == 0.0) throw data_error("ipw_att: no control units");
    return treated_sum / treated_n - ctrl_weighted / ctrl_weight;
}

namespace {

double percentile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

BootstrapResult bootstrap_se(const std::function<double(const std::vector<int>&)>& estimator,
                             std::size_t n_units, int n_draws, std::uint64_t seed) {
    if (n_draws < 2) throw config_error("bootstrap_se needs n_draws >= 2");
    if (n_units == 0) throw data_error("bootstrap_se: empty sample");

    std::vector<double> replicates;
    replicates.reserve(n_draws);
    int discarded = 0;
    std::vector<int> idx(n_units);
    for (int r = 0; r < n_draws; ++r) {
        Rng rng(derive_seed(seed, 0xB007 + static_cast<std::uint64_t>(r)));
        for (std::size_t i = 0; i < n_units; ++i)
            idx[i] = static_cast<int>(rng.uniform_index(n_units));
        try {
            replicates.push_back(estimator(idx));
        } catch (const single_class_error&) {
            ++discarded;  // degenerate replicate, logged in the result
        }
    }
    if (discarded * 5 > n_draws)
        throw data_error("bootstrap_se: more than 20% of replicates were degenerate");

    BootstrapResult res;
    res.n_draws = n_draws;
    res.n_discarded = discarded;

    const double b = static_cast<double>(replicates.size());
    double mean = 0.0;
    for (double v : replicates) mean += v;
    mean /= b;
    double ss = 0.0;
    for (double v : replicates) ss += (v - mean) * (v - mean);
    res.se = b > 1.0 ? std::sqrt(ss / (b - 1.0)) : 0.0;

    std::sort(replicates.begin(), replicates.end());
    res.ci90 = {percentile(replicates, 0.05), percentile(replicates, 0.95)};
    res.ci95 = {percentile(replicates, 0.025), percentile(replicates, 0.975)};
    return res;
}

const char* EstimateResult::csv_header() {
    return "estimand,tau_hat,se,ci90_lo,ci90_hi,ci95_lo,ci95_hi,distiller,stringency,"
           "tdm_size,seed,n_bootstrap";
}

std::string EstimateResult::csv_row() const {
    std::ostringstream out;
    char buf[64];
    auto fmt = [&](double v) {
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    out << estimand_name(estimand) << ',' << fmt(tau_hat) << ',' << fmt(bootstrap_se) << ','
        << fmt(ci90[0]) << ',' << fmt(ci90[1]) << ',' << fmt(ci95[0]) << ',' << fmt(ci95[1])
        << ',' << provenance.distiller << ',' << fmt(provenance.stringency) << ','
        << provenance.tdm_size << ',' << provenance.seed << ',' << n_bootstrap;
    return out.str();
}

Eigen::MatrixXd covariate_matrix(const Dataset& dataset) {
    if (dataset.units.empty()) throw data_error("empty dataset");
    const Eigen::Index d = static_cast<Eigen::Index>(dataset.units[0].x.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(dataset.units.size()), d);
    for (std::size_t i = 0; i < dataset.units.size(); ++i) {
        if (static_cast<Eigen::Index>(dataset.units[i].x.size()) != d)
            throw data_error("covariate dimension varies across units");
        for (Eigen::Index j = 0; j < d; ++j)
            x(static_cast<Eigen::Index>(i), j) = dataset.units[i].x[j];
    }
    return x;
}

std::vector<int> treatment_labels(const Dataset& dataset) {
    std::vector<int> t(dataset.units.size());
    for (std::size_t i = 0; i < dataset.units.size(); ++i) t[i] = dataset.units[i].t;
    return t;
}

Eigen::VectorXd outcome_vector(const Dataset& dataset) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(dataset.units.size()));
    for (std::size_t i = 0; i < dataset.units.size(); ++i)
        y[static_cast<Eigen::Index>(i)] = dataset.units[i].y;
    return y;
}

EstimateResult estimate_effect(const Dataset& dataset, const Eigen::MatrixXd* representation,
                               Estimand estimand, const PropensityConfig& cfg, int n_bootstrap,
                               std::uint64_t seed, const Provenance& provenance) {
    Eigen::MatrixXd x_raw = covariate_matrix(dataset);
    Eigen::VectorXd y = outcome_vector(dataset);
    std::vector<int> t = treatment_labels(dataset);
    const std::size_t n = dataset.units.size();

    // lambda is selected once on the full sample, then held fixed in the
    // bootstrap refits; fold assignment uses cfg.seed so that runs sharing a
    // representation family also share the model-selection path
    PropensityConfig fixed_cfg = cfg;
    if (cfg.lambda_policy == LambdaPolicy::cv) {
        Eigen::MatrixXd x_std = standardize_columns(x_raw);
        Eigen::Index text_cols = representation ? representation->cols() : 0;
        Eigen::MatrixXd features(x_std.rows(), x_std.cols() + text_cols);
        features.leftCols(x_std.cols()) = x_std;
        if (text_cols > 0) features.rightCols(text_cols) = *representation;
        fixed_cfg.lambda = select_lambda_cv(features, t, cfg.penalty, default_lambda_grid(),
                                            cfg.cv_folds, cfg.seed);
        fixed_cfg.lambda_policy = LambdaPolicy::fixed;
    }

    auto estimate_on = [&](const std::vector<int>& rows) {
        Eigen::MatrixXd x_sub(rows.size(), x_raw.cols());
        Eigen::VectorXd y_sub(static_cast<Eigen::Index>(rows.size()));
        std::vector<int> t_sub(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x_sub.row(static_cast<Eigen::Index>(i)) = x_raw.row(rows[i]);
            y_sub[static_cast<Eigen::Index>(i)] = y[rows[i]];
            t_sub[i] = t[static_cast<std::size_t>(rows[i])];
        }
        Eigen::MatrixXd rep_sub;
        const Eigen::MatrixXd* rep_ptr = nullptr;
        if (representation) {
            rep_sub.resize(rows.size(), representation->cols());
            for (std::size_t i = 0; i < rows.size(); ++i)
                rep_sub.row(static_cast<Eigen::Index>(i)) = representation->row(rows[i]);
            rep_ptr = &rep_sub;
        }
        Eigen::MatrixXd x_std = standardize_columns(x_sub);
        PropensityScores scores = fit_propensity(x_std, rep_ptr, t_sub, fixed_cfg);
        return estimand == Estimand::ate ? ipw_ate(y_sub, t_sub, scores.values)
                                         : ipw_att(y_sub, t_sub, scores.values);
    };

    std::vector<int> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);

    EstimateResult result;
    result.estimand = estimand;
    result.tau_hat = estimate_on(all);
    result.provenance = provenance;
    result.provenance.seed = seed;
    result.n_bootstrap = n_bootstrap;
    if (n_bootstrap >= 2) {
        BootstrapResult boot = bootstrap_se(estimate_on, n, n_bootstrap, seed);
        result.bootstrap_se = boot.se;
        result.ci90 = boot.ci90;
        result.ci95 = boot.ci95;
    }
    return result;
}

}  // namespace textdistill
