#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "textdistill/corpus.hpp"
#include "textdistill/mlcore.hpp"
#include "textdistill/textrep.hpp"

namespace textdistill {

enum class Estimand { ate, att };

const char* estimand_name(Estimand e);
std::optional<Estimand> estimand_from_name(const std::string& name);

enum class LambdaPolicy { fixed, cv };

struct PropensityConfig {
    Penalty penalty = Penalty::l2;
    LambdaPolicy lambda_policy = LambdaPolicy::cv;
    double lambda = 1e-2;  // used when policy is fixed
    int cv_folds = 10;
    bool clip = false;  // off for the synthetic pipeline, on for real corpora
    double clip_lo = 0.01;
    double clip_hi = 0.99;
    double tol = 1e-6;
    int max_iter = 1000;
    std::uint64_t seed = 0;
};

struct PropensityScores {
    Eigen::VectorXd values;  // each in (0,1)
    LogisticModel model;
    bool used_text = false;
    bool clipped = false;
};

// logistic fit on [X | phi(W)] or X alone; covariates are expected to be
// standardized on the estimation sample
PropensityScores fit_propensity(const Eigen::MatrixXd& covariates,
                                const Eigen::MatrixXd* text_representation,
                                const std::vector<int>& treatment, const PropensityConfig& cfg);

// Horvitz-Thompson IPW: (1/n) sum [ T*Y/p - (1-T)*Y/(1-p) ]
double ipw_ate(const Eigen::VectorXd& y, const std::vector<int>& t, const Eigen::VectorXd& scores);

// mean over treated minus the p/(1-p)-weighted (normalized) control mean
double ipw_att(const Eigen::VectorXd& y, const std::vector<int>& t, const Eigen::VectorXd& scores);

struct BootstrapResult {
    double se = 0.0;
    std::array<double, 2> ci90{0.0, 0.0};
    std::array<double, 2> ci95{0.0, 0.0};
    int n_draws = 0;
    int n_discarded = 0;
};

// Unit-level resampling with replacement; documents travel with their units
// because the estimator closure receives unit indices. Replicates whose
// closure throws single_class_error are discarded; more than 20% discards is
// an error. Replicate r uses the stream derived from (seed, r), so results
// do not depend on execution order.
BootstrapResult bootstrap_se(const std::function<double(const std::vector<int>&)>& estimator,
                             std::size_t n_units, int n_draws, std::uint64_t seed);

struct Provenance {
    std::string distiller = "none";
    double stringency = 0.0;
    int tdm_size = 0;
    std::uint64_t seed = 0;
};

struct EstimateResult {
    Estimand estimand = Estimand::ate;
    double tau_hat = 0.0;
    double bootstrap_se = 0.0;
    std::array<double, 2> ci90{0.0, 0.0};
    std::array<double, 2> ci95{0.0, 0.0};
    int n_bootstrap = 0;
    Provenance provenance;

    static const char* csv_header();
    std::string csv_row() const;
};

// Full estimation pipeline for one representation: per-sample covariate
// standardization, propensity fit (lambda chosen once on the full sample
// when the policy is cv), point estimate, bootstrap refits.
EstimateResult estimate_effect(const Dataset& dataset, const Eigen::MatrixXd* representation,
                               Estimand estimand, const PropensityConfig& cfg, int n_bootstrap,
                               std::uint64_t seed, const Provenance& provenance = {});

Eigen::MatrixXd covariate_matrix(const Dataset& dataset);
std::vector<int> treatment_labels(const Dataset& dataset);
Eigen::VectorXd outcome_vector(const Dataset& dataset);

}  // namespace textdistill
