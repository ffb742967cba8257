#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace textdistill {

enum class Penalty { l1, l2 };

struct LogisticConfig {
    Penalty penalty = Penalty::l2;
    double lambda = 1e-2;
    double tol = 1e-6;
    int max_iter = 1000;
    std::uint64_t seed = 0;
};

struct LogisticModel {
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    Penalty penalty = Penalty::l2;
    double lambda = 0.0;
    bool converged = false;
    int n_iterations = 0;
    std::vector<double> objective_trace;  // penalized objective per iteration
};

// mean logistic loss + lambda * penalty(coefficients); intercept unpenalized.
// penalty is ||b||_1 for L1 and 0.5*||b||^2 for L2.
double penalized_objective(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                           const Eigen::VectorXd& coefficients, double intercept,
                           Penalty penalty, double lambda);

// gradient of the smooth part (mean logistic loss plus the L2 term when
// penalty is L2); used by the finite-difference check
void smooth_gradient(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                     const Eigen::VectorXd& coefficients, double intercept, Penalty penalty,
                     double lambda, Eigen::VectorXd& grad_coef, double& grad_intercept);

// Proximal gradient with backtracking line search; one algorithm covers both
// penalties and guarantees a non-increasing objective.
LogisticModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                           const LogisticConfig& cfg);

Eigen::VectorXd predict_proba(const LogisticModel& model, const Eigen::MatrixXd& X);

// critical L1 penalty: the smallest lambda at which all coefficients are 0
// (gradient bound at the intercept-only model)
double l1_lambda_max(const Eigen::MatrixXd& X, const std::vector<int>& labels);

// deterministic seeded fold assignment; fold id per unit
std::vector<int> kfold_assignments(std::size_t n, int k, std::uint64_t seed);

// every unit scored by a model trained on the other k-1 folds
Eigen::VectorXd kfold_oof_probabilities(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                        int k, const LogisticConfig& cfg, std::uint64_t seed);

// held-out log-likelihood maximizing lambda over a grid; ties prefer the
// smaller lambda
double select_lambda_cv(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                        Penalty penalty, const std::vector<double>& grid, int k,
                        std::uint64_t seed);

std::vector<double> default_lambda_grid();  // 1e-4 .. 1e1, 10 log-spaced points

// two-group ANOVA F statistic per feature; constant features map to 0,
// zero within-variance with nonzero between-variance maps to the largest
// finite double
Eigen::VectorXd anova_f_scores(const Eigen::MatrixXd& X, const std::vector<int>& labels);

// I - w w^T / (w^T w)
Eigen::MatrixXd rank_one_projector(const Eigen::VectorXd& w);

struct NullspaceStep {
    Eigen::MatrixXd projector;    // single-step projector
    Eigen::MatrixXd projected;    // X * projector
    Eigen::VectorXd direction;    // fitted classifier direction
};

NullspaceStep nullspace_step(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                             const LogisticConfig& cfg);

struct ProjectionMatrix {
    Eigen::MatrixXd matrix;  // symmetric, idempotent
    int n_iterations_applied = 0;
    Eigen::MatrixXd removed_directions;   // features x iterations, fitted directions
    Eigen::MatrixXd orthonormal_basis;    // features x iterations, removed subspace
};

// composition of per-iteration nullspace projectors, each fit on the
// previously projected data
ProjectionMatrix inlp_projection(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                 int n_iterations, const LogisticConfig& cfg,
                                 std::uint64_t seed);

// column-wise (x - mean) / sd computed on the given sample; zero-variance
// columns are centered only
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& X);

}  // namespace textdistill
