#include "textdistill/mlcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "textdistill/errors.hpp"
#include "textdistill/rng.hpp"

namespace textdistill {

namespace {

void check_labels(const std::vector<int>& labels, std::size_t n_rows) {
    if (labels.size() != n_rows) throw data_error("label count does not match row count");
    int pos = 0, neg = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw data_error("labels must be 0 or 1");
        (y == 1 ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0)
        throw single_class_error("labels contain a single class");
}

// numerically stable log(1 + exp(-s))
double log1p_exp_neg(double s) {
    if (s > 0.0) return std::log1p(std::exp(-s));
    return -s + std::log1p(std::exp(s));
}

double mean_logloss(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                    const Eigen::VectorXd& beta, double intercept) {
    Eigen::VectorXd score = X * beta;
    score.array() += intercept;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < score.size(); ++i) {
        double sign = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
        loss += log1p_exp_neg(sign * score[i]);
    }
    return loss / static_cast<double>(score.size());
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double penalized_objective(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                           const Eigen::VectorXd& coefficients, double intercept,
                           Penalty penalty, double lambda) {
    double obj = mean_logloss(X, labels, coefficients, intercept);
    if (penalty == Penalty::l1)
        obj += lambda * coefficients.lpNorm<1>();
    else
        obj += 0.5 * lambda * coefficients.squaredNorm();
    return obj;
}

void smooth_gradient(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                     const Eigen::VectorXd& coefficients, double intercept, Penalty penalty,
                     double lambda, Eigen::VectorXd& grad_coef, double& grad_intercept) {
    const double n = static_cast<double>(X.rows());
    Eigen::VectorXd score = X * coefficients;
    score.array() += intercept;
    Eigen::VectorXd resid(score.size());
    for (Eigen::Index i = 0; i < score.size(); ++i)
        resid[i] = sigmoid(score[i]) - static_cast<double>(labels[static_cast<std::size_t>(i)]);
    grad_coef = X.transpose() * resid / n;
    grad_intercept = resid.sum() / n;
    if (penalty == Penalty::l2) grad_coef += lambda * coefficients;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                           const LogisticConfig& cfg) {
    check_labels(labels, static_cast<std::size_t>(X.rows()));
    if (!X.allFinite()) throw data_error("fit_logistic: non-finite feature values");
    if (cfg.lambda < 0.0) throw config_error("lambda must be nonnegative");
    if (cfg.max_iter < 1) throw config_error("max_iter must be >= 1");

    const Eigen::Index d = X.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    double intercept = 0.0;

    LogisticModel model;
    model.penalty = cfg.penalty;
    model.lambda = cfg.lambda;
    model.objective_trace.reserve(32);

    // smooth part: loss (+ ridge term for L2); prox handles L1
    auto smooth_value = [&](const Eigen::VectorXd& b, double c) {
        double v = mean_logloss(X, labels, b, c);
        if (cfg.penalty == Penalty::l2) v += 0.5 * cfg.lambda * b.squaredNorm();
        return v;
    };
    auto full_value = [&](const Eigen::VectorXd& b, double c) {
        double v = smooth_value(b, c);
        if (cfg.penalty == Penalty::l1) v += cfg.lambda * b.lpNorm<1>();
        return v;
    };

    double step = 1.0;
    Eigen::VectorXd grad(d), cand(d), prev_beta(d), prev_grad(d);
    double prev_grad_intercept = 0.0, prev_intercept = 0.0;
    bool have_prev = false;
    double obj = full_value(beta, intercept);
    model.objective_trace.push_back(obj);

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        double grad_intercept;
        smooth_gradient(X, labels, beta, intercept, cfg.penalty, cfg.lambda, grad, grad_intercept);
        double f0 = smooth_value(beta, intercept);

        // Barzilai-Borwein step seed; backtracking keeps the descent property
        if (have_prev) {
            Eigen::VectorXd s = beta - prev_beta;
            Eigen::VectorXd g = grad - prev_grad;
            double si = intercept - prev_intercept;
            double gi = grad_intercept - prev_grad_intercept;
            double sg = s.dot(g) + si * gi;
            double gg = g.squaredNorm() + gi * gi;
            if (sg > 0.0 && gg > 0.0)
                step = std::clamp(sg / gg, 1e-8, 1e8);
        }
        prev_beta = beta;
        prev_grad = grad;
        prev_intercept = intercept;
        prev_grad_intercept = grad_intercept;
        have_prev = true;

        double cand_intercept = 0.0;
        while (true) {
            cand = beta - step * grad;
            if (cfg.penalty == Penalty::l1) {
                double thresh = step * cfg.lambda;
                for (Eigen::Index j = 0; j < d; ++j) {
                    double v = cand[j];
                    cand[j] = v > thresh ? v - thresh : (v < -thresh ? v + thresh : 0.0);
                }
            }
            cand_intercept = intercept - step * grad_intercept;

            Eigen::VectorXd diff = cand - beta;
            double diff_intercept = cand_intercept - intercept;
            double quad = f0 + grad.dot(diff) + grad_intercept * diff_intercept +
                          (diff.squaredNorm() + diff_intercept * diff_intercept) / (2.0 * step);
            if (smooth_value(cand, cand_intercept) <= quad + 1e-15) break;
            step *= 0.5;
            if (step < 1e-18) break;
        }

        double delta = std::max((cand - beta).lpNorm<Eigen::Infinity>(),
                                std::abs(cand_intercept - intercept));
        beta.swap(cand);
        intercept = cand_intercept;
        model.n_iterations = iter + 1;
        model.objective_trace.push_back(full_value(beta, intercept));

        if (delta < cfg.tol) {
            model.converged = true;
            break;
        }
    }

    model.coefficients = std::move(beta);
    model.intercept = intercept;
    return model;
}

Eigen::VectorXd predict_proba(const LogisticModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.coefficients.size())
        throw data_error("predict_proba: feature dimension mismatch");
    Eigen::VectorXd score = X * model.coefficients;
    score.array() += model.intercept;
    Eigen::VectorXd probs(score.size());
    for (Eigen::Index i = 0; i < score.size(); ++i) {
        // clamp away from the representable 0/1 saturation points
        probs[i] = std::min(1.0 - 1e-12, std::max(1e-12, sigmoid(score[i])));
    }
    return probs;
}

double l1_lambda_max(const Eigen::MatrixXd& X, const std::vector<int>& labels) {
    check_labels(labels, static_cast<std::size_t>(X.rows()));
    const double n = static_cast<double>(X.rows());
    double base_rate = 0.0;
    for (int y : labels) base_rate += y;
    base_rate /= n;
    Eigen::VectorXd resid(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        resid[i] = base_rate - static_cast<double>(labels[static_cast<std::size_t>(i)]);
    Eigen::VectorXd g = X.transpose() * resid / n;
    return g.lpNorm<Eigen::Infinity>();
}

std::vector<int> kfold_assignments(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw config_error("k-fold needs k >= 2");
    if (static_cast<std::size_t>(k) > n) throw config_error("k-fold needs k <= n");
    std::vector<int> assignment(n);
    std::vector<int> order = shuffled_indices(n, seed);
    for (std::size_t pos = 0; pos < n; ++pos)
        assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    return assignment;
}

Eigen::VectorXd kfold_oof_probabilities(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                        int k, const LogisticConfig& cfg, std::uint64_t seed) {
    check_labels(labels, static_cast<std::size_t>(X.rows()));
    const std::size_t n = labels.size();
    std::vector<int> fold = kfold_assignments(n, k, seed);
    Eigen::VectorXd oof(static_cast<Eigen::Index>(n));

    for (int f = 0; f < k; ++f) {
        std::vector<int> train_rows, test_rows;
        for (std::size_t i = 0; i < n; ++i)
            (fold[i] == f ? test_rows : train_rows).push_back(static_cast<int>(i));
        if (test_rows.empty()) continue;

        Eigen::MatrixXd Xtr(train_rows.size(), X.cols());
        std::vector<int> ytr(train_rows.size());
        int pos = 0, neg = 0;
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train_rows[i]);
            ytr[i] = labels[static_cast<std::size_t>(train_rows[i])];
            (ytr[i] == 1 ? pos : neg) += 1;
        }
        if (pos == 0 || neg == 0)
            throw data_error("cross-validation fold " + std::to_string(f) +
                             " has single-class training data; use fewer folds");

        LogisticModel m = fit_logistic(Xtr, ytr, cfg);
        for (int r : test_rows) {
            double z = X.row(r).dot(m.coefficients) + m.intercept;
            oof[r] = std::min(1.0 - 1e-12, std::max(1e-12, sigmoid(z)));
        }
    }
    return oof;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid(10);
    for (int i = 0; i < 10; ++i) grid[i] = std::pow(10.0, -4.0 + 5.0 * i / 9.0);
    return grid;
}

double select_lambda_cv(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                        Penalty penalty, const std::vector<double>& grid, int k,
                        std::uint64_t seed) {
    if (grid.empty()) throw config_error("lambda grid is empty");
    double best_lambda = grid.front();
    double best_ll = -std::numeric_limits<double>::infinity();
    // grid evaluated in ascending lambda order so ties keep the smaller value
    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    for (double lambda : sorted) {
        LogisticConfig cfg;
        cfg.penalty = penalty;
        cfg.lambda = lambda;
        Eigen::VectorXd oof = kfold_oof_probabilities(X, labels, k, cfg, seed);
        double ll = 0.0;
        for (Eigen::Index i = 0; i < oof.size(); ++i) {
            double p = oof[i];
            ll += labels[static_cast<std::size_t>(i)] == 1 ? std::log(p) : std::log(1.0 - p);
        }
        if (ll > best_ll) {
            best_ll = ll;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

Eigen::VectorXd anova_f_scores(const Eigen::MatrixXd& X, const std::vector<int>& labels) {
    check_labels(labels, static_cast<std::size_t>(X.rows()));
    const Eigen::Index n = X.rows();
    if (n < 3) throw data_error("anova_f_scores needs n >= 3");

    double n1 = 0.0;
    for (int y : labels) n1 += y;
    double n0 = static_cast<double>(n) - n1;

    Eigen::VectorXd f(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double sum0 = 0.0, sum1 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            (labels[static_cast<std::size_t>(i)] == 1 ? sum1 : sum0) += X(i, j);
        double m0 = sum0 / n0, m1 = sum1 / n1;
        double grand = (sum0 + sum1) / static_cast<double>(n);

        double ssw = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double dev = X(i, j) - (labels[static_cast<std::size_t>(i)] == 1 ? m1 : m0);
            ssw += dev * dev;
        }
        double ssb = n0 * (m0 - grand) * (m0 - grand) + n1 * (m1 - grand) * (m1 - grand);
        double sst = ssb + ssw;

        double scale = 0.0;  // magnitude reference for the degeneracy checks
        for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(X(i, j) - grand));
        double eps = 1e-20 * static_cast<double>(n) * std::max(1.0, scale * scale);

        if (sst <= eps) {
            f[j] = 0.0;  // constant feature: define 0/0 as 0
        } else if (ssw <= 1e-12 * sst) {
            f[j] = std::numeric_limits<double>::max();  // perfect separation sentinel
        } else {
            f[j] = ssb * (static_cast<double>(n) - 2.0) / ssw;
        }
    }
    return f;
}

Eigen::MatrixXd rank_one_projector(const Eigen::VectorXd& w) {
    double norm2 = w.squaredNorm();
    if (norm2 <= 0.0) throw data_error("rank_one_projector: zero direction");
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(w.size(), w.size());
    p.noalias() -= (w * w.transpose()) / norm2;
    return p;
}

NullspaceStep nullspace_step(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                             const LogisticConfig& cfg) {
    LogisticModel m = fit_logistic(X, labels, cfg);
    double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
    if (m.coefficients.norm() < 1e-10 * scale)
        throw data_error("nullspace_step: no separating direction");
    NullspaceStep step;
    step.direction = m.coefficients;
    step.projector = rank_one_projector(m.coefficients);
    step.projected = X * step.projector;
    return step;
}

ProjectionMatrix inlp_projection(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                 int n_iterations, const LogisticConfig& cfg,
                                 std::uint64_t seed) {
    const Eigen::Index d = X.cols();
    if (n_iterations < 1) throw config_error("inlp_projection needs n_iterations >= 1");
    if (n_iterations > d)
        throw config_error("inlp_projection: n_iterations exceeds feature dimension");

    LogisticConfig inner = cfg;
    inner.seed = seed;

    ProjectionMatrix result;
    result.removed_directions = Eigen::MatrixXd(d, n_iterations);
    Eigen::MatrixXd basis(d, n_iterations);  // orthonormalized removed directions

    Eigen::MatrixXd cur = X;
    for (int it = 0; it < n_iterations; ++it) {
        NullspaceStep step = nullspace_step(cur, labels, inner);
        result.removed_directions.col(it) = step.direction;

        // modified Gram-Schmidt against the directions removed so far
        Eigen::VectorXd v = step.direction;
        for (int j = 0; j < it; ++j) v -= basis.col(j).dot(v) * basis.col(j);
        double norm = v.norm();
        if (norm < 1e-12)
            throw data_error("inlp_projection: fitted direction is linearly dependent");
        basis.col(it) = v / norm;

        // rank-1 downdate of the data instead of a full matrix product
        Eigen::VectorXd proj = cur * basis.col(it);
        cur.noalias() -= proj * basis.col(it).transpose();
    }

    result.n_iterations_applied = n_iterations;
    result.orthonormal_basis = basis;
    result.matrix = Eigen::MatrixXd::Identity(d, d);
    result.matrix.noalias() -= basis * basis.transpose();
    return result;
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out = X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double mean = X.col(j).mean();
        double var = (X.col(j).array() - mean).square().sum() /
                     std::max<double>(1.0, static_cast<double>(X.rows()));
        double sd = std::sqrt(var);
        out.col(j).array() -= mean;
        if (sd > 0.0) out.col(j) /= sd;
    }
    return out;
}

}  // namespace textdistill
