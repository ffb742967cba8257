#include "textdistill/validation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "textdistill/errors.hpp"
#include "textdistill/rng.hpp"

namespace textdistill {

void ExperimentSpec::validate() const {
    if (n_batches < 1) throw config_error("n_batches must be positive");
    if (batch_size < 1) throw config_error("batch_size must be positive");
    if (tdm_size < 1) throw config_error("tdm_size must be positive");
    if (distillers.empty()) throw config_error("experiment needs at least one distiller");
    for (const auto& d : distillers)
        if (d.stringency_grid.size() < 3)
            throw config_error("preset grids need at least 3 points (lax/moderate/stringent)");
}

ExperimentSpec ExperimentSpec::defaults() {
    ExperimentSpec spec;
    spec.dgp.n_units = spec.batch_size;
    // grids calibrated to the synthetic corpus so that the first index
    // under-distills and the last index over-distills
    spec.distillers = {
        {DistillMethod::similarity, {0.35, 0.28, 0.2, 0.05, 0.02}},
        {DistillMethod::distant_supervision, {0.98, 0.6, 0.25, 0.08, 0.02}},
        {DistillMethod::inlp, {1, 2, 3}, 5, 0, 1e-3, 0.05},
        {DistillMethod::topic_removal, {0, 1, 3, 5, 8}},
    };
    // a compact topic space converged hard: the treatment scaffolds land in
    // single topics and the association ranking is stable batch to batch
    spec.lda.n_topics = 8;
    spec.lda.sweeps = 300;
    spec.propensity.lambda_policy = LambdaPolicy::fixed;
    spec.propensity.lambda = 1e-5;
    spec.propensity.max_iter = 8000;
    return spec;
}

const MetricsRow& ExperimentResult::row(const std::string& method,
                                        const std::string& preset) const {
    for (const auto& r : rows)
        if (r.method == method && r.preset == preset) return r;
    throw data_error("no metrics row for " + method + "/" + preset);
}

const std::vector<double>& ExperimentResult::batch_estimates(const std::string& method,
                                                             const std::string& preset) const {
    auto it = estimates.find({method, preset});
    if (it == estimates.end()) throw data_error("no estimates for " + method + "/" + preset);
    return it->second;
}

std::string ExperimentResult::to_csv() const {
    std::ostringstream out;
    char buf[64];
    auto fmt = [&](double v) {
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    out << "method,preset,bias,sd,rmse\n";
    for (const auto& r : rows)
        out << r.method << ',' << r.preset << ',' << fmt(r.bias) << ',' << fmt(r.sd) << ','
            << fmt(r.rmse) << '\n';
    return out.str();
}

double pooled_se(const std::vector<double>& a, const std::vector<double>& b) {
    auto var = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
    };
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    return std::sqrt(var(a) / na + var(b) / nb);
}

namespace {

// retained passage lists for a fixed score vector and threshold
std::vector<std::vector<int>> apply_threshold(const Dataset& dataset,
                                              const std::vector<PassageScore>& scores,
                                              double b) {
    std::vector<std::vector<int>> retained(dataset.units.size());
    for (const auto& s : scores)
        if (!(s.score > b)) retained[s.unit_index].push_back(s.passage_index);
    return retained;
}

double treatment_fraction_removed(const std::vector<PassageScore>& scores, double b) {
    long removed = 0, removed_t = 0;
    for (const auto& s : scores) {
        if (s.score > b) {
            ++removed;
            if (s.label && is_treatment_topic(*s.label)) ++removed_t;
        }
    }
    return removed > 0 ? static_cast<double>(removed_t) / static_cast<double>(removed) : 0.0;
}

}  // namespace

ExperimentResult run_bias_variance_experiment(const ExperimentSpec& spec) {
    spec.validate();

    ExperimentResult result;
    result.tau_true = spec.dgp.tau_true;

    auto preset_index = [](const std::vector<double>& grid, int preset) {
        if (preset == 0) return std::size_t{0};
        if (preset == 2) return grid.size() - 1;
        return grid.size() / 2;
    };

    auto record = [&](const std::string& method, const std::string& preset, double tau) {
        result.estimates[{method, preset}].push_back(tau);
    };

    int failed = 0;
    for (int batch = 0; batch < spec.n_batches; ++batch) {
        try {
            GeneratorConfig dgp = spec.dgp;
            dgp.n_units = spec.batch_size;
            dgp.seed = derive_seed(spec.seed, 0xBA7C4 + static_cast<std::uint64_t>(batch));
            Dataset data = generate_dataset(dgp);

            auto vocab = build_vocabulary(data.documents, spec.tdm_size);
            Representation tfidf = tfidf_representation(data, vocab);
            std::vector<int> labels = treatment_labels(data);

            PropensityConfig prop = spec.propensity;
            auto tau_for = [&](const Eigen::MatrixXd* rep) {
                return estimate_effect(data, rep, spec.estimand, prop, 0, dgp.seed).tau_hat;
            };

            // baselines: undistilled text, tabular only, oracle confounder
            record("baseline_text", "none", tau_for(&tfidf.matrix));
            record("baseline_tabular", "none", tau_for(nullptr));
            Eigen::MatrixXd u_col(data.units.size(), 1);
            for (std::size_t i = 0; i < data.units.size(); ++i)
                u_col(static_cast<Eigen::Index>(i), 0) =
                    data.units[i].u ? static_cast<double>(*data.units[i].u) : 0.0;
            record("oracle_u", "none", tau_for(&u_col));

            for (const auto& dspec : spec.distillers) {
                const std::string name = distill_method_name(dspec.method);
                switch (dspec.method) {
                    case DistillMethod::similarity: {
                        auto exemplars = exemplars_from_prompts(dgp);
                        auto outcome =
                            similarity_distill(data, exemplars, 0.5, vocab);  // scores only
                        for (int p = 0; p < 3; ++p) {
                            double b = dspec.stringency_grid[preset_index(dspec.stringency_grid, p)];
                            auto retained = apply_threshold(data, outcome.passage_scores, b);
                            Eigen::MatrixXd rep =
                                tfidf_representation(retained_passages(data, retained), vocab)
                                    .matrix;
                            record(name, preset_name(p), tau_for(&rep));
                        }
                        break;
                    }
                    case DistillMethod::distant_supervision: {
                        auto outcome = distant_supervision_distill(
                            data, 0.5, dspec.k_folds, dspec.tail_n, vocab,
                            derive_seed(dgp.seed, 0xD5), dspec.classifier_lambda);
                        for (int p = 0; p < 3; ++p) {
                            double b = dspec.stringency_grid[preset_index(dspec.stringency_grid, p)];
                            auto retained = apply_threshold(data, outcome.passage_scores, b);
                            Eigen::MatrixXd rep =
                                tfidf_representation(retained_passages(data, retained), vocab)
                                    .matrix;
                            record(name, preset_name(p), tau_for(&rep));
                            if (p == 1)
                                result.ds_removed_treatment_fraction.push_back(
                                    treatment_fraction_removed(outcome.passage_scores, b));
                        }
                        break;
                    }
                    case DistillMethod::topic_removal: {
                        LdaConfig lda = spec.lda;
                        lda.seed = derive_seed(dgp.seed, 0x1DA);
                        TopicModel model = fit_lda(data.documents, vocab, lda);
                        Representation topics = infer_topics(model, data.documents);
                        for (int p = 0; p < 3; ++p) {
                            int k = static_cast<int>(
                                dspec.stringency_grid[preset_index(dspec.stringency_grid, p)]);
                            auto outcome = topic_removal_distill(topics, labels, k);
                            record(name, preset_name(p), tau_for(&outcome.representation->matrix));
                        }
                        break;
                    }
                    case DistillMethod::inlp: {
                        int n_max = static_cast<int>(dspec.stringency_grid.back());
                        LogisticConfig inner;
                        inner.penalty = Penalty::l2;
                        inner.lambda = dspec.inlp_lambda;
                        ProjectionMatrix proj = inlp_projection(
                            tfidf.matrix, labels, n_max, inner, derive_seed(dgp.seed, 0x117));
                        for (int p = 0; p < 3; ++p) {
                            int n = static_cast<int>(
                                dspec.stringency_grid[preset_index(dspec.stringency_grid, p)]);
                            const auto basis = proj.orthonormal_basis.leftCols(n);
                            Eigen::MatrixXd z = tfidf.matrix;
                            z.noalias() -= (tfidf.matrix * basis) * basis.transpose();
                            record(name, preset_name(p), tau_for(&z));
                        }
                        break;
                    }
                }
            }
        } catch (const std::exception&) {
            ++failed;
            if (failed * 10 > spec.n_batches)
                throw data_error("bias-variance experiment: more than 10% of batches failed");
        }
    }
    result.failed_batches = failed;

    for (const auto& [key, taus] : result.estimates) {
        MetricsRow row;
        row.method = key.first;
        row.preset = key.second;
        row.n_batches = static_cast<int>(taus.size());
        double mean = 0.0;
        for (double tau : taus) mean += tau;
        mean /= static_cast<double>(taus.size());
        row.bias = mean - spec.dgp.tau_true;
        double ss = 0.0;
        for (double tau : taus) ss += (tau - mean) * (tau - mean);
        row.sd = taus.size() > 1 ? std::sqrt(ss / static_cast<double>(taus.size() - 1)) : 0.0;
        row.rmse = std::sqrt(row.bias * row.bias + row.sd * row.sd);
        result.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace textdistill
