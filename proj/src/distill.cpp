#include "textdistill/distill.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "textdistill/errors.hpp"
#include "textdistill/rng.hpp"

namespace textdistill {

const char* distill_method_name(DistillMethod method) {
    switch (method) {
        case DistillMethod::similarity: return "similarity";
        case DistillMethod::distant_supervision: return "distant_supervision";
        case DistillMethod::topic_removal: return "topic_removal";
        case DistillMethod::inlp: return "inlp";
    }
    return "similarity";
}

std::optional<DistillMethod> distill_method_from_name(const std::string& name) {
    if (name == "similarity") return DistillMethod::similarity;
    if (name == "distant_supervision") return DistillMethod::distant_supervision;
    if (name == "topic_removal") return DistillMethod::topic_removal;
    if (name == "inlp") return DistillMethod::inlp;
    return std::nullopt;
}

AssumptionProfile assumption_profile(DistillMethod method) {
    switch (method) {
        case DistillMethod::similarity:
            return {"passage", true, false, true, false, true};
        case DistillMethod::distant_supervision:
            return {"passage", true, false, true, false, false};
        case DistillMethod::topic_removal:
            return {"representation", false, true, false, true, false};
        case DistillMethod::inlp:
            return {"representation", false, true, false, true, false};
    }
    return {"passage", false, false, false, false, false};
}

void DistillerConfig::validate(int n_topics, int feature_dim) const {
    switch (method) {
        case DistillMethod::similarity:
        case DistillMethod::distant_supervision:
            if (stringency <= 0.0 || stringency >= 1.0)
                throw config_error(std::string(distill_method_name(method)) +
                                   ": threshold b must lie in (0,1)");
            break;
        case DistillMethod::topic_removal: {
            double k = stringency;
            if (k < 0.0 || k != std::floor(k))
                throw config_error("topic_removal: K must be a nonnegative integer");
            if (n_topics >= 0 && k > n_topics)
                throw config_error("topic_removal: K exceeds the number of topics");
            break;
        }
        case DistillMethod::inlp: {
            double n = stringency;
            if (n < 1.0 || n != std::floor(n))
                throw config_error("inlp: N must be a positive integer");
            if (feature_dim >= 0 && n > feature_dim)
                throw config_error("inlp: N exceeds the feature dimension");
            break;
        }
    }
    if (k_folds < 2) throw config_error("k_folds must be >= 2");
}

TreatmentExemplars exemplars_from_prompts(const GeneratorConfig& cfg) {
    LanguageModel lm(cfg);
    TreatmentExemplars ex;
    for (TopicLabel topic : {TopicLabel::t_pos, TopicLabel::t_neg})
        for (const auto& prompt : lm.prompt_templates(topic)) {
            std::vector<std::string> toks;
            for (const auto& tok : prompt)
                if (tok != "[COUNTRY]") toks.push_back(tok);
            ex.passages.push_back(std::move(toks));
        }
    return ex;
}

std::string DistillationOutcome::diagnostics_csv() const {
    std::ostringstream out;
    char buf[64];
    auto fmt = [&](double v) {
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    if (!passage_scores.empty()) {
        out << "unit_index,passage_index,score,removed,topic_label\n";
        for (const auto& s : passage_scores) {
            out << s.unit_index << ',' << s.passage_index << ',' << fmt(s.score) << ','
                << (s.removed ? 1 : 0) << ','
                << (s.label ? topic_label_name(*s.label) : "") << '\n';
        }
    } else {
        out << "feature_index,label,f_score,removed\n";
        for (const auto& r : feature_ranking)
            out << r.feature_index << ',' << r.label << ',' << fmt(r.f_score) << ','
                << (r.removed ? 1 : 0) << '\n';
    }
    return out.str();
}

namespace {

Eigen::VectorXd count_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
    for (const auto& tok : tokens) {
        int j = vocab.index_of(tok);
        if (j >= 0) v[j] += 1.0;
    }
    return v;
}

struct FlatPassage {
    int unit_index;
    int passage_index;
    const Passage* passage;
};

std::vector<FlatPassage> flatten_passages(const Dataset& dataset) {
    std::vector<FlatPassage> flat;
    for (std::size_t i = 0; i < dataset.units.size(); ++i) {
        const Document& doc = dataset.document_for(dataset.units[i]);
        for (std::size_t j = 0; j < doc.passages.size(); ++j)
            flat.push_back({static_cast<int>(i), static_cast<int>(j), &doc.passages[j]});
    }
    return flat;
}

DistillationOutcome finalize_passage_outcome(const Dataset& dataset,
                                             const std::vector<FlatPassage>& flat,
                                             const std::vector<double>& scores, double b) {
    DistillationOutcome out;
    out.retained.resize(dataset.units.size());
    out.passage_scores.reserve(flat.size());
    for (std::size_t p = 0; p < flat.size(); ++p) {
        bool removed = scores[p] > b;
        if (removed)
            ++out.removed_count;
        else
            out.retained[flat[p].unit_index].push_back(flat[p].passage_index);
        out.passage_scores.push_back({flat[p].unit_index, flat[p].passage_index, scores[p],
                                      removed, flat[p].passage->topic_label});
    }
    return out;
}

}  // namespace

DistillationOutcome similarity_distill(const Dataset& dataset,
                                       const TreatmentExemplars& exemplars, double b,
                                       const Vocabulary& vocab) {
    if (exemplars.passages.empty())
        throw config_error("similarity_distill: treatment exemplars are empty");
    if (b <= 0.0 || b >= 1.0) throw config_error("similarity threshold b must lie in (0,1)");

    // C_T: concatenation of all exemplar passages
    std::vector<std::string> concat;
    for (const auto& p : exemplars.passages) concat.insert(concat.end(), p.begin(), p.end());
    Eigen::VectorXd c = count_vector(concat, vocab);
    double c_norm = c.norm();

    auto flat = flatten_passages(dataset);
    std::vector<double> scores(flat.size(), 0.0);
    for (std::size_t p = 0; p < flat.size(); ++p) {
        Eigen::VectorXd v = count_vector(flat[p].passage->tokens, vocab);
        double v_norm = v.norm();
        scores[p] = (v_norm > 0.0 && c_norm > 0.0) ? v.dot(c) / (v_norm * c_norm) : 0.0;
    }
    return finalize_passage_outcome(dataset, flat, scores, b);
}

DistillationOutcome distant_supervision_distill(const Dataset& dataset, double b, int k_folds,
                                                int tail_n, const Vocabulary& vocab,
                                                std::uint64_t seed, double classifier_lambda) {
    if (b <= 0.0 || b >= 1.0) throw config_error("distant supervision threshold b must lie in (0,1)");
    auto flat = flatten_passages(dataset);
    if (tail_n <= 0)
        tail_n = std::max<int>(10, static_cast<int>(std::ceil(0.025 * flat.size())));
    if (static_cast<long>(flat.size()) < 4L * tail_n)
        throw data_error("distant_supervision_distill: needs at least 4*tail_n passages");

    std::vector<int> labels(dataset.units.size());
    for (std::size_t i = 0; i < dataset.units.size(); ++i) labels[i] = dataset.units[i].t;

    LogisticConfig clf;
    clf.penalty = Penalty::l2;
    clf.lambda = classifier_lambda;

    // (1) document-level model, passages scored out of fold
    Eigen::MatrixXd doc_rep = tfidf_representation(dataset, vocab).matrix;
    {
        int pos = 0, neg = 0;
        for (int y : labels) (y == 1 ? pos : neg) += 1;
        if (pos == 0 || neg == 0)
            throw single_class_error("distant_supervision_distill: single-class documents");
    }
    std::vector<int> fold = kfold_assignments(labels.size(), k_folds, derive_seed(seed, 1));

    std::vector<double> passage_prob(flat.size(), 0.0);
    Eigen::MatrixXd passage_rep(static_cast<Eigen::Index>(flat.size()),
                                static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t p = 0; p < flat.size(); ++p)
        passage_rep.row(static_cast<Eigen::Index>(p)) =
            tfidf_vector(flat[p].passage->tokens, vocab).transpose();

    for (int f = 0; f < k_folds; ++f) {
        std::vector<int> train_rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (fold[i] != f) train_rows.push_back(static_cast<int>(i));
        Eigen::MatrixXd Xtr(train_rows.size(), doc_rep.cols());
        std::vector<int> ytr(train_rows.size());
        int pos = 0, neg = 0;
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            Xtr.row(static_cast<Eigen::Index>(i)) = doc_rep.row(train_rows[i]);
            ytr[i] = labels[static_cast<std::size_t>(train_rows[i])];
            (ytr[i] == 1 ? pos : neg) += 1;
        }
        if (pos == 0 || neg == 0)
            throw data_error("distant_supervision_distill: fold " + std::to_string(f) +
                             " has single-class training documents");
        LogisticModel m = fit_logistic(Xtr, ytr, clf);
        for (std::size_t p = 0; p < flat.size(); ++p)
            if (fold[static_cast<std::size_t>(flat[p].unit_index)] == f) {
                double z = passage_rep.row(static_cast<Eigen::Index>(p)).dot(m.coefficients) +
                           m.intercept;
                passage_prob[p] = 1.0 / (1.0 + std::exp(-z));
            }
    }

    // (2) tails: tail_n closest to 0 plus tail_n closest to 1; ties by index
    std::vector<int> order(flat.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int bdx) {
        if (passage_prob[a] != passage_prob[bdx]) return passage_prob[a] < passage_prob[bdx];
        return a < bdx;
    });
    std::vector<char> is_tail(flat.size(), 0);
    for (int i = 0; i < tail_n; ++i) is_tail[order[i]] = 1;
    for (int i = 0; i < tail_n; ++i) is_tail[order[order.size() - 1 - i]] = 1;

    std::vector<int> remainder;
    for (std::size_t p = 0; p < flat.size(); ++p)
        if (!is_tail[p]) remainder.push_back(static_cast<int>(p));

    // seeded uniform sample without replacement
    Rng rng(derive_seed(seed, 2));
    int want = std::min<int>(2 * tail_n, static_cast<int>(remainder.size()));
    for (int i = 0; i < want; ++i) {
        std::size_t j = i + rng.uniform_index(remainder.size() - i);
        std::swap(remainder[i], remainder[j]);
    }

    // (3) tail detector
    std::vector<int> train_pass;
    std::vector<int> train_labels;
    for (std::size_t p = 0; p < flat.size(); ++p)
        if (is_tail[p]) {
            train_pass.push_back(static_cast<int>(p));
            train_labels.push_back(1);
        }
    for (int i = 0; i < want; ++i) {
        train_pass.push_back(remainder[i]);
        train_labels.push_back(0);
    }
    Eigen::MatrixXd Xdet(train_pass.size(), passage_rep.cols());
    for (std::size_t i = 0; i < train_pass.size(); ++i)
        Xdet.row(static_cast<Eigen::Index>(i)) = passage_rep.row(train_pass[i]);
    LogisticModel detector = fit_logistic(Xdet, train_labels, clf);

    // (4) every passage scored by the detector
    std::vector<double> scores(flat.size());
    for (std::size_t p = 0; p < flat.size(); ++p) {
        double z = passage_rep.row(static_cast<Eigen::Index>(p)).dot(detector.coefficients) +
                   detector.intercept;
        scores[p] = 1.0 / (1.0 + std::exp(-z));
    }
    return finalize_passage_outcome(dataset, flat, scores, b);
}

DistillationOutcome topic_removal_distill(const Representation& topic_representation,
                                          const std::vector<int>& labels, int K) {
    if (topic_representation.kind != RepresentationKind::topic_proportions)
        throw config_error("topic_removal_distill expects a TOPIC_PROPORTIONS representation");
    const int n_topics = static_cast<int>(topic_representation.matrix.cols());
    if (K < 0 || K > n_topics)
        throw config_error("topic_removal_distill: K must lie in {0..n_topics}");

    DistillationOutcome out;

    std::vector<int> rank(n_topics);
    std::iota(rank.begin(), rank.end(), 0);
    Eigen::VectorXd f;
    if (!labels.empty()) {
        f = anova_f_scores(topic_representation.matrix, labels);
        // descending F, ties keep the lower topic index
        std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return f[a] > f[b]; });
    } else {
        f = Eigen::VectorXd::Zero(n_topics);
    }

    std::vector<char> removed(n_topics, 0);
    for (int i = 0; i < K; ++i) removed[rank[i]] = 1;
    for (int i = 0; i < n_topics; ++i) {
        int topic = rank[i];
        out.feature_ranking.push_back({topic, topic_representation.feature_labels[topic],
                                       f[topic], removed[topic] != 0});
    }
    out.removed_count = K;

    if (K == 0) {
        out.representation = topic_representation;  // identity
        return out;
    }

    Representation rep;
    rep.kind = RepresentationKind::projected;
    rep.source_vocab = topic_representation.source_vocab;
    rep.matrix = Eigen::MatrixXd(topic_representation.matrix.rows(), n_topics - K);
    Eigen::Index col = 0;
    for (int j = 0; j < n_topics; ++j)
        if (!removed[j]) {
            rep.matrix.col(col++) = topic_representation.matrix.col(j);
            rep.feature_labels.push_back(topic_representation.feature_labels[j]);
        }
    out.representation = std::move(rep);
    return out;
}

DistillationOutcome inlp_distill(const Representation& representation,
                                 const std::vector<int>& labels, int n_iterations,
                                 std::uint64_t seed, double inlp_lambda) {
    if (representation.kind != RepresentationKind::tfidf_l2 &&
        representation.kind != RepresentationKind::counts)
        throw config_error("inlp_distill expects a TFIDF_L2 or COUNTS representation");

    LogisticConfig cfg;
    cfg.penalty = Penalty::l2;
    cfg.lambda = inlp_lambda;
    ProjectionMatrix p = inlp_projection(representation.matrix, labels, n_iterations, cfg, seed);

    DistillationOutcome out;
    Representation rep;
    rep.kind = RepresentationKind::projected;
    rep.feature_labels = representation.feature_labels;
    rep.source_vocab = representation.source_vocab;
    rep.matrix = representation.matrix * p.matrix;
    out.representation = std::move(rep);
    out.removed_count = n_iterations;
    for (int i = 0; i < n_iterations; ++i)
        out.feature_ranking.push_back({i, "direction_" + std::to_string(i), 0.0, true});
    return out;
}

UnitTokenLists retained_passages(const Dataset& dataset,
                                 const std::vector<std::vector<int>>& retained) {
    UnitTokenLists lists(dataset.units.size());
    for (std::size_t i = 0; i < dataset.units.size(); ++i) {
        const Document& doc = dataset.document_for(dataset.units[i]);
        for (int j : retained[i]) lists[i].push_back(&doc.passages[j].tokens);
    }
    return lists;
}

}  // namespace textdistill
