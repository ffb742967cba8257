#include "textdistill/textrep.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "textdistill/errors.hpp"
#include "textdistill/rng.hpp"

namespace textdistill {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (c >= 'a' && c <= 'z') {
            cur += c;
        } else if (c >= 'A' && c <= 'Z') {
            cur += static_cast<char>(c - 'A' + 'a');
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

void Vocabulary::ensure_index() const {
    if (index_built_) return;
    for (std::size_t i = 0; i < terms.size(); ++i) index_[terms[i]] = static_cast<int>(i);
    index_built_ = true;
}

int Vocabulary::index_of(const std::string& term) const {
    ensure_index();
    auto it = index_.find(term);
    return it == index_.end() ? -1 : it->second;
}

const char* representation_kind_name(RepresentationKind kind) {
    switch (kind) {
        case RepresentationKind::tfidf_l2: return "TFIDF_L2";
        case RepresentationKind::counts: return "COUNTS";
        case RepresentationKind::topic_proportions: return "TOPIC_PROPORTIONS";
        case RepresentationKind::projected: return "PROJECTED";
    }
    return "COUNTS";
}

std::string Representation::to_csv(const std::vector<std::string>& unit_ids) const {
    std::ostringstream out;
    out << "id";
    for (const auto& label : feature_labels) out << ',' << label;
    out << '\n';
    char buf[64];
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        out << (r < static_cast<Eigen::Index>(unit_ids.size()) ? unit_ids[r]
                                                               : std::to_string(r));
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
            auto res = std::to_chars(buf, buf + sizeof buf, matrix(r, c));
            out << ',';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
    return out.str();
}

Vocabulary build_vocabulary(const std::vector<Document>& docs, int t) {
    if (t < 1) throw config_error("vocabulary size t must be >= 1");
    if (docs.empty()) throw data_error("cannot build a vocabulary from an empty corpus");

    // std::map keeps term iteration lexicographic, which makes the
    // frequency tie-break deterministic without a second sort key pass
    std::map<std::string, std::pair<long, long>> stats;  // term -> (freq, df)
    std::vector<const std::string*> seen;
    for (const auto& doc : docs) {
        std::map<std::string, long> local;
        for (const auto& p : doc.passages)
            for (const auto& tok : p.tokens) ++local[tok];
        for (const auto& [term, count] : local) {
            auto& s = stats[term];
            s.first += count;
            s.second += 1;
        }
    }

    std::vector<std::pair<std::string, std::pair<long, long>>> entries(stats.begin(),
                                                                       stats.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second.first > b.second.first; });

    Vocabulary vocab;
    vocab.corpus_size = static_cast<long>(docs.size());
    std::size_t keep = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(t));
    vocab.terms.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        vocab.terms.push_back(entries[i].first);
        vocab.term_freqs.push_back(entries[i].second.first);
        vocab.doc_freqs.push_back(entries[i].second.second);
    }
    return vocab;
}

UnitTokenLists all_passages(const Dataset& dataset) {
    UnitTokenLists lists(dataset.units.size());
    for (std::size_t i = 0; i < dataset.units.size(); ++i) {
        const Document& doc = dataset.document_for(dataset.units[i]);
        for (const auto& p : doc.passages) lists[i].push_back(&p.tokens);
    }
    return lists;
}

Representation count_representation(const UnitTokenLists& units, const Vocabulary& vocab) {
    Representation rep;
    rep.kind = RepresentationKind::counts;
    rep.feature_labels = vocab.terms;
    rep.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(units.size()),
                                       static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t i = 0; i < units.size(); ++i)
        for (const auto* tokens : units[i])
            for (const auto& tok : *tokens) {
                int j = vocab.index_of(tok);
                if (j >= 0) rep.matrix(static_cast<Eigen::Index>(i), j) += 1.0;
            }
    return rep;
}

static Eigen::VectorXd idf_vector(const Vocabulary& vocab) {
    Eigen::VectorXd idf(static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t j = 0; j < vocab.size(); ++j)
        idf[static_cast<Eigen::Index>(j)] =
            std::log((1.0 + vocab.corpus_size) / (1.0 + vocab.doc_freqs[j])) + 1.0;
    return idf;
}

Representation tfidf_representation(const UnitTokenLists& units, const Vocabulary& vocab) {
    Representation rep = count_representation(units, vocab);
    rep.kind = RepresentationKind::tfidf_l2;
    Eigen::VectorXd idf = idf_vector(vocab);
    for (Eigen::Index r = 0; r < rep.matrix.rows(); ++r) {
        rep.matrix.row(r) = rep.matrix.row(r).cwiseProduct(idf.transpose());
        double norm = rep.matrix.row(r).norm();
        if (norm > 0.0) rep.matrix.row(r) /= norm;
    }
    return rep;
}

Representation tfidf_representation(const Dataset& dataset, const Vocabulary& vocab) {
    return tfidf_representation(all_passages(dataset), vocab);
}

Eigen::VectorXd tfidf_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
    for (const auto& tok : tokens) {
        int j = vocab.index_of(tok);
        if (j >= 0) v[j] += 1.0;
    }
    Eigen::VectorXd idf = idf_vector(vocab);
    v = v.cwiseProduct(idf);
    double norm = v.norm();
    if (norm > 0.0) v /= norm;
    return v;
}

// --- LDA ----------------------------------------------------------------

namespace {

struct GibbsState {
    std::vector<std::vector<int>> doc_tokens;  // vocab ids per document
    std::vector<std::vector<int>> z;           // -1 = unassigned
    Eigen::MatrixXd nd;                        // docs x topics
    Eigen::MatrixXd nw;                        // topics x vocab
    Eigen::VectorXd nwsum;                     // per topic
};

std::uint64_t fingerprint_tokens(const std::vector<std::vector<int>>& doc_tokens) {
    SeedHasher h;
    h.add(static_cast<std::uint64_t>(doc_tokens.size()));
    for (const auto& doc : doc_tokens) {
        h.add(static_cast<std::uint64_t>(doc.size()));
        for (int id : doc) h.add(id);
    }
    return h.value();
}

std::vector<std::vector<int>> map_to_vocab_ids(const std::vector<Document>& docs,
                                               const Vocabulary& vocab) {
    std::vector<std::vector<int>> doc_tokens(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d)
        for (const auto& p : docs[d].passages)
            for (const auto& tok : p.tokens) {
                int id = vocab.index_of(tok);
                if (id >= 0) doc_tokens[d].push_back(id);
            }
    return doc_tokens;
}

// one full pass; tokens with z=-1 are assigned for the first time
void gibbs_sweep(GibbsState& s, int n_topics, double alpha, double beta, double vbeta,
                 Rng& rng) {
    std::vector<double> cdf(n_topics);
    std::vector<double> doc_counts(n_topics);  // contiguous copy of the nd row
    for (std::size_t d = 0; d < s.doc_tokens.size(); ++d) {
        for (int k = 0; k < n_topics; ++k) doc_counts[k] = s.nd(d, k);
        for (std::size_t i = 0; i < s.doc_tokens[d].size(); ++i) {
            int w = s.doc_tokens[d][i];
            int old = s.z[d][i];
            if (old >= 0) {
                doc_counts[old] -= 1.0;
                s.nw(old, w) -= 1.0;
                s.nwsum[old] -= 1.0;
            }
            const double* word_counts = &s.nw(0, w);  // column of a col-major matrix
            double acc = 0.0;
            for (int k = 0; k < n_topics; ++k) {
                acc += (doc_counts[k] + alpha) * (word_counts[k] + beta) / (s.nwsum[k] + vbeta);
                cdf[k] = acc;
            }
            int topic = static_cast<int>(rng.categorical_from_cdf(cdf));
            s.z[d][i] = topic;
            doc_counts[topic] += 1.0;
            s.nw(topic, w) += 1.0;
            s.nwsum[topic] += 1.0;
        }
        for (int k = 0; k < n_topics; ++k) s.nd(d, k) = doc_counts[k];
    }
}

Eigen::MatrixXd smoothed_proportions(const Eigen::MatrixXd& nd, double alpha) {
    const int n_topics = static_cast<int>(nd.cols());
    Eigen::MatrixXd props(nd.rows(), nd.cols());
    for (Eigen::Index d = 0; d < nd.rows(); ++d) {
        double total = nd.row(d).sum();
        for (int k = 0; k < n_topics; ++k)
            props(d, k) = (nd(d, k) + alpha) / (total + n_topics * alpha);
    }
    return props;
}

}  // namespace

TopicModel fit_lda(const std::vector<Document>& docs, const Vocabulary& vocab,
                   const LdaConfig& cfg) {
    if (cfg.n_topics < 2) throw config_error("fit_lda needs n_topics >= 2");
    if (cfg.sweeps < 0) throw config_error("fit_lda needs sweeps >= 0");
    if (cfg.alpha <= 0.0 || cfg.beta <= 0.0)
        throw config_error("fit_lda needs positive alpha and beta");
    if (docs.empty()) throw data_error("fit_lda: empty corpus");

    GibbsState s;
    s.doc_tokens = map_to_vocab_ids(docs, vocab);
    bool any = false;
    for (const auto& dt : s.doc_tokens) any = any || !dt.empty();
    if (!any) throw data_error("fit_lda: no document contains a vocabulary term");

    const int n_topics = cfg.n_topics;
    const int n_vocab = static_cast<int>(vocab.size());
    const double vbeta = n_vocab * cfg.beta;

    s.z.resize(s.doc_tokens.size());
    for (std::size_t d = 0; d < s.doc_tokens.size(); ++d)
        s.z[d].assign(s.doc_tokens[d].size(), -1);
    s.nd = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.doc_tokens.size()), n_topics);
    s.nw = Eigen::MatrixXd::Zero(n_topics, n_vocab);
    s.nwsum = Eigen::VectorXd::Zero(n_topics);

    Rng rng(derive_seed(cfg.seed, 0x1DA));
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep)
        gibbs_sweep(s, n_topics, cfg.alpha, cfg.beta, vbeta, rng);

    TopicModel model;
    model.n_topics = n_topics;
    model.alpha = cfg.alpha;
    model.beta = cfg.beta;
    model.gibbs_sweeps = cfg.sweeps;
    model.seed = cfg.seed;
    model.vocab = std::make_shared<Vocabulary>(vocab);
    model.fitted_doc_topic_counts = s.nd;
    model.corpus_fingerprint = fingerprint_tokens(s.doc_tokens);

    model.term_topic_weights = Eigen::MatrixXd(n_topics, n_vocab);
    for (int k = 0; k < n_topics; ++k)
        for (int w = 0; w < n_vocab; ++w)
            model.term_topic_weights(k, w) =
                (s.nw(k, w) + cfg.beta) / (s.nwsum[k] + vbeta);
    return model;
}

Representation infer_topics(const TopicModel& model, const std::vector<Document>& docs) {
    if (!model.vocab) throw data_error("infer_topics: model has no vocabulary");
    auto doc_tokens = map_to_vocab_ids(docs, *model.vocab);
    const int n_topics = model.n_topics;

    Representation rep;
    rep.kind = RepresentationKind::topic_proportions;
    rep.source_vocab = model.vocab;
    for (int k = 0; k < n_topics; ++k) rep.feature_labels.push_back("topic_" + std::to_string(k));

    if (fingerprint_tokens(doc_tokens) == model.corpus_fingerprint) {
        rep.matrix = smoothed_proportions(model.fitted_doc_topic_counts, model.alpha);
        return rep;
    }

    // fold-in: sample assignments with term-topic weights held fixed
    Eigen::MatrixXd nd =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(doc_tokens.size()), n_topics);
    std::vector<double> cdf(n_topics);
    for (std::size_t d = 0; d < doc_tokens.size(); ++d) {
        Rng rng(derive_seed(model.seed, 0xF01D ^ (d + 1)));
        std::vector<int> z(doc_tokens[d].size(), -1);
        int passes = std::max(1, model.gibbs_sweeps);
        for (int sweep = 0; sweep < passes; ++sweep) {
            for (std::size_t i = 0; i < doc_tokens[d].size(); ++i) {
                int w = doc_tokens[d][i];
                if (z[i] >= 0) nd(d, z[i]) -= 1.0;
                double acc = 0.0;
                for (int k = 0; k < n_topics; ++k) {
                    acc += (nd(d, k) + model.alpha) * model.term_topic_weights(k, w);
                    cdf[k] = acc;
                }
                int topic = static_cast<int>(rng.categorical_from_cdf(cdf));
                z[i] = topic;
                nd(d, topic) += 1.0;
            }
        }
    }
    rep.matrix = smoothed_proportions(nd, model.alpha);
    return rep;
}

}  // namespace textdistill
