#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "textdistill/corpus.hpp"

namespace textdistill {

// lowercase alphabetic tokens, split on every non-alphabetic character
std::vector<std::string> tokenize(const std::string& text);

struct Vocabulary {
    // ordered by descending corpus frequency, ties lexicographic
    std::vector<std::string> terms;
    std::vector<long> doc_freqs;   // documents containing the term
    std::vector<long> term_freqs;  // total corpus occurrences
    long corpus_size = 0;          // number of documents

    int index_of(const std::string& term) const;  // -1 when absent
    std::size_t size() const { return terms.size(); }

private:
    mutable std::unordered_map<std::string, int> index_;
    mutable bool index_built_ = false;
    void ensure_index() const;
};

enum class RepresentationKind { tfidf_l2, counts, topic_proportions, projected };

const char* representation_kind_name(RepresentationKind kind);

// units x features numeric matrix with labelled columns
struct Representation {
    Eigen::MatrixXd matrix;
    std::vector<std::string> feature_labels;
    RepresentationKind kind = RepresentationKind::counts;
    std::shared_ptr<const Vocabulary> source_vocab;

    std::string to_csv(const std::vector<std::string>& unit_ids) const;
};

// top-t terms over the token sequences of all passages of all documents
Vocabulary build_vocabulary(const std::vector<Document>& docs, int t);

// Per-unit retained text as token-sequence lists; the default pipeline uses
// all passages, distillers pass filtered subsets.
using UnitTokenLists = std::vector<std::vector<const std::vector<std::string>*>>;

UnitTokenLists all_passages(const Dataset& dataset);

// counts of vocab terms per unit
Representation count_representation(const UnitTokenLists& units, const Vocabulary& vocab);

// idf(term) = ln((1+n_docs)/(1+doc_freq)) + 1 with n_docs and doc_freq taken
// from the vocabulary's fitting corpus; rows L2-normalized, all-zero rows
// left as zero
Representation tfidf_representation(const UnitTokenLists& units, const Vocabulary& vocab);
Representation tfidf_representation(const Dataset& dataset, const Vocabulary& vocab);

Eigen::VectorXd tfidf_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab);

struct LdaConfig {
    int n_topics = 20;
    // doc-topic prior large enough that documents mix freely over topics; a
    // sparse prior makes the sampler invent treatment-correlated background
    // topics on corpora whose documents are mostly shared background text
    double alpha = 5.0;
    double beta = 0.01;
    int sweeps = 200;
    std::uint64_t seed = 0;
};

struct TopicModel {
    int n_topics = 0;
    Eigen::MatrixXd term_topic_weights;  // topics x vocab, rows sum to 1
    double alpha = 0.1;
    double beta = 0.01;
    int gibbs_sweeps = 0;
    std::uint64_t seed = 0;

    std::shared_ptr<const Vocabulary> vocab;
    // final-state document-topic counts of the fitting corpus
    Eigen::MatrixXd fitted_doc_topic_counts;
    std::uint64_t corpus_fingerprint = 0;
};

// Collapsed Gibbs sampling for `sweeps` full passes. The first pass assigns
// topics progressively from the partial-state conditional, so sweeps=0 means
// an untouched (uniform-prior) state. Deterministic given seed.
TopicModel fit_lda(const std::vector<Document>& docs, const Vocabulary& vocab,
                   const LdaConfig& cfg);

// Topic proportions with Dirichlet smoothing; for the fitting corpus these
// come from the final sampler state, otherwise from a seeded fold-in pass
// with the term-topic weights held fixed.
Representation infer_topics(const TopicModel& model, const std::vector<Document>& docs);

}  // namespace textdistill
