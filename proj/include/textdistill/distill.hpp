#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "textdistill/corpus.hpp"
#include "textdistill/mlcore.hpp"
#include "textdistill/textrep.hpp"

namespace textdistill {

enum class DistillMethod { similarity, distant_supervision, topic_removal, inlp };

const char* distill_method_name(DistillMethod method);
std::optional<DistillMethod> distill_method_from_name(const std::string& name);

// Assumption profile from the distiller taxonomy; carried as configuration
// metadata and surfaced in diagnostics.
struct AssumptionProfile {
    const char* level;  // "passage" or "representation"
    bool passage_separability;
    bool linear_representation_separability;
    bool passage_visibility;
    bool representation_visibility;
    bool treatment_description;
};

AssumptionProfile assumption_profile(DistillMethod method);

struct DistillerConfig {
    DistillMethod method = DistillMethod::similarity;
    double stringency = 0.5;  // threshold b, or integral K / N per method
    // method hyperparameters
    int k_folds = 5;              // distant supervision step (1)
    int tail_n = 0;               // 0 = automatic: max(10, ceil(2.5% of passages))
    double classifier_lambda = 1e-3;  // internal logistic L2 strength
    double inlp_lambda = 1e-3;        // INLP internal classifier ridge

    void validate(int n_topics = -1, int feature_dim = -1) const;
};

struct TreatmentExemplars {
    std::vector<std::vector<std::string>> passages;  // token sequences
};

// exemplars used in the synthetic experiments: the generator's treatment
// topic prompt strings, country placeholder left unsubstituted
TreatmentExemplars exemplars_from_prompts(const GeneratorConfig& cfg);

struct PassageScore {
    int unit_index = 0;
    int passage_index = 0;
    double score = 0.0;
    bool removed = false;
    std::optional<TopicLabel> label;
};

struct FeatureRank {
    int feature_index = 0;
    std::string label;
    double f_score = 0.0;
    bool removed = false;
};

struct DistillationOutcome {
    // passage-level methods: retained passage indices per unit's document
    std::vector<std::vector<int>> retained;
    // representation-level methods: transformed representation
    std::optional<Representation> representation;
    long removed_count = 0;
    std::vector<PassageScore> passage_scores;  // per-passage diagnostics
    std::vector<FeatureRank> feature_ranking;  // topic-removal diagnostics

    std::string diagnostics_csv() const;
};

// remove passages whose bag-of-words cosine similarity to the concatenated
// exemplar corpus exceeds b
DistillationOutcome similarity_distill(const Dataset& dataset,
                                       const TreatmentExemplars& exemplars, double b,
                                       const Vocabulary& vocab);

// distant supervision: document-level out-of-fold classifier -> passage
// probabilities; tail detector trained on the extreme passages; passages the
// detector scores above b are removed
DistillationOutcome distant_supervision_distill(const Dataset& dataset, double b, int k_folds,
                                                int tail_n, const Vocabulary& vocab,
                                                std::uint64_t seed,
                                                double classifier_lambda = 1e-3);

// drop the K topic columns most associated with the treatment labels;
// remaining columns are not renormalized
DistillationOutcome topic_removal_distill(const Representation& topic_representation,
                                          const std::vector<int>& labels, int K);

// Z = X * P_N with P_N from inlp_projection
DistillationOutcome inlp_distill(const Representation& representation,
                                 const std::vector<int>& labels, int n_iterations,
                                 std::uint64_t seed, double inlp_lambda = 1e-3);

// token lists restricted to the retained passages of each unit's document
UnitTokenLists retained_passages(const Dataset& dataset,
                                 const std::vector<std::vector<int>>& retained);

}  // namespace textdistill
