#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "textdistill/rng.hpp"

namespace textdistill {

enum class TopicLabel { t_pos, t_neg, u_pos, u_neg, general };

const char* topic_label_name(TopicLabel label);
std::optional<TopicLabel> topic_label_from_name(const std::string& name);

inline bool is_treatment_topic(TopicLabel l) {
    return l == TopicLabel::t_pos || l == TopicLabel::t_neg;
}
inline bool is_confounder_topic(TopicLabel l) {
    return l == TopicLabel::u_pos || l == TopicLabel::u_neg;
}

struct Passage {
    std::vector<std::string> tokens;  // nonempty
    std::optional<TopicLabel> topic_label;
    std::optional<int> prompt_id;

    bool operator==(const Passage&) const = default;
};

struct Document {
    std::string id;
    std::vector<Passage> passages;  // order is stable under serialization

    bool operator==(const Document&) const = default;
};

struct UnitRecord {
    std::string id;
    std::vector<double> x;
    std::optional<int> u;  // 0/1 when present
    int t = 0;             // 0/1
    double y = 0.0;
    std::string doc_id;

    bool operator==(const UnitRecord&) const = default;
};

// Units plus their documents; immutable after construction and safe for
// shared concurrent reads.
struct Dataset {
    std::vector<UnitRecord> units;
    std::vector<Document> documents;

    void build_index();
    // Referential integrity: every doc_id resolves to exactly one document.
    void validate() const;
    const Document& document_for(const UnitRecord& unit) const;
    const Document& document_by_id(const std::string& id) const;

    bool operator==(const Dataset& other) const {
        return units == other.units && documents == other.documents;
    }

private:
    std::unordered_map<std::string, std::size_t> doc_index_;
};

struct GeneratorConfig {
    int n_units = 0;
    int k_paragraphs = 20;
    // (p_u, p_t, p_general), must sum to 1
    std::array<double, 3> topic_probs{0.2, 0.2, 0.6};
    double shift_strength = 4.0;  // applied as log theta on topic keywords
    int keywords_per_topic = 8;
    int prompts_per_topic = 4;
    int paragraph_length = 40;

    // treatment model: t ~ Bernoulli(sigmoid(a.x + b_u*u + intercept))
    std::vector<double> t_slope{0.5, 0.5, 0.5};
    double t_confounder = 0.5;
    double t_intercept = 0.0;

    // outcome model: y ~ Normal(d.x + e_u*u + tau_true*t, sigma)
    std::vector<double> y_slope{1.0, 1.0, 1.0};
    double y_confounder = 2.5;
    double tau_true = 1.0;
    double y_sigma = 1.0;

    int background_vocab_size = 2000;
    std::uint64_t seed = 0;

    void validate() const;  // throws config_error
};

// Deterministic substitute for a neural language model: a Zipf-weighted
// background unigram distribution over synthetic wordforms plus all topic
// keywords. Non-general topics multiply keyword probabilities by
// exp(shift_strength) and renormalize.
class LanguageModel {
public:
    explicit LanguageModel(const GeneratorConfig& cfg);

    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<std::string>& keywords(TopicLabel topic) const;
    // prompt token sequences with "[COUNTRY]" placeholder left in place
    const std::vector<std::vector<std::string>>& prompt_templates(TopicLabel topic) const;
    const std::vector<std::string>& country_names() const;

    // unigram probabilities, background and topic-shifted
    std::vector<double> background_probs() const;
    std::vector<double> shifted_probs(TopicLabel topic) const;

    std::size_t vocab_size() const { return tokens_.size(); }

    // one token id from the (possibly shifted) distribution
    std::size_t sample_token(TopicLabel topic, Rng& rng) const;

private:
    std::vector<std::string> tokens_;
    std::array<std::vector<std::string>, 4> keywords_;  // t_pos, t_neg, u_pos, u_neg
    std::array<std::vector<std::vector<std::string>>, 4> prompts_;
    std::array<std::vector<double>, 5> cdfs_;  // per topic; general last
};

// prompt tokens (country substituted) followed by paragraph_length tokens
// from the shifted unigram distribution; GENERAL passages carry no prompt
Passage sample_passage(TopicLabel topic, const GeneratorConfig& cfg,
                       const LanguageModel& lm, Rng& rng);

// Ancestral sampling of units and documents. Each unit draws from an
// independent stream derived from (seed, unit index), so the output is
// deterministic and independent of generation order.
Dataset generate_dataset(const GeneratorConfig& cfg);

// --- serialization ----------------------------------------------------

// units CSV: header id,t,y,x_1..x_d[,u][,doc_id]; docs JSONL: one
// {"id":..., "passages":[...]} object per line
Dataset load_dataset(const std::string& units_path, const std::string& docs_path);
void save_dataset(const Dataset& dataset, const std::string& units_path,
                  const std::string& docs_path);

std::string units_to_csv(const Dataset& dataset);
std::string documents_to_jsonl(const Dataset& dataset);

}  // namespace textdistill
