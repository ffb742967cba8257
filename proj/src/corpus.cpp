#include "textdistill/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "textdistill/errors.hpp"
#include "textdistill/textrep.hpp"
#include <json.hpp>

namespace textdistill {

namespace {

// shifted topics in stream order: t_pos, t_neg, u_pos, u_neg
constexpr int kNumShifted = 4;

int shifted_index(TopicLabel topic) {
    switch (topic) {
        case TopicLabel::t_pos: return 0;
        case TopicLabel::t_neg: return 1;
        case TopicLabel::u_pos: return 2;
        case TopicLabel::u_neg: return 3;
        default: return -1;
    }
}

const std::array<std::vector<std::string>, 4> kKeywordStems = {{
    // treatment present: IMF program language
    {"austerity", "surcharge", "privatization", "conditionality",
     "adjustment", "deregulation", "stabilization", "tranche"},
    // treatment absent: disengagement language
    {"sovereignty", "repayment", "autonomy", "exit",
     "independence", "withdrawal", "selfreliance", "refusal"},
    // confounder positive: political will to reform
    {"commitment", "ownership", "consensus", "cooperation",
     "willingness", "resolve", "alignment", "determination"},
    // confounder negative: political resistance
    {"resistance", "unrest", "gridlock", "opposition",
     "distrust", "fragmentation", "instability", "defiance"},
}};

// Prompts are fixed strings, each containing at least one topic keyword.
// Within a topic the four prompts share one scaffold and differ only in the
// keyword pair. The T prompts and the U prompts share exactly one token
// ("reform"), so confounder passages have a small but nonzero similarity to
// the treatment exemplar corpus and aggressive thresholds genuinely
// over-distill.
const std::array<std::vector<std::string>, 4> kPromptStrings = {{
    {"the international monetary fund mandates austerity and surcharge reform conditions across [COUNTRY]",
     "the international monetary fund mandates privatization and conditionality reform conditions across [COUNTRY]",
     "the international monetary fund mandates adjustment and deregulation reform conditions across [COUNTRY]",
     "the international monetary fund mandates stabilization and tranche reform conditions across [COUNTRY]"},
    {"[COUNTRY] confirms sovereignty and repayment ending all involvement under the fund",
     "[COUNTRY] confirms autonomy and exit ending all involvement under the fund",
     "[COUNTRY] confirms independence and withdrawal ending all involvement under the fund",
     "[COUNTRY] confirms selfreliance and refusal ending all involvement under the fund"},
    {"cabinet ministers voice commitment plus ownership backing reform momentum inside [COUNTRY]",
     "cabinet ministers voice consensus plus cooperation backing reform momentum inside [COUNTRY]",
     "cabinet ministers voice willingness plus resolve backing reform momentum inside [COUNTRY]",
     "cabinet ministers voice alignment plus determination backing reform momentum inside [COUNTRY]"},
    {"deep political resistance plus unrest stall reform efforts inside [COUNTRY]",
     "deep political gridlock plus opposition stall reform efforts inside [COUNTRY]",
     "deep political distrust plus fragmentation stall reform efforts inside [COUNTRY]",
     "deep political instability plus defiance stall reform efforts inside [COUNTRY]"},
}};

const std::vector<std::string> kCountryNames = {
    "albania",   "argentina", "armenia",    "bangladesh", "benin",
    "bolivia",   "brazil",    "bulgaria",   "cambodia",   "cameroon",
    "chad",      "chile",     "colombia",   "ecuador",    "egypt",
    "ethiopia",  "georgia",   "ghana",      "greece",     "guatemala",
    "guinea",    "haiti",     "honduras",   "hungary",    "iceland",
    "indonesia", "jamaica",   "jordan",     "kenya",      "latvia",
    "liberia",   "madagascar","malawi",     "mali",       "mexico",
    "moldova",   "mongolia",  "morocco",    "mozambique", "nepal",
    "nicaragua", "niger",     "pakistan",   "peru",       "philippines",
    "romania",   "rwanda",    "senegal",    "serbia",     "somalia"};

const char kPlaceholder[] = "[COUNTRY]";

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

// synthetic background wordform: consonant-vowel syllables from base-20 digits
std::string background_wordform(int index) {
    static const char* kSyllables[] = {"ba", "de", "ki", "lo", "mu", "na", "pe", "ri",
                                       "so", "tu", "va", "ze", "fo", "ga", "hi", "ju",
                                       "ke", "la", "mo", "nu"};
    std::string w;
    int v = index;
    for (int s = 0; s < 3; ++s) {
        w += kSyllables[v % 20];
        v /= 20;
    }
    return w;
}

double format_guard(double v) {
    return std::isfinite(v) ? v : 0.0;  // never reached for valid data
}

std::string double_to_string(double v) {
    char buf[64];
    // shortest round-trip representation
    auto res = std::to_chars(buf, buf + sizeof buf, format_guard(v));
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, std::size_t line_no, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw data_error("line " + std::to_string(line_no) + ": cannot parse " +
                         std::string(what) + " value '" + s + "'");
    }
}

int parse_binary(const std::string& s, std::size_t line_no, const char* what) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw data_error("line " + std::to_string(line_no) + ": " + std::string(what) +
                     " must be 0 or 1, got '" + s + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

const char* topic_label_name(TopicLabel label) {
    switch (label) {
        case TopicLabel::t_pos: return "T_POS";
        case TopicLabel::t_neg: return "T_NEG";
        case TopicLabel::u_pos: return "U_POS";
        case TopicLabel::u_neg: return "U_NEG";
        case TopicLabel::general: return "GENERAL";
    }
    return "GENERAL";
}

std::optional<TopicLabel> topic_label_from_name(const std::string& name) {
    if (name == "T_POS") return TopicLabel::t_pos;
    if (name == "T_NEG") return TopicLabel::t_neg;
    if (name == "U_POS") return TopicLabel::u_pos;
    if (name == "U_NEG") return TopicLabel::u_neg;
    if (name == "GENERAL") return TopicLabel::general;
    return std::nullopt;
}

void Dataset::build_index() {
    doc_index_.clear();
    for (std::size_t i = 0; i < documents.size(); ++i) {
        auto [it, inserted] = doc_index_.emplace(documents[i].id, i);
        if (!inserted)
            throw data_error("duplicate document id '" + documents[i].id + "'");
    }
}

void Dataset::validate() const {
    for (const auto& unit : units) {
        if (unit.t != 0 && unit.t != 1)
            throw data_error("unit '" + unit.id + "': t must be 0 or 1");
        if (unit.u && *unit.u != 0 && *unit.u != 1)
            throw data_error("unit '" + unit.id + "': u must be 0 or 1");
        if (doc_index_.find(unit.doc_id) == doc_index_.end())
            throw data_error("unit '" + unit.id + "' references missing document '" +
                             unit.doc_id + "'");
    }
    for (const auto& doc : documents)
        for (const auto& p : doc.passages)
            if (p.tokens.empty())
                throw data_error("document '" + doc.id + "' contains an empty passage");
}

const Document& Dataset::document_for(const UnitRecord& unit) const {
    return document_by_id(unit.doc_id);
}

const Document& Dataset::document_by_id(const std::string& id) const {
    auto it = doc_index_.find(id);
    if (it == doc_index_.end())
        throw data_error("no document with id '" + id + "'");
    return documents[it->second];
}

void GeneratorConfig::validate() const {
    if (n_units <= 0) throw config_error("n_units must be positive");
    if (k_paragraphs <= 0) throw config_error("k_paragraphs must be positive");
    if (paragraph_length <= 0) throw config_error("paragraph_length must be positive");
    if (keywords_per_topic <= 0) throw config_error("keywords_per_topic must be positive");
    if (prompts_per_topic <= 0) throw config_error("prompts_per_topic must be positive");
    if (background_vocab_size <= 0) throw config_error("background_vocab_size must be positive");
    double sum = topic_probs[0] + topic_probs[1] + topic_probs[2];
    if (std::abs(sum - 1.0) > 1e-12)
        throw config_error("topic_probs must sum to 1 (got " + double_to_string(sum) + ")");
    for (double p : topic_probs)
        if (p < 0.0) throw config_error("topic_probs entries must be nonnegative");
    if (y_sigma <= 0.0) throw config_error("sigma must be positive");
    if (shift_strength < 0.0) throw config_error("shift_strength must be nonnegative");
    if (t_slope.size() != y_slope.size())
        throw config_error("t and y coefficient vectors must have equal dimension");
    if (t_slope.empty()) throw config_error("coefficient vectors must be nonempty");
}

LanguageModel::LanguageModel(const GeneratorConfig& cfg) {
    cfg.validate();

    for (int topic = 0; topic < kNumShifted; ++topic) {
        const auto& stems = kKeywordStems[topic];
        auto& kws = keywords_[topic];
        for (int k = 0; k < cfg.keywords_per_topic; ++k) {
            if (k < static_cast<int>(stems.size())) {
                kws.push_back(stems[k]);
            } else {
                // extra keywords beyond the curated eight: stem plus letter suffix
                std::string w = stems[k % stems.size()];
                w += static_cast<char>('b' + (k / stems.size() - 1) % 25);
                kws.push_back(w);
            }
        }
    }

    for (int topic = 0; topic < kNumShifted; ++topic) {
        auto& prompts = prompts_[topic];
        const auto& base = kPromptStrings[topic];
        for (int p = 0; p < cfg.prompts_per_topic; ++p) {
            std::vector<std::string> toks = split_ws(base[p % base.size()]);
            if (p >= static_cast<int>(base.size()))
                toks.push_back(keywords_[topic][p % keywords_[topic].size()]);
            prompts.push_back(std::move(toks));
        }
    }

    // reserved words never reused as background wordforms
    std::set<std::string> reserved(kCountryNames.begin(), kCountryNames.end());
    for (const auto& kws : keywords_) reserved.insert(kws.begin(), kws.end());
    for (const auto& topic_prompts : prompts_)
        for (const auto& prompt : topic_prompts)
            for (const auto& tok : prompt) reserved.insert(tok);

    tokens_.reserve(cfg.background_vocab_size + kNumShifted * cfg.keywords_per_topic);
    for (int i = 0; static_cast<int>(tokens_.size()) < cfg.background_vocab_size; ++i) {
        std::string w = background_wordform(i);
        if (reserved.count(w)) continue;
        tokens_.push_back(std::move(w));
    }
    // "reform" doubles as an ordinary mid-frequency word, so most of its
    // occurrences are background and only its guaranteed prompt occurrences
    // tie confounder passages to the exemplar corpus
    if (cfg.background_vocab_size > 20) tokens_[19] = "reform";
    for (const auto& kws : keywords_)
        for (const auto& kw : kws) tokens_.push_back(kw);

    // Zipf background weights by rank; keywords occupy the tail ranks.
    std::vector<double> weights(tokens_.size());
    for (std::size_t r = 0; r < tokens_.size(); ++r)
        weights[r] = 1.0 / static_cast<double>(r + 1);

    auto build_cdf = [&](const std::vector<double>& w) {
        std::vector<double> cdf(w.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            cdf[i] = acc;
        }
        return cdf;
    };

    double boost = std::exp(cfg.shift_strength);
    for (int topic = 0; topic < kNumShifted; ++topic) {
        std::vector<double> w = weights;
        std::size_t base = cfg.background_vocab_size +
                           static_cast<std::size_t>(topic) * cfg.keywords_per_topic;
        for (int k = 0; k < cfg.keywords_per_topic; ++k) w[base + k] *= boost;
        cdfs_[topic] = build_cdf(w);
    }
    cdfs_[kNumShifted] = build_cdf(weights);
}

const std::vector<std::string>& LanguageModel::keywords(TopicLabel topic) const {
    int idx = shifted_index(topic);
    if (idx < 0) throw config_error("GENERAL topic has no keywords");
    return keywords_[idx];
}

const std::vector<std::vector<std::string>>& LanguageModel::prompt_templates(
    TopicLabel topic) const {
    int idx = shifted_index(topic);
    if (idx < 0) throw config_error("GENERAL topic has no prompts");
    return prompts_[idx];
}

const std::vector<std::string>& LanguageModel::country_names() const {
    return kCountryNames;
}

std::vector<double> LanguageModel::background_probs() const {
    const auto& cdf = cdfs_[kNumShifted];
    std::vector<double> probs(cdf.size());
    double total = cdf.back();
    double prev = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        probs[i] = (cdf[i] - prev) / total;
        prev = cdf[i];
    }
    return probs;
}

std::vector<double> LanguageModel::shifted_probs(TopicLabel topic) const {
    int idx = shifted_index(topic);
    const auto& cdf = cdfs_[idx < 0 ? kNumShifted : idx];
    std::vector<double> probs(cdf.size());
    double total = cdf.back();
    double prev = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        probs[i] = (cdf[i] - prev) / total;
        prev = cdf[i];
    }
    return probs;
}

std::size_t LanguageModel::sample_token(TopicLabel topic, Rng& rng) const {
    int idx = shifted_index(topic);
    return rng.categorical_from_cdf(cdfs_[idx < 0 ? kNumShifted : idx]);
}

Passage sample_passage(TopicLabel topic, const GeneratorConfig& cfg,
                       const LanguageModel& lm, Rng& rng) {
    Passage passage;
    passage.topic_label = topic;
    if (topic != TopicLabel::general) {
        const auto& prompts = lm.prompt_templates(topic);
        int pid = static_cast<int>(rng.uniform_index(prompts.size()));
        passage.prompt_id = pid;
        const auto& country = lm.country_names()[rng.uniform_index(lm.country_names().size())];
        for (const auto& tok : prompts[pid])
            passage.tokens.push_back(tok == kPlaceholder ? country : tok);
    }
    for (int i = 0; i < cfg.paragraph_length; ++i)
        passage.tokens.push_back(lm.tokens()[lm.sample_token(topic, rng)]);
    return passage;
}

Dataset generate_dataset(const GeneratorConfig& cfg) {
    cfg.validate();
    LanguageModel lm(cfg);
    const int dx = static_cast<int>(cfg.t_slope.size());

    Dataset ds;
    ds.units.resize(cfg.n_units);
    ds.documents.resize(cfg.n_units);

    char idbuf[32];
    for (int i = 0; i < cfg.n_units; ++i) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        UnitRecord& unit = ds.units[i];
        Document& doc = ds.documents[i];

        std::snprintf(idbuf, sizeof idbuf, "unit_%06d", i);
        unit.id = idbuf;
        std::snprintf(idbuf, sizeof idbuf, "doc_%06d", i);
        unit.doc_id = idbuf;
        doc.id = unit.doc_id;

        unit.x.resize(dx);
        for (int d = 0; d < dx; ++d) unit.x[d] = rng.normal();
        int u = rng.bernoulli(0.5) ? 1 : 0;
        unit.u = u;

        double t_lin = cfg.t_intercept + cfg.t_confounder * u;
        for (int d = 0; d < dx; ++d) t_lin += cfg.t_slope[d] * unit.x[d];
        unit.t = rng.bernoulli(1.0 / (1.0 + std::exp(-t_lin))) ? 1 : 0;

        double y_mean = cfg.y_confounder * u + cfg.tau_true * unit.t;
        for (int d = 0; d < dx; ++d) y_mean += cfg.y_slope[d] * unit.x[d];
        unit.y = rng.normal(y_mean, cfg.y_sigma);

        TopicLabel u_topic = u == 1 ? TopicLabel::u_pos : TopicLabel::u_neg;
        TopicLabel t_topic = unit.t == 1 ? TopicLabel::t_pos : TopicLabel::t_neg;
        doc.passages.reserve(cfg.k_paragraphs);
        for (int j = 0; j < cfg.k_paragraphs; ++j) {
            double r = rng.uniform();
            TopicLabel topic;
            if (r < cfg.topic_probs[0])
                topic = u_topic;
            else if (r < cfg.topic_probs[0] + cfg.topic_probs[1])
                topic = t_topic;
            else
                topic = TopicLabel::general;
            doc.passages.push_back(sample_passage(topic, cfg, lm, rng));
        }
    }

    ds.build_index();
    ds.validate();
    return ds;
}

// --- serialization ----------------------------------------------------

std::string units_to_csv(const Dataset& dataset) {
    std::ostringstream out;
    const int dx = dataset.units.empty() ? 0 : static_cast<int>(dataset.units[0].x.size());
    bool has_u = !dataset.units.empty() && dataset.units[0].u.has_value();

    out << "id,t,y";
    for (int d = 1; d <= dx; ++d) out << ",x_" << d;
    if (has_u) out << ",u";
    out << ",doc_id\n";

    for (const auto& unit : dataset.units) {
        out << unit.id << ',' << unit.t << ',' << double_to_string(unit.y);
        for (double v : unit.x) out << ',' << double_to_string(v);
        if (has_u) out << ',' << (unit.u ? *unit.u : 0);
        out << ',' << unit.doc_id << '\n';
    }
    return out.str();
}

std::string documents_to_jsonl(const Dataset& dataset) {
    std::ostringstream out;
    for (const auto& doc : dataset.documents) {
        nlohmann::json j;
        j["id"] = doc.id;
        nlohmann::json passages = nlohmann::json::array();
        for (const auto& p : doc.passages) {
            nlohmann::json pj;
            std::string text;
            for (std::size_t i = 0; i < p.tokens.size(); ++i) {
                if (i) text += ' ';
                text += p.tokens[i];
            }
            pj["text"] = text;
            if (p.topic_label) pj["topic_label"] = topic_label_name(*p.topic_label);
            if (p.prompt_id) pj["prompt_id"] = *p.prompt_id;
            passages.push_back(std::move(pj));
        }
        j["passages"] = std::move(passages);
        out << j.dump() << '\n';
    }
    return out.str();
}

void save_dataset(const Dataset& dataset, const std::string& units_path,
                  const std::string& docs_path) {
    std::ofstream units(units_path, std::ios::binary);
    if (!units) throw data_error("cannot open '" + units_path + "' for writing");
    units << units_to_csv(dataset);
    std::ofstream docs(docs_path, std::ios::binary);
    if (!docs) throw data_error("cannot open '" + docs_path + "' for writing");
    docs << documents_to_jsonl(dataset);
}

Dataset load_dataset(const std::string& units_path, const std::string& docs_path) {
    std::ifstream units_in(units_path, std::ios::binary);
    if (!units_in) throw data_error("cannot open units file '" + units_path + "'");
    std::ifstream docs_in(docs_path, std::ios::binary);
    if (!docs_in) throw data_error("cannot open documents file '" + docs_path + "'");

    Dataset ds;
    std::string line;

    // header
    if (!std::getline(units_in, line))
        throw data_error(units_path + ": empty units file");
    auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "id" || header[1] != "t" || header[2] != "y")
        throw data_error(units_path + ": header must start with id,t,y");
    int dx = 0;
    std::size_t col = 3;
    while (col < header.size() && header[col] == "x_" + std::to_string(dx + 1)) {
        ++dx;
        ++col;
    }
    bool has_u = col < header.size() && header[col] == "u";
    if (has_u) ++col;
    bool has_doc_id = col < header.size() && header[col] == "doc_id";
    if (has_doc_id) ++col;
    if (col != header.size())
        throw data_error(units_path + ": unexpected column '" + header[col] + "'");

    std::size_t line_no = 1;
    while (std::getline(units_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        std::size_t expected = 3 + dx + (has_u ? 1 : 0) + (has_doc_id ? 1 : 0);
        if (fields.size() != expected)
            throw data_error(units_path + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(expected) + " fields, got " +
                             std::to_string(fields.size()));
        UnitRecord unit;
        unit.id = fields[0];
        unit.t = parse_binary(fields[1], line_no, "t");
        unit.y = parse_double(fields[2], line_no, "y");
        unit.x.resize(dx);
        for (int d = 0; d < dx; ++d) unit.x[d] = parse_double(fields[3 + d], line_no, "x");
        std::size_t f = 3 + dx;
        if (has_u) unit.u = parse_binary(fields[f++], line_no, "u");
        unit.doc_id = has_doc_id ? fields[f] : unit.id;
        ds.units.push_back(std::move(unit));
    }

    line_no = 0;
    while (std::getline(docs_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw data_error(docs_path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("id") || !j.contains("passages"))
            throw data_error(docs_path + ": line " + std::to_string(line_no) +
                             ": document needs 'id' and 'passages'");
        Document doc;
        doc.id = j["id"].get<std::string>();
        for (const auto& pj : j["passages"]) {
            Passage p;
            p.tokens = tokenize(pj.at("text").get<std::string>());
            if (p.tokens.empty())
                throw data_error(docs_path + ": line " + std::to_string(line_no) +
                                 ": empty passage in document '" + doc.id + "'");
            if (pj.contains("topic_label") && !pj["topic_label"].is_null()) {
                auto label = topic_label_from_name(pj["topic_label"].get<std::string>());
                if (!label)
                    throw data_error(docs_path + ": line " + std::to_string(line_no) +
                                     ": unknown topic_label");
                p.topic_label = label;
            }
            if (pj.contains("prompt_id") && !pj["prompt_id"].is_null())
                p.prompt_id = pj["prompt_id"].get<int>();
            doc.passages.push_back(std::move(p));
        }
        ds.documents.push_back(std::move(doc));
    }

    ds.build_index();
    ds.validate();
    return ds;
}

}  // namespace textdistill
