#include "textdistill/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "textdistill/errors.hpp"

namespace textdistill {

namespace {

[[noreturn]] void toml_fail(std::size_t line_no, const std::string& msg) {
    throw config_error("toml line " + std::to_string(line_no) + ": " + msg);
}

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// scalar or array token -> json value
nlohmann::json parse_toml_value(const std::string& raw, std::size_t line_no) {
    std::string v = strip(raw);
    if (v.empty()) toml_fail(line_no, "missing value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') toml_fail(line_no, "unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                ++i;
                switch (v[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: toml_fail(line_no, "unsupported escape");
                }
            } else {
                out += v[i];
            }
        }
        return out;
    }
    if (v.front() == '[') {
        if (v.back() != ']') toml_fail(line_no, "unterminated array");
        nlohmann::json arr = nlohmann::json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string cur;
        int depth = 0;
        bool in_str = false;
        for (char c : inner) {
            if (c == '"') in_str = !in_str;
            if (!in_str) {
                if (c == '[') ++depth;
                if (c == ']') --depth;
                if (c == ',' && depth == 0) {
                    if (!strip(cur).empty()) arr.push_back(parse_toml_value(cur, line_no));
                    cur.clear();
                    continue;
                }
            }
            cur += c;
        }
        if (!strip(cur).empty()) arr.push_back(parse_toml_value(cur, line_no));
        return arr;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    // number: integer if it parses without '.', 'e'
    bool is_float = v.find('.') != std::string::npos || v.find('e') != std::string::npos ||
                    v.find('E') != std::string::npos;
    try {
        std::size_t pos = 0;
        if (is_float) {
            double d = std::stod(v, &pos);
            if (pos != v.size()) toml_fail(line_no, "malformed number '" + v + "'");
            return d;
        }
        long long n = std::stoll(v, &pos);
        if (pos != v.size()) toml_fail(line_no, "malformed number '" + v + "'");
        return n;
    } catch (const config_error&) {
        throw;
    } catch (const std::exception&) {
        toml_fail(line_no, "cannot parse value '" + v + "'");
    }
}

}  // namespace

nlohmann::json parse_toml(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    nlohmann::json* array_elem = nullptr;

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments outside strings
        std::string code;
        bool in_str = false;
        for (char c : line) {
            if (c == '"') in_str = !in_str;
            if (c == '#' && !in_str) break;
            code += c;
        }
        code = strip(code);
        if (code.empty()) continue;

        if (code.rfind("[[", 0) == 0) {  // array of tables
            if (code.size() < 5 || code.substr(code.size() - 2) != "]]")
                toml_fail(line_no, "malformed table array header");
            std::string name = strip(code.substr(2, code.size() - 4));
            if (name.empty()) toml_fail(line_no, "empty table array name");
            if (!root.contains(name)) root[name] = nlohmann::json::array();
            root[name].push_back(nlohmann::json::object());
            array_elem = &root[name].back();
            table = array_elem;
            continue;
        }
        if (code.front() == '[') {
            if (code.back() != ']') toml_fail(line_no, "malformed table header");
            std::string name = strip(code.substr(1, code.size() - 2));
            if (name.empty()) toml_fail(line_no, "empty table name");
            array_elem = nullptr;
            nlohmann::json* t = &root;
            std::size_t start = 0;
            while (start <= name.size()) {
                std::size_t dot = name.find('.', start);
                std::string part = strip(name.substr(
                    start, dot == std::string::npos ? std::string::npos : dot - start));
                if (part.empty()) toml_fail(line_no, "empty table name component");
                if (!t->contains(part)) (*t)[part] = nlohmann::json::object();
                t = &(*t)[part];
                if (dot == std::string::npos) break;
                start = dot + 1;
            }
            table = t;
            continue;
        }

        std::size_t eq = std::string::npos;
        in_str = false;
        for (std::size_t i = 0; i < code.size(); ++i) {
            if (code[i] == '"') in_str = !in_str;
            if (code[i] == '=' && !in_str) {
                eq = i;
                break;
            }
        }
        if (eq == std::string::npos) toml_fail(line_no, "expected key = value");
        std::string key = strip(code.substr(0, eq));
        if (key.empty()) toml_fail(line_no, "empty key");
        if (key.front() == '"' && key.back() == '"' && key.size() >= 2)
            key = key.substr(1, key.size() - 2);
        (*table)[key] = parse_toml_value(code.substr(eq + 1), line_no);
    }
    return root;
}

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw config_error(path + ": " + e.what());
        }
    }
    try {
        return parse_toml(text);
    } catch (const config_error& e) {
        throw config_error(path + ": " + e.what());
    }
}

namespace {

double get_num(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw config_error(std::string(key) + " must be a number");
    return j[key].get<double>();
}

int get_int(const nlohmann::json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw config_error(std::string(key) + " must be an integer");
    return j[key].get<int>();
}

std::vector<double> get_vec(const nlohmann::json& j, const char* key,
                            std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_array()) throw config_error(std::string(key) + " must be an array");
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number()) throw config_error(std::string(key) + " must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig cfg;
    cfg.n_units = get_int(j, "n_units", cfg.n_units);
    cfg.k_paragraphs = get_int(j, "k_paragraphs", cfg.k_paragraphs);
    auto probs = get_vec(j, "topic_probs",
                         {cfg.topic_probs[0], cfg.topic_probs[1], cfg.topic_probs[2]});
    if (probs.size() != 3) throw config_error("topic_probs must have 3 entries (p_u,p_t,p_general)");
    cfg.topic_probs = {probs[0], probs[1], probs[2]};
    cfg.shift_strength = get_num(j, "shift_strength", cfg.shift_strength);
    cfg.keywords_per_topic = get_int(j, "keywords_per_topic", cfg.keywords_per_topic);
    cfg.prompts_per_topic = get_int(j, "prompts_per_topic", cfg.prompts_per_topic);
    cfg.paragraph_length = get_int(j, "paragraph_length", cfg.paragraph_length);
    cfg.t_slope = get_vec(j, "t_slope", cfg.t_slope);
    cfg.t_confounder = get_num(j, "t_confounder", cfg.t_confounder);
    cfg.t_intercept = get_num(j, "t_intercept", cfg.t_intercept);
    cfg.y_slope = get_vec(j, "y_slope", cfg.y_slope);
    cfg.y_confounder = get_num(j, "y_confounder", cfg.y_confounder);
    cfg.tau_true = get_num(j, "tau_true", cfg.tau_true);
    cfg.y_sigma = get_num(j, "sigma", cfg.y_sigma);
    cfg.background_vocab_size = get_int(j, "background_vocab_size", cfg.background_vocab_size);
    cfg.seed = static_cast<std::uint64_t>(get_num(j, "seed", 0));
    cfg.validate();
    return cfg;
}

PropensityConfig propensity_config_from_json(const nlohmann::json& j) {
    PropensityConfig cfg;
    if (j.contains("penalty")) {
        std::string p = j["penalty"].get<std::string>();
        if (p == "l1" || p == "L1")
            cfg.penalty = Penalty::l1;
        else if (p == "l2" || p == "L2")
            cfg.penalty = Penalty::l2;
        else
            throw config_error("penalty must be l1 or l2");
    }
    if (j.contains("lambda_policy")) {
        std::string p = j["lambda_policy"].get<std::string>();
        if (p == "cv")
            cfg.lambda_policy = LambdaPolicy::cv;
        else if (p == "fixed")
            cfg.lambda_policy = LambdaPolicy::fixed;
        else
            throw config_error("lambda_policy must be cv or fixed");
    }
    cfg.lambda = get_num(j, "lambda", cfg.lambda);
    cfg.cv_folds = get_int(j, "cv_folds", cfg.cv_folds);
    if (j.contains("clip")) cfg.clip = j["clip"].get<bool>();
    cfg.clip_lo = get_num(j, "clip_lo", cfg.clip_lo);
    cfg.clip_hi = get_num(j, "clip_hi", cfg.clip_hi);
    return cfg;
}

LdaConfig lda_config_from_json(const nlohmann::json& j) {
    LdaConfig cfg;
    cfg.n_topics = get_int(j, "n_topics", cfg.n_topics);
    cfg.alpha = get_num(j, "alpha", cfg.alpha);
    cfg.beta = get_num(j, "beta", cfg.beta);
    cfg.sweeps = get_int(j, "sweeps", cfg.sweeps);
    return cfg;
}

DistillerSpec distiller_spec_from_json(const nlohmann::json& j) {
    DistillerSpec spec;
    if (!j.contains("method")) throw config_error("distiller entry needs a method");
    auto method = distill_method_from_name(j["method"].get<std::string>());
    if (!method) throw config_error("unknown distiller '" + j["method"].get<std::string>() + "'");
    spec.method = *method;

    if (j.contains("grid") && j["grid"].is_string()) {
        if (j["grid"].get<std::string>() != "paper")
            throw config_error("grid must be an array or the string \"paper\"");
        switch (spec.method) {
            case DistillMethod::similarity: spec.stringency_grid = paper_cosine_grid(); break;
            case DistillMethod::distant_supervision:
                spec.stringency_grid = paper_classifier_grid();
                break;
            case DistillMethod::inlp: spec.stringency_grid = paper_inlp_grid(); break;
            case DistillMethod::topic_removal: spec.stringency_grid = paper_topic_grid(); break;
        }
    } else {
        spec.stringency_grid = get_vec(j, "grid", {});
        if (spec.stringency_grid.empty())
            throw config_error("distiller entry needs a stringency grid");
    }
    spec.k_folds = get_int(j, "k_folds", spec.k_folds);
    spec.tail_n = get_int(j, "tail_n", spec.tail_n);
    spec.classifier_lambda = get_num(j, "classifier_lambda", spec.classifier_lambda);
    spec.inlp_lambda = get_num(j, "inlp_lambda", spec.inlp_lambda);
    return spec;
}

SweepGrid sweep_grid_from_json(const nlohmann::json& j) {
    SweepGrid grid;
    if (j.contains("paper_defaults") && j["paper_defaults"].get<bool>()) {
        grid = paper_default_grid();
    } else {
        if (!j.contains("distillers") || !j["distillers"].is_array())
            throw config_error("sweep config needs a distillers array");
        for (const auto& d : j["distillers"])
            grid.distillers.push_back(distiller_spec_from_json(d));
        auto sizes = get_vec(j, "tdm_sizes", {});
        if (sizes.empty()) throw config_error("sweep config needs tdm_sizes");
        for (double t : sizes) grid.tdm_sizes.push_back(static_cast<int>(t));
    }
    if (j.contains("estimand")) {
        auto e = estimand_from_name(j["estimand"].get<std::string>());
        if (!e) throw config_error("estimand must be ATE or ATT");
        grid.estimand = *e;
    }
    grid.n_bootstrap = get_int(j, "n_bootstrap", grid.n_bootstrap);
    grid.seed = static_cast<std::uint64_t>(get_num(j, "seed", 0));
    if (j.contains("propensity")) grid.propensity = propensity_config_from_json(j["propensity"]);
    if (j.contains("lda")) grid.lda = lda_config_from_json(j["lda"]);
    return grid;
}

}  // namespace textdistill
