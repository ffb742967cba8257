#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "textdistill/corpus.hpp"
#include "textdistill/errors.hpp"

using namespace textdistill;

namespace {

GeneratorConfig small_config(int n_units = 50, std::uint64_t seed = 5) {
    GeneratorConfig cfg;
    cfg.n_units = n_units;
    cfg.seed = seed;
    return cfg;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("generator config validation") {
    GeneratorConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());

    GeneratorConfig bad = cfg;
    bad.topic_probs = {0.3, 0.3, 0.3};
    CHECK_THROWS_AS(bad.validate(), config_error);

    bad = cfg;
    bad.n_units = 0;
    CHECK_THROWS_AS(bad.validate(), config_error);

    bad = cfg;
    bad.y_sigma = 0.0;
    CHECK_THROWS_AS(bad.validate(), config_error);

    bad = cfg;
    bad.shift_strength = -1.0;
    CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("generated documents have k_paragraphs labelled passages") {
    GeneratorConfig cfg = small_config(20);
    Dataset ds = generate_dataset(cfg);
    REQUIRE(ds.units.size() == 20);
    REQUIRE(ds.documents.size() == 20);
    for (const auto& unit : ds.units) {
        const Document& doc = ds.document_for(unit);
        CHECK(doc.passages.size() == static_cast<std::size_t>(cfg.k_paragraphs));
        for (const auto& p : doc.passages) {
            CHECK(!p.tokens.empty());
            REQUIRE(p.topic_label.has_value());
            if (*p.topic_label == TopicLabel::general) {
                CHECK(!p.prompt_id.has_value());
                CHECK(p.tokens.size() == static_cast<std::size_t>(cfg.paragraph_length));
            } else {
                CHECK(p.prompt_id.has_value());
                CHECK(p.tokens.size() > static_cast<std::size_t>(cfg.paragraph_length));
            }
        }
        CHECK(unit.t == (unit.t != 0 ? 1 : 0));
        REQUIRE(unit.u.has_value());
    }
}

TEST_CASE("topic labels match the unit's u and t signs") {
    Dataset ds = generate_dataset(small_config(60, 9));
    for (const auto& unit : ds.units) {
        for (const auto& p : ds.document_for(unit).passages) {
            switch (*p.topic_label) {
                case TopicLabel::t_pos: CHECK(unit.t == 1); break;
                case TopicLabel::t_neg: CHECK(unit.t == 0); break;
                case TopicLabel::u_pos: CHECK(*unit.u == 1); break;
                case TopicLabel::u_neg: CHECK(*unit.u == 0); break;
                case TopicLabel::general: break;
            }
        }
    }
}

TEST_CASE("determinism: equal configs give byte-identical serializations") {
    GeneratorConfig cfg = small_config(30, 77);
    Dataset a = generate_dataset(cfg);
    Dataset b = generate_dataset(cfg);
    CHECK(units_to_csv(a) == units_to_csv(b));
    CHECK(documents_to_jsonl(a) == documents_to_jsonl(b));

    cfg.seed = 78;
    Dataset c = generate_dataset(cfg);
    CHECK(units_to_csv(a) != units_to_csv(c));
}

TEST_CASE("marginals over a large sample" * doctest::timeout(120)) {
    GeneratorConfig cfg = small_config(10000, 123);
    cfg.k_paragraphs = 1;  // marginals do not depend on the text
    cfg.paragraph_length = 2;
    Dataset ds = generate_dataset(cfg);

    double mean_u = 0.0, mean_t = 0.0, expected_t = 0.0;
    for (const auto& unit : ds.units) {
        mean_u += *unit.u;
        mean_t += unit.t;
        double lin = cfg.t_intercept + cfg.t_confounder * *unit.u;
        for (std::size_t d = 0; d < unit.x.size(); ++d) lin += cfg.t_slope[d] * unit.x[d];
        expected_t += sigmoid(lin);
    }
    mean_u /= ds.units.size();
    mean_t /= ds.units.size();
    expected_t /= ds.units.size();

    CHECK(std::abs(mean_u - 0.5) < 0.02);
    CHECK(std::abs(mean_t - expected_t) < 0.02);
}

TEST_CASE("per-document T-topic fraction matches p_t" * doctest::timeout(120)) {
    GeneratorConfig cfg = small_config(1000, 3);
    Dataset ds = generate_dataset(cfg);
    long t_topic = 0, u_topic = 0, general = 0;
    for (const auto& doc : ds.documents)
        for (const auto& p : doc.passages) {
            if (is_treatment_topic(*p.topic_label))
                ++t_topic;
            else if (is_confounder_topic(*p.topic_label))
                ++u_topic;
            else
                ++general;
        }
    double total = static_cast<double>(t_topic + u_topic + general);
    CHECK(std::abs(t_topic / total - 0.2) < 0.01);

    // chi-square goodness of fit, 2 degrees of freedom, alpha = 0.001
    double expected[3] = {0.2 * total, 0.2 * total, 0.6 * total};
    double observed[3] = {static_cast<double>(u_topic), static_cast<double>(t_topic),
                          static_cast<double>(general)};
    double chi2 = 0.0;
    for (int i = 0; i < 3; ++i)
        chi2 += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    CHECK(chi2 < 13.8155);
}

TEST_CASE("p_t = 0 produces a leakage-free corpus") {
    GeneratorConfig cfg = small_config(40, 4);
    cfg.topic_probs = {0.2, 0.0, 0.8};
    Dataset ds = generate_dataset(cfg);
    for (const auto& doc : ds.documents)
        for (const auto& p : doc.passages) CHECK(!is_treatment_topic(*p.topic_label));
}

TEST_CASE("zero shift leaves keyword frequencies at background rates") {
    GeneratorConfig cfg = small_config();
    cfg.shift_strength = 0.0;
    LanguageModel lm(cfg);
    auto bg = lm.background_probs();
    auto shifted = lm.shifted_probs(TopicLabel::t_pos);
    for (std::size_t i = 0; i < bg.size(); ++i) CHECK(shifted[i] == doctest::Approx(bg[i]));
}

TEST_CASE("shifted keyword mass matches the closed form and Monte Carlo agrees" *
          doctest::timeout(120)) {
    GeneratorConfig cfg = small_config();
    cfg.seed = 31;
    LanguageModel lm(cfg);

    auto bg = lm.background_probs();
    auto shifted = lm.shifted_probs(TopicLabel::t_pos);

    std::set<std::string> kws(lm.keywords(TopicLabel::t_pos).begin(),
                              lm.keywords(TopicLabel::t_pos).end());
    double bg_mass = 0.0, shifted_mass = 0.0;
    for (std::size_t i = 0; i < lm.tokens().size(); ++i)
        if (kws.count(lm.tokens()[i])) {
            bg_mass += bg[i];
            shifted_mass += shifted[i];
        }

    // P'(kw) = e^s * P(kw) / Z with Z = 1 + (e^s - 1) * bg_mass
    double z = 1.0 + (std::exp(cfg.shift_strength) - 1.0) * bg_mass;
    CHECK(shifted_mass == doctest::Approx(std::exp(cfg.shift_strength) * bg_mass / z));
    CHECK(shifted_mass / bg_mass > 0.9 * std::exp(4.0) / z);

    // Monte Carlo over >= 1e5 sampled tokens, prompts excluded
    Rng rng(99);
    long n_tokens = 0, kw_tokens = 0;
    while (n_tokens < 120000) {
        Passage p = sample_passage(TopicLabel::t_pos, cfg, lm, rng);
        const auto& prompt =
            lm.prompt_templates(TopicLabel::t_pos)[static_cast<std::size_t>(*p.prompt_id)];
        for (std::size_t i = prompt.size(); i < p.tokens.size(); ++i) {
            ++n_tokens;
            if (kws.count(p.tokens[i])) ++kw_tokens;
        }
    }
    double mc_rate = static_cast<double>(kw_tokens) / static_cast<double>(n_tokens);
    CHECK(mc_rate == doctest::Approx(shifted_mass).epsilon(0.08));
}

TEST_CASE("prompt ids stay within prompts_per_topic") {
    GeneratorConfig cfg = small_config();
    LanguageModel lm(cfg);
    Rng rng(5);
    std::set<int> seen;
    for (int i = 0; i < 200; ++i) {
        Passage p = sample_passage(TopicLabel::u_neg, cfg, lm, rng);
        REQUIRE(p.prompt_id.has_value());
        CHECK(*p.prompt_id >= 0);
        CHECK(*p.prompt_id < cfg.prompts_per_topic);
        seen.insert(*p.prompt_id);
    }
    CHECK(seen.size() == 4);
}

TEST_CASE("every prompt contains a topic keyword") {
    GeneratorConfig cfg = small_config();
    LanguageModel lm(cfg);
    for (TopicLabel topic : {TopicLabel::t_pos, TopicLabel::t_neg, TopicLabel::u_pos,
                             TopicLabel::u_neg}) {
        std::set<std::string> kws(lm.keywords(topic).begin(), lm.keywords(topic).end());
        for (const auto& prompt : lm.prompt_templates(topic)) {
            bool found = false;
            for (const auto& tok : prompt) found = found || kws.count(tok) > 0;
            CHECK(found);
        }
    }
}

TEST_CASE("dataset io round trip is bit exact") {
    namespace fs = std::filesystem;
    GeneratorConfig cfg = small_config(8, 21);
    Dataset ds = generate_dataset(cfg);

    fs::path dir = fs::temp_directory_path() / "textdistill_corpus_test";
    fs::create_directories(dir);
    std::string units = (dir / "units.csv").string();
    std::string docs = (dir / "docs.jsonl").string();
    save_dataset(ds, units, docs);

    Dataset loaded = load_dataset(units, docs);
    CHECK(loaded == ds);

    // second round trip reproduces identical bytes
    std::string units2 = (dir / "units2.csv").string();
    std::string docs2 = (dir / "docs2.jsonl").string();
    save_dataset(loaded, units2, docs2);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(units) == slurp(units2));
    CHECK(slurp(docs) == slurp(docs2));
    fs::remove_all(dir);
}

TEST_CASE("loader errors: missing document, malformed rows") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "textdistill_corpus_err";
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(dir / name);
        out << content;
        return (dir / name).string();
    };

    std::string units = write("u.csv", "id,t,y,x_1,doc_id\na,1,2.5,0.1,missing_doc\n");
    std::string docs = write("d.jsonl", "{\"id\":\"doc_a\",\"passages\":[{\"text\":\"hello world\"}]}\n");
    try {
        load_dataset(units, docs);
        FAIL("expected integrity error");
    } catch (const data_error& e) {
        CHECK(std::string(e.what()).find("missing_doc") != std::string::npos);
    }

    std::string bad_units = write("u2.csv", "id,t,y,x_1,doc_id\na,1,notanumber,0.1,doc_a\n");
    try {
        load_dataset(bad_units, docs);
        FAIL("expected parse error");
    } catch (const data_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    std::string minimal_units =
        write("u3.csv", "id,t,y,x_1,doc_id\na,1,2.5,0.1,doc_a\nb,0,1.5,-0.3,doc_b\n");
    std::string minimal_docs = write(
        "d3.jsonl",
        "{\"id\":\"doc_a\",\"passages\":[{\"text\":\"alpha beta\"}]}\n"
        "{\"id\":\"doc_b\",\"passages\":[{\"text\":\"gamma delta\"}]}\n");
    Dataset ds = load_dataset(minimal_units, minimal_docs);
    CHECK(ds.units.size() == 2);
    CHECK(!ds.documents[0].passages[0].topic_label.has_value());
    fs::remove_all(dir);
}

TEST_CASE("unit stream independence: prefix of a larger run matches a smaller run") {
    GeneratorConfig small = small_config(10, 55);
    GeneratorConfig large = small_config(25, 55);
    Dataset a = generate_dataset(small);
    Dataset b = generate_dataset(large);
    for (int i = 0; i < 10; ++i) {
        CHECK(a.units[i] == b.units[i]);
        CHECK(a.documents[i] == b.documents[i]);
    }
}
