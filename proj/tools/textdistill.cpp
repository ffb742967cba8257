// textdistill: leakage-aware text-based causal inference pipeline.
// Subcommands: generate, distill, estimate, sweep, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "textdistill/config.hpp"
#include "textdistill/distill.hpp"
#include "textdistill/errors.hpp"
#include "textdistill/manifest.hpp"
#include "textdistill/sensitivity.hpp"

namespace fs = std::filesystem;
using namespace textdistill;

namespace {

bool log_enabled() {
    const char* level = std::getenv("TEXTDISTILL_LOG");
    return level && std::string(level) == "debug";
}

void log_line(const std::string& msg) {
    if (log_enabled()) std::cerr << "[textdistill] " << msg << "\n";
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write '" + path + "'");
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<long long> seed_override;
};

nlohmann::json load_config(const CommonArgs& args) {
    if (!fs::exists(args.config_path))
        throw config_error("config file '" + args.config_path + "' does not exist");
    return load_config_file(args.config_path);
}

Dataset load_input_dataset(const nlohmann::json& cfg, RunManifest& manifest) {
    if (!cfg.contains("units") || !cfg.contains("docs"))
        throw config_error("config needs 'units' and 'docs' paths");
    std::string units = cfg["units"].get<std::string>();
    std::string docs = cfg["docs"].get<std::string>();
    if (!fs::exists(units)) throw config_error("units file '" + units + "' does not exist");
    if (!fs::exists(docs)) throw config_error("docs file '" + docs + "' does not exist");
    manifest.add_input(units);
    manifest.add_input(docs);
    return load_dataset(units, docs);
}

TreatmentExemplars load_exemplars(const nlohmann::json& cfg, RunManifest& manifest) {
    TreatmentExemplars ex;
    if (cfg.contains("exemplars_path")) {
        std::string path = cfg["exemplars_path"].get<std::string>();
        if (!fs::exists(path))
            throw config_error("exemplars file '" + path + "' does not exist");
        manifest.add_input(path);
        std::istringstream in(read_file(path));
        std::string line;
        while (std::getline(in, line)) {
            auto toks = tokenize(line);
            if (!toks.empty()) ex.passages.push_back(std::move(toks));
        }
    } else if (cfg.contains("generator")) {
        // synthetic pipeline: exemplars are the generator's treatment prompts
        ex = exemplars_from_prompts(generator_config_from_json(cfg["generator"]));
    }
    return ex;
}

int cmd_generate(const CommonArgs& args) {
    nlohmann::json cfg = load_config(args);
    GeneratorConfig gen = generator_config_from_json(
        cfg.contains("generator") ? cfg["generator"] : cfg);
    if (args.seed_override) gen.seed = static_cast<std::uint64_t>(*args.seed_override);

    fs::create_directories(args.out_dir);
    std::string units_path = (fs::path(args.out_dir) / "units.csv").string();
    std::string docs_path = (fs::path(args.out_dir) / "docs.jsonl").string();

    log_line("generating " + std::to_string(gen.n_units) + " units");
    Dataset data = generate_dataset(gen);
    save_dataset(data, units_path, docs_path);

    RunManifest manifest;
    manifest.command = "generate";
    manifest.config_path = args.config_path;
    manifest.seed = gen.seed;
    manifest.add_input(args.config_path);
    manifest.output_paths = {units_path, docs_path};
    manifest.write((fs::path(args.out_dir) / "manifest.json").string());
    return 0;
}

int cmd_distill(const CommonArgs& args) {
    nlohmann::json cfg = load_config(args);
    RunManifest manifest;
    manifest.command = "distill";
    manifest.config_path = args.config_path;
    manifest.add_input(args.config_path);

    Dataset data = load_input_dataset(cfg, manifest);
    if (!cfg.contains("distiller")) throw config_error("config needs a [distiller] table");
    DistillerSpec spec = [&] {
        nlohmann::json d = cfg["distiller"];
        if (!d.contains("grid")) d["grid"] = nlohmann::json::array({0.5});
        return distiller_spec_from_json(d);
    }();
    if (!cfg["distiller"].contains("stringency"))
        throw config_error("distiller config needs a stringency value");
    double stringency = cfg["distiller"]["stringency"].get<double>();
    int t = cfg.contains("tdm_size") ? cfg["tdm_size"].get<int>() : 256;
    std::uint64_t seed = cfg.contains("seed") ? cfg["seed"].get<std::uint64_t>() : 0;
    if (args.seed_override) seed = static_cast<std::uint64_t>(*args.seed_override);
    manifest.seed = seed;

    auto vocab = build_vocabulary(data.documents, t);
    std::vector<int> labels = treatment_labels(data);

    DistillationOutcome outcome;
    switch (spec.method) {
        case DistillMethod::similarity: {
            TreatmentExemplars ex = load_exemplars(cfg, manifest);
            if (ex.passages.empty())
                throw config_error("similarity distiller needs exemplars_path or a generator table");
            outcome = similarity_distill(data, ex, stringency, vocab);
            break;
        }
        case DistillMethod::distant_supervision:
            outcome = distant_supervision_distill(data, stringency, spec.k_folds, spec.tail_n,
                                                  vocab, seed, spec.classifier_lambda);
            break;
        case DistillMethod::topic_removal: {
            LdaConfig lda = cfg.contains("lda") ? lda_config_from_json(cfg["lda"]) : LdaConfig{};
            lda.seed = seed;
            TopicModel model = fit_lda(data.documents, vocab, lda);
            outcome = topic_removal_distill(infer_topics(model, data.documents), labels,
                                            static_cast<int>(stringency));
            break;
        }
        case DistillMethod::inlp: {
            Representation rep = tfidf_representation(data, vocab);
            outcome = inlp_distill(rep, labels, static_cast<int>(stringency), seed,
                                   spec.inlp_lambda);
            break;
        }
    }

    fs::create_directories(args.out_dir);
    std::string diag_path = (fs::path(args.out_dir) / "diagnostics.csv").string();
    write_file(diag_path, outcome.diagnostics_csv());
    log_line("removed " + std::to_string(outcome.removed_count) + " passages/features");

    manifest.output_paths = {diag_path};
    manifest.write((fs::path(args.out_dir) / "manifest.json").string());
    return 0;
}

int cmd_estimate(const CommonArgs& args) {
    nlohmann::json cfg = load_config(args);
    RunManifest manifest;
    manifest.command = "estimate";
    manifest.config_path = args.config_path;
    manifest.add_input(args.config_path);

    Dataset data = load_input_dataset(cfg, manifest);
    Estimand estimand = Estimand::ate;
    if (cfg.contains("estimand")) {
        auto e = estimand_from_name(cfg["estimand"].get<std::string>());
        if (!e) throw config_error("estimand must be ATE or ATT");
        estimand = *e;
    }
    int n_bootstrap = cfg.contains("n_bootstrap") ? cfg["n_bootstrap"].get<int>() : 200;
    std::uint64_t seed = cfg.contains("seed") ? cfg["seed"].get<std::uint64_t>() : 0;
    if (args.seed_override) seed = static_cast<std::uint64_t>(*args.seed_override);
    manifest.seed = seed;

    PropensityConfig prop =
        cfg.contains("propensity") ? propensity_config_from_json(cfg["propensity"]) : PropensityConfig{};
    bool use_text = !cfg.contains("use_text") || cfg["use_text"].get<bool>();

    Provenance prov;
    Eigen::MatrixXd rep;
    const Eigen::MatrixXd* rep_ptr = nullptr;
    if (use_text) {
        int t = cfg.contains("tdm_size") ? cfg["tdm_size"].get<int>() : 256;
        prov.tdm_size = t;
        auto vocab = build_vocabulary(data.documents, t);
        rep = tfidf_representation(data, vocab).matrix;
        rep_ptr = &rep;
        prov.distiller = "none";
    } else {
        prov.distiller = "tabular";
    }

    EstimateResult result = estimate_effect(data, rep_ptr, estimand, prop, n_bootstrap, seed, prov);

    fs::create_directories(args.out_dir);
    std::string path = (fs::path(args.out_dir) / "estimate.csv").string();
    write_file(path, std::string(EstimateResult::csv_header()) + "\n" + result.csv_row() + "\n");
    log_line("tau_hat = " + std::to_string(result.tau_hat));

    manifest.output_paths = {path};
    manifest.write((fs::path(args.out_dir) / "manifest.json").string());
    return 0;
}

std::string grid_fingerprint(const SweepGrid& grid) {
    SeedHasher h;
    h.add(grid.seed).add(static_cast<int>(grid.estimand)).add(grid.n_bootstrap);
    for (int t : grid.tdm_sizes) h.add(t);
    for (const auto& d : grid.distillers) {
        h.add(std::string(distill_method_name(d.method)));
        for (double s : d.stringency_grid) h.add(s);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h.value()));
    return buf;
}

int cmd_sweep(const CommonArgs& args, bool resume, int jobs) {
    nlohmann::json cfg = load_config(args);
    RunManifest manifest;
    manifest.command = "sweep";
    manifest.config_path = args.config_path;
    manifest.add_input(args.config_path);

    Dataset data = load_input_dataset(cfg, manifest);
    SweepGrid grid = sweep_grid_from_json(cfg);
    if (args.seed_override) grid.seed = static_cast<std::uint64_t>(*args.seed_override);
    grid.exemplars = load_exemplars(cfg, manifest);
    grid.validate();
    manifest.seed = grid.seed;

    fs::create_directories(args.out_dir);
    std::string journal_path = (fs::path(args.out_dir) / "sweep.partial.csv").string();
    std::string fingerprint = grid_fingerprint(grid);

    std::vector<SweepCell> previous;
    if (resume && fs::exists(journal_path)) {
        std::string text = read_file(journal_path);
        std::istringstream in(text);
        std::string first;
        std::getline(in, first);
        if (first != "# grid=" + fingerprint)
            throw config_error("--resume: journal belongs to a different grid or seed");
        previous = parse_sweep_csv(text);
        log_line("resuming with " + std::to_string(previous.size()) + " completed cells");
    }

    std::ofstream journal(journal_path, std::ios::binary);
    journal << "# grid=" << fingerprint << "\n";
    for (const auto& cell : previous) journal << cell.csv_row() << "\n";
    journal.flush();

    std::size_t total = grid.total_cell_count();
    std::size_t done = previous.size();
    SweepOptions options;
    options.jobs = jobs;
    options.resume_cells = previous.empty() ? nullptr : &previous;
    options.on_cell_done = [&](const SweepCell& cell) {
        journal << cell.csv_row() << "\n";
        journal.flush();
        ++done;
        log_line("cell " + std::to_string(done) + "/" + std::to_string(total) + " " +
                 cell.method + " t=" + std::to_string(cell.t));
    };

    SweepReport report = run_sweep(data, grid, options);

    std::string csv_path = (fs::path(args.out_dir) / "sweep.csv").string();
    std::string json_path = (fs::path(args.out_dir) / "summary.json").string();
    write_file(csv_path, report.to_csv());
    write_file(json_path, sweep_summary_json(report));

    manifest.output_paths = {csv_path, json_path};
    manifest.write((fs::path(args.out_dir) / "manifest.json").string());
    return 0;
}

int cmd_report(const std::string& sweep_csv, const std::string& out_dir) {
    if (!fs::exists(sweep_csv))
        throw config_error("sweep csv '" + sweep_csv + "' does not exist");
    std::vector<SweepCell> cells = parse_sweep_csv(read_file(sweep_csv));

    // rebuild grouping indexes from the rows: method order of first
    // appearance, stringency order by method-specific direction
    SweepReport report;
    std::vector<std::string> method_order;
    for (auto& cell : cells) {
        if (cell.method == "baseline_tabular") {
            report.baseline_tabular = cell;
        } else if (cell.method == "baseline_text") {
            report.baseline_text.push_back(cell);
        } else {
            auto it = std::find(method_order.begin(), method_order.end(), cell.method);
            if (it == method_order.end()) {
                method_order.push_back(cell.method);
                it = method_order.end() - 1;
            }
            cell.method_index = static_cast<int>(it - method_order.begin());
            report.cells.push_back(cell);
        }
    }
    for (auto& cell : report.cells) {
        auto m = distill_method_from_name(cell.method);
        bool descending = m && (*m == DistillMethod::similarity ||
                                *m == DistillMethod::distant_supervision);
        int rank = 0;
        for (const auto& other : report.cells)
            if (other.method == cell.method && other.t == cell.t &&
                (descending ? other.s > cell.s : other.s < cell.s))
                ++rank;
        cell.s_index = rank;
    }

    if (std::any_of(report.cells.begin(), report.cells.end(),
                    [](const SweepCell& c) { return c.status == "ok"; })) {
        auto [lower, upper] = compute_bounds(report);
        report.lower_bound = lower;
        report.upper_bound = upper;
    }

    fs::create_directories(out_dir);
    std::string path = (fs::path(out_dir) / "report.json").string();
    write_file(path, sweep_summary_json(report));

    RunManifest manifest;
    manifest.command = "report";
    manifest.config_path = sweep_csv;
    manifest.add_input(sweep_csv);
    manifest.output_paths = {path};
    manifest.write((fs::path(out_dir) / "manifest.json").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"treatment-leakage distillation and sensitivity analysis"};
    app.require_subcommand(1);

    CommonArgs gen_args, dist_args, est_args, sweep_args;
    std::string report_csv, report_out = ".";
    bool resume = false;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;

    auto add_common = [](CLI::App* cmd, CommonArgs& args) {
        cmd->add_option("--config", args.config_path, "TOML or JSON config file")->required();
        cmd->add_option("--out", args.out_dir, "output directory")->required();
        cmd->add_option("--seed", args.seed_override, "override the config seed");
    };

    add_common(app.add_subcommand("generate", "generate a synthetic dataset"), gen_args);
    add_common(app.add_subcommand("distill", "run one distiller, write diagnostics"), dist_args);
    add_common(app.add_subcommand("estimate", "estimate a treatment effect"), est_args);
    auto* sweep_cmd = app.add_subcommand("sweep", "run the stringency sweep");
    add_common(sweep_cmd, sweep_args);
    sweep_cmd->add_flag("--resume", resume, "reuse completed cells from a previous run");
    sweep_cmd->add_option("--jobs", jobs, "worker thread count");
    auto* report_cmd = app.add_subcommand("report", "bounds and diagnostics from a sweep csv");
    report_cmd->add_option("--sweep", report_csv, "sweep csv file")->required();
    report_cmd->add_option("--out", report_out, "output directory");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand("generate")) return cmd_generate(gen_args);
        if (app.got_subcommand("distill")) return cmd_distill(dist_args);
        if (app.got_subcommand("estimate")) return cmd_estimate(est_args);
        if (app.got_subcommand("sweep")) return cmd_sweep(sweep_args, resume, jobs);
        if (app.got_subcommand("report")) return cmd_report(report_csv, report_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
