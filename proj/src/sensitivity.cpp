#include "textdistill/sensitivity.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "textdistill/errors.hpp"
#include "textdistill/rng.hpp"
#include <json.hpp>

namespace textdistill {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

bool threshold_method(DistillMethod m) {
    return m == DistillMethod::similarity || m == DistillMethod::distant_supervision;
}

}  // namespace

std::vector<double> paper_cosine_grid() {
    // the published grid elides its middle; filled with 22 log-spaced
    // points (seven per decade) from 0.1 down to 0.0001
    std::vector<double> grid(22);
    for (int i = 0; i < 22; ++i) grid[i] = std::pow(10.0, -1.0 - 3.0 * i / 21.0);
    return grid;
}

std::vector<double> paper_classifier_grid() {
    return {0.999, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.01};
}

std::vector<double> paper_inlp_grid() { return {1, 2, 3, 4, 5, 6, 7}; }

std::vector<double> paper_topic_grid() {
    std::vector<double> g(17);
    for (int i = 0; i <= 16; ++i) g[i] = i;
    return g;
}

std::vector<int> paper_tdm_sizes() { return {64, 256, 1024, 4096, 16384}; }

SweepGrid paper_default_grid() {
    SweepGrid grid;
    grid.distillers = {
        {DistillMethod::similarity, paper_cosine_grid()},
        {DistillMethod::distant_supervision, paper_classifier_grid()},
        {DistillMethod::inlp, paper_inlp_grid()},
        {DistillMethod::topic_removal, paper_topic_grid()},
    };
    grid.tdm_sizes = paper_tdm_sizes();
    return grid;
}

void SweepGrid::validate() const {
    if (distillers.empty()) throw config_error("sweep grid has no distillers");
    if (tdm_sizes.empty()) throw config_error("sweep grid has no tdm sizes");
    for (int t : tdm_sizes)
        if (t < 1) throw config_error("tdm sizes must be positive");
    for (const auto& spec : distillers) {
        if (spec.stringency_grid.empty())
            throw config_error(std::string(distill_method_name(spec.method)) +
                               ": empty stringency grid");
        // grids must be strictly increasing in stringency; for the threshold
        // methods lower b is more stringent
        for (std::size_t i = 1; i < spec.stringency_grid.size(); ++i) {
            bool ok = threshold_method(spec.method)
                          ? spec.stringency_grid[i] < spec.stringency_grid[i - 1]
                          : spec.stringency_grid[i] > spec.stringency_grid[i - 1];
            if (!ok)
                throw config_error(std::string(distill_method_name(spec.method)) +
                                   ": stringency grid is not strictly increasing in stringency");
        }
        for (double s : spec.stringency_grid) {
            if (threshold_method(spec.method)) {
                if (s <= 0.0 || s >= 1.0)
                    throw config_error("threshold grids must lie in (0,1)");
            } else if (s < 0.0 || s != std::floor(s)) {
                throw config_error("integer stringency grids must hold nonnegative integers");
            }
        }
        if (spec.method == DistillMethod::inlp && spec.stringency_grid.front() < 1.0)
            throw config_error("inlp iterations start at 1");
        if (spec.method == DistillMethod::similarity && exemplars.passages.empty())
            throw config_error("similarity distiller requires treatment exemplars");
    }
    if (n_bootstrap < 0) throw config_error("n_bootstrap must be nonnegative");
}

std::size_t SweepGrid::total_cell_count() const {
    std::size_t count = 0;
    for (const auto& spec : distillers) count += spec.stringency_grid.size();
    count *= tdm_sizes.size();
    return count + tdm_sizes.size() + 1;  // text baseline per tdm + tabular baseline
}

std::uint64_t cell_seed(std::uint64_t grid_seed, const std::string& method, int t, double s) {
    SeedHasher h;
    h.add(grid_seed).add(method).add(t).add(s);
    return h.value();
}

std::string SweepCell::csv_row() const {
    std::ostringstream out;
    out << method << ',' << t << ',' << fmt_double(s) << ','
        << estimand_name(estimate.estimand) << ',' << fmt_double(estimate.tau_hat) << ','
        << fmt_double(estimate.bootstrap_se) << ',' << fmt_double(estimate.ci90[0]) << ','
        << fmt_double(estimate.ci90[1]) << ',' << fmt_double(estimate.ci95[0]) << ','
        << fmt_double(estimate.ci95[1]) << ',' << status;
    return out.str();
}

static const char* kSweepCsvHeader =
    "method,t,s,estimand,tau_hat,se,ci90_lo,ci90_hi,ci95_lo,ci95_hi,status";

std::string SweepReport::to_csv() const {
    std::ostringstream out;
    out << kSweepCsvHeader << '\n';
    if (baseline_tabular) out << baseline_tabular->csv_row() << '\n';
    for (const auto& cell : baseline_text) out << cell.csv_row() << '\n';
    for (const auto& cell : cells) out << cell.csv_row() << '\n';
    return out.str();
}

std::size_t SweepReport::failed_count() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.status != "ok";
    if (baseline_tabular && baseline_tabular->status != "ok") ++n;
    for (const auto& c : baseline_text) n += c.status != "ok";
    return n;
}

std::vector<SweepCell> parse_sweep_csv(const std::string& text) {
    std::vector<SweepCell> cells;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line.rfind("method,", 0) == 0) continue;
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
        if (fields.size() != 11)
            throw data_error("sweep csv line " + std::to_string(line_no) +
                             ": expected 11 fields");
        SweepCell cell;
        cell.method = fields[0];
        cell.t = std::stoi(fields[1]);
        cell.s = std::stod(fields[2]);
        auto est = estimand_from_name(fields[3]);
        if (!est) throw data_error("sweep csv line " + std::to_string(line_no) +
                                   ": unknown estimand");
        cell.estimate.estimand = *est;
        cell.estimate.tau_hat = std::stod(fields[4]);
        cell.estimate.bootstrap_se = std::stod(fields[5]);
        cell.estimate.ci90 = {std::stod(fields[6]), std::stod(fields[7])};
        cell.estimate.ci95 = {std::stod(fields[8]), std::stod(fields[9])};
        cell.status = fields[10];
        cells.push_back(std::move(cell));
    }
    return cells;
}

namespace {

// per-tdm shared artifacts
struct TdmCache {
    std::shared_ptr<const Vocabulary> vocab;
    Representation tfidf;
    std::optional<Representation> topics;
};

struct CellJob {
    const DistillerSpec* spec;  // null for baselines
    std::string method;
    int method_index;
    int t;
    int t_order;
    double s;
    int s_index;
};

SweepCell execute_cell(const Dataset& dataset, const SweepGrid& grid, const CellJob& job,
                       const std::map<int, TdmCache>& caches) {
    SweepCell cell;
    cell.method = job.method;
    cell.method_index = job.method_index;
    cell.t = job.t;
    cell.s = job.s;
    cell.s_index = job.s_index;

    std::uint64_t seed = cell_seed(grid.seed, job.method, job.t, job.s);
    Provenance prov{job.method, job.s, job.t, seed};

    try {
        PropensityConfig prop = grid.propensity;
        prop.seed = cell_seed(grid.seed, "cvlambda", job.t, 0.0);

        const Eigen::MatrixXd* rep = nullptr;
        Eigen::MatrixXd rep_storage;
        if (job.method != "baseline_tabular") {
            const TdmCache& cache = caches.at(job.t);
            if (job.method == "baseline_text") {
                rep = &cache.tfidf.matrix;
            } else {
                std::vector<int> labels = treatment_labels(dataset);
                switch (job.spec->method) {
                    case DistillMethod::similarity: {
                        auto outcome = similarity_distill(dataset, grid.exemplars, job.s,
                                                          *cache.vocab);
                        rep_storage = tfidf_representation(
                                          retained_passages(dataset, outcome.retained),
                                          *cache.vocab)
                                          .matrix;
                        break;
                    }
                    case DistillMethod::distant_supervision: {
                        auto outcome = distant_supervision_distill(
                            dataset, job.s, job.spec->k_folds, job.spec->tail_n, *cache.vocab,
                            seed, job.spec->classifier_lambda);
                        rep_storage = tfidf_representation(
                                          retained_passages(dataset, outcome.retained),
                                          *cache.vocab)
                                          .matrix;
                        break;
                    }
                    case DistillMethod::topic_removal: {
                        auto outcome = topic_removal_distill(*cache.topics, labels,
                                                             static_cast<int>(job.s));
                        rep_storage = outcome.representation->matrix;
                        break;
                    }
                    case DistillMethod::inlp: {
                        auto outcome = inlp_distill(cache.tfidf, labels,
                                                    static_cast<int>(job.s), seed,
                                                    job.spec->inlp_lambda);
                        rep_storage = outcome.representation->matrix;
                        break;
                    }
                }
                rep = &rep_storage;
            }
        }
        cell.estimate = estimate_effect(dataset, rep, grid.estimand, prop, grid.n_bootstrap,
                                        seed, prov);
    } catch (const std::exception& e) {
        cell.status = "error";
        cell.error = e.what();
        std::string tag = e.what();
        for (char& c : tag)
            if (c == ',' || c == '\n' || c == '\r') c = ';';
        cell.status = "error[" + tag + "]";
        cell.estimate.estimand = grid.estimand;
        cell.estimate.provenance = prov;
    }
    return cell;
}

}  // namespace

SweepReport run_sweep(const Dataset& dataset, const SweepGrid& grid,
                      const SweepOptions& options) {
    grid.validate();
    dataset.validate();

    // canonical job order: baselines, then distillers in grid order
    std::vector<CellJob> jobs;
    jobs.push_back({nullptr, "baseline_tabular", -1, 0, -1, 0.0, 0});
    for (std::size_t ti = 0; ti < grid.tdm_sizes.size(); ++ti)
        jobs.push_back({nullptr, "baseline_text", -1, grid.tdm_sizes[ti],
                        static_cast<int>(ti), 0.0, 0});
    for (std::size_t m = 0; m < grid.distillers.size(); ++m)
        for (std::size_t ti = 0; ti < grid.tdm_sizes.size(); ++ti)
            for (std::size_t si = 0; si < grid.distillers[m].stringency_grid.size(); ++si)
                jobs.push_back({&grid.distillers[m],
                                distill_method_name(grid.distillers[m].method),
                                static_cast<int>(m), grid.tdm_sizes[ti],
                                static_cast<int>(ti), grid.distillers[m].stringency_grid[si],
                                static_cast<int>(si)});

    // reuse previously completed cells
    std::vector<std::optional<SweepCell>> results(jobs.size());
    if (options.resume_cells) {
        auto key = [](const std::string& m, int t, double s) {
            return m + "|" + std::to_string(t) + "|" + fmt_double(s);
        };
        std::map<std::string, const SweepCell*> done;
        for (const auto& cell : *options.resume_cells)
            done[key(cell.method, cell.t, cell.s)] = &cell;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            auto it = done.find(key(jobs[j].method, jobs[j].t, jobs[j].s));
            if (it != done.end()) {
                SweepCell cell = *it->second;
                cell.method_index = jobs[j].method_index;
                cell.s_index = jobs[j].s_index;
                results[j] = std::move(cell);
            }
        }
    }

    // per-tdm artifacts, built once; LDA only when a topic cell is pending
    std::map<int, TdmCache> caches;
    for (int t : grid.tdm_sizes) {
        bool text_needed = false, lda_needed = false;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (results[j] || jobs[j].t != t) continue;
            if (jobs[j].method != "baseline_tabular") text_needed = true;
            if (jobs[j].spec && jobs[j].spec->method == DistillMethod::topic_removal)
                lda_needed = true;
        }
        if (!text_needed) continue;
        TdmCache cache;
        cache.vocab = std::make_shared<Vocabulary>(build_vocabulary(dataset.documents, t));
        cache.tfidf = tfidf_representation(dataset, *cache.vocab);
        if (lda_needed) {
            LdaConfig lda = grid.lda;
            lda.seed = cell_seed(grid.seed, "lda", t, 0.0);
            TopicModel model = fit_lda(dataset.documents, *cache.vocab, lda);
            cache.topics = infer_topics(model, dataset.documents);
        }
        caches.emplace(t, std::move(cache));
    }

    std::vector<std::size_t> pending;
    for (std::size_t j = 0; j < jobs.size(); ++j)
        if (!results[j]) pending.push_back(j);

    std::mutex done_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t p = next.fetch_add(1);
            if (p >= pending.size()) break;
            std::size_t j = pending[p];
            SweepCell cell = execute_cell(dataset, grid, jobs[j], caches);
            {
                std::lock_guard<std::mutex> lock(done_mutex);
                if (options.on_cell_done) options.on_cell_done(cell);
                results[j] = std::move(cell);
            }
        }
    };
    int jobs_n = std::max(1, options.jobs);
    if (jobs_n == 1 || pending.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs_n; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SweepReport report;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        SweepCell& cell = *results[j];
        if (cell.method == "baseline_tabular")
            report.baseline_tabular = std::move(cell);
        else if (cell.method == "baseline_text")
            report.baseline_text.push_back(std::move(cell));
        else
            report.cells.push_back(std::move(cell));
    }

    std::size_t failed = report.failed_count();
    if (failed * 4 > grid.total_cell_count())
        throw data_error("sweep failed: more than 25% of cells errored (" +
                         std::to_string(failed) + " of " +
                         std::to_string(grid.total_cell_count()) + ")");

    if (std::any_of(report.cells.begin(), report.cells.end(),
                    [](const SweepCell& c) { return c.status == "ok"; })) {
        auto [lower, upper] = compute_bounds(report);
        report.lower_bound = lower;
        report.upper_bound = upper;
    }
    return report;
}

std::pair<SweepCell, SweepCell> compute_bounds(const SweepReport& report) {
    const SweepCell* lower = nullptr;
    const SweepCell* upper = nullptr;
    for (const auto& cell : report.cells) {  // canonical order resolves ties
        if (cell.status != "ok") continue;
        if (!lower || cell.estimate.tau_hat < lower->estimate.tau_hat) lower = &cell;
        if (!upper || cell.estimate.tau_hat > upper->estimate.tau_hat) upper = &cell;
    }
    if (!lower) throw data_error("compute_bounds: no successful cells");
    return {*lower, *upper};
}

std::vector<TrajectoryDiagnostic> leakage_diagnostic(const SweepReport& report) {
    std::map<std::pair<int, int>, std::vector<const SweepCell*>> groups;
    for (const auto& cell : report.cells) {
        if (cell.status != "ok") continue;
        groups[{cell.method_index, cell.t}].push_back(&cell);
    }

    std::vector<TrajectoryDiagnostic> out;
    for (auto& [key, cells] : groups) {
        std::sort(cells.begin(), cells.end(),
                  [](const SweepCell* a, const SweepCell* b) { return a->s_index < b->s_index; });
        if (cells.size() < 3) continue;

        TrajectoryDiagnostic d;
        d.method = cells.front()->method;
        d.t = key.second;
        d.n_points = static_cast<int>(cells.size());

        const std::size_t m = cells.size();
        double lo = cells.front()->estimate.tau_hat;
        double hi = cells.back()->estimate.tau_hat;
        std::vector<double> ses;
        for (std::size_t i = 0; i < m; ++i) {
            ses.push_back(cells[i]->estimate.bootstrap_se);
            if (i > 0)
                d.total_variation +=
                    std::abs(cells[i]->estimate.tau_hat - cells[i - 1]->estimate.tau_hat);
            if (i > 0 && i + 1 < m) {
                double pos = static_cast<double>(i) / static_cast<double>(m - 1);
                double chord = lo + (hi - lo) * pos;
                d.belly_depth =
                    std::max(d.belly_depth, std::abs(chord - cells[i]->estimate.tau_hat));
            }
        }
        std::sort(ses.begin(), ses.end());
        d.median_se = m % 2 == 1 ? ses[m / 2] : 0.5 * (ses[m / 2 - 1] + ses[m / 2]);
        d.leakage_suspected = d.belly_depth > 2.0 * d.median_se;
        out.push_back(d);
    }
    if (out.empty())
        throw data_error("leakage_diagnostic: no trajectory has >= 3 stringency points");
    return out;
}

namespace {

nlohmann::json cell_json(const SweepCell& cell) {
    nlohmann::json j;
    j["method"] = cell.method;
    j["t"] = cell.t;
    j["s"] = cell.s;
    j["estimand"] = estimand_name(cell.estimate.estimand);
    j["tau_hat"] = cell.estimate.tau_hat;
    j["se"] = cell.estimate.bootstrap_se;
    j["ci90"] = {cell.estimate.ci90[0], cell.estimate.ci90[1]};
    j["ci95"] = {cell.estimate.ci95[0], cell.estimate.ci95[1]};
    j["status"] = cell.status;
    return j;
}

}  // namespace

std::string sweep_summary_json(const SweepReport& report) {
    nlohmann::json j;
    j["n_cells"] = report.cells.size() + report.baseline_text.size() +
                   (report.baseline_tabular ? 1 : 0);
    j["n_failed"] = report.failed_count();
    if (report.lower_bound) {
        j["bounds"]["lower"] = cell_json(*report.lower_bound);
        j["bounds"]["upper"] = cell_json(*report.upper_bound);
    }
    if (report.baseline_tabular) j["baseline_tabular"] = cell_json(*report.baseline_tabular);
    j["baseline_text"] = nlohmann::json::array();
    for (const auto& cell : report.baseline_text)
        j["baseline_text"].push_back(cell_json(cell));
    try {
        auto diags = leakage_diagnostic(report);
        j["diagnostics"] = nlohmann::json::array();
        for (const auto& d : diags) {
            nlohmann::json dj;
            dj["method"] = d.method;
            dj["t"] = d.t;
            dj["n_points"] = d.n_points;
            dj["total_variation"] = d.total_variation;
            dj["belly_depth"] = d.belly_depth;
            dj["median_se"] = d.median_se;
            dj["leakage_suspected"] = d.leakage_suspected;
            j["diagnostics"].push_back(dj);
        }
    } catch (const data_error&) {
        j["diagnostics"] = nlohmann::json::array();  // too few points per trajectory
    }
    return j.dump(2) + "\n";
}

}  // namespace textdistill
