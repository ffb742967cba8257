#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "textdistill/distill.hpp"
#include "textdistill/estimate.hpp"

namespace textdistill {

struct DistillerSpec {
    DistillMethod method = DistillMethod::similarity;
    std::vector<double> stringency_grid;  // strictly increasing in stringency
    // method hyperparameters
    int k_folds = 5;
    int tail_n = 0;  // 0 = automatic
    double classifier_lambda = 1e-3;
    double inlp_lambda = 1e-3;
};

struct SweepGrid {
    std::vector<DistillerSpec> distillers;
    std::vector<int> tdm_sizes;
    Estimand estimand = Estimand::ate;
    int n_bootstrap = 200;
    std::uint64_t seed = 0;
    PropensityConfig propensity;
    LdaConfig lda;
    TreatmentExemplars exemplars;  // required when a similarity distiller is present

    void validate() const;
    // distiller cells plus the per-tdm undistilled text baseline and the
    // tabular baseline
    std::size_t total_cell_count() const;
};

// the grids of the published sensitivity analysis; together with the five
// TDM sizes and the baselines they come to 291 cells
std::vector<double> paper_cosine_grid();       // 22 log-spaced thresholds, lenient -> stringent
std::vector<double> paper_classifier_grid();   // 11 thresholds, lenient -> stringent
std::vector<double> paper_inlp_grid();         // iterations 1..7
std::vector<double> paper_topic_grid();        // removed topics 0..16
std::vector<int> paper_tdm_sizes();            // 64, 256, 1024, 4096, 16384
SweepGrid paper_default_grid();

// cell seed: hash of (grid.seed, method, t, s)
std::uint64_t cell_seed(std::uint64_t grid_seed, const std::string& method, int t, double s);

struct SweepCell {
    std::string method;  // distiller name or baseline_tabular / baseline_text
    int method_index = -1;  // position in the grid; -1 for baselines
    int t = 0;
    double s = 0.0;
    int s_index = 0;
    std::string status = "ok";  // "ok" or "error"
    std::string error;
    EstimateResult estimate;

    std::string csv_row() const;
};

struct SweepReport {
    std::vector<SweepCell> cells;  // distiller cells, canonical order
    std::optional<SweepCell> baseline_tabular;
    std::vector<SweepCell> baseline_text;  // one per tdm size
    std::optional<SweepCell> lower_bound;
    std::optional<SweepCell> upper_bound;

    std::string to_csv() const;  // baselines first, then distiller cells
    std::size_t failed_count() const;
};

struct SweepOptions {
    int jobs = 1;
    // previously completed rows keyed by (method, t, s); matching cells are
    // reused instead of recomputed
    const std::vector<SweepCell>* resume_cells = nullptr;
    std::function<void(const SweepCell&)> on_cell_done;  // journaling hook
};

SweepReport run_sweep(const Dataset& dataset, const SweepGrid& grid,
                      const SweepOptions& options = {});

// min/max tau_hat over successful distiller cells; ties resolved toward the
// smallest (method index, t, s index)
std::pair<SweepCell, SweepCell> compute_bounds(const SweepReport& report);

struct TrajectoryDiagnostic {
    std::string method;
    int t = 0;
    int n_points = 0;
    double total_variation = 0.0;
    double belly_depth = 0.0;  // max gap between the endpoint chord and the curve
    double median_se = 0.0;
    bool leakage_suspected = false;
};

// per method x tdm trajectory over stringency; requires at least one
// trajectory with >= 3 successful points
std::vector<TrajectoryDiagnostic> leakage_diagnostic(const SweepReport& report);

std::string sweep_summary_json(const SweepReport& report);

std::vector<SweepCell> parse_sweep_csv(const std::string& text);

}  // namespace textdistill
