#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "textdistill/estimate.hpp"
#include "textdistill/sensitivity.hpp"

namespace textdistill {

// Batched simulation measuring bias / sd / rmse per distiller and stringency
// preset. Presets map to the first, middle and last index of each method's
// stringency grid.
struct ExperimentSpec {
    int n_batches = 30;
    int batch_size = 2000;
    GeneratorConfig dgp;
    std::vector<DistillerSpec> distillers;
    int tdm_size = 256;
    LdaConfig lda;
    PropensityConfig propensity;  // fixed-lambda by default for batch runs
    Estimand estimand = Estimand::ate;
    std::uint64_t seed = 0;

    void validate() const;
    static ExperimentSpec defaults();  // calibrated synthetic experiment
};

inline const char* preset_name(int preset) {
    return preset == 0 ? "lax" : (preset == 1 ? "moderate" : "stringent");
}

struct MetricsRow {
    std::string method;
    std::string preset;
    double bias = 0.0;
    double sd = 0.0;
    double rmse = 0.0;
    int n_batches = 0;
};

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    // per (method, preset) batch estimates, for paired comparisons
    std::map<std::pair<std::string, std::string>, std::vector<double>> estimates;
    // distant-supervision diagnostics at the moderate preset: fraction of
    // removed passages carrying a treatment topic label, per batch
    std::vector<double> ds_removed_treatment_fraction;
    int failed_batches = 0;
    double tau_true = 0.0;

    const MetricsRow& row(const std::string& method, const std::string& preset) const;
    const std::vector<double>& batch_estimates(const std::string& method,
                                               const std::string& preset) const;
    std::string to_csv() const;  // method,preset,bias,sd,rmse
};

// standard error of the difference between two batch-mean estimates
double pooled_se(const std::vector<double>& a, const std::vector<double>& b);

ExperimentResult run_bias_variance_experiment(const ExperimentSpec& spec);

}  // namespace textdistill
