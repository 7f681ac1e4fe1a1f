#pragma once
// SPDX-License-Identifier: Apache-2.0

// Moment statistics and rank correlation: kurtosis of activation vectors,
// per-candidate aggregation and Spearman correlation with p-values.

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "loads/backend.hpp"
#include "loads/core_data.hpp"

namespace loads {

// Population kurtosis E[(v-mu)^4] / (E[(v-mu)^2])^2 with moments divided by
// |v| and no small-sample correction. Two-pass, f64 accumulation in fixed
// index order. Errors: |v| < 2, zero variance.
double kurtosis(std::span<const double> v);

// Arithmetic mean over traces of kurtosis(steps[0].ffn_activation), in input
// (sample-draw) order. When ids are supplied, per-sample failures carry the
// offending sample id.
double mean_kurtosis(const std::vector<GenerationTrace>& traces,
                     const std::vector<std::string>* ids = nullptr);

// Midranks (average-rank tie treatment).
std::vector<double> midranks(std::span<const double> values);

struct SpearmanResult {
    double rho = 0.0;
    double p = 1.0;
};

// Spearman rank correlation: rho is the Pearson correlation of midrank
// vectors. p-value is two-sided: exact permutation enumeration for n <= 10,
// t-approximation t = rho*sqrt((n-2)/(1-rho^2)) otherwise. Errors: length
// mismatch, n < 3, all-equal xs or ys.
SpearmanResult spearman(std::span<const double> xs, std::span<const double> ys);

// ---------------------------------------------------------------------------
// KurtosisReport: per-candidate averaged kurtosis and the induced ranking.

struct SetKurtosis {
    LabelSet set;
    double mean_kurtosis = 0.0;
    int rank = 0;                                         // 1 = minimum mean
    std::vector<std::pair<std::string, double>> per_sample; // (example id, value)
};

struct KurtosisReport {
    std::vector<SetKurtosis> entries;   // pool order

    // Index into entries of the rank-1 set.
    int argmin() const;
};

// Assigns ranks 1..K ascending by mean; ties broken by pool order.
void assign_ranks(KurtosisReport& report);

nlohmann::json kurtosis_report_to_json(const KurtosisReport& report);
KurtosisReport kurtosis_report_from_json(const nlohmann::json& j,
                                         const ClassSchema& schema);

} // namespace loads
