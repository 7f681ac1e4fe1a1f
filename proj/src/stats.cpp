// SPDX-License-Identifier: Apache-2.0

#include "loads/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "loads/errors.hpp"

namespace loads {

double kurtosis(std::span<const double> v) {
    std::size_t n = v.size();
    if (n < 2) {
        throw numeric_error("kurtosis: need at least 2 values, got " + std::to_string(n));
    }
    // two-pass population moments, fixed index order
    double mean = 0.0;
    for (double x : v) {
        mean += x;
    }
    mean /= static_cast<double>(n);

    double m2 = 0.0;
    double m4 = 0.0;
    for (double x : v) {
        double d = x - mean;
        double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 == 0.0) {
        throw numeric_error("kurtosis: zero variance (constant vector)");
    }
    return m4 / (m2 * m2);
}

double mean_kurtosis(const std::vector<GenerationTrace>& traces,
                     const std::vector<std::string>* ids) {
    if (traces.empty()) {
        throw numeric_error("mean_kurtosis: empty trace list");
    }
    if (ids && ids->size() != traces.size()) {
        throw validation_error("mean_kurtosis: ids/traces size mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& trace = traces[i];
        if (trace.steps.empty() || trace.steps.front().ffn_activation.empty()) {
            throw validation_error("mean_kurtosis: trace" +
                                   (ids ? " for sample '" + (*ids)[i] + "'" : " #" + std::to_string(i)) +
                                   " has no first-step ffn_activation");
        }
        try {
            sum += kurtosis(trace.steps.front().ffn_activation);
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(e.what()) + " (sample " +
                                (ids ? "'" + (*ids)[i] + "'" : "#" + std::to_string(i)) + ")");
        }
    }
    return sum / static_cast<double>(traces.size());
}

std::vector<double> midranks(std::span<const double> values) {
    std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        // positions i..j (0-based) share the average of ranks i+1..j+1
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    return ranks;
}

namespace {

double pearson(std::span<const double> xs, std::span<const double> ys) {
    std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mx;
        double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

// Regularized incomplete beta function I_x(a, b) via the standard continued
// fraction (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 200;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;

    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            break;
        }
    }
    return h;
}

double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * betacf(a, b, x) / a;
    }
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// Two-sided p of the t statistic with df degrees of freedom.
double t_two_sided_p(double t, double df) {
    if (!std::isfinite(t)) {
        return std::numeric_limits<double>::min();
    }
    double p = betai(df / 2.0, 0.5, df / (df + t * t));
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

// Exact two-sided permutation p over rank pairings. Enumerating distinct
// arrangements of the (possibly tied) rank multiset is equivalent to
// enumerating all n! assignments: every arrangement absorbs the same number
// of assignments, so the distribution over arrangements stays uniform.
double exact_permutation_p(const std::vector<double>& rx, std::vector<double> ry,
                           double rho_obs) {
    std::sort(ry.begin(), ry.end());
    double mx = 0.0, my = 0.0;
    std::size_t n = rx.size();
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    double denom = std::sqrt(sxx * syy);
    double threshold = std::abs(rho_obs) - 1e-12;

    std::uint64_t total = 0;
    std::uint64_t extreme = 0;
    do {
        double sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sxy += (rx[i] - mx) * (ry[i] - my);
        }
        double rho = sxy / denom;
        ++total;
        if (std::abs(rho) >= threshold) {
            ++extreme;
        }
    } while (std::next_permutation(ry.begin(), ry.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

} // namespace

SpearmanResult spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw validation_error("spearman: length mismatch (" + std::to_string(xs.size()) +
                               " vs " + std::to_string(ys.size()) + ")");
    }
    std::size_t n = xs.size();
    if (n < 3) {
        throw validation_error("spearman: need at least 3 pairs");
    }
    auto all_equal = [](std::span<const double> v) {
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i] != v[0]) return false;
        }
        return true;
    };
    if (all_equal(xs) || all_equal(ys)) {
        throw numeric_error("spearman: rho undefined for a constant input");
    }

    std::vector<double> rx = midranks(xs);
    std::vector<double> ry = midranks(ys);

    SpearmanResult result;
    result.rho = pearson(rx, ry);
    if (n <= 10) {
        result.p = exact_permutation_p(rx, ry, result.rho);
    } else {
        double df = static_cast<double>(n - 2);
        double denom = 1.0 - result.rho * result.rho;
        double t = denom <= 0.0 ? std::numeric_limits<double>::infinity()
                                : result.rho * std::sqrt(df / denom);
        result.p = t_two_sided_p(t, df);
    }
    result.p = std::clamp(result.p, std::numeric_limits<double>::min(), 1.0);
    return result;
}

// ---------------------------------------------------------------------------
// KurtosisReport

int KurtosisReport::argmin() const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].rank == 1) {
            return static_cast<int>(i);
        }
    }
    throw validation_error("kurtosis report: no rank-1 entry");
}

void assign_ranks(KurtosisReport& report) {
    std::vector<std::size_t> order(report.entries.size());
    std::iota(order.begin(), order.end(), 0);
    // ascending mean, ties by pool order (stable)
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return report.entries[a].mean_kurtosis < report.entries[b].mean_kurtosis;
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
        report.entries[order[r]].rank = static_cast<int>(r + 1);
    }
}

nlohmann::json kurtosis_report_to_json(const KurtosisReport& report) {
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& entry : report.entries) {
        nlohmann::json per_sample = nlohmann::json::array();
        for (const auto& [id, value] : entry.per_sample) {
            per_sample.push_back({{"id", id}, {"value", value}});
        }
        nlohmann::json j = entry.set.to_json();
        j["mean_kurtosis"] = entry.mean_kurtosis;
        j["rank"] = entry.rank;
        j["per_sample"] = std::move(per_sample);
        sets.push_back(std::move(j));
    }
    return nlohmann::json{{"sets", sets}};
}

KurtosisReport kurtosis_report_from_json(const nlohmann::json& j, const ClassSchema& schema) {
    KurtosisReport report;
    try {
        for (const auto& item : j.at("sets")) {
            SetKurtosis entry;
            entry.set = LabelSet::from_json(item);
            entry.set.validate(schema);
            entry.mean_kurtosis = item.at("mean_kurtosis").get<double>();
            entry.rank = item.at("rank").get<int>();
            if (item.contains("per_sample")) {
                for (const auto& s : item.at("per_sample")) {
                    entry.per_sample.emplace_back(s.at("id").get<std::string>(),
                                                  s.at("value").get<double>());
                }
            }
            report.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad kurtosis report JSON: ") + e.what());
    }
    return report;
}

} // namespace loads
