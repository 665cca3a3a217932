#ifndef PROMPTQD_METRICS_HPP
#define PROMPTQD_METRICS_HPP

#include "promptqd/archive.hpp"
#include "promptqd/engine.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace promptqd {

/// Lowercased; whitespace separates tokens and each ASCII punctuation
/// character is its own token.
std::vector<std::string> bleu_tokenize(std::string_view text);

/// Sentence BLEU with clipped n-gram counts, uniform weights up to `max_n`,
/// closest-reference-length brevity penalty and no smoothing.
double sentence_bleu(const std::vector<std::string>& hypothesis,
                     const std::vector<std::vector<std::string>>& references, std::size_t max_n = 4);

/// Mean BLEU of each text against all the others. Throws ConfigError on fewer than two texts.
double self_bleu(std::span<const std::string> texts, std::size_t max_n = 4);

/// P(a > b) + 0.5 P(a = b) over all pairs. Throws ConfigError on an empty sample.
double vargha_delaney(std::span<const double> a, std::span<const double> b);

/// Linear-interpolation (type 7) quantile.
double quantile(std::vector<double> values, double q);

struct Interval {
    double low;
    double high;
};

using Statistic = std::function<double(std::span<const double>)>;

double mean_of(std::span<const double> x);
double median_stat(std::span<const double> x);

/// Percentile bootstrap. Deterministic given `seed`.
Interval bootstrap_ci(std::span<const double> sample, const Statistic& statistic, std::size_t n_boot = 1000,
                      double level = 0.95, std::uint64_t seed = 0);

struct SampleSummary {
    std::vector<double> samples;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    Interval median_ci{0.0, 0.0};
};

SampleSummary summarize(std::vector<double> samples, std::uint64_t seed = 0);

/// Per-method metric samples plus pairwise effect sizes.
struct ComparisonReport {
    // method -> metric -> summary
    std::map<std::string, std::map<std::string, SampleSummary>> methods;
    struct Pair {
        std::string a, b, metric;
        double vargha_delaney_a;
    };
    std::vector<Pair> comparisons;

    nlohmann::json to_json() const;
};

/// Summaries for every method and A for every ordered pair (a before b in
/// map order) on metrics present in both.
ComparisonReport compare_methods(const std::map<std::string, std::map<std::string, std::vector<double>>>& samples,
                                 std::uint64_t seed = 0);

struct DynamicsRow {
    std::size_t iteration;
    double coverage_median, coverage_q25, coverage_q75;
    double qd_median, qd_q25, qd_q75;
};

/// Per-iteration median and quartiles across runs. Throws ConfigError on
/// misaligned iteration grids or an empty input.
std::vector<DynamicsRow> coverage_dynamics(std::span<const RunLog> runlogs);
std::string dynamics_csv(const std::vector<DynamicsRow>& rows);

/// Final-run summary: qd_score, coverage, occupied, cells, max and mean elite
/// fitness, and elite self-BLEU when at least two elites exist.
nlohmann::json archive_metrics(const Archive& archive);

}  // namespace promptqd

#endif
