#include "promptqd/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace promptqd {

using nlohmann::json;

std::vector<std::string> bleu_tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur += static_cast<char>(std::tolower(c));
        }
    }
    flush();
    return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& toks, std::size_t n) {
    NgramCounts counts;
    if (toks.size() < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                          toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
}

}  // namespace

double sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::vector<std::string>>& refs,
                     std::size_t max_n) {
    if (max_n == 0) throw ConfigError("max_n must be positive");
    if (refs.empty()) throw ConfigError("BLEU needs at least one reference");
    if (hyp.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto h = ngrams(hyp, n);
        std::size_t total = 0, matched = 0;
        NgramCounts max_ref;
        for (const auto& r : refs)
            for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
        for (const auto& [g, c] : h) {
            total += c;
            const auto it = max_ref.find(g);
            if (it != max_ref.end()) matched += std::min(c, it->second);
        }
        if (matched == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
    }

    const double c = static_cast<double>(hyp.size());
    double r = static_cast<double>(refs.front().size());
    for (const auto& ref : refs) {
        const double len = static_cast<double>(ref.size());
        if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
    }
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / static_cast<double>(max_n));
}

double self_bleu(std::span<const std::string> texts, std::size_t max_n) {
    if (texts.size() < 2) throw ConfigError("self-BLEU needs at least two texts");
    std::vector<std::vector<std::string>> toks;
    toks.reserve(texts.size());
    for (const auto& t : texts) toks.push_back(bleu_tokenize(t));
    double sum = 0.0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        std::vector<std::vector<std::string>> refs;
        refs.reserve(toks.size() - 1);
        for (std::size_t j = 0; j < toks.size(); ++j)
            if (j != i) refs.push_back(toks[j]);
        sum += sentence_bleu(toks[i], refs, max_n);
    }
    return sum / static_cast<double>(toks.size());
}

double vargha_delaney(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ConfigError("Vargha-Delaney A needs non-empty samples");
    double wins = 0.0;
    for (double x : a)
        for (double y : b) wins += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ConfigError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double mean_of(std::span<const double> x) {
    if (x.empty()) throw ConfigError("mean of an empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double median_stat(std::span<const double> x) { return quantile({x.begin(), x.end()}, 0.5); }

Interval bootstrap_ci(std::span<const double> sample, const Statistic& statistic, std::size_t n_boot, double level,
                      std::uint64_t seed) {
    if (sample.size() < 2) throw ConfigError("bootstrap needs at least two observations");
    if (n_boot == 0) throw ConfigError("n_boot must be positive");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
    Rng rng(seed);
    std::vector<double> stats;
    stats.reserve(n_boot);
    std::vector<double> resample(sample.size());
    for (std::size_t b = 0; b < n_boot; ++b) {
        for (auto& v : resample) v = sample[rng.below(sample.size())];
        stats.push_back(statistic(resample));
    }
    const double tail = (1.0 - level) / 2.0;
    return {quantile(stats, tail), quantile(stats, 1.0 - tail)};
}

SampleSummary summarize(std::vector<double> samples, std::uint64_t seed) {
    SampleSummary s;
    s.median = quantile(samples, 0.5);
    s.q25 = quantile(samples, 0.25);
    s.q75 = quantile(samples, 0.75);
    s.median_ci = samples.size() >= 2 ? bootstrap_ci(samples, median_stat, 1000, 0.95, seed)
                                      : Interval{s.median, s.median};
    s.samples = std::move(samples);
    return s;
}

ComparisonReport compare_methods(const std::map<std::string, std::map<std::string, std::vector<double>>>& samples,
                                 std::uint64_t seed) {
    ComparisonReport report;
    for (const auto& [method, metrics] : samples)
        for (const auto& [metric, xs] : metrics) report.methods[method][metric] = summarize(xs, seed);
    for (auto a = samples.begin(); a != samples.end(); ++a)
        for (auto b = std::next(a); b != samples.end(); ++b)
            for (const auto& [metric, xs] : a->second) {
                const auto it = b->second.find(metric);
                if (it == b->second.end()) continue;
                report.comparisons.push_back({a->first, b->first, metric, vargha_delaney(xs, it->second)});
            }
    return report;
}

json ComparisonReport::to_json() const {
    json j = {{"methods", json::object()}, {"comparisons", json::array()}};
    for (const auto& [method, metrics] : methods)
        for (const auto& [metric, s] : metrics)
            j["methods"][method][metric] = {{"samples", s.samples},
                                            {"n", s.samples.size()},
                                            {"median", s.median},
                                            {"q25", s.q25},
                                            {"q75", s.q75},
                                            {"median_ci95", {s.median_ci.low, s.median_ci.high}}};
    for (const auto& p : comparisons)
        j["comparisons"].push_back({{"a", p.a}, {"b", p.b}, {"metric", p.metric}, {"vargha_delaney_a", p.vargha_delaney_a}});
    return j;
}

std::vector<DynamicsRow> coverage_dynamics(std::span<const RunLog> runlogs) {
    if (runlogs.empty()) throw ConfigError("coverage dynamics needs at least one run log");
    const auto& ref = runlogs.front().records;
    for (const auto& log : runlogs) {
        if (log.records.size() != ref.size()) throw ConfigError("run logs have different lengths");
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (log.records[i].iteration != ref[i].iteration)
                throw ConfigError("run logs have misaligned iteration grids");
    }
    std::vector<DynamicsRow> rows;
    rows.reserve(ref.size());
    std::vector<double> cov(runlogs.size()), qd(runlogs.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        for (std::size_t r = 0; r < runlogs.size(); ++r) {
            cov[r] = runlogs[r].records[i].coverage;
            qd[r] = runlogs[r].records[i].qd_score;
        }
        rows.push_back({ref[i].iteration, quantile(cov, 0.5), quantile(cov, 0.25), quantile(cov, 0.75),
                        quantile(qd, 0.5), quantile(qd, 0.25), quantile(qd, 0.75)});
    }
    return rows;
}

std::string dynamics_csv(const std::vector<DynamicsRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,coverage_median,coverage_q25,coverage_q75,qd_median,qd_q25,qd_q75\n";
    for (const auto& r : rows)
        out << r.iteration << ',' << r.coverage_median << ',' << r.coverage_q25 << ',' << r.coverage_q75 << ','
            << r.qd_median << ',' << r.qd_q25 << ',' << r.qd_q75 << '\n';
    return out.str();
}

json archive_metrics(const Archive& archive) {
    std::vector<std::string> texts;
    double max_f = 0.0, sum_f = 0.0;
    for (auto cell : archive.occupied_cells()) {
        const auto& slot = *archive.slot(cell);
        texts.push_back(slot.candidate.text);
        max_f = std::max(max_f, slot.fitness.median());
        sum_f += slot.fitness.median();
    }
    json j = {{"qd_score", archive.qd_score()},
              {"coverage", archive.coverage()},
              {"occupied", archive.occupied()},
              {"cells", archive.cells()},
              {"max_fitness", max_f},
              {"mean_fitness", texts.empty() ? 0.0 : sum_f / static_cast<double>(texts.size())}};
    j["self_bleu"] = texts.size() >= 2 ? json(self_bleu(texts)) : json(nullptr);
    return j;
}

}  // namespace promptqd
