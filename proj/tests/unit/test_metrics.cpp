#include <doctest.h>

#include "promptqd/metrics.hpp"

#include <cmath>

using namespace promptqd;

namespace {

std::vector<std::string> toks(std::string_view s) { return bleu_tokenize(s); }

RunLog ramp(double slope, std::size_t n) {
    RunLog log;
    for (std::size_t i = 1; i <= n; ++i) {
        RunRecord r;
        r.iteration = i;
        r.coverage = slope * static_cast<double>(i);
        r.qd_score = 2 * slope * static_cast<double>(i);
        log.records.push_back(r);
    }
    return log;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("bleu tokenization splits punctuation") {
    CHECK(toks("Hello, World!") == std::vector<std::string>{"hello", ",", "world", "!"});
    CHECK(toks("  a\tb\n") == std::vector<std::string>{"a", "b"});
    CHECK(toks("f(x)") == std::vector<std::string>{"f", "(", "x", ")"});
}

TEST_CASE("sentence bleu hand-computed cases") {
    const auto h = toks("the cat sat on the mat");
    CHECK(sentence_bleu(h, {h}) == doctest::Approx(1.0));

    // Unigram and bigram precision 1, brevity penalty exp(1 - 3/2).
    CHECK(sentence_bleu(toks("the cat"), {toks("the cat sat")}, 2) == doctest::Approx(std::exp(-0.5)));

    // Clipped unigrams: "the the the" against "the cat" gives 1/3.
    CHECK(sentence_bleu(toks("the the the"), {toks("the cat")}, 1) == doctest::Approx(1.0 / 3.0));

    // No matching bigram and no smoothing.
    CHECK(sentence_bleu(toks("cat the"), {toks("the cat")}, 2) == 0.0);

    // Closest reference length is used for the brevity penalty.
    CHECK(sentence_bleu(toks("a b"), {toks("a b c d e f"), toks("a b x")}, 1) == doctest::Approx(std::exp(1 - 1.5)));
}

TEST_CASE("self-bleu extremes") {
    const std::vector<std::string> same{"x = 1 + 2", "x = 1 + 2", "x = 1 + 2"};
    CHECK(self_bleu(same) == doctest::Approx(1.0));
    const std::vector<std::string> apart{"alpha beta gamma delta", "one two three four"};
    CHECK(self_bleu(apart) == 0.0);
    CHECK_THROWS_AS(self_bleu(std::vector<std::string>{"only"}), ConfigError);
}

TEST_CASE("self-bleu is the mean of leave-one-out scores") {
    const std::vector<std::string> texts{"a b c d", "a b c e", "a b x y", "q r s t"};
    double sum = 0.0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::vector<std::vector<std::string>> refs;
        for (std::size_t j = 0; j < texts.size(); ++j)
            if (j != i) refs.push_back(toks(texts[j]));
        sum += sentence_bleu(toks(texts[i]), refs, 2);
    }
    CHECK(self_bleu(texts, 2) == doctest::Approx(sum / 4.0));
}

TEST_CASE("vargha-delaney effect size") {
    const std::vector<double> a{1, 2, 3}, b{2, 3, 4};
    // Wins: (3,2). Ties: (2,2), (3,3). A = (1 + 0.5 * 2) / 9.
    CHECK(vargha_delaney(a, b) == doctest::Approx(2.0 / 9.0));
    CHECK(vargha_delaney(b, a) == doctest::Approx(7.0 / 9.0));
    CHECK(vargha_delaney(a, a) == doctest::Approx(0.5));
    const std::vector<double> c{0.1, 0.5, 0.7}, d{0.2, 0.6, 0.6};
    // Wins: (0.7,0.2), (0.7,0.6)x2, (0.5,0.2) = 4 of 9 -> 0.4444; swapped order gives 5/9.
    CHECK(vargha_delaney(c, d) == doctest::Approx(4.0 / 9.0));
    CHECK(vargha_delaney(std::vector<double>{5, 6}, std::vector<double>{1, 2, 3}) == 1.0);
    CHECK_THROWS_AS(vargha_delaney(std::vector<double>{}, b), ConfigError);
}

TEST_CASE("vargha-delaney agrees with exhaustive pair enumeration") {
    auto enumerate = [](const std::vector<double>& a, const std::vector<double>& b) {
        double wins = 0, ties = 0;
        for (double x : a)
            for (double y : b) {
                wins += x > y;
                ties += x == y;
            }
        return (wins + 0.5 * ties) / static_cast<double>(a.size() * b.size());
    };
    const std::vector<double> a{1, 2, 3};
    // Two wins (3 > 2, 3 > 2.5) and one tie (2 = 2): 2.5 / 9.
    const std::vector<double> b{2, 2.5, 4};
    CHECK(vargha_delaney(a, b) == enumerate(a, b));
    CHECK(vargha_delaney(a, b) == doctest::Approx(0.2778).epsilon(1e-4));
    // Two wins and two ties: 3 / 9.
    const std::vector<double> c{2, 2, 4};
    CHECK(vargha_delaney(a, c) == enumerate(a, c));
    CHECK(vargha_delaney(a, c) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("bootstrap edge cases") {
    const std::vector<double> constant(10, 0.4);
    const auto ci = bootstrap_ci(constant, mean_of, 500, 0.95, 1);
    CHECK(ci.low == doctest::Approx(0.4));
    CHECK(ci.high == doctest::Approx(0.4));

    // Mean of Uniform[0,1]: quadrupling n halves the interval width.
    double small = 0.0, large = 0.0;
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x100, x400;
        for (int i = 0; i < 100; ++i) x100.push_back(rng.uniform());
        for (int i = 0; i < 400; ++i) x400.push_back(rng.uniform());
        const auto a = bootstrap_ci(x100, mean_of, 1000, 0.95, static_cast<std::uint64_t>(rep));
        const auto b = bootstrap_ci(x400, mean_of, 1000, 0.95, static_cast<std::uint64_t>(rep));
        small += a.high - a.low;
        large += b.high - b.low;
    }
    CHECK(large / small == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("single-run dynamics have zero spread") {
    const std::vector<RunLog> logs{ramp(0.05, 3)};
    for (const auto& row : coverage_dynamics(logs)) {
        CHECK(row.coverage_q25 == row.coverage_median);
        CHECK(row.coverage_q75 == row.coverage_median);
    }
}

TEST_CASE("type-7 quantiles") {
    const std::vector<double> v{0.3, 0.1, 0.2};
    CHECK(quantile(v, 0.25) == doctest::Approx(0.15));
    CHECK(quantile(v, 0.5) == doctest::Approx(0.2));
    CHECK(quantile(v, 0.75) == doctest::Approx(0.25));
    CHECK(quantile(v, 0.0) == doctest::Approx(0.1));
    CHECK(quantile(v, 1.0) == doctest::Approx(0.3));
    CHECK(quantile({0.1, 0.2, 0.3, 0.4}, 0.25) == doctest::Approx(0.175));
}

TEST_CASE("bootstrap interval is deterministic and brackets the statistic") {
    std::vector<double> x;
    Rng rng(1);
    for (int i = 0; i < 40; ++i) x.push_back(rng.normal());
    const auto a = bootstrap_ci(x, median_stat, 2000, 0.95, 5);
    const auto b = bootstrap_ci(x, median_stat, 2000, 0.95, 5);
    CHECK(a.low == b.low);
    CHECK(a.high == b.high);
    CHECK(a.low <= median_stat(x));
    CHECK(a.high >= median_stat(x));
    const auto narrow = bootstrap_ci(x, mean_of, 2000, 0.5, 5);
    const auto wide = bootstrap_ci(x, mean_of, 2000, 0.99, 5);
    CHECK(wide.high - wide.low > narrow.high - narrow.low);
    // Standard error of the mean is about 1/sqrt(40).
    const auto ci = bootstrap_ci(x, mean_of, 4000, 0.95, 6);
    CHECK((ci.high - ci.low) == doctest::Approx(2 * 1.96 / std::sqrt(40.0)).epsilon(0.25));
}

TEST_CASE("summaries and comparisons") {
    const auto s = summarize({0.3, 0.1, 0.2});
    CHECK(s.median == doctest::Approx(0.2));
    CHECK(s.q25 == doctest::Approx(0.15));
    CHECK(s.q75 == doctest::Approx(0.25));

    std::map<std::string, std::map<std::string, std::vector<double>>> samples;
    samples["full"]["qd_score"] = {2, 3, 4};
    samples["full"]["coverage"] = {0.5, 0.6, 0.7};
    samples["frozen"]["qd_score"] = {1, 2, 3};
    const auto report = compare_methods(samples);
    REQUIRE(report.comparisons.size() == 1);
    const auto& p = report.comparisons.front();
    CHECK(p.metric == "qd_score");
    CHECK(p.a == "frozen");
    CHECK(p.b == "full");
    CHECK(p.vargha_delaney_a == doctest::Approx(2.0 / 9.0));
    const auto j = report.to_json();
    CHECK(j.at("methods").at("full").at("coverage").at("n") == 3);
    CHECK(j.at("comparisons").size() == 1);
}

TEST_CASE("coverage dynamics across runs") {
    std::vector<RunLog> logs{ramp(0.01, 5), ramp(0.02, 5), ramp(0.03, 5)};
    const auto rows = coverage_dynamics(logs);
    REQUIRE(rows.size() == 5);
    CHECK(rows[3].iteration == 4);
    CHECK(rows[3].coverage_median == doctest::Approx(0.08));
    CHECK(rows[3].coverage_q25 == doctest::Approx(0.06));
    CHECK(rows[3].coverage_q75 == doctest::Approx(0.10));
    CHECK(rows[3].qd_median == doctest::Approx(0.16));
    const auto csv = dynamics_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

    logs.push_back(ramp(0.01, 4));
    CHECK_THROWS_AS(coverage_dynamics(logs), ConfigError);
    CHECK_THROWS_AS(coverage_dynamics(std::vector<RunLog>{}), ConfigError);
}

TEST_CASE("archive metrics") {
    Archive a({Vector::Zero(1), Vector::Ones(1)}, 2);
    auto j = archive_metrics(a);
    CHECK(j.at("occupied") == 0);
    CHECK(j.at("self_bleu").is_null());
    CHECK(j.at("mean_fitness") == 0.0);
    for (double x : {0.0, 1.0}) {
        BehaviorDescriptor d;
        d.fused = Vector::Constant(1, x);
        a.try_insert(Candidate{x == 0.0 ? "a b c" : "d e f", PromptEmbedding::zeros(1, 1), d, 1, {}}, 0.2 + 0.4 * x);
    }
    j = archive_metrics(a);
    CHECK(j.at("qd_score").get<double>() == doctest::Approx(0.8));
    CHECK(j.at("coverage").get<double>() == 1.0);
    CHECK(j.at("max_fitness").get<double>() == doctest::Approx(0.6));
    CHECK(j.at("mean_fitness").get<double>() == doctest::Approx(0.4));
    CHECK(j.at("self_bleu").get<double>() == 0.0);
}

}
