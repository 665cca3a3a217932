#include <doctest.h>

#include "promptqd/behavior.hpp"
#include "promptqd/rng.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

using namespace promptqd;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

std::vector<std::string> sample_texts() {
    return {"def add(a, b):\n    return a + b\n",
            "def fact(n):\n    return 1 if n < 2 else n * fact(n - 1)\n",
            "import math\nprint(math.pi)\n",
            "for i in range(10):\n    print(i)\n",
            "xs = list(map(lambda x: x + 1, ys))\n",
            "while True:\n    break\n",
            "class A:\n    pass\n",
            "total = sum(v for v in values if v > 0)\n"};
}

}  // namespace

TEST_SUITE("behavior") {

TEST_CASE("fuse follows the weighted concatenation") {
    const auto d = fuse(vec({1, 0}), vec({0, 1}), 0.5);
    CHECK(d.fused(0) == doctest::Approx(std::sqrt(0.5)));
    CHECK(d.fused(1) == 0.0);
    CHECK(d.fused(2) == 0.0);
    CHECK(d.fused(3) == doctest::Approx(std::sqrt(0.5)));

    const auto one = fuse(vec({0.3, 0.7}), vec({0.9}), 1.0);
    CHECK(one.fused(0) == 0.3);
    CHECK(one.fused(1) == 0.7);
    CHECK(one.fused(2) == 0.0);

    CHECK_THROWS_AS(fuse(vec({0.1}), vec({0.1}), 1.5), ConfigError);
    CHECK_THROWS_AS(fuse(vec({0.1}), vec({0.1}), -0.1), ConfigError);
}

TEST_CASE("fused distance decomposes into component distances") {
    Rng rng(1);
    for (double alpha : {0.5, 0.6, 0.25}) {
        for (int t = 0; t < 50; ++t) {
            Vector s1(2), s2(2), e1(3), e2(3);
            for (auto* v : {&s1, &s2, &e1, &e2})
                for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = rng.uniform();
            const double lhs = (fuse(s1, e1, alpha).fused - fuse(s2, e2, alpha).fused).squaredNorm();
            const double rhs = alpha * (s1 - s2).squaredNorm() + (1 - alpha) * (e1 - e2).squaredNorm();
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("hash embedder collapses whitespace runs") {
    HashNgramEmbedder emb;
    CHECK(HashNgramEmbedder::normalize("  a \t b\n\nc  ") == "a b c");
    CHECK(emb.embed("return  x +\t1") == emb.embed("return x + 1"));
}

TEST_CASE("hash embedder counts character trigrams") {
    HashNgramEmbedder emb(3, 256);
    const Vector v = emb.embed("abcd");
    const auto b1 = static_cast<Eigen::Index>(fnv1a64("abc") % 256);
    const auto b2 = static_cast<Eigen::Index>(fnv1a64("bcd") % 256);
    Vector expected = Vector::Zero(256);
    expected(b1) += 1.0;
    expected(b2) += 1.0;
    expected /= expected.norm();
    CHECK((v - expected).norm() < 1e-15);
    CHECK(v.norm() == doctest::Approx(1.0));
}

TEST_CASE("reducer rejects a degenerate corpus") {
    std::vector<Vector> same(10, vec({1, 2, 3}));
    CHECK_THROWS_AS(fit_reducer(same, 2, 0), FitError);
    std::vector<Vector> few(2, vec({1, 2, 3}));
    CHECK_THROWS_AS(fit_reducer(few, 2, 0), ConfigError);
}

TEST_CASE("reducer reconstructs a corpus lying on a 2-plane") {
    Rng rng(4);
    const Vector origin = vec({1, -2, 0.5, 3, 0});
    const Vector u = vec({1, 0, 1, 0, 2});
    const Vector w = vec({0, 1, -1, 1, 0});
    std::vector<Vector> ref;
    for (int i = 0; i < 60; ++i) ref.push_back(origin + rng.normal() * u + rng.normal() * w);
    const auto red = fit_reducer(ref, 2, 9);
    for (const auto& x : ref) CHECK((red.reconstruct(red.project_raw(x)) - x).norm() < 1e-9);

    const auto again = fit_reducer(ref, 2, 9);
    CHECK(again.components() == red.components());
}

TEST_CASE("semantic pipeline rescales the reference corpus to the unit box") {
    const auto texts = sample_texts();
    auto pipe = SemanticPipeline::fit(std::make_shared<HashNgramEmbedder>(), texts, 2, 3, "unit");
    Vector lo = Vector::Constant(2, 1e9), hi = Vector::Constant(2, -1e9);
    for (const auto& t : texts) {
        const Vector d = pipe.descriptor(t);
        CHECK(d == pipe.descriptor(t));
        lo = lo.cwiseMin(d);
        hi = hi.cwiseMax(d);
    }
    for (int j = 0; j < 2; ++j) {
        CHECK(lo(j) == doctest::Approx(0.0));
        CHECK(hi(j) == doctest::Approx(1.0));
    }
    const Vector out = pipe.descriptor("completely unrelated prose about the weather");
    CHECK((out.array() >= 0.0).all());
    CHECK((out.array() <= 1.0).all());
}

TEST_CASE("code features follow the paradigm ladder") {
    const auto set_based = code_feature_counts("def f(a,b):\n    return list(set(a) & set(b))");
    CHECK(set_based.paradigm == Paradigm::Iterative);
    CHECK(set_based.complexity == 1.0);
    CHECK(set_based.loc == 2.0);

    CHECK(code_feature_counts("def f(n):\n    if n == 0:\n        return 0\n    return f(n - 1)\n").paradigm ==
          Paradigm::Recursive);
    CHECK(code_feature_counts("def f(a,b):\n    return list(filter(lambda x: x in b, a))").paradigm ==
          Paradigm::Functional);
    CHECK(code_feature_counts("import numpy\nx = numpy.zeros(3)\n").paradigm == Paradigm::Library);
    CHECK(code_feature_counts("import typing\nx = 1\n").paradigm == Paradigm::Iterative);
    CHECK(code_feature_counts("for i in range(3):\n    pass\n").paradigm == Paradigm::Iterative);
}

TEST_CASE("recursion outranks functional and library use") {
    const auto c = code_feature_counts(
        "import functools\n"
        "def walk(xs):\n"
        "    return list(map(lambda x: walk(x) if isinstance(x, list) else x, xs))\n");
    CHECK(c.paradigm == Paradigm::Recursive);
}

TEST_CASE("a method call sharing the function name is not recursion") {
    const auto c = code_feature_counts("import statistics\n\ndef median(xs):\n    return statistics.median(xs)\n");
    CHECK(c.paradigm == Paradigm::Library);
}

TEST_CASE("comments and strings do not count") {
    const auto c = code_feature_counts(
        "# if for while\n"
        "def f():\n"
        "    s = \"if and or\"\n"
        "    '''\n"
        "    for while\n"
        "    '''\n"
        "\n"
        "    return s\n");
    CHECK(c.complexity == 1.0);
    CHECK(c.loc == 4.0);
}

TEST_CASE("branch keywords add to complexity") {
    const auto c = code_feature_counts(
        "def f(x):\n"
        "    if x > 0 and x < 10 or x == 20:\n"
        "        return 1\n"
        "    elif x < 0:\n"
        "        return -1\n"
        "    try:\n"
        "        pass\n"
        "    except ValueError:\n"
        "        pass\n"
        "    while x:\n"
        "        x -= 1\n"
        "    for i in range(3):\n"
        "        pass\n");
    CHECK(c.complexity == 1.0 + 7.0);
}

TEST_CASE("running maxima normalize complexity and loc") {
    CodeFeatureNormalizer norm;
    const auto a = norm.observe({4.0, 10.0, Paradigm::Library});
    CHECK(a.complexity == 1.0);
    CHECK(a.loc == 1.0);
    CHECK(a.paradigm == std::array<double, 4>{0, 0, 0, 1});
    const auto b = norm.observe({2.0, 20.0, Paradigm::Recursive});
    CHECK(b.complexity == 0.5);
    CHECK(b.loc == 1.0);
    CHECK(norm.normalize({4.0, 10.0, Paradigm::Iterative}).loc == 0.5);
    CHECK(norm.max_complexity() == 4.0);
    CHECK(norm.max_loc() == 20.0);
}

TEST_CASE("bundled paradigm fixtures agree with their labels") {
    std::ifstream in(default_data_dir() / "paradigm_fixtures.jsonl");
    REQUIRE(in);
    std::string line;
    int total = 0, agree = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        ++total;
        agree += code_feature_counts(j.at("code").get<std::string>()).paradigm ==
                 paradigm_from_name(j.at("label").get<std::string>());
    }
    CHECK(total == 40);
    CHECK(agree >= 36);
}

TEST_CASE("flesch-kincaid on ten monosyllabic words") {
    const auto f = writing_features("The cat sat on a mat and the dog ran.", WritingLexicons::bundled());
    CHECK(f.grade == doctest::Approx(0.39 * 10 + 11.8 * 1 - 15.59));
    CHECK(f.grade == doctest::Approx(0.11));
    CHECK(f.readability == doctest::Approx(0.0055));
}

TEST_CASE("syllable counts") {
    CHECK(count_syllables("cat") == 1);
    CHECK(count_syllables("make") == 1);
    CHECK(count_syllables("table") == 2);
    CHECK(count_syllables("beautiful") == 3);
    CHECK(count_sentences("One. Two! Three?") == 3);
}

TEST_CASE("sentiment follows lexicon sign") {
    const auto& lex = WritingLexicons::bundled();
    CHECK(writing_features("A wonderful, lovely and excellent day.", lex).sentiment > 0.0);
    CHECK(writing_features("A terrible, awful and horrible day.", lex).sentiment < 0.0);
    CHECK(writing_features("The table stood there.", lex).sentiment == 0.0);
    CHECK_THROWS_AS(writing_features("  ... !!! ", lex), ConfigError);
}

TEST_CASE("formality score from part-of-speech shares") {
    const auto& lex = WritingLexicons::bundled();
    // Nouns, articles and prepositions only: F = (100 + 100) / 2.
    CHECK(writing_features("The analysis of the data.", lex).formality == doctest::Approx(1.0));
    // Pronouns, verbs and interjections only: F = (-100 + 100) / 2.
    CHECK(writing_features("Wow, I think you know.", lex).formality == doctest::Approx(0.0));
    const auto v = writing_features("A bright morning.", lex).as_vector();
    CHECK(v.size() == 3);
    CHECK(v(0) == doctest::Approx(0.7));
}

TEST_CASE("ksg recovers gaussian mutual information") {
    Rng rng(17);
    const double rho = 0.6;
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 3000; ++i) {
        const double a = rng.normal(), b = rng.normal();
        xs.push_back(vec({a}));
        ys.push_back(vec({rho * a + std::sqrt(1 - rho * rho) * b}));
    }
    const auto est = estimate_nmi(xs, ys, 3);
    CHECK(std::abs(est.mi_nats - (-0.5 * std::log(1 - rho * rho))) < 0.05);
    CHECK(est.nmi_defined);
}

TEST_CASE("identical variables are flagged") {
    Rng rng(2);
    std::vector<Vector> xs;
    for (int i = 0; i < 200; ++i) xs.push_back(vec({rng.uniform()}));
    const auto est = estimate_nmi(xs, xs, 3);
    CHECK_FALSE(est.nmi_note.empty());
}

TEST_CASE("ksg preconditions") {
    std::vector<Vector> a(3, vec({0.1})), b(4, vec({0.2}));
    CHECK_THROWS_AS(estimate_nmi(a, b, 3), ConfigError);
    CHECK_THROWS_AS(estimate_nmi(a, a, 3), ConfigError);
}

TEST_CASE("duplicate-heavy samples raise the warning flag") {
    Rng rng(5);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 100; ++i) {
        xs.push_back(vec({i < 20 ? 0.5 : rng.uniform()}));
        ys.push_back(vec({i < 20 ? 0.5 : rng.uniform()}));
    }
    CHECK(estimate_nmi(xs, ys, 3).duplicate_warning);
}

TEST_CASE("hybrid coverage of identical samples is one cell each") {
    const auto templates = make_coverage_templates(2, 2, 0.6, 16, 1);
    std::vector<Vector> sem(120, vec({0.3, 0.4})), exp(120, vec({0.9, 0.1}));
    const auto c = hybrid_coverage_gain(sem, exp, 0.6, templates);
    CHECK(c.cells_sem == 1);
    CHECK(c.cells_exp == 1);
    CHECK(c.cells_hyb == 1);
}

}
