#include <doctest.h>

#include "promptqd/genome.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace promptqd;

namespace {

VocabularyTable small_vocab() {
    Matrix e(4, 2);
    e << 1, 0,
         0, 1,
        -1, 0,
         0, -1;
    return VocabularyTable({"east", "north", "west", "south"}, e);
}

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "promptqd_unit";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_SUITE("genome") {

TEST_CASE("embedding rejects non-finite entries and empty shapes") {
    Matrix m = Matrix::Zero(2, 3);
    m(1, 2) = std::nan("");
    CHECK_THROWS_AS(PromptEmbedding{m}, ConfigError);
    CHECK_THROWS_AS(PromptEmbedding{Matrix(0, 3)}, ConfigError);
}

TEST_CASE("flat is row-major and from_flat inverts it") {
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    const PromptEmbedding p(m);
    const Vector f = p.flat();
    for (int i = 0; i < 6; ++i) CHECK(f(i) == i + 1);
    CHECK(PromptEmbedding::from_flat(f, 2, 3) == p);
    CHECK_THROWS_AS(PromptEmbedding::from_flat(f, 3, 3), ConfigError);
}

TEST_CASE("vocabulary mean is recomputed over the subset") {
    Matrix e(3, 1);
    e << 1, 2, 6;
    CHECK(VocabularyTable({"a", "b", "c"}, e).mean()(0) == doctest::Approx(3.0));
    CHECK(VocabularyTable({"a", "b", "c"}, e, {0, 1}).mean()(0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(VocabularyTable({"a"}, Matrix::Ones(1, 1)), ConfigError);
    CHECK_THROWS_AS(VocabularyTable({"a", "a"}, Matrix::Ones(2, 1)), ConfigError);
}

TEST_CASE("init_embedding with zero spread returns the vocabulary mean") {
    const auto vocab = VocabularyTable::synthetic(30, 5, 1);
    Rng rng(2);
    const auto p = init_embedding(vocab, 3, 0.0, rng);
    for (Eigen::Index r = 0; r < 3; ++r) CHECK(p.values().row(r) == vocab.mean().transpose());
}

TEST_CASE("init_embedding sample mean concentrates at the vocabulary mean") {
    const auto vocab = VocabularyTable::synthetic(50, 8, 9);
    Rng rng(10);
    Vector sum = Vector::Zero(8);
    const int samples = 10000;
    for (int i = 0; i < samples; ++i) sum += init_embedding(vocab, 1, 0.1, rng).values().row(0).transpose();
    const Vector mean = sum / samples;
    for (int j = 0; j < 8; ++j) CHECK(std::abs(mean(j) - vocab.mean()(j)) < 3.0 * 0.1 / 100.0);
}

TEST_CASE("init_embedding is deterministic for a seed") {
    const auto vocab = VocabularyTable::synthetic(20, 4, 3);
    Rng a(5), b(5);
    CHECK(init_embedding(vocab, 8, 0.1, a) == init_embedding(vocab, 8, 0.1, b));
}

TEST_CASE("projection of an exact vocabulary row has zero error") {
    const auto vocab = small_vocab();
    Matrix m(2, 2);
    m << 0, 1,
         0, -1;
    const auto proj = project_to_vocab(PromptEmbedding(m), vocab);
    CHECK(proj.tokens == std::vector<std::string>{"north", "south"});
    CHECK(proj.error == doctest::Approx(0.0));
    CHECK(proj.raw_error == doctest::Approx(0.0));
}

TEST_CASE("projection ties go to the lowest token index") {
    const auto vocab = small_vocab();
    Matrix m(1, 2);
    m << 0.5, 0.5;  // equidistant from east and north
    CHECK(project_to_vocab(PromptEmbedding(m), vocab).token_ids == std::vector<std::size_t>{0});
}

TEST_CASE("projection matches an exhaustive nearest-neighbor scan") {
    const auto vocab = VocabularyTable::synthetic(100, 16, 21);
    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix m(8, 16);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
        const auto proj = project_to_vocab(PromptEmbedding(m), vocab);
        for (Eigen::Index r = 0; r < 8; ++r) {
            std::size_t best = 0;
            double best_d = 1e300;
            for (std::size_t v = 0; v < vocab.size(); ++v) {
                double d = 0;
                for (Eigen::Index c = 0; c < 16; ++c) {
                    const double x = m(r, c) - vocab.embeddings()(static_cast<Eigen::Index>(v), c);
                    d += x * x;
                }
                if (d < best_d) {
                    best_d = d;
                    best = v;
                }
            }
            CHECK(proj.token_ids[static_cast<std::size_t>(r)] == best);
        }
        CHECK(proj.error >= 0.0);
        CHECK(proj.error <= 2.0);
    }
}

TEST_CASE("projection is idempotent through re-embedding") {
    const auto vocab = VocabularyTable::synthetic(40, 6, 4);
    Rng rng(8);
    const auto p = init_embedding(vocab, 5, 1.0, rng);
    const auto first = project_to_vocab(p, vocab);
    const auto again = project_to_vocab(embed_tokens(first.token_ids, vocab), vocab);
    CHECK(again.token_ids == first.token_ids);
    CHECK(again.error == doctest::Approx(0.0));
}

TEST_CASE("zero-norm rows are flagged") {
    const auto vocab = small_vocab();
    const auto proj = project_to_vocab(PromptEmbedding::zeros(2, 2), vocab);
    CHECK(proj.zero_norm == std::vector<bool>{true, true});
}

TEST_CASE("projection rejects a dimension mismatch") {
    CHECK_THROWS_AS(project_to_vocab(PromptEmbedding::zeros(1, 3), small_vocab()), ConfigError);
}

TEST_CASE("vocabulary file round trip") {
    Matrix e(3, 2);
    e << 0.5, -1.25, 2, 3, 4.5, 0.125;
    const VocabularyTable v({"x", "y", "z"}, e, {1, 2});
    const auto path = temp_path("vocab.bin");
    v.save(path);
    const auto back = VocabularyTable::load(path);
    CHECK(back.tokens() == v.tokens());
    CHECK(back.subset() == v.subset());
    CHECK(back.embeddings() == v.embeddings());
    CHECK(*back.index_of("z") == 2);
    CHECK_FALSE(back.index_of("w").has_value());
}

TEST_CASE("truncated or padded vocabulary files fail to load") {
    const auto v = VocabularyTable::synthetic(4, 3, 1);
    const auto path = temp_path("vocab_bad.bin");
    v.save(path, true);
    const auto full = std::filesystem::file_size(path);

    std::filesystem::resize_file(path, full - 8);
    CHECK_THROWS_AS(VocabularyTable::load(path), LoadError);

    v.save(path, true);
    {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out << "junkjunk";
    }
    CHECK_THROWS_AS(VocabularyTable::load(path), LoadError);
    CHECK_THROWS_AS(VocabularyTable::load(temp_path("does_not_exist.bin")), LoadError);
}

}
