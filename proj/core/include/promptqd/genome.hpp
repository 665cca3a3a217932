#ifndef PROMPTQD_GENOME_HPP
#define PROMPTQD_GENOME_HPP

#include "promptqd/common.hpp"
#include "promptqd/rng.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace promptqd {

/// Evolvable soft prompt: n virtual tokens by d embedding dimensions.
/// All entries are finite; the shape is fixed at construction.
class PromptEmbedding {
public:
    explicit PromptEmbedding(Matrix values);

    static PromptEmbedding zeros(std::size_t n_tokens, std::size_t dim);
    /// Rebuilds an n x d embedding from its row-major flattening.
    static PromptEmbedding from_flat(const Eigen::Ref<const Vector>& flat, std::size_t n_tokens,
                                     std::size_t dim);

    std::size_t tokens() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

    const Matrix& values() const noexcept { return values_; }
    /// vec(p), row-major.
    Vector flat() const;

    bool same_shape(const PromptEmbedding& other) const noexcept {
        return tokens() == other.tokens() && dim() == other.dim();
    }

    friend bool operator==(const PromptEmbedding& a, const PromptEmbedding& b) {
        return a.same_shape(b) && a.values_ == b.values_;
    }

private:
    Matrix values_;
};

/// Token table with embeddings. Immutable after construction.
///
/// `subset` lists the task-relevant rows used for the initialization mean;
/// an empty subset means the full table.
class VocabularyTable {
public:
    VocabularyTable(std::vector<std::string> tokens, Matrix embeddings,
                    std::vector<std::size_t> subset = {});

    std::size_t size() const noexcept { return tokens_.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(embeddings_.cols()); }
    const std::string& token(std::size_t index) const { return tokens_.at(index); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    std::optional<std::size_t> index_of(const std::string& token) const;
    const Matrix& embeddings() const noexcept { return embeddings_; }
    const std::vector<std::size_t>& subset() const noexcept { return subset_; }
    /// Mean embedding over the task-relevant subset.
    const Vector& mean() const noexcept { return mean_; }

    /// Binary file: one JSON header line, then n_tokens*dim little-endian values.
    static VocabularyTable load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path, bool double_precision = false) const;

    /// Random table for desk-scale runs: rows ~ N(0, spread^2 I).
    static VocabularyTable synthetic(std::size_t size, std::size_t dim, std::uint64_t seed,
                                     double spread = 1.0);

private:
    std::vector<std::string> tokens_;
    Matrix embeddings_;
    std::vector<std::size_t> subset_;
    Vector mean_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Each row drawn as mean + sigma_init * z with z standard normal.
PromptEmbedding init_embedding(const VocabularyTable& vocab, std::size_t n_tokens,
                               double sigma_init, Rng& rng);

struct Projection {
    std::vector<std::size_t> token_ids;
    std::vector<std::string> tokens;
    /// Mean per-row l2 distance after unit-normalizing row and chosen embedding.
    double error = 0.0;
    /// Mean per-row l2 distance in raw embedding space.
    double raw_error = 0.0;
    /// Rows (or chosen vocabulary rows) with zero norm, left unnormalized.
    std::vector<bool> zero_norm;
};

/// Nearest vocabulary token per row in raw Euclidean distance; ties go to the
/// lowest token index.
Projection project_to_vocab(const PromptEmbedding& p, const VocabularyTable& vocab);

/// Stacks the embeddings of the given token ids.
PromptEmbedding embed_tokens(std::span<const std::size_t> token_ids, const VocabularyTable& vocab);

}  // namespace promptqd

#endif
