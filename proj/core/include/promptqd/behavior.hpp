#ifndef PROMPTQD_BEHAVIOR_HPP
#define PROMPTQD_BEHAVIOR_HPP

#include "promptqd/common.hpp"

#include <array>
#include <atomic>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace promptqd {

// ---------------------------------------------------------------------------
// Descriptors

/// Hybrid behavior descriptor. `fused` is always
/// concat(sqrt(alpha) * semantic, sqrt(1 - alpha) * explicit).
struct BehaviorDescriptor {
    Vector semantic;
    Vector explicit_part;
    double alpha = 0.6;
    Vector fused;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(fused.size()); }
};

/// Weighted concatenation. Throws ConfigError if alpha is outside [0, 1].
BehaviorDescriptor fuse(const Eigen::Ref<const Vector>& semantic,
                        const Eigen::Ref<const Vector>& explicit_part, double alpha);

// ---------------------------------------------------------------------------
// Semantic component

/// Text -> vector. Implementations must be deterministic.
class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual Vector embed(std::string_view text) const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
};

/// Character n-gram hashing embedder. Whitespace runs are collapsed and the
/// text is trimmed before n-grams are taken; the count vector is l2-normalized.
class HashNgramEmbedder final : public TextEmbedder {
public:
    explicit HashNgramEmbedder(std::size_t n = 3, std::size_t buckets = 256);
    Vector embed(std::string_view text) const override;
    std::size_t dim() const override { return buckets_; }
    std::string name() const override;

    static std::string normalize(std::string_view text);

private:
    std::size_t n_;
    std::size_t buckets_;
};

/// Frozen linear projection with per-coordinate min-max rescaling taken from
/// the reference corpus. Outputs are clamped to [0, 1].
class LinearReducer {
public:
    LinearReducer() = default;
    LinearReducer(Matrix components, Vector offset, Vector lo, Vector hi, std::uint64_t seed);

    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(offset_.size()); }
    std::size_t output_dim() const noexcept { return static_cast<std::size_t>(components_.rows()); }
    bool fitted() const noexcept { return components_.size() > 0; }

    /// Unscaled projection components * (x - offset).
    Vector project_raw(const Eigen::Ref<const Vector>& x) const;
    /// Maps a raw projection back to input space.
    Vector reconstruct(const Eigen::Ref<const Vector>& raw) const;
    /// Rescaled and clamped projection in [0, 1]^d_s.
    Vector apply(const Eigen::Ref<const Vector>& x) const;

    const Matrix& components() const noexcept { return components_; }
    const Vector& offset() const noexcept { return offset_; }
    const Vector& lower() const noexcept { return lo_; }
    const Vector& upper() const noexcept { return hi_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    Matrix components_;  // d_s x D, orthonormal rows
    Vector offset_;
    Vector lo_, hi_;
    std::uint64_t seed_ = 0;
};

/// Principal-component reducer fitted on a reference corpus.
/// Throws FitError on a degenerate corpus and ConfigError on bad shapes.
LinearReducer fit_reducer(std::span<const Vector> reference, std::size_t d_s, std::uint64_t seed);

class SemanticPipeline {
public:
    SemanticPipeline(std::shared_ptr<const TextEmbedder> embedder, LinearReducer reducer,
                     std::string reference_corpus_id);

    /// Fits the reducer on the embedded reference texts.
    static SemanticPipeline fit(std::shared_ptr<const TextEmbedder> embedder,
                                std::span<const std::string> reference_texts, std::size_t d_s,
                                std::uint64_t seed, std::string reference_corpus_id);

    Vector descriptor(std::string_view text) const;
    std::size_t dim() const noexcept { return reducer_.output_dim(); }
    const LinearReducer& reducer() const noexcept { return reducer_; }
    const std::string& reference_corpus_id() const noexcept { return corpus_id_; }
    const TextEmbedder& embedder() const noexcept { return *embedder_; }

private:
    std::shared_ptr<const TextEmbedder> embedder_;
    LinearReducer reducer_;
    std::string corpus_id_;
};

// ---------------------------------------------------------------------------
// Explicit component: code

enum class Paradigm { Iterative = 0, Recursive = 1, Functional = 2, Library = 3 };

const char* paradigm_name(Paradigm p);
Paradigm paradigm_from_name(std::string_view name);

/// Monotone running maximum, safe for concurrent updates.
class RunningMax {
public:
    explicit RunningMax(double initial = 0.0) : value_(initial) {}
    RunningMax(const RunningMax& other) : value_(other.value()) {}
    RunningMax& operator=(const RunningMax& other) {
        value_.store(other.value());
        return *this;
    }

    void observe(double v);
    double value() const noexcept { return value_.load(); }
    /// v / max, or 0 while nothing positive has been observed.
    double normalize(double v) const;

private:
    std::atomic<double> value_;
};

struct CodeFeatureCounts {
    double complexity = 1.0;  // 1 + branch keywords
    double loc = 0.0;         // non-blank, non-comment lines
    Paradigm paradigm = Paradigm::Iterative;
};

struct ExplicitFeaturesCode {
    double complexity = 0.0;
    double loc = 0.0;
    std::array<double, 4> paradigm{1.0, 0.0, 0.0, 0.0};

    Vector as_vector() const;
};

struct CodeFeatureOptions {
    /// Top-level modules whose import does not count as library use.
    std::unordered_set<std::string> builtin_modules{"builtins", "__future__", "typing"};
};

/// Lexical feature pass over Python-like source. Never fails.
CodeFeatureCounts code_feature_counts(std::string_view source,
                                      const CodeFeatureOptions& options = {});

class CodeFeatureNormalizer {
public:
    /// Updates the running maxima with `counts`, then normalizes.
    ExplicitFeaturesCode observe(const CodeFeatureCounts& counts);
    /// Normalizes with the current maxima without updating them.
    ExplicitFeaturesCode normalize(const CodeFeatureCounts& counts) const;

    double max_complexity() const noexcept { return complexity_.value(); }
    double max_loc() const noexcept { return loc_.value(); }
    void restore(double max_complexity, double max_loc);

private:
    RunningMax complexity_;
    RunningMax loc_;
};

// ---------------------------------------------------------------------------
// Explicit component: writing

/// Bundled sentiment lexicon and part-of-speech word lists.
struct WritingLexicons {
    std::unordered_map<std::string, double> valence;
    std::unordered_set<std::string> articles, pronouns, prepositions, interjections;
    std::unordered_set<std::string> verbs, adverbs, adjectives, nouns;

    static WritingLexicons load(const std::filesystem::path& data_dir);
    static const WritingLexicons& bundled();
};

enum class PartOfSpeech { Noun, Adjective, Preposition, Article, Pronoun, Verb, Adverb, Interjection };

PartOfSpeech tag_word(std::string_view lower_word, const WritingLexicons& lex);

struct ExplicitFeaturesWriting {
    double sentiment = 0.0;    // [-1, 1]
    double formality = 0.5;    // [0, 1]
    double readability = 0.0;  // [0, 1]
    double grade = 0.0;        // raw Flesch-Kincaid grade

    /// [ (sentiment + 1) / 2, formality, readability ]
    Vector as_vector() const;
};

std::vector<std::string> split_words(std::string_view text);
std::size_t count_sentences(std::string_view text);
std::size_t count_syllables(std::string_view word);
double flesch_kincaid_grade(std::size_t words, std::size_t sentences, std::size_t syllables);

/// Throws ConfigError when the text has no words.
ExplicitFeaturesWriting writing_features(std::string_view text, const WritingLexicons& lex);

// ---------------------------------------------------------------------------
// Mutual information

struct MIEstimate {
    double mi_nats = 0.0;
    double h_sem = 0.0;
    double h_exp = 0.0;
    double nmi = 0.0;
    bool nmi_defined = true;
    /// Set when the estimate cannot be trusted as normalized information
    /// (non-positive marginal entropy, or I exceeding the smaller entropy).
    std::string nmi_note;
    bool duplicate_warning = false;
    std::size_t k_neighbors = 3;
};

/// KSG estimator 1 with max-norm neighborhoods; marginal entropies by
/// Kozachenko-Leonenko. Every coordinate is standardized to unit variance first.
MIEstimate estimate_nmi(std::span<const Vector> samples_sem, std::span<const Vector> samples_exp,
                        std::size_t k = 3);

/// Kozachenko-Leonenko differential entropy (nats) with the max-norm.
double kl_entropy(std::span<const Vector> samples, std::size_t k = 3);

// ---------------------------------------------------------------------------
// Characterization used by the engine

class Characterizer {
public:
    virtual ~Characterizer() = default;
    virtual BehaviorDescriptor describe(std::string_view text) = 0;
    virtual std::size_t semantic_dim() const = 0;
    virtual std::size_t explicit_dim() const = 0;
    virtual double alpha() const = 0;
    /// "code", "writing" or "codec"; recorded in archive snapshots.
    virtual std::string explicit_kind() const = 0;
    /// Raw feature counts for the last describe() call, if any.
    virtual std::vector<double> last_raw_features() const { return {}; }
    /// Running-normalizer state, if any, for checkpoints.
    virtual std::vector<double> normalizer_state() const { return {}; }
    virtual void restore_normalizer(std::span<const double>) {}
};

enum class ExplicitKind { Code, Writing };

class HybridCharacterizer final : public Characterizer {
public:
    HybridCharacterizer(SemanticPipeline pipeline, ExplicitKind kind, double alpha,
                        CodeFeatureOptions code_options = {},
                        const WritingLexicons* lexicons = nullptr);

    BehaviorDescriptor describe(std::string_view text) override;
    std::size_t semantic_dim() const override { return pipeline_.dim(); }
    std::size_t explicit_dim() const override { return kind_ == ExplicitKind::Code ? 6 : 3; }
    double alpha() const override { return alpha_; }
    std::string explicit_kind() const override {
        return kind_ == ExplicitKind::Code ? "code" : "writing";
    }
    std::vector<double> last_raw_features() const override { return last_raw_; }
    std::vector<double> normalizer_state() const override;
    void restore_normalizer(std::span<const double> state) override;

    Vector explicit_descriptor(std::string_view text);
    const SemanticPipeline& pipeline() const noexcept { return pipeline_; }

private:
    SemanticPipeline pipeline_;
    ExplicitKind kind_;
    double alpha_;
    CodeFeatureOptions code_options_;
    const WritingLexicons* lexicons_;
    CodeFeatureNormalizer normalizer_;
    std::vector<double> last_raw_;
};

// ---------------------------------------------------------------------------
// Coverage of semantic-only / explicit-only / hybrid binning

struct CoverageTemplates {
    std::vector<Vector> semantic;  // centroids in [0,1]^d_s
    std::vector<Vector> explicit_part;
    std::vector<Vector> hybrid;  // centroids in the fused space
};

/// CVT templates with `cells` centroids each, fitted by k-means on uniform
/// samples of the unit box (scaled by the fusion weights for the hybrid space).
CoverageTemplates make_coverage_templates(std::size_t d_s, std::size_t d_e, double alpha,
                                          std::size_t cells, std::uint64_t seed,
                                          std::size_t samples_per_cell = 20);

struct CoverageCounts {
    std::size_t cells_sem = 0;
    std::size_t cells_exp = 0;
    std::size_t cells_hyb = 0;
};

CoverageCounts hybrid_coverage_gain(std::span<const Vector> semantic,
                                    std::span<const Vector> explicit_part, double alpha,
                                    const CoverageTemplates& templates);

/// Text-level variant: computes both components per text first.
CoverageCounts hybrid_coverage_gain(std::span<const std::string> texts, HybridCharacterizer& ch,
                                    const CoverageTemplates& templates);

}  // namespace promptqd

#endif
