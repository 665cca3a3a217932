#ifndef PROMPTQD_ARCHIVE_HPP
#define PROMPTQD_ARCHIVE_HPP

#include "promptqd/behavior.hpp"
#include "promptqd/genome.hpp"
#include "promptqd/rng.hpp"

#include <nlohmann/json_fwd.hpp>

#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace promptqd {

struct Candidate {
    std::string text;
    PromptEmbedding embedding;
    BehaviorDescriptor descriptor;
    std::size_t eval_count = 1;
    /// Unnormalized explicit features (e.g. complexity and loc counts), if any.
    std::vector<double> raw_features;
};

/// Up to `capacity` most recent fitness values; median over the contents.
class FitnessBuffer {
public:
    explicit FitnessBuffer(std::size_t capacity = 3);
    FitnessBuffer(std::size_t capacity, double first);

    void push(double value);
    double median() const noexcept { return median_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    /// Oldest first.
    const std::deque<double>& values() const noexcept { return values_; }

    friend bool operator==(const FitnessBuffer&, const FitnessBuffer&) = default;

private:
    std::size_t capacity_;
    std::deque<double> values_;
    double median_ = 0.0;
};

double median_of(std::vector<double> values);

struct EliteSlot {
    Candidate candidate;
    FitnessBuffer fitness;
};

enum class InsertOutcome { NewCell, Replaced, Rejected, Expanded };

const char* outcome_name(InsertOutcome o);

struct InsertResult {
    InsertOutcome outcome;
    std::size_t cell;
    double distance;  // to the nearest centroid before any expansion

    /// New cell, replacement or expansion: the archive improved.
    bool improved() const noexcept { return outcome != InsertOutcome::Rejected; }
};

struct ReevaluationReport {
    std::vector<std::size_t> touched;
    std::vector<std::size_t> failed;
};

/// CVT-MAP-Elites archive with adaptive expansion and buffered medians.
/// Single writer: callers serialize all mutations.
class Archive {
public:
    Archive(std::vector<Vector> centroids, std::size_t c_max, std::size_t buffer_size = 3);

    std::size_t cells() const noexcept { return centroids_.size(); }
    std::size_t c_max() const noexcept { return c_max_; }
    std::size_t buffer_size() const noexcept { return buffer_size_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(centroids_.front().size()); }
    double tau() const noexcept { return tau_; }
    const std::vector<Vector>& centroids() const noexcept { return centroids_; }
    const std::optional<EliteSlot>& slot(std::size_t cell) const { return slots_.at(cell); }
    std::vector<std::size_t> occupied_cells() const;
    std::size_t occupied() const noexcept { return occupied_; }

    /// Lowest index wins ties. Throws ConfigError on dimension mismatch.
    std::pair<std::size_t, double> nearest_centroid(const Eigen::Ref<const Vector>& descriptor) const;
    /// Unoccupied centroid closest to `descriptor`, if any cell is empty.
    std::optional<std::size_t> nearest_empty(const Eigen::Ref<const Vector>& descriptor) const;

    InsertResult try_insert(Candidate candidate, double fitness);

    /// Pushes one fresh evaluation into ceil(fraction * occupied) uniformly
    /// sampled elites. An evaluator that throws EvaluationError skips that cell.
    ReevaluationReport reevaluate_elites(double fraction,
                                         const std::function<double(const Candidate&)>& evaluator,
                                         Rng& rng);

    double qd_score() const;
    double coverage() const;

    /// Nearest-rank 90th percentile of pairwise centroid distances
    /// (+infinity with fewer than two centroids).
    static double expansion_threshold(const std::vector<Vector>& centroids);

    // Restoration hooks for snapshots and checkpoints.
    void restore_slot(std::size_t cell, EliteSlot slot);
    std::string metadata_kind;  // explicit descriptor layout ("code", "writing", "codec")
    std::vector<double> normalizer_maxima;  // running maxima of raw explicit features, if any

    friend bool operator==(const Archive& a, const Archive& b);

private:
    std::vector<Vector> centroids_;
    std::vector<std::optional<EliteSlot>> slots_;
    std::size_t c_max_;
    std::size_t buffer_size_;
    std::size_t occupied_ = 0;
    double tau_;
};

/// Descriptor of a code elite with complexity and loc renormalized by the
/// archive's current maxima. Stored descriptors keep the maxima seen at
/// insertion. Empty for other kinds, empty cells, or missing raw features.
std::optional<BehaviorDescriptor> report_descriptor(const Archive& archive, std::size_t cell);

/// k-means centroids (k-means++ seeding, <= 100 Lloyd iterations, tolerance
/// 1e-6) over reference descriptors. Throws FitError if fewer than C distinct
/// references exist.
Archive init_centroids(std::span<const Vector> reference, std::size_t cells, std::uint64_t seed,
                       std::size_t c_max = 0, std::size_t buffer_size = 3);

// ---------------------------------------------------------------------------
// Snapshots

/// JSONL snapshot: one header record then one record per occupied cell.
/// Embeddings go to a sidecar matrix file referenced by row id.
/// `embeddings_name` overrides the sidecar name recorded in the snapshot.
void export_archive(const Archive& archive, const std::filesystem::path& jsonl_path,
                    const std::filesystem::path& embeddings_path, const std::string& embeddings_name = {});
Archive import_archive(const std::filesystem::path& jsonl_path,
                       const std::filesystem::path& embeddings_path = {});

/// Self-contained JSON form (embeddings inline) used by checkpoints.
nlohmann::json archive_to_json(const Archive& archive);
Archive archive_from_json(const nlohmann::json& j);

/// Sidecar matrix file: magic, count, n, d, then count*n*d little-endian doubles.
void write_embedding_matrix(const std::filesystem::path& path,
                            const std::vector<const PromptEmbedding*>& embeddings);
std::vector<PromptEmbedding> read_embedding_matrix(const std::filesystem::path& path);

}  // namespace promptqd

#endif
