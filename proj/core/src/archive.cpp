#include "promptqd/archive.hpp"
#include "promptqd/cvt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace promptqd {

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FitnessBuffer::FitnessBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("fitness buffer capacity must be positive");
}

FitnessBuffer::FitnessBuffer(std::size_t capacity, double first) : FitnessBuffer(capacity) {
    push(first);
}

void FitnessBuffer::push(double value) {
    if (!std::isfinite(value)) throw EvaluationError("non-finite fitness value");
    if (values_.size() == capacity_) values_.pop_front();
    values_.push_back(value);
    median_ = median_of({values_.begin(), values_.end()});
}

const char* outcome_name(InsertOutcome o) {
    switch (o) {
        case InsertOutcome::NewCell: return "new-cell";
        case InsertOutcome::Replaced: return "replaced";
        case InsertOutcome::Rejected: return "rejected";
        case InsertOutcome::Expanded: return "expanded";
    }
    return "rejected";
}

Archive::Archive(std::vector<Vector> centroids, std::size_t c_max, std::size_t buffer_size)
    : centroids_(std::move(centroids)), slots_(centroids_.size()), c_max_(c_max),
      buffer_size_(buffer_size) {
    if (centroids_.empty()) throw ConfigError("archive needs at least one centroid");
    if (c_max_ < centroids_.size()) throw ConfigError("c_max is smaller than the initial cell count");
    if (buffer_size_ == 0) throw ConfigError("buffer size must be positive");
    const auto d = centroids_.front().size();
    for (const auto& c : centroids_) {
        if (c.size() != d || d == 0) throw ConfigError("centroids differ in dimension");
        if (!c.allFinite()) throw ConfigError("centroid has non-finite coordinates");
    }
    if (count_distinct(centroids_) != centroids_.size())
        throw ConfigError("centroids must be pairwise distinct");
    tau_ = expansion_threshold(centroids_);
}

double Archive::expansion_threshold(const std::vector<Vector>& centroids) {
    const std::size_t c = centroids.size();
    if (c < 2) return std::numeric_limits<double>::infinity();
    std::vector<double> d;
    d.reserve(c * (c - 1) / 2);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = i + 1; j < c; ++j) d.push_back((centroids[i] - centroids[j]).norm());
    std::sort(d.begin(), d.end());
    const std::size_t rank = (9 * d.size() + 9) / 10;  // ceil(0.9 m), 1-based
    return d[rank - 1];
}

std::vector<std::size_t> Archive::occupied_cells() const {
    std::vector<std::size_t> out;
    out.reserve(occupied_);
    for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i]) out.push_back(i);
    return out;
}

std::pair<std::size_t, double> Archive::nearest_centroid(const Eigen::Ref<const Vector>& descriptor) const {
    if (static_cast<std::size_t>(descriptor.size()) != dim())
        throw ConfigError("descriptor dimension " + std::to_string(descriptor.size()) +
                          " does not match archive dimension " + std::to_string(dim()));
    double dist = 0.0;
    const std::size_t idx = nearest_index(centroids_, descriptor, &dist);
    return {idx, dist};
}

std::optional<std::size_t> Archive::nearest_empty(const Eigen::Ref<const Vector>& descriptor) const {
    std::optional<std::size_t> best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
        if (slots_[c]) continue;
        const double d2 = (centroids_[c] - descriptor).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = c;
        }
    }
    return best;
}

InsertResult Archive::try_insert(Candidate candidate, double fitness) {
    const Vector& b = candidate.descriptor.fused;
    if (!b.allFinite()) throw ConfigError("candidate descriptor is not finite");
    const auto [cell, dist] = nearest_centroid(b);

    if (dist > tau_ && centroids_.size() < c_max_) {
        centroids_.push_back(b);
        slots_.emplace_back(EliteSlot{std::move(candidate), FitnessBuffer(buffer_size_, fitness)});
        ++occupied_;
        tau_ = expansion_threshold(centroids_);
        return {InsertOutcome::Expanded, centroids_.size() - 1, dist};
    }

    auto& slot = slots_[cell];
    if (!slot) {
        slot.emplace(EliteSlot{std::move(candidate), FitnessBuffer(buffer_size_, fitness)});
        ++occupied_;
        return {InsertOutcome::NewCell, cell, dist};
    }
    if (fitness > slot->fitness.median()) {
        candidate.eval_count = 1;
        slot.emplace(EliteSlot{std::move(candidate), FitnessBuffer(buffer_size_, fitness)});
        return {InsertOutcome::Replaced, cell, dist};
    }
    return {InsertOutcome::Rejected, cell, dist};
}

ReevaluationReport Archive::reevaluate_elites(double fraction,
                                              const std::function<double(const Candidate&)>& evaluator,
                                              Rng& rng) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("re-evaluation fraction must be in (0, 1]");
    ReevaluationReport report;
    auto cells = occupied_cells();
    if (cells.empty()) return report;

    // The small slack keeps products like 0.1 * 50 from rounding up to 6.
    const double want = std::ceil(fraction * static_cast<double>(cells.size()) - 1e-9);
    const std::size_t m = std::min(cells.size(), static_cast<std::size_t>(std::max(want, 1.0)));
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + rng.below(cells.size() - i);
        std::swap(cells[i], cells[j]);
    }
    for (std::size_t i = 0; i < m; ++i) {
        auto& slot = *slots_[cells[i]];
        try {
            const double f = evaluator(slot.candidate);
            slot.fitness.push(f);
            ++slot.candidate.eval_count;
            report.touched.push_back(cells[i]);
        } catch (const BackendUnavailable&) {
            throw;
        } catch (const EvaluationError&) {
            report.failed.push_back(cells[i]);
        }
    }
    return report;
}

double Archive::qd_score() const {
    double s = 0.0;
    for (const auto& slot : slots_)
        if (slot) s += slot->fitness.median();
    return s;
}

double Archive::coverage() const {
    return static_cast<double>(occupied_) / static_cast<double>(centroids_.size());
}

void Archive::restore_slot(std::size_t cell, EliteSlot slot) {
    if (cell >= slots_.size()) throw LoadError("snapshot cell index out of range");
    if (slot.fitness.capacity() != buffer_size_) throw LoadError("snapshot buffer capacity mismatch");
    if (static_cast<std::size_t>(slot.candidate.descriptor.fused.size()) != dim())
        throw LoadError("snapshot descriptor dimension mismatch");
    if (!slots_[cell]) ++occupied_;
    slots_[cell].emplace(std::move(slot));
}

bool operator==(const Archive& a, const Archive& b) {
    if (a.centroids_ != b.centroids_ || a.c_max_ != b.c_max_ || a.buffer_size_ != b.buffer_size_ ||
        a.occupied_ != b.occupied_ || a.metadata_kind != b.metadata_kind ||
        a.normalizer_maxima != b.normalizer_maxima)
        return false;
    if (!(a.tau_ == b.tau_)) return false;
    for (std::size_t i = 0; i < a.slots_.size(); ++i) {
        const auto& x = a.slots_[i];
        const auto& y = b.slots_[i];
        if (x.has_value() != y.has_value()) return false;
        if (!x) continue;
        const auto& cx = x->candidate;
        const auto& cy = y->candidate;
        if (cx.text != cy.text || !(cx.embedding == cy.embedding) || cx.eval_count != cy.eval_count ||
            cx.raw_features != cy.raw_features || cx.descriptor.fused != cy.descriptor.fused ||
            cx.descriptor.semantic != cy.descriptor.semantic ||
            cx.descriptor.explicit_part != cy.descriptor.explicit_part ||
            cx.descriptor.alpha != cy.descriptor.alpha || !(x->fitness == y->fitness))
            return false;
    }
    return true;
}

Archive init_centroids(std::span<const Vector> reference, std::size_t cells, std::uint64_t seed,
                       std::size_t c_max, std::size_t buffer_size) {
    if (cells == 0) throw ConfigError("archive needs at least one cell");
    if (reference.size() < cells) throw FitError("fewer reference descriptors than cells");
    if (count_distinct(reference) < cells)
        throw FitError("fewer distinct reference descriptors than cells");
    Rng rng(seed);
    auto centroids = kmeans(reference, cells, rng);
    return Archive(std::move(centroids), c_max == 0 ? cells : c_max, buffer_size);
}

std::optional<BehaviorDescriptor> report_descriptor(const Archive& archive, std::size_t cell) {
    const auto& slot = archive.slot(cell);
    if (!slot || archive.metadata_kind != "code" || archive.normalizer_maxima.size() != 2) return std::nullopt;
    const Candidate& c = slot->candidate;
    if (c.raw_features.size() != 2 || c.descriptor.explicit_part.size() != 6) return std::nullopt;

    CodeFeatureNormalizer normalizer;
    normalizer.restore(archive.normalizer_maxima[0], archive.normalizer_maxima[1]);
    CodeFeatureCounts counts;
    counts.complexity = c.raw_features[0];
    counts.loc = c.raw_features[1];
    Eigen::Index paradigm = 0;
    c.descriptor.explicit_part.tail(4).maxCoeff(&paradigm);
    counts.paradigm = static_cast<Paradigm>(paradigm);
    return fuse(c.descriptor.semantic, normalizer.normalize(counts).as_vector(), c.descriptor.alpha);
}

}  // namespace promptqd
