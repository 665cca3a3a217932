#ifndef PROMPTQD_CVT_HPP
#define PROMPTQD_CVT_HPP

#include "promptqd/common.hpp"
#include "promptqd/rng.hpp"

#include <span>
#include <vector>

namespace promptqd {

struct KMeansOptions {
    std::size_t max_iterations = 100;
    /// Stop once no centroid moves farther than this.
    double tolerance = 1e-6;
};

/// k-means++ seeding followed by Lloyd iterations. Empty clusters are
/// re-seeded at the point farthest from its assigned centroid.
std::vector<Vector> kmeans(std::span<const Vector> points, std::size_t k, Rng& rng,
                           const KMeansOptions& options = {});

/// Index of the nearest centroid (Euclidean); ties go to the lowest index.
std::size_t nearest_index(std::span<const Vector> centroids, const Eigen::Ref<const Vector>& x,
                          double* distance = nullptr);

/// Number of pairwise-distinct points.
std::size_t count_distinct(std::span<const Vector> points);

}  // namespace promptqd

#endif
