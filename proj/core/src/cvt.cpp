#include "promptqd/cvt.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace promptqd {

std::size_t nearest_index(std::span<const Vector> centroids, const Eigen::Ref<const Vector>& x,
                          double* distance) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d2 = (centroids[c] - x).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = c;
        }
    }
    if (distance) *distance = std::sqrt(best_d2);
    return best;
}

std::size_t count_distinct(std::span<const Vector> points) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto lex_less = [&](std::size_t a, std::size_t b) {
        const auto& u = points[a];
        const auto& v = points[b];
        return std::lexicographical_compare(u.data(), u.data() + u.size(), v.data(), v.data() + v.size());
    };
    std::sort(order.begin(), order.end(), lex_less);
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < order.size(); ++i)
        if (i == 0 || points[order[i]] != points[order[i - 1]]) ++distinct;
    return distinct;
}

std::vector<Vector> kmeans(std::span<const Vector> points, std::size_t k, Rng& rng,
                           const KMeansOptions& options) {
    if (k == 0) throw ConfigError("k-means needs at least one cluster");
    if (points.size() < k) throw FitError("fewer points than clusters");
    const std::size_t n = points.size();

    // k-means++ seeding.
    std::vector<Vector> centers;
    centers.reserve(k);
    centers.push_back(points[rng.below(n)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (points[i] - centers.back()).squaredNorm());
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = rng.below(n);
        } else {
            double target = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                target -= d2[pick];
                if (target < 0.0 && d2[pick] > 0.0) break;
            }
            while (d2[pick] == 0.0 && pick > 0) --pick;
        }
        centers.push_back(points[pick]);
    }

    std::vector<std::size_t> assign(n, 0);
    const auto dim = points.front().size();
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) assign[i] = nearest_index(centers, points[i]);

        std::vector<Vector> sums(k, Vector::Zero(dim));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[assign[i]] += points[i];
            ++counts[assign[i]];
        }
        double max_shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            Vector next;
            if (counts[c] == 0) {
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = (points[i] - centers[assign[i]]).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                next = points[far];
                assign[far] = c;
            } else {
                next = sums[c] / static_cast<double>(counts[c]);
            }
            max_shift = std::max(max_shift, (next - centers[c]).norm());
            centers[c] = std::move(next);
        }
        if (max_shift < options.tolerance) break;
    }
    return centers;
}

}  // namespace promptqd
