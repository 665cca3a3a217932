#include "promptqd/behavior.hpp"
#include "promptqd/cvt.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace promptqd {

namespace {

using boost::math::digamma;

// Column-major sample block: rows are samples, columns are coordinates.
Eigen::MatrixXd stack(std::span<const Vector> samples) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto d = samples.front().size();
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (samples[static_cast<std::size_t>(i)].size() != d)
            throw ConfigError("samples differ in dimension");
        m.row(i) = samples[static_cast<std::size_t>(i)].transpose();
    }
    return m;
}

void standardize(Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        auto col = m.col(c);
        const double mean = col.mean();
        col.array() -= mean;
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(m.rows() - 1, 1)));
        if (sd > 0.0) col /= sd;
    }
}

double max_norm_dist(const Eigen::MatrixXd& m, Eigen::Index i, Eigen::Index j) {
    return (m.row(i) - m.row(j)).cwiseAbs().maxCoeff();
}

// k-th nearest neighbor distances in the max-norm.
std::vector<double> knn_radius(const Eigen::MatrixXd& m, std::size_t k) {
    const Eigen::Index n = m.rows();
    std::vector<double> radius(static_cast<std::size_t>(n));
    std::vector<double> dist(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) dist[w++] = max_norm_dist(m, i, j);
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
        radius[static_cast<std::size_t>(i)] = dist[k - 1];
    }
    return radius;
}

double kl_entropy_standardized(const Eigen::MatrixXd& m, std::size_t k) {
    const auto n = static_cast<std::size_t>(m.rows());
    const auto radius = knn_radius(m, k);
    double log_sum = 0.0;
    for (double r : radius) {
        if (r <= 0.0) return -std::numeric_limits<double>::infinity();
        log_sum += std::log(2.0 * r);
    }
    return digamma(static_cast<double>(n)) - digamma(static_cast<double>(k)) +
           static_cast<double>(m.cols()) * log_sum / static_cast<double>(n);
}

}  // namespace

double kl_entropy(std::span<const Vector> samples, std::size_t k) {
    if (k == 0) throw ConfigError("k must be positive");
    if (samples.size() < k + 1) throw ConfigError("entropy estimate needs more than k samples");
    return kl_entropy_standardized(stack(samples), k);
}

MIEstimate estimate_nmi(std::span<const Vector> samples_sem, std::span<const Vector> samples_exp,
                        std::size_t k) {
    if (k == 0) throw ConfigError("k must be positive");
    if (samples_sem.size() != samples_exp.size())
        throw ConfigError("semantic and explicit sample counts differ");
    if (samples_sem.size() < k + 1) throw ConfigError("fewer samples than k + 1");
    if (samples_sem.size() < 50) throw ConfigError("mutual information estimate needs at least 50 samples");

    Eigen::MatrixXd x = stack(samples_sem);
    Eigen::MatrixXd y = stack(samples_exp);
    standardize(x);
    standardize(y);
    const Eigen::Index n = x.rows();

    MIEstimate est;
    est.k_neighbors = k;

    // Duplicate joint points bias the neighbor counts.
    {
        std::vector<Vector> joint(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector v(x.cols() + y.cols());
            v << x.row(i).transpose(), y.row(i).transpose();
            joint[static_cast<std::size_t>(i)] = std::move(v);
        }
        const std::size_t dup = static_cast<std::size_t>(n) - count_distinct(joint);
        est.duplicate_warning = static_cast<double>(dup) > 0.1 * static_cast<double>(n);
    }

    std::vector<double> dx(static_cast<std::size_t>(n)), dy(static_cast<std::size_t>(n));
    std::vector<double> dz(static_cast<std::size_t>(n - 1));
    double psi_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            dx[uj] = max_norm_dist(x, i, j);
            dy[uj] = max_norm_dist(y, i, j);
            if (j != i) dz[w++] = std::max(dx[uj], dy[uj]);
        }
        std::nth_element(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(k - 1), dz.end());
        const double eps = dz[k - 1];
        std::size_t nx = 0, ny = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto uj = static_cast<std::size_t>(j);
            if (dx[uj] < eps) ++nx;
            if (dy[uj] < eps) ++ny;
        }
        psi_sum += digamma(static_cast<double>(nx + 1)) + digamma(static_cast<double>(ny + 1));
    }
    est.mi_nats = digamma(static_cast<double>(k)) + digamma(static_cast<double>(n)) -
                  psi_sum / static_cast<double>(n);

    est.h_sem = kl_entropy_standardized(x, k);
    est.h_exp = kl_entropy_standardized(y, k);
    const double h_min = std::min(est.h_sem, est.h_exp);
    if (!(h_min > 0.0) || !std::isfinite(h_min)) {
        est.nmi_defined = false;
        est.nmi = std::numeric_limits<double>::quiet_NaN();
        est.nmi_note = "smaller marginal entropy is not positive";
    } else {
        est.nmi = est.mi_nats / h_min;
        if (est.nmi > 1.0) {
            est.nmi_defined = false;
            est.nmi_note = "mutual information exceeds the smaller marginal entropy (degenerate dependence)";
        }
    }
    return est;
}

}  // namespace promptqd
