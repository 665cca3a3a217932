#include "promptqd/behavior.hpp"
#include "promptqd/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace promptqd {

BehaviorDescriptor fuse(const Eigen::Ref<const Vector>& semantic,
                        const Eigen::Ref<const Vector>& explicit_part, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    BehaviorDescriptor d;
    d.semantic = semantic;
    d.explicit_part = explicit_part;
    d.alpha = alpha;
    d.fused.resize(semantic.size() + explicit_part.size());
    d.fused.head(semantic.size()) = std::sqrt(alpha) * semantic;
    d.fused.tail(explicit_part.size()) = std::sqrt(1.0 - alpha) * explicit_part;
    return d;
}

HashNgramEmbedder::HashNgramEmbedder(std::size_t n, std::size_t buckets) : n_(n), buckets_(buckets) {
    if (n_ == 0 || buckets_ == 0) throw ConfigError("n-gram size and bucket count must be positive");
}

std::string HashNgramEmbedder::name() const {
    return "hash-ngram-" + std::to_string(n_) + "x" + std::to_string(buckets_);
}

std::string HashNgramEmbedder::normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

Vector HashNgramEmbedder::embed(std::string_view text) const {
    const std::string norm = normalize(text);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(buckets_));
    if (norm.empty()) return v;
    const std::string_view s(norm);
    if (s.size() < n_) {
        v(static_cast<Eigen::Index>(fnv1a64(s) % buckets_)) += 1.0;
    } else {
        for (std::size_t i = 0; i + n_ <= s.size(); ++i)
            v(static_cast<Eigen::Index>(fnv1a64(s.substr(i, n_)) % buckets_)) += 1.0;
    }
    return v / v.norm();
}

LinearReducer::LinearReducer(Matrix components, Vector offset, Vector lo, Vector hi,
                             std::uint64_t seed)
    : components_(std::move(components)), offset_(std::move(offset)), lo_(std::move(lo)),
      hi_(std::move(hi)), seed_(seed) {
    if (components_.cols() != offset_.size() || lo_.size() != components_.rows() ||
        hi_.size() != components_.rows())
        throw ConfigError("reducer parts have inconsistent shapes");
}

Vector LinearReducer::project_raw(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != offset_.size()) throw ConfigError("reducer input dimension mismatch");
    return components_ * (x - offset_);
}

Vector LinearReducer::reconstruct(const Eigen::Ref<const Vector>& raw) const {
    return offset_ + components_.transpose() * raw;
}

Vector LinearReducer::apply(const Eigen::Ref<const Vector>& x) const {
    Vector raw = project_raw(x);
    Vector out(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        const double span = hi_(i) - lo_(i);
        out(i) = span > 1e-12 ? std::clamp((raw(i) - lo_(i)) / span, 0.0, 1.0) : 0.0;
    }
    return out;
}

LinearReducer fit_reducer(std::span<const Vector> reference, std::size_t d_s, std::uint64_t seed) {
    if (d_s == 0) throw ConfigError("reducer output dimension must be positive");
    if (reference.size() < d_s + 1)
        throw ConfigError("reducer needs at least d_s + 1 reference vectors");
    const auto dim = reference.front().size();
    if (static_cast<std::size_t>(dim) < d_s)
        throw ConfigError("reducer output dimension exceeds input dimension");
    for (const auto& v : reference)
        if (v.size() != dim) throw ConfigError("reference vectors differ in length");

    const auto n = static_cast<Eigen::Index>(reference.size());
    Eigen::MatrixXd x(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = reference[static_cast<std::size_t>(i)];
    const Vector mean = x.colwise().mean().transpose();
    x.rowwise() -= mean.transpose();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    if (sv.size() == 0 || sv(0) <= 1e-12 * scale * std::sqrt(static_cast<double>(n)))
        throw FitError("reference corpus has no variance in any direction");

    const auto ds = static_cast<Eigen::Index>(d_s);
    Matrix comps = svd.matrixV().leftCols(ds).transpose();
    // Sign convention: the largest-magnitude loading of each component is positive.
    for (Eigen::Index r = 0; r < ds; ++r) {
        Eigen::Index arg = 0;
        comps.row(r).cwiseAbs().maxCoeff(&arg);
        if (comps(r, arg) < 0.0) comps.row(r) *= -1.0;
    }

    Vector lo = Vector::Constant(ds, std::numeric_limits<double>::infinity());
    Vector hi = Vector::Constant(ds, -std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector raw = comps * x.row(i).transpose();
        lo = lo.cwiseMin(raw);
        hi = hi.cwiseMax(raw);
    }
    return LinearReducer(std::move(comps), mean, std::move(lo), std::move(hi), seed);
}

SemanticPipeline::SemanticPipeline(std::shared_ptr<const TextEmbedder> embedder,
                                   LinearReducer reducer, std::string reference_corpus_id)
    : embedder_(std::move(embedder)), reducer_(std::move(reducer)),
      corpus_id_(std::move(reference_corpus_id)) {
    if (!embedder_) throw ConfigError("semantic pipeline needs an embedder");
    if (!reducer_.fitted()) throw ConfigError("semantic pipeline needs a fitted reducer");
    if (reducer_.input_dim() != embedder_->dim())
        throw ConfigError("reducer input dimension does not match embedder output");
}

SemanticPipeline SemanticPipeline::fit(std::shared_ptr<const TextEmbedder> embedder,
                                       std::span<const std::string> reference_texts,
                                       std::size_t d_s, std::uint64_t seed,
                                       std::string reference_corpus_id) {
    if (!embedder) throw ConfigError("semantic pipeline needs an embedder");
    std::vector<Vector> vecs;
    vecs.reserve(reference_texts.size());
    for (const auto& t : reference_texts) vecs.push_back(embedder->embed(t));
    auto reducer = fit_reducer(vecs, d_s, seed);
    return SemanticPipeline(std::move(embedder), std::move(reducer),
                            std::move(reference_corpus_id));
}

Vector SemanticPipeline::descriptor(std::string_view text) const {
    return reducer_.apply(embedder_->embed(text));
}

}  // namespace promptqd
