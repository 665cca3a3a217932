#include "promptqd/variation.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>

namespace promptqd {

void MutationState::record(bool improved) {
    window.push_back(improved);
    while (window.size() > window_size) window.pop_front();
}

double MutationState::success_rate() const {
    if (window.empty()) return 0.0;
    const auto hits = std::count(window.begin(), window.end(), true);
    return static_cast<double>(hits) / static_cast<double>(window.size());
}

double adapt_sigma(MutationState& state) {
    if (state.window.empty()) throw ConfigError("sigma adaptation needs at least one recorded outcome");
    const double next = state.sigma_p * std::exp(state.c_sigma * (state.success_rate() - state.p_target_success));
    state.sigma_p = std::clamp(next, MutationState::kSigmaMin, MutationState::kSigmaMax);
    return state.sigma_p;
}

PromptEmbedding exploratory_mutation(const PromptEmbedding& p, double sigma, Rng& rng) {
    if (!(sigma > 0.0)) throw ConfigError("mutation strength must be positive");
    Matrix m = p.values();
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += sigma * rng.normal();
    return PromptEmbedding(std::move(m));
}

PromptEmbedding exploratory_mutation(const PromptEmbedding& p, const Eigen::Ref<const Vector>& sigmas,
                                     Rng& rng) {
    if (static_cast<std::size_t>(sigmas.size()) != p.size())
        throw ConfigError("per-entry mutation strengths must match the genome size");
    if (!(sigmas.array() > 0.0).all()) throw ConfigError("mutation strengths must be positive");
    Matrix m = p.values();
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += sigmas(i) * rng.normal();
    return PromptEmbedding(std::move(m));
}

void TargetedMutationConfig::validate(std::size_t genome_size) const {
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (k_directions < 1 || k_directions > genome_size)
        throw ConfigError("k_directions must lie in [1, n*d]");
}

Vector random_unit(std::size_t dim, Rng& rng) {
    Vector v(static_cast<Eigen::Index>(dim));
    do {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    } while (v.norm() == 0.0);
    return v / v.norm();
}

namespace {

std::vector<Vector> orthonormal_directions(std::size_t k, std::size_t dim, Rng& rng) {
    std::vector<Vector> out;
    out.reserve(k);
    while (out.size() < k) {
        Vector v = random_unit(dim, rng);
        if (k <= dim) {
            // Two passes of modified Gram-Schmidt.
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& u : out) v -= u.dot(v) * u;
            const double norm = v.norm();
            if (norm < 1e-8) continue;
            v /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

GradientEstimate estimate_behavior_gradient(const PromptEmbedding& p, const BehaviorProbe& probe,
                                            const TargetedMutationConfig& cfg, Rng& rng,
                                            bool concurrent) {
    cfg.validate(p.size());
    GradientEstimate est;
    const auto directions = orthonormal_directions(cfg.k_directions, p.size(), rng);
    const Vector base = p.flat();

    auto perturbed = [&](std::size_t i) {
        return PromptEmbedding::from_flat(base + cfg.eta * directions[i], p.tokens(), p.dim());
    };
    std::vector<std::optional<Vector>> results(cfg.k_directions + 1);
    auto run_one = [&](std::size_t slot) -> std::optional<Vector> {
        try {
            return slot == 0 ? probe(p, 0) : probe(perturbed(slot - 1), slot);
        } catch (const BackendUnavailable&) {
            throw;
        } catch (const EvaluationError&) {
            return std::nullopt;
        }
    };

    if (concurrent) {
        std::vector<std::future<std::optional<Vector>>> futures;
        futures.reserve(results.size());
        for (std::size_t s = 0; s < results.size(); ++s)
            futures.push_back(std::async(std::launch::async, run_one, s));
        for (std::size_t s = 0; s < results.size(); ++s) results[s] = futures[s].get();
    } else {
        for (std::size_t s = 0; s < results.size(); ++s) results[s] = run_one(s);
    }
    est.calls = results.size();

    if (!results[0]) throw OperatorError("baseline generation failed during gradient estimation");
    est.baseline = *results[0];
    for (std::size_t i = 0; i < cfg.k_directions; ++i) {
        const auto& r = results[i + 1];
        if (!r || r->size() != est.baseline.size()) {
            est.dropped.push_back(i);
            continue;
        }
        est.directions.push_back(directions[i]);
        est.deltas.push_back((*r - est.baseline) / cfg.eta);
    }
    if (est.directions.size() < 2)
        throw OperatorError("fewer than two gradient directions survived");
    return est;
}

TargetedResult targeted_mutation(const PromptEmbedding& p, const Eigen::Ref<const Vector>& target_delta_b,
                                 const GradientEstimate& gradient, double gamma,
                                 double fallback_sigma, Rng& rng) {
    const std::size_t k = gradient.deltas.size();
    if (k < 2 || gradient.directions.size() != k)
        throw OperatorError("targeted mutation needs at least two gradient directions");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    const Eigen::Index m = target_delta_b.size();

    Eigen::MatrixXd deltas(m, static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        if (gradient.deltas[i].size() != m) throw OperatorError("target and gradient dimensions differ");
        deltas.col(static_cast<Eigen::Index>(i)) = gradient.deltas[i];
    }
    if (deltas.cwiseAbs().maxCoeff() == 0.0)
        return {exploratory_mutation(p, fallback_sigma, rng), Vector::Zero(static_cast<Eigen::Index>(k)), true};

    Vector a = deltas.completeOrthogonalDecomposition().solve(target_delta_b);
    const double cap = 10.0 / gamma;
    if (a.norm() > cap) a *= cap / a.norm();

    Vector step = Vector::Zero(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < k; ++i) step += a(static_cast<Eigen::Index>(i)) * gradient.directions[i];
    return {PromptEmbedding::from_flat(p.flat() + gamma * step, p.tokens(), p.dim()), std::move(a), false};
}

PromptEmbedding crossover_with_beta(const PromptEmbedding& p1, const PromptEmbedding& p2, double beta) {
    if (!p1.same_shape(p2)) throw ConfigError("crossover parents differ in shape");
    return PromptEmbedding(beta * p1.values() + (1.0 - beta) * p2.values());
}

CrossoverResult crossover(const PromptEmbedding& p1, const PromptEmbedding& p2, Rng& rng) {
    if (!p1.same_shape(p2)) throw ConfigError("crossover parents differ in shape");
    const double beta = rng.uniform(0.3, 0.7);
    return {crossover_with_beta(p1, p2, beta), beta};
}

std::string RecombinationRequest::prompt() const {
    return "Task:\n" + task + "\n\nCombine the strengths of these two solutions into one.\n\nSolution A:\n" +
           parent_a + "\n\nSolution B:\n" + parent_b + "\n";
}

RecombinationRequest text_recombination_request(std::string t1, std::string t2, std::string task) {
    return {std::move(t1), std::move(t2), std::move(task)};
}

SmoothnessReport smoothness_cv(const PromptEmbedding& p, const FitnessProbe& fitness,
                               std::size_t n_probes, double eta, Rng& rng) {
    if (n_probes < 30) throw ConfigError("smoothness estimate needs at least 30 probes");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    const double f0 = fitness(p);
    const Vector base = p.flat();

    SmoothnessReport r;
    for (std::size_t i = 0; i < n_probes; ++i) {
        const Vector e = random_unit(p.size(), rng);
        try {
            const double f = fitness(PromptEmbedding::from_flat(base + eta * e, p.tokens(), p.dim()));
            r.magnitudes.push_back(std::abs((f - f0) / eta));
        } catch (const EvaluationError&) {
        }
    }
    r.probes_used = r.magnitudes.size();
    if (r.probes_used < 30) throw OperatorError("fewer than 30 smoothness probes succeeded");

    const double n = static_cast<double>(r.probes_used);
    double sum = 0.0;
    for (double m : r.magnitudes) sum += m;
    r.mean_magnitude = sum / n;
    double ss = 0.0;
    for (double m : r.magnitudes) ss += (m - r.mean_magnitude) * (m - r.mean_magnitude);
    r.std_magnitude = std::sqrt(ss / (n - 1.0));
    r.flat = r.mean_magnitude < 1e-9;
    r.cv = r.flat ? 0.0 : r.std_magnitude / r.mean_magnitude;
    return r;
}

}  // namespace promptqd
