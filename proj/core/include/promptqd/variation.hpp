#ifndef PROMPTQD_VARIATION_HPP
#define PROMPTQD_VARIATION_HPP

#include "promptqd/common.hpp"
#include "promptqd/genome.hpp"
#include "promptqd/rng.hpp"

#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace promptqd {

/// Success-rule step-size control for exploratory mutation.
struct MutationState {
    double sigma_p = 0.1;
    double c_sigma = 0.1;
    double p_target_success = 0.2;
    std::size_t window_size = 50;
    std::deque<bool> window;  // oldest first

    static constexpr double kSigmaMin = 1e-6;
    static constexpr double kSigmaMax = 10.0;

    /// Appends an archive-improvement flag, dropping the oldest beyond the window.
    void record(bool improved);
    double success_rate() const;

    friend bool operator==(const MutationState&, const MutationState&) = default;
};

/// sigma * exp(c_sigma * (p_succ - p_target)), clamped to [1e-6, 10].
/// Stores and returns the new value. Throws ConfigError on an empty window.
double adapt_sigma(MutationState& state);

/// p + sigma * Z with Z i.i.d. standard normal, drawn row-major.
PromptEmbedding exploratory_mutation(const PromptEmbedding& p, double sigma, Rng& rng);
/// Diagonal variant: one step size per entry of vec(p).
PromptEmbedding exploratory_mutation(const PromptEmbedding& p, const Eigen::Ref<const Vector>& sigmas,
                                     Rng& rng);

struct TargetedMutationConfig {
    double eta = 0.01;
    std::size_t k_directions = 8;
    double gamma = 0.05;

    /// Throws ConfigError unless eta > 0, gamma > 0 and 1 <= k <= genome_size.
    void validate(std::size_t genome_size) const;
};

/// Generates from an embedding and characterizes the result. `probe_index`
/// is 0 for the baseline and i + 1 for direction i. May throw EvaluationError.
using BehaviorProbe = std::function<Vector(const PromptEmbedding&, std::size_t probe_index)>;

struct GradientEstimate {
    Vector baseline;
    std::vector<Vector> directions;  // unit vectors in vec(p) space
    std::vector<Vector> deltas;      // (b(p + eta e_i) - b0) / eta
    std::vector<std::size_t> dropped;
    std::size_t calls = 0;
};

/// k orthonormalized random directions and their finite-difference behavior
/// deltas. Costs k + 1 probe calls. Failed directions are dropped; a failed
/// baseline or fewer than two survivors throws OperatorError. With
/// `concurrent` the probes run on separate threads and the probe must be
/// thread-safe; results do not depend on completion order.
GradientEstimate estimate_behavior_gradient(const PromptEmbedding& p, const BehaviorProbe& probe,
                                            const TargetedMutationConfig& cfg, Rng& rng,
                                            bool concurrent = false);

struct TargetedResult {
    PromptEmbedding offspring;
    Vector coefficients;
    /// Every delta was zero, so exploratory mutation was applied instead.
    bool fell_back = false;
};

/// Least-squares fit of `target_delta_b` in the span of the deltas, then
/// p + gamma * sum a_i e_i with ||a|| clamped at 10 / gamma.
TargetedResult targeted_mutation(const PromptEmbedding& p, const Eigen::Ref<const Vector>& target_delta_b,
                                 const GradientEstimate& gradient, double gamma,
                                 double fallback_sigma, Rng& rng);

struct CrossoverResult {
    PromptEmbedding offspring;
    double beta;
};

/// beta ~ U(0.3, 0.7); beta * p1 + (1 - beta) * p2.
CrossoverResult crossover(const PromptEmbedding& p1, const PromptEmbedding& p2, Rng& rng);
PromptEmbedding crossover_with_beta(const PromptEmbedding& p1, const PromptEmbedding& p2, double beta);

struct RecombinationRequest {
    std::string parent_a;
    std::string parent_b;
    std::string task;
    /// Instruction text for backends that take a single prompt.
    std::string prompt() const;
};

RecombinationRequest text_recombination_request(std::string t1, std::string t2, std::string task);

struct SmoothnessReport {
    double cv = 0.0;
    double mean_magnitude = 0.0;
    double std_magnitude = 0.0;
    std::size_t probes_used = 0;
    bool flat = false;
    std::vector<double> magnitudes;
};

/// Fitness of an embedding (generation plus evaluation); may throw EvaluationError.
using FitnessProbe = std::function<double(const PromptEmbedding&)>;

/// Coefficient of variation (sample std over |mean|) of directional-derivative
/// magnitudes along `n_probes` random unit directions. Flat below a mean of 1e-9.
SmoothnessReport smoothness_cv(const PromptEmbedding& p, const FitnessProbe& fitness,
                               std::size_t n_probes, double eta, Rng& rng);

/// Random unit vector of dimension `dim`.
Vector random_unit(std::size_t dim, Rng& rng);

}  // namespace promptqd

#endif
