#ifndef PROMPTQD_ENGINE_HPP
#define PROMPTQD_ENGINE_HPP

#include "promptqd/archive.hpp"
#include "promptqd/behavior.hpp"
#include "promptqd/generation.hpp"
#include "promptqd/genome.hpp"
#include "promptqd/rng.hpp"
#include "promptqd/variation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace promptqd {

struct EngineConfig {
    std::size_t budget = 500;
    std::uint64_t seed = 0;
    std::string task = "synthetic";

    double p_cross = 0.3;
    double p_targeted = 0.35;
    /// Crossover followed by a mutation instead of mutually exclusive operators.
    bool stacked_operators = false;
    /// Ablation: embeddings never change; offspring are regenerated or recombined text.
    bool frozen_embedding = false;

    double reeval_fraction = 0.1;
    std::size_t reeval_interval = 10;  // 0 disables re-evaluation

    double alpha = 0.6;
    std::size_t cells = 64;
    std::size_t c_max = 96;
    std::size_t buffer_size = 3;
    std::size_t initial_population = 0;  // 0 means max(1, cells / 16)
    /// "uniform" (fused unit box), "generated" (texts from initial embeddings)
    /// or "corpus" (texts listed in behavior.reference_corpus).
    std::string reference_kind = "uniform";
    std::size_t reference_samples = 0;  // 0 means 20 * cells

    std::size_t n_tokens = 4;
    std::size_t dim = 16;
    double sigma_init = 0.1;
    PromptMode mode = PromptMode::SoftPrompt;
    std::string vocab_path;  // empty: backend-provided table

    double sigma_p = 0.1;
    double c_sigma = 0.1;
    double p_target_success = 0.2;
    std::size_t window = 50;

    TargetedMutationConfig targeted;
    bool concurrent_probes = false;

    /// "codec" for the synthetic landscape, "code" or "writing" for text tasks.
    std::string behavior_kind = "codec";
    std::size_t semantic_dim = 2;
    std::string reference_corpus;  // JSONL with a "text" or "code" field per line
    std::string embedder = "hash";  // "hash" or "remote"

    std::string backend = "synthetic";  // or "remote"
    SyntheticLandscapeConfig landscape;
    RemoteConfig remote;

    std::string checkpoint_path;  // written when the backend goes down

    /// Throws ConfigError naming the first offending field.
    void validate() const;
    std::size_t initial_population_size() const;

    static EngineConfig from_json(const nlohmann::json& j);
    static EngineConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

struct RunRecord {
    std::size_t iteration = 0;
    std::string op;       // operator drawn: crossover | targeted | exploratory (stacked: a+b)
    std::string applied;  // operator applied after fallbacks
    std::string outcome;  // insert outcome, or eval-failed | operator-error
    long long cell = -1;
    double qd_score = 0.0;
    double coverage = 0.0;
    std::size_t occupied = 0;
    std::size_t cells = 0;
    double sigma_p = 0.0;
    std::size_t generator_calls = 0;
    std::size_t total_generator_calls = 0;
    std::size_t fitness_calls = 0;
    bool fallback = false;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct RunLog {
    std::vector<RunRecord> records;

    static const char* csv_header();
    void write_csv(const std::filesystem::path& path) const;
    static RunLog read_csv(const std::filesystem::path& path);
    std::string to_csv() const;

    friend bool operator==(const RunLog&, const RunLog&) = default;
};

struct SelectedParent {
    std::size_t cell;
    const Candidate* candidate;
};

/// Uniform over occupied cells. Throws OperatorError on an empty archive.
SelectedParent select_parent(const Archive& archive, Rng& rng);

/// Generator charge for one loop iteration under the documented cost model.
std::size_t expected_generator_calls(const RunRecord& record, const TargetedMutationConfig& cfg);

class Engine {
public:
    Engine(EngineConfig config, std::shared_ptr<Backend> backend,
           std::shared_ptr<Characterizer> characterizer, std::shared_ptr<const VocabularyTable> vocab);

    /// Builds the backend, characterizer and vocabulary named by the config.
    static Engine from_config(const EngineConfig& config);
    /// Rebuilds an engine from a checkpoint using the configuration stored in it.
    static Engine resume(const std::filesystem::path& checkpoint);

    /// Centroid initialization and the initial population. Idempotent.
    void initialize();
    /// One budget unit. Requires initialize().
    void step();
    /// Steps until `iterations` budget units have been consumed in total
    /// (default: the configured budget).
    void run(std::optional<std::size_t> iterations = {});

    void checkpoint(const std::filesystem::path& path) const;
    /// Replaces all state with the checkpoint's. The stored config must equal
    /// this engine's. On failure the engine is left unchanged.
    void restore(const std::filesystem::path& path);

    const Archive& archive() const;
    const RunLog& runlog() const noexcept { return log_; }
    const MutationState& mutation_state() const noexcept { return mutation_; }
    const EngineConfig& config() const noexcept { return config_; }
    std::size_t iteration() const noexcept { return iteration_; }
    bool initialized() const noexcept { return archive_.has_value(); }
    std::size_t generator_calls() const noexcept { return generator_calls_; }
    std::size_t init_generator_calls() const noexcept { return init_generator_calls_; }
    std::size_t fitness_calls() const noexcept { return fitness_calls_; }
    Backend& backend() noexcept { return *backend_; }
    Characterizer& characterizer() noexcept { return *characterizer_; }

private:
    struct Evaluated {
        std::string text;
        BehaviorDescriptor descriptor;
        double fitness;
        std::vector<double> raw;
    };

    std::string request_id(std::string_view kind);
    std::string generate_text(const PromptEmbedding& p, std::uint64_t decode_seed, const std::string& id);
    Evaluated evaluate(std::string text, const std::string& id);
    PromptEmbedding mutate_exploratory(const PromptEmbedding& p);
    void adapt(bool improved);
    void log_iteration(RunRecord record);
    nlohmann::json state_json() const;
    void load_state(const nlohmann::json& j);

    EngineConfig config_;
    std::shared_ptr<Backend> backend_;
    std::shared_ptr<Characterizer> characterizer_;
    std::shared_ptr<const VocabularyTable> vocab_;

    std::optional<Archive> archive_;
    RunLog log_;
    MutationState mutation_;
    Rng init_rng_, selection_rng_, operator_rng_, noise_rng_, reeval_rng_;
    std::size_t iteration_ = 0;
    std::size_t generator_calls_ = 0;
    std::size_t init_generator_calls_ = 0;
    std::size_t fitness_calls_ = 0;
    std::size_t request_counter_ = 0;
};

}  // namespace promptqd

#endif
