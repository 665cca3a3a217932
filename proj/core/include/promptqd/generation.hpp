#ifndef PROMPTQD_GENERATION_HPP
#define PROMPTQD_GENERATION_HPP

#include "promptqd/behavior.hpp"
#include "promptqd/genome.hpp"
#include "promptqd/variation.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace promptqd {

enum class PromptMode { SoftPrompt, Projected };

const char* prompt_mode_name(PromptMode m);
PromptMode prompt_mode_from_name(std::string_view name);

struct GenerationRequest {
    PromptMode mode = PromptMode::SoftPrompt;
    std::optional<PromptEmbedding> embedding;  // soft-prompt mode
    std::vector<std::size_t> token_ids;        // projected mode
    std::vector<std::string> tokens;           // projected mode
    std::string task;
    std::string request_id;
    std::uint64_t decode_seed = 0;
    /// Opaque decoding parameters forwarded to remote servers.
    nlohmann::json decode_config = nlohmann::json::object();

    /// Throws ConfigError unless exactly the payload for `mode` is present.
    void validate() const;
};

struct GenerationResult {
    std::string text;
    nlohmann::json metadata = nlohmann::json::object();
};

/// Prompt-conditioned generator plus task fitness service.
class Backend {
public:
    virtual ~Backend() = default;

    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    virtual std::string recombine(const RecombinationRequest& request, const std::string& request_id,
                                  std::uint64_t decode_seed) = 0;
    /// Fitness in [0, 1]. `noise_seed` drives any evaluation noise.
    virtual double evaluate_fitness(const std::string& text, const std::string& task,
                                    const std::string& request_id, std::uint64_t noise_seed) = 0;
    virtual std::string name() const = 0;
    /// Whether generate() may be called from several threads at once.
    virtual bool concurrent_safe() const { return false; }
};

// ---------------------------------------------------------------------------
// Synthetic landscape

struct SyntheticLandscapeConfig {
    std::size_t n_tokens = 4;
    std::size_t dim = 16;
    std::size_t behavior_dim = 4;
    std::size_t semantic_dim = 2;
    std::size_t n_bumps = 12;
    double noise_sigma = 0.05;
    /// Fitness noise; negative means "same as noise_sigma".
    double fitness_noise_sigma = -1.0;
    /// Expected row norm of the linear behavior map.
    double map_scale = 1.0;
    /// Per-behavior-coordinate sensitivity multipliers (empty: all ones).
    std::vector<double> coordinate_gain;
    double warp_amplitude = 0.0;
    double warp_frequency = 6.0;
    /// Pass the mapped behavior through a logistic so it stays inside (0, 1).
    bool saturate = false;
    double saturation_gain = 4.0;
    double bump_width_min = 0.06;
    double bump_width_max = 0.15;
    double bump_amplitude_min = 0.3;
    double bump_amplitude_max = 1.0;
    /// Codec resolution; 0 selects lossless hexadecimal floats.
    double quantum = 1e-6;
    std::uint64_t seed = 0;

    void validate() const;
    double fitness_noise() const { return fitness_noise_sigma < 0.0 ? noise_sigma : fitness_noise_sigma; }
};

struct FitnessBump {
    Vector center;
    double amplitude;
    double width;
};

/// Invertible text encoding of a behavior vector.
class TextCodec {
public:
    explicit TextCodec(double quantum = 1e-3, std::size_t dim = 4);
    std::string encode(const Eigen::Ref<const Vector>& b) const;
    /// Throws EvaluationError if `text` is not a codec string of the right size.
    Vector decode(std::string_view text) const;
    double quantum() const noexcept { return quantum_; }
    std::size_t dim() const noexcept { return dim_; }

private:
    double quantum_;
    std::size_t dim_;
};

/// Deterministic stand-in for a language model: text encodes a behavior
/// vector b = 0.5 + M (vec(p) - anchor) (+ optional sinusoidal warp and
/// logistic saturation), and
/// fitness is the highest radial bump at the decoded behavior.
class SyntheticLandscape final : public Backend {
public:
    explicit SyntheticLandscape(SyntheticLandscapeConfig config,
                                std::shared_ptr<const VocabularyTable> vocab = nullptr);

    GenerationResult generate(const GenerationRequest& request) override;
    std::string recombine(const RecombinationRequest& request, const std::string& request_id,
                          std::uint64_t decode_seed) override;
    double evaluate_fitness(const std::string& text, const std::string& task,
                            const std::string& request_id, std::uint64_t noise_seed) override;
    std::string name() const override { return "synthetic"; }
    bool concurrent_safe() const override { return true; }

    /// Noise-free behavior of an embedding.
    Vector behavior_map(const PromptEmbedding& p) const;
    /// Noise-free fitness at a behavior vector (0 outside the unit box).
    double true_fitness(const Eigen::Ref<const Vector>& b) const;

    const Matrix& map() const noexcept { return map_; }
    const Vector& anchor() const noexcept { return anchor_; }
    const std::vector<FitnessBump>& bumps() const noexcept { return bumps_; }
    const TextCodec& codec() const noexcept { return codec_; }
    const SyntheticLandscapeConfig& config() const noexcept { return config_; }
    const VocabularyTable& vocabulary() const { return *vocab_; }
    std::shared_ptr<const VocabularyTable> vocabulary_ptr() const { return vocab_; }

private:
    SyntheticLandscapeConfig config_;
    std::shared_ptr<const VocabularyTable> vocab_;
    Matrix map_;  // behavior_dim x (n_tokens * dim)
    Vector anchor_;
    std::vector<FitnessBump> bumps_;
    TextCodec codec_;
};

/// Characterizer for codec texts: decoded behavior clamped to the unit box,
/// split into semantic and explicit parts, then fused.
class CodecCharacterizer final : public Characterizer {
public:
    CodecCharacterizer(TextCodec codec, std::size_t semantic_dim, double alpha);

    BehaviorDescriptor describe(std::string_view text) override;
    std::size_t semantic_dim() const override { return semantic_dim_; }
    std::size_t explicit_dim() const override { return codec_.dim() - semantic_dim_; }
    double alpha() const override { return alpha_; }
    std::string explicit_kind() const override { return "codec"; }

private:
    TextCodec codec_;
    std::size_t semantic_dim_;
    double alpha_;
};

// ---------------------------------------------------------------------------
// Remote backend

std::string base64_encode(std::string_view bytes);
/// Throws ProtocolError on malformed input.
std::string base64_decode(std::string_view text);

/// {"rows", "cols", "dtype": "f32le", "data": base64}.
nlohmann::json encode_matrix_f32(const Matrix& m);
Matrix decode_matrix_f32(const nlohmann::json& j);

/// Raised by transports for retryable failures (timeouts, 5xx, refused connections).
class TransportError : public Error {
public:
    using Error::Error;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// POSTs a JSON body to `path` and returns the parsed JSON response.
    virtual nlohmann::json post(const std::string& path, const nlohmann::json& body) = 0;
};

struct RemoteConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8080
    std::string auth_token;
    int timeout_ms = 30000;
    int max_retries = 3;
    int backoff_ms = 200;
    PromptMode mode = PromptMode::SoftPrompt;
    nlohmann::json decode_config = nlohmann::json::object();
    std::size_t max_in_flight = 4;

    /// Fills endpoint, token and timeout from PROMPTQD_ENDPOINT,
    /// PROMPTQD_AUTH_TOKEN and PROMPTQD_TIMEOUT_MS when set.
    void apply_environment();
};

/// HTTP/1.1 transport with bearer authentication.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(const RemoteConfig& config);
    ~HttpTransport() override;
    nlohmann::json post(const std::string& path, const nlohmann::json& body) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Replays canned responses from a JSONL fixture, one queue per path.
/// Each line: {"path": "/generate", "response": {...}} or
/// {"path": ..., "fail": "message"} for a retryable transport failure.
class FixtureTransport final : public Transport {
public:
    explicit FixtureTransport(const std::filesystem::path& jsonl);
    explicit FixtureTransport(std::vector<nlohmann::json> records);
    nlohmann::json post(const std::string& path, const nlohmann::json& body) override;

    /// Every request body sent so far, with its path, in order.
    std::vector<std::pair<std::string, nlohmann::json>> sent() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::deque<nlohmann::json>> queues_;
    std::vector<std::pair<std::string, nlohmann::json>> sent_;
};

class RemoteBackend final : public Backend {
public:
    RemoteBackend(RemoteConfig config, std::shared_ptr<Transport> transport,
                  std::shared_ptr<const VocabularyTable> vocab = nullptr);

    GenerationResult generate(const GenerationRequest& request) override;
    std::string recombine(const RecombinationRequest& request, const std::string& request_id,
                          std::uint64_t decode_seed) override;
    double evaluate_fitness(const std::string& text, const std::string& task,
                            const std::string& request_id, std::uint64_t noise_seed) override;
    std::string name() const override { return "remote"; }
    bool concurrent_safe() const override { return true; }

    /// Batch text embedding via /embed_text.
    std::vector<Vector> embed_texts(const std::vector<std::string>& texts, const std::string& request_id);
    /// Vocabulary table via /vocab.
    VocabularyTable fetch_vocabulary();

    const RemoteConfig& config() const noexcept { return config_; }

    /// Request body for /generate; exposed for protocol conformance checks.
    nlohmann::json generate_body(const GenerationRequest& request) const;

private:
    nlohmann::json call(const std::string& path, const nlohmann::json& body, const std::string& request_id);

    RemoteConfig config_;
    std::shared_ptr<Transport> transport_;
    std::shared_ptr<const VocabularyTable> vocab_;
};

/// TextEmbedder backed by a remote /embed_text endpoint.
class RemoteEmbedder final : public TextEmbedder {
public:
    RemoteEmbedder(std::shared_ptr<RemoteBackend> backend, std::size_t dim);
    Vector embed(std::string_view text) const override;
    std::size_t dim() const override { return dim_; }
    std::string name() const override { return "remote"; }

private:
    std::shared_ptr<RemoteBackend> backend_;
    std::size_t dim_;
};

}  // namespace promptqd

#endif
