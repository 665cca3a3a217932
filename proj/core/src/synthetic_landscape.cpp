#include "promptqd/generation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace promptqd {

namespace {

constexpr std::string_view kCodecTag = "<syn>";

}  // namespace

const char* prompt_mode_name(PromptMode m) {
    return m == PromptMode::SoftPrompt ? "soft-prompt" : "projected";
}

PromptMode prompt_mode_from_name(std::string_view name) {
    if (name == "soft-prompt") return PromptMode::SoftPrompt;
    if (name == "projected") return PromptMode::Projected;
    throw ConfigError("unknown prompt mode '" + std::string(name) + "'");
}

void GenerationRequest::validate() const {
    if (mode == PromptMode::SoftPrompt) {
        if (!embedding || !token_ids.empty() || !tokens.empty())
            throw ConfigError("soft-prompt requests carry an embedding and no tokens");
    } else {
        if (embedding || token_ids.empty())
            throw ConfigError("projected requests carry token ids and no embedding");
        if (!tokens.empty() && tokens.size() != token_ids.size())
            throw ConfigError("token strings and ids differ in length");
    }
}

void SyntheticLandscapeConfig::validate() const {
    if (n_tokens == 0 || dim == 0) throw ConfigError("landscape genome shape must be positive");
    if (behavior_dim == 0 || semantic_dim > behavior_dim)
        throw ConfigError("semantic_dim must not exceed behavior_dim");
    if (n_bumps == 0) throw ConfigError("landscape needs at least one fitness bump");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
    if (!(map_scale > 0.0)) throw ConfigError("map_scale must be positive");
    if (!coordinate_gain.empty() && coordinate_gain.size() != behavior_dim)
        throw ConfigError("coordinate_gain must have one entry per behavior coordinate");
    if (!(bump_width_min > 0.0 && bump_width_max >= bump_width_min))
        throw ConfigError("bump widths must be positive and ordered");
    if (!(bump_amplitude_min >= 0.0 && bump_amplitude_max >= bump_amplitude_min && bump_amplitude_max <= 1.0))
        throw ConfigError("bump amplitudes must be ordered within [0, 1]");
    if (!(quantum >= 0.0)) throw ConfigError("codec quantum must be non-negative");
    if (saturate && !(saturation_gain > 0.0)) throw ConfigError("saturation_gain must be positive");
}

// ---------------------------------------------------------------------------
// Codec

TextCodec::TextCodec(double quantum, std::size_t dim) : quantum_(quantum), dim_(dim) {
    if (!(quantum_ >= 0.0)) throw ConfigError("codec quantum must be non-negative");
    if (dim_ == 0) throw ConfigError("codec dimension must be positive");
}

std::string TextCodec::encode(const Eigen::Ref<const Vector>& b) const {
    if (static_cast<std::size_t>(b.size()) != dim_) throw ConfigError("codec dimension mismatch");
    std::string out(kCodecTag);
    char buf[64];
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        if (quantum_ > 0.0)
            std::snprintf(buf, sizeof buf, " %lld", std::llround(b(i) / quantum_));
        else
            std::snprintf(buf, sizeof buf, " %a", b(i));
        out += buf;
    }
    return out;
}

Vector TextCodec::decode(std::string_view text) const {
    if (text.substr(0, kCodecTag.size()) != kCodecTag)
        throw EvaluationError("text is not a synthetic codec string");
    std::istringstream in{std::string(text.substr(kCodecTag.size()))};
    std::vector<double> xs;
    std::string tok;
    while (in >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(v))
            throw EvaluationError("malformed codec token '" + tok + "'");
        xs.push_back(quantum_ > 0.0 ? v * quantum_ : v);
    }
    if (xs.size() != dim_) throw EvaluationError("codec string has the wrong number of coordinates");
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

// ---------------------------------------------------------------------------
// Landscape

SyntheticLandscape::SyntheticLandscape(SyntheticLandscapeConfig config,
                                       std::shared_ptr<const VocabularyTable> vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)),
      codec_((config_.validate(), config_.quantum), config_.behavior_dim) {
    if (!vocab_)
        vocab_ = std::make_shared<VocabularyTable>(
            VocabularyTable::synthetic(64, config_.dim, splitmix64(config_.seed ^ fnv1a64("vocab"))));
    if (vocab_->dim() != config_.dim) throw ConfigError("vocabulary dimension does not match the landscape");

    const auto m = static_cast<Eigen::Index>(config_.behavior_dim);
    const auto genome = static_cast<Eigen::Index>(config_.n_tokens * config_.dim);
    Rng rng = Rng::substream(config_.seed, "map");
    map_.resize(m, genome);
    const double entry_sd = config_.map_scale / std::sqrt(static_cast<double>(genome));
    for (Eigen::Index i = 0; i < map_.size(); ++i) map_.data()[i] = entry_sd * rng.normal();
    if (!config_.coordinate_gain.empty())
        for (Eigen::Index r = 0; r < m; ++r) map_.row(r) *= config_.coordinate_gain[static_cast<std::size_t>(r)];

    anchor_.resize(genome);
    for (std::size_t t = 0; t < config_.n_tokens; ++t)
        anchor_.segment(static_cast<Eigen::Index>(t * config_.dim), static_cast<Eigen::Index>(config_.dim)) =
            vocab_->mean();

    Rng brng = Rng::substream(config_.seed, "bumps");
    bumps_.reserve(config_.n_bumps);
    for (std::size_t j = 0; j < config_.n_bumps; ++j) {
        FitnessBump bump;
        bump.center.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) bump.center(i) = brng.uniform(0.1, 0.9);
        bump.amplitude = brng.uniform(config_.bump_amplitude_min, config_.bump_amplitude_max);
        bump.width = brng.uniform(config_.bump_width_min, config_.bump_width_max);
        bumps_.push_back(std::move(bump));
    }
}

Vector SyntheticLandscape::behavior_map(const PromptEmbedding& p) const {
    if (p.tokens() != config_.n_tokens || p.dim() != config_.dim)
        throw ConfigError("embedding shape does not match the landscape");
    Vector u = map_ * (p.flat() - anchor_);
    if (config_.warp_amplitude != 0.0)
        u.array() += config_.warp_amplitude * (config_.warp_frequency * u.array()).sin();
    if (config_.saturate) return (1.0 + (-config_.saturation_gain * u.array()).exp()).inverse().matrix();
    return u.array() + 0.5;
}

double SyntheticLandscape::true_fitness(const Eigen::Ref<const Vector>& b) const {
    if (static_cast<std::size_t>(b.size()) != config_.behavior_dim) throw ConfigError("behavior dimension mismatch");
    if ((b.array() < 0.0).any() || (b.array() > 1.0).any()) return 0.0;
    double best = 0.0;
    for (const auto& bump : bumps_) {
        const double r2 = (b - bump.center).squaredNorm();
        best = std::max(best, bump.amplitude * std::exp(-r2 / (2.0 * bump.width * bump.width)));
    }
    return best;
}

GenerationResult SyntheticLandscape::generate(const GenerationRequest& request) {
    request.validate();
    const PromptEmbedding p = request.mode == PromptMode::SoftPrompt
                                  ? *request.embedding
                                  : embed_tokens(request.token_ids, *vocab_);
    Vector b = behavior_map(p);
    if (config_.noise_sigma > 0.0) {
        Rng rng(splitmix64(config_.seed ^ splitmix64(request.decode_seed)));
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) += config_.noise_sigma * rng.normal();
    }
    return {codec_.encode(b), {{"model_id", "synthetic"}, {"mode", prompt_mode_name(request.mode)}}};
}

std::string SyntheticLandscape::recombine(const RecombinationRequest& request, const std::string&,
                                          std::uint64_t) {
    const Vector a = codec_.decode(request.parent_a);
    const Vector b = codec_.decode(request.parent_b);
    return codec_.encode(0.5 * (a + b));
}

double SyntheticLandscape::evaluate_fitness(const std::string& text, const std::string&, const std::string&,
                                            std::uint64_t noise_seed) {
    const Vector b = codec_.decode(text);
    if ((b.array() < 0.0).any() || (b.array() > 1.0).any()) return 0.0;
    double f = true_fitness(b);
    const double sigma = config_.fitness_noise();
    if (sigma > 0.0) {
        Rng rng(splitmix64(~config_.seed ^ splitmix64(noise_seed)));
        f += sigma * rng.normal();
    }
    return std::clamp(f, 0.0, 1.0);
}

// ---------------------------------------------------------------------------

CodecCharacterizer::CodecCharacterizer(TextCodec codec, std::size_t semantic_dim, double alpha)
    : codec_(std::move(codec)), semantic_dim_(semantic_dim), alpha_(alpha) {
    if (semantic_dim_ > codec_.dim()) throw ConfigError("semantic_dim exceeds the codec dimension");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
}

BehaviorDescriptor CodecCharacterizer::describe(std::string_view text) {
    const Vector b = codec_.decode(text).cwiseMax(0.0).cwiseMin(1.0);
    const auto ds = static_cast<Eigen::Index>(semantic_dim_);
    return fuse(b.head(ds), b.tail(b.size() - ds), alpha_);
}

}  // namespace promptqd
