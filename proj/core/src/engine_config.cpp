#include "promptqd/engine.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace promptqd {

using nlohmann::json;

namespace {

// Reads known keys from one object and rejects anything else.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key) + " has the wrong type");
        }
    }

    std::optional<Section> sub(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return Section(j_.at(key), field(key));
    }

    const json& raw(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }
    bool has(const char* key) const { return j_.contains(key); }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown field " + field(k.c_str()));
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void check(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field + " " + what);
}

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

std::size_t EngineConfig::initial_population_size() const {
    return initial_population ? initial_population : std::max<std::size_t>(1, cells / 16);
}

void EngineConfig::validate() const {
    check(budget >= 1, "budget", "must be at least 1");
    check(probability(p_cross), "operators.p_cross", "must lie in [0, 1]");
    check(probability(p_targeted), "operators.p_targeted", "must lie in [0, 1]");
    check(p_cross + p_targeted <= 1.0 + 1e-12, "operators", "p_cross + p_targeted must not exceed 1");
    check(reeval_fraction > 0.0 && reeval_fraction <= 1.0, "reevaluation.fraction", "must lie in (0, 1]");
    check(alpha >= 0.0 && alpha <= 1.0, "behavior.alpha", "must lie in [0, 1]");
    check(cells >= 1, "archive.cells", "must be at least 1");
    check(c_max >= cells, "archive.c_max", "must be at least archive.cells");
    check(buffer_size >= 1, "archive.buffer_size", "must be at least 1");
    check(reference_kind == "uniform" || reference_kind == "generated" || reference_kind == "corpus",
          "archive.reference_kind", "must be uniform, generated or corpus");
    check(n_tokens >= 1, "genome.n_tokens", "must be at least 1");
    check(dim >= 1, "genome.dim", "must be at least 1");
    check(sigma_init >= 0.0 && std::isfinite(sigma_init), "genome.sigma_init", "must be finite and non-negative");
    check(sigma_p >= MutationState::kSigmaMin && sigma_p <= MutationState::kSigmaMax, "mutation.sigma_p",
          "must lie in [1e-6, 10]");
    check(std::isfinite(c_sigma) && c_sigma >= 0.0, "mutation.c_sigma", "must be finite and non-negative");
    check(probability(p_target_success), "mutation.p_target_success", "must lie in [0, 1]");
    check(window >= 1, "mutation.window", "must be at least 1");
    check(targeted.eta > 0.0, "targeted.eta", "must be positive");
    check(targeted.gamma > 0.0, "targeted.gamma", "must be positive");
    check(targeted.k_directions >= 1 && targeted.k_directions <= n_tokens * dim, "targeted.k_directions",
          "must lie in [1, n_tokens * dim]");
    check(behavior_kind == "codec" || behavior_kind == "code" || behavior_kind == "writing", "behavior.kind",
          "must be codec, code or writing");
    check(embedder == "hash" || embedder == "remote", "behavior.embedder", "must be hash or remote");
    check(backend == "synthetic" || backend == "remote", "backend.kind", "must be synthetic or remote");
    if (backend == "synthetic") {
        check(behavior_kind == "codec", "behavior.kind", "must be codec with the synthetic backend");
        check(semantic_dim <= landscape.behavior_dim, "behavior.semantic_dim",
              "must not exceed backend.synthetic.behavior_dim");
        try {
            SyntheticLandscapeConfig l = landscape;
            l.n_tokens = n_tokens;
            l.dim = dim;
            l.semantic_dim = semantic_dim;
            l.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("backend.synthetic: ") + e.what());
        }
    } else {
        check(behavior_kind != "codec", "behavior.kind", "codec requires the synthetic backend");
        check(remote.timeout_ms > 0, "backend.remote.timeout_ms", "must be positive");
        check(remote.max_retries >= 0, "backend.remote.max_retries", "must be non-negative");
        check(remote.max_in_flight >= 1, "backend.remote.max_in_flight", "must be at least 1");
    }
    if (behavior_kind != "codec") {
        check(semantic_dim >= 1, "behavior.semantic_dim", "must be at least 1");
        check(!reference_corpus.empty(), "behavior.reference_corpus", "is required for text behaviors");
    }
    if (reference_kind == "corpus")
        check(!reference_corpus.empty(), "behavior.reference_corpus", "is required for corpus references");
}

EngineConfig EngineConfig::from_json(const json& j) {
    EngineConfig c;
    Section root(j, "");
    root.get("budget", c.budget);
    root.get("seed", c.seed);
    root.get("task", c.task);
    root.get("checkpoint_path", c.checkpoint_path);

    if (auto s = root.sub("operators")) {
        s->get("p_cross", c.p_cross);
        s->get("p_targeted", c.p_targeted);
        s->get("stacked", c.stacked_operators);
        s->get("frozen_embedding", c.frozen_embedding);
        s->finish();
    }
    if (auto s = root.sub("reevaluation")) {
        s->get("fraction", c.reeval_fraction);
        s->get("interval", c.reeval_interval);
        s->finish();
    }
    if (auto s = root.sub("archive")) {
        s->get("cells", c.cells);
        s->get("c_max", c.c_max);
        s->get("buffer_size", c.buffer_size);
        s->get("initial_population", c.initial_population);
        s->get("reference_kind", c.reference_kind);
        s->get("reference_samples", c.reference_samples);
        s->finish();
    }
    if (auto s = root.sub("genome")) {
        s->get("n_tokens", c.n_tokens);
        s->get("dim", c.dim);
        s->get("sigma_init", c.sigma_init);
        std::string mode = prompt_mode_name(c.mode);
        s->get("mode", mode);
        c.mode = prompt_mode_from_name(mode);
        s->get("vocab_path", c.vocab_path);
        s->finish();
    }
    if (auto s = root.sub("mutation")) {
        s->get("sigma_p", c.sigma_p);
        s->get("c_sigma", c.c_sigma);
        s->get("p_target_success", c.p_target_success);
        s->get("window", c.window);
        s->finish();
    }
    if (auto s = root.sub("targeted")) {
        s->get("eta", c.targeted.eta);
        s->get("k_directions", c.targeted.k_directions);
        s->get("gamma", c.targeted.gamma);
        s->get("concurrent_probes", c.concurrent_probes);
        s->finish();
    }
    if (auto s = root.sub("behavior")) {
        s->get("kind", c.behavior_kind);
        s->get("alpha", c.alpha);
        s->get("semantic_dim", c.semantic_dim);
        s->get("reference_corpus", c.reference_corpus);
        s->get("embedder", c.embedder);
        s->finish();
    }
    if (auto s = root.sub("backend")) {
        s->get("kind", c.backend);
        if (auto l = s->sub("synthetic")) {
            auto& L = c.landscape;
            l->get("behavior_dim", L.behavior_dim);
            l->get("n_bumps", L.n_bumps);
            l->get("noise_sigma", L.noise_sigma);
            l->get("fitness_noise_sigma", L.fitness_noise_sigma);
            l->get("map_scale", L.map_scale);
            l->get("coordinate_gain", L.coordinate_gain);
            l->get("warp_amplitude", L.warp_amplitude);
            l->get("warp_frequency", L.warp_frequency);
            l->get("saturate", L.saturate);
            l->get("saturation_gain", L.saturation_gain);
            l->get("bump_width_min", L.bump_width_min);
            l->get("bump_width_max", L.bump_width_max);
            l->get("bump_amplitude_min", L.bump_amplitude_min);
            l->get("bump_amplitude_max", L.bump_amplitude_max);
            l->get("quantum", L.quantum);
            l->get("seed", L.seed);
            l->finish();
        }
        if (auto r = s->sub("remote")) {
            auto& R = c.remote;
            r->get("endpoint", R.endpoint);
            r->get("timeout_ms", R.timeout_ms);
            r->get("max_retries", R.max_retries);
            r->get("backoff_ms", R.backoff_ms);
            r->get("max_in_flight", R.max_in_flight);
            if (r->has("decode_config")) R.decode_config = r->raw("decode_config");
            r->finish();
        }
        s->finish();
    }
    root.finish();
    c.landscape.n_tokens = c.n_tokens;
    c.landscape.dim = c.dim;
    c.landscape.semantic_dim = c.semantic_dim;
    return c;
}

EngineConfig EngineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

json EngineConfig::to_json() const {
    const auto& L = landscape;
    const auto& R = remote;
    return {
        {"budget", budget},
        {"seed", seed},
        {"task", task},
        {"checkpoint_path", checkpoint_path},
        {"operators",
         {{"p_cross", p_cross}, {"p_targeted", p_targeted}, {"stacked", stacked_operators},
          {"frozen_embedding", frozen_embedding}}},
        {"reevaluation", {{"fraction", reeval_fraction}, {"interval", reeval_interval}}},
        {"archive",
         {{"cells", cells}, {"c_max", c_max}, {"buffer_size", buffer_size},
          {"initial_population", initial_population}, {"reference_kind", reference_kind},
          {"reference_samples", reference_samples}}},
        {"genome",
         {{"n_tokens", n_tokens}, {"dim", dim}, {"sigma_init", sigma_init}, {"mode", prompt_mode_name(mode)},
          {"vocab_path", vocab_path}}},
        {"mutation",
         {{"sigma_p", sigma_p}, {"c_sigma", c_sigma}, {"p_target_success", p_target_success}, {"window", window}}},
        {"targeted",
         {{"eta", targeted.eta}, {"k_directions", targeted.k_directions}, {"gamma", targeted.gamma},
          {"concurrent_probes", concurrent_probes}}},
        {"behavior",
         {{"kind", behavior_kind}, {"alpha", alpha}, {"semantic_dim", semantic_dim},
          {"reference_corpus", reference_corpus}, {"embedder", embedder}}},
        {"backend",
         {{"kind", backend},
          {"synthetic",
           {{"behavior_dim", L.behavior_dim}, {"n_bumps", L.n_bumps}, {"noise_sigma", L.noise_sigma},
            {"fitness_noise_sigma", L.fitness_noise_sigma}, {"map_scale", L.map_scale},
            {"coordinate_gain", L.coordinate_gain}, {"warp_amplitude", L.warp_amplitude},
            {"warp_frequency", L.warp_frequency}, {"saturate", L.saturate},
            {"saturation_gain", L.saturation_gain}, {"bump_width_min", L.bump_width_min},
            {"bump_width_max", L.bump_width_max}, {"bump_amplitude_min", L.bump_amplitude_min},
            {"bump_amplitude_max", L.bump_amplitude_max}, {"quantum", L.quantum}, {"seed", L.seed}}},
          {"remote",
           {{"endpoint", R.endpoint}, {"timeout_ms", R.timeout_ms}, {"max_retries", R.max_retries},
            {"backoff_ms", R.backoff_ms}, {"max_in_flight", R.max_in_flight},
            {"decode_config", R.decode_config}}}}},
    };
}

}  // namespace promptqd
