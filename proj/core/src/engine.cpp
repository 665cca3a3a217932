#include "promptqd/engine.hpp"

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

namespace promptqd {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'Q', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::string> read_corpus_texts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read reference corpus " + path.string());
    std::vector<std::string> texts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            if (j.contains("text")) texts.push_back(j.at("text").get<std::string>());
            else texts.push_back(j.at("code").get<std::string>());
        } catch (const json::exception& e) {
            throw ConfigError("malformed reference corpus line in " + path.string() + ": " + e.what());
        }
    }
    return texts;
}

json config_identity(const EngineConfig& c) {
    json j = c.to_json();
    j.erase("budget");
    j.erase("checkpoint_path");
    return j;
}

json read_checkpoint_payload(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint " + path.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t size = 0, checksum = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&size), sizeof size);
    in.read(reinterpret_cast<char*>(&checksum), sizeof checksum);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw LoadError("not a promptqd checkpoint");
    if (version != kCheckpointVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
    if (size > (std::uint64_t{1} << 34)) throw LoadError("checkpoint payload size is implausible");
    std::string payload(size, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(size));
    if (!in || in.peek() != std::char_traits<char>::eof() || fnv1a64(payload) != checksum)
        throw LoadError("checkpoint is truncated or corrupt");
    try {
        return json::from_cbor(payload);
    } catch (const json::exception& e) {
        throw LoadError(std::string("checkpoint payload is malformed: ") + e.what());
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunLog

const char* RunLog::csv_header() {
    return "iteration,operator,applied,outcome,cell,qd_score,coverage,occupied,cells,sigma_p,"
           "generator_calls,total_generator_calls,fitness_calls,fallback";
}

std::string RunLog::to_csv() const {
    std::string out = csv_header();
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.iteration) + ',' + r.op + ',' + r.applied + ',' + r.outcome + ',' +
               std::to_string(r.cell) + ',' + format_double(r.qd_score) + ',' + format_double(r.coverage) + ',' +
               std::to_string(r.occupied) + ',' + std::to_string(r.cells) + ',' + format_double(r.sigma_p) + ',' +
               std::to_string(r.generator_calls) + ',' + std::to_string(r.total_generator_calls) + ',' +
               std::to_string(r.fitness_calls) + ',' + (r.fallback ? "1" : "0") + '\n';
    }
    return out;
}

void RunLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << to_csv();
}

RunLog RunLog::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open run log " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != csv_header()) throw LoadError("run log has an unexpected header");
    RunLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 14) throw LoadError("run log row has " + std::to_string(f.size()) + " fields");
        try {
            RunRecord r;
            r.iteration = std::stoull(f[0]);
            r.op = f[1];
            r.applied = f[2];
            r.outcome = f[3];
            r.cell = std::stoll(f[4]);
            r.qd_score = std::stod(f[5]);
            r.coverage = std::stod(f[6]);
            r.occupied = std::stoull(f[7]);
            r.cells = std::stoull(f[8]);
            r.sigma_p = std::stod(f[9]);
            r.generator_calls = std::stoull(f[10]);
            r.total_generator_calls = std::stoull(f[11]);
            r.fitness_calls = std::stoull(f[12]);
            r.fallback = f[13] == "1";
            log.records.push_back(std::move(r));
        } catch (const std::exception&) {
            throw LoadError("run log row is malformed: " + line);
        }
    }
    return log;
}

SelectedParent select_parent(const Archive& archive, Rng& rng) {
    const auto cells = archive.occupied_cells();
    if (cells.empty()) throw OperatorError("cannot select a parent from an empty archive");
    const std::size_t cell = cells[rng.below(cells.size())];
    return {cell, &archive.slot(cell)->candidate};
}

std::size_t expected_generator_calls(const RunRecord& r, const TargetedMutationConfig& cfg) {
    const std::size_t k = cfg.k_directions;
    if (r.outcome == "operator-error") return k + 1;
    if (r.applied == "targeted" || r.applied == "crossover+targeted") return k + 2;
    return 1;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(EngineConfig config, std::shared_ptr<Backend> backend, std::shared_ptr<Characterizer> characterizer,
               std::shared_ptr<const VocabularyTable> vocab)
    : config_(std::move(config)), backend_(std::move(backend)), characterizer_(std::move(characterizer)),
      vocab_(std::move(vocab)), init_rng_(Rng::substream(config_.seed, "init")),
      selection_rng_(Rng::substream(config_.seed, "selection")),
      operator_rng_(Rng::substream(config_.seed, "operators")), noise_rng_(Rng::substream(config_.seed, "noise")),
      reeval_rng_(Rng::substream(config_.seed, "reeval")) {
    config_.validate();
    if (!backend_ || !characterizer_ || !vocab_) throw ConfigError("engine needs a backend, characterizer and vocabulary");
    if (vocab_->dim() != config_.dim) throw ConfigError("vocabulary dimension does not match genome.dim");
    if (characterizer_->alpha() != config_.alpha) throw ConfigError("characterizer alpha does not match behavior.alpha");
    mutation_.sigma_p = config_.sigma_p;
    mutation_.c_sigma = config_.c_sigma;
    mutation_.p_target_success = config_.p_target_success;
    mutation_.window_size = config_.window;
}

Engine Engine::from_config(const EngineConfig& config) {
    config.validate();
    std::shared_ptr<const VocabularyTable> vocab;
    if (!config.vocab_path.empty())
        vocab = std::make_shared<VocabularyTable>(VocabularyTable::load(config.vocab_path));

    if (config.backend == "synthetic") {
        SyntheticLandscapeConfig l = config.landscape;
        l.n_tokens = config.n_tokens;
        l.dim = config.dim;
        l.semantic_dim = config.semantic_dim;
        auto landscape = std::make_shared<SyntheticLandscape>(l, vocab);
        auto ch = std::make_shared<CodecCharacterizer>(landscape->codec(), config.semantic_dim, config.alpha);
        return Engine(config, landscape, ch, landscape->vocabulary_ptr());
    }

    RemoteConfig rc = config.remote;
    rc.mode = config.mode;
    rc.apply_environment();
    auto remote = std::make_shared<RemoteBackend>(rc, std::make_shared<HttpTransport>(rc));
    if (!vocab) vocab = std::make_shared<VocabularyTable>(remote->fetch_vocabulary());
    remote = std::make_shared<RemoteBackend>(rc, std::make_shared<HttpTransport>(rc), vocab);

    const auto texts = read_corpus_texts(config.reference_corpus);
    std::shared_ptr<const TextEmbedder> embedder;
    if (config.embedder == "remote") {
        const auto probe = remote->embed_texts({texts.empty() ? std::string("probe") : texts.front()}, "embed-dim");
        embedder = std::make_shared<RemoteEmbedder>(remote, static_cast<std::size_t>(probe.front().size()));
    } else {
        embedder = std::make_shared<HashNgramEmbedder>();
    }
    auto pipeline = SemanticPipeline::fit(embedder, texts, config.semantic_dim,
                                          splitmix64(config.seed ^ fnv1a64("reducer")), config.reference_corpus);
    const auto kind = config.behavior_kind == "code" ? ExplicitKind::Code : ExplicitKind::Writing;
    auto ch = std::make_shared<HybridCharacterizer>(std::move(pipeline), kind, config.alpha);
    return Engine(config, remote, ch, vocab);
}

Engine Engine::resume(const std::filesystem::path& checkpoint) {
    const json j = read_checkpoint_payload(checkpoint);
    EngineConfig cfg;
    try {
        cfg = EngineConfig::from_json(j.at("config"));
    } catch (const json::exception& e) {
        throw LoadError(std::string("checkpoint payload is malformed: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("checkpoint configuration is invalid: ") + e.what());
    }
    Engine engine = from_config(cfg);
    engine.load_state(j);
    return engine;
}

const Archive& Engine::archive() const {
    if (!archive_) throw OperatorError("engine is not initialized");
    return *archive_;
}

std::string Engine::request_id(std::string_view kind) {
    return "s" + std::to_string(config_.seed) + "-i" + std::to_string(iteration_) + "-" + std::string(kind) + "-" +
           std::to_string(request_counter_++);
}

std::string Engine::generate_text(const PromptEmbedding& p, std::uint64_t decode_seed, const std::string& id) {
    GenerationRequest req;
    req.mode = config_.mode;
    req.task = config_.task;
    req.request_id = id;
    req.decode_seed = decode_seed;
    if (config_.mode == PromptMode::SoftPrompt) {
        req.embedding = p;
    } else {
        auto proj = project_to_vocab(p, *vocab_);
        req.token_ids = std::move(proj.token_ids);
        req.tokens = std::move(proj.tokens);
    }
    return backend_->generate(req).text;
}

Engine::Evaluated Engine::evaluate(std::string text, const std::string& id) {
    Evaluated e;
    e.descriptor = characterizer_->describe(text);
    e.raw = characterizer_->last_raw_features();
    const std::uint64_t seed = noise_rng_.next_u64();
    ++fitness_calls_;
    e.fitness = backend_->evaluate_fitness(text, config_.task, id + "-fit", seed);
    e.text = std::move(text);
    return e;
}

PromptEmbedding Engine::mutate_exploratory(const PromptEmbedding& p) {
    return exploratory_mutation(p, mutation_.sigma_p, operator_rng_);
}

void Engine::adapt(bool improved) {
    mutation_.record(improved);
    adapt_sigma(mutation_);
}

void Engine::initialize() {
    if (archive_) return;
    Characterizer& ch = *characterizer_;
    const std::size_t n_ref = config_.reference_samples ? config_.reference_samples : 20 * config_.cells;

    std::vector<Vector> reference;
    if (config_.reference_kind == "uniform") {
        const auto ds = static_cast<Eigen::Index>(ch.semantic_dim());
        const auto de = static_cast<Eigen::Index>(ch.explicit_dim());
        reference.reserve(n_ref);
        for (std::size_t i = 0; i < n_ref; ++i) {
            Vector s(ds), e(de);
            for (Eigen::Index j = 0; j < ds; ++j) s(j) = init_rng_.uniform();
            for (Eigen::Index j = 0; j < de; ++j) e(j) = init_rng_.uniform();
            reference.push_back(fuse(s, e, config_.alpha).fused);
        }
    } else if (config_.reference_kind == "generated") {
        for (std::size_t i = 0; i < n_ref; ++i) {
            const auto p = init_embedding(*vocab_, config_.n_tokens, config_.sigma_init, init_rng_);
            const std::uint64_t seed = noise_rng_.next_u64();
            ++init_generator_calls_;
            try {
                reference.push_back(ch.describe(generate_text(p, seed, request_id("ref"))).fused);
            } catch (const BackendUnavailable&) {
                throw;
            } catch (const EvaluationError&) {
            }
        }
    } else {
        for (const auto& t : read_corpus_texts(config_.reference_corpus)) reference.push_back(ch.describe(t).fused);
    }

    Archive archive = init_centroids(reference, config_.cells, splitmix64(config_.seed ^ fnv1a64("centroids")),
                                     config_.c_max, config_.buffer_size);
    archive.metadata_kind = ch.explicit_kind();
    archive_.emplace(std::move(archive));

    for (std::size_t i = 0; i < config_.initial_population_size(); ++i) {
        const auto p = init_embedding(*vocab_, config_.n_tokens, config_.sigma_init, init_rng_);
        const std::string id = request_id("init");
        const std::uint64_t seed = noise_rng_.next_u64();
        try {
            ++init_generator_calls_;
            auto ev = evaluate(generate_text(p, seed, id), id);
            archive_->try_insert(Candidate{std::move(ev.text), p, std::move(ev.descriptor), 1, std::move(ev.raw)},
                                 ev.fitness);
        } catch (const BackendUnavailable&) {
            throw;
        } catch (const EvaluationError&) {
        }
    }
    archive_->normalizer_maxima = characterizer_->normalizer_state();
}

void Engine::step() {
    if (!archive_) throw OperatorError("engine is not initialized");
    RunRecord rec;
    rec.iteration = iteration_ + 1;
    const std::string id = request_id("op");

    const SelectedParent sel = select_parent(*archive_, selection_rng_);
    const Candidate parent = *sel.candidate;

    bool cross = false, targeted = false;
    const double u = operator_rng_.uniform();
    if (config_.stacked_operators) {
        cross = u < config_.p_cross;
        targeted = operator_rng_.uniform() < config_.p_targeted;
    } else {
        cross = u < config_.p_cross;
        targeted = !cross && u < config_.p_cross + config_.p_targeted;
    }
    const char* mutation_name = targeted ? "targeted" : "exploratory";
    if (config_.stacked_operators)
        rec.op = cross ? std::string("crossover+") + mutation_name : std::string(mutation_name);
    else
        rec.op = cross ? "crossover" : mutation_name;

    std::size_t calls = 0;
    bool improved = false;
    try {
        PromptEmbedding base = parent.embedding;
        std::optional<PromptEmbedding> child;
        std::string text;
        std::string applied;

        if (cross) {
            SelectedParent partner = select_parent(*archive_, selection_rng_);
            if (partner.cell == sel.cell) partner = select_parent(*archive_, selection_rng_);
            if (!config_.frozen_embedding) base = crossover(parent.embedding, partner.candidate->embedding, operator_rng_).offspring;
            if (!config_.stacked_operators) {
                const std::uint64_t seed = noise_rng_.next_u64();
                ++calls;
                text = backend_->recombine(
                    text_recombination_request(parent.text, partner.candidate->text, config_.task), id, seed);
                child = base;
                applied = "crossover";
            }
        }

        if (!child) {
            const std::string prefix = cross ? "crossover+" : "";
            if (config_.frozen_embedding) {
                child = base;
                applied = prefix + "regenerate";
            } else if (targeted) {
                const auto empty = archive_->nearest_empty(parent.descriptor.fused);
                if (!empty) {
                    rec.fallback = true;
                    child = mutate_exploratory(base);
                    applied = prefix + "exploratory";
                } else {
                    const Vector target = archive_->centroids()[*empty] - parent.descriptor.fused;
                    const std::uint64_t probe_seed = noise_rng_.next_u64();
                    std::mutex describe_mutex;
                    BehaviorProbe probe = [&](const PromptEmbedding& q, std::size_t idx) {
                        const std::string t = generate_text(q, probe_seed, id + "-probe" + std::to_string(idx));
                        std::lock_guard lock(describe_mutex);
                        return characterizer_->describe(t).fused;
                    };
                    GradientEstimate est;
                    try {
                        est = estimate_behavior_gradient(base, probe, config_.targeted, operator_rng_,
                                                         config_.concurrent_probes && backend_->concurrent_safe());
                    } catch (const OperatorError&) {
                        calls += config_.targeted.k_directions + 1;
                        throw;
                    }
                    calls += est.calls;
                    auto res = targeted_mutation(base, target, est, config_.targeted.gamma, mutation_.sigma_p,
                                                 operator_rng_);
                    rec.fallback = res.fell_back;
                    child = std::move(res.offspring);
                    applied = prefix + "targeted";
                }
            } else {
                child = mutate_exploratory(base);
                applied = prefix + "exploratory";
            }
            const std::uint64_t seed = noise_rng_.next_u64();
            ++calls;
            text = generate_text(*child, seed, id);
        }
        rec.applied = applied;

        auto ev = evaluate(std::move(text), id);
        const auto result = archive_->try_insert(
            Candidate{std::move(ev.text), std::move(*child), std::move(ev.descriptor), 1, std::move(ev.raw)}, ev.fitness);
        rec.outcome = outcome_name(result.outcome);
        rec.cell = static_cast<long long>(result.cell);
        improved = result.improved();
    } catch (const BackendUnavailable&) {
        throw;
    } catch (const OperatorError&) {
        rec.outcome = "operator-error";
        if (rec.applied.empty()) rec.applied = rec.op;
    } catch (const EvaluationError&) {
        rec.outcome = "eval-failed";
        if (rec.applied.empty()) rec.applied = rec.op;
    }

    generator_calls_ += calls;
    rec.generator_calls = calls;
    adapt(improved);
    ++iteration_;

    if (config_.reeval_interval > 0 && iteration_ % config_.reeval_interval == 0) {
        auto evaluator = [this](const Candidate& c) {
            const std::uint64_t seed = reeval_rng_.next_u64();
            ++fitness_calls_;
            return backend_->evaluate_fitness(c.text, config_.task, request_id("reeval"), seed);
        };
        archive_->reevaluate_elites(config_.reeval_fraction, evaluator, reeval_rng_);
    }
    log_iteration(std::move(rec));
}

void Engine::log_iteration(RunRecord rec) {
    archive_->normalizer_maxima = characterizer_->normalizer_state();
    rec.qd_score = archive_->qd_score();
    rec.coverage = archive_->coverage();
    rec.occupied = archive_->occupied();
    rec.cells = archive_->cells();
    rec.sigma_p = mutation_.sigma_p;
    rec.total_generator_calls = generator_calls_;
    rec.fitness_calls = fitness_calls_;
    log_.records.push_back(std::move(rec));
}

void Engine::run(std::optional<std::size_t> iterations) {
    const std::size_t target = iterations.value_or(config_.budget);
    initialize();
    while (iteration_ < target) {
        if (config_.checkpoint_path.empty()) {
            step();
            continue;
        }
        // Keep the last completed state so an abort checkpoints a clean boundary.
        const json before = state_json();
        try {
            step();
        } catch (const BackendUnavailable&) {
            load_state(before);
            checkpoint(config_.checkpoint_path);
            throw;
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

json Engine::state_json() const {
    json log = json::array();
    for (const auto& r : log_.records)
        log.push_back({r.iteration, r.op, r.applied, r.outcome, r.cell, r.qd_score, r.coverage, r.occupied, r.cells,
                       r.sigma_p, r.generator_calls, r.total_generator_calls, r.fitness_calls, r.fallback});
    return {
        {"format", "promptqd-checkpoint"},
        {"config", config_.to_json()},
        {"archive", archive_ ? archive_to_json(*archive_) : json(nullptr)},
        {"rng",
         {{"init", init_rng_.serialize()},
          {"selection", selection_rng_.serialize()},
          {"operators", operator_rng_.serialize()},
          {"noise", noise_rng_.serialize()},
          {"reeval", reeval_rng_.serialize()}}},
        {"mutation",
         {{"sigma_p", mutation_.sigma_p},
          {"c_sigma", mutation_.c_sigma},
          {"p_target_success", mutation_.p_target_success},
          {"window_size", mutation_.window_size},
          {"window", std::vector<bool>(mutation_.window.begin(), mutation_.window.end())}}},
        {"normalizer", characterizer_->normalizer_state()},
        {"runlog", std::move(log)},
        {"counters",
         {{"iteration", iteration_},
          {"generator_calls", generator_calls_},
          {"init_generator_calls", init_generator_calls_},
          {"fitness_calls", fitness_calls_},
          {"request_counter", request_counter_}}},
    };
}

void Engine::load_state(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "promptqd-checkpoint") throw LoadError("not a checkpoint payload");
        if (config_identity(EngineConfig::from_json(j.at("config"))) != config_identity(config_))
            throw LoadError("checkpoint was written with a different configuration");

        std::optional<Archive> archive;
        if (!j.at("archive").is_null()) archive.emplace(archive_from_json(j.at("archive")));

        const auto& r = j.at("rng");
        Rng init, selection, operators, noise, reeval;
        init.restore(r.at("init").get<std::string>());
        selection.restore(r.at("selection").get<std::string>());
        operators.restore(r.at("operators").get<std::string>());
        noise.restore(r.at("noise").get<std::string>());
        reeval.restore(r.at("reeval").get<std::string>());

        const auto& m = j.at("mutation");
        MutationState mutation;
        mutation.sigma_p = m.at("sigma_p").get<double>();
        mutation.c_sigma = m.at("c_sigma").get<double>();
        mutation.p_target_success = m.at("p_target_success").get<double>();
        mutation.window_size = m.at("window_size").get<std::size_t>();
        for (bool b : m.at("window").get<std::vector<bool>>()) mutation.window.push_back(b);

        RunLog log;
        for (const auto& row : j.at("runlog")) {
            RunRecord rec;
            rec.iteration = row.at(0).get<std::size_t>();
            rec.op = row.at(1).get<std::string>();
            rec.applied = row.at(2).get<std::string>();
            rec.outcome = row.at(3).get<std::string>();
            rec.cell = row.at(4).get<long long>();
            rec.qd_score = row.at(5).get<double>();
            rec.coverage = row.at(6).get<double>();
            rec.occupied = row.at(7).get<std::size_t>();
            rec.cells = row.at(8).get<std::size_t>();
            rec.sigma_p = row.at(9).get<double>();
            rec.generator_calls = row.at(10).get<std::size_t>();
            rec.total_generator_calls = row.at(11).get<std::size_t>();
            rec.fitness_calls = row.at(12).get<std::size_t>();
            rec.fallback = row.at(13).get<bool>();
            log.records.push_back(std::move(rec));
        }

        const auto normalizer = j.at("normalizer").get<std::vector<double>>();
        if (normalizer.size() != characterizer_->normalizer_state().size())
            throw LoadError("checkpoint normalizer state does not match the characterizer");
        const auto& c = j.at("counters");
        const auto iteration = c.at("iteration").get<std::size_t>();
        const auto generator_calls = c.at("generator_calls").get<std::size_t>();
        const auto init_calls = c.at("init_generator_calls").get<std::size_t>();
        const auto fitness_calls = c.at("fitness_calls").get<std::size_t>();
        const auto request_counter = c.at("request_counter").get<std::size_t>();

        archive_ = std::move(archive);
        init_rng_ = init;
        selection_rng_ = selection;
        operator_rng_ = operators;
        noise_rng_ = noise;
        reeval_rng_ = reeval;
        mutation_ = std::move(mutation);
        log_ = std::move(log);
        characterizer_->restore_normalizer(normalizer);
        iteration_ = iteration;
        generator_calls_ = generator_calls;
        init_generator_calls_ = init_calls;
        fitness_calls_ = fitness_calls;
        request_counter_ = request_counter;
    } catch (const json::exception& e) {
        throw LoadError(std::string("checkpoint payload is malformed: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("checkpoint payload is invalid: ") + e.what());
    }
}

void Engine::checkpoint(const std::filesystem::path& path) const {
    const auto cbor = json::to_cbor(state_json());
    const std::string payload(cbor.begin(), cbor.end());
    const std::uint64_t size = payload.size();
    const std::uint64_t checksum = fnv1a64(payload);

    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write checkpoint " + tmp.string());
        out.write(kCheckpointMagic, 8);
        out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
        out.write(reinterpret_cast<const char*>(&size), sizeof size);
        out.write(reinterpret_cast<const char*>(&checksum), sizeof checksum);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw Error("failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void Engine::restore(const std::filesystem::path& path) { load_state(read_checkpoint_payload(path)); }

}  // namespace promptqd
