#include "cli.hpp"

#include "promptqd/metrics.hpp"

#include <CLI11.hpp>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

extern char** environ;

namespace promptqd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOutputs[] = {"archive.jsonl", "embeddings.bin", "runlog.csv", "metrics.json"};

fs::path staged(const fs::path& dir, const std::string& name) { return dir / (name + ".partial"); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("short write to " + path.string());
}

void write_atomically(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".partial";
    write_text(tmp, text);
    fs::rename(tmp, path);
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        try {
            const auto dash = item.find('-');
            if (dash == std::string::npos) {
                seeds.push_back(std::stoull(item));
                continue;
            }
            const auto lo = std::stoull(item.substr(0, dash));
            const auto hi = std::stoull(item.substr(dash + 1));
            if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
            for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        } catch (const std::logic_error&) {
            throw ConfigError("bad seed list '" + spec + "'");
        }
    }
    if (seeds.empty()) throw ConfigError("no seeds given");
    return seeds;
}

Paradigm elite_paradigm(const Archive& archive, const EliteSlot& slot) {
    const auto& e = slot.candidate.descriptor.explicit_part;
    if (archive.metadata_kind == "code" && e.size() == 6) {
        Eigen::Index best = 0;
        e.tail(4).maxCoeff(&best);
        return static_cast<Paradigm>(best);
    }
    return code_feature_counts(slot.candidate.text).paradigm;
}

json cell_summary(const Archive& archive, std::size_t cell) {
    const auto& slot = *archive.slot(cell);
    return {{"cell", cell},
            {"median_fitness", slot.fitness.median()},
            {"fitness_buffer", std::vector<double>(slot.fitness.values().begin(), slot.fitness.values().end())},
            {"eval_count", slot.candidate.eval_count},
            {"text", slot.candidate.text}};
}

std::vector<const char*> argv_of(const std::vector<std::string>& args) {
    std::vector<const char*> v;
    v.reserve(args.size() + 1);
    for (const auto& a : args) v.push_back(a.c_str());
    v.push_back(nullptr);
    return v;
}

int wait_child(pid_t pid) {
    int status = 0;
    while (waitpid(pid, &status, 0) < 0)
        if (errno != EINTR) return kInternalError;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return kInternalError;
}

}  // namespace

// ---------------------------------------------------------------------------
// run

EngineConfig resolve_config(const RunOptions& o) {
    if (!fs::is_regular_file(o.config)) throw ConfigError("cannot read config file " + o.config.string());
    EngineConfig c = EngineConfig::load(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.backend) c.backend = *o.backend;
    if (o.budget) c.budget = *o.budget;
    if (c.backend == "remote" && c.checkpoint_path.empty() && !o.out.empty())
        c.checkpoint_path = (o.out / "checkpoint.pqd").string();
    c.validate();
    return c;
}

void write_outputs(const Engine& engine, const fs::path& dir, bool finalize) {
    const Archive& archive = engine.archive();
    export_archive(archive, staged(dir, "archive.jsonl"), staged(dir, "embeddings.bin"), "embeddings.bin");
    write_text(staged(dir, "runlog.csv"), engine.runlog().to_csv());

    json m = archive_metrics(archive);
    m["seed"] = engine.config().seed;
    m["iterations"] = engine.iteration();
    m["budget"] = engine.config().budget;
    m["generator_calls"] = engine.generator_calls();
    m["init_generator_calls"] = engine.init_generator_calls();
    m["fitness_calls"] = engine.fitness_calls();
    m["sigma_p"] = engine.mutation_state().sigma_p;
    m["completed"] = finalize;
    write_text(staged(dir, "metrics.json"), m.dump(2) + "\n");

    if (!finalize) return;
    for (const char* name : kOutputs) fs::rename(staged(dir, name), dir / name);
}

int run_command(const RunOptions& o, std::ostream& out, std::ostream& err) {
    std::optional<Engine> engine;
    std::size_t target = 0;
    try {
        if (o.resume.empty()) {
            const EngineConfig config = resolve_config(o);
            fs::create_directories(o.out);
            engine.emplace(Engine::from_config(config));
            target = config.budget;
        } else {
            engine.emplace(Engine::resume(o.resume));
            target = o.budget.value_or(engine->config().budget);
            fs::create_directories(o.out);
        }

        engine->initialize();
        const std::size_t chunk = std::max<std::size_t>(1, target / 10);
        while (engine->iteration() < target) {
            engine->run(std::min(target, engine->iteration() + chunk));
            if (!o.quiet)
                err << "iteration " << engine->iteration() << "/" << target << "  qd=" << engine->archive().qd_score()
                    << "  coverage=" << engine->archive().coverage() << '\n';
        }
        write_outputs(*engine, o.out, true);
        if (!o.quiet)
            out << "seed " << engine->config().seed << ": qd_score=" << engine->archive().qd_score()
                << " coverage=" << engine->archive().coverage() << " occupied=" << engine->archive().occupied()
                << "/" << engine->archive().cells() << '\n';
        return kOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const FitError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const LoadError& e) {
        err << "load error: " << e.what() << '\n';
        return kLoadError;
    } catch (const EvaluationError& e) {
        err << "backend error: " << e.what() << '\n';
        if (engine && engine->initialized()) write_outputs(*engine, o.out, false);
        return kBackendError;
    } catch (const TransportError& e) {
        err << "backend error: " << e.what() << '\n';
        if (engine && engine->initialized()) write_outputs(*engine, o.out, false);
        return kBackendError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

// ---------------------------------------------------------------------------
// inspect

json inspect_cell(const Archive& archive, std::size_t cell) {
    if (cell >= archive.cells())
        throw ConfigError("cell " + std::to_string(cell) + " out of range (archive has " +
                          std::to_string(archive.cells()) + ")");
    if (!archive.slot(cell)) return {{"cell", cell}, {"occupied", false}};
    json j = cell_summary(archive, cell);
    j["occupied"] = true;
    const auto& d = archive.slot(cell)->candidate.descriptor;
    j["descriptor"] = {{"fused", std::vector<double>(d.fused.begin(), d.fused.end())},
                       {"semantic", std::vector<double>(d.semantic.begin(), d.semantic.end())},
                       {"explicit", std::vector<double>(d.explicit_part.begin(), d.explicit_part.end())}};
    if (const auto r = report_descriptor(archive, cell))
        j["report_descriptor"] = {{"fused", std::vector<double>(r->fused.begin(), r->fused.end())},
                                  {"explicit", std::vector<double>(r->explicit_part.begin(), r->explicit_part.end())}};
    return j;
}

json inspect_top(const Archive& archive, std::size_t k) {
    auto cells = archive.occupied_cells();
    std::stable_sort(cells.begin(), cells.end(), [&](std::size_t a, std::size_t b) {
        return archive.slot(a)->fitness.median() > archive.slot(b)->fitness.median();
    });
    json j = json::array();
    for (std::size_t i = 0; i < std::min(k, cells.size()); ++i) j.push_back(cell_summary(archive, cells[i]));
    return j;
}

json paradigm_histogram(const Archive& archive) {
    json j = {{"occupied", archive.occupied()}, {"counts", json::object()}, {"fractions", json::object()}};
    if (archive.occupied() == 0) return j;
    std::array<std::size_t, 4> counts{};
    for (auto cell : archive.occupied_cells())
        ++counts[static_cast<std::size_t>(elite_paradigm(archive, *archive.slot(cell)))];
    for (std::size_t p = 0; p < counts.size(); ++p) {
        const char* name = paradigm_name(static_cast<Paradigm>(p));
        j["counts"][name] = counts[p];
        j["fractions"][name] = static_cast<double>(counts[p]) / static_cast<double>(archive.occupied());
    }
    return j;
}

// ---------------------------------------------------------------------------
// batch outputs

std::vector<fs::path> seed_dirs(const fs::path& batch_dir) {
    if (!fs::is_directory(batch_dir)) throw LoadError("not a batch directory: " + batch_dir.string());
    std::vector<std::pair<std::uint64_t, fs::path>> found;
    for (const auto& entry : fs::directory_iterator(batch_dir)) {
        const std::string name = entry.path().filename().string();
        if (!entry.is_directory() || name.rfind("seed_", 0) != 0) continue;
        try {
            std::size_t used = 0;
            const auto k = std::stoull(name.substr(5), &used);
            if (used == name.size() - 5) found.emplace_back(k, entry.path());
        } catch (const std::logic_error&) {
        }
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> dirs;
    for (auto& [k, p] : found) dirs.push_back(std::move(p));
    if (dirs.empty()) throw LoadError("no seed_<k> directories in " + batch_dir.string());
    return dirs;
}

std::map<std::string, std::vector<double>> batch_metrics(const fs::path& batch_dir) {
    static const char* kMetrics[] = {"qd_score", "coverage", "occupied", "max_fitness", "mean_fitness", "self_bleu"};
    const auto dirs = seed_dirs(batch_dir);
    std::map<std::string, std::vector<double>> samples;
    for (const auto& dir : dirs) {
        std::ifstream in(dir / "metrics.json");
        if (!in) throw LoadError("missing " + (dir / "metrics.json").string());
        json m;
        try {
            m = json::parse(in);
        } catch (const json::exception& e) {
            throw LoadError("malformed " + (dir / "metrics.json").string() + ": " + e.what());
        }
        for (const char* key : kMetrics)
            if (m.contains(key) && m[key].is_number()) samples[key].push_back(m[key].get<double>());
    }
    for (auto it = samples.begin(); it != samples.end();)
        it = it->second.size() == dirs.size() ? std::next(it) : samples.erase(it);
    return samples;
}

// ---------------------------------------------------------------------------
// entry point

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quality-diversity search over prompt embeddings", "promptqd"};
    app.require_subcommand(1);

    RunOptions ro;
    std::string backend;
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    auto* run_cmd = app.add_subcommand("run", "Run one seeded search and write its outputs");
    run_cmd->add_option("--config", ro.config, "Engine config (JSON)");
    run_cmd->add_option("--seed", seed, "Master seed override");
    run_cmd->add_option("--out", ro.out, "Output directory")->required();
    run_cmd->add_option("--backend", backend, "Backend override")->check(CLI::IsMember({"synthetic", "remote"}));
    run_cmd->add_option("--budget", budget, "Budget override");
    run_cmd->add_option("--resume", ro.resume, "Continue from a checkpoint instead of a config");
    run_cmd->add_flag("--quiet", ro.quiet, "Suppress progress output");

    std::string seeds = "0-9";
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    std::string exe;
    RunOptions bo;
    auto* batch_cmd = app.add_subcommand("batch", "Run one process per seed into <out>/seed_<k>");
    batch_cmd->add_option("--config", bo.config, "Engine config (JSON)")->required();
    batch_cmd->add_option("--seeds", seeds, "Seed list, e.g. 0-9 or 1,3,5")->capture_default_str();
    batch_cmd->add_option("--out", bo.out, "Batch directory")->required();
    batch_cmd->add_option("--jobs", jobs, "Concurrent processes")->capture_default_str();
    batch_cmd->add_option("--backend", backend, "Backend override")->check(CLI::IsMember({"synthetic", "remote"}));
    batch_cmd->add_option("--budget", budget, "Budget override");
    batch_cmd->add_option("--exe", exe, "Executable to run per seed")->group("");
    batch_cmd->add_flag("--quiet", bo.quiet, "Suppress per-seed status lines");

    fs::path snapshot, embeddings;
    std::optional<std::size_t> cell, top;
    bool histogram = false;
    auto* inspect_cmd = app.add_subcommand("inspect", "Query an archive snapshot");
    inspect_cmd->add_option("archive", snapshot, "archive.jsonl")->required();
    inspect_cmd->add_option("--embeddings", embeddings, "Embedding sidecar (default: from the snapshot header)");
    auto* cell_opt = inspect_cmd->add_option("--cell", cell, "Show one cell");
    auto* top_opt = inspect_cmd->add_option("--top", top, "List the k best elites by median fitness");
    auto* hist_opt = inspect_cmd->add_flag("--paradigm-histogram", histogram, "Occupied cells per paradigm");
    cell_opt->excludes(top_opt)->excludes(hist_opt);
    top_opt->excludes(hist_opt);

    std::vector<std::string> inputs;
    fs::path report_path;
    std::uint64_t boot_seed = 0;
    auto* compare_cmd = app.add_subcommand("compare", "Summarize and compare batch outputs");
    compare_cmd->add_option("batches", inputs, "Batch directories, optionally as name=dir")->required();
    compare_cmd->add_option("--out", report_path, "Report path (default: stdout)");
    compare_cmd->add_option("--seed", boot_seed, "Bootstrap seed")->capture_default_str();

    fs::path dyn_dir, dyn_out;
    auto* dyn_cmd = app.add_subcommand("export-dynamics", "Coverage and QD-score quartiles per iteration");
    dyn_cmd->add_option("batch", dyn_dir, "Batch directory")->required();
    dyn_cmd->add_option("--out", dyn_out, "CSV path (default: stdout)");

    fs::path check_path;
    auto* validate_cmd = app.add_subcommand("validate-config", "Check a config file without running it");
    validate_cmd->add_option("--config", check_path, "Engine config (JSON)")->required();

    std::vector<std::string> full{"promptqd"};
    full.insert(full.end(), args.begin(), args.end());
    auto argv = argv_of(full);
    try {
        app.parse(static_cast<int>(full.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run_cmd) {
            if (ro.config.empty() && ro.resume.empty()) {
                err << "config error: run needs --config or --resume\n";
                return kConfigError;
            }
            if (run_cmd->count("--seed")) ro.seed = seed;
            if (run_cmd->count("--backend")) ro.backend = backend;
            if (run_cmd->count("--budget")) ro.budget = budget;
            return run_command(ro, out, err);
        }

        if (*batch_cmd) {
            if (batch_cmd->count("--backend")) bo.backend = backend;
            if (batch_cmd->count("--budget")) bo.budget = budget;
            resolve_config(bo);
            const auto seed_list = parse_seeds(seeds);
            if (exe.empty()) exe = fs::read_symlink("/proc/self/exe").string();
            fs::create_directories(bo.out);

            std::vector<std::string> base{exe, "run", "--config", bo.config.string(), "--quiet"};
            if (bo.backend) base.insert(base.end(), {"--backend", *bo.backend});
            if (bo.budget) base.insert(base.end(), {"--budget", std::to_string(*bo.budget)});

            std::map<pid_t, std::uint64_t> running;
            std::map<std::uint64_t, int> codes;
            auto reap_one = [&] {
                const auto it = running.begin();
                codes[it->second] = wait_child(it->first);
                running.erase(it);
            };
            for (auto s : seed_list) {
                while (running.size() >= std::max<std::size_t>(jobs, 1)) reap_one();
                auto cmd = base;
                cmd.insert(cmd.end(), {"--seed", std::to_string(s), "--out",
                                       (bo.out / ("seed_" + std::to_string(s))).string()});
                auto child_argv = argv_of(cmd);
                pid_t pid = 0;
                if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, const_cast<char* const*>(child_argv.data()),
                                environ) != 0) {
                    err << "internal error: cannot start " << exe << '\n';
                    while (!running.empty()) reap_one();
                    return kInternalError;
                }
                running.emplace(pid, s);
            }
            while (!running.empty()) reap_one();

            int worst = kOk;
            for (auto [s, code] : codes) {
                if (!bo.quiet) out << "seed " << s << ": exit " << code << '\n';
                if (code != kOk && worst == kOk) worst = code;
            }
            return worst;
        }

        if (*inspect_cmd) {
            const Archive archive = import_archive(snapshot, embeddings);
            json result;
            if (cell)
                result = inspect_cell(archive, *cell);
            else if (top)
                result = inspect_top(archive, *top);
            else if (histogram)
                result = paradigm_histogram(archive);
            else
                result = archive_metrics(archive);
            out << result.dump(2) << '\n';
            return kOk;
        }

        if (*compare_cmd) {
            std::map<std::string, std::map<std::string, std::vector<double>>> samples;
            for (const auto& item : inputs) {
                const auto eq = item.find('=');
                const fs::path dir = eq == std::string::npos ? fs::path(item) : fs::path(item.substr(eq + 1));
                std::string name = eq == std::string::npos ? fs::path(item).lexically_normal().filename().string()
                                                           : item.substr(0, eq);
                if (name.empty()) name = dir.parent_path().filename().string();
                if (samples.count(name)) throw ConfigError("duplicate method name '" + name + "'");
                samples[name] = batch_metrics(dir);
            }
            const std::string text = compare_methods(samples, boot_seed).to_json().dump(2) + "\n";
            if (report_path.empty())
                out << text;
            else
                write_atomically(report_path, text);
            return kOk;
        }

        if (*dyn_cmd) {
            std::vector<RunLog> logs;
            for (const auto& dir : seed_dirs(dyn_dir)) logs.push_back(RunLog::read_csv(dir / "runlog.csv"));
            const std::string text = dynamics_csv(coverage_dynamics(logs));
            if (dyn_out.empty())
                out << text;
            else
                write_atomically(dyn_out, text);
            return kOk;
        }

        if (*validate_cmd) {
            RunOptions vo;
            vo.config = check_path;
            resolve_config(vo);
            out << "ok: " << check_path.string() << '\n';
            return kOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const LoadError& e) {
        err << "load error: " << e.what() << '\n';
        return kLoadError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
    return kUsage;
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace promptqd::cli
