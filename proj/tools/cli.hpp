#ifndef PROMPTQD_TOOLS_CLI_HPP
#define PROMPTQD_TOOLS_CLI_HPP

#include "promptqd/archive.hpp"
#include "promptqd/engine.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace promptqd::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kConfigError = 2,
    kBackendError = 3,
    kInternalError = 4,
    kLoadError = 5,
};

int main(int argc, char** argv);
/// Same as main() with explicit streams; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct RunOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out;
    std::optional<std::string> backend;
    std::optional<std::size_t> budget;
    std::filesystem::path resume;
    bool quiet = false;
};

/// Config file plus command-line overrides, validated.
EngineConfig resolve_config(const RunOptions& options);

int run_command(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Final outputs, each written as NAME.partial and renamed when complete.
void write_outputs(const Engine& engine, const std::filesystem::path& dir, bool finalize);

nlohmann::json inspect_cell(const Archive& archive, std::size_t cell);
nlohmann::json inspect_top(const Archive& archive, std::size_t k);
/// Occupied-cell counts and fractions per paradigm. Code archives use the
/// one-hot descriptor; other archives classify the elite text.
nlohmann::json paradigm_histogram(const Archive& archive);

/// seed_<k> subdirectories of a batch directory, ordered by k.
std::vector<std::filesystem::path> seed_dirs(const std::filesystem::path& batch_dir);

/// Metric samples of every seed in a batch directory, keyed by metric name.
std::map<std::string, std::vector<double>> batch_metrics(const std::filesystem::path& batch_dir);

}  // namespace promptqd::cli

#endif
