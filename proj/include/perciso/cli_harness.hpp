#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace perciso {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Flat key=value text with [section] headers. Keys before the first header are global;
// a subcommand reads its own section first, then the globals.
class ExperimentConfig {
public:
    static ExperimentConfig parse(const std::string& text, const std::string& kind);
    static ExperimentConfig load(const std::string& path, const std::string& kind);

    const std::string& kind() const { return kind_; }
    bool has(const std::string& key) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    std::string required_text(const std::string& key) const;
    double real(const std::string& key, double fallback) const;
    double required_real(const std::string& key) const;
    std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::int64_t> integers(const std::string& key, const std::vector<std::int64_t>& fallback) const;

    void set(const std::string& key, const std::string& value);  // global override
    // FNV-1a over the effective settings, excluding seed, threads and out
    std::uint64_t hash() const;
    std::string hash_hex() const;

    std::uint64_t seed() const;
    int threads() const;

private:
    std::string kind_;
    std::map<std::string, std::string> global_;
    std::map<std::string, std::string> section_;
    std::optional<std::string> lookup(const std::string& key) const;
};

struct OutputFile {
    std::string name;
    std::string content;
};

struct RunResult {
    int exit_code = 0;
    std::string message;
    std::vector<OutputFile> files;
};

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitUnsuitable = 3;
inline constexpr int kExitAllFailed = 4;

const std::vector<std::string>& subcommands();

// Pure runners: nothing touches the disk except reading input tables.
RunResult run_sample(const ExperimentConfig& cfg);
RunResult run_beta(const ExperimentConfig& cfg);
RunResult run_wulff(const ExperimentConfig& cfg);
RunResult run_cheeger(const ExperimentConfig& cfg);
RunResult run_coarse(const ExperimentConfig& cfg);
// table_root: directory searched for beta/beta.csv when the config has no `table` key
RunResult run_converge(const ExperimentConfig& cfg, const std::string& table_root = "");

struct Invocation {
    std::string kind;
    std::string config_path;
    std::string out_root;  // empty: PERCISO_OUT, then ./perciso_out
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

std::string resolve_out_root(const std::string& flag, const ExperimentConfig& cfg);

// Parses, runs and writes <out_root>/<kind>/. Config errors leave no files behind.
RunResult execute(const Invocation& inv);

}  // namespace perciso
