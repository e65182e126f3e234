#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trajpred::cli {

/// Flat key=value settings of one run. Later set() calls override earlier
/// ones, so a config file is loaded first and command-line flags applied on
/// top. Every key read through a getter is recorded together with the value
/// actually used (defaults included) for the run manifest.
class RunConfig {
public:
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback);
    std::string require_string(const std::string& key);
    double get_double(const std::string& key, double fallback);
    std::size_t get_size(const std::string& key, std::size_t fallback);
    std::uint64_t require_u64(const std::string& key);
    bool get_bool(const std::string& key, bool fallback);
    // comma-separated lists
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);
    std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback);
    std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback);

    /// Throws InvalidArgument naming the first set key that is not in `known`.
    void reject_unknown(std::span<const std::string_view> known) const;

    const std::map<std::string, std::string>& resolved() const { return resolved_; }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> resolved_;
};

/// "key = value" lines; '#' starts a comment, blank lines are skipped.
/// Throws ParseError with "<source>:<line>" for anything else.
void load_config_text(RunConfig& cfg, std::string_view text, const std::string& source = "<config>");
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Writes the subcommand and the resolved settings as JSON, keys sorted.
void write_run_manifest(const std::filesystem::path& path, std::string_view subcommand, const RunConfig& cfg,
                        const std::map<std::string, std::string>& extra = {});

}  // namespace trajpred::cli
