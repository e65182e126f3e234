#include "trajpred/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "trajpred/error.hpp"
#include "trajpred/trajectory_csv.hpp"

namespace trajpred::cli {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    if (trim(text).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.emplace_back(trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value, std::string_view expected) {
    fail(ErrorCode::InvalidArgument,
         "config key '" + key + "' = '" + std::string(value) + "' is not " + std::string(expected));
}

double parse_double(const std::string& key, std::string_view text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) bad_value(key, text, "a number");
    return v;
}

std::uint64_t parse_u64(const std::string& key, std::string_view text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) bad_value(key, text, "a non-negative integer");
    return v;
}

template <class T, class F>
std::string join(const std::vector<T>& values, F&& format) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format(values[i]);
    }
    return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key.empty()) fail(ErrorCode::InvalidArgument, "empty config key");
    values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.contains(key); }

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    resolved_[key] = v;
    return v;
}

std::string RunConfig::require_string(const std::string& key) {
    if (!has(key)) fail(ErrorCode::InvalidArgument, "missing required setting '" + key + "'");
    return get_string(key, "");
}

double RunConfig::get_double(const std::string& key, double fallback) {
    const auto it = values_.find(key);
    const double v = it == values_.end() ? fallback : parse_double(key, trim(it->second));
    resolved_[key] = format_double(v);
    return v;
}

std::size_t RunConfig::get_size(const std::string& key, std::size_t fallback) {
    const auto it = values_.find(key);
    const std::size_t v = it == values_.end() ? fallback : static_cast<std::size_t>(parse_u64(key, trim(it->second)));
    resolved_[key] = std::to_string(v);
    return v;
}

std::uint64_t RunConfig::require_u64(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::InvalidArgument, "missing required setting '" + key + "'");
    const std::uint64_t v = parse_u64(key, trim(it->second));
    resolved_[key] = std::to_string(v);
    return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) {
    bool v = fallback;
    if (const auto it = values_.find(key); it != values_.end()) {
        const std::string_view t = trim(it->second);
        if (t == "true" || t == "1")
            v = true;
        else if (t == "false" || t == "0")
            v = false;
        else
            bad_value(key, t, "true or false");
    }
    resolved_[key] = v ? "true" : "false";
    return v;
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) {
    std::vector<double> v = fallback;
    if (const auto it = values_.find(key); it != values_.end()) {
        v.clear();
        for (const std::string& item : split_list(it->second)) v.push_back(parse_double(key, item));
    }
    resolved_[key] = join(v, [](double d) { return format_double(d); });
    return v;
}

std::vector<std::size_t> RunConfig::get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) {
    std::vector<std::size_t> v = fallback;
    if (const auto it = values_.find(key); it != values_.end()) {
        v.clear();
        for (const std::string& item : split_list(it->second)) v.push_back(static_cast<std::size_t>(parse_u64(key, item)));
    }
    resolved_[key] = join(v, [](std::size_t n) { return std::to_string(n); });
    return v;
}

std::vector<std::string> RunConfig::get_strings(const std::string& key, const std::vector<std::string>& fallback) {
    std::vector<std::string> v = fallback;
    if (const auto it = values_.find(key); it != values_.end()) v = split_list(it->second);
    resolved_[key] = join(v, [](const std::string& s) { return s; });
    return v;
}

void RunConfig::reject_unknown(std::span<const std::string_view> known) const {
    for (const auto& [key, value] : values_)
        if (std::find(known.begin(), known.end(), key) == known.end())
            fail(ErrorCode::InvalidArgument, "unknown setting '" + key + "'");
}

void load_config_text(RunConfig& cfg, std::string_view text, const std::string& source) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string key(trim(body.substr(0, eq == std::string_view::npos ? 0 : eq)));
        if (eq == std::string_view::npos || key.empty())
            fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": expected key = value");
        cfg.set(key, std::string(trim(body.substr(eq + 1))));
    }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    load_config_text(cfg, text.str(), path.string());
}

void write_run_manifest(const std::filesystem::path& path, std::string_view subcommand, const RunConfig& cfg,
                        const std::map<std::string, std::string>& extra) {
    nlohmann::ordered_json j;
    j["subcommand"] = std::string(subcommand);
    j["config"] = nlohmann::ordered_json::object();
    for (const auto& [key, value] : cfg.resolved()) j["config"][key] = value;
    for (const auto& [key, value] : extra) j[key] = value;
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace trajpred::cli
