// trajpred: synth, train, predict, evaluate and bench from the command line.
//
// Settings come from an optional key=value file (--config), then from
// repeatable --set key=value pairs, then from the per-setting flags
// (--out-dir, --input-horizon, ...). Later sources override earlier ones.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trajpred/cli/commands.hpp"
#include "trajpred/cli/config.hpp"
#include "trajpred/error.hpp"

namespace {

struct SubcommandArgs {
    std::string config_path;
    std::vector<std::string> sets;
    // flag values per setting key; repeated flags are joined as a comma list
    std::map<std::string, std::vector<std::string>> flags;
};

std::string flag_name(std::string_view key) {
    std::string name = "--";
    for (const char c : key) name += c == '_' ? '-' : c;
    return name;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
    return out;
}

void add_settings(CLI::App* sub, SubcommandArgs& args) {
    sub->add_option("--config", args.config_path, "key = value settings file")->check(CLI::ExistingFile);
    sub->add_option("--set", args.sets, "override a setting, key=value (repeatable)");
    for (const std::string_view key : trajpred::cli::known_settings())
        sub->add_option(flag_name(key), args.flags[std::string(key)])->group("Settings");
}

trajpred::cli::RunConfig collect(const SubcommandArgs& args) {
    trajpred::cli::RunConfig cfg;
    if (!args.config_path.empty()) trajpred::cli::load_config_file(cfg, args.config_path);
    for (const std::string& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            trajpred::fail(trajpred::ErrorCode::InvalidArgument, "--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, values] : args.flags)
        if (!values.empty()) cfg.set(key, join(values));
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic trajectory forecasting with calibrated confidence sets"};
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "generate a synthetic track set"},
        {"train", "fit a forecaster and write a checkpoint"},
        {"predict", "export mixtures and confidence-set contours for input tracks"},
        {"evaluate", "score a checkpoint on a data split"},
        {"bench", "time batched inference and confidence post-processing"},
    };
    std::map<std::string, SubcommandArgs> args;
    for (const auto& [name, help] : commands) add_settings(app.add_subcommand(name, help), args[name]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? trajpred::cli::kExitOk : trajpred::cli::kExitUsage;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    trajpred::cli::RunConfig cfg;
    try {
        cfg = collect(args[name]);
    } catch (const std::exception& e) {
        std::cerr << "trajpred " << name << ": " << e.what() << '\n';
        return trajpred::cli::kExitUsage;
    }
    return trajpred::cli::run_command(name, cfg, std::cout, std::cerr);
}
