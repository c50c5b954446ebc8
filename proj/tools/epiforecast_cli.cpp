// epiforecast: ingest, run and report subcommands.

#include "epiforecast/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

struct Flags {
    std::optional<std::string> config;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common(CLI::App* cmd, Flags& flags, bool with_models) {
    auto bind = [&flags](const char* key) {
        return [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); };
    };
    cmd->add_option_function<std::string>("--config", [&flags](const std::string& v) { flags.config = v; },
                                          "key = value configuration file");
    cmd->add_option_function<std::string>("--input", bind("input"), "cases CSV");
    cmd->add_option_function<std::string>("--layout", bind("layout"), "long or wide");
    cmd->add_option_function<std::string>("--out", bind("out"), "output directory");
    cmd->add_option_function<std::string>("--regions", bind("regions"),
                                          "';'-separated \"Country\" or \"Country/Province\" names");
    if (with_models) {
        cmd->add_option_function<std::string>("--models", bind("models"), "comma list of dspm,nrm,svr");
        cmd->add_option_function<std::string>("--horizon", bind("horizon"), "held-out days");
        cmd->add_option_function<std::string>("--lookback", bind("lookback"), "DSPM window length");
        cmd->add_option_function<std::string>("--seed", bind("seed"), "random seed");
        cmd->add_option_function<std::string>("--workers", bind("workers"), "regions trained in parallel");
    }
}

epi::pipeline::RunConfig resolve(const Flags& flags) {
    epi::pipeline::RunConfig cfg;
    if (flags.config) epi::pipeline::load_config_file(cfg, *flags.config);
    for (const auto& [k, v] : flags.overrides) epi::pipeline::apply_setting(cfg, k, v);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Epidemic case forecasting: DSPM, NRM and SVR baseline"};
    app.set_version_flag("--version", epi::kVersion);
    app.require_subcommand(1);

    Flags ingest_flags, run_flags, report_flags;
    auto* ingest = app.add_subcommand("ingest", "parse and summarize a cases CSV");
    add_common(ingest, ingest_flags, false);
    auto* run = app.add_subcommand("run", "train, forecast and evaluate every region");
    add_common(run, run_flags, true);
    auto* report = app.add_subcommand("report", "rebuild the summary table from saved forecasts");
    add_common(report, report_flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (ingest->parsed()) {
            epi::pipeline::cmd_ingest(resolve(ingest_flags), std::cout);
        } else if (run->parsed()) {
            const auto result = epi::pipeline::cmd_run(resolve(run_flags), std::cout);
            if (result.all_failed) {
                std::cerr << "error: every region failed to train\n";
                return 3;
            }
        } else {
            epi::pipeline::cmd_report(resolve(report_flags), std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return epi::pipeline::exit_code_for(e);
    }
    return 0;
}
