#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "qmemnet/cli.hpp"

int main(int argc, char** argv) {
    using qmemnet::cli::Request;
    CLI::App app{"qmemnet: write, store and read pulses in passive linear quantum networks"};
    app.require_subcommand(1, 1);

    Request req;
    std::string out, frame, format, config;
    double step = 0.0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (QMEMNET_OUT takes precedence)");
        sub->add_option("--step", step, "integration step");
        sub->add_option("--frame", frame, "frame for per-mode columns")->check(CLI::IsMember({"node", "primed"}));
        sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
    };
    const std::pair<const char*, const char*> commands[] = {
        {"analyze", "poles, zeros and decoherence-free structure"},
        {"synthesize", "writing and reading pulses"},
        {"simulate", "input-output run and photon statistics"},
        {"protocol", "write, store and read; exit 1 below the fidelity threshold"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));
    CLI::App* rep = app.add_subcommand("reproduce", "regenerate reference data sets");
    rep->add_option("target", req.target, "fig5 | single-mode | early-switch | darkstate")
        ->required()
        ->check(CLI::IsMember({"fig5", "single-mode", "early-switch", "darkstate"}));
    add_common(rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : qmemnet::cli::exit_config;
    }

    req.command = app.get_subcommands().front()->get_name();
    const CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--config")) req.config_path = config;
    if (sub->count("--out")) req.out = out;
    if (sub->count("--step")) req.step = step;
    if (sub->count("--frame")) req.frame = frame;
    if (sub->count("--format")) req.format = format;
    return qmemnet::cli::run(req, std::cout, std::cerr);
}
