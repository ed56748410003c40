#include <iostream>

#include <CLI11.hpp>

#include "taap/cli.hpp"
#include "taap/errors.hpp"

using namespace taap;

int main(int argc, char** argv) {
    CLI::App app{"taap-ring: time-averaged adiabatic ring trap toolkit"};
    app.require_subcommand(1);
    std::string config, out_dir, item;
    std::uint64_t seed = 0;
    bool quiet = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "scenario JSON file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "random seed (overrides the scenario)");
        sub->add_option("--out-dir", out_dir, "output directory (overrides the scenario)");
        sub->add_flag("--quiet", quiet, "suppress progress output");
    };
    auto* ch = app.add_subcommand("characterize", "trap frequencies, ring radius and azimuthal profile");
    auto* tr = app.add_subcommand("transport", "integrate a transport schedule and fit the trace");
    auto* im = app.add_subcommand("image-fit", "sample, render and fit a ring image");
    auto* rp = app.add_subcommand("reproduce", "compare computed values with the published ones");
    for (auto* s : {ch, tr, im, rp}) add_common(s);
    rp->add_option("item", item, "freq-table|centrifugal|mach|corrugation|flatness-static|flatness-moving|bangbang|tof|all")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::ok : cli::config_error;
    }

    try {
        cli::Scenario s = config.empty() ? cli::default_scenario() : cli::load_scenario(config);
        if (app.get_subcommands().front()->count("--seed")) {
            s.seed = seed;
            if (s.ensemble) s.ensemble->seed = seed;
        }
        if (!out_dir.empty()) s.out_dir = out_dir;
        const cli::RunContext ctx{quiet, &std::cout};
        if (ch->parsed()) return cli::cmd_characterize(s, ctx);
        if (tr->parsed()) return cli::cmd_transport(s, ctx);
        if (im->parsed()) return cli::cmd_image_fit(s, ctx);
        return cli::cmd_reproduce(item, s, ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::runtime_error;
    }
}
