// artistic — chip-art embedding and gigapixel layout rendering.
//
// Usage: artistic <extract|art|merge|render|compose|pipeline> --config job.json
//                 [--jobs N] [--verbose]
//
// Exit codes: 0 success, 2 bad configuration, 3 layout parse failure,
//             4 file I/O failure, 5 other pipeline failure, 1 unexpected.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "artistic/pipeline.hpp"

namespace {

struct Command {
    const char* name;
    const char* help;
    artistic::pipeline::RunResult (*run)(const artistic::config::PipelineConfig&,
                                         const artistic::pipeline::Options&);
};

constexpr Command kCommands[] = {
    {"extract", "copy one layer of the input layout into a new library",
     artistic::pipeline::cmd_extract},
    {"art", "generate blockwork artwork from the logo and export it",
     artistic::pipeline::cmd_art},
    {"merge", "generate artwork and merge it into the input layout",
     artistic::pipeline::cmd_merge},
    {"render", "rasterize each styled layer into per-tile grayscale debug images",
     artistic::pipeline::cmd_render},
    {"compose", "render the styled layer stack into a stitched image (and PDF)",
     artistic::pipeline::cmd_compose},
    {"pipeline", "full chain: artwork, merge, render, compose, emit everything",
     artistic::pipeline::cmd_pipeline},
};

int run_command(const Command& cmd, const std::string& config_path, int jobs, bool verbose) {
    artistic::config::PipelineConfig cfg = artistic::config::load_config(config_path);
    artistic::pipeline::Options opt;
    opt.jobs = jobs;
    opt.verbose = verbose;
    artistic::pipeline::RunResult result = cmd.run(cfg, opt);
    for (const std::string& path : result.artifacts) std::cout << path << "\n";
    if (verbose)
        std::fprintf(stderr, "[artistic] done in %.3fs (%zu artifacts)\n", result.total_seconds(),
                     result.artifacts.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chip-art embedding and huge-layout rendering"};
    app.require_subcommand(1);

    std::string config_path;
    int jobs = 0;
    bool verbose = false;
    const Command* selected = nullptr;

    for (const Command& cmd : kCommands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("-c,--config", config_path, "job description (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("-j,--jobs", jobs, "worker threads (0 = all hardware threads)")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("-v,--verbose", verbose, "log per-stage timing to stderr");
        sub->callback([&selected, &cmd] { selected = &cmd; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        return run_command(*selected, config_path, jobs, verbose);
    } catch (const artistic::ConfigError& e) {
        std::cerr << "artistic: error: " << e.what() << "\n";
        return 2;
    } catch (const artistic::gds::ParseError& e) {
        std::cerr << "artistic: error: " << e.what() << "\n";
        return 3;
    } catch (const artistic::IoError& e) {
        std::cerr << "artistic: error: " << e.what() << "\n";
        return 4;
    } catch (const artistic::Error& e) {
        std::cerr << "artistic: error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "artistic: unexpected error: " << e.what() << "\n";
        return 1;
    }
}
