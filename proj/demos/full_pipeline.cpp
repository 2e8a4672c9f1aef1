// Writes the bundled demo chip into a directory and runs the whole pipeline
// on it through the library API: artwork generation, merge, tiling, render,
// compose, PDF.  Equivalent to `artistic_mkdemo d && artistic pipeline -c
// d/artistic.json -v`, but from code.
//
//   full_pipeline [dir]

#include <exception>
#include <filesystem>
#include <iostream>

#include "artistic/pipeline.hpp"
#include "demo_data.hpp"

int main(int argc, char** argv) {
    std::filesystem::path dir = argc > 1 ? argv[1] : "full_pipeline_out";
    try {
        std::filesystem::path cfg_path = artistic::demo::write_demo(dir);
        artistic::config::PipelineConfig cfg = artistic::config::load_config(cfg_path.string());

        artistic::pipeline::Options opt;
        opt.verbose = true;
        artistic::pipeline::RunResult result = artistic::pipeline::cmd_pipeline(cfg, opt);

        for (const std::string& artifact : result.artifacts) std::cout << artifact << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "full_pipeline: error: " << e.what() << "\n";
        return 1;
    }
}
