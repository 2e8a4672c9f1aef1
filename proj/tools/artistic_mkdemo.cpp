// artistic_mkdemo — writes the bundled demo chip, logo and job file into a
// directory so the CLI can be tried end to end:
//
//   artistic_mkdemo demo/ && artistic pipeline --config demo/artistic.json

#include <exception>
#include <filesystem>
#include <iostream>

#include "demo_data.hpp"

int main(int argc, char** argv) {
    std::filesystem::path dir = argc > 1 ? argv[1] : "demo";
    try {
        std::filesystem::path cfg = artistic::demo::write_demo(dir);
        std::cout << cfg.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "artistic_mkdemo: error: " << e.what() << "\n";
        return 1;
    }
}
