// Generates the synthetic benchmark suites (images, mock scenes, JSONL)
// used by the acceptance tests and handy for trying out the CLI.
#include <CLI11.hpp>

#include <iostream>

#include "dc2/error.hpp"
#include "dc2/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate synthetic DC2 benchmark fixtures"};
    std::string out_dir = "fixtures";
    std::string suite = "hr";
    int samples = 30;
    unsigned seed = 7;
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--suite", suite, "Suite kind: hr or sweep");
    app.add_option("--samples", samples, "Number of samples");
    app.add_option("--seed", seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        dc2::SyntheticSuite s;
        if (suite == "hr") {
            s = dc2::make_hr_suite(samples, seed);
        } else if (suite == "sweep") {
            s = dc2::make_sweep_suite(samples, seed);
        } else {
            std::cerr << "error: unknown suite '" << suite << "'\n";
            return 1;
        }
        const dc2::SuitePaths paths = dc2::write_suite(s, out_dir);
        std::cout << "dataset: " << paths.dataset << "\n"
                  << "scenes:  " << paths.scenes << "\n"
                  << "images:  " << paths.images_dir << "\n";
    } catch (const dc2::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }
    return 0;
}
