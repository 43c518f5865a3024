// Command-line front end: gexpect --config <path> [--seed N] [--out DIR] [--threads N]

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gexpect/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Solve g-expectation experiments described by a JSON config"};
    gexpect::cli::RunOptions opts;
    std::uint64_t seed = 0;
    std::string out;
    unsigned threads = 0;

    app.add_option("--config", opts.config_path, "experiment config (JSON)")->required();
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    auto* out_opt = app.add_option("--out", out, "output directory (overrides the config)");
    auto* threads_opt =
        app.add_option("--threads", threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : gexpect::cli::invalid;
    }
    if (*seed_opt) opts.seed = seed;
    if (*out_opt) opts.out_dir = out;
    if (*threads_opt) opts.threads = threads;
    return gexpect::cli::run(opts, std::cout);
}
