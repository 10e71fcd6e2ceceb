#include "boal/commands.hpp"
#include "boal/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

int main(int argc, char** argv) {
    CLI::App app{"Budgeted online active learning toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string out_dir;

    auto add = [&](const char* name, const char* help, bool parallel) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
        if (parallel)
            sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
        else
            sub->add_option("--jobs", jobs, "Ignored");
        return sub;
    };
    auto* bench = add("bench", "Generate the synthetic benchmark as CSV files", false);
    auto* run = add("run", "Run the evaluation protocol and report RMSE", true);
    auto* scores = add("scores", "Compare selected scores against the hindsight maximum", true);
    auto* serve = add("serve", "Start the season advisor service", false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? boal::kExitOk : boal::kExitConfig;
    }

    boal::RunConfig config;
    try {
        config = boal::load_config(config_path);
    } catch (const boal::Error& ex) {
        std::cerr << "configuration error: " << ex.what() << '\n';
        return boal::kExitConfig;
    }
    if (!out_dir.empty())
        config.output_dir = out_dir;

    if (bench->parsed())
        return boal::cmd_bench(config, std::cout, std::cerr);
    if (run->parsed())
        return boal::cmd_run(config, jobs, std::cout, std::cerr);
    if (scores->parsed())
        return boal::cmd_scores(config, jobs, std::cout, std::cerr);
    if (serve->parsed())
        return boal::cmd_serve(config, std::cout, std::cerr);
    return boal::kExitConfig;
}
