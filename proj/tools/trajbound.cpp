#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trajbound/trajbound.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kDiverged = 3, kIo = 4 };

int exit_code(trajbound::Errc code) {
    using trajbound::Errc;
    switch (code) {
    case Errc::config_error:
    case Errc::parse_error:
    case Errc::schema_error: return kConfig;
    case Errc::io_error: return kIo;
    case Errc::diverged: return kDiverged;
    default: return kFailure;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train small models with GD/SGD, track trajectory statistics and evaluate generalization bounds"};
    std::string experiment, config_path, out_dir, seeds;
    bool plots = false;
    app.add_option("experiment", experiment, "toy_table | track | assumption | sweep_noise | sweep_lr | eos")->required();
    app.add_option("--config", config_path, "key = value config file")->required();
    app.add_option("--out", out_dir, "output directory (overrides output_dir)");
    app.add_option("--seeds", seeds, "comma-separated seeds (overrides seeds)");
    app.add_flag("--plots", plots, "also write SVG line plots");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        auto cfg = trajbound::harness::parse_config(config_path, experiment);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (!seeds.empty()) {
            cfg.seeds = trajbound::harness::detail::ValueParser{0, "--seeds", seeds}.seeds();
            trajbound::harness::finalize_config(cfg);
        }
        const auto res = trajbound::harness::run_experiment(cfg, plots);
        for (const auto& f : res.files) std::printf("wrote %s\n", f.c_str());
        std::fputs(res.table.str().c_str(), stdout);
        return kOk;
    } catch (const trajbound::Error& e) {
        std::fprintf(stderr, "trajbound: %s\n", e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "trajbound: %s\n", e.what());
        return kFailure;
    }
}
