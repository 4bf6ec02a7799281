#include "hjblab/experiments.hpp"
#include "hjblab/io_util.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

namespace {

std::string resolve_out(const std::string& cli_out) {
    if (!cli_out.empty()) return cli_out;
    const char* env = std::getenv("HJBLAB_OUT");
    return env ? env : "";
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out) {
    std::string text;
    hjb::ConfigTable root;
    try {
        text = hjb::read_text_file(config_path);
        root = hjb::parse_config(text);
        for (const auto& kv : overrides) hjb::apply_override(root, kv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    hjb::ExperimentSetup setup;
    try {
        setup = hjb::load_setup(root, text, resolve_out(out));
    } catch (const hjb::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    const hjb::RunManifest manifest = hjb::run_experiments(setup);
    for (const auto& exp : manifest.experiments)
        std::printf("[%s] %s: %s\n", exp.passed ? "pass" : "FAIL", exp.kind.c_str(),
                    exp.detail.c_str());
    std::printf("manifest: %s/manifest.json\n", setup.out_root.c_str());
    return manifest.all_passed() ? 0 : 1;
}

int cmd_plotdata(const std::string& manifest_path, const std::string& target) {
    try {
        hjb::emit_plotdata(manifest_path, target.empty() ? "plotdata" : target);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "plotdata error: %s\n", e.what());
        return 1;
    }
    return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& out) {
    hjb::ConfigTable root;
    try {
        root = hjb::parse_config(hjb::read_text_file(config_path));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    try {
        const hjb::CalibrationReport rep = hjb::run_calibration(root, resolve_out(out));
        std::printf("calibrated C0 = %.6g (raw %.6g), T0 = %.6g (raw %.6g)\n", rep.C0, rep.C0_raw,
                    rep.T0, rep.T0_raw);
    } catch (const hjb::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "calibration failed: %s\n", e.what());
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hjblab: half-eigenvalues and exact multiplicity for discrete HJB Dirichlet "
                 "problems"};
    app.require_subcommand(1);

    std::string config_path, manifest_path, out, target;
    std::vector<std::string> overrides;

    CLI::App* run = app.add_subcommand("run", "run the experiment(s) described by a config file");
    run->add_option("config", config_path, "TOML-compatible config file")->required();
    run->add_option("--set", overrides, "override a config value, e.g. --set solver.tol=1e-9");
    run->add_option("--out", out, "output root (overrides HJBLAB_OUT and the config)");

    CLI::App* plot = app.add_subcommand("plotdata", "reshape a run's outputs for plotting");
    plot->add_option("manifest", manifest_path, "manifest.json from a previous run")->required();
    plot->add_option("--target", target, "target directory (default ./plotdata)");

    CLI::App* cal = app.add_subcommand("calibrate", "measure the suite constants C0 and T0");
    cal->add_option("config", config_path, "calibration suite config")->required();
    cal->add_option("--out", out, "output root");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, overrides, out);
        if (plot->parsed()) return cmd_plotdata(manifest_path, target);
        if (cal->parsed()) return cmd_calibrate(config_path, out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
