// Command-line front end: controller synthesis and verification for scalar
// integral delay equations with pointwise and distributed delays.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>

#include "idec/cli.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "JSON run configuration")->required();
    cmd->add_option("-o,--out", args.out_dir, "output directory for CSV files");
}

int dispatch(const std::string& name, const CommonArgs& args, const idec::SubcommandOptions& opt) {
    try {
        const idec::RunConfig cfg = idec::load_config(args.config_path);
        return idec::run_subcommand(name, cfg, args.out_dir, opt);
    } catch (const idec::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const idec::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const idec::IoError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feedback-kernel synthesis and verification for integral delay equations"};
    app.require_subcommand(1);

    CommonArgs args;
    idec::SubcommandOptions opt;

    CLI::App* check = app.add_subcommand("check", "validate the model and check spectral controllability");
    add_common(check, args);

    CLI::App* kernels = app.add_subcommand("kernels", "solve for the feedback kernels f and g");
    add_common(kernels, args);
    std::string method;
    double tol = 0.0;
    int maxiter = 0;
    auto* method_opt = kernels->add_option("--method", method, "direct | iterative");
    auto* tol_opt = kernels->add_option("--tol", tol, "iteration stopping tolerance");
    auto* maxiter_opt = kernels->add_option("--maxiter", maxiter, "iteration cap");

    CLI::App* simulate = app.add_subcommand("simulate", "march the plant in time");
    add_common(simulate, args);
    simulate->add_option("--mode", opt.mode, "open | closed | both")
        ->check(CLI::IsMember({"open", "closed", "both"}));

    CLI::App* spectrum = app.add_subcommand("spectrum", "locate characteristic roots in the configured region");
    add_common(spectrum, args);

    CLI::App* verify = app.add_subcommand("verify", "full synthesis with residual, spectral and decay checks");
    add_common(verify, args);

    CLI11_PARSE(app, argc, argv);

    if (*method_opt) opt.method = method;
    if (*tol_opt) opt.tol = tol;
    if (*maxiter_opt) opt.maxiter = maxiter;

    const CLI::App* active = app.get_subcommands().front();
    return dispatch(active->get_name(), args, opt);
}
