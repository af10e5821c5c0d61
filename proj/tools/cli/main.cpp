// nnwd: staged driver for the watchdog experiment.
//
// Exit codes: 0 success, 2 usage/configuration/lock/output-directory error,
// 3 stage run out of order, 4 bad input data or model file, or failed audit.

#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "nnwd/image.hpp"
#include "nnwd/model_io.hpp"
#include "stages.hpp"

#ifndef NNWD_VERSION
#define NNWD_VERSION "unknown"
#endif

namespace {

enum Exit : int { kOk = 0, kUsage = 2, kOrder = 3, kData = 4 };

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

nnwd::cli::StageContext context(const Options& opt) {
    nnwd::cli::ExperimentConfig config =
        opt.config.empty() ? nnwd::cli::parse_config("") : nnwd::cli::load_config(opt.config);
    if (opt.seed) config.seed = *opt.seed;
    if (!opt.out.empty()) config.out = opt.out;
    const std::filesystem::path out = config.out;
    return {std::move(config), out, opt.quiet};
}

int run_stages(const Options& opt, const std::vector<std::string>& stages) {
    const auto ctx = context(opt);
    nnwd::cli::OutputLock lock(ctx.out);
    for (const auto& s : stages) nnwd::cli::run_stage(s, ctx);
    return kOk;
}

int guarded(const std::function<int()>& body) {
    using namespace nnwd;
    try {
        return body();
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const cli::LockError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const cli::MissingStageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOrder;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: output directory: " << e.what() << "\n";
        return kUsage;
    } catch (const ImageFormatError& e) {
        std::cerr << "image error: " << e.what() << "\n";
        return kData;
    } catch (const DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kData;
    } catch (const ModelFileError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reconstruction-gated classifier pipeline"};
    app.set_version_flag("--version", NNWD_VERSION);
    app.require_subcommand(1);

    Options opt;
    app.add_option("--config", opt.config, "INI experiment configuration")->check(CLI::ExistingFile);
    app.add_option("--out", opt.out, "Output directory (overrides experiment.out)");
    app.add_option("--seed", opt.seed, "Experiment seed (overrides experiment.seed)");
    app.add_flag("--quiet", opt.quiet, "Suppress progress on stderr");

    std::string selected;
    for (const auto& name : nnwd::cli::stage_names()) {
        app.add_subcommand(name, "Run the " + name + " stage")->callback([&selected, name] { selected = name; });
    }
    app.add_subcommand("all", "Run every stage in order")->callback([&selected] { selected = "all"; });

    nnwd::cli::ScoreRequest score;
    std::string image;
    auto* score_cmd = app.add_subcommand("score", "Print the pipeline verdict for one image as JSON");
    score_cmd->add_option("image", image, "PGM/PPM image")->required();
    auto opt_path = [&](const char* flag, std::optional<std::filesystem::path>& target, const char* what) {
        score_cmd->add_option_function<std::string>(flag, [&target](const std::string& p) { target = p; }, what);
    };
    opt_path("--autoencoder", score.autoencoder, "Autoencoder model file");
    opt_path("--binary", score.binary, "Binary classifier model file");
    opt_path("--core", score.core, "Core classifier model file");
    score_cmd->callback([&selected] { selected = "score"; });

    app.add_subcommand("audit", "Re-verify the checksums in the run manifest")->callback([&selected] { selected = "audit"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (selected == "score") {
        return guarded([&] {
            score.image = image;
            std::cout << nnwd::cli::score_image(context(opt), score) << "\n";
            return kOk;
        });
    }
    if (selected == "audit") {
        return guarded([&] {
            const auto problems = nnwd::cli::audit(context(opt));
            for (const auto& p : problems) std::cerr << "audit: " << p << "\n";
            if (!opt.quiet && problems.empty()) std::cerr << "audit: all artifacts match\n";
            return problems.empty() ? kOk : kData;
        });
    }
    return guarded([&] {
        return run_stages(opt, selected == "all" ? nnwd::cli::stage_names() : std::vector<std::string>{selected});
    });
}
