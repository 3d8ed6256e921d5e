#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "perciso/cli_harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Percolation isoperimetry laboratory"};
    app.set_version_flag("--version", perciso::kArtifactVersion);
    app.require_subcommand(1);

    perciso::Invocation inv;
    std::uint64_t seed = 0;
    int threads = 0;
    for (const auto& name : perciso::subcommands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", inv.config_path, "config file (key = value, [sections])")->check(CLI::ExistingFile);
        sub->add_option("--out", inv.out_root, "output root (default: $PERCISO_OUT, then ./perciso_out)");
        sub->add_option("--seed", seed, "master seed, overrides the config");
        sub->add_option("--threads", threads, "worker threads, overrides the config")->check(CLI::Range(1, 4096));
        sub->callback([&, sub, name] {
            inv.kind = name;
            if (sub->count("--seed")) inv.seed = seed;
            if (sub->count("--threads")) inv.threads = threads;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : perciso::kExitConfig;
    }
    perciso::RunResult r = perciso::execute(inv);
    if (r.exit_code == 0) {
        std::fprintf(stderr, "%s: %s\n", inv.kind.c_str(), r.message.c_str());
        for (const auto& f : r.files) std::printf("%s\n", f.name.c_str());
    } else {
        std::fprintf(stderr, "%s failed (exit %d): %s\n", inv.kind.c_str(), r.exit_code, r.message.c_str());
    }
    return r.exit_code;
}
