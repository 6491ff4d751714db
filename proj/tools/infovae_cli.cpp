// infovae: train, sample, diagnose, tabular oracle and named scenarios.
//
// Exit codes: 0 success, 1 oracle violations, 2 usage or configuration error,
// 3 numerical abort in a run that does not expect one.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "infovae/harness/experiment.hpp"
#include "infovae/harness/scenarios.hpp"
#include "infovae/infovae.hpp"

namespace fs = std::filesystem;
using namespace infovae;
using namespace infovae::harness;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
};

RunConfig load_with_overrides(const Common& c) {
    if (c.config.empty()) throw ConfigError("--config is required");
    RunConfig cfg = load_run_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (!c.format.empty()) cfg.format = c.format;
    cfg.validate();
    return cfg;
}

int cmd_train(const Common& c) {
    const RunConfig cfg = load_with_overrides(c);
    const RunResult r = run_experiment(cfg, {true, &std::cerr});
    std::cout << "run " << cfg.name << ": " << r.steps_completed << " steps, output in " << cfg.out_dir << '\n';
    if (r.pathology) std::cout << "pathology flag set: " << r.message << '\n';
    return r.exit_status;
}

struct SampleArgs {
    std::string method = "ancestral";
    std::size_t n = 100;
    std::size_t burn_in = 500;
    std::size_t thin = 5;
    std::string checkpoint;
};

int cmd_sample(const Common& c, const SampleArgs& s) {
    const RunConfig cfg = load_with_overrides(c);
    const fs::path ckpt = s.checkpoint.empty() ? fs::path(cfg.out_dir) / "checkpoint.json" : fs::path(s.checkpoint);
    const ModelPair model = load_checkpoint(ckpt);
    const Dataset data = build_dataset(cfg.data);
    if (data.dim() != model.data_dim()) throw ConfigError("checkpoint data_dim differs from the configured dataset");
    std::ostringstream os;
    Tensor x;
    std::vector<std::size_t> steps;
    if (s.method == "ancestral") {
        Rng rng = make_rng(cfg.seed, 0x636c6953ULL);
        x = ancestral_sample(model, s.n, rng);
    } else {
        auto chain = markov_chain_sample(model, data.x.values().subspan(0, data.dim()), s.burn_in, s.thin, s.n, cfg.seed);
        x = std::move(chain.x);
        steps = std::move(chain.steps);
    }
    write_samples_csv(os, x, "x", steps.empty() ? nullptr : &steps);
    const std::string text = os.str();
    if (c.out.empty() || c.out == "-")
        std::cout << text;
    else {
        std::ofstream f(c.out);
        if (!f) throw ConfigError("cannot write " + c.out);
        f << text;
    }
    return kExitOk;
}

int cmd_diagnose(const Common& c, const std::string& checkpoint) {
    Common base = c;
    base.out.clear();
    const RunConfig cfg = load_with_overrides(base);
    const fs::path ckpt = checkpoint.empty() ? fs::path(cfg.out_dir) / "checkpoint.json" : fs::path(checkpoint);
    const std::ifstream probe(ckpt);
    if (!probe) throw ConfigError("checkpoint not found: " + ckpt.string());
    const auto j = nlohmann::json::parse(read_file(ckpt));
    const ModelPair model = checkpoint_from_json(j);
    const Dataset data = build_dataset(cfg.data);
    if (data.dim() != model.data_dim()) throw ConfigError("checkpoint data_dim differs from the configured dataset");
    const KernelSpec kernel = default_kernel(model.latent_dim());
    const MetricsRecord rec = evaluate_metrics(model, data, cfg.eval, j.at("step").get<std::size_t>(), cfg.seed, kernel);
    std::ostringstream os;
    if (cfg.format == "json")
        write_metrics_json(os, {rec});
    else
        write_metrics_csv(os, {rec});
    if (c.out.empty() || c.out == "-")
        std::cout << os.str();
    else {
        std::ofstream f(c.out);
        if (!f) throw ConfigError("cannot write " + c.out);
        f << os.str();
    }
    return kExitOk;
}

int cmd_oracle(std::size_t corpus_size, double tol, std::uint64_t seed, const std::string& format) {
    if (corpus_size == 0) throw ConfigError("--corpus-size must be positive");
    const auto reports = tabular::run_identity_corpus(corpus_size, seed);
    std::size_t violations = 0;
    if (format == "json") {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : reports) {
            out.push_back({{"identity", r.identity}, {"max_abs_deviation", r.max_abs_deviation}, {"corpus_size", r.corpus_size}});
            violations += !(r.max_abs_deviation < tol);
        }
        std::cout << nlohmann::json{{"reports", out}, {"tolerance", tol}, {"violations", violations}}.dump(2) << '\n';
    } else {
        std::cout.precision(6);
        std::cout << "identity,max_abs_deviation,corpus_size\n";
        for (const auto& r : reports) {
            std::cout << r.identity << ',' << std::scientific << r.max_abs_deviation << std::defaultfloat << ',' << r.corpus_size << '\n';
            violations += !(r.max_abs_deviation < tol);
        }
        std::cerr << violations << " violations at tolerance " << tol << '\n';
    }
    return violations == 0 ? kExitOk : 1;
}

int cmd_scenarios_list() {
    for (const auto& s : scenarios()) std::cout << s.name << "\t" << s.description << '\n';
    return kExitOk;
}

int cmd_scenarios_run(const std::string& name, std::uint64_t seed, const std::string& out) {
    const Scenario& s = find_scenario(name);
    int status = kExitOk;
    for (const RunConfig& cfg : s.runs(seed, out.empty() ? "runs/" + name : out)) {
        const RunResult r = run_experiment(cfg, {true, &std::cerr});
        std::cout << cfg.name << ": " << r.steps_completed << " steps, exit " << r.exit_status
                  << (r.pathology ? ", pathology flag set" : "") << ", output in " << cfg.out_dir << '\n';
        if (!r.records.empty())
            for (const auto& [k, v] : r.records.back().values) std::cout << "  " << k << " = " << v << '\n';
        if (r.exit_status != kExitOk) status = r.exit_status;
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"InfoVAE objectives, estimators and exact finite-space oracle"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "run configuration file");
        sub->add_option("--seed", common.seed, "override the master seed");
        sub->add_option("--out", common.out, "output directory (train) or file (sample, diagnose)");
        sub->add_option("--format", common.format, "metrics format")->check(CLI::IsMember({"csv", "json"}));
    };

    auto* train = app.add_subcommand("train", "train a model from a configuration file");
    add_common(train);

    SampleArgs sargs;
    auto* sample = app.add_subcommand("sample", "draw samples from a trained checkpoint");
    add_common(sample);
    sample->add_option("--method", sargs.method, "sampler")->check(CLI::IsMember({"ancestral", "chain"}));
    sample->add_option("--n", sargs.n, "number of samples")->check(CLI::PositiveNumber);
    sample->add_option("--burn-in", sargs.burn_in, "chain burn-in transitions");
    sample->add_option("--thin", sargs.thin, "chain thinning")->check(CLI::PositiveNumber);
    sample->add_option("--checkpoint", sargs.checkpoint, "checkpoint path (default: <out_dir>/checkpoint.json)");

    std::string diag_ckpt;
    auto* diagnose = app.add_subcommand("diagnose", "evaluate the diagnostics battery on a checkpoint");
    add_common(diagnose);
    diagnose->add_option("--checkpoint", diag_ckpt, "checkpoint path (default: <out_dir>/checkpoint.json)");

    std::size_t corpus_size = 1000;
    double tol = 1e-9;
    std::uint64_t oracle_seed = 1;
    std::string oracle_format = "csv";
    auto* oracle = app.add_subcommand("oracle", "check the tabular identities on a random corpus");
    oracle->add_option("--corpus-size", corpus_size, "number of random joints");
    oracle->add_option("--tol", tol, "maximum allowed deviation");
    oracle->add_option("--seed", oracle_seed, "corpus seed");
    oracle->add_option("--format", oracle_format, "report format")->check(CLI::IsMember({"csv", "json"}));

    auto* scen = app.add_subcommand("scenarios", "named experiments");
    scen->require_subcommand(1);
    scen->add_subcommand("list", "print the named scenarios");
    std::string scen_name, scen_out;
    std::uint64_t scen_seed = 1;
    auto* scen_run = scen->add_subcommand("run", "run a named scenario");
    scen_run->add_option("name", scen_name, "scenario name")->required();
    scen_run->add_option("--seed", scen_seed, "master seed");
    scen_run->add_option("--out", scen_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitConfig;
    }

    try {
        if (*train) return cmd_train(common);
        if (*sample) return cmd_sample(common, sargs);
        if (*diagnose) return cmd_diagnose(common, diag_ckpt);
        if (*oracle) return cmd_oracle(corpus_size, tol, oracle_seed, oracle_format);
        if (*scen) {
            if (*scen->get_subcommand("list")) return cmd_scenarios_list();
            return cmd_scenarios_run(scen_name, scen_seed, scen_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitConfig;
}
