#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "infovae/harness/experiment.hpp"
#include "infovae/harness/scenarios.hpp"
#include "support.hpp"

using namespace infovae;
using namespace infovae::harness;
namespace fs = std::filesystem;

namespace {
fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("infovae_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig tiny_run(const fs::path& out) {
    RunConfig c;
    c.name = "tiny";
    c.seed = 3;
    c.steps = 20;
    c.eval_every = 10;
    c.out_dir = out.string();
    c.objective.name = "infovae_mmd";
    c.objective.param = 10.0;
    c.model.latent_dim = 2;
    c.model.encoder_hidden = {8};
    c.model.decoder_hidden = {8};
    c.data.name = "mixture";
    c.data.size = 64;
    c.data.classes = 4;
    c.optim.batch_size = 16;
    c.eval.metrics = {"logdet_cov", "mi_estimate", "mean_kl_qzx_pz", "probe_error", "full_mmd"};
    c.eval.mi_mixture = 64;
    c.eval.sample_count = 20;
    c.eval.chain_burn_in = 5;
    return c;
}
}  // namespace

TEST(Config, ParsesSectionsAndTypes) {
    const RunConfig c = parse_run_config(R"(
# comment
[run]
name = "demo"   # trailing comment
seed = 7
steps = 300

[objective]
name = "beta_vae"
param = 4

[model]
latent_dim = 3
encoder_hidden = [16, 8]
decoder = "bernoulli"

[data]
name = "binary_codes"
size = 100

[eval]
metrics = ["logdet_cov", "mi_estimate"]
)");
    EXPECT_EQ(c.name, "demo");
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.steps, 300u);
    EXPECT_EQ(c.objective_spec().name, "beta_vae");
    EXPECT_DOUBLE_EQ(c.objective_spec().lambda, 4.0);
    EXPECT_EQ(c.model.encoder_hidden, (std::vector<std::size_t>{16, 8}));
    EXPECT_EQ(c.model.decoder, DecoderKind::bernoulli);
    EXPECT_EQ(c.eval.metrics, (std::vector<std::string>{"logdet_cov", "mi_estimate"}));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_run_config("[run]\nsteps = 10\nstpes = 3\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[run]\nsteps = ten\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[run]\nsteps = 0\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[run]\nsteps = 1\nsteps = 2\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[run\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[eval]\nmetrics = [\"bogus\"]\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[objective]\nname = \"nope\"\n"), ConfigError);
}

TEST(Config, TextRoundTrip) {
    RunConfig c = tiny_run("runs/x");
    c.objective.name = "custom";
    c.objective.alpha = 0.25;
    c.objective.lambda = 3.5;
    c.objective.divergence = "stein";
    c.optim.learning_rate = 3e-4;
    const RunConfig back = parse_run_config(to_config_text(c));
    EXPECT_EQ(to_config_text(back), to_config_text(c));
    EXPECT_DOUBLE_EQ(back.optim.learning_rate, 3e-4);
    EXPECT_EQ(back.objective_spec().divergence, DivergenceKind::stein);
}

TEST(Config, TwoPointNeedsGaussianDecoder) {
    RunConfig c;
    c.model.decoder = DecoderKind::bernoulli;
    EXPECT_THROW(c.validate(), ConfigError);
    c.model.decoder = DecoderKind::gaussian;
    EXPECT_NO_THROW(c.validate());
}

TEST(Datasets, TwoPoint) {
    const Dataset d = two_point_dataset();
    EXPECT_EQ(d.x.to_vector(), (std::vector<double>{-1.0, 1.0}));
    EXPECT_DOUBLE_EQ(d.x[0] + d.x[1], 0.0);
}

TEST(Datasets, MixtureIsBalancedDeterministicAndSeparable) {
    const Dataset a = synthetic_mixture(8, 803, 10.0, 4);
    const Dataset b = synthetic_mixture(8, 803, 10.0, 4);
    EXPECT_EQ(a.x.to_vector(), b.x.to_vector());
    std::vector<std::size_t> counts(8, 0);
    for (int y : *a.labels) ++counts[static_cast<std::size_t>(y)];
    EXPECT_LE(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1u);
    EXPECT_LT(linear_probe(a.x, *a.labels, 400), 0.01);
    EXPECT_NE(synthetic_mixture(8, 803, 10.0, 5).x.to_vector(), a.x.to_vector());
}

TEST(Datasets, TwoClusterMixtureIsLinearlySeparable) {
    const Dataset d = synthetic_mixture(2, 1000, 10.0, 1);
    EXPECT_LT(linear_probe(d.x, *d.labels, 500), 0.01);
    EXPECT_EQ(std::count(d.labels->begin(), d.labels->end(), 0), 500);
}

TEST(Datasets, StochasticBinarization) {
    Dataset d{Tensor::zeros({100, 10}), std::nullopt, false, "z"};
    EXPECT_EQ(binarize_stochastic(d, 1).x.to_vector(), std::vector<double>(1000, 0.0));
    d.x = Tensor::full({100, 10}, 1.0);
    EXPECT_EQ(binarize_stochastic(d, 1).x.to_vector(), std::vector<double>(1000, 1.0));
    d.x = Tensor::full({1000, 10}, 0.3);
    const Dataset b = binarize_stochastic(d, 1);
    double mean = 0.0;
    for (double v : b.x.values()) mean += v / 10000.0;
    EXPECT_NEAR(mean, 0.3, 0.015);
    EXPECT_TRUE(b.binarized);
    d.x = Tensor::full({1, 1}, 1.5);
    EXPECT_THROW(binarize_stochastic(d, 1), ConfigError);
}

TEST(Datasets, DigitsAndCodesShapes) {
    const Dataset d = synthetic_digits(30, 2);
    EXPECT_EQ(d.x.shape(), (Shape{30, 64}));
    for (double v : d.x.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    const Dataset c = synthetic_binary_codes(50, 5, 2, 12, 0.0);
    EXPECT_TRUE(c.binarized);
    EXPECT_EQ(c.x.shape(), (Shape{50, 12}));
}

TEST(Datasets, LoadsIdxAndCsv) {
    const fs::path dir = scratch_dir("load");
    {
        std::ofstream os(dir / "images.idx", std::ios::binary);
        const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2};
        os.write(reinterpret_cast<const char*>(header), sizeof header);
        const unsigned char pixels[] = {0, 255, 51, 102};
        os.write(reinterpret_cast<const char*>(pixels), sizeof pixels);
        std::ofstream ls(dir / "labels.idx", std::ios::binary);
        const unsigned char lh[] = {0, 0, 8, 1, 0, 0, 0, 2, 7, 3};
        ls.write(reinterpret_cast<const char*>(lh), sizeof lh);
    }
    const Dataset idx = load_digits_idx(dir / "images.idx", dir / "labels.idx");
    EXPECT_EQ(idx.x.shape(), (Shape{2, 2}));
    EXPECT_NEAR(idx.x[2], 0.2, 1e-15);
    EXPECT_EQ(*idx.labels, (std::vector<int>{7, 3}));

    std::ofstream(dir / "d.csv") << "p0,label,p1\n0,1,255\n51,0,0\n";
    const Dataset csv = load_digits_idx(dir / "d.csv");
    EXPECT_EQ(csv.x.to_vector(), (std::vector<double>{0.0, 1.0, 0.2, 0.0}));
    EXPECT_EQ(*csv.labels, (std::vector<int>{1, 0}));

    std::ofstream(dir / "bad.csv") << "p0,p1\n0,x\n";
    EXPECT_THROW(load_digits_idx(dir / "bad.csv"), FormatError);
    EXPECT_THROW(load_digits_idx(dir / "missing.csv"), FormatError);
}

TEST(GitBlob, KnownIds) {
    EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Experiment, SameConfigGivesIdenticalOutputs) {
    const RunConfig a = tiny_run(scratch_dir("det_a"));
    RunConfig b = a;
    b.out_dir = scratch_dir("det_b").string();
    const RunResult ra = run_experiment(a);
    const RunResult rb = run_experiment(b);
    EXPECT_EQ(ra.exit_status, kExitOk);
    EXPECT_EQ(ra.records.size(), 2u);
    EXPECT_EQ(ra.output_hashes, rb.output_hashes);
    EXPECT_EQ(ra.output_hashes.at("metrics.csv"), git_blob_sha1(read_file(fs::path(a.out_dir) / "metrics.csv")));
}

TEST(Experiment, ManifestEchoesConfig) {
    const RunConfig c = tiny_run(scratch_dir("manifest"));
    run_experiment(c);
    const auto m = nlohmann::json::parse(read_file(fs::path(c.out_dir) / "manifest.json"));
    EXPECT_EQ(m["config"].get<std::string>(), to_config_text(c));
    EXPECT_EQ(m["objective"]["name"].get<std::string>(), "infovae_mmd");
    EXPECT_EQ(m["steps_completed"].get<int>(), 20);
    EXPECT_FALSE(m["pathology"].get<bool>());
    for (const char* f : {"metrics.csv", "checkpoint.json", "samples_ancestral.csv", "samples_chain.csv"})
        EXPECT_TRUE(m["outputs"].contains(f)) << f;
}

TEST(Experiment, BinaryDecoderNeedsBinaryData) {
    RunConfig c = tiny_run(scratch_dir("binary"));
    c.model.decoder = DecoderKind::bernoulli;
    EXPECT_THROW(run_experiment(c, {false, nullptr}), ConfigError);
}

TEST(Scenarios, RegisteredNames) {
    std::vector<std::string> names;
    for (const auto& s : scenarios()) names.push_back(s.name);
    EXPECT_EQ(names, (std::vector<std::string>{"prop1-pathology", "prop1-infovae", "info-preference"}));
    EXPECT_THROW(find_scenario("nope"), ConfigError);
    for (const auto& s : scenarios())
        for (const auto& c : s.runs(1, "runs/x")) EXPECT_NO_THROW(c.validate()) << s.name;
}
