#pragma once

// Run configuration read from a flat sectioned key = value file:
//
//   # comment
//   [section]
//   key = 12            # integer
//   key = 1e-3          # float
//   key = true          # bool
//   key = "text"        # string
//   key = [64, 64]      # array of numbers or strings
//
// Every key must be known; typos are errors.

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "infovae/errors.hpp"
#include "infovae/models.hpp"
#include "infovae/objectives.hpp"

namespace infovae::harness {

/// Raw "section.key" -> value text with line numbers, before typing.
class ConfigFile {
public:
    struct Entry {
        std::string text;
        std::size_t line;
    };

    static ConfigFile parse(const std::string& content, const std::string& origin = "<config>") {
        ConfigFile f;
        f.origin_ = origin;
        std::istringstream is(content);
        std::string line, section;
        std::size_t no = 0;
        while (std::getline(is, line)) {
            ++no;
            line = trim(strip_comment(line));
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') f.fail(no, "unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) f.fail(no, "empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) f.fail(no, "expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty() || value.empty()) f.fail(no, "empty key or value");
            const std::string full = section.empty() ? key : section + "." + key;
            if (f.entries_.count(full)) f.fail(no, "duplicate key '" + full + "'");
            f.entries_[full] = {value, no};
        }
        return f;
    }

    static ConfigFile load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot read config file " + path.string());
        std::stringstream ss;
        ss << is.rdbuf();
        return parse(ss.str(), path.string());
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string get_string(const std::string& key) {
        const Entry& e = take(key);
        return unquote(e);
    }
    long long get_int(const std::string& key) {
        const Entry& e = take(key);
        long long v = 0;
        const auto* end = e.text.data() + e.text.size();
        const auto r = std::from_chars(e.text.data(), end, v);
        if (r.ec != std::errc() || r.ptr != end) fail(e.line, "'" + key + "' must be an integer, got " + e.text);
        return v;
    }
    double get_double(const std::string& key) {
        const Entry& e = take(key);
        return to_double(e, e.text, key);
    }
    bool get_bool(const std::string& key) {
        const Entry& e = take(key);
        if (e.text == "true") return true;
        if (e.text == "false") return false;
        fail(e.line, "'" + key + "' must be true or false, got " + e.text);
    }
    std::vector<std::string> get_array(const std::string& key) {
        const Entry& e = take(key);
        if (e.text.size() < 2 || e.text.front() != '[' || e.text.back() != ']') fail(e.line, "'" + key + "' must be an array");
        std::vector<std::string> out;
        const std::string inner = trim(e.text.substr(1, e.text.size() - 2));
        if (inner.empty()) return out;
        std::stringstream ss(inner);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(trim(item));
        return out;
    }
    std::vector<std::size_t> get_size_array(const std::string& key) {
        const std::size_t line = entries_.count(key) ? entries_.at(key).line : 0;
        std::vector<std::size_t> out;
        for (const auto& item : get_array(key)) {
            std::size_t v = 0;
            const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
            if (r.ec != std::errc() || r.ptr != item.data() + item.size())
                fail(line, "'" + key + "' must hold non-negative integers, got " + item);
            out.push_back(v);
        }
        return out;
    }
    std::vector<std::string> get_string_array(const std::string& key) {
        const std::size_t line = entries_.count(key) ? entries_.at(key).line : 0;
        std::vector<std::string> out;
        for (const auto& item : get_array(key)) out.push_back(unquote({item, line}));
        return out;
    }

    /// Throws on any key that no getter consumed.
    void reject_unused() const {
        for (const auto& [key, e] : entries_)
            if (!used_.count(key)) fail(e.line, "unknown key '" + key + "'");
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }
    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) return s.substr(0, i);
        }
        return s;
    }
    [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
        throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + msg);
    }
    const Entry& take(const std::string& key) {
        used_.insert(key);
        return entries_.at(key);
    }
    std::string unquote(const Entry& e) const {
        if (e.text.size() < 2 || e.text.front() != '"' || e.text.back() != '"') fail(e.line, "expected a quoted string, got " + e.text);
        return e.text.substr(1, e.text.size() - 2);
    }
    double to_double(const Entry& e, const std::string& text, const std::string& key) const {
        double v = 0.0;
        const auto* end = text.data() + text.size();
        const auto r = std::from_chars(text.data(), end, v);
        if (r.ec != std::errc() || r.ptr != end) fail(e.line, "'" + key + "' must be a number, got " + text);
        return v;
    }

    std::string origin_;
    std::map<std::string, Entry> entries_;
    std::set<std::string> used_;
};

struct ObjectiveConfig {
    std::string name = "elbo";  // elbo | beta_vae | aae | infovae_mmd | infovae_stein | unregularized | custom
    double param = 1.0;         // beta or lambda for the named objectives that take one
    double alpha = 0.0;         // custom only
    double lambda = 1.0;        // custom only
    std::string divergence = "none";  // custom only
};

struct DataConfig {
    std::string name = "two_point";  // two_point | mixture | binary_codes | digits | file
    std::size_t size = 2;
    std::uint64_t seed = 1;
    std::size_t classes = 8;
    double separation = 10.0;
    std::size_t dim = 16;
    double flip = 0.05;
    std::string path;
    std::string labels_path;
    bool binarize = false;
};

struct OptimConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double discriminator_learning_rate = 1e-3;
    std::size_t batch_size = 64;
};

struct EvalConfig {
    std::vector<std::string> metrics = {"logdet_cov", "mi_estimate", "full_mmd",   "mean_kl_qzx_pz",
                                        "class_ce",   "ll_estimate", "probe_error", "var_gap"};
    std::size_t samples_per_x = 10;
    bool logdet_per_dim = true;
    std::size_t mi_mixture = 500;
    std::size_t mi_samples = 5;
    std::size_t ll_rows = 20;
    std::size_t ll_samples = 200;
    double probe_fraction = 0.5;
    std::size_t sample_count = 200;
    std::size_t chain_burn_in = 500;
    std::size_t chain_thin = 5;
    std::size_t class_ce_samples = 500;
};

struct RunConfig {
    std::string name = "run";
    std::uint64_t seed = 1;
    std::size_t steps = 1000;
    std::size_t eval_every = 100;
    std::string out_dir = "runs/run";
    std::string format = "csv";
    bool expect_pathology = false;  // a numerical blow-up counts as success
    ObjectiveConfig objective;
    ModelConfig model{1, 1, {64, 64}, {64, 64}, DecoderKind::gaussian, 0.0};
    DataConfig data;
    OptimConfig optim;
    EvalConfig eval;

    ObjectiveSpec objective_spec() const {
        const DecoderKind lik = model.decoder;
        if (objective.name == "custom") {
            ObjectiveSpec s = ObjectiveSpec::make(objective.alpha, objective.lambda, parse_divergence_kind(objective.divergence), lik);
            s.name = "custom";
            return s;
        }
        const bool takes_param = objective.name == "beta_vae" || objective.name == "infovae_mmd" || objective.name == "infovae_stein";
        return make_named_objective(objective.name, takes_param ? objective.param : std::numeric_limits<double>::quiet_NaN(), lik);
    }

    void validate() const {
        auto positive = [](std::size_t v, const char* what) {
            if (v == 0) throw ConfigError(std::string("config: ") + what + " must be positive");
        };
        if (seed == 0) throw ConfigError("config: run.seed must be positive");
        if (data.seed == 0) throw ConfigError("config: data.seed must be positive");
        positive(steps, "run.steps");
        positive(eval_every, "run.eval_every");
        positive(data.size, "data.size");
        positive(model.latent_dim, "model.latent_dim");
        positive(optim.batch_size, "optim.batch_size");
        positive(eval.samples_per_x, "eval.samples_per_x");
        positive(eval.mi_mixture, "eval.mi_mixture");
        positive(eval.mi_samples, "eval.mi_samples");
        positive(eval.ll_samples, "eval.ll_samples");
        positive(eval.sample_count, "eval.sample_count");
        positive(eval.chain_thin, "eval.chain_thin");
        for (auto h : model.encoder_hidden) positive(h, "model.encoder_hidden entries");
        for (auto h : model.decoder_hidden) positive(h, "model.decoder_hidden entries");
        if (!(optim.learning_rate > 0.0)) throw ConfigError("config: optim.learning_rate must be > 0");
        if (!(eval.probe_fraction > 0.0 && eval.probe_fraction < 1.0)) throw ConfigError("config: eval.probe_fraction must be in (0, 1)");
        if (format != "csv" && format != "json") throw ConfigError("config: run.format must be csv or json");
        static const std::set<std::string> known = {"logdet_cov", "mi_estimate", "full_mmd",   "mean_kl_qzx_pz",
                                                    "class_ce",   "ll_estimate", "probe_error", "var_gap"};
        for (const auto& m : eval.metrics)
            if (!known.count(m)) throw ConfigError("config: unknown metric '" + m + "'");
        static const std::set<std::string> datasets = {"two_point", "mixture", "binary_codes", "digits", "file"};
        if (!datasets.count(data.name)) throw ConfigError("config: unknown dataset '" + data.name + "'");
        if (data.name == "two_point" && model.decoder != DecoderKind::gaussian)
            throw ConfigError("config: the two_point dataset needs the gaussian decoder");
        if (data.name == "two_point" && data.size != 2) throw ConfigError("config: the two_point dataset has size 2");
        if (data.name == "file" && data.path.empty()) throw ConfigError("config: data.path is required for file datasets");
        (void)objective_spec();
    }
};

inline std::string quote(const std::string& s) { return "\"" + s + "\""; }

template <class T>
std::string array_text(const std::vector<T>& v) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        if constexpr (std::is_same_v<T, std::string>)
            os << quote(v[i]);
        else
            os << v[i];
    }
    os << ']';
    return os.str();
}

inline std::string number_text(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    std::string s = os.str();
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

/// Complete effective configuration, defaults included, in the input format.
inline std::string to_config_text(const RunConfig& c) {
    std::ostringstream os;
    os << "[run]\n"
       << "name = " << quote(c.name) << "\nseed = " << c.seed << "\nsteps = " << c.steps << "\neval_every = " << c.eval_every
       << "\nout_dir = " << quote(c.out_dir) << "\nformat = " << quote(c.format)
       << "\nexpect_pathology = " << (c.expect_pathology ? "true" : "false") << "\n\n";
    os << "[objective]\n"
       << "name = " << quote(c.objective.name) << "\nparam = " << number_text(c.objective.param)
       << "\nalpha = " << number_text(c.objective.alpha) << "\nlambda = " << number_text(c.objective.lambda)
       << "\ndivergence = " << quote(c.objective.divergence) << "\n\n";
    os << "[model]\n"
       << "latent_dim = " << c.model.latent_dim << "\nencoder_hidden = " << array_text(c.model.encoder_hidden)
       << "\ndecoder_hidden = " << array_text(c.model.decoder_hidden) << "\ndecoder = " << quote(to_string(c.model.decoder))
       << "\nclamp_floor = " << number_text(c.model.clamp_floor) << "\n\n";
    os << "[data]\n"
       << "name = " << quote(c.data.name) << "\nsize = " << c.data.size << "\nseed = " << c.data.seed
       << "\nclasses = " << c.data.classes << "\nseparation = " << number_text(c.data.separation) << "\ndim = " << c.data.dim
       << "\nflip = " << number_text(c.data.flip) << "\npath = " << quote(c.data.path)
       << "\nlabels_path = " << quote(c.data.labels_path) << "\nbinarize = " << (c.data.binarize ? "true" : "false") << "\n\n";
    os << "[optim]\n"
       << "learning_rate = " << number_text(c.optim.learning_rate) << "\nbeta1 = " << number_text(c.optim.beta1)
       << "\nbeta2 = " << number_text(c.optim.beta2) << "\nepsilon = " << number_text(c.optim.epsilon)
       << "\ndiscriminator_learning_rate = " << number_text(c.optim.discriminator_learning_rate)
       << "\nbatch_size = " << c.optim.batch_size << "\n\n";
    os << "[eval]\n"
       << "metrics = " << array_text(c.eval.metrics) << "\nsamples_per_x = " << c.eval.samples_per_x
       << "\nlogdet_per_dim = " << (c.eval.logdet_per_dim ? "true" : "false") << "\nmi_mixture = " << c.eval.mi_mixture
       << "\nmi_samples = " << c.eval.mi_samples << "\nll_rows = " << c.eval.ll_rows << "\nll_samples = " << c.eval.ll_samples
       << "\nprobe_fraction = " << number_text(c.eval.probe_fraction) << "\nsample_count = " << c.eval.sample_count
       << "\nchain_burn_in = " << c.eval.chain_burn_in << "\nchain_thin = " << c.eval.chain_thin
       << "\nclass_ce_samples = " << c.eval.class_ce_samples << "\n";
    return os.str();
}

inline RunConfig run_config_from(ConfigFile& f) {
    RunConfig c;
    auto size = [&](const char* key, std::size_t& out) {
        if (!f.has(key)) return;
        const long long v = f.get_int(key);
        if (v < 0) throw ConfigError(std::string("config: ") + key + " must be non-negative");
        out = static_cast<std::size_t>(v);
    };
    auto u64 = [&](const char* key, std::uint64_t& out) {
        if (!f.has(key)) return;
        const long long v = f.get_int(key);
        if (v < 0) throw ConfigError(std::string("config: ") + key + " must be non-negative");
        out = static_cast<std::uint64_t>(v);
    };
    auto dbl = [&](const char* key, double& out) {
        if (f.has(key)) out = f.get_double(key);
    };
    auto str = [&](const char* key, std::string& out) {
        if (f.has(key)) out = f.get_string(key);
    };
    auto boolean = [&](const char* key, bool& out) {
        if (f.has(key)) out = f.get_bool(key);
    };

    str("run.name", c.name);
    u64("run.seed", c.seed);
    size("run.steps", c.steps);
    size("run.eval_every", c.eval_every);
    str("run.out_dir", c.out_dir);
    str("run.format", c.format);
    boolean("run.expect_pathology", c.expect_pathology);

    str("objective.name", c.objective.name);
    dbl("objective.param", c.objective.param);
    dbl("objective.alpha", c.objective.alpha);
    dbl("objective.lambda", c.objective.lambda);
    str("objective.divergence", c.objective.divergence);

    size("model.latent_dim", c.model.latent_dim);
    if (f.has("model.encoder_hidden")) c.model.encoder_hidden = f.get_size_array("model.encoder_hidden");
    if (f.has("model.decoder_hidden")) c.model.decoder_hidden = f.get_size_array("model.decoder_hidden");
    if (f.has("model.decoder")) c.model.decoder = parse_decoder_kind(f.get_string("model.decoder"));
    dbl("model.clamp_floor", c.model.clamp_floor);

    str("data.name", c.data.name);
    size("data.size", c.data.size);
    u64("data.seed", c.data.seed);
    size("data.classes", c.data.classes);
    dbl("data.separation", c.data.separation);
    size("data.dim", c.data.dim);
    dbl("data.flip", c.data.flip);
    str("data.path", c.data.path);
    str("data.labels_path", c.data.labels_path);
    boolean("data.binarize", c.data.binarize);

    dbl("optim.learning_rate", c.optim.learning_rate);
    dbl("optim.beta1", c.optim.beta1);
    dbl("optim.beta2", c.optim.beta2);
    dbl("optim.epsilon", c.optim.epsilon);
    dbl("optim.discriminator_learning_rate", c.optim.discriminator_learning_rate);
    size("optim.batch_size", c.optim.batch_size);

    if (f.has("eval.metrics")) c.eval.metrics = f.get_string_array("eval.metrics");
    size("eval.samples_per_x", c.eval.samples_per_x);
    boolean("eval.logdet_per_dim", c.eval.logdet_per_dim);
    size("eval.mi_mixture", c.eval.mi_mixture);
    size("eval.mi_samples", c.eval.mi_samples);
    size("eval.ll_rows", c.eval.ll_rows);
    size("eval.ll_samples", c.eval.ll_samples);
    dbl("eval.probe_fraction", c.eval.probe_fraction);
    size("eval.sample_count", c.eval.sample_count);
    size("eval.chain_burn_in", c.eval.chain_burn_in);
    size("eval.chain_thin", c.eval.chain_thin);
    size("eval.class_ce_samples", c.eval.class_ce_samples);

    f.reject_unused();
    c.validate();
    return c;
}

inline RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>") {
    ConfigFile f = ConfigFile::parse(text, origin);
    return run_config_from(f);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    ConfigFile f = ConfigFile::load(path);
    return run_config_from(f);
}

}  // namespace infovae::harness
