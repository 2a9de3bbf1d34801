#include "flowam/config.hpp"

#include "flowam/errors.hpp"
#include "flowam/io.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace flowam {

using nlohmann::json;
using nlohmann::ordered_json;

const ordered_json& config_defaults() {
    static const ordered_json d = {
        // task
        {"data", "gm2"},
        {"data_mean", 0.0},
        {"data_std", 1.0},
        {"modes", {{-2.0, 0.0}, {2.0, 0.0}}},
        {"mode_std", 0.5},
        {"mode_weights", json::array()},
        {"ring_radius", 2.0},
        {"ring_std", 0.1},
        {"conditional", false},
        {"labels", json::array()},
        {"reward", "quadwell"},
        {"reward_center", nullptr},  // 2 e_1 in the data dimension
        {"reward_curvature", 1.0},
        {"reward_direction", nullptr},  // e_1
        // schedules
        {"schedule", "linear"},
        {"noise", "memoryless"},
        // network
        {"hidden", {64, 64, 64}},
        {"activation", "silu"},
        {"time_features", 8},
        // pretraining
        {"pretrain_iterations", 3000},
        {"pretrain_batch", 256},
        {"pretrain_lr", 1e-3},
        {"pretrain_warmup", 0},
        {"pretrain_grad_clip", 1.0},
        // fine-tuning
        {"method", "ode-am"},
        {"n_steps", 50},
        {"n_truncate", 10},
        {"batch", 64},
        {"iterations", 300},
        {"lr", 1e-4},
        {"warmup", 0},
        {"grad_clip", 1.0},
        {"p", 2.0},
        {"lambda", 1.0},
        {"draft_k", 1},
        {"refl_k", 5},
        {"seed", 0},
        {"eval_every", 0},
        {"log_timings", true},
        {"adjoint_dump", false},
        // evaluation
        {"n_eval", 2000},
        {"eval_seed", 12345},
        {"knn_k", 5},
        {"eval_sampler", "ode"},
        // output
        {"outdir", "run"},
    };
    return d;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Drops a '#' comment that is not inside a double-quoted string.
std::string strip_comment(std::string_view line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
        if (line[i] == '#' && !in_str) return std::string(line.substr(0, i));
    }
    return std::string(line);
}

bool bare_word(const std::string& s) {
    if (s.empty() || s == "true" || s == "false" || s == "null") return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
               return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '/';
           }) &&
           !(std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '-' || s[0] == '.');
}

// Typed extraction that records a violation instead of throwing.
class Reader {
  public:
    Reader(const ordered_json& values, const std::map<std::string, int>& lines, std::vector<std::string>& errors)
        : values_(values), lines_(lines), errors_(errors) {}

    template <class T>
    T get(const std::string& key) {
        const json& v = values_.at(key);
        try {
            if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer() && !(v.is_number_float() && v.get<double>() == std::floor(v.get<double>())))
                    throw ConfigError("expected an integer");
                if constexpr (std::is_same_v<T, std::uint64_t>) {
                    if (v.is_number_integer() && v.get<std::int64_t>() < 0 && !v.is_number_unsigned())
                        throw ConfigError("expected a non-negative integer");
                }
                return static_cast<T>(v.is_number_unsigned() ? v.get<std::uint64_t>() : static_cast<std::uint64_t>(v.get<std::int64_t>()));
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError("expected a number");
                return v.get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("expected true or false");
                return v.get<bool>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("expected a string");
                return v.get<std::string>();
            } else {
                return v.get<T>();
            }
        } catch (const std::exception& e) {
            fail(key, std::string(e.what()) + ", got " + v.dump());
            return T{};
        }
    }

    // One violation per key: a type error must not also report the placeholder value's constraints.
    void fail(const std::string& key, const std::string& what) {
        if (!failed_.insert(key).second) return;
        const auto it = lines_.find(key);
        const std::string where = it == lines_.end() ? "default" : "line " + std::to_string(it->second);
        errors_.push_back(where + ": " + key + ": " + what);
    }

    bool has_errors() const { return !errors_.empty(); }

  private:
    const ordered_json& values_;
    const std::map<std::string, int>& lines_;
    std::vector<std::string>& errors_;
    std::set<std::string> failed_;
};

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

EvalOptions RunConfig::eval_options() const {
    EvalOptions o;
    o.n_samples = eval.n_eval;
    o.seed = eval.seed;
    o.knn_k = eval.knn_k;
    o.sampler.n_steps = train.n_steps;
    o.sampler.sched = train.sched;
    o.sampler.n_cond = train.n_cond;
    o.sampler.stochastic = eval.stochastic;
    o.sampler.noise = eval.stochastic ? train.noise : NoiseSchedule::zero();
    return o;
}

RunConfig parse_config_text(std::string_view text, const std::string& source) {
    ordered_json values = config_defaults();
    std::map<std::string, int> lines;
    std::vector<std::string> errors;

    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string val = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ParseError(source, lineno, "missing key before '='");
        if (val.empty()) throw ParseError(source, lineno, "missing value for '" + key + "'");
        json parsed;
        if (bare_word(val)) {
            parsed = val;
        } else {
            try {
                parsed = json::parse(val);
            } catch (const json::parse_error&) {
                throw ParseError(source, lineno, "cannot parse value for '" + key + "': " + val);
            }
        }
        if (!values.contains(key)) {
            errors.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            continue;
        }
        if (lines.count(key)) {
            errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first set on line " +
                             std::to_string(lines[key]) + ")");
            continue;
        }
        lines[key] = lineno;
        values[key] = parsed;
    }

    Reader r(values, lines, errors);
    RunConfig cfg;
    cfg.resolved = values;
    cfg.config_hash = io::hex64(io::fnv1a64(text));

    // --- schedules
    auto schedule_key = r.get<std::string>("schedule");
    try {
        cfg.train.sched = schedule_from_key(schedule_key);
        cfg.pretrain.sched = cfg.train.sched;
    } catch (const Error& e) {
        r.fail("schedule", e.what());
    }
    auto noise_key_s = r.get<std::string>("noise");
    try {
        cfg.train.noise = noise_from_key(noise_key_s);
    } catch (const Error& e) {
        r.fail("noise", e.what());
    }

    // --- task
    cfg.data_key = r.get<std::string>("data");
    cfg.conditional = r.get<bool>("conditional");
    try {
        if (cfg.data_key == "gauss1d") {
            cfg.dist = DataDistribution::gaussian_1d(r.get<double>("data_mean"), r.get<double>("data_std"));
        } else if (cfg.data_key == "gm2" || cfg.data_key == "mixture") {
            const auto centers = r.get<std::vector<std::vector<double>>>("modes");
            const auto weights = r.get<std::vector<double>>("mode_weights");
            const double sd = r.get<double>("mode_std");
            if (!weights.empty() && weights.size() != centers.size())
                r.fail("mode_weights", "needs one weight per mode");
            std::vector<GaussianMode> modes;
            for (std::size_t i = 0; i < centers.size(); ++i)
                modes.push_back({to_vec(centers[i]), weights.size() == centers.size() ? weights[i] : 1.0, sd});
            if (modes.empty()) r.fail("modes", "at least one mode required");
            else cfg.dist = DataDistribution::mixture(std::move(modes));
        } else if (cfg.data_key == "ring8") {
            cfg.dist = DataDistribution::ring8(r.get<double>("ring_radius"), r.get<double>("ring_std"));
        } else {
            r.fail("data", "unknown distribution '" + cfg.data_key + "' (expected gauss1d | gm2 | ring8)");
        }
    } catch (const Error& e) {
        r.fail("data", e.what());
    }
    const int dim = cfg.dist ? cfg.dist->dim() : 0;

    cfg.labels = r.get<std::vector<std::string>>("labels");
    if (cfg.conditional && cfg.dist) {
        const int n_modes = static_cast<int>(cfg.dist->modes().size());
        if (cfg.labels.empty())
            for (int i = 0; i < n_modes; ++i) cfg.labels.push_back("mode" + std::to_string(i));
        if (static_cast<int>(cfg.labels.size()) != n_modes) r.fail("labels", "needs one label per mixture mode");
    } else if (!cfg.conditional && !cfg.labels.empty()) {
        r.fail("labels", "labels are only used with conditional = true");
    }

    cfg.reward_key = r.get<std::string>("reward");
    // null vector keys default to a multiple of e_1 in the data dimension
    auto vec_or_axis = [&](const std::string& key, double scale) {
        if (values.at(key).is_null()) {
            Vec v = Vec::Zero(std::max(dim, 1));
            v(0) = scale;
            cfg.resolved[key] = std::vector<double>(v.data(), v.data() + v.size());
            return v;
        }
        return to_vec(r.get<std::vector<double>>(key));
    };
    try {
        if (cfg.reward_key == "quadwell") {
            cfg.reward = RewardFn::quadratic_well(vec_or_axis("reward_center", 2.0), r.get<double>("reward_curvature"));
        } else if (cfg.reward_key == "logdensity") {
            if (cfg.dist) cfg.reward = RewardFn::log_density_tilt(*cfg.dist);
        } else if (cfg.reward_key == "linear") {
            cfg.reward = RewardFn::linear_probe(vec_or_axis("reward_direction", 1.0));
        } else {
            r.fail("reward", "unknown reward '" + cfg.reward_key + "' (expected quadwell | logdensity | linear)");
        }
    } catch (const Error& e) {
        r.fail("reward", e.what());
    }
    if (cfg.reward && dim && cfg.reward->dim() != dim)
        r.fail(cfg.reward_key == "linear" ? "reward_direction" : "reward_center",
               "dimension " + std::to_string(cfg.reward->dim()) + " does not match the data dimension " +
                   std::to_string(dim));

    // --- network
    cfg.arch.state_dim = std::max(dim, 1);
    cfg.arch.hidden = r.get<std::vector<int>>("hidden");
    if (std::any_of(cfg.arch.hidden.begin(), cfg.arch.hidden.end(), [](int w) { return w < 1; }))
        r.fail("hidden", "layer widths must be >= 1");
    try {
        cfg.arch.activation = activation_from_key(r.get<std::string>("activation"));
    } catch (const Error& e) {
        r.fail("activation", e.what());
    }
    cfg.arch.time_features = r.get<int>("time_features");
    if (cfg.arch.time_features < 0) r.fail("time_features", "must be >= 0");
    cfg.arch.n_cond = cfg.conditional ? static_cast<int>(cfg.labels.size()) : 0;

    // --- pretraining
    cfg.pretrain.iterations = r.get<int>("pretrain_iterations");
    cfg.pretrain.batch = r.get<int>("pretrain_batch");
    cfg.pretrain.optim.lr = r.get<double>("pretrain_lr");
    cfg.pretrain.optim.warmup = r.get<int>("pretrain_warmup");
    cfg.pretrain.optim.grad_clip = r.get<double>("pretrain_grad_clip");
    cfg.pretrain.conditional = cfg.conditional;
    if (cfg.pretrain.iterations < 0) r.fail("pretrain_iterations", "must be >= 0");
    if (cfg.pretrain.batch < 1) r.fail("pretrain_batch", "must be >= 1");
    if (!(cfg.pretrain.optim.lr > 0.0)) r.fail("pretrain_lr", "must be > 0");
    if (cfg.pretrain.optim.warmup < 0) r.fail("pretrain_warmup", "must be >= 0");

    // --- fine-tuning
    auto& t = cfg.train;
    try {
        t.method = method_from_key(r.get<std::string>("method"));
    } catch (const Error& e) {
        r.fail("method", e.what());
    }
    t.n_steps = r.get<int>("n_steps");
    t.n_truncate = r.get<int>("n_truncate");
    t.batch = r.get<int>("batch");
    t.iterations = r.get<int>("iterations");
    t.optim.lr = r.get<double>("lr");
    t.optim.warmup = r.get<int>("warmup");
    t.optim.grad_clip = r.get<double>("grad_clip");
    t.reg.p = r.get<double>("p");
    t.reg.lambda = r.get<double>("lambda");
    t.draft_k = r.get<int>("draft_k");
    t.refl_k = r.get<int>("refl_k");
    t.seed = r.get<std::uint64_t>("seed");
    t.eval_every = r.get<int>("eval_every");
    t.log_timings = r.get<bool>("log_timings");
    t.adjoint_dump = r.get<bool>("adjoint_dump");
    t.n_cond = cfg.arch.n_cond;
    cfg.pretrain.seed = t.seed;

    if (t.n_steps < 1) r.fail("n_steps", "must be >= 1");
    if (t.n_truncate < 1) r.fail("n_truncate", "must be >= 1");
    if (t.n_steps >= 1 && t.n_truncate > t.n_steps)
        r.fail("n_truncate", "violates T <= N (n_truncate = " + std::to_string(t.n_truncate) +
                                 ", n_steps = " + std::to_string(t.n_steps) + ")");
    if (t.batch < 1) r.fail("batch", "must be >= 1");
    if (t.iterations < 0) r.fail("iterations", "must be >= 0");
    if (!(t.optim.lr > 0.0)) r.fail("lr", "must be > 0");
    if (t.optim.warmup < 0) r.fail("warmup", "must be >= 0");
    if (!(t.reg.p > 1.0)) r.fail("p", "must be > 1");
    if (!(t.reg.lambda > 0.0)) r.fail("lambda", "must be > 0");
    if (t.eval_every < 0) r.fail("eval_every", "must be >= 0");
    if (t.method == FinetuneMethod::SdeAm && t.reg.p != 2.0)
        r.fail("p", "sde-am is restricted to the quadratic penalty p = 2 (stochastic matching is derived for "
                    "quadratic control cost only)");
    if (t.method == FinetuneMethod::Draft && (t.draft_k < 1 || t.draft_k > t.n_steps))
        r.fail("draft_k", "must lie in [1, n_steps]");
    if (t.method == FinetuneMethod::Refl && (t.refl_k < 1 || t.refl_k > t.n_steps))
        r.fail("refl_k", "must lie in [1, n_steps]");
    if (t.method == FinetuneMethod::SdeAm && t.n_steps >= 1 && t.n_truncate >= 1 && t.n_truncate <= t.n_steps) {
        const double h = 1.0 / t.n_steps;
        for (int k = t.n_steps - t.n_truncate; k < t.n_steps; ++k) {
            try {
                const auto c = sde_coefficients(t.sched, t.noise, static_cast<double>(k) / t.n_steps, h);
                if (!(c.sigma > 0.0)) {
                    r.fail("noise", "sigma(t) = 0 at t = " + io::format_double(static_cast<double>(k) / t.n_steps) +
                                        " on the sde-am loss window");
                    break;
                }
            } catch (const Error& e) {
                r.fail("noise", e.what());
                break;
            }
        }
    }

    // --- evaluation
    cfg.eval.n_eval = r.get<int>("n_eval");
    cfg.eval.seed = r.get<std::uint64_t>("eval_seed");
    cfg.eval.knn_k = r.get<int>("knn_k");
    const auto sampler = r.get<std::string>("eval_sampler");
    if (sampler == "sde") cfg.eval.stochastic = true;
    else if (sampler != "ode") r.fail("eval_sampler", "expected ode | sde");
    if (cfg.eval.knn_k < 1) r.fail("knn_k", "must be >= 1");
    if (cfg.eval.n_eval < cfg.eval.knn_k + 1) r.fail("n_eval", "must exceed knn_k");
    if (cfg.eval.stochastic && t.noise.kind == NoiseKind::Zero) r.fail("eval_sampler", "sde sampling needs noise != zero");

    cfg.outdir = r.get<std::string>("outdir");
    if (cfg.outdir.empty()) r.fail("outdir", "must not be empty");

    if (r.has_errors()) throw ValidationError(errors);
    cfg.resolved["labels"] = cfg.labels;
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    return parse_config_text(io::read_file(path), path.string());
}

std::string resolved_config_text(const RunConfig& cfg) {
    std::string out = "# flowctl " + std::string(kToolVersion) + "\n# config_hash = " + cfg.config_hash + "\n";
    for (const auto& [k, v] : cfg.resolved.items()) out += k + " = " + v.dump() + "\n";
    return out;
}

}  // namespace flowam
