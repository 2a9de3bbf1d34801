#include "flowam/cli.hpp"

#include "flowam/checkpoint.hpp"
#include "flowam/config.hpp"
#include "flowam/errors.hpp"
#include "flowam/eval.hpp"
#include "flowam/io.hpp"
#include "flowam/oracles.hpp"
#include "flowam/parallel.hpp"
#include "flowam/train.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>

namespace flowam {

namespace fs = std::filesystem;
using io::format_double;

namespace {

struct Paths {
    fs::path outdir;
    fs::path curves() const { return outdir / "curves"; }
};

Paths prepare_outdir(const RunConfig& cfg, const std::string& override_dir) {
    Paths p{override_dir.empty() ? cfg.outdir : fs::path(override_dir)};
    std::error_code ec;
    fs::create_directories(p.curves(), ec);
    if (ec) throw IoError("cannot create output directory '" + p.curves().string() + "': " + ec.message());
    return p;
}

std::string vec_cells(const Vec& x) {
    std::string s;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += "," + format_double(x(i));
    return s;
}

std::string coord_header(int dim) {
    std::string s;
    for (int i = 0; i < dim; ++i) s += ",x" + std::to_string(i);
    return s;
}

std::string samples_csv(const std::vector<Vec>& xs) {
    if (xs.empty()) return "index\n";
    std::string out = "index" + coord_header(static_cast<int>(xs.front().size())) + "\n";
    for (std::size_t i = 0; i < xs.size(); ++i) out += std::to_string(i) + vec_cells(xs[i]) + "\n";
    return out;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(std::string("--") + what + ": cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw ConfigError(std::string("--") + what + ": empty list");
    return out;
}

void summarize(std::ostream& out, const EvalReport& r) {
    out << "reward mean " << format_double(r.reward_mean) << " (std " << format_double(r.reward_std) << ", base "
        << format_double(r.base_reward_mean) << ")\n"
        << "diversity (mean pairwise distance) " << format_double(r.diversity_mpd) << "\n"
        << r.distance_kind << " to reference " << format_double(r.distance) << "\n"
        << "coverage " << format_double(r.coverage) << "  recall " << format_double(r.recall) << "  (n = "
        << r.n_samples << ", seed " << r.seed << ")\n";
}

Checkpoint load_model_for(const RunConfig& cfg, const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.model.state_dim() != cfg.data().dim())
        throw ConfigError(path + ": checkpoint state_dim " + std::to_string(ck.model.state_dim()) +
                          " does not match the configured data dimension " + std::to_string(cfg.data().dim()));
    if (ck.model.architecture().n_cond != cfg.train.n_cond || (cfg.conditional && ck.meta.labels != cfg.labels))
        throw ConfigError(path + ": checkpoint condition labels do not match the configuration");
    return ck;
}

// ---- subcommands

int cmd_pretrain(const std::string& config, const std::string& outdir, std::ostream& out) {
    const RunConfig cfg = parse_config(config);
    const Paths p = prepare_outdir(cfg, outdir);
    io::atomic_write(p.outdir / "config.resolved", resolved_config_text(cfg));
    const PretrainResult res = pretrain(cfg.pretrain, cfg.arch, cfg.data());
    std::string csv = "iter,loss\n";
    for (std::size_t i = 0; i < res.losses.size(); ++i) csv += std::to_string(i) + "," + format_double(res.losses[i]) + "\n";
    io::atomic_write(p.curves() / "pretrain_loss.csv", csv);
    save_checkpoint(p.outdir / "ckpt_base.bin", res.model, {cfg.pretrain.seed, cfg.pretrain.iterations, cfg.labels});
    out << "pretrained " << cfg.pretrain.iterations << " iterations";
    if (!res.losses.empty()) out << ", final loss " << format_double(res.losses.back());
    out << "\nwrote " << (p.outdir / "ckpt_base.bin").string() << "\n";
    return kExitOk;
}

int cmd_finetune(const std::string& config, const std::string& base_path, const std::string& outdir,
                 std::ostream& out) {
    const RunConfig cfg = parse_config(config);
    const Checkpoint base = load_model_for(cfg, base_path);
    const Paths p = prepare_outdir(cfg, outdir);
    io::atomic_write(p.outdir / "config.resolved", resolved_config_text(cfg));

    std::string curve = eval_csv_header();
    curve.insert(0, "iter,");
    const EvalOptions eopts = cfg.eval_options();
    auto hook = [&](int iter, const VelocityField& model) {
        save_checkpoint(p.outdir / ("ckpt_" + std::to_string(iter) + ".bin"), model, {cfg.train.seed, iter, cfg.labels});
        curve += std::to_string(iter) + "," + eval_csv_row(evaluate(model, base.model, cfg.reward_fn(), eopts));
    };
    const FinetuneResult res = finetune(cfg.train, base.model, cfg.reward_fn(), hook);

    io::atomic_write(p.outdir / "metrics.csv", metrics_csv(res.metrics, cfg.train.log_timings));
    if (cfg.train.eval_every > 0) io::atomic_write(p.curves() / "eval_curve.csv", curve);
    if (cfg.train.adjoint_dump) io::atomic_write(p.curves() / "adjoint_norm.csv", "iter,t,adjoint_norm\n" + res.adjoint_csv);
    save_checkpoint(p.outdir / "ckpt_final.bin", res.model, {cfg.train.seed, cfg.train.iterations, cfg.labels});

    const EvalReport rep = evaluate(res.model, base.model, cfg.reward_fn(), eopts);
    io::atomic_write(p.outdir / "eval.csv", eval_csv_header() + eval_csv_row(rep));
    out << method_key(cfg.train.method) << ": " << cfg.train.iterations << " iterations\n";
    summarize(out, rep);
    return kExitOk;
}

int cmd_eval(const std::string& config, const std::string& ckpt, const std::string& base_path,
             const std::string& outdir, bool dump, std::ostream& out) {
    const RunConfig cfg = parse_config(config);
    const Checkpoint model = load_model_for(cfg, ckpt);
    const Checkpoint base = load_model_for(cfg, base_path);
    const Paths p = prepare_outdir(cfg, outdir);
    const EvalOptions eopts = cfg.eval_options();
    const EvalReport rep = evaluate(model.model, base.model, cfg.reward_fn(), eopts);
    io::atomic_write(p.outdir / "eval.csv", eval_csv_header() + eval_csv_row(rep));
    if (dump)
        io::atomic_write(p.curves() / "eval_samples.csv",
                         samples_csv(terminal_states(sample_batch(model.model, eopts.sampler, eopts.n_samples, eopts.seed))));
    out << eval_csv_header() << eval_csv_row(rep);
    summarize(out, rep);
    return kExitOk;
}

std::string rp_curve(double mu, double sigma, const std::vector<double>& ps, int n) {
    if (n < 2) throw ConfigError("--n must be >= 2");
    if (!(sigma > 0.0)) throw ConfigError("--sigma must be > 0");
    const GaussianFlowSpec spec{mu, sigma};
    const double t_star = rf_peak_time(spec);
    // uniform grid with the node nearest t* moved onto t*, so each column attains exactly 1
    const int star = static_cast<int>(std::lround(t_star * (n - 1)));
    std::string out = "t";
    for (double p : ps) out += ",R_" + format_double(p);
    out += "\n";
    for (int i = 0; i < n; ++i) {
        const double t = i == star ? t_star : static_cast<double>(i) / (n - 1);
        out += format_double(t);
        for (double p : ps) out += "," + format_double(rf_relative_strength(spec, p, t));
        out += "\n";
    }
    return out;
}

std::string toy_curve(const std::vector<double>& Ts, const std::vector<double>& etas, int n) {
    if (n < 2) throw ConfigError("--n must be >= 2");
    std::string out = "T,eta,t,c_ve,c_vp\n";
    for (double T : Ts)
        for (double eta : etas) {
            const ToyDiffusionSpec ve{ToyKind::VE, T, eta}, vp{ToyKind::VP, T, eta};
            for (int i = 0; i < n; ++i) {
                const double t = T * i / (n - 1);
                out += format_double(T) + "," + format_double(eta) + "," + format_double(t) + "," +
                       format_double(toy_control_component(ve, t)) + "," + format_double(toy_control_component(vp, t)) + "\n";
            }
        }
    return out;
}

int cmd_oracle(const std::string& kind, double mu, double sigma, const std::string& p_list, const std::string& T_list,
               const std::string& eta_list, int n, const std::string& out_path, std::ostream& out) {
    std::string csv;
    if (kind == "rp") csv = rp_curve(mu, sigma, parse_list(p_list, "p"), n);
    else if (kind == "toy") csv = toy_curve(parse_list(T_list, "T"), parse_list(eta_list, "eta"), n);
    else throw ConfigError("--kind must be rp or toy");
    if (out_path.empty()) out << csv;
    else io::atomic_write(out_path, csv);
    return kExitOk;
}

int cmd_plot_data(const std::string& config, const std::string& ckpt, const std::string& outdir, int n,
                  int n_traj, std::ostream& out) {
    const RunConfig cfg = parse_config(config);
    const Paths p = prepare_outdir(cfg, outdir);
    Rng rng(cfg.eval.seed);
    io::atomic_write(p.curves() / "data_samples.csv", samples_csv(cfg.data().sample_n(n, rng)));
    if (!ckpt.empty()) {
        const Checkpoint model = load_model_for(cfg, ckpt);
        const EvalOptions eopts = cfg.eval_options();
        const auto batch = sample_batch(model.model, eopts.sampler, n, eopts.seed);
        io::atomic_write(p.curves() / "model_samples.csv", samples_csv(terminal_states(batch)));
        std::string traj = "sample,t" + coord_header(model.model.state_dim()) + "\n";
        for (int i = 0; i < std::min<int>(n_traj, n); ++i)
            for (int k = 0; k <= batch[i].n_steps(); ++k)
                traj += std::to_string(i) + "," + format_double(batch[i].times[k]) + vec_cells(batch[i].states[k]) + "\n";
        io::atomic_write(p.curves() / "trajectories.csv", traj);
    }
    out << "wrote plot data under " << p.curves().string() << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"flowctl: flow-matching pretraining and adjoint-matching fine-tuning on toy tasks", "flowctl"};
    app.set_version_flag("--version", std::string("flowctl ") + kToolVersion);
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (overrides FLOWCTL_THREADS)")->check(CLI::PositiveNumber);

    std::string config, base, ckpt, outdir, kind = "rp", p_list = "2,4,6", T_list = "1,5", eta_list = "0.5,1,2",
                                            out_path;
    double sigma = 5.0, mu = 0.0;
    int n_points = 1001, n_samples = 1000, n_traj = 16;
    bool dump = false;

    auto* pre = app.add_subcommand("pretrain", "flow-matching pretraining on the configured data");
    pre->add_option("--config", config, "run config file")->required()->check(CLI::ExistingFile);
    pre->add_option("--out", outdir, "output directory (default: outdir key)");

    auto* fin = app.add_subcommand("finetune", "reward fine-tuning of a base checkpoint");
    fin->add_option("--config", config, "run config file")->required()->check(CLI::ExistingFile);
    fin->add_option("--base", base, "base checkpoint")->required()->check(CLI::ExistingFile);
    fin->add_option("--out", outdir, "output directory (default: outdir key)");

    auto* ev = app.add_subcommand("eval", "compare a checkpoint against a base checkpoint");
    ev->add_option("--config", config, "run config file")->required()->check(CLI::ExistingFile);
    ev->add_option("--ckpt", ckpt, "checkpoint to evaluate")->required()->check(CLI::ExistingFile);
    ev->add_option("--base", base, "reference checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", outdir, "output directory (default: outdir key)");
    ev->add_flag("--dump-samples", dump, "also write curves/eval_samples.csv");

    auto* orc = app.add_subcommand("oracle", "closed-form control-strength curves as CSV");
    orc->add_option("--kind", kind, "rp (relative strength R_p) | toy (VE/VP control component)")
        ->check(CLI::IsMember({"rp", "toy"}));
    orc->add_option("--sigma", sigma, "std of X_0 for --kind rp");
    orc->add_option("--mu", mu, "mean of X_0 for --kind rp");
    orc->add_option("--p", p_list, "comma-separated orders for --kind rp");
    orc->add_option("--T", T_list, "comma-separated horizons for --kind toy");
    orc->add_option("--eta", eta_list, "comma-separated eta values for --kind toy");
    orc->add_option("--n", n_points, "grid points per curve");
    orc->add_option("--out", out_path, "write to file instead of stdout");

    auto* plot = app.add_subcommand("plot-data", "sample dumps for external plotting");
    plot->add_option("--config", config, "run config file")->required()->check(CLI::ExistingFile);
    plot->add_option("--ckpt", ckpt, "model checkpoint to sample")->check(CLI::ExistingFile);
    plot->add_option("--out", outdir, "output directory (default: outdir key)");
    plot->add_option("--n", n_samples, "number of samples")->check(CLI::PositiveNumber);
    plot->add_option("--trajectories", n_traj, "number of full trajectories to dump");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitInvalid;
    }
    if (threads > 0) set_worker_count(threads);

    try {
        if (*pre) return cmd_pretrain(config, outdir, out);
        if (*fin) return cmd_finetune(config, base, outdir, out);
        if (*ev) return cmd_eval(config, ckpt, base, outdir, dump, out);
        if (*orc) return cmd_oracle(kind, mu, sigma, p_list, T_list, eta_list, n_points, out_path, out);
        if (*plot) return cmd_plot_data(config, ckpt, outdir, n_samples, n_traj, out);
    } catch (const ValidationError& e) {
        err << "invalid configuration:\n";
        for (const auto& v : e.violations()) err << "  " << v << "\n";
        return kExitInvalid;
    } catch (const NonFiniteError& e) {
        err << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const SingularityError& e) {
        err << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
    return kExitInvalid;
}

}  // namespace flowam
