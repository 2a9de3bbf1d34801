#include "flowam/eval.hpp"

#include "flowam/errors.hpp"
#include "flowam/io.hpp"

#include <algorithm>
#include <cmath>

namespace flowam {

double diversity_mpd(const std::vector<Vec>& samples) {
    const std::size_t n = samples.size();
    if (n < 2) throw TooFewSamples("diversity_mpd: need at least 2 samples");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) sum += (samples[i] - samples[j]).norm();
    return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw EmptyInput("wasserstein1_1d: empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a.size() == b.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
        return s / static_cast<double>(a.size());
    }
    // Sweep the merged support; between consecutive breakpoints both CDFs are constant.
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double prev = std::min(a.front(), b.front()), total = 0.0;
    while (i < a.size() || j < b.size()) {
        const double next = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        total += std::abs(i / na - j / nb) * (next - prev);
        while (i < a.size() && a[i] == next) ++i;
        while (j < b.size() && b[j] == next) ++j;
        prev = next;
    }
    return total;
}

double wasserstein1_1d(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    std::vector<double> xa, xb;
    xa.reserve(a.size());
    xb.reserve(b.size());
    for (const auto& v : a) xa.push_back(v(0));
    for (const auto& v : b) xb.push_back(v(0));
    return wasserstein1_1d(std::move(xa), std::move(xb));
}

namespace {

double mean_cross_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double s = 0.0;
    for (const auto& x : a)
        for (const auto& y : b) s += (x - y).norm();
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// Distance from each point to its k-th nearest neighbour in the same set.
std::vector<double> knn_radii(const std::vector<Vec>& pts, int k) {
    const std::size_t n = pts.size();
    std::vector<double> radii(n), d(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d[c++] = (pts[i] - pts[j]).norm();
        std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
        radii[i] = d[k - 1];
    }
    return radii;
}

}  // namespace

double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || b.empty()) throw EmptyInput("energy_distance: empty sample set");
    const double e = 2.0 * mean_cross_distance(a, b) - mean_cross_distance(a, a) - mean_cross_distance(b, b);
    return std::max(0.0, e);
}

KnnMetrics knn_coverage_recall(const std::vector<Vec>& gen, const std::vector<Vec>& ref, int k) {
    if (k < 1) throw ConfigError("knn: k must be >= 1");
    const std::size_t need = static_cast<std::size_t>(k) + 1;
    if (gen.size() < need || ref.size() < need)
        throw TooFewSamples("knn: both sets need at least k+1 = " + std::to_string(need) + " points");
    const auto gen_r = knn_radii(gen, k);
    const auto ref_r = knn_radii(ref, k);
    std::size_t recalled = 0, covered = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        bool in_gen_ball = false, ball_hit = false;
        for (std::size_t j = 0; j < gen.size() && !(in_gen_ball && ball_hit); ++j) {
            const double d = (ref[i] - gen[j]).norm();
            in_gen_ball = in_gen_ball || d <= gen_r[j];
            ball_hit = ball_hit || d <= ref_r[i];
        }
        recalled += in_gen_ball;
        covered += ball_hit;
    }
    const double n = static_cast<double>(ref.size());
    return {covered / n, recalled / n};
}

RewardStats reward_stats(const RewardFn& reward, const std::vector<Vec>& xs) {
    if (xs.empty()) throw EmptyInput("reward_stats: empty sample set");
    double s = 0.0, s2 = 0.0;
    for (const auto& x : xs) {
        const double r = reward.value(x);
        s += r;
        s2 += r * r;
    }
    const double n = static_cast<double>(xs.size());
    const double mean = s / n;
    return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean))};
}

std::vector<Vec> terminal_states(const std::vector<Trajectory>& batch) {
    std::vector<Vec> out;
    out.reserve(batch.size());
    for (const auto& tr : batch) out.push_back(tr.terminal());
    return out;
}

EvalReport evaluate(const VectorField& model, const VectorField& base, const RewardFn& reward,
                    const EvalOptions& opts) {
    if (model.state_dim() != base.state_dim()) throw ShapeError("evaluate: models have different state dimensions");
    const auto gen = terminal_states(sample_batch(model, opts.sampler, opts.n_samples, opts.seed));
    const auto ref = terminal_states(sample_batch(base, opts.sampler, opts.n_samples, opts.seed));
    const auto& dist_ref = opts.reference ? *opts.reference : ref;

    EvalReport r;
    const auto rs = reward_stats(reward, gen);
    r.reward_mean = rs.mean;
    r.reward_std = rs.std;
    r.base_reward_mean = reward_stats(reward, ref).mean;
    r.diversity_mpd = diversity_mpd(gen);
    if (model.state_dim() == 1) {
        r.distance_kind = "w1_1d";
        r.distance = wasserstein1_1d(gen, dist_ref);
    } else {
        r.distance_kind = "energy_2d";
        r.distance = energy_distance(gen, dist_ref);
    }
    const auto knn = knn_coverage_recall(gen, ref, opts.knn_k);
    r.coverage = knn.coverage;
    r.recall = knn.recall;
    r.n_samples = opts.n_samples;
    r.seed = opts.seed;
    return r;
}

std::string eval_csv_header() {
    return "reward_mean,reward_std,base_reward_mean,diversity_mpd,distance_kind,distance,coverage,recall,n_samples,"
           "seed\n";
}

std::string eval_csv_row(const EvalReport& r) {
    using io::format_double;
    return format_double(r.reward_mean) + "," + format_double(r.reward_std) + "," +
           format_double(r.base_reward_mean) + "," + format_double(r.diversity_mpd) + "," + r.distance_kind + "," +
           format_double(r.distance) + "," + format_double(r.coverage) + "," + format_double(r.recall) + "," +
           std::to_string(r.n_samples) + "," + std::to_string(r.seed) + "\n";
}

}  // namespace flowam
