#pragma once

#include "flowam/dynamics.hpp"
#include "flowam/field.hpp"
#include "flowam/tasks.hpp"
#include "flowam/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowam {

// Mean Euclidean distance over unordered pairs. TooFewSamples below 2 points.
double diversity_mpd(const std::vector<Vec>& samples);

// Exact W1 between the empirical laws of two 1D sample sets: the integral of |F_a - F_b|.
// For equal sizes this is the mean absolute difference of the sorted samples. EmptyInput if either is empty.
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);
double wasserstein1_1d(const std::vector<Vec>& a, const std::vector<Vec>& b);  // first coordinate

// Energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (V-statistic), >= 0.
double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b);

struct KnnMetrics {
    double coverage = 0.0;
    double recall = 0.0;
};
// Radii are distances to the k-th nearest neighbour within each set (self excluded); balls are closed.
//   recall:   fraction of reference points inside some generated point's ball
//   coverage: fraction of reference points whose own ball contains a generated point
// TooFewSamples unless both sets have at least k+1 points.
KnnMetrics knn_coverage_recall(const std::vector<Vec>& gen, const std::vector<Vec>& ref, int k = 5);

struct EvalReport {
    double reward_mean = 0.0;
    double reward_std = 0.0;
    double base_reward_mean = 0.0;
    double diversity_mpd = 0.0;
    std::string distance_kind;  // "w1_1d" or "energy_2d"
    double distance = 0.0;
    double coverage = 0.0;
    double recall = 0.0;
    int n_samples = 0;
    std::uint64_t seed = 0;
};

struct EvalOptions {
    int n_samples = 2000;
    std::uint64_t seed = 12345;
    SamplerSpec sampler;  // ODE by default
    int knn_k = 5;
    // Distance reference; the base model's samples when empty.
    std::optional<std::vector<Vec>> reference;
};

struct RewardStats {
    double mean = 0.0;
    double std = 0.0;
};
RewardStats reward_stats(const RewardFn& reward, const std::vector<Vec>& xs);

std::vector<Vec> terminal_states(const std::vector<Trajectory>& batch);

// Samples both models with the same seed and fills every field.
EvalReport evaluate(const VectorField& model, const VectorField& base, const RewardFn& reward,
                    const EvalOptions& opts);

// CSV header and row for an EvalReport.
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& r);

}  // namespace flowam
