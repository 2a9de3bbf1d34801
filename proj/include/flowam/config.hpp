#pragma once

#include "flowam/eval.hpp"
#include "flowam/nnet.hpp"
#include "flowam/tasks.hpp"
#include "flowam/train.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace flowam {

inline constexpr const char* kToolVersion = "0.1.0";

struct EvalSettings {
    int n_eval = 2000;
    std::uint64_t seed = 12345;
    int knn_k = 5;
    bool stochastic = false;  // eval_sampler = "sde" uses the fine-tune noise schedule
};

// Everything one run needs, fully validated.
struct RunConfig {
    Architecture arch;
    PretrainConfig pretrain;
    TrainConfig train;
    EvalSettings eval;
    std::string data_key;
    std::string reward_key;
    std::optional<DataDistribution> dist;
    std::optional<RewardFn> reward;
    std::vector<std::string> labels;
    bool conditional = false;
    std::filesystem::path outdir = "run";

    std::string config_hash;  // fnv1a64 of the source text
    nlohmann::ordered_json resolved;  // every key with its effective value

    EvalOptions eval_options() const;
    const DataDistribution& data() const { return *dist; }
    const RewardFn& reward_fn() const { return *reward; }
};

// Flat "key = value" lines, values in JSON syntax (bare words are read as strings), '#' starts a comment.
// Syntax errors raise ParseError with the line number; unknown keys, wrong types and cross-field
// constraints are all collected into one ValidationError.
RunConfig parse_config_text(std::string_view text, const std::string& source = "<config>");
RunConfig parse_config(const std::filesystem::path& path);

// Re-parseable dump of the effective configuration plus provenance comments.
std::string resolved_config_text(const RunConfig& cfg);

// Documented keys and their defaults, in file order.
const nlohmann::ordered_json& config_defaults();

}  // namespace flowam
