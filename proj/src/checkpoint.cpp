#include "flowam/checkpoint.hpp"

#include "flowam/errors.hpp"
#include "flowam/io.hpp"

#include <nlohmann/json.hpp>

namespace flowam {

std::string serialize_checkpoint(const VelocityField& model, const CheckpointMeta& meta) {
    const auto& a = model.architecture();
    nlohmann::ordered_json header = {
        {"format", "flowam-ckpt"},
        {"format_version", kCheckpointVersion},
        {"architecture",
         {{"state_dim", a.state_dim},
          {"hidden", a.hidden},
          {"activation", activation_key(a.activation)},
          {"time_features", a.time_features},
          {"n_cond", a.n_cond}}},
        {"n_params", model.num_params()},
        {"seed", meta.seed},
        {"iteration", meta.iteration},
        {"labels", meta.labels},
    };
    std::string out = header.dump() + "\n";
    const ParamVector p = model.parameters();
    io::append_le_doubles(out, std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
    const auto nl = bytes.find('\n');
    if (nl == std::string_view::npos) throw IoError("checkpoint: missing header line");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: malformed header: ") + e.what());
    }
    if (h.value("format", "") != "flowam-ckpt") throw IoError("checkpoint: not a flowam checkpoint");
    if (h.value("format_version", -1) != kCheckpointVersion)
        throw IoError("checkpoint: unsupported format_version " + h.value("format_version", nlohmann::json()).dump());
    try {
        const auto& ja = h.at("architecture");
        Architecture arch;
        arch.state_dim = ja.at("state_dim").get<int>();
        arch.hidden = ja.at("hidden").get<std::vector<int>>();
        arch.activation = activation_from_key(ja.at("activation").get<std::string>());
        arch.time_features = ja.at("time_features").get<int>();
        arch.n_cond = ja.at("n_cond").get<int>();
        VelocityField model = VelocityField::zeros(arch);
        const auto n = h.at("n_params").get<std::int64_t>();
        if (n != model.num_params()) throw IoError("checkpoint: n_params does not match the architecture");
        const auto flat = io::parse_le_doubles(bytes.substr(nl + 1), static_cast<std::size_t>(n));
        model.set_parameters(Eigen::Map<const Vec>(flat.data(), n));
        CheckpointMeta meta;
        meta.seed = h.at("seed").get<std::uint64_t>();
        meta.iteration = h.at("iteration").get<int>();
        meta.labels = h.at("labels").get<std::vector<std::string>>();
        return {std::move(model), std::move(meta)};
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: bad header field: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const VelocityField& model, const CheckpointMeta& meta) {
    io::atomic_write(path, serialize_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return parse_checkpoint(io::read_file(path));
    } catch (const NonFiniteError& e) {
        throw NonFiniteError(path.string() + ": " + e.what());
    }
}

}  // namespace flowam
