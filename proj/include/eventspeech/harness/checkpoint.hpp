#pragma once

#include "eventspeech/harness/config.hpp"
#include "eventspeech/nn/optim.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace evsp::harness {

// binary archive: magic, version, manifest JSON (config hash, step, metric
// snapshot, RNG state), named parameter tensors, optional optimizer moments
struct Checkpoint {
    std::uint64_t config_hash = 0;
    long step = 0;
    nlohmann::json metrics = nlohmann::json::object();
    std::string rng_state;
    std::vector<std::pair<std::string, Mat>> params;
    std::vector<Mat> opt_m, opt_v;
    long opt_t = 0;
    bool has_optimizer = false;
};

namespace detail {

inline void put_u32f(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u64f(std::ofstream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint32_t get_u32f(std::ifstream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline std::uint64_t get_u64f(std::ifstream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

inline void put_mat(std::ofstream& f, const Mat& m) {
    put_u64f(f, static_cast<std::uint64_t>(m.rows()));
    put_u64f(f, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            f.write(reinterpret_cast<const char*>(&v), 8);
        }
}

inline Mat get_mat(std::ifstream& f) {
    const auto rows = static_cast<Eigen::Index>(get_u64f(f));
    const auto cols = static_cast<Eigen::Index>(get_u64f(f));
    if (rows < 0 || cols < 0 || rows > (1 << 24) || cols > (1 << 24))
        throw std::runtime_error("checkpoint: implausible tensor shape");
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            double v = 0;
            f.read(reinterpret_cast<char*>(&v), 8);
            m(r, c) = v;
        }
    return m;
}

} // namespace detail

inline constexpr char checkpoint_magic[4] = {'E', 'V', 'C', 'K'};
inline constexpr std::uint16_t checkpoint_version = 1;

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    namespace fs = std::filesystem;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("checkpoint: cannot write " + tmp);
        f.write(checkpoint_magic, 4);
        f.write(reinterpret_cast<const char*>(&checkpoint_version), 2);

        nlohmann::json manifest;
        manifest["config_hash"] = ck.config_hash;
        manifest["step"] = ck.step;
        manifest["metrics"] = ck.metrics;
        manifest["rng_state"] = ck.rng_state;
        manifest["optimizer_t"] = ck.opt_t;
        manifest["has_optimizer"] = ck.has_optimizer;
        const std::string mtext = manifest.dump();
        detail::put_u32f(f, static_cast<std::uint32_t>(mtext.size()));
        f.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));

        detail::put_u32f(f, static_cast<std::uint32_t>(ck.params.size()));
        for (const auto& [name, m] : ck.params) {
            detail::put_u32f(f, static_cast<std::uint32_t>(name.size()));
            f.write(name.data(), static_cast<std::streamsize>(name.size()));
            detail::put_mat(f, m);
        }
        if (ck.has_optimizer) {
            if (ck.opt_m.size() != ck.params.size() || ck.opt_v.size() != ck.params.size())
                throw std::runtime_error("checkpoint: optimizer moment count mismatch");
            for (const auto& m : ck.opt_m) detail::put_mat(f, m);
            for (const auto& v : ck.opt_v) detail::put_mat(f, v);
        }
        if (!f) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    fs::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, checkpoint_magic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint16_t version = 0;
    f.read(reinterpret_cast<char*>(&version), 2);
    if (version != checkpoint_version) throw std::runtime_error("checkpoint: unsupported version");

    const auto mlen = detail::get_u32f(f);
    std::string mtext(mlen, '\0');
    f.read(mtext.data(), mlen);
    if (!f) throw std::runtime_error("checkpoint: truncated manifest in " + path);
    const nlohmann::json manifest = nlohmann::json::parse(mtext);

    Checkpoint ck;
    ck.config_hash = manifest.at("config_hash").get<std::uint64_t>();
    ck.step = manifest.at("step").get<long>();
    ck.metrics = manifest.at("metrics");
    ck.rng_state = manifest.at("rng_state").get<std::string>();
    ck.opt_t = manifest.at("optimizer_t").get<long>();
    ck.has_optimizer = manifest.at("has_optimizer").get<bool>();

    const auto n = detail::get_u32f(f);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto nlen = detail::get_u32f(f);
        std::string name(nlen, '\0');
        f.read(name.data(), nlen);
        ck.params.emplace_back(std::move(name), detail::get_mat(f));
    }
    if (ck.has_optimizer) {
        for (std::uint32_t i = 0; i < n; ++i) ck.opt_m.push_back(detail::get_mat(f));
        for (std::uint32_t i = 0; i < n; ++i) ck.opt_v.push_back(detail::get_mat(f));
    }
    if (!f) throw std::runtime_error("checkpoint: truncated data in " + path);
    return ck;
}

inline std::string serialize_rng(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline Rng deserialize_rng(const std::string& state) {
    Rng rng;
    std::istringstream is(state);
    is >> rng;
    if (!is) throw std::runtime_error("checkpoint: bad RNG state");
    return rng;
}

inline Checkpoint snapshot(const nn::ParamMap& pm, const nn::AdamW* opt, std::uint64_t hash, long step,
                           const Rng& rng, nlohmann::json metrics = nlohmann::json::object()) {
    Checkpoint ck;
    ck.config_hash = hash;
    ck.step = step;
    ck.metrics = std::move(metrics);
    ck.rng_state = serialize_rng(rng);
    for (const auto& [name, v] : pm.items) ck.params.emplace_back(name, v->val);
    if (opt) {
        ck.has_optimizer = true;
        ck.opt_t = opt->t;
        ck.opt_m = opt->m;
        ck.opt_v = opt->v;
    }
    return ck;
}

inline void check_config_hash(const Checkpoint& ck, const Config& cfg, bool force) {
    if (ck.config_hash != config_hash(cfg) && !force)
        throw std::runtime_error(
            "checkpoint: config hash mismatch (checkpoint " + std::to_string(ck.config_hash) +
            ", current " + std::to_string(config_hash(cfg)) + "); pass --force to override");
}

inline void restore_params(const Checkpoint& ck, nn::ParamMap& pm) {
    if (ck.params.size() != pm.items.size())
        throw std::runtime_error("checkpoint: parameter count mismatch (" + std::to_string(ck.params.size()) +
                                 " stored, " + std::to_string(pm.items.size()) + " in model)");
    for (size_t i = 0; i < pm.items.size(); ++i) {
        const auto& [name, stored] = ck.params[i];
        auto& [want, var] = pm.items[i];
        if (name != want) throw std::runtime_error("checkpoint: parameter name mismatch at " + want);
        if (stored.rows() != var->val.rows() || stored.cols() != var->val.cols())
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        var->val = stored;
    }
}

inline void restore_optimizer(const Checkpoint& ck, nn::AdamW& opt) {
    if (!ck.has_optimizer) throw std::runtime_error("checkpoint: no optimizer state stored");
    opt.m = ck.opt_m;
    opt.v = ck.opt_v;
    opt.t = ck.opt_t;
}

} // namespace evsp::harness
