#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "levynbe/deepsets.hpp"
#include "levynbe/error.hpp"

namespace levynbe {

// Estimator artifact: one line of JSON (architecture envelope plus hex
// weight blocks), then a trailing "crc32:<8 hex>" line covering the JSON
// bytes. Weights are stored as the IEEE-754 bit patterns of float64, so a
// round trip is bit-exact.
inline constexpr int artifact_format_version = 1;

namespace detail {

inline std::string to_hex(const double* p, std::size_t n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(16 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(p[i]);
        for (int s = 60; s >= 0; s -= 4) out.push_back(digits[(bits >> s) & 0xF]);
    }
    return out;
}

inline std::vector<double> from_hex(const std::string& s) {
    if (s.size() % 16 != 0) throw CorruptArtifact("weight block length is not a multiple of 16 hex digits");
    std::vector<double> out(s.size() / 16);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t c = 0; c < 16; ++c) {
            const char ch = s[16 * i + c];
            int v;
            if (ch >= '0' && ch <= '9') v = ch - '0';
            else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
            else throw CorruptArtifact("invalid hex digit in weight block");
            bits = (bits << 4) | static_cast<std::uint64_t>(v);
        }
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

inline std::uint32_t crc32_of(const std::string& s) {
    return static_cast<std::uint32_t>(
        ::crc32(::crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Weight matrices are stored row-major (out x in).
inline nlohmann::json net_blocks(const DenseNet& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const RowMajorMatrix w = net.weights()[l];
        layers.push_back({{"W", to_hex(w.data(), static_cast<std::size_t>(w.size()))},
                          {"b", to_hex(net.biases()[l].data(), static_cast<std::size_t>(net.biases()[l].size()))}});
    }
    return layers;
}

inline DenseNet net_from_json(const std::vector<int>& dims, Activation act, bool activate_output,
                              const nlohmann::json& blocks) {
    DenseNet net(dims, act, activate_output);
    if (!blocks.is_array() || blocks.size() != net.layer_count())
        throw CorruptArtifact("weight block count does not match layer_dims");
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto w = from_hex(blocks[l].at("W").get<std::string>());
        const auto b = from_hex(blocks[l].at("b").get<std::string>());
        if (w.size() != static_cast<std::size_t>(net.weights()[l].size()) ||
            b.size() != static_cast<std::size_t>(net.biases()[l].size()))
            throw CorruptArtifact("weight block size does not match layer_dims");
        net.weights()[l] = Eigen::Map<const RowMajorMatrix>(w.data(), net.weights()[l].rows(), net.weights()[l].cols());
        std::copy(b.begin(), b.end(), net.biases()[l].data());
    }
    return net;
}

}  // namespace detail

// Optional descriptive fields carried alongside the weights.
struct ArtifactInfo {
    std::string loss;  // e.g. "msle" or "linlin:0.05"
};

inline std::string serialize_estimator(const DeepSetsEstimator& est, const ArtifactInfo& info = {}) {
    const auto& box = est.output_box();
    nlohmann::json j;
    j["format_version"] = artifact_format_version;
    j["model"] = est.model().to_string();
    j["prior"] = {{"lower", box.lower()}, {"upper", box.upper()}};
    j["input_len"] = est.input_len();
    j["aggregation"] = to_string(est.aggregation());
    j["activation"] = to_string(est.summary().activation());
    j["layer_dims"] = {{"summary", est.summary().layer_dims()}, {"inference", est.inference().layer_dims()}};
    j["weights"] = {{"summary", detail::net_blocks(est.summary())}, {"inference", detail::net_blocks(est.inference())}};
    if (!info.loss.empty()) j["loss"] = info.loss;
    const std::string body = j.dump();
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", detail::crc32_of(body));
    return body + "\ncrc32:" + crc + "\n";
}

struct LoadedEstimator {
    DeepSetsEstimator estimator;
    ArtifactInfo info;
};

inline LoadedEstimator deserialize_estimator(const std::string& text) {
    const auto nl = text.find('\n');
    if (nl == std::string::npos) throw CorruptArtifact("artifact truncated: missing checksum line");
    const std::string body = text.substr(0, nl);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptArtifact(std::string("artifact JSON unreadable: ") + e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != artifact_format_version) throw FormatVersionMismatch(artifact_format_version, version);

        std::string tail = text.substr(nl + 1);
        while (!tail.empty() && (tail.back() == '\n' || tail.back() == '\r')) tail.pop_back();
        char crc[16];
        std::snprintf(crc, sizeof crc, "%08x", detail::crc32_of(body));
        if (tail != std::string("crc32:") + crc) throw CorruptArtifact("artifact checksum mismatch");

        const ModelSpec model = ModelSpec::parse(j.at("model").get<std::string>());
        PriorBox box(model, j.at("prior").at("lower").get<std::vector<double>>(),
                     j.at("prior").at("upper").get<std::vector<double>>());
        const Activation act = parse_activation(j.at("activation").get<std::string>());
        const auto sdims = j.at("layer_dims").at("summary").get<std::vector<int>>();
        const auto idims = j.at("layer_dims").at("inference").get<std::vector<int>>();
        DenseNet summary = detail::net_from_json(sdims, act, true, j.at("weights").at("summary"));
        DenseNet inference = detail::net_from_json(idims, act, false, j.at("weights").at("inference"));
        LoadedEstimator out{DeepSetsEstimator(std::move(summary), parse_aggregation(j.at("aggregation").get<std::string>()),
                                              std::move(inference), std::move(box), j.at("input_len").get<std::size_t>()),
                            {}};
        if (j.contains("loss")) out.info.loss = j.at("loss").get<std::string>();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptArtifact(std::string("artifact fields malformed: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw CorruptArtifact(std::string("artifact describes an invalid estimator: ") + e.what());
    }
}

inline void save(const DeepSetsEstimator& est, const std::filesystem::path& path, const ArtifactInfo& info = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << serialize_estimator(est, info);
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline LoadedEstimator load_with_info(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open artifact '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_estimator(ss.str());
}

inline DeepSetsEstimator load(const std::filesystem::path& path) { return load_with_info(path).estimator; }

}  // namespace levynbe
