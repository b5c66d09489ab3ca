#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqflow/error.hpp"
#include "freqflow/field.hpp"
#include "freqflow/synthetic.hpp"
#include "freqflow/util.hpp"

namespace freqflow {

// ---------------------------------------------------------------------------
// Little-endian primitives. Byte order is spelled out by hand so files are
// identical on any host.

inline void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32_le(std::string& out, float v) {
    put_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float get_f32_le(const unsigned char* p) {
    return std::bit_cast<float>(get_u32_le(p));
}

// ---------------------------------------------------------------------------
// Whole-file helpers.

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string() + " for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw io_error("read failure on " + path.string());
    return std::move(buf).str();
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw io_error("write failure on " + path.string());
}

// ---------------------------------------------------------------------------
// FBF1 field files: magic "FBF1", u32 H, u32 W, u32 C (little-endian), then
// H*W*C f32 values row-major with channels innermost.

inline constexpr char kFieldMagic[4] = {0x46, 0x42, 0x46, 0x31};
inline constexpr std::size_t kFieldHeaderBytes = 16;

inline std::string field_to_bytes(const Field& f) {
    validate_field(f);
    std::string out;
    out.reserve(kFieldHeaderBytes + f.data.size() * 4);
    out.append(kFieldMagic, 4);
    put_u32_le(out, static_cast<std::uint32_t>(f.height));
    put_u32_le(out, static_cast<std::uint32_t>(f.width));
    put_u32_le(out, static_cast<std::uint32_t>(f.channels));
    for (double v : f.data) {
        const float s = static_cast<float>(v);
        if (!std::isfinite(s))
            throw invalid_input("field value " + format_double(v) +
                                " is out of range for 32-bit storage");
        put_f32_le(out, s);
    }
    return out;
}

inline Field field_from_bytes(std::string_view bytes, const std::string& origin) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kFieldMagic, 4) != 0)
        throw format_error(origin + ": bad magic, not an FBF1 field file", 0);
    if (bytes.size() < kFieldHeaderBytes)
        throw format_error(origin + ": truncated header, expected 16 bytes, got " +
                               std::to_string(bytes.size()),
                           bytes.size());
    const std::uint32_t h = get_u32_le(p + 4);
    const std::uint32_t w = get_u32_le(p + 8);
    const std::uint32_t c = get_u32_le(p + 12);
    if (h < 4 || h % 2 != 0 || h > (1u << 20))
        throw format_error(origin + ": height " + std::to_string(h) + " must be even and >= 4", 4);
    if (w < 4 || w % 2 != 0 || w > (1u << 20))
        throw format_error(origin + ": width " + std::to_string(w) + " must be even and >= 4", 8);
    if (c < 1 || c > (1u << 16))
        throw format_error(origin + ": channel count " + std::to_string(c) + " must be >= 1", 12);
    const std::uint64_t n = static_cast<std::uint64_t>(h) * w * c;
    if (n > (1u << 28))
        throw format_error(origin + ": field of " + std::to_string(n) + " values is too large", 4);
    const std::uint64_t expected = n * 4;
    const std::uint64_t got = bytes.size() - kFieldHeaderBytes;
    if (got < expected)
        throw format_error(origin + ": truncated payload, expected " + std::to_string(expected) +
                               " bytes, got " + std::to_string(got),
                           bytes.size());
    if (got > expected)
        throw format_error(origin + ": trailing data after payload, expected " +
                               std::to_string(expected) + " bytes, got " + std::to_string(got),
                           kFieldHeaderBytes + expected);

    Field f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    for (std::uint64_t i = 0; i < n; ++i) {
        const float v = get_f32_le(p + kFieldHeaderBytes + i * 4);
        if (!std::isfinite(v))
            throw format_error(origin + ": non-finite value at element " + std::to_string(i),
                               kFieldHeaderBytes + i * 4);
        f.data[i] = static_cast<double>(v);
    }
    return f;
}

inline void write_field(const std::filesystem::path& path, const Field& f) {
    write_file_bytes(path, field_to_bytes(f));
}

inline Field read_field(const std::filesystem::path& path) {
    return field_from_bytes(read_file_bytes(path), path.string());
}

// ---------------------------------------------------------------------------
// Generator config <-> JSON.

inline nlohmann::json synth_config_to_json(const SyntheticConfig& cfg) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : cfg.terms) {
        terms.push_back({{"amplitude", t.amplitude},
                         {"frequency", t.frequency},
                         {"angle", t.angle},
                         {"phase", t.phase}});
    }
    return {{"grid_size", cfg.grid_size},
            {"plume_amplitude", cfg.plume_amplitude},
            {"base_y", cfg.base_y},
            {"rise_speed", cfg.rise_speed},
            {"perturbation_scale", cfg.perturbation_scale},
            {"terms", std::move(terms)},
            {"seed", cfg.seed}};
}

inline SyntheticConfig synth_config_from_json(const nlohmann::json& j, const std::string& origin) {
    try {
        SyntheticConfig cfg;
        cfg.grid_size = j.at("grid_size").get<int>();
        cfg.plume_amplitude = j.at("plume_amplitude").get<double>();
        cfg.base_y = j.at("base_y").get<double>();
        cfg.rise_speed = j.at("rise_speed").get<double>();
        cfg.perturbation_scale = j.at("perturbation_scale").get<double>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& tj : j.at("terms")) {
            PerturbationTerm t;
            t.amplitude = tj.at("amplitude").get<double>();
            t.frequency = tj.at("frequency").get<double>();
            t.angle = tj.at("angle").get<double>();
            t.phase = tj.at("phase").get<double>();
            cfg.terms.push_back(t);
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(origin + ": bad generator config: " + e.what(), 0);
    }
}

// Stable fingerprint of a generator config (seed excluded, so the same
// physics generated under different seeds shares a hash).
inline std::string config_hash(const SyntheticConfig& cfg) {
    nlohmann::json j = synth_config_to_json(cfg);
    j.erase("seed");
    return to_hex(fnv1a64(j.dump()));
}

// ---------------------------------------------------------------------------
// Dataset directory: manifest.json + one FBF1 file per sample.

inline std::string sample_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%05zu.fbf", index);
    return buf;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    if (ds.fields.size() != ds.params.size())
        throw invalid_input("dataset has " + std::to_string(ds.fields.size()) + " fields but " +
                            std::to_string(ds.params.size()) + " parameter vectors");
    if (ds.fields.empty()) throw invalid_input("refusing to write an empty dataset");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory " + dir.string() + ": " + ec.message());

    nlohmann::json params = nlohmann::json::array();
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.fields.size(); ++i) {
        const std::string name = sample_file_name(i);
        write_field(dir / name, ds.fields[i]);
        params.push_back(ds.params[i].values);
        files.push_back(name);
    }
    nlohmann::json manifest = {{"grid_size", ds.height()},
                               {"channels", ds.channels()},
                               {"count", ds.count()},
                               {"seed", ds.seed},
                               {"config", synth_config_to_json(ds.config)},
                               {"config_hash", config_hash(ds.config)},
                               {"params", std::move(params)},
                               {"files", std::move(files)}};
    write_file_bytes(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    const std::filesystem::path mpath = dir / "manifest.json";
    const std::string text = read_file_bytes(mpath);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error(mpath.string() + ": " + e.what(), e.byte);
    }

    Dataset ds;
    std::vector<std::string> files;
    try {
        ds.config = synth_config_from_json(j.at("config"), mpath.string());
        ds.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& pj : j.at("params")) {
            ParamVector c;
            c.values = pj.get<std::vector<double>>();
            ds.params.push_back(std::move(c));
        }
        files = j.at("files").get<std::vector<std::string>>();
        const auto count = j.at("count").get<std::size_t>();
        if (files.size() != count || ds.params.size() != count)
            throw format_error(mpath.string() + ": count " + std::to_string(count) +
                                   " does not match " + std::to_string(files.size()) +
                                   " files / " + std::to_string(ds.params.size()) + " params",
                               0);
        const auto grid = j.at("grid_size").get<int>();
        const auto channels = j.at("channels").get<int>();
        ds.fields.reserve(files.size());
        for (const auto& name : files) {
            Field f = read_field(dir / name);
            if (f.height != grid || f.width != grid || f.channels != channels)
                throw format_error(mpath.string() + ": " + name + " has shape " +
                                       std::to_string(f.height) + "x" + std::to_string(f.width) +
                                       "x" + std::to_string(f.channels) +
                                       ", manifest says " + std::to_string(grid) + "x" +
                                       std::to_string(grid) + "x" + std::to_string(channels),
                                   0);
            ds.fields.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error(mpath.string() + ": " + e.what(), 0);
    }
    return ds;
}

}  // namespace freqflow
