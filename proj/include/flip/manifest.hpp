#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "flip/error.hpp"
#include "flip/util.hpp"

namespace flip {

// Record of one CLI run: the full effective configuration, the root seed,
// input files with a content hash, and every produced artifact. Re-running
// from a manifest reproduces the run's metric/log files bit for bit (the
// timestamp lives only here, never inside artifacts).
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::uint64_t root_seed = 0;
    std::vector<std::string> inputs;
    std::string input_hash;
    std::vector<std::string> outputs;
    std::string created_at;
};

inline std::string hash_files(const std::vector<std::string>& paths) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : paths) {
        h = fnv1a64(p.data(), p.size(), h);
        const std::string content = read_file(p);
        h = fnv1a64(content.data(), content.size(), h);
    }
    return "fnv64:" + hex64(h);
}

inline std::string now_utc_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string encode_manifest(const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["root_seed"] = m.root_seed;
    j["inputs"] = m.inputs;
    j["input_hash"] = m.input_hash;
    j["outputs"] = m.outputs;
    j["created_at"] = m.created_at;
    return j.dump(2) + "\n";
}

inline RunManifest decode_manifest(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config").get<std::map<std::string, std::string>>();
        m.root_seed = j.at("root_seed").get<std::uint64_t>();
        m.inputs = j.at("inputs").get<std::vector<std::string>>();
        m.input_hash = j.at("input_hash").get<std::string>();
        m.outputs = j.at("outputs").get<std::vector<std::string>>();
        m.created_at = j.at("created_at").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

inline void save_manifest(const std::string& path, const RunManifest& m) {
    write_file(path, encode_manifest(m));
}

inline RunManifest load_manifest(const std::string& path) { return decode_manifest(read_file(path)); }

}  // namespace flip
