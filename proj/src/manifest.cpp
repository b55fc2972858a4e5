#include "pumpwatch/manifest.hpp"

#include <json.hpp>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"

namespace pumpwatch {

void write_manifest(const std::string& path, const Manifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["version"] = m.version;
    j["config"] = m.config;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    write_file(path, j.dump(2) + "\n");
}

Manifest read_manifest(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("manifest " + path + ": " + e.what());
    }
    Manifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.config = j.at("config").get<std::map<std::string, std::string>>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = j.at("outputs").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("manifest " + path + ": missing or mistyped field: " + e.what());
    }
    return m;
}

}  // namespace pumpwatch
