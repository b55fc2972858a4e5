#include "pumpwatch/nn/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

#include "pumpwatch/errors.hpp"

namespace pumpwatch::nn {

namespace {

constexpr char kMagic[8] = {'P', 'W', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

void append_values(std::string& blob, const std::vector<double>& values,
                   const std::string& dtype) {
    if (dtype == "f64") {
        // x86-64 is little-endian; memcpy of the IEEE754 bytes is the format.
        std::size_t at = blob.size();
        blob.resize(at + values.size() * 8);
        std::memcpy(blob.data() + at, values.data(), values.size() * 8);
    } else if (dtype == "f32") {
        std::vector<float> f(values.begin(), values.end());
        std::size_t at = blob.size();
        blob.resize(at + f.size() * 4);
        std::memcpy(blob.data() + at, f.data(), f.size() * 4);
    } else {
        throw CheckpointError("unsupported dtype '" + dtype + "'");
    }
}

std::vector<double> read_values(const std::string& blob, std::size_t offset,
                                std::size_t count, const std::string& dtype) {
    const std::size_t width = dtype == "f64" ? 8 : 4;
    if (dtype != "f64" && dtype != "f32")
        throw CheckpointError("unsupported dtype '" + dtype + "'");
    if (offset + count * width > blob.size())
        throw CheckpointError("truncated checkpoint data section");
    std::vector<double> out(count);
    if (dtype == "f64") {
        std::memcpy(out.data(), blob.data() + offset, count * 8);
    } else {
        std::vector<float> f(count);
        std::memcpy(f.data(), blob.data() + offset, count * 4);
        std::copy(f.begin(), f.end(), out.begin());
    }
    return out;
}

struct Container {
    nlohmann::json manifest;
    std::string data;
};

void write_container(const std::string& path, const Container& c) {
    std::string json = c.manifest.dump();
    std::string out;
    out.append(kMagic, sizeof kMagic);
    put_u64(out, json.size());
    out += json;
    out += c.data;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + path);
}

Container read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (all.size() < 16 || std::memcmp(all.data(), kMagic, sizeof kMagic) != 0)
        throw CheckpointError(path + ": bad magic (not a checkpoint)");
    std::uint64_t len = get_u64(all.data() + 8);
    if (16 + len > all.size()) throw CheckpointError(path + ": truncated manifest");
    Container c;
    try {
        c.manifest = nlohmann::json::parse(all.substr(16, len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path + ": manifest parse error: " + e.what());
    }
    c.data = all.substr(16 + len);
    return c;
}

Container pack(const std::vector<std::pair<std::string, const std::vector<double>*>>& tensors,
               const std::vector<std::pair<std::int64_t, std::int64_t>>& shapes,
               const std::map<std::string, std::string>& meta, const std::string& dtype) {
    Container c;
    c.manifest["version"] = 1;
    c.manifest["meta"] = meta;
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        nlohmann::json t;
        t["name"] = tensors[i].first;
        t["rows"] = shapes[i].first;
        t["cols"] = shapes[i].second;
        t["dtype"] = dtype;
        t["offset"] = c.data.size();
        append_values(c.data, *tensors[i].second, dtype);
        arr.push_back(std::move(t));
    }
    c.manifest["tensors"] = std::move(arr);
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::map<std::string, std::string>& meta,
                     const std::string& dtype) {
    std::vector<std::pair<std::string, const std::vector<double>*>> tensors;
    std::vector<std::pair<std::int64_t, std::int64_t>> shapes;
    for (const std::string& name : params.names()) {
        Tensor t = params.get(name);
        tensors.emplace_back(name, &t.values());
        shapes.emplace_back(t.rows(), t.cols());
    }
    write_container(path, pack(tensors, shapes, meta, dtype));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    Container c = read_container(path);
    if (!c.manifest.contains("version") || c.manifest["version"].get<int>() != 1)
        throw CheckpointError(path + ": unsupported checkpoint version");
    LoadedCheckpoint out;
    for (auto& [k, v] : c.manifest["meta"].items())
        out.meta[k] = v.get<std::string>();
    for (const auto& t : c.manifest["tensors"]) {
        const auto name = t["name"].get<std::string>();
        const auto rows = t["rows"].get<std::int64_t>();
        const auto cols = t["cols"].get<std::int64_t>();
        auto values = read_values(c.data, t["offset"].get<std::size_t>(),
                                  static_cast<std::size_t>(rows * cols),
                                  t["dtype"].get<std::string>());
        out.params.add(name, rows, cols, std::move(values));
    }
    return out;
}

void save_optimizer_state(const std::string& path, Adam& opt) {
    std::vector<std::pair<std::string, const std::vector<double>*>> tensors;
    std::vector<std::pair<std::int64_t, std::int64_t>> shapes;
    for (auto& [name, m] : opt.moments_m()) {
        tensors.emplace_back(name + ".m", &m);
        shapes.emplace_back(static_cast<std::int64_t>(m.size()), 1);
    }
    for (auto& [name, v] : opt.moments_v()) {
        tensors.emplace_back(name + ".v", &v);
        shapes.emplace_back(static_cast<std::int64_t>(v.size()), 1);
    }
    std::map<std::string, std::string> meta{
        {"step_count", std::to_string(opt.step_count())}};
    write_container(path, pack(tensors, shapes, meta, "f64"));
}

void load_optimizer_state(const std::string& path, Adam& opt) {
    Container c = read_container(path);
    opt.set_step_count(std::stoll(c.manifest["meta"]["step_count"].get<std::string>()));
    for (const auto& t : c.manifest["tensors"]) {
        const auto name = t["name"].get<std::string>();
        auto values = read_values(c.data, t["offset"].get<std::size_t>(),
                                  t["rows"].get<std::size_t>(),
                                  t["dtype"].get<std::string>());
        if (name.size() > 2 && name.substr(name.size() - 2) == ".m")
            opt.moments_m()[name.substr(0, name.size() - 2)] = std::move(values);
        else if (name.size() > 2 && name.substr(name.size() - 2) == ".v")
            opt.moments_v()[name.substr(0, name.size() - 2)] = std::move(values);
        else
            throw CheckpointError(path + ": unexpected tensor '" + name + "'");
    }
}

}  // namespace pumpwatch::nn
