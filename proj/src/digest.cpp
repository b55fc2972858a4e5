#include "pumpwatch/digest.hpp"

#include <cstdio>
#include <fstream>

#include "pumpwatch/errors.hpp"

namespace pumpwatch {

std::uint64_t digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for digest");
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace pumpwatch
