#include "flowam/io.hpp"

#include "flowam/errors.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace flowam::io {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void atomic_write(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void append_le_doubles(std::string& out, std::span<const double> values) {
    const std::size_t base = out.size();
    out.resize(base + values.size() * sizeof(double));
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(values[i]);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        std::memcpy(out.data() + base + i * sizeof(double), &bits, sizeof(bits));
    }
}

std::vector<double> parse_le_doubles(std::string_view bytes, std::size_t count) {
    if (bytes.size() != count * sizeof(double))
        throw IoError("binary payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(count * sizeof(double)));
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, bytes.data() + i * sizeof(double), sizeof(bits));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    auto [ptr, ec] = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, ptr);
    return std::string(16 - s.size(), '0') + s;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace flowam::io
