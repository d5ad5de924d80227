#include "mdps/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace mdps {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'F', '1'};

std::ifstream open_in(const std::filesystem::path &path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path &path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_float(std::string_view tok, float &out) {
    const char *first = tok.data();
    const char *last = tok.data() + tok.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::uint32_t read_u32_le(const unsigned char *p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::ostream &out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char *>(b), 4);
}

PointCloud load_text(const std::filesystem::path &path) {
    auto in = open_in(path);
    std::vector<Point3> points;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        float xyz[3];
        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k) {
            const auto b = body.find_first_not_of(" \t", pos);
            if (b == std::string_view::npos) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 3 coordinates",
                                 line_no);
            }
            auto e = body.find_first_of(" \t", b);
            if (e == std::string_view::npos) e = body.size();
            if (!parse_float(body.substr(b, e - b), xyz[k])) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": invalid number '" +
                                     std::string(body.substr(b, e - b)) + "'",
                                 line_no);
            }
            pos = e;
        }
        points.push_back({xyz[0], xyz[1], xyz[2]});
    }
    if (points.empty()) throw ParseError(path.string() + ": empty cloud", line_no);
    return PointCloud(std::move(points));
}

PointCloud load_binary(const std::filesystem::path &path) {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw ParseError(path.string() + ": truncated header", bytes.size());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError(path.string() + ": bad magic", 0);
    const std::uint32_t count = read_u32_le(bytes.data() + 4);
    if (count == 0) throw ParseError(path.string() + ": empty cloud", 4);
    const std::size_t need = 8 + static_cast<std::size_t>(count) * 12;
    if (bytes.size() < need) {
        throw ParseError(path.string() + ": truncated payload, expected " + std::to_string(need) + " bytes",
                         bytes.size());
    }
    std::vector<Point3> points(count);
    const unsigned char *p = bytes.data() + 8;
    for (std::uint32_t i = 0; i < count; ++i) {
        float xyz[3];
        for (int k = 0; k < 3; ++k, p += 4) xyz[k] = std::bit_cast<float>(read_u32_le(p));
        points[i] = {xyz[0], xyz[1], xyz[2]};
    }
    try {
        return PointCloud(std::move(points));
    } catch (const std::invalid_argument &e) {
        throw ParseError(path.string() + ": " + e.what(), 8);
    }
}

}  // namespace

CloudFormat format_from_path(const std::filesystem::path &path) {
    return path.extension() == ".pcf" ? CloudFormat::kPcfBinary : CloudFormat::kXyzText;
}

PointCloud load_cloud(const std::filesystem::path &path, CloudFormat format) {
    return format == CloudFormat::kPcfBinary ? load_binary(path) : load_text(path);
}

PointCloud load_cloud(const std::filesystem::path &path) { return load_cloud(path, format_from_path(path)); }

void save_cloud(const PointCloud &cloud, const std::filesystem::path &path, CloudFormat format) {
    if (format == CloudFormat::kPcfBinary) {
        auto out = open_out(path, std::ios::out | std::ios::binary);
        out.write(kMagic, 4);
        write_u32_le(out, static_cast<std::uint32_t>(cloud.size()));
        for (const auto &p : cloud.points()) {
            write_u32_le(out, std::bit_cast<std::uint32_t>(p.x));
            write_u32_le(out, std::bit_cast<std::uint32_t>(p.y));
            write_u32_le(out, std::bit_cast<std::uint32_t>(p.z));
        }
        return;
    }
    auto out = open_out(path);
    out << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (const auto &p : cloud.points()) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
}

void save_cloud(const PointCloud &cloud, const std::filesystem::path &path) {
    save_cloud(cloud, path, format_from_path(path));
}

void save_indices(std::span<const Index> indices, const std::filesystem::path &path) {
    auto out = open_out(path);
    out << "index\n";
    for (Index i : indices) out << i << '\n';
}

std::vector<Index> load_indices(const std::filesystem::path &path) {
    auto in = open_in(path);
    std::vector<Index> indices;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body == "index") continue;
        Index v = 0;
        auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
        if (ec != std::errc() || ptr != body.data() + body.size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": invalid index", line_no);
        }
        indices.push_back(v);
    }
    return indices;
}

}  // namespace mdps
