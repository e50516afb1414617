#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "dmorse/errors.hpp"
#include "dmorse/point_process.hpp"

namespace dmorse {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'C', 'P', 'C'};
constexpr std::uint8_t kBinaryVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::ostream& os, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw FormatError("truncated binary cloud");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

double parse_double(std::string_view field, std::size_t line) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw FormatError("line " + std::to_string(line) + ": cannot parse '" + std::string(field) + "'");
    return v;
}

}  // namespace

void write_cloud_csv(std::ostream& os, const PointCloud& cloud) {
    os << "dim," << cloud.dim() << '\n';
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double* r = cloud.row(i);
        for (int c = 0; c < cloud.dim(); ++c) {
            if (c) os << ',';
            os << r[c];
        }
        os << '\n';
    }
}

PointCloud read_cloud_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty cloud file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("dim,", 0) != 0) throw FormatError("cloud CSV must start with 'dim,<d>'");
    const int d = static_cast<int>(parse_double(std::string_view(line).substr(4), 1));
    if (d < 1 || d > kMaxDim) throw FormatError("unsupported dimension " + std::to_string(d));
    std::vector<double> coords;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string_view rest(line);
        int fields = 0;
        for (;;) {
            const auto comma = rest.find(',');
            coords.push_back(parse_double(rest.substr(0, comma), lineno));
            ++fields;
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields != d)
            throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(d) + " coordinates");
    }
    return PointCloud(d, std::move(coords));
}

void write_cloud_binary(std::ostream& os, const PointCloud& cloud) {
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint8_t>(os, kBinaryVersion);
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(cloud.dim()));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(cloud.size()));
    for (double v : cloud.coords()) put_le<double>(os, v);
}

PointCloud read_cloud_binary(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("missing MCPC magic");
    const auto version = get_le<std::uint8_t>(is);
    if (version != kBinaryVersion) throw FormatError("unsupported MCPC version " + std::to_string(version));
    const int d = get_le<std::uint16_t>(is);
    if (d < 1 || d > kMaxDim) throw FormatError("unsupported dimension " + std::to_string(d));
    const auto count = get_le<std::uint64_t>(is);
    std::vector<double> coords;
    coords.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)) * d);
    for (std::uint64_t i = 0; i < count * static_cast<std::uint64_t>(d); ++i) coords.push_back(get_le<double>(is));
    return PointCloud(d, std::move(coords));
}

PointCloud load_cloud(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::array<char, 4> head{};
    in.read(head.data(), head.size());
    const bool binary = in.gcount() == 4 && head == kMagic;
    in.clear();
    in.seekg(0);
    return binary ? read_cloud_binary(in) : read_cloud_csv(in);
}

void save_cloud(const std::string& path, const PointCloud& cloud) {
    const bool binary = path.size() >= 5 && path.substr(path.size() - 5) == ".mcpc";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    if (binary)
        write_cloud_binary(out, cloud);
    else
        write_cloud_csv(out, cloud);
}

}  // namespace dmorse
