#include "aao/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace aao::io {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : f_(std::fopen(path.c_str(), "wb")), cols_(header.size()), path_(path) {
    if (!f_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    row(header);
}

CsvWriter::~CsvWriter() {
    if (f_) std::fclose(f_);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw std::invalid_argument(path_.string() + ": row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].find_first_of(",\"\n") != std::string::npos)
            throw std::invalid_argument(path_.string() + ": cell needs quoting: " + cells[i]);
        if (i) std::fputc(',', f_);
        std::fputs(cells[i].c_str(), f_);
    }
    std::fputc('\n', f_);
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row(cells);
}

PgmInfo write_pgm(const std::filesystem::path& path, const fem::NodalField& field) {
    const fem::Mesh& mesh = field.mesh;
    const std::size_t n = mesh.nodes_per_dim();
    if (field.values.size() != mesh.interior_count()) throw std::invalid_argument("write_pgm: field size mismatch");
    std::vector<double> grid(n * n, 0.0);
    for (std::size_t i = 0; i < field.values.size(); ++i) grid[mesh.global_index(i)] = field.values[i];

    PgmInfo info{n, n, *std::min_element(grid.begin(), grid.end()), *std::max_element(grid.begin(), grid.end())};
    if (!std::isfinite(info.min) || !std::isfinite(info.max)) throw std::invalid_argument("write_pgm: non-finite values");
    const double span = info.max - info.min;
    std::vector<unsigned char> bytes(n * n);
    for (std::size_t row = 0; row < n; ++row) {
        const std::size_t j = n - 1 - row;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = grid[j * n + i];
            const double s = span > 0.0 ? (v - info.min) / span : 0.0;
            bytes[row * n + i] = static_cast<unsigned char>(std::lround(std::clamp(s, 0.0, 1.0) * 255.0));
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "P5\n" << n << ' ' << n << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return info;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

}  // namespace aao::io
