#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "aao/fem.hpp"

namespace aao::io {

// Shortest round-trip decimal form, so reruns are byte-identical.
std::string format_double(double v);

// Comma-separated, header row, '\n' line endings.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& values);

private:
    std::FILE* f_;
    std::size_t cols_;
    std::filesystem::path path_;
};

struct PgmInfo {
    std::size_t width = 0, height = 0;
    double min = 0.0, max = 0.0;
};

// P5, maxval 255, values mapped linearly from [min, max].  The full node grid
// is written, boundary nodes as zero; the first row is y = 1.
PgmInfo write_pgm(const std::filesystem::path& path, const fem::NodalField& field);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace aao::io
