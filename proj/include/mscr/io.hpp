#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace mscr::io {

/** @brief Minimal CSV writer with a fixed numeric format so outputs are byte-stable. */
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::string_view header);
    void row(std::initializer_list<double> values);
    void row(const std::vector<double>& values);
    /// Free-form line (used for summary lines and mixed string columns).
    void line(std::string_view text);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

std::string format_number(double v);

/// Parse a CSV with a header row into numeric rows; header names are checked.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                  std::vector<std::string_view> expected_header);

}  // namespace mscr::io
