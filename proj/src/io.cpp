#include "mscr/io.hpp"

#include "mscr/common.hpp"

#include <cstdio>
#include <sstream>

namespace mscr::io {

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::string_view header)
    : path_(path), out_(path) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    out_ << header << '\n';
}

void CsvWriter::row(std::initializer_list<double> values) {
    row(std::vector<double>(values));
}

void CsvWriter::row(const std::vector<double>& values) {
    bool first = true;
    for (double v : values) {
        if (!first) out_ << ',';
        out_ << format_number(v);
        first = false;
    }
    out_ << '\n';
}

void CsvWriter::line(std::string_view text) { out_ << text << '\n'; }

static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
}

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                  std::vector<std::string_view> expected_header) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
    auto header = split(line);
    if (header.size() != expected_header.size())
        throw Error(path.string() + ": unexpected header '" + line + "'");
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] != expected_header[i])
            throw Error(path.string() + ": unexpected header '" + line + "'");

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split(line);
        if (cells.size() != header.size())
            throw Error(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
        std::vector<double> row;
        for (auto& c : cells) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception&) {
                throw Error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace mscr::io
