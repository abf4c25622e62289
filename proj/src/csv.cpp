#include "shiftdecomp/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace shiftdecomp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim ASCII whitespace and a possible trailing \r
        std::size_t b = 0, e = cell.size();
        while (b < e && std::isspace(static_cast<unsigned char>(cell[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(cell[e - 1]))) --e;
        out.push_back(cell.substr(b, e - b));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

int CsvTable::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j] == name) return static_cast<int>(j);
    return -1;
}

Vec CsvTable::column(const std::string& name) const {
    const int j = column_index(name);
    if (j < 0) throw DataError("csv: missing column '" + name + "'");
    return data.col(j);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("csv: cannot open '" + path + "'");

    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: empty file '" + path + "'");
    table.columns = split_line(line);
    if (table.columns.empty()) throw DataError("csv: no header columns in '" + path + "'");

    std::vector<double> values;
    long rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != table.columns.size())
            throw DataError("csv: row " + std::to_string(rows + 2) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(table.columns.size()));
        for (const auto& cell : cells) {
            if (cell.empty()) throw DataError("csv: missing value at row " + std::to_string(rows + 2));
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw DataError("csv: non-numeric cell '" + cell + "' at row " + std::to_string(rows + 2));
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw DataError("csv: no data rows in '" + path + "'");
    table.data.resize(rows, static_cast<Index>(table.columns.size()));
    for (long i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < table.columns.size(); ++j)
            table.data(i, static_cast<Index>(j)) = values[static_cast<std::size_t>(i) * table.columns.size() + j];
    return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns, const Mat& data) {
    if (static_cast<Index>(columns.size()) != data.cols())
        throw DataError("csv: column count mismatch on write");
    std::ofstream out(path);
    if (!out) throw DataError("csv: cannot write '" + path + "'");
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
    out << "\n";
    char buf[64];
    for (Index i = 0; i < data.rows(); ++i) {
        for (Index j = 0; j < data.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", data(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace shiftdecomp
