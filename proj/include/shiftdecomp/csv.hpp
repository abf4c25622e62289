#pragma once

#include <string>
#include <vector>

#include "shiftdecomp/common.hpp"

namespace shiftdecomp {

struct CsvTable {
    std::vector<std::string> columns;
    Mat data;

    int column_index(const std::string& name) const;  // -1 when absent
    Vec column(const std::string& name) const;        // throws DataError when absent
};

// Reads a UTF-8 CSV with a header row; every body cell must parse as a finite
// number (missing values are rejected, imputation is the caller's job).
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& columns, const Mat& data);

}  // namespace shiftdecomp
