#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace shiftdecomp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

// Error categories; the CLI maps these to exit codes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Degenerate estimation state, e.g. a zero denominator or a missing domain.
struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Mat take_rows(const Mat& m, const std::vector<int>& idx) {
    Mat out(static_cast<Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
    return out;
}

inline Vec take(const Vec& v, const std::vector<int>& idx) {
    Vec out(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
    return out;
}

inline Mat hcat(const Mat& a, const Mat& b) {
    if (a.cols() == 0) return b;
    if (b.cols() == 0) return a;
    if (a.rows() != b.rows()) throw DataError("hcat: row count mismatch");
    Mat out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

}  // namespace shiftdecomp
