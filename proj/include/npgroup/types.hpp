#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace npgroup {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexSet = std::vector<std::size_t>;

/// Response vector and covariate matrix (one row per observation).
struct Dataset {
    Vector y;
    Matrix x;
    std::vector<std::string> names;   // covariate column names, size x.cols()
    std::string response_name = "y";

    std::size_t n() const { return static_cast<std::size_t>(y.size()); }
    std::size_t d() const { return static_cast<std::size_t>(x.cols()); }
};

/// Copies the listed columns of `x` into a new matrix.
inline Matrix select_columns(const Matrix& x, const IndexSet& cols) {
    Matrix out(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(static_cast<Index>(cols[k]));
    return out;
}

}  // namespace npgroup
