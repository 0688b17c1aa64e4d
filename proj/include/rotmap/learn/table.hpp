#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rotmap::learn {

/// Column-major numeric design matrix with a response. Categorical columns
/// hold integer codes.
struct Table {
    std::vector<std::string> names;
    std::vector<bool> categorical;
    std::vector<std::vector<double>> columns;  // columns[j][i]
    std::vector<double> response;
    std::vector<std::string> row_ids;

    std::size_t rows() const noexcept { return response.size(); }
    std::size_t cols() const noexcept { return columns.size(); }

    void add_column(std::string name, bool is_categorical, std::vector<double> values);

    /// Row i as a vector of predictor values in column order.
    std::vector<double> row(std::size_t i) const;

    /// Rows in the given order (indices may repeat).
    Table subset(const std::vector<std::size_t>& rows) const;

    /// Throws EmptyInput for no rows or no columns, DataError for ragged
    /// columns, non-finite values or non-integer categorical codes.
    void validate() const;
};

}  // namespace rotmap::learn
