#include "rotmap/learn/table.hpp"

#include <cmath>

#include "rotmap/error.hpp"

namespace rotmap::learn {

void Table::add_column(std::string name, bool is_categorical, std::vector<double> values) {
    names.push_back(std::move(name));
    categorical.push_back(is_categorical);
    columns.push_back(std::move(values));
}

std::vector<double> Table::row(std::size_t i) const {
    std::vector<double> r(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) r[j] = columns[j][i];
    return r;
}

Table Table::subset(const std::vector<std::size_t>& rows) const {
    Table out;
    out.names = names;
    out.categorical = categorical;
    out.columns.assign(columns.size(), {});
    for (std::size_t j = 0; j < columns.size(); ++j) {
        out.columns[j].reserve(rows.size());
        for (auto i : rows) out.columns[j].push_back(columns[j][i]);
    }
    for (auto i : rows) {
        out.response.push_back(response[i]);
        if (!row_ids.empty()) out.row_ids.push_back(row_ids[i]);
    }
    return out;
}

void Table::validate() const {
    if (rows() == 0) throw EmptyInput("table has no rows");
    if (cols() == 0) throw EmptyInput("table has no predictors");
    if (names.size() != cols() || categorical.size() != cols()) throw DataError("table metadata size mismatch");
    if (!row_ids.empty() && row_ids.size() != rows()) throw DataError("row id count differs from row count");
    for (double y : response) {
        if (!std::isfinite(y)) throw DataError("non-finite response value");
    }
    for (std::size_t j = 0; j < cols(); ++j) {
        if (columns[j].size() != rows()) throw DataError("column '" + names[j] + "' has the wrong length");
        for (double v : columns[j]) {
            if (!std::isfinite(v)) throw DataError("non-finite value in column '" + names[j] + "'");
            if (categorical[j] && v != std::floor(v)) {
                throw DataError("non-integer code in categorical column '" + names[j] + "'");
            }
        }
    }
}

}  // namespace rotmap::learn
