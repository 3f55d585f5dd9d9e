#pragma once

#include "metrology/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace metrology::detail {

using nlohmann::json;

// Non-finite values are emitted as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
    return out;
}

inline json to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
        out.push_back(std::move(row));
    }
    return out;
}

inline double as_double(const json& j, const std::string& field) {
    if (j.is_null()) return std::nan("");
    if (!j.is_number()) throw validation_error("bad_field", "field '" + field + "' must be a number");
    return j.get<double>();
}

inline Eigen::VectorXd vector_from(const json& j, const std::string& field) {
    if (!j.is_array()) throw validation_error("bad_field", "field '" + field + "' must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = as_double(j[i], field);
    return v;
}

inline Eigen::MatrixXd matrix_from(const json& j, const std::string& field) {
    if (!j.is_array()) throw validation_error("bad_field", "field '" + field + "' must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw validation_error("bad_field", "field '" + field + "' has ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = as_double(row[static_cast<std::size_t>(c)], field);
    }
    return m;
}

inline const json& require(const json& j, const std::string& field) {
    if (!j.is_object() || !j.contains(field)) throw validation_error("missing_field", "missing field '" + field + "'");
    return j.at(field);
}

}  // namespace metrology::detail
