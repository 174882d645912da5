#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xsdr/core.hpp"
#include "xsdr/errors.hpp"

namespace xsdr {

struct ParseError : Error {
    using Error::Error;
};

struct Dataset {
    MatrixXd predictors;
    VectorXd response;
    std::vector<std::string> predictor_names;
    std::string response_name;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // row-major
};

// Strict numeric CSV: header required, comma separator, no missing or
// non-numeric cells. Error messages name the offending row and column.
inline Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
    }
    if (t.columns.empty()) throw ParseError("no columns in header: " + path);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (col < t.columns.size()) {
            if (!std::getline(ss, cell, ',')) cell.clear();
            ++col;
            if (cell.empty())
                throw ParseError("missing value in row " + std::to_string(lineno) + ", column " +
                                 t.columns[col - 1]);
            std::size_t used = 0;
            double value = 0.0;
            try {
                value = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                ++used;
            if (used != cell.size())
                throw ParseError("non-numeric value '" + cell + "' in row " +
                                 std::to_string(lineno) + ", column " + t.columns[col - 1]);
            row.push_back(value);
        }
        std::string extra;
        if (std::getline(ss, extra, ','))
            throw ParseError("too many fields in row " + std::to_string(lineno));
        t.rows.push_back(std::move(row));
    }
    if (t.rows.empty()) throw ParseError("no data rows in " + path);
    return t;
}

inline Dataset split_response(const Table& t, const std::string& response) {
    Dataset d;
    Index ycol = -1;
    for (std::size_t j = 0; j < t.columns.size(); ++j)
        if (t.columns[j] == response) ycol = static_cast<Index>(j);
    if (ycol < 0) {
        // allow a 0-based column index
        try {
            ycol = std::stol(response);
        } catch (const std::exception&) {
            throw ParseError("response column not found: " + response);
        }
        if (ycol < 0 || ycol >= static_cast<Index>(t.columns.size()))
            throw ParseError("response column index out of range: " + response);
    }
    const Index n = static_cast<Index>(t.rows.size());
    const Index p = static_cast<Index>(t.columns.size()) - 1;
    if (p < 1) throw ParseError("need at least one predictor column");
    d.predictors.resize(n, p);
    d.response.resize(n);
    d.response_name = t.columns[ycol];
    for (std::size_t j = 0; j < t.columns.size(); ++j)
        if (static_cast<Index>(j) != ycol) d.predictor_names.push_back(t.columns[j]);
    for (Index i = 0; i < n; ++i) {
        Index c = 0;
        for (std::size_t j = 0; j < t.columns.size(); ++j) {
            if (static_cast<Index>(j) == ycol)
                d.response(i) = t.rows[i][j];
            else
                d.predictors(i, c++) = t.rows[i][j];
        }
    }
    return d;
}

inline std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
}

inline void write_matrix_csv(const std::string& path, const Eigen::Ref<const MatrixXd>& M,
                             const std::vector<std::string>& columns) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    for (std::size_t j = 0; j < columns.size(); ++j)
        out << columns[j] << (j + 1 < columns.size() ? "," : "\n");
    for (Index i = 0; i < M.rows(); ++i)
        for (Index j = 0; j < M.cols(); ++j)
            out << format_double(M(i, j)) << (j + 1 < M.cols() ? "," : "\n");
}

}  // namespace xsdr
