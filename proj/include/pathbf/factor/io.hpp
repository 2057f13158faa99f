#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pathbf/core/errors.hpp"
#include "pathbf/core/linalg.hpp"

namespace pathbf::factor {

/// Rows are observations, columns are variables.
struct Dataset {
    Matrix y;
    std::vector<std::string> names;
    bool standardized = false;

    Eigen::Index n() const { return y.rows(); }
    Eigen::Index p() const { return y.cols(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t\"");
        const auto e = f.find_last_not_of(" \t\"");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

inline bool parse_double(const std::string& s, double& v)
{
    if (s.empty())
        return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+')
        ++first;
    const auto res = std::from_chars(first, last, v);
    return res.ec == std::errc() && res.ptr == last && std::isfinite(v);
}

} // namespace detail

/// Parses a rectangular numeric CSV. A first line with any non-numeric
/// field is taken as a header. Rows and columns in errors are 1-based
/// positions in the file.
inline Dataset read_csv(std::istream& is)
{
    Dataset d;
    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto fields = detail::split_csv_line(line);
        std::vector<double> vals(fields.size());
        bool numeric = true;
        long bad = -1;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!detail::parse_double(fields[c], vals[c])) {
                numeric = false;
                if (bad < 0)
                    bad = static_cast<long>(c) + 1;
            }
        }
        if (first) {
            first = false;
            width = fields.size();
            if (!numeric) {
                d.names = fields;
                continue;
            }
        }
        if (fields.size() != width)
            throw ParseError("row " + std::to_string(lineno) + " has " + std::to_string(fields.size())
                                 + " fields, expected " + std::to_string(width),
                             lineno, static_cast<long>(std::min(fields.size(), width)) + 1);
        if (!numeric)
            throw ParseError("non-numeric value '" + fields[static_cast<std::size_t>(bad - 1)] + "' at row "
                                 + std::to_string(lineno) + ", column " + std::to_string(bad),
                             lineno, bad);
        rows.push_back(std::move(vals));
    }
    if (rows.empty())
        throw ParseError("no data rows", lineno, -1);
    if (d.names.empty())
        for (std::size_t c = 0; c < width; ++c)
            d.names.push_back("y" + std::to_string(c + 1));
    d.y.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < width; ++c)
            d.y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return d;
}

inline Dataset read_csv_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ParseError("cannot open " + path);
    return read_csv(f);
}

/// Centres every column and scales it to unit sample sd.
inline void standardize(Dataset& d)
{
    const double n = static_cast<double>(d.n());
    if (d.n() < 2)
        throw ParseError("standardize: need at least two rows");
    for (Eigen::Index c = 0; c < d.p(); ++c) {
        auto col = d.y.col(c);
        const double mu = col.mean();
        col.array() -= mu;
        const double sd = std::sqrt(col.squaredNorm() / (n - 1.0));
        if (!(sd > 0.0))
            throw ParseError("column " + std::to_string(c + 1) + " ('" + d.names[static_cast<std::size_t>(c)]
                                 + "') is constant and cannot be standardized",
                             -1, static_cast<long>(c) + 1);
        col /= sd;
    }
    d.standardized = true;
}

inline void write_csv(std::ostream& os, const Matrix& y, const std::vector<std::string>& names = {})
{
    os.precision(17);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        if (c)
            os << ',';
        os << (static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)]
                                                           : "y" + std::to_string(c + 1));
    }
    os << '\n';
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            if (c)
                os << ',';
            os << y(r, c);
        }
        os << '\n';
    }
}

} // namespace pathbf::factor
