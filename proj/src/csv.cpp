#include "fppi/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fppi {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// nullopt for an empty cell; NaN/inf parse through and are filtered later.
std::optional<double> parse_cell(const std::string& s, Index line) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw CsvError("line " + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

CsvTable parse_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw CsvError("row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                           " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (!have_header) throw CsvError("empty CSV file");
    for (const auto& h : t.header)
        if (h.empty()) throw CsvError("empty column name in header");
    auto sorted = t.header;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw CsvError("duplicate column name in header");
    return t;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    return parse_csv(in);
}

LoadedTable table_from_csv(const CsvTable& csv, bool need_y, const std::string& pred_col) {
    Index y_col = -1, f_col = -1;
    std::vector<Index> x_cols;
    LoadedTable out;
    for (std::size_t j = 0; j < csv.header.size(); ++j) {
        const auto& h = csv.header[j];
        if (h == "y")
            y_col = static_cast<Index>(j);
        else if (h == pred_col)
            f_col = static_cast<Index>(j);
        else {
            x_cols.push_back(static_cast<Index>(j));
            out.x_names.push_back(h);
        }
    }
    if (need_y && y_col < 0) throw CsvError("missing response column 'y'");
    if (x_cols.empty()) throw CsvError("no covariate columns");

    std::vector<std::vector<double>> kept;
    out.rows_read = static_cast<Index>(csv.rows.size());
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        std::vector<double> vals(csv.header.size());
        bool ok = true;
        for (std::size_t j = 0; j < csv.header.size(); ++j) {
            const auto v = parse_cell(csv.rows[i][j], static_cast<Index>(i) + 2);
            if (!v || !std::isfinite(*v))
                ok = false;
            else
                vals[j] = *v;
        }
        if (ok)
            kept.push_back(std::move(vals));
        else
            ++out.rows_dropped;
    }
    const auto n = static_cast<Index>(kept.size());
    out.x.resize(n, static_cast<Index>(x_cols.size()));
    Vector y(n), f(n);
    for (Index i = 0; i < n; ++i) {
        const auto& r = kept[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < x_cols.size(); ++j)
            out.x(i, static_cast<Index>(j)) = r[static_cast<std::size_t>(x_cols[j])];
        if (y_col >= 0) y(i) = r[static_cast<std::size_t>(y_col)];
        if (f_col >= 0) f(i) = r[static_cast<std::size_t>(f_col)];
    }
    if (y_col >= 0) out.y = std::move(y);
    if (f_col >= 0) out.f = std::move(f);
    return out;
}

LoadedTable load_table(const std::string& path, bool need_y, const std::string& pred_col) {
    return table_from_csv(read_csv_file(path), need_y, pred_col);
}

void write_table_csv(const std::string& path, const Matrix& x, const Vector* y, const Vector* f) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << 'x' << (j + 1);
    if (y) out << ",y";
    if (f) out << ",f";
    out << '\n';
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << fmt(x(i, j));
        if (y) out << ',' << fmt((*y)(i));
        if (f) out << ',' << fmt((*f)(i));
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fppi
