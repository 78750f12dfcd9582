#include "ivpseudo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ivpseudo/errors.hpp"

namespace ivpseudo {

namespace {

void check_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
    if (!m.allFinite()) throw DataError(std::string(what) + " contains non-finite values");
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    std::string out(s.substr(b, e - b));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool parse_number(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

void Dataset::validate() const {
    const Index n = Z.rows();
    if (n < 2) throw DataError("dataset needs at least 2 rows, got " + std::to_string(n));
    if (D.size() != n || Y.size() != n)
        throw DimensionError("Z, D and Y must share the row count");
    if (X && X->rows() != n) throw DimensionError("X must have the same row count as Z");
    if (static_cast<Index>(pseudo_mask.size()) != Z.cols())
        throw DimensionError("pseudo_mask length must equal the number of Z columns");
    check_finite(Z, "Z");
    check_finite(D, "D");
    check_finite(Y, "Y");
    if (X) check_finite(*X, "X");
}

Dataset make_dataset(Matrix Z, Vector D, Vector Y, std::optional<Matrix> X) {
    Dataset ds;
    ds.Z = std::move(Z);
    ds.D = std::move(D);
    ds.Y = std::move(Y);
    ds.X = std::move(X);
    ds.pseudo_mask.assign(static_cast<std::size_t>(ds.Z.cols()), false);
    ds.validate();
    return ds;
}

Dataset parse_csv(const std::string& text, const std::string& exposure_col,
                  const std::string& outcome_col,
                  const std::vector<std::string>& covariate_cols) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV input: header row missing", 1, 0);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
        line = line.substr(3);
    const auto header = split_line(line);

    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (!pos.emplace(header[j], j).second)
            throw ConfigError("duplicate column name '" + header[j] + "'");
    }
    auto find = [&](const std::string& name) {
        auto it = pos.find(name);
        if (it == pos.end()) throw ConfigError("column '" + name + "' not found in header");
        return it->second;
    };
    const std::size_t d_col = find(exposure_col);
    const std::size_t y_col = find(outcome_col);
    std::vector<std::size_t> x_cols;
    for (const auto& c : covariate_cols) x_cols.push_back(find(c));

    std::vector<bool> reserved(header.size(), false);
    reserved[d_col] = reserved[y_col] = true;
    for (auto c : x_cols) reserved[c] = true;
    std::vector<std::size_t> z_cols;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (!reserved[j]) z_cols.push_back(j);

    std::vector<std::vector<double>> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw ParseError("row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                                 " cells, header has " + std::to_string(header.size()),
                             row_no, cells.size());
        std::vector<double> vals(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (!parse_number(cells[j], vals[j]))
                throw ParseError("non-numeric cell '" + cells[j] + "' at row " + std::to_string(row_no) +
                                     ", column " + std::to_string(j + 1) + " (" + header[j] + ")",
                                 row_no, j + 1);
        }
        rows.push_back(std::move(vals));
    }
    const auto n = static_cast<Index>(rows.size());
    if (n < 2) throw DataError("dataset needs at least 2 rows, got " + std::to_string(n));

    Dataset ds;
    ds.Z.resize(n, static_cast<Index>(z_cols.size()));
    ds.D.resize(n);
    ds.Y.resize(n);
    if (!x_cols.empty()) ds.X = Matrix(n, static_cast<Index>(x_cols.size()));
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        ds.D(i) = r[d_col];
        ds.Y(i) = r[y_col];
        for (std::size_t k = 0; k < z_cols.size(); ++k) ds.Z(i, static_cast<Index>(k)) = r[z_cols[k]];
        for (std::size_t k = 0; k < x_cols.size(); ++k) (*ds.X)(i, static_cast<Index>(k)) = r[x_cols[k]];
    }
    for (auto c : z_cols) ds.z_names.push_back(header[c]);
    ds.x_names = covariate_cols;
    ds.pseudo_mask.assign(z_cols.size(), false);
    ds.validate();
    return ds;
}

Dataset load_csv(const std::string& path, const std::string& exposure_col,
                 const std::string& outcome_col,
                 const std::vector<std::string>& covariate_cols) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_csv(buf.str(), exposure_col, outcome_col, covariate_cols);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_csv(const Dataset& ds, const std::string& exposure_col, const std::string& outcome_col) {
    std::string out;
    out += exposure_col + "," + outcome_col;
    const Index q = ds.X ? ds.X->cols() : 0;
    for (Index k = 0; k < q; ++k) {
        out += ",";
        out += static_cast<std::size_t>(k) < ds.x_names.size() ? ds.x_names[static_cast<std::size_t>(k)]
                                                                 : "x" + std::to_string(k + 1);
    }
    for (Index j = 0; j < ds.p(); ++j) {
        out += ",";
        out += static_cast<std::size_t>(j) < ds.z_names.size() ? ds.z_names[static_cast<std::size_t>(j)]
                                                                 : "z" + std::to_string(j + 1);
    }
    out += "\n";
    for (Index i = 0; i < ds.n(); ++i) {
        out += format_double(ds.D(i));
        out += ",";
        out += format_double(ds.Y(i));
        for (Index k = 0; k < q; ++k) {
            out += ",";
            out += format_double((*ds.X)(i, k));
        }
        for (Index j = 0; j < ds.p(); ++j) {
            out += ",";
            out += format_double(ds.Z(i, j));
        }
        out += "\n";
    }
    return out;
}

void write_csv(const Dataset& ds, const std::string& path, const std::string& exposure_col,
               const std::string& outcome_col) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << to_csv(ds, exposure_col, outcome_col);
    if (!f) throw IoError("write failed for '" + path + "'");
}

Dataset center(const Dataset& ds) {
    Dataset out = ds;
    out.Z.rowwise() -= out.Z.colwise().mean();
    out.D.array() -= out.D.mean();
    out.Y.array() -= out.Y.mean();
    if (out.X) out.X->rowwise() -= out.X->colwise().mean();
    out.centered = true;
    return out;
}

Dataset scale_columns(const Dataset& ds) {
    Dataset out = ds;
    const double n = static_cast<double>(ds.n());
    for (Index j = 0; j < out.Z.cols(); ++j) {
        auto col = out.Z.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / n);
        if (sd > 0.0) col /= sd;
    }
    return out;
}

Dataset partial_out_covariates(const Dataset& ds) {
    if (!ds.X || ds.X->cols() == 0) {
        Dataset out = ds;
        out.X.reset();
        out.x_names.clear();
        return out;
    }
    const Matrix& X = *ds.X;
    if (X.cols() >= X.rows())
        throw LinearAlgebraError("covariate matrix needs fewer columns than rows");
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < X.cols()) throw LinearAlgebraError("covariate matrix is rank deficient");

    Dataset out = ds;
    auto resid = [&](const Matrix& B) -> Matrix { return B - X * qr.solve(B); };
    out.Z = resid(ds.Z);
    out.D = resid(ds.D);
    out.Y = resid(ds.Y);
    out.X.reset();
    out.x_names.clear();
    return out;
}

}  // namespace ivpseudo
