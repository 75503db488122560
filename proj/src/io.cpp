#include "ssrlab/io.hpp"

#include "ssrlab/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ssrlab {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open CSV file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const std::string t = trim(cell);
            double v = 0.0;
            const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
            if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
                std::ostringstream os;
                os << path << ":" << line_no << ": cannot parse '" << t << "' as a number";
                throw ParameterError(os.str());
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            std::ostringstream os;
            os << path << ":" << line_no << ": expected " << rows.front().size() << " columns, found " << row.size();
            throw ParameterError(os.str());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParameterError("CSV file '" + path + "' is empty");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return M;
}

Eigen::MatrixXd load_covariance_csv(const std::string& path) {
    Eigen::MatrixXd M = read_matrix_csv(path);
    if (M.rows() != M.cols()) {
        std::ostringstream os;
        os << "covariance CSV '" << path << "' is " << M.rows() << "x" << M.cols() << ", expected square";
        throw ParameterError(os.str());
    }
    return M;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix) {
    std::ostringstream os;
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            if (j) os << ',';
            os << format_double(matrix(i, j));
        }
        os << '\n';
    }
    write_text_file(path, os.str());
}

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw ParameterError("CSV row width does not match header");
    rows.push_back(std::move(row));
}

std::string CsvTable::to_string() const {
    std::ostringstream os;
    auto emit = [&os](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os << ',';
            os << cells[i];
        }
        os << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    return os.str();
}

void CsvTable::write(const std::string& path) const { write_text_file(path, to_string()); }

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot write '" + path + "'");
    out << contents;
    if (!out) throw NumericError("write to '" + path + "' failed");
}

}  // namespace ssrlab
