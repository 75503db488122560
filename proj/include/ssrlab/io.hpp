#pragma once
#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ssrlab {

// Shortest decimal that round-trips; "inf", "-inf", "nan" for non-finite.
std::string format_double(double value);

// Comma-separated, one matrix row per line.
Eigen::MatrixXd read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix);

// Covariance loader: square matrix from CSV.
Eigen::MatrixXd load_covariance_csv(const std::string& path);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::string to_string() const;
    void write(const std::string& path) const;
};

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace ssrlab
