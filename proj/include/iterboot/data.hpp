#ifndef ITERBOOT_DATA_HPP
#define ITERBOOT_DATA_HPP

// Fixed designs for the two supported models, and the CSV schema used by
// the command line tools (header row; columns [cluster,] y, x1..xq).

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ib {

// singular values below rank_tol * s_max count as zero
inline constexpr double kRankTol = 1e-10;

inline void check_full_column_rank(const Eigen::MatrixXd& X, const char* what) {
    if (X.cols() == 0) return;
    if (X.rows() < X.cols())
        throw std::invalid_argument(std::string(what) + ": fewer rows than columns");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
    const auto& sv = svd.singularValues();
    if (sv[sv.size() - 1] <= kRankTol * sv[0])
        throw std::invalid_argument(std::string(what) + ": design is rank deficient");
}

// Fixed covariates for the logistic model. Include a leading column of
// ones yourself if the model has an intercept.
struct LogisticDesign {
    Eigen::MatrixXd X;  // n x q

    LogisticDesign() = default;
    explicit LogisticDesign(Eigen::MatrixXd x) : X(std::move(x)) {
        check_full_column_rank(X, "LogisticDesign");
    }

    int n() const { return static_cast<int>(X.rows()); }
    int q() const { return static_cast<int>(X.cols()); }
};

// Random-intercept design: q slope covariates (no intercept column; the
// intercept is a separate parameter) plus a cluster label per row.
struct GlmmDesign {
    Eigen::MatrixXd X;         // n x q
    std::vector<int> cluster;  // 0-based labels in [0, m)
    int m = 0;
    std::vector<int> cluster_sizes;

    GlmmDesign() = default;
    GlmmDesign(Eigen::MatrixXd x, std::vector<int> labels) : X(std::move(x)), cluster(std::move(labels)) {
        if (static_cast<int>(cluster.size()) != X.rows())
            throw std::invalid_argument("GlmmDesign: cluster length != n");
        m = cluster.empty() ? 0 : *std::max_element(cluster.begin(), cluster.end()) + 1;
        cluster_sizes.assign(static_cast<std::size_t>(m), 0);
        for (int c : cluster) {
            if (c < 0 || c >= m) throw std::invalid_argument("GlmmDesign: cluster label out of range");
            ++cluster_sizes[static_cast<std::size_t>(c)];
        }
        for (int sz : cluster_sizes)
            if (sz == 0) throw std::invalid_argument("GlmmDesign: empty cluster label");
        check_full_column_rank(X, "GlmmDesign");
    }

    int n() const { return static_cast<int>(X.rows()); }
    int q() const { return static_cast<int>(X.cols()); }
};

// ---------------------------------------------------------------------------
// CSV

struct CsvData {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<int> cluster;  // 1-based in the file, converted to 0-based
    bool has_cluster = false;
};

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        std::size_t start = 0;
        while (start < field.size() && field[start] == ' ') ++start;
        out.push_back(field.substr(start));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

// Columns are matched by header name, not position. Required: y, x1..xq
// (consecutive from 1). Optional: cluster.
inline CsvData read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");

    const auto header = detail::split_csv_line(line);
    int y_col = -1, cluster_col = -1;
    std::vector<int> x_cols;  // x_cols[j] = column of x{j+1}
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[static_cast<std::size_t>(i)] == "y") y_col = i;
        else if (header[static_cast<std::size_t>(i)] == "cluster") cluster_col = i;
    }
    for (int j = 1;; ++j) {
        const std::string name = "x" + std::to_string(j);
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) break;
        x_cols.push_back(static_cast<int>(it - header.begin()));
    }
    if (y_col < 0) throw std::runtime_error(path + ": missing column 'y'");
    if (x_cols.empty()) throw std::runtime_error(path + ": missing column 'x1'");

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error(path + ": row with wrong field count");
        std::vector<double> parsed(header.size());
        for (std::size_t i = 0; i < fields.size(); ++i) parsed[i] = std::stod(fields[i]);
        rows.push_back(std::move(parsed));
        if (cluster_col >= 0)
            labels.push_back(static_cast<int>(rows.back()[static_cast<std::size_t>(cluster_col)]) - 1);
    }

    CsvData out;
    const int n = static_cast<int>(rows.size());
    const int q = static_cast<int>(x_cols.size());
    out.X.resize(n, q);
    out.y.resize(n);
    for (int i = 0; i < n; ++i) {
        out.y[i] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(y_col)];
        for (int j = 0; j < q; ++j)
            out.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(x_cols[static_cast<std::size_t>(j)])];
    }
    out.has_cluster = cluster_col >= 0;
    out.cluster = std::move(labels);
    return out;
}

inline void write_csv(std::ostream& os, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<int>* cluster = nullptr) {
    const int n = static_cast<int>(X.rows());
    const int q = static_cast<int>(X.cols());
    if (cluster) os << "cluster,";
    os << "y";
    for (int j = 1; j <= q; ++j) os << ",x" << j;
    os << "\n";
    for (int i = 0; i < n; ++i) {
        if (cluster) os << (*cluster)[static_cast<std::size_t>(i)] + 1 << ",";
        os << detail::format_double(y[i]);
        for (int j = 0; j < q; ++j) os << "," << detail::format_double(X(i, j));
        os << "\n";
    }
}

inline void write_csv(const std::string& path, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<int>* cluster = nullptr) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_csv(out, X, y, cluster);
}

}  // namespace ib

#endif
