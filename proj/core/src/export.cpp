#include "ptbox/export.hpp"

#include <Eigen/Dense>
#include <cstdio>

#include "ptbox/errors.hpp"

namespace ptbox {
namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_range(int from_year, int to_year) {
    if (from_year > to_year)
        throw ConfigError("empty year range: " + std::to_string(from_year) +
                          " > " + std::to_string(to_year));
}

Eigen::MatrixXd embedding_rows(const ModelParams& m, int from_year, int to_year) {
    const auto rows = static_cast<Eigen::Index>(to_year - from_year) + 1;
    const auto d = static_cast<Eigen::Index>(m.dim());
    Eigen::MatrixXd Z(rows, d);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto w = time_vector(m, from_year + static_cast<int>(i));
        for (Eigen::Index j = 0; j < d; ++j)
            Z(i, j) = w[static_cast<std::size_t>(j)];
    }
    return Z;
}

// flip so the largest-|loading| coordinate is positive
void canonicalize(Eigen::VectorXd& pc) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < pc.size(); ++i)
        if (std::abs(pc(i)) > std::abs(pc(best))) best = i;
    if (pc.size() > 0 && pc(best) < 0.0) pc = -pc;
}

}  // namespace

void export_time_embeddings(const ModelParams& m, int from_year, int to_year,
                            std::ostream& os) {
    check_range(from_year, to_year);
    const int d = m.dim();
    os << "year, x";
    for (int j = 0; j < d; ++j) os << ", c" << j;
    os << "\n";
    std::vector<double> w(static_cast<std::size_t>(d));
    for (int year = from_year; year <= to_year; ++year) {
        const double x = warp_time(normalize_time(year, m.codec.span), m.codec);
        const auto v = time_vector(m, year);
        os << year << ", " << num(x);
        for (int j = 0; j < d; ++j) os << ", " << num(v[static_cast<std::size_t>(j)]);
        os << "\n";
    }
}

void export_time_pca(const ModelParams& m, int from_year, int to_year,
                     std::ostream& os) {
    check_range(from_year, to_year);
    Eigen::MatrixXd Z = embedding_rows(m, from_year, to_year);
    const Eigen::Index rows = Z.rows();
    const Eigen::Index d = Z.cols();

    const Eigen::RowVectorXd mean = Z.colwise().mean();
    Z.rowwise() -= mean;
    const double denom = rows > 1 ? static_cast<double>(rows - 1) : 1.0;
    const Eigen::MatrixXd cov = (Z.adjoint() * Z) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw NumericError("PCA eigendecomposition failed");

    Eigen::VectorXd pc1 = es.eigenvectors().col(d - 1);  // ascending order
    canonicalize(pc1);
    Eigen::VectorXd pc2;
    if (d >= 2) {
        pc2 = es.eigenvectors().col(d - 2);
        canonicalize(pc2);
    } else {
        pc2 = Eigen::VectorXd::Zero(d);
    }

    const Eigen::VectorXd proj1 = Z * pc1;
    const Eigen::VectorXd proj2 = Z * pc2;
    os << "year, pc1, pc2\n";
    for (Eigen::Index i = 0; i < rows; ++i)
        os << (from_year + static_cast<int>(i)) << ", " << num(proj1(i)) << ", "
           << num(proj2(i)) << "\n";
}

}  // namespace ptbox
