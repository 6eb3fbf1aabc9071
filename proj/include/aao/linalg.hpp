#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aao {

using Vector = std::vector<double>;
using LinearOp = std::function<Vector(const Vector&)>;

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
double max_abs(const Vector& a);
void axpy(double a, const Vector& x, Vector& y);
Vector scaled(double a, Vector x);
Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector hadamard(const Vector& a, const Vector& b);
Vector concat(const Vector& a, const Vector& b);

// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(const Vector& d);
    // Assembles the matrix of a linear map by applying it to unit vectors.
    static Matrix from_operator(const LinearOp& op, std::size_t in_dim, std::size_t out_dim);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }
    const std::vector<double>& data() const { return data_; }

    Vector apply(const Vector& x) const;
    Vector apply_transpose(const Vector& x) const;
    Vector column(std::size_t j) const;
    Matrix transpose() const;
    Matrix operator*(const Matrix& b) const;
    Matrix operator+(const Matrix& b) const;
    Matrix operator-(const Matrix& b) const;
    Matrix& operator*=(double s);
    double max_abs() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// Symmetric matrix; symmetry is made exact at construction by averaging
// mirrored entries. Construction fails if the input is visibly nonsymmetric.
class DenseSymMatrix {
public:
    DenseSymMatrix() = default;
    explicit DenseSymMatrix(Matrix m, double rel_tol = 1e-8);
    explicit DenseSymMatrix(std::size_t n) : m_(n, n) {}

    std::size_t dim() const { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    void set(std::size_t i, std::size_t j, double v) { m_(i, j) = v; m_(j, i) = v; }
    void add_to(std::size_t i, std::size_t j, double v);
    const Matrix& matrix() const { return m_; }
    Vector apply(const Vector& x) const { return m_.apply(x); }

private:
    Matrix m_;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public NumericalError {
public:
    NotPositiveDefinite(std::size_t pivot, double value);
    std::size_t pivot;
    double value;
};

class EigenNotConverged : public NumericalError {
public:
    EigenNotConverged(std::size_t index, int iterations);
    std::size_t index;
    int iterations;
};

class CgFailure : public NumericalError {
public:
    CgFailure(const std::string& what, Vector best, double residual, int iterations);
    Vector best;
    double residual;
    int iterations;
};

struct EigenDecomposition {
    Vector eigenvalues;   // ascending
    Matrix eigenvectors;  // column k belongs to eigenvalues[k]
};

// Lower Cholesky factor M = L L^T.
class Cholesky {
public:
    explicit Cholesky(const DenseSymMatrix& m);
    std::size_t dim() const { return l_.rows(); }
    const Matrix& factor() const { return l_; }
    Vector solve(const Vector& b) const;
    Vector solve_lower(const Vector& b) const;  // L^{-1} b
    Vector solve_upper(const Vector& b) const;  // L^{-T} b
    Vector apply_lower(const Vector& x) const;  // L x

private:
    Matrix l_;
};

// Eigen iteration cap per eigenvalue.
inline constexpr int kEigenMaxIterations = 60;

EigenDecomposition sym_eig(const DenseSymMatrix& a);
EigenDecomposition sym_eigvals(const DenseSymMatrix& a);  // eigenvectors left empty
EigenDecomposition gen_sym_eig(const DenseSymMatrix& a, const DenseSymMatrix& m);
DenseSymMatrix matrix_function(const DenseSymMatrix& a, const std::function<double(double)>& f);
DenseSymMatrix matrix_function(const EigenDecomposition& eig, const std::function<double(double)>& f);

// <v, w> = v^T G w.  An empty gram means the Euclidean product.
struct InnerProduct {
    LinearOp gram;

    static InnerProduct euclidean() { return {}; }
    static InnerProduct diagonal(Vector weights);
    static InnerProduct dense(const DenseSymMatrix& g);

    Vector apply_gram(const Vector& v) const { return gram ? gram(v) : v; }
    double operator()(const Vector& v, const Vector& w) const { return dot(v, apply_gram(w)); }
    double norm(const Vector& v) const;
};

struct CgOptions {
    double tol = 1e-8;
    int max_iter = 500;
    LinearOp preconditioner;  // optional, self-adjoint positive w.r.t. the inner product
};

struct CgResult {
    Vector solution;
    int iterations = 0;
    double residual = 0.0;  // relative, in the inner-product norm
};

CgResult conjugate_gradient(const LinearOp& op, const Vector& rhs, const InnerProduct& ip,
                            const CgOptions& opts = {});

}  // namespace aao
