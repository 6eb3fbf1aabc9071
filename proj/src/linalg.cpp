#include "aao/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace aao {

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Vector& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

void axpy(double a, const Vector& x, Vector& y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vector scaled(double a, Vector x) {
    for (double& v : x) v *= a;
    return x;
}

Vector add(const Vector& a, const Vector& b) {
    Vector r = a;
    axpy(1.0, b, r);
    return r;
}

Vector sub(const Vector& a, const Vector& b) {
    Vector r = a;
    axpy(-1.0, b, r);
    return r;
}

Vector hadamard(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("hadamard: size mismatch");
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
    return r;
}

Vector concat(const Vector& a, const Vector& b) {
    Vector r = a;
    r.insert(r.end(), b.begin(), b.end());
    return r;
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double value)
    : rows_(rows), cols_(cols), data_(rows * cols, value) {}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(const Vector& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::from_operator(const LinearOp& op, std::size_t in_dim, std::size_t out_dim) {
    Matrix m(out_dim, in_dim);
    Vector e(in_dim, 0.0);
    for (std::size_t j = 0; j < in_dim; ++j) {
        e[j] = 1.0;
        Vector col = op(e);
        e[j] = 0.0;
        if (col.size() != out_dim) throw std::invalid_argument("from_operator: output size mismatch");
        for (std::size_t i = 0; i < out_dim; ++i) m(i, j) = col[i];
    }
    return m;
}

Vector Matrix::apply(const Vector& x) const {
    if (x.size() != cols_) throw std::invalid_argument("Matrix::apply: size mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const double* r = row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vector Matrix::apply_transpose(const Vector& x) const {
    if (x.size() != rows_) throw std::invalid_argument("Matrix::apply_transpose: size mismatch");
    Vector y(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const double* r = row(i);
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < cols_; ++j) y[j] += r[j] * xi;
    }
    return y;
}

Vector Matrix::column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::operator*(const Matrix& b) const {
    if (cols_ != b.rows_) throw std::invalid_argument("Matrix product: size mismatch");
    Matrix c(rows_, b.cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
        double* ci = c.row(i);
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols_; ++j) ci[j] += a * bk[j];
        }
    }
    return c;
}

Matrix Matrix::operator+(const Matrix& b) const {
    if (rows_ != b.rows_ || cols_ != b.cols_) throw std::invalid_argument("Matrix sum: size mismatch");
    Matrix c = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) c.data_[i] += b.data_[i];
    return c;
}

Matrix Matrix::operator-(const Matrix& b) const {
    if (rows_ != b.rows_ || cols_ != b.cols_) throw std::invalid_argument("Matrix difference: size mismatch");
    Matrix c = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) c.data_[i] -= b.data_[i];
    return c;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

double Matrix::max_abs() const { return aao::max_abs(data_); }

DenseSymMatrix::DenseSymMatrix(Matrix m, double rel_tol) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("DenseSymMatrix: matrix is not square");
    const double scale = std::max(m_.max_abs(), 1e-300);
    const std::size_t n = m_.rows();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = m_(i, j), b = m_(j, i);
            if (std::abs(a - b) > rel_tol * scale) {
                std::ostringstream os;
                os << "DenseSymMatrix: entries (" << i << "," << j << ") differ by " << std::abs(a - b);
                throw std::invalid_argument(os.str());
            }
            const double avg = 0.5 * (a + b);
            m_(i, j) = avg;
            m_(j, i) = avg;
        }
    }
}

void DenseSymMatrix::add_to(std::size_t i, std::size_t j, double v) {
    m_(i, j) += v;
    if (i != j) m_(j, i) += v;
}

NotPositiveDefinite::NotPositiveDefinite(std::size_t p, double v)
    : NumericalError("matrix not positive definite: Cholesky pivot " + std::to_string(p) +
                     " is " + std::to_string(v)),
      pivot(p), value(v) {}

EigenNotConverged::EigenNotConverged(std::size_t i, int it)
    : NumericalError("symmetric eigensolver did not converge for eigenvalue " + std::to_string(i) +
                     " after " + std::to_string(it) + " iterations"),
      index(i), iterations(it) {}

CgFailure::CgFailure(const std::string& what, Vector b, double r, int it)
    : NumericalError(what), best(std::move(b)), residual(r), iterations(it) {}

Cholesky::Cholesky(const DenseSymMatrix& m) : l_(m.dim(), m.dim()) {
    const std::size_t n = m.dim();
    for (std::size_t j = 0; j < n; ++j) {
        const double* lj = l_.row(j);
        double s = m(j, j);
        for (std::size_t k = 0; k < j; ++k) s -= lj[k] * lj[k];
        if (!(s > 0.0) || !std::isfinite(s)) throw NotPositiveDefinite(j, s);
        const double d = std::sqrt(s);
        l_(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double* li = l_.row(i);
            double t = m(i, j);
            for (std::size_t k = 0; k < j; ++k) t -= li[k] * lj[k];
            l_(i, j) = t / d;
        }
    }
}

Vector Cholesky::solve_lower(const Vector& b) const {
    const std::size_t n = dim();
    if (b.size() != n) throw std::invalid_argument("Cholesky: size mismatch");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* li = l_.row(i);
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= li[k] * x[k];
        x[i] = s / li[i];
    }
    return x;
}

Vector Cholesky::solve_upper(const Vector& b) const {
    const std::size_t n = dim();
    if (b.size() != n) throw std::invalid_argument("Cholesky: size mismatch");
    Vector x = b;
    for (std::size_t ii = n; ii-- > 0;) {
        x[ii] /= l_(ii, ii);
        const double xi = x[ii];
        const double* li = l_.row(ii);
        for (std::size_t k = 0; k < ii; ++k) x[k] -= li[k] * xi;
    }
    return x;
}

Vector Cholesky::solve(const Vector& b) const { return solve_upper(solve_lower(b)); }

Vector Cholesky::apply_lower(const Vector& x) const {
    const std::size_t n = dim();
    Vector y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* li = l_.row(i);
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += li[k] * x[k];
        y[i] = s;
    }
    return y;
}

namespace {

// Householder reduction to tridiagonal form followed by implicit QL, after
// the EISPACK tred2/tql2 pair. w holds the transpose of the accumulated
// transformation so that all inner loops run along rows.
void tridiagonal_ql(Matrix& w, Vector& d, Vector& e, bool vectors) {
    const std::size_t n = w.rows();
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    auto V = [&w](std::size_t a, std::size_t b) -> double& { return w(b, a); };

    for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);
    for (std::size_t i = n - 1; i > 0; --i) {
        double scale = 0.0, h = 0.0;
        for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = V(i - 1, j);
                V(i, j) = 0.0;
                V(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                V(j, i) = f;
                g = e[j] + V(j, j) * f;
                double* wj = w.row(j);
                for (std::size_t k = j + 1; k < i; ++k) {
                    g += wj[k] * d[k];
                    e[k] += wj[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                double* wj = w.row(j);
                for (std::size_t k = j; k < i; ++k) wj[k] -= (f * e[k] + g * d[k]);
                d[j] = V(i - 1, j);
                V(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    if (vectors) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            V(n - 1, i) = V(i, i);
            V(i, i) = 1.0;
            const double h = d[i + 1];
            if (h != 0.0) {
                const double* wi1 = w.row(i + 1);
                for (std::size_t k = 0; k <= i; ++k) d[k] = wi1[k] / h;
                for (std::size_t j = 0; j <= i; ++j) {
                    double* wj = w.row(j);
                    double g = 0.0;
                    for (std::size_t k = 0; k <= i; ++k) g += wi1[k] * wj[k];
                    for (std::size_t k = 0; k <= i; ++k) wj[k] -= g * d[k];
                }
            }
            double* wi1 = w.row(i + 1);
            for (std::size_t k = 0; k <= i; ++k) wi1[k] = 0.0;
        }
        for (std::size_t j = 0; j < n; ++j) {
            d[j] = V(n - 1, j);
            V(n - 1, j) = 0.0;
        }
        V(n - 1, n - 1) = 1.0;
    } else {
        // Without accumulation the diagonal is still stored in the matrix.
        for (std::size_t i = 0; i + 1 < n; ++i) {
            V(n - 1, i) = V(i, i);
        }
        for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);
    }
    e[0] = 0.0;

    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    double f = 0.0, tst1 = 0.0;
    const double eps = std::ldexp(1.0, -52);
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n) {
            if (std::abs(e[m]) <= eps * tst1) break;
            ++m;
        }
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > kEigenMaxIterations) throw EigenNotConverged(l, iter - 1);
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                f += h;
                p = d[m];
                double c = 1.0, c2 = c, c3 = c, s = 0.0, s2 = 0.0;
                const double el1 = e[l + 1];
                for (std::size_t i = m; i-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if (vectors) {
                        double* a = w.row(i);
                        double* b = w.row(i + 1);
                        for (std::size_t k = 0; k < n; ++k) {
                            const double t = b[k];
                            b[k] = s * a[k] + c * t;
                            a[k] = c * a[k] - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

EigenDecomposition sym_eig_impl(const DenseSymMatrix& a, bool vectors) {
    const std::size_t n = a.dim();
    if (n == 0) throw std::invalid_argument("sym_eig: empty matrix");
    for (double v : a.matrix().data())
        if (!std::isfinite(v)) throw std::invalid_argument("sym_eig: non-finite entry");
    Matrix w = a.matrix();
    Vector d, e;
    if (n == 1) {
        d = {w(0, 0)};
        w(0, 0) = 1.0;
    } else {
        tridiagonal_ql(w, d, e, vectors);
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&d](std::size_t i, std::size_t j) { return d[i] < d[j]; });
    EigenDecomposition out;
    out.eigenvalues.resize(n);
    for (std::size_t k = 0; k < n; ++k) out.eigenvalues[k] = d[idx[k]];
    if (vectors) {
        out.eigenvectors = Matrix(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            const double* src = w.row(idx[k]);
            for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = src[i];
        }
    }
    return out;
}

}  // namespace

EigenDecomposition sym_eig(const DenseSymMatrix& a) { return sym_eig_impl(a, true); }

EigenDecomposition sym_eigvals(const DenseSymMatrix& a) { return sym_eig_impl(a, false); }

EigenDecomposition gen_sym_eig(const DenseSymMatrix& a, const DenseSymMatrix& m) {
    if (a.dim() != m.dim()) throw std::invalid_argument("gen_sym_eig: dimension mismatch");
    const std::size_t n = a.dim();
    Cholesky chol(m);
    // C = L^{-1} A L^{-T}, built column by column.
    Matrix tmp(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vector col = chol.solve_lower(a.matrix().column(j));
        for (std::size_t i = 0; i < n; ++i) tmp(j, i) = col[i];  // tmp = (L^{-1} A)^T = A L^{-T}
    }
    Matrix c(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vector col = chol.solve_lower(tmp.column(j));
        for (std::size_t i = 0; i < n; ++i) c(i, j) = col[i];
    }
    EigenDecomposition eig = sym_eig(DenseSymMatrix(std::move(c), 1e-6));
    for (std::size_t k = 0; k < n; ++k) {
        Vector x = chol.solve_upper(eig.eigenvectors.column(k));
        for (std::size_t i = 0; i < n; ++i) eig.eigenvectors(i, k) = x[i];
    }
    return eig;
}

DenseSymMatrix matrix_function(const EigenDecomposition& eig, const std::function<double(double)>& f) {
    const std::size_t n = eig.eigenvalues.size();
    Vector fl(n);
    for (std::size_t k = 0; k < n; ++k) {
        fl[k] = f(eig.eigenvalues[k]);
        if (!std::isfinite(fl[k])) {
            std::ostringstream os;
            os << "matrix_function: f undefined at eigenvalue " << eig.eigenvalues[k];
            throw std::domain_error(os.str());
        }
    }
    const Matrix& q = eig.eigenvectors;
    Matrix qf(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) qf(i, k) = q(i, k) * fl[k];
    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = qf.row(i);
        for (std::size_t j = i; j < n; ++j) {
            const double* b = q.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
            r(i, j) = s;
            r(j, i) = s;
        }
    }
    return DenseSymMatrix(std::move(r));
}

DenseSymMatrix matrix_function(const DenseSymMatrix& a, const std::function<double(double)>& f) {
    return matrix_function(sym_eig(a), f);
}

InnerProduct InnerProduct::diagonal(Vector weights) {
    for (double w : weights)
        if (!(w > 0.0)) throw std::invalid_argument("InnerProduct: weights must be positive");
    return {[w = std::move(weights)](const Vector& v) { return hadamard(w, v); }};
}

InnerProduct InnerProduct::dense(const DenseSymMatrix& g) {
    return {[g](const Vector& v) { return g.apply(v); }};
}

double InnerProduct::norm(const Vector& v) const {
    const double s = (*this)(v, v);
    return std::sqrt(std::max(s, 0.0));
}

namespace {
bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}
}  // namespace

CgResult conjugate_gradient(const LinearOp& op, const Vector& rhs, const InnerProduct& ip,
                            const CgOptions& opts) {
    const std::size_t n = rhs.size();
    Vector x(n, 0.0);
    if (!all_finite(rhs)) throw CgFailure("conjugate_gradient: non-finite right-hand side", x, NAN, 0);
    const double bnorm = ip.norm(rhs);
    if (bnorm == 0.0) return {x, 0, 0.0};

    Vector r = rhs;
    Vector z = opts.preconditioner ? opts.preconditioner(r) : r;
    Vector p = z;
    double rz = ip(r, z);
    Vector best = x;
    double best_res = 1.0;
    for (int it = 1; it <= opts.max_iter; ++it) {
        Vector q = op(p);
        const double pq = ip(p, q);
        if (!std::isfinite(pq) || !all_finite(q))
            throw CgFailure("conjugate_gradient: non-finite operator output", best, best_res, it);
        if (pq <= 0.0)
            throw CgFailure("conjugate_gradient: operator not positive definite", best, best_res, it);
        const double a = rz / pq;
        axpy(a, p, x);
        axpy(-a, q, r);
        const double res = ip.norm(r) / bnorm;
        if (!std::isfinite(res)) throw CgFailure("conjugate_gradient: non-finite residual", best, best_res, it);
        if (res < best_res) {
            best_res = res;
            best = x;
        }
        if (res <= opts.tol) return {x, it, res};
        z = opts.preconditioner ? opts.preconditioner(r) : r;
        const double rz_new = ip(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw CgFailure("conjugate_gradient: iteration limit " + std::to_string(opts.max_iter) + " reached",
                    best, best_res, opts.max_iter);
}

}  // namespace aao
