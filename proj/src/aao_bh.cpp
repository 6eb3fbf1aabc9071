#include "aao/aao_bh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace aao::bh {

TimeGrid::TimeGrid(double T, int N) : t_(T), n_(N) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("TimeGrid: final time must be positive");
    if (N < 1) throw std::invalid_argument("TimeGrid: need at least one time step");
}

double TimeGrid::cell_begin(int k) const { return k == 0 ? 0.0 : (k - 0.5) * tau(); }
double TimeGrid::cell_end(int k) const { return k == n_ ? t_ : (k + 0.5) * tau(); }

namespace {

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGlNodes = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                            -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                            0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                              0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                              0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss(const F& f, double a, double b) {
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    double s = 0.0;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) s += kGlWeights[i] * f(m + h * kGlNodes[i]);
    return h * s;
}

// Subintervals shrink geometrically toward `edge` until they resolve 1/gamma.
template <class F>
double graded(const F& f, double a, double b, bool toward_a, double gamma) {
    const double h = b - a;
    if (h <= 0.0) return 0.0;
    const int levels = std::clamp(static_cast<int>(std::ceil(std::log2(std::max(h * gamma, 1.0)))) + 2, 0, 60);
    double s = 0.0;
    double outer = 1.0;
    for (int j = 0; j < levels; ++j) {
        const double inner = 0.5 * outer;
        s += toward_a ? gauss(f, a + inner * h, a + outer * h) : gauss(f, b - outer * h, b - inner * h);
        outer = inner;
    }
    s += toward_a ? gauss(f, a, a + outer * h) : gauss(f, b - outer * h, b);
    return s;
}

}  // namespace

ModeTime::ModeTime(double gamma, const TimeGrid& grid) : gamma_(gamma), grid_(grid) {
    if (!(gamma > 0.0)) throw std::invalid_argument("ModeTime: eigenvalue must be positive");
    const double T = grid.final_time();
    for (int k = 0; k <= grid.steps(); ++k) {
        const double a = grid.cell_begin(k), b = grid.cell_end(k);
        len_.push_back(b - a);
        e_.push_back(-std::exp(-gamma * (T - b)) * std::expm1(-gamma * (b - a)) / gamma);
    }
    q_ = -std::expm1(-2.0 * gamma * T) / (2.0 * gamma);
}

double ModeTime::inner(const double* a, const double* b) const {
    const std::size_t t = len_.size();
    double s = q_ * a[t] * b[t];
    for (std::size_t k = 0; k < t; ++k) s += len_[k] * a[k] * b[k] + e_[k] * (a[k] * b[t] + a[t] * b[k]);
    return s;
}

double ModeTime::integral(const double* a) const {
    const std::size_t t = len_.size();
    double s = -std::expm1(-gamma_ * grid_.final_time()) / gamma_ * a[t];
    for (std::size_t k = 0; k < t; ++k) s += len_[k] * a[k];
    return s;
}

double ModeTime::against_tail(const double* a) const {
    const std::size_t t = len_.size();
    double s = q_ * a[t];
    for (std::size_t k = 0; k < t; ++k) s += e_[k] * a[k];
    return s;
}

double ModeTime::state_value(const double* a, double t) const {
    const double T = grid_.final_time();
    if (t < 0.0 || t > T) throw std::invalid_argument("ModeTime::state_value: time outside [0, T]");
    const std::size_t tail = len_.size();
    double s = 0.0;
    for (std::size_t k = 0; k < tail; ++k) {
        const double lo = grid_.cell_begin(static_cast<int>(k));
        if (lo >= t) break;
        const double hi = std::min(grid_.cell_end(static_cast<int>(k)), t);
        s += a[k] * (-std::exp(-gamma_ * (t - hi)) * std::expm1(-gamma_ * (hi - lo)) / gamma_);
    }
    s += a[tail] * std::exp(-gamma_ * (T - t)) * (-std::expm1(-2.0 * gamma_ * t)) / (2.0 * gamma_);
    return s;
}

double ModeTime::state_integral(const double* a) const { return (integral(a) - against_tail(a)) / gamma_; }

double ModeTime::state_l2_sq(const double* a) const {
    const auto sq = [&](double t) {
        const double v = state_value(a, t);
        return v * v;
    };
    double s = 0.0;
    for (int k = 0; k <= grid_.steps(); ++k) {
        const double lo = grid_.cell_begin(k), hi = grid_.cell_end(k), mid = 0.5 * (lo + hi);
        s += graded(sq, lo, mid, true, gamma_) + graded(sq, mid, hi, false, gamma_);
    }
    return s;
}

Matrix ModeTime::gram() const {
    const std::size_t n = dim(), t = len_.size();
    Matrix g(n, n);
    for (std::size_t k = 0; k < t; ++k) {
        g(k, k) = len_[k];
        g(k, t) = g(t, k) = e_[k];
    }
    g(t, t) = q_;
    return g;
}

SpaceTimeField::SpaceTimeField(std::size_t m, int s) : modes(m), steps(s), data(m * (static_cast<std::size_t>(s) + 2), 0.0) {}

BhOperator::BhOperator(ModalBasis basis, TimeGrid grid) : basis_(std::move(basis)), grid_(grid) {
    modes_.reserve(basis_.size());
    for (std::size_t n = 0; n < basis_.size(); ++n) modes_.emplace_back(basis_.eigenvalue(n), grid_);
}

namespace {
void check_field(const SpaceTimeField& f, std::size_t modes, int steps, const char* what) {
    if (f.modes != modes || f.steps != steps || f.data.size() != modes * (static_cast<std::size_t>(steps) + 2))
        throw std::invalid_argument(std::string(what) + ": space-time field has the wrong shape");
}
void check_vec(const Vector& v, std::size_t n, const char* what) {
    if (v.size() != n) throw std::invalid_argument(std::string(what) + ": size mismatch");
}
}  // namespace

SpaceTimeField BhOperator::solve_forward(const SpaceTimeField& f) const {
    check_field(f, size(), grid_.steps(), "BhOperator::solve_forward");
    return f;
}

Vector BhOperator::state_at(const SpaceTimeField& u, double t) const {
    check_field(u, size(), grid_.steps(), "BhOperator::state_at");
    Vector v(size());
    for (std::size_t n = 0; n < size(); ++n) v[n] = modes_[n].state_value(u.mode(n), t);
    return v;
}

std::vector<Vector> BhOperator::state_slices(const SpaceTimeField& u) const {
    std::vector<Vector> out;
    for (int k = 0; k <= grid_.steps(); ++k) out.push_back(state_at(u, grid_.node(k)));
    return out;
}

Vector BhOperator::state_final(const SpaceTimeField& u) const { return against_tail(u); }

Vector BhOperator::state_time_integral(const SpaceTimeField& u) const {
    check_field(u, size(), grid_.steps(), "BhOperator::state_time_integral");
    Vector v(size());
    for (std::size_t n = 0; n < size(); ++n) v[n] = modes_[n].state_integral(u.mode(n));
    return v;
}

double BhOperator::state_l2l2_sq(const SpaceTimeField& u, const Vector& weights) const {
    check_field(u, size(), grid_.steps(), "BhOperator::state_l2l2_sq");
    if (!weights.empty()) check_vec(weights, size(), "BhOperator::state_l2l2_sq");
    double s = 0.0;
    for (std::size_t n = 0; n < size(); ++n) {
        const double w = weights.empty() ? 1.0 : weights[n];
        if (w != 0.0) s += w * modes_[n].state_l2_sq(u.mode(n));
    }
    return s;
}

BhRange BhOperator::apply_G(const BhBlockVector& x) const {
    check_field(x.u, size(), grid_.steps(), "BhOperator::apply_G");
    check_vec(x.theta, size(), "BhOperator::apply_G");
    BhRange y{x.u, Vector(size())};
    for (std::size_t n = 0; n < size(); ++n) {
        const double g = basis_.eigenvalue(n);
        for (int k = 0; k <= grid_.steps(); ++k) y.first.cell(n, k) += g * x.theta[n];
        y.second[n] = modes_[n].against_tail(x.u.mode(n)) + x.theta[n];
    }
    return y;
}

BhBlockVector BhOperator::apply_G_adjoint(const BhRange& y) const {
    check_field(y.first, size(), grid_.steps(), "BhOperator::apply_G_adjoint");
    check_vec(y.second, size(), "BhOperator::apply_G_adjoint");
    BhBlockVector x{y.first, Vector(size())};
    for (std::size_t n = 0; n < size(); ++n) {
        const double g = basis_.eigenvalue(n);
        x.u.tail(n) += g * y.second[n];
        x.theta[n] = (modes_[n].integral(y.first.mode(n)) + y.second[n]) / g;
    }
    return x;
}

std::pair<SpaceTimeField, Vector> BhOperator::transformed_GstarG(const SpaceTimeField& f, const Vector& g) const {
    check_field(f, size(), grid_.steps(), "BhOperator::transformed_GstarG");
    check_vec(g, size(), "BhOperator::transformed_GstarG");
    const double T = grid_.final_time();
    SpaceTimeField of = f;
    Vector og(size());
    for (std::size_t n = 0; n < size(); ++n) {
        const double gam = basis_.eigenvalue(n);
        const double fin = modes_[n].against_tail(f.mode(n));
        for (int k = 0; k <= grid_.steps(); ++k) of.cell(n, k) += g[n];
        of.tail(n) += gam * fin + g[n];
        og[n] = modes_[n].integral(f.mode(n)) + fin + (T + 1.0 / gam) * g[n];
    }
    return {std::move(of), std::move(og)};
}

Vector BhOperator::history_to_final(const SpaceTimeField& f) const { return against_tail(f); }

SpaceTimeField BhOperator::d_block(const SpaceTimeField& f) const {
    check_field(f, size(), grid_.steps(), "BhOperator::d_block");
    SpaceTimeField out = zero_field();
    for (std::size_t n = 0; n < size(); ++n) out.tail(n) = basis_.eigenvalue(n) * modes_[n].against_tail(f.mode(n));
    return out;
}

SpaceTimeField BhOperator::constant_in_time(const Vector& v) const {
    check_vec(v, size(), "BhOperator::constant_in_time");
    SpaceTimeField out = zero_field();
    for (std::size_t n = 0; n < size(); ++n)
        for (int k = 0; k <= grid_.steps(); ++k) out.cell(n, k) = v[n];
    return out;
}

SpaceTimeField BhOperator::tail_field(const Vector& v) const {
    check_vec(v, size(), "BhOperator::tail_field");
    SpaceTimeField out = zero_field();
    for (std::size_t n = 0; n < size(); ++n) out.tail(n) = v[n];
    return out;
}

Vector BhOperator::integral_of(const SpaceTimeField& f) const {
    check_field(f, size(), grid_.steps(), "BhOperator::integral_of");
    Vector v(size());
    for (std::size_t n = 0; n < size(); ++n) v[n] = modes_[n].integral(f.mode(n));
    return v;
}

Vector BhOperator::against_tail(const SpaceTimeField& f) const {
    check_field(f, size(), grid_.steps(), "BhOperator::against_tail");
    Vector v(size());
    for (std::size_t n = 0; n < size(); ++n) v[n] = modes_[n].against_tail(f.mode(n));
    return v;
}

double BhOperator::inner_l2l2(const SpaceTimeField& a, const SpaceTimeField& b) const {
    check_field(a, size(), grid_.steps(), "BhOperator::inner_l2l2");
    check_field(b, size(), grid_.steps(), "BhOperator::inner_l2l2");
    double s = 0.0;
    for (std::size_t n = 0; n < size(); ++n) s += modes_[n].inner(a.mode(n), b.mode(n));
    return s;
}

double BhOperator::inner_u0(const SpaceTimeField& a, const SpaceTimeField& b) const {
    check_field(a, size(), grid_.steps(), "BhOperator::inner_u0");
    check_field(b, size(), grid_.steps(), "BhOperator::inner_u0");
    double s = 0.0;
    for (std::size_t n = 0; n < size(); ++n) s += modes_[n].inner(a.mode(n), b.mode(n)) / basis_.eigenvalue(n);
    return s;
}

double BhOperator::inner_h1(const Vector& a, const Vector& b) const {
    check_vec(a, size(), "BhOperator::inner_h1");
    check_vec(b, size(), "BhOperator::inner_h1");
    double s = 0.0;
    for (std::size_t n = 0; n < size(); ++n) s += basis_.eigenvalue(n) * a[n] * b[n];
    return s;
}

double BhOperator::inner_domain(const BhBlockVector& a, const BhBlockVector& b) const {
    return inner_u0(a.u, b.u) + inner_h1(a.theta, b.theta);
}

double BhOperator::inner_range(const BhRange& a, const BhRange& b) const {
    return inner_wprime(a.first, b.first) + dot(a.second, b.second);
}

Vector flatten(const BhBlockVector& x) { return concat(x.u.data, x.theta); }

BhBlockVector unflatten(const BhOperator& op, const Vector& v) {
    BhBlockVector x{op.zero_field(), Vector(op.size())};
    const std::size_t nu = x.u.data.size();
    if (v.size() != nu + op.size()) throw std::invalid_argument("bh::unflatten: size mismatch");
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nu), x.u.data.begin());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(nu), v.end(), x.theta.begin());
    return x;
}

InnerProduct u0_inner_product(const BhOperator& op) {
    std::vector<Matrix> grams;
    for (std::size_t n = 0; n < op.size(); ++n) {
        Matrix g = op.mode_time(n).gram();
        g *= 1.0 / op.basis().eigenvalue(n);
        grams.push_back(std::move(g));
    }
    const std::size_t stride = static_cast<std::size_t>(op.grid().steps()) + 2;
    return {[grams = std::move(grams), stride](const Vector& v) {
        if (v.size() != grams.size() * stride) throw std::invalid_argument("U0 inner product: size mismatch");
        Vector out(v.size(), 0.0);
        for (std::size_t n = 0; n < grams.size(); ++n) {
            const Matrix& g = grams[n];
            for (std::size_t i = 0; i < stride; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < stride; ++j) s += g(i, j) * v[n * stride + j];
                out[n * stride + i] = s;
            }
        }
        return out;
    }};
}

BhCubicCoefficients BhCubicCoefficients::make(double mu, double T) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("BhCubicCoefficients: mu must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("BhCubicCoefficients: T must be positive");
    const double e1 = std::exp(-T / mu), e2 = std::exp(-2.0 * T / mu);
    BhCubicCoefficients c;
    c.mu = mu;
    c.T = T;
    c.alpha = mu - 0.5 * e2;
    c.beta = 2.0 * mu * e1 - 0.5 * e2 * (T + 1.0);
    c.rhs = mu * e2;
    c.log_rhs = std::log(mu) - 2.0 * T / mu;
    return c;
}

CubicRoots analytic_cubic_roots(const BhCubicCoefficients& c) {
    const double a2 = c.T + 2.5 + c.alpha;
    const double a1 = 1.5 * (c.T + 1.0) + c.beta;
    const double a0 = c.rhs;
    const auto poly = [&](double x) { return ((x - a2) * x + a1) * x - a0; };
    const auto dpoly = [&](double x) { return (3.0 * x - 2.0 * a2) * x + a1; };
    const auto polish = [&](double x) {
        for (int i = 0; i < 3; ++i) {
            const double d = dpoly(x);
            if (d == 0.0) break;
            x -= poly(x) / d;
        }
        return x;
    };

    const double shift = a2 / 3.0;
    const double p = a1 - a2 * a2 / 3.0;
    const double q = -2.0 * a2 * a2 * a2 / 27.0 + a2 * a1 / 3.0 - a0;
    const double disc = -(4.0 * p * p * p + 27.0 * q * q);

    CubicRoots r;
    if (p < 0.0 && disc >= 0.0) {
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m) , -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        std::array<double, 3> x;
        for (int k = 0; k < 3; ++k) x[k] = m * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0) + shift;
        std::sort(x.begin(), x.end());
        const double r3 = polish(x[2]), r2 = polish(x[1]);
        r.roots = {a0 / (r2 * r3), r2, r3};
        r.log_smallest = c.log_rhs - std::log(r2 * r3);
    } else {
        // One real root (Cardano) and a complex pair.
        const double s = std::sqrt(std::max(q * q / 4.0 + p * p * p / 27.0, 0.0));
        const double x = std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s) + shift;
        r.complex_pair = true;
        r.roots = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), polish(x)};
        r.log_smallest = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

DenseSymMatrix symmetric_laplacian(const fem::Mesh& mesh) {
    const DenseSymMatrix m = fem::assemble_mass(mesh);
    const DenseSymMatrix k = fem::assemble_stiffness(mesh);
    const DenseSymMatrix s = matrix_function(m, [](double x) { return 1.0 / std::sqrt(x); });
    return DenseSymMatrix(s.matrix() * k.matrix() * s.matrix(), 1e-6);
}

namespace {
// Q diag(f(gamma)) Q^T
Matrix spectral_function(const EigenDecomposition& eig, const std::function<double(double)>& f) {
    return matrix_function(eig, f).matrix();
}
}  // namespace

DenseSymMatrix assemble_discrete_eigensystem(const DenseSymMatrix& a_h, int N, double T) {
    if (N < 1) throw std::invalid_argument("assemble_discrete_eigensystem: N must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("assemble_discrete_eigensystem: T must be positive");
    const std::size_t d = a_h.dim();
    const EigenDecomposition eig = sym_eig(a_h);
    if (eig.eigenvalues.front() <= 0.0) throw NumericalError("assemble_discrete_eigensystem: A_h is not positive definite");
    const double tau = T / N;
    const auto c = [&](int k) { return (k == 0 || k == N) ? std::sqrt(0.5) : 1.0; };
    const std::size_t blocks = static_cast<std::size_t>(N) + 2;
    Matrix out(blocks * d, blocks * d);

    const auto put = [&](std::size_t bi, std::size_t bj, const Matrix& m, double scale) {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) out(bi * d + i, bj * d + j) += scale * m(i, j);
    };

    // A_h e^{-A_h s} for s = tau (2N - l - k)
    std::map<int, Matrix> decay;
    for (int l = 0; l <= N; ++l)
        for (int k = 0; k <= N; ++k) {
            const int key = 2 * N - l - k;
            auto it = decay.find(key);
            if (it == decay.end()) {
                const double s = tau * key;
                it = decay.emplace(key, spectral_function(eig, [s](double g) { return g * std::exp(-g * s); })).first;
            }
            put(l, k, it->second, tau * c(l) * c(k));
        }
    const Matrix eye = Matrix::identity(d);
    const std::size_t gb = static_cast<std::size_t>(N) + 1;
    for (int k = 0; k <= N; ++k) {
        put(k, k, eye, 1.0);
        const double s = T - tau * k;
        Matrix e = spectral_function(eig, [s](double g) { return std::exp(-g * s); }) + eye;
        const double w = std::sqrt(tau) * c(k);
        put(gb, k, e, w);
        put(k, gb, e.transpose(), w);
    }
    put(gb, gb, eye, T);
    put(gb, gb, spectral_function(eig, [](double g) { return 1.0 / g; }), 1.0);
    return DenseSymMatrix(std::move(out), 1e-6);
}

DenseSymMatrix assemble_discrete_eigensystem(const fem::Mesh& mesh, int N, double T) {
    return assemble_discrete_eigensystem(symmetric_laplacian(mesh), N, T);
}

Vector discrete_spectrum_bh(const fem::Mesh& mesh, int N, double T, std::size_t count) {
    const DenseSymMatrix s = assemble_discrete_eigensystem(mesh, N, T);
    if (count > s.dim()) throw std::invalid_argument("discrete_spectrum_bh: count exceeds system size");
    const Vector all = sym_eigvals(s).eigenvalues;
    Vector out;
    for (std::size_t r = 0; r < count; ++r) out.push_back(all[all.size() - 1 - r]);
    return out;
}

std::vector<Cluster> cluster_summary(const Vector& eigenvalues, const std::vector<double>& targets, double radius) {
    std::vector<Cluster> out;
    for (double t : targets) {
        Cluster c{t, 0, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        double sum = 0.0, far = 0.0;
        for (double v : eigenvalues)
            if (std::abs(v - t) <= radius) {
                ++c.members;
                sum += v;
                far = std::max(far, std::abs(v - t));
            }
        if (c.members > 0) {
            c.center = sum / static_cast<double>(c.members);
            c.max_distance = far;
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace aao::bh
