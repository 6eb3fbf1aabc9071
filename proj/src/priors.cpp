#include "aao/priors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace aao::priors {

namespace {

void check_coefficients(double kappa, double gamma, int n_power) {
    if (kappa < 0.0 || gamma < 0.0) throw std::invalid_argument("smoothness_prior: coefficients must be nonnegative");
    if (kappa == 0.0 && gamma == 0.0) throw std::invalid_argument("smoothness_prior: kappa and gamma are both zero");
    if (n_power != 1 && n_power != 2) throw std::invalid_argument("smoothness_prior: n_power must be 1 or 2");
}

LinearOp diagonal_op(Vector d) {
    return [d = std::move(d)](const Vector& x) {
        if (x.size() != d.size()) throw std::invalid_argument("diagonal operator: size mismatch");
        return hadamard(d, x);
    };
}

LinearOp unsupported(std::string what) {
    return [what = std::move(what)](const Vector&) -> Vector { throw UnsupportedOperation(what); };
}

Vector smoothness_variances(double kappa, double gamma, int n_power, const Vector& lambda) {
    Vector v(lambda.size());
    for (std::size_t n = 0; n < v.size(); ++n) v[n] = std::pow(kappa + gamma * lambda[n], -n_power);
    return v;
}

}  // namespace

PriorModel diagonal_prior(std::string label, Vector variances, Vector mean) {
    const std::size_t n = variances.size();
    if (mean.empty()) mean.assign(n, 0.0);
    if (mean.size() != n) throw std::invalid_argument("diagonal_prior: mean and variances differ in size");
    Vector sq(n), inv(n);
    bool invertible = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(variances[i] >= 0.0)) throw std::invalid_argument("diagonal_prior: negative variance at " + std::to_string(i));
        sq[i] = std::sqrt(variances[i]);
        inv[i] = variances[i] > 0.0 ? 1.0 / variances[i] : 0.0;
        invertible = invertible && variances[i] > 0.0;
    }
    PriorModel p;
    p.label = std::move(label);
    p.mean = std::move(mean);
    p.cov = diagonal_op(variances);
    p.sqrt_cov = diagonal_op(sq);
    p.precision = invertible ? diagonal_op(inv) : unsupported("precision of a singular covariance");
    p.noise_dim = n;
    p.ip = InnerProduct::euclidean();
    p.variances = std::move(variances);
    return p;
}

PriorModel smoothness_prior(double kappa, double gamma, int n_power, const ModalBasis& basis) {
    check_coefficients(kappa, gamma, n_power);
    PriorModel p = diagonal_prior("smoothness", smoothness_variances(kappa, gamma, n_power, basis.eigenvalues()));
    return p;
}

PriorModel smoothness_prior(double kappa, double gamma, int n_power, const fem::Mesh& mesh) {
    check_coefficients(kappa, gamma, n_power);
    auto basis = std::make_shared<const ModalBasis>(ModalBasis::finite_element(mesh));
    const Vector c = smoothness_variances(kappa, gamma, n_power, basis->eigenvalues());
    // f(A^{-1}M) x = V f(c) V^T M x, using V^T M V = I.
    const auto modal_function = [basis](Vector d) {
        return [basis, d = std::move(d)](const Vector& x) {
            const Vector w = basis->nodal_modes().apply_transpose(basis->mass().apply(x));
            return basis->nodal_modes().apply(hadamard(d, w));
        };
    };
    Vector sq(c.size()), inv(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        sq[i] = std::sqrt(c[i]);
        inv[i] = 1.0 / c[i];
    }
    PriorModel p;
    p.label = "smoothness-fe";
    p.mean.assign(c.size(), 0.0);
    p.cov = modal_function(c);
    p.sqrt_cov = modal_function(sq);
    p.precision = modal_function(inv);
    p.whiten = [basis](const Vector& z) { return basis->nodal_modes().apply(z); };
    p.noise_dim = c.size();
    p.ip = InnerProduct::dense(basis->mass());
    return p;
}

PriorModel semigroup_state_prior(const PriorModel& cp, const ModalBasis& basis, const std::vector<double>& times,
                                 const Vector& forcing) {
    if (!cp.diagonal()) throw std::invalid_argument("semigroup_state_prior: parameter prior must be modal-diagonal");
    const std::size_t d = basis.size();
    if (cp.dim() != d) throw std::invalid_argument("semigroup_state_prior: prior and basis differ in size");
    if (!forcing.empty() && forcing.size() != d) throw std::invalid_argument("semigroup_state_prior: forcing size mismatch");
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1]))
            throw std::invalid_argument("semigroup_state_prior: times must be nonnegative and ascending");

    Vector var, mean;
    for (double t : times)
        for (std::size_t n = 0; n < d; ++n) {
            const double g = basis.eigenvalue(n);
            const double decay = std::exp(-g * t);
            var.push_back(decay * decay * cp.variances[n]);
            double m = decay * cp.mean[n];
            if (!forcing.empty()) m += forcing[n] * (-std::expm1(-g * t)) / g;
            mean.push_back(m);
        }
    PriorModel p = diagonal_prior("semigroup", std::move(var), std::move(mean));
    return p;
}

LinearOp heuristic_factor(const bh::BhOperator& op) {
    return [&op](const Vector& v) {
        const bh::BhBlockVector x = bh::unflatten(op, v);
        const bh::BhRange gx = op.apply_G(x);
        Vector second = gx.second;
        for (std::size_t n = 0; n < op.size(); ++n) second[n] /= std::sqrt(op.basis().eigenvalue(n));
        return concat(gx.first.data, second);
    };
}

LinearOp heuristic_remainder(const bh::BhOperator& op) {
    return [&op](const Vector& v) {
        const bh::BhBlockVector x = bh::unflatten(op, v);
        Vector second = op.state_time_integral(x.u);
        for (std::size_t n = 0; n < op.size(); ++n) {
            const double g = op.basis().eigenvalue(n);
            second[n] += (1.0 / std::sqrt(g) - 1.0 / g) * x.theta[n];
        }
        return concat(op.zero_field().data, second);
    };
}

double domain_norm(const bh::BhOperator& op, const Vector& v) {
    const bh::BhBlockVector x = bh::unflatten(op, v);
    return std::sqrt(op.inner_domain(x, x));
}

PriorModel heuristic_bh_prior(const bh::BhOperator& op, bool diagonal_only) {
    const std::size_t d = op.size();
    if (diagonal_only) {
        Vector var;
        for (int k = 0; k <= op.grid().steps(); ++k) var.insert(var.end(), d, 1.0);
        for (std::size_t n = 0; n < d; ++n) var.push_back(std::sqrt(op.basis().eigenvalue(n)));
        return diagonal_prior("heuristic-diagonal", std::move(var));
    }
    PriorModel p;
    p.label = "heuristic-full";
    p.mean.assign(op.zero_field().data.size() + d, 0.0);
    p.cov = [&op](const Vector& v) {
        const bh::BhBlockVector x = bh::unflatten(op, v);
        bh::BhBlockVector y{x.u, op.state_time_integral(x.u)};
        const Vector fin = op.state_final(x.u);
        for (std::size_t n = 0; n < op.size(); ++n) {
            const double g = op.basis().eigenvalue(n);
            for (int k = 0; k <= op.grid().steps(); ++k) y.u.cell(n, k) += g * x.theta[n];
            y.theta[n] += fin[n] / g + x.theta[n] / std::sqrt(g);
        }
        return bh::flatten(y);
    };
    p.sqrt_cov = unsupported("square root of the full heuristic prior");
    p.precision = unsupported("precision of the full heuristic prior");
    p.noise_dim = 0;
    InnerProduct u0 = bh::u0_inner_product(op);
    const std::size_t nu = op.zero_field().data.size();
    p.ip.gram = [u0 = std::move(u0), nu, &op](const Vector& v) {
        Vector u(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nu));
        Vector out = u0.apply_gram(u);
        for (std::size_t n = 0; n < op.size(); ++n) out.push_back(op.basis().eigenvalue(n) * v[nu + n]);
        return out;
    };
    return p;
}

PriorModel is_trivial_prior(const is::IsOperator& op) {
    const std::size_t d = op.size();
    // Per mode in the orthonormal coordinates (gamma u, theta): G~ = [[1, -1], [1/gamma, 0]].
    struct Block {
        Matrix cov, root, inv;
    };
    auto blocks = std::make_shared<std::vector<Block>>();
    for (std::size_t n = 0; n < d; ++n) {
        const double g = op.basis().eigenvalue(n);
        Matrix gm(2, 2);
        gm(0, 0) = 1.0;
        gm(0, 1) = -1.0;
        gm(1, 0) = 1.0 / g;
        const EigenDecomposition e = sym_eig(DenseSymMatrix(gm.transpose() * gm));
        blocks->push_back({matrix_function(e, [](double s) { return s; }).matrix(),
                           matrix_function(e, [](double s) { return std::sqrt(s); }).matrix(),
                           matrix_function(e, [](double s) { return 1.0 / s; }).matrix()});
    }
    const auto action = [&op, blocks](Matrix Block::*which) {
        return [&op, blocks, which](const Vector& x) {
            const std::size_t d = op.size();
            if (x.size() != 2 * d) throw std::invalid_argument("is_trivial_prior: size mismatch");
            Vector y(2 * d);
            for (std::size_t n = 0; n < d; ++n) {
                const double g = op.basis().eigenvalue(n);
                const Matrix& m = (*blocks)[n].*which;
                const double a = g * x[n], b = x[d + n];
                y[n] = (m(0, 0) * a + m(0, 1) * b) / g;
                y[d + n] = m(1, 0) * a + m(1, 1) * b;
            }
            return y;
        };
    };
    Vector w(2 * d, 1.0);
    for (std::size_t n = 0; n < d; ++n) w[n] = op.basis().eigenvalue(n) * op.basis().eigenvalue(n);
    PriorModel p;
    p.label = "is-trivial";
    p.mean.assign(2 * d, 0.0);
    p.cov = action(&Block::cov);
    p.sqrt_cov = action(&Block::root);
    p.precision = action(&Block::inv);
    p.whiten = [&op](const Vector& z) {
        Vector x = z;
        for (std::size_t n = 0; n < op.size(); ++n) x[n] /= op.basis().eigenvalue(n);
        return x;
    };
    p.noise_dim = 2 * d;
    p.ip = InnerProduct::diagonal(std::move(w));
    return p;
}

LinearOp is_forward(const is::IsOperator& op) {
    return [&op](const Vector& x) {
        const std::size_t d = op.size();
        if (x.size() != 2 * d) throw std::invalid_argument("is_forward: size mismatch");
        const is::L2Pair y = op.apply_G({Vector(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d)),
                                         Vector(x.begin() + static_cast<std::ptrdiff_t>(d), x.end())});
        return concat(y.first, y.second);
    };
}

std::vector<Vector> sample_prior(const PriorModel& p, std::uint64_t seed, std::size_t count) {
    if (!p.sqrt_cov) throw UnsupportedOperation("sample_prior: prior has no square root");
    Rng rng(seed);
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vector z = rng.normals(p.noise_dim);
        if (p.whiten) z = p.whiten(z);
        out.push_back(add(p.mean, p.sqrt_cov(z)));
    }
    return out;
}

std::vector<std::size_t> log_spaced_modes(std::size_t total, std::size_t count) {
    std::vector<std::size_t> out;
    if (total == 0 || count == 0) return out;
    if (count >= total) {
        for (std::size_t i = 0; i < total; ++i) out.push_back(i);
        return out;
    }
    const double top = std::log(static_cast<double>(total));
    for (std::size_t i = 0; i < count; ++i) {
        const double x = count == 1 ? 0.0 : top * static_cast<double>(i) / static_cast<double>(count - 1);
        std::size_t v = static_cast<std::size_t>(std::llround(std::exp(x))) - 1;
        if (!out.empty()) v = std::max(v, out.back() + 1);
        v = std::min(v, total - (count - i));
        out.push_back(v);
    }
    return out;
}

LinkCheckReport check_link_condition(const ImageNorm& psi, const ImageNorm& g,
                                     const std::function<Vector(Rng&)>& sampler, std::size_t n_samples,
                                     const std::vector<LinkProbe>& probes, std::uint64_t seed) {
    LinkCheckReport r;
    const auto ratio = [&](const Vector& x, double& out) {
        const double num = g(x), den = psi(x);
        if (!(den > 0.0) || !std::isfinite(den) || !std::isfinite(num)) return false;
        out = num / den;
        return std::isfinite(out) && out > 0.0;
    };
    Rng rng(seed);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const Vector x = sampler(rng);
        ++r.samples;
        double q;
        if (ratio(x, q)) r.ratios.push_back(q);
        else ++r.skipped;
    }
    for (const LinkProbe& p : probes) {
        double q;
        if (ratio(p.x, q)) {
            r.probe_modes.push_back(p.mode);
            r.probe_ratios.push_back(q);
        } else {
            ++r.skipped;
        }
    }
    Vector all = r.ratios;
    all.insert(all.end(), r.probe_ratios.begin(), r.probe_ratios.end());
    if (!all.empty()) {
        r.min_ratio = *std::min_element(all.begin(), all.end());
        r.max_ratio = *std::max_element(all.begin(), all.end());
    }
    const std::size_t k = r.probe_ratios.size();
    if (k >= 20) {
        const auto first = r.probe_ratios.begin(), last = r.probe_ratios.end() - 10;
        const double max_first = *std::max_element(first, first + 10), max_last = *std::max_element(last, r.probe_ratios.end());
        const double min_first = *std::min_element(first, first + 10), min_last = *std::min_element(last, r.probe_ratios.end());
        r.diverges = max_last > 10.0 * max_first;
        r.lower_stable = min_last >= 0.5 * min_first;
    }
    return r;
}

namespace {

std::vector<LinkProbe> theta_probes(std::size_t d, std::size_t offset, std::size_t total, std::size_t count) {
    std::vector<LinkProbe> out;
    for (std::size_t n : log_spaced_modes(d, count)) {
        Vector x(total, 0.0);
        x[offset + n] = 1.0;
        out.push_back({n, std::move(x)});
    }
    return out;
}

double is_g_norm(const is::IsOperator& op, const Vector& x) {
    const std::size_t d = op.size();
    double s = 0.0;
    for (std::size_t n = 0; n < d; ++n) {
        const double a = op.basis().eigenvalue(n) * x[n] - x[d + n];
        s += a * a + x[n] * x[n];
    }
    return std::sqrt(s);
}

std::function<Vector(Rng&)> is_sampler(const is::IsOperator& op) {
    return [&op](Rng& rng) {
        const std::size_t d = op.size();
        Vector x(2 * d);
        for (std::size_t n = 0; n < d; ++n) {
            const double g = op.basis().eigenvalue(n);
            x[n] = rng.normal() / (g * std::sqrt(g));
            x[d + n] = rng.normal() / std::sqrt(g);
        }
        return x;
    };
}

}  // namespace

LinkSetup is_trivial_link(const is::IsOperator& op, std::size_t probe_count) {
    // psi(G*G) = (G*G)^{1/2}, per mode in the orthonormal coordinates (gamma u, theta).
    auto roots = std::make_shared<std::vector<Matrix>>();
    for (std::size_t n = 0; n < op.size(); ++n) {
        const double g = op.basis().eigenvalue(n);
        Matrix gm(2, 2);
        gm(0, 0) = 1.0;
        gm(0, 1) = -1.0;
        gm(1, 0) = 1.0 / g;
        roots->push_back(matrix_function(DenseSymMatrix(gm.transpose() * gm), [](double s) { return std::sqrt(std::max(s, 0.0)); }).matrix());
    }
    LinkSetup s;
    s.name = "is-trivial";
    s.psi = [&op, roots](const Vector& x) {
        const std::size_t d = op.size();
        double acc = 0.0;
        for (std::size_t n = 0; n < d; ++n) {
            const Matrix& r = (*roots)[n];
            const double a = op.basis().eigenvalue(n) * x[n], b = x[d + n];
            const double p = r(0, 0) * a + r(0, 1) * b, q = r(1, 0) * a + r(1, 1) * b;
            acc += p * p + q * q;
        }
        return std::sqrt(acc);
    };
    s.g = [&op](const Vector& x) { return is_g_norm(op, x); };
    s.sampler = is_sampler(op);
    s.probes = theta_probes(op.size(), op.size(), 2 * op.size(), probe_count);
    return s;
}

LinkSetup is_inverse_link(const is::IsOperator& op, std::size_t probe_count) {
    LinkSetup s;
    s.name = "is-inverse";
    s.psi = [&op](const Vector& x) {
        const std::size_t d = op.size();
        double acc = 0.0;
        for (std::size_t n = 0; n < d; ++n) {
            const double g = op.basis().eigenvalue(n);
            acc += x[n] * x[n] + x[d + n] * x[d + n] / (g * g);
        }
        return std::sqrt(acc);
    };
    s.g = [&op](const Vector& x) { return is_g_norm(op, x); };
    s.sampler = is_sampler(op);
    s.probes = theta_probes(op.size(), op.size(), 2 * op.size(), probe_count);
    return s;
}

namespace {
std::function<Vector(Rng&)> bh_sampler(const bh::BhOperator& op) {
    return [&op](Rng& rng) {
        bh::BhBlockVector x{op.zero_field(), Vector(op.size())};
        for (std::size_t n = 0; n < op.size(); ++n) {
            const double g = op.basis().eigenvalue(n);
            for (std::size_t j = 0; j < x.u.stride(); ++j) x.u.mode(n)[j] = rng.normal() / std::sqrt(g);
            x.theta[n] = rng.normal() / g;
        }
        return bh::flatten(x);
    };
}
}  // namespace

LinkSetup bh_smoothing_link(const bh::BhOperator& op, std::size_t probe_count) {
    LinkSetup s;
    s.name = "bh-smoothing";
    Vector w(op.size());
    for (std::size_t n = 0; n < op.size(); ++n) w[n] = std::exp(-2.0 * op.basis().eigenvalue(n) * op.grid().final_time());
    s.psi = [&op, w](const Vector& v) {
        const bh::BhBlockVector x = bh::unflatten(op, v);
        double acc = op.state_l2l2_sq(x.u, w);
        for (std::size_t n = 0; n < op.size(); ++n) acc += w[n] * x.theta[n] * x.theta[n];
        return std::sqrt(acc);
    };
    s.g = [&op](const Vector& v) {
        const bh::BhRange y = op.apply_G(bh::unflatten(op, v));
        return std::sqrt(op.inner_range(y, y));
    };
    s.sampler = bh_sampler(op);
    const std::size_t nu = op.zero_field().data.size();
    s.probes = theta_probes(op.size(), nu, nu + op.size(), probe_count);
    return s;
}

std::array<double, 3> heuristic_remainder_stats(const bh::BhOperator& op, std::size_t samples, std::uint64_t seed) {
    const LinearOp rem = heuristic_remainder(op);
    const auto sampler = bh_sampler(op);
    const std::size_t nu = op.zero_field().data.size();
    Rng rng(seed);
    double lo = INFINITY, hi = 0.0, sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const Vector x = sampler(rng);
        const Vector r = rem(x);
        double rn = 0.0;
        for (std::size_t n = 0; n < op.size(); ++n) rn += op.basis().eigenvalue(n) * r[nu + n] * r[nu + n];
        const bh::BhRange y = op.apply_G(bh::unflatten(op, x));
        const double gn = std::sqrt(op.inner_range(y, y));
        if (!(gn > 0.0)) continue;
        const double q = std::sqrt(rn) / gn;
        lo = std::min(lo, q);
        hi = std::max(hi, q);
        sum += q;
        ++used;
    }
    if (used == 0) return {0.0, 0.0, 0.0};
    return {lo, sum / static_cast<double>(used), hi};
}

}  // namespace aao::priors
