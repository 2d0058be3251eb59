#include "negperc/erm_solvers.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "negperc/seeding.hpp"

namespace negperc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

constexpr double kInf = std::numeric_limits<double>::infinity();

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

VectorXd random_unit(int d, std::uint64_t seed) {
    boost::random::mt19937_64 gen(seed);
    boost::random::normal_distribution<double> normal;
    VectorXd v(d);
    do {
        for (int j = 0; j < d; ++j) v[j] = normal(gen);
    } while (v.norm() == 0.0);
    return v / v.norm();
}

// ============================================================================
// Log-barrier path following
// ============================================================================

// minimize w'z s.t. B z > c and, when ball_dims > 0, |z[0:ball_dims]| < 1.
struct BarrierProblem {
    const MatrixXd& B;
    VectorXd c;
    VectorXd w;
    int ball_dims = 0;
};

struct BarrierResult {
    VectorXd z;
    double t = 1.0;
    int newton_steps = 0;
    bool converged = false;
    bool unbounded = false;
    bool stopped_early = false;
};

BarrierResult barrier_solve(const BarrierProblem& p, VectorXd z, double gap_tol, int max_newton,
                            const std::function<bool(const VectorXd&)>& early_stop = {}) {
    const int n = static_cast<int>(p.B.rows()), dim = static_cast<int>(p.B.cols());
    const int m = n + (p.ball_dims > 0 ? 1 : 0);
    BarrierResult res;
    double t = 1.0;
    auto ball_slack = [&](const VectorXd& x) {
        return p.ball_dims > 0 ? 1.0 - x.head(p.ball_dims).squaredNorm() : 1.0;
    };
    MatrixXd Bs(n, dim), H(dim, dim);
    while (true) {
        for (int it = 0; it < 60; ++it) {
            if (res.newton_steps >= max_newton) {
                res.z = z;
                res.t = t;
                return res;
            }
            const VectorXd s = p.B * z - p.c;
            const VectorXd inv = s.cwiseInverse();
            VectorXd g = t * p.w - p.B.transpose() * inv;
            Bs = inv.asDiagonal() * p.B;
            H.setZero();
            H.selfadjointView<Eigen::Lower>().rankUpdate(Bs.transpose());
            // The ball adds (2/b) I + (4/b^2) z z'; the rank-one part goes through
            // Sherman-Morrison since it dominates the conditioning near the sphere.
            VectorXd u = VectorXd::Zero(dim);
            double rho = 0.0;
            if (p.ball_dims > 0) {
                const double b = ball_slack(z);
                const auto zb = z.head(p.ball_dims);
                g.head(p.ball_dims) += (2.0 / b) * zb;
                H.topLeftCorner(p.ball_dims, p.ball_dims).diagonal().array() += 2.0 / b;
                u.head(p.ball_dims) = zb;
                rho = 4.0 / (b * b);
            }
            Eigen::LDLT<MatrixXd> ldlt(H.selfadjointView<Eigen::Lower>());
            VectorXd dz = -ldlt.solve(g);
            if (rho > 0.0) {
                const VectorXd hu = ldlt.solve(u);
                dz -= hu * (rho * u.dot(dz) / (1.0 + rho * u.dot(hu)));
            }
            const double dec = -g.dot(dz);
            ++res.newton_steps;
            if (!(dec >= 0.0) || !dz.allFinite()) break;
            if (0.5 * dec <= 1e-8) break;
            // Backtracking on the change in the barrier, accumulated term by term as
            // log1p ratios so it stays accurate when t w'z dwarfs the log terms.
            const VectorXd ds = p.B * dz;
            const double b0 = ball_slack(z);
            const double zd = p.ball_dims > 0 ? z.head(p.ball_dims).dot(dz.head(p.ball_dims)) : 0.0;
            const double dd = p.ball_dims > 0 ? dz.head(p.ball_dims).squaredNorm() : 0.0;
            auto change = [&](double a, bool* ok) {
                double f = t * a * p.w.dot(dz);
                for (int i = 0; i < n; ++i) {
                    const double r = a * ds[i] / s[i];
                    if (!(r > -1.0)) {
                        *ok = false;
                        return kInf;
                    }
                    f -= std::log1p(r);
                }
                if (p.ball_dims > 0) {
                    const double r = -(2.0 * zd + a * dd) * a / b0;
                    if (!(r > -1.0)) {
                        *ok = false;
                        return kInf;
                    }
                    f -= std::log1p(r);
                }
                *ok = true;
                return f;
            };
            double alpha = 1.0;
            bool ok = false;
            double df = change(alpha, &ok);
            for (int ls = 0; ls < 80 && !(ok && df <= -0.25 * alpha * dec); ++ls) {
                alpha *= 0.5;
                df = change(alpha, &ok);
            }
            if (!ok || !(df <= -0.25 * alpha * dec)) break;
            const VectorXd trial = z + alpha * dz;
            if ((p.B * trial - p.c).minCoeff() <= 0.0 || !(ball_slack(trial) > 0.0)) break;
            const double moved = alpha * dz.norm();
            z = trial;
            if (moved <= 1e-13 * (1.0 + z.norm())) break;  // roundoff floor of the decrement
            if (z.norm() > 1e10) {
                res.unbounded = true;
                res.z = z;
                res.t = t;
                return res;
            }
            if (early_stop && early_stop(z)) {
                res.stopped_early = true;
                res.z = z;
                res.t = t;
                return res;
            }
        }
        if (m / t < gap_tol) break;
        t *= 10.0;
    }
    res.converged = true;
    res.z = z;
    res.t = t;
    return res;
}

// Strictly feasible point of {A theta > kappa, |theta| < 1}, or nothing.
std::optional<VectorXd> phase_one(const MatrixXd& A, double kappa, double gap_tol, int* steps) {
    const int n = static_cast<int>(A.rows()), d = static_cast<int>(A.cols());
    if (kappa < 0.0) return VectorXd::Zero(d);
    MatrixXd B(n, d + 1);
    B << A, VectorXd::Ones(n);
    VectorXd w = VectorXd::Zero(d + 1);
    w[d] = 1.0;
    VectorXd z0 = VectorXd::Zero(d + 1);
    z0[d] = kappa + 1.0;
    const BarrierProblem p{B, VectorXd::Constant(n, kappa), w, d};
    const auto r = barrier_solve(p, z0, gap_tol, 2000, [d](const VectorXd& z) { return z[d] < -1e-9; });
    *steps += r.newton_steps;
    if (!r.stopped_early) return std::nullopt;
    return VectorXd(r.z.head(d));
}

// ============================================================================
// Primal-dual interior point for the ball-constrained program
// ============================================================================

// The program as a cone LP: minimize -v'theta with slacks
//   s_r = A theta - kappa >= 0  and  s_c = (1, theta) in the Lorentz cone Q,
// duals z_r >= 0 and z_c in Q. Nesterov-Todd scaling on Q, Mehrotra
// predictor-corrector, infeasible dual start. Stationarity reads
// v + A' z_r + z_c[1:] = 0.
struct PdResult {
    VectorXd theta;
    VectorXd lambda;  // z_r
    int iterations = 0;
    bool converged = false;
};

// Scaling point of (s, z) in int Q: W = eta B(w), B the Lorentz boost
// [[w0, w1'], [w1, I + w1 w1'/(1 + w0)]], so that W^2 z = s.
struct LorentzScaling {
    double eta = 1.0;
    VectorXd w;

    // B y
    VectorXd boost(const VectorXd& y) const {
        const int p = static_cast<int>(y.size());
        VectorXd out(p);
        const double w1y = w.tail(p - 1).dot(y.tail(p - 1));
        out[0] = w[0] * y[0] + w1y;
        out.tail(p - 1) = y.tail(p - 1) + (y[0] + w1y / (1.0 + w[0])) * w.tail(p - 1);
        return out;
    }
    VectorXd apply(const VectorXd& y) const { return eta * boost(y); }
    // W^-1 = J B J / eta
    VectorXd apply_inverse(const VectorXd& y) const {
        VectorXd t = y;
        t.tail(t.size() - 1) *= -1.0;
        t = boost(t);
        t.tail(t.size() - 1) *= -1.0;
        return t / eta;
    }
};

double lorentz_det(const VectorXd& x) {
    const double r = x.tail(x.size() - 1).norm();
    return (x[0] - r) * (x[0] + r);
}

LorentzScaling lorentz_scaling(const VectorXd& s, const VectorXd& z) {
    const double sn = std::sqrt(lorentz_det(s)), zn = std::sqrt(lorentz_det(z));
    const VectorXd sb = s / sn, zb = z / zn;
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    LorentzScaling sc;
    sc.eta = std::sqrt(sn / zn);
    sc.w = sb;
    sc.w[0] += zb[0];
    sc.w.tail(s.size() - 1) -= zb.tail(s.size() - 1);
    sc.w /= 2.0 * gamma;
    return sc;
}

// Jordan product u o v = (u'v, u0 v1 + v0 u1) and its inverse in u.
VectorXd lorentz_product(const VectorXd& u, const VectorXd& v) {
    const int p = static_cast<int>(u.size());
    VectorXd out(p);
    out[0] = u.dot(v);
    out.tail(p - 1) = u[0] * v.tail(p - 1) + v[0] * u.tail(p - 1);
    return out;
}

VectorXd lorentz_divide(const VectorXd& l, const VectorXd& r) {
    const int p = static_cast<int>(l.size());
    VectorXd u(p);
    u[0] = (l[0] * r[0] - l.tail(p - 1).dot(r.tail(p - 1))) / lorentz_det(l);
    u.tail(p - 1) = (r.tail(p - 1) - u[0] * l.tail(p - 1)) / l[0];
    return u;
}

// Largest a with x + a dx in Q (x interior), capped at cap.
double lorentz_step(const VectorXd& x, const VectorXd& dx, double cap) {
    const int p = static_cast<int>(x.size());
    const double qa = dx[0] * dx[0] - dx.tail(p - 1).squaredNorm();
    const double qb = 2.0 * (x[0] * dx[0] - x.tail(p - 1).dot(dx.tail(p - 1)));
    const double qc = lorentz_det(x);
    double a = cap;
    auto consider = [&](double r) {
        if (r > 0.0 && std::isfinite(r)) a = std::min(a, r);
    };
    if (qa == 0.0) {
        if (qb < 0.0) consider(-qc / qb);
        return a;
    }
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return a;  // qa > 0, det stays positive
    const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
    if (q != 0.0) {
        consider(q / qa);
        consider(qc / q);
    }
    return a;
}

PdResult ball_lp_primal_dual(const MatrixXd& A, double kappa, const VectorXd& v, VectorXd theta, double gap_tol,
                             int max_iters) {
    const int n = static_cast<int>(A.rows()), d = static_cast<int>(A.cols());
    const double degree = n + 1.0;
    const double scale = 1.0 + v.norm();
    PdResult res;

    auto slack_cone = [&](const VectorXd& th) {
        VectorXd sc(d + 1);
        sc[0] = 1.0;
        sc.tail(d) = th;
        return sc;
    };
    VectorXd sr = A * theta - VectorXd::Constant(n, kappa);
    VectorXd sc = slack_cone(theta);
    // Central start: z = s^-1 blockwise.
    VectorXd zr = sr.cwiseInverse();
    VectorXd zc = sc / lorentz_det(sc);
    zc.tail(d) *= -1.0;

    double best = kInf;
    res.theta = theta;
    res.lambda = zr;
    MatrixXd As(n, d), H(d, d);
    for (int it = 0; it < max_iters; ++it) {
        const double nu = (sr.dot(zr) + sc.dot(zc)) / degree;
        const VectorXd rd = v + A.transpose() * zr + zc.tail(d);
        const double merit = std::max(rd.norm() / scale, degree * nu);
        if (merit < best) {
            best = merit;
            res.theta = theta;
            res.lambda = zr;
        }
        if (best <= 1e-3 * gap_tol) break;
        ++res.iterations;

        const LorentzScaling W = lorentz_scaling(sc, zc);
        const VectorXd lr = (sr.cwiseProduct(zr)).cwiseSqrt();
        const VectorXd lc = W.apply(zc);
        // H = A' diag(z/s) A + (I + 2 w1 w1') / eta^2
        As = (zr.cwiseQuotient(sr)).cwiseSqrt().asDiagonal() * A;
        H.setZero();
        H.selfadjointView<Eigen::Lower>().rankUpdate(As.transpose());
        H.selfadjointView<Eigen::Lower>().rankUpdate(W.w.tail(d), 2.0 / (W.eta * W.eta));
        H.diagonal().array() += 1.0 / (W.eta * W.eta);
        Eigen::LDLT<MatrixXd> ldlt(H.selfadjointView<Eigen::Lower>());
        if (ldlt.info() != Eigen::Success) break;

        // Newton step for the scaled complementarity targets (cr, cc):
        //   lambda o (W^-1 ds + W dz) = c, ds = -G dtheta, G' dz = rd.
        VectorXd ds_r, ds_c, dz_r, dz_c;
        auto direction = [&](const VectorXd& cr, const VectorXd& cc) {
            const VectorXd qr = cr.cwiseQuotient(lr);
            const VectorXd qc = lorentz_divide(lc, cc);
            const VectorXd wq_r = qr.cwiseProduct((zr.cwiseQuotient(sr)).cwiseSqrt());  // W^-1 q, rows
            const VectorXd wq_c = W.apply_inverse(qc);
            const VectorXd rhs = rd + A.transpose() * wq_r + wq_c.tail(d);
            const VectorXd dth = ldlt.solve(rhs);
            ds_r = A * dth;
            ds_c = VectorXd::Zero(d + 1);
            ds_c.tail(d) = dth;
            // dz = W^-2 (G dtheta) + W^-1 q with G dtheta = -ds.
            dz_r = wq_r - zr.cwiseQuotient(sr).cwiseProduct(ds_r);
            dz_c = wq_c - W.apply_inverse(W.apply_inverse(ds_c));
            return dth;
        };
        auto max_step = [&]() {
            double a = kInf;
            for (int i = 0; i < n; ++i) {
                if (ds_r[i] < 0.0) a = std::min(a, -sr[i] / ds_r[i]);
                if (dz_r[i] < 0.0) a = std::min(a, -zr[i] / dz_r[i]);
            }
            a = lorentz_step(sc, ds_c, a);
            return lorentz_step(zc, dz_c, a);
        };

        // Predictor.
        VectorXd cc = -lorentz_product(lc, lc);
        direction(-lr.cwiseProduct(lr), cc);
        const double a_aff = std::min(1.0, max_step());
        const double nu_aff = ((sr + a_aff * ds_r).dot(zr + a_aff * dz_r) + (sc + a_aff * ds_c).dot(zc + a_aff * dz_c)) /
                              degree;
        const double sigma = std::pow(std::clamp(nu_aff / nu, 0.0, 1.0), 3);
        // Corrector with the second-order term (W^-1 ds) o (W dz).
        const VectorXd er = ds_r.cwiseProduct(dz_r);  // diagonal scalings cancel on rows
        const VectorXd ec = lorentz_product(W.apply_inverse(ds_c), W.apply(dz_c));
        VectorXd cr = VectorXd::Constant(n, sigma * nu) - lr.cwiseProduct(lr) - er;
        cc = -lorentz_product(lc, lc) - ec;
        cc[0] += sigma * nu;
        const VectorXd dth = direction(cr, cc);
        const double a = std::min(1.0, 0.99 * max_step());
        if (!(a > 1e-12)) break;

        theta += a * dth;
        zr += a * dz_r;
        zc += a * dz_c;
        sr = A * theta - VectorXd::Constant(n, kappa);
        sc = slack_cone(theta);
        if (sr.minCoeff() <= 0.0 || !(lorentz_det(sc) > 0.0)) break;
    }
    res.converged = best <= gap_tol;
    return res;
}

void fill_feasibility(SolverReport& rep, const MatrixXd& A, double kappa, const VectorXd& theta) {
    const VectorXd m = A * theta;
    rep.feasibility_residual = std::max(0.0, kappa - m.minCoeff());
}

}  // namespace

// ============================================================================
// Data
// ============================================================================

VectorXd Dataset::theta_star() const {
    VectorXd e = VectorXd::Zero(d());
    if (d() > 0) e[0] = 1.0;
    return e;
}

MatrixXd Dataset::signed_features() const { return labels.asDiagonal() * features; }

Dataset sample_dataset(int n, int d, DataModel model, std::uint64_t seed, const std::optional<LinkFunction>& link) {
    if (n < 1 || d < 1) throw std::invalid_argument("sample_dataset: n and d must be positive");
    if (model == DataModel::linear_signal && !link) throw std::invalid_argument("sample_dataset: signal model needs a link");
    Dataset data;
    data.model = model;
    data.seed = seed;
    if (model == DataModel::linear_signal) data.link = link;
    data.features.resize(n, d);
    data.labels.resize(n);
    boost::random::mt19937_64 gen(seed);
    boost::random::normal_distribution<double> normal;
    boost::random::uniform_01<double> unif;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) data.features(i, j) = normal(gen);
        const double u = unif(gen);
        const double p = model == DataModel::linear_signal ? (*link)(data.features(i, 0)) : 0.5;
        data.labels[i] = u < p ? 1.0 : -1.0;
    }
    return data;
}

double margin(const VectorXd& theta, const Dataset& data) {
    const double nrm = theta.norm();
    if (!(nrm > 0.0)) throw std::invalid_argument("margin: zero vector");
    return (data.labels.asDiagonal() * (data.features * theta)).minCoeff() / nrm;
}

VectorXd lp_direction(const Dataset& data) {
    if (data.model == DataModel::pure_noise) return random_unit(data.d(), derive_seed(data.seed, {0x7664ULL}));
    return data.features.transpose() * data.labels / static_cast<double>(data.n());
}

namespace {

template <class T>
void put(std::ostream& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("read_snapshot: truncated input");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace

void write_snapshot(std::ostream& out, const Dataset& data) {
    out.write("NPDS", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(data.n()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(data.d()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(data.model));
    put<double>(out, data.link ? data.link->alpha() : 0.0);
    put<std::uint64_t>(out, data.seed);
    for (int i = 0; i < data.n(); ++i) put<std::int8_t>(out, data.labels[i] > 0 ? 1 : -1);
    for (int i = 0; i < data.n(); ++i)
        for (int j = 0; j < data.d(); ++j) put<double>(out, data.features(i, j));
}

Dataset read_snapshot(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "NPDS", 4) != 0) throw std::runtime_error("read_snapshot: bad magic");
    if (get<std::uint32_t>(in) != 1) throw std::runtime_error("read_snapshot: unsupported version");
    const auto n = get<std::uint64_t>(in), d = get<std::uint64_t>(in);
    const auto model = get<std::uint8_t>(in);
    const double alpha = get<double>(in);
    if (model > 1) throw std::runtime_error("read_snapshot: unknown model tag");
    Dataset data;
    data.model = static_cast<DataModel>(model);
    if (data.model == DataModel::linear_signal) data.link = LinkFunction::logistic(alpha);
    data.seed = get<std::uint64_t>(in);
    data.labels.resize(static_cast<Eigen::Index>(n));
    data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::uint64_t i = 0; i < n; ++i) data.labels[static_cast<Eigen::Index>(i)] = get<std::int8_t>(in);
    for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = 0; j < d; ++j)
            data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = get<double>(in);
    return data;
}

// ============================================================================
// LP
// ============================================================================

namespace {

SolverReport lp_interior_point(const Dataset& data, double kappa, const VectorXd& v, const LpOptions& opts) {
    const auto t0 = Clock::now();
    const MatrixXd A = data.signed_features();
    SolverReport rep;
    int steps = 0;
    const auto start = phase_one(A, kappa, opts.gap_tol, &steps);
    if (!start) {
        // Converged to an infeasible verdict: no theta in the ball meets the constraints.
        rep.theta_hat = VectorXd::Zero(data.d());
        rep.converged = true;
        rep.iterations = steps;
        rep.margin = -kInf;
        rep.wall_ms = elapsed_ms(t0);
        return rep;
    }
    const auto r = ball_lp_primal_dual(A, kappa, v, *start, opts.gap_tol, 500);
    rep.iterations = steps + r.iterations;
    rep.converged = r.converged;
    const VectorXd& theta = r.theta;
    // Weak duality: any lambda >= 0 bounds the optimum by |v + A'lambda| - kappa sum(lambda).
    const double dual = (v + A.transpose() * r.lambda).norm() - kappa * r.lambda.sum();
    rep.duality_gap = dual - v.dot(theta);
    rep.norm = theta.norm();
    fill_feasibility(rep, A, kappa, theta);
    rep.theta_hat = rep.norm > 0.0 ? VectorXd(theta / rep.norm) : theta;
    rep.margin = rep.norm > 0.0 ? margin(theta, data) : -kInf;
    const double stol = opts.success_tol * (1.0 + std::fabs(kappa));
    rep.success = rep.norm >= 1.0 - stol && rep.margin >= kappa - stol && rep.feasibility_residual <= opts.tol;
    rep.wall_ms = elapsed_ms(t0);
    return rep;
}

SolverReport lp_subgradient(const Dataset& data, double kappa, const VectorXd& v, const LpOptions& opts) {
    const auto t0 = Clock::now();
    const MatrixXd A = data.signed_features();
    const int n = data.n();
    const int iters = opts.max_iters > 0 ? opts.max_iters : 20 * n;
    const double c = opts.step_scale > 0.0 ? opts.step_scale : 1.0 / A.rowwise().norm().maxCoeff();
    // min over lambda >= 0 of |v + A' lambda| - kappa sum(lambda).
    VectorXd lambda = VectorXd::Zero(n), avg = VectorXd::Zero(n);
    double wsum = 0.0;
    SolverReport rep;
    for (int t = 1; t <= iters; ++t) {
        const VectorXd u = v + A.transpose() * lambda;
        const double un = u.norm();
        VectorXd g = VectorXd::Constant(n, -kappa);
        if (un > 0.0) g += A * (u / un);
        lambda = (lambda - (c / std::sqrt(static_cast<double>(t))) * g).cwiseMax(0.0);
        // Polyak averaging over the second half of the run.
        if (2 * t >= iters) {
            avg += lambda;
            wsum += 1.0;
        }
        rep.iterations = t;
    }
    if (wsum > 0.0) avg /= wsum;
    const VectorXd u = v + A.transpose() * avg;
    const double un = u.norm();
    rep.converged = false;  // fixed budget; the verdict rests on the final feasibility check
    rep.norm = un > 0.0 ? 1.0 : 0.0;
    rep.theta_hat = un > 0.0 ? VectorXd(u / un) : VectorXd::Zero(data.d());
    rep.duality_gap = un - kappa * avg.sum() - v.dot(rep.theta_hat);
    fill_feasibility(rep, A, kappa, rep.theta_hat);
    rep.margin = un > 0.0 ? margin(rep.theta_hat, data) : -kInf;
    const double stol = opts.success_tol * (1.0 + std::fabs(kappa));
    rep.success = un > 0.0 && rep.margin >= kappa - stol;
    rep.wall_ms = elapsed_ms(t0);
    return rep;
}

}  // namespace

SolverReport lp_solve(const Dataset& data, double kappa, const VectorXd& v, const LpOptions& opts) {
    if (v.size() != data.d()) throw std::invalid_argument("lp_solve: direction has wrong dimension");
    if (!(v.norm() > 0.0)) throw std::invalid_argument("lp_solve: zero direction");
    return opts.method == LpMethod::interior_point ? lp_interior_point(data, kappa, v, opts) : lp_subgradient(data, kappa, v, opts);
}

UnconstrainedLp lp_solve_unconstrained(const Dataset& data, double kappa, const VectorXd& v, const LpOptions& opts) {
    if (!(v.norm() > 0.0)) throw std::invalid_argument("lp_solve_unconstrained: zero direction");
    const MatrixXd A = data.signed_features();
    UnconstrainedLp out;
    int steps = 0;
    const auto start = phase_one(A, kappa, opts.gap_tol, &steps);
    if (!start) return out;
    const BarrierProblem p{A, VectorXd::Constant(data.n(), kappa), -v, 0};
    const auto r = barrier_solve(p, *start, opts.gap_tol, 5000);
    out.theta = r.z;
    out.unbounded = r.unbounded;
    out.converged = r.converged;
    out.norm_at_least_one = r.unbounded || r.z.norm() >= 1.0 - opts.success_tol * (1.0 + std::fabs(kappa));
    return out;
}

bool lp_success_equivalence_check(const Dataset& data, double kappa, const VectorXd& v, const LpOptions& opts) {
    const auto ball = lp_solve(data, kappa, v, opts);
    const auto free = lp_solve_unconstrained(data, kappa, v, opts);
    return ball.success == free.norm_at_least_one;
}

// ============================================================================
// Gradient descent
// ============================================================================

namespace {

// log(1 + exp(-z)) and its derivative -1 / (1 + exp(z)).
double softplus_neg(double z) { return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }
double softplus_neg_slope(double z) {
    if (z > 0.0) {
        const double e = std::exp(-z);
        return -e / (1.0 + e);
    }
    return -1.0 / (1.0 + std::exp(z));
}

}  // namespace

double gd_risk(const VectorXd& theta, const Dataset& data, double kappa) {
    const VectorXd m = data.labels.asDiagonal() * (data.features * theta);
    const double shift = kappa * theta.norm();
    double acc = 0.0;
    for (int i = 0; i < m.size(); ++i) acc += softplus_neg(m[i] - shift);
    return acc / static_cast<double>(m.size());
}

VectorXd gd_gradient(const VectorXd& theta, const Dataset& data, double kappa) {
    const double nrm = theta.norm();
    if (!(nrm > 0.0)) throw std::invalid_argument("gd_gradient: zero vector");
    const VectorXd m = data.labels.asDiagonal() * (data.features * theta);
    VectorXd w(m.size());
    for (int i = 0; i < m.size(); ++i) w[i] = softplus_neg_slope(m[i] - kappa * nrm);
    const double n = static_cast<double>(m.size());
    return (data.features.transpose() * data.labels.cwiseProduct(w) - kappa * w.sum() * theta / nrm) / n;
}

GdResult gd_solve(const Dataset& data, double kappa, const GdConfig& cfg) {
    const auto t0 = Clock::now();
    const MatrixXd A = data.signed_features();
    const int n = data.n(), d = data.d();
    const std::uint64_t stream = derive_seed(data.seed, {cfg.seed, 0x6764ULL});
    VectorXd theta = random_unit(d, stream);
    boost::random::mt19937_64 gen(derive_seed(stream, {1}));
    const bool full = cfg.batch_size <= 0 || cfg.batch_size >= n;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    int cursor = n;

    GdResult out;
    SolverReport& rep = out.report;
    double prev_risk = kInf;
    VectorXd w(n);
    for (int it = 0;; ++it) {
        const VectorXd m = A * theta;
        const double nrm = theta.norm();
        rep.margin = m.minCoeff() / nrm;
        const double shift = kappa * nrm;
        double risk = 0.0;
        for (int i = 0; i < n; ++i) risk += softplus_neg(m[i] - shift);
        risk /= n;
        if (!std::isfinite(risk)) throw std::runtime_error("gd_solve: non-finite risk");
        if (full && risk > prev_risk * (1.0 + 1e-12) + 1e-300) rep.risk_monotone = false;
        prev_risk = risk;
        if (cfg.trajectory_stride > 0 && it % cfg.trajectory_stride == 0) out.trajectory.push_back({it, risk, rep.margin});
        rep.iterations = it;
        if (rep.margin >= kappa) {
            rep.success = true;
            rep.converged = true;
            break;
        }
        if (it >= cfg.max_iters) break;

        VectorXd grad;
        if (full) {
            for (int i = 0; i < n; ++i) w[i] = softplus_neg_slope(m[i] - shift);
            grad = (A.transpose() * w - kappa * w.sum() * theta / nrm) / static_cast<double>(n);
        } else {
            // Next batch of a per-epoch permutation (Fisher-Yates with a portable engine).
            grad = VectorXd::Zero(d);
            double wsum = 0.0;
            for (int k = 0; k < cfg.batch_size; ++k) {
                if (cursor >= n) {
                    for (int i = n - 1; i > 0; --i) {
                        boost::random::uniform_int_distribution<int> pick(0, i);
                        std::swap(perm[i], perm[pick(gen)]);
                    }
                    cursor = 0;
                }
                const int i = perm[cursor++];
                const double wi = softplus_neg_slope(m[i] - shift);
                grad += wi * A.row(i).transpose();
                wsum += wi;
            }
            grad = (grad - kappa * wsum * theta / nrm) / static_cast<double>(cfg.batch_size);
        }
        rep.grad_norm = grad.norm();
        theta -= cfg.eta * grad;
        const double after = theta.norm();
        if (after < cfg.norm_floor) {
            theta *= after > 0.0 ? cfg.norm_floor / after : 0.0;
            if (after == 0.0) theta = cfg.norm_floor * random_unit(d, derive_seed(stream, {2, static_cast<std::uint64_t>(it)}));
            rep.norm_floor_hit = true;
        }
    }
    rep.norm = theta.norm();
    rep.theta_hat = theta / rep.norm;
    rep.feasibility_residual = std::max(0.0, kappa - rep.margin);
    rep.wall_ms = elapsed_ms(t0);
    return out;
}

// ============================================================================
// Margin and radius
// ============================================================================

MarginEstimate max_margin_estimate(const Dataset& data, const MarginBudget& budget) {
    MarginEstimate est;
    const VectorXd v = lp_direction(data);
    est.theta_best = v / v.norm();
    est.kappa_hat = margin(v, data);
    double lo = est.kappa_hat;
    double hi = data.features.rowwise().norm().minCoeff();  // no unit vector beats min_i |x_i|
    auto record = [&](const VectorXd& th) {
        const double m = margin(th, data);
        if (m > est.kappa_hat) {
            est.kappa_hat = m;
            est.theta_best = th / th.norm();
        }
    };
    for (int step = 0; step < budget.bisection_steps && hi - lo > 1e-9; ++step) {
        const double mid = 0.5 * (lo + hi);
        bool ok = false;
        const auto lp = lp_solve(data, mid, v, budget.lp);
        ++est.solver_calls;
        if (lp.norm > 0.0) record(lp.theta_hat);
        ok = lp.success;
        if (!ok) {
            const auto gd = gd_solve(data, mid, budget.gd);
            ++est.solver_calls;
            record(gd.report.theta_hat);
            ok = gd.report.success;
        }
        if (ok) {
            lo = std::max(mid, est.kappa_hat);
        } else {
            hi = mid;
        }
    }
    return est;
}

Radius radius_from_margin(double kappa_hat) {
    if (!(kappa_hat < 0.0)) throw std::domain_error("radius_from_margin: kappa_hat >= 0, the polytope is unbounded");
    return Radius{-1.0 / kappa_hat, -kappa_hat};
}

}  // namespace negperc
