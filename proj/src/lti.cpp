#include "qucert/lti.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qucert {

namespace {

double max_abs(const std::vector<double>& c) {
    double m = 0.0;
    for (double v : c) m = std::max(m, std::abs(v));
    return m;
}

// Drop trailing coefficients that are negligible against the largest one.
void trim(std::vector<double>& c) {
    const double floor = 1e-12 * std::max(max_abs(c), 1.0);
    while (c.size() > 1 && std::abs(c.back()) <= floor) c.pop_back();
}

std::vector<double> conv(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

std::vector<double> padded_sum(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
    return out;
}

Complex horner(const std::vector<double>& c, Complex s) {
    Complex acc(0.0, 0.0);
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
    return acc;
}

}  // namespace

RationalTransfer::RationalTransfer(std::vector<double> n, std::vector<double> d)
    : num(std::move(n)), den(std::move(d)) {
    if (num.empty() || den.empty()) throw SchemaError("rational transfer: empty coefficient list");
    trim(num);
    trim(den);
    if (max_abs(den) == 0.0) throw SchemaError("rational transfer: zero denominator");
    if (!is_proper()) throw SchemaError("rational transfer: improper (deg num > deg den)");
}

RationalTransfer RationalTransfer::first_order_lag(double t) {
    if (t < 0.0) throw SchemaError("first_order_lag: negative time constant");
    if (t == 0.0) return constant(1.0);
    return {{1.0}, {1.0, t}};
}

RationalTransfer RationalTransfer::pi(double k, double ti) {
    if (k <= 0.0 || ti <= 0.0) throw SchemaError("pi: gains and integral time must be positive");
    return {{k, k * ti}, {0.0, ti}};
}

Complex RationalTransfer::evaluate(Complex s) const { return horner(num, s) / horner(den, s); }

double RationalTransfer::static_gain() const {
    if (den[0] == 0.0) return std::numeric_limits<double>::infinity();
    return num[0] / den[0];
}

void RationalTransfer::normalize() {
    if (den[0] == 0.0) return;
    const double d0 = den[0];
    for (double& c : num) c /= d0;
    for (double& c : den) c /= d0;
}

RationalTransfer series(const RationalTransfer& a, const RationalTransfer& b) {
    RationalTransfer out(conv(a.num, b.num), conv(a.den, b.den));
    out.normalize();
    return out;
}

RationalTransfer add(const RationalTransfer& a, const RationalTransfer& b) {
    RationalTransfer out(padded_sum(conv(a.num, b.den), conv(b.num, a.den)), conv(a.den, b.den));
    out.normalize();
    return out;
}

RationalTransfer feedback_unity(const RationalTransfer& loop) {
    std::vector<double> den = padded_sum(loop.den, loop.num);
    trim(den);
    if (den.size() < loop.num.size())
        throw ComputationError("feedback_unity: closed loop is improper");
    RationalTransfer out(loop.num, std::move(den));
    out.normalize();
    return out;
}

RationalTransfer pade_delay(double dead_time, int order) {
    if (dead_time < 0.0) throw SchemaError("pade_delay: negative dead time");
    if (order < 1 || order > 5) throw SchemaError("pade_delay: order must be in [1,5]");
    if (dead_time == 0.0) return RationalTransfer::constant(1.0);
    const int n = order;
    auto fact = [](int k) {
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return f;
    };
    std::vector<double> numc(n + 1), denc(n + 1);
    for (int j = 0; j <= n; ++j) {
        const double c = fact(2 * n - j) * fact(n) / (fact(2 * n) * fact(j) * fact(n - j));
        numc[j] = c * std::pow(-dead_time, j);
        denc[j] = c * std::pow(dead_time, j);
    }
    return {std::move(numc), std::move(denc)};
}

Complex DelayedTransfer::response(double omega) const {
    return tf.evaluate(Complex(0.0, omega)) * std::polar(1.0, -omega * dead_time);
}

RationalTransfer DelayedTransfer::rational(int pade_order) const {
    if (dead_time == 0.0) return tf;
    return series(tf, pade_delay(dead_time, pade_order));
}

StateSpaceModel DelayedTransfer::realization(int pade_order) const {
    std::vector<RationalTransfer> chain = factors.empty() ? std::vector<RationalTransfer>{tf} : factors;
    if (dead_time > 0.0) chain.push_back(pade_delay(dead_time, pade_order));
    StateSpaceModel ss = realize(chain.front());
    for (std::size_t i = 1; i < chain.size(); ++i) ss = series_ss(ss, realize(chain[i]));
    return ss;
}

StateSpaceModel realize(const RationalTransfer& tf) {
    if (!tf.is_proper()) throw SchemaError("realize: improper transfer function");
    const int n = tf.degree_den();
    const double lead = tf.den.back();

    // Frequency scale s = rho * s' with rho the geometric mean of the pole
    // magnitudes; keeps the companion row balanced for spread time constants.
    double rho = 1.0;
    if (n > 0 && tf.den[0] != 0.0) rho = std::pow(std::abs(tf.den[0] / lead), 1.0 / n);

    std::vector<double> a(n + 1), b(n + 1, 0.0);
    double scale = 1.0;
    for (int i = 0; i <= n; ++i, scale *= rho) a[i] = tf.den[i] / lead * scale;
    scale = 1.0;
    for (std::size_t i = 0; i < tf.num.size(); ++i, scale *= rho) b[i] = tf.num[i] / lead * scale;
    const double alead = a[n];
    for (double& v : a) v /= alead;
    for (double& v : b) v /= alead;

    StateSpaceModel ss;
    ss.D = Eigen::MatrixXd::Constant(1, 1, b[n]);
    ss.A = Eigen::MatrixXd::Zero(n, n);
    ss.B = Eigen::MatrixXd::Zero(n, 1);
    ss.C = Eigen::MatrixXd::Zero(1, n);
    for (int i = 0; i + 1 < n; ++i) ss.A(i, i + 1) = rho;
    for (int i = 0; i < n; ++i) {
        ss.A(n - 1, i) = -a[i] * rho;
        ss.C(0, i) = b[i] - b[n] * a[i];
    }
    if (n > 0) ss.B(n - 1, 0) = rho;
    return ss;
}

StateSpaceModel series_ss(const StateSpaceModel& a, const StateSpaceModel& b) {
    if (a.inputs() != 1 || a.outputs() != 1 || b.inputs() != 1 || b.outputs() != 1)
        throw SchemaError("series_ss: SISO blocks only");
    const int na = a.order(), nb = b.order();
    StateSpaceModel ss;
    ss.A = Eigen::MatrixXd::Zero(na + nb, na + nb);
    ss.A.topLeftCorner(na, na) = a.A;
    ss.A.bottomLeftCorner(nb, na) = b.B * a.C;
    ss.A.bottomRightCorner(nb, nb) = b.A;
    ss.B = Eigen::MatrixXd::Zero(na + nb, 1);
    ss.B.topRows(na) = a.B;
    ss.B.bottomRows(nb) = b.B * a.D;
    ss.C = Eigen::MatrixXd::Zero(1, na + nb);
    ss.C.leftCols(na) = b.D(0, 0) * a.C;
    ss.C.rightCols(nb) = b.C;
    ss.D = b.D * a.D;
    return ss;
}

StateSpaceModel compose_mimo(const TransferMatrix& tm) {
    const int nb = static_cast<int>(tm.diagonal_blocks.size());
    if (tm.right_factor.rows() != nb || tm.right_factor.cols() != nb)
        throw SchemaError("compose_mimo: right factor dimension must match block count");
    std::vector<StateSpaceModel> blocks;
    blocks.reserve(nb);
    for (const auto& g : tm.diagonal_blocks) blocks.push_back(realize(g));
    return compose_blocks(blocks, tm.right_factor);
}

StateSpaceModel compose_blocks(const std::vector<StateSpaceModel>& blocks,
                               const Eigen::MatrixXd& right_factor) {
    const int nb = static_cast<int>(blocks.size());
    if (right_factor.rows() != nb || right_factor.cols() != nb)
        throw SchemaError("compose_blocks: right factor dimension must match block count");
    int total = 0;
    for (const auto& bl : blocks) {
        if (bl.inputs() != 1 || bl.outputs() != 1)
            throw SchemaError("compose_blocks: SISO blocks only");
        total += bl.order();
    }

    StateSpaceModel ss;
    ss.A = Eigen::MatrixXd::Zero(total, total);
    ss.B = Eigen::MatrixXd::Zero(total, nb);
    ss.C = Eigen::MatrixXd::Zero(nb, total);
    ss.D = Eigen::MatrixXd::Zero(nb, nb);
    int off = 0;
    for (int i = 0; i < nb; ++i) {
        const auto& bl = blocks[i];
        const int ni = bl.order();
        ss.A.block(off, off, ni, ni) = bl.A;
        ss.B.block(off, 0, ni, nb) = bl.B * right_factor.row(i);
        ss.C.block(i, off, 1, ni) = bl.C;
        ss.D.row(i) = bl.D(0, 0) * right_factor.row(i);
        off += ni;
    }
    return ss;
}

Eigen::MatrixXcd freq_response(const StateSpaceModel& sys, double omega) {
    return FrequencyEvaluator(sys)(omega);
}

std::vector<Eigen::MatrixXcd> freq_response_grid(const StateSpaceModel& sys,
                                                 std::span<const double> omegas,
                                                 ExecPolicy policy) {
    std::vector<Eigen::MatrixXcd> out(omegas.size());
    for (auto& m : out) m.resize(sys.outputs(), sys.inputs());  // allocate outside the loops
    const auto count = static_cast<std::ptrdiff_t>(omegas.size());
    const FrequencyEvaluator work(sys);
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel
        {
            FrequencyEvaluator::Scratch scratch;
#pragma omp for schedule(static)
            for (std::ptrdiff_t i = 0; i < count; ++i) work.eval_into(omegas[i], scratch, out[i]);
        }
    } else {
        FrequencyEvaluator::Scratch scratch;
        for (std::ptrdiff_t i = 0; i < count; ++i) work.eval_into(omegas[i], scratch, out[i]);
    }
    return out;
}

StepResponse step_response(const StateSpaceModel& sys, double horizon, double dt) {
    if (dt <= 0.0 || horizon <= 0.0) throw SchemaError("step_response: dt and horizon must be positive");
    if (sys.inputs() != 1 || sys.outputs() != 1)
        throw SchemaError("step_response: SISO systems only");

    StepResponse out;
    const int steps = static_cast<int>(std::llround(horizon / dt));
    out.time.reserve(steps + 1);
    out.value.reserve(steps + 1);

    if (sys.order() > 0) {
        const Eigen::VectorXcd eig = eigenvalues(sys.A);
        out.stable = (eig.real().maxCoeff() < 0.0);
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.order());
    const Eigen::VectorXd b = sys.B.col(0);
    const double d = sys.D(0, 0);
    auto deriv = [&](const Eigen::VectorXd& xs) -> Eigen::VectorXd { return sys.A * xs + b; };

    out.time.push_back(0.0);
    out.value.push_back(sys.order() > 0 ? (sys.C * x)(0) + d : d);
    for (int k = 1; k <= steps; ++k) {
        if (sys.order() > 0) {
            Eigen::VectorXd k1 = deriv(x);
            Eigen::VectorXd k2 = deriv(x + 0.5 * dt * k1);
            Eigen::VectorXd k3 = deriv(x + 0.5 * dt * k2);
            Eigen::VectorXd k4 = deriv(x + dt * k3);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.time.push_back(k * dt);
        out.value.push_back(sys.order() > 0 ? (sys.C * x)(0) + d : d);
    }
    return out;
}

StepResponse step_response(const RationalTransfer& tf, double horizon, double dt) {
    return step_response(realize(tf), horizon, dt);
}

namespace {

// Parlett-Reinsch balancing: diagonal similarity with powers of two until row
// and column norms agree. Eigen's QR solver does not balance on its own; the
// Hamiltonian-type matrices of the SPR test need it to keep imaginary-axis
// eigenvalues at the round-off floor.
void balance_in_place(Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    constexpr double radix = 2.0, radix2 = 4.0;
    bool done = false;
    while (!done) {
        done = true;
        for (int i = 0; i < n; ++i) {
            double c = 0.0, r = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) {
                    c += std::abs(a(j, i));
                    r += std::abs(a(i, j));
                }
            if (c == 0.0 || r == 0.0) continue;
            const double s = c + r;
            double f = 1.0, g = r / radix;
            while (c < g) {
                f *= radix;
                c *= radix2;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix2;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                a.row(i) *= 1.0 / f;
                a.col(i) *= f;
            }
        }
    }
}

}  // namespace

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw SchemaError("eigenvalues: matrix must be square");
    if (m.rows() == 0) return Eigen::VectorXcd(0);
    if (!m.allFinite()) throw SchemaError("eigenvalues: non-finite entries");
    Eigen::MatrixXd balanced = m;
    balance_in_place(balanced);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(balanced, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw ComputationError("eigenvalues: QR iteration did not converge");
    return solver.eigenvalues();
}

std::vector<double> log_grid(double lo, double hi, int points) {
    if (lo <= 0.0 || hi <= lo || points < 2) throw SchemaError("log_grid: need 0 < lo < hi, points >= 2");
    std::vector<double> g(points);
    const double llo = std::log10(lo), lhi = std::log10(hi);
    for (int i = 0; i < points; ++i)
        g[i] = std::pow(10.0, llo + (lhi - llo) * i / (points - 1));
    return g;
}

}  // namespace qucert
