#ifndef QUCERT_LTI_HPP
#define QUCERT_LTI_HPP

#include <complex>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace qucert {

using Complex = std::complex<double>;

/// Thrown when an input violates a structural precondition (schema, shape, sign).
struct SchemaError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure fails (non-convergence, singularity).
struct ComputationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExecPolicy { Serial, Parallel };

/// Proper rational transfer function, coefficients in ascending powers of s.
struct RationalTransfer {
    std::vector<double> num{1.0};
    std::vector<double> den{1.0};

    RationalTransfer() = default;
    RationalTransfer(std::vector<double> n, std::vector<double> d);

    static RationalTransfer constant(double k) { return {{k}, {1.0}}; }
    /// 1 / (1 + sT); T = 0 degenerates to a pass-through.
    static RationalTransfer first_order_lag(double t);
    /// PI controller k (1 + 1/(sTi)) = k (1 + sTi) / (sTi).
    static RationalTransfer pi(double k, double ti);

    int degree_num() const { return static_cast<int>(num.size()) - 1; }
    int degree_den() const { return static_cast<int>(den.size()) - 1; }
    bool is_proper() const { return degree_num() <= degree_den(); }

    Complex evaluate(Complex s) const;
    /// num(0)/den(0); with an integrator in the denominator this diverges,
    /// callers that closed a loop first get the exact limit instead.
    double static_gain() const;

    /// Divide through by the denominator constant term when it is nonzero.
    void normalize();
};

RationalTransfer series(const RationalTransfer& a, const RationalTransfer& b);
RationalTransfer add(const RationalTransfer& a, const RationalTransfer& b);
/// loop / (1 + loop). Throws ComputationError if the result is improper.
RationalTransfer feedback_unity(const RationalTransfer& loop);
/// Diagonal Pade approximant of exp(-sT), order 1..5. Unit magnitude on the jw axis.
RationalTransfer pade_delay(double dead_time, int order);

struct StateSpaceModel {
    Eigen::MatrixXd A, B, C, D;

    int order() const { return static_cast<int>(A.rows()); }
    int inputs() const { return static_cast<int>(D.cols()); }
    int outputs() const { return static_cast<int>(D.rows()); }
};

/// Controllable canonical realization, frequency-scaled so the companion
/// block stays balanced for widely spread time constants.
StateSpaceModel realize(const RationalTransfer& tf);

/// Series interconnection y = b(a(u)) of SISO realizations.
StateSpaceModel series_ss(const StateSpaceModel& a, const StateSpaceModel& b);

/// Rational part plus a transport delay kept exact for frequency evaluation.
/// High-order chains keep their factored form so realizations cascade
/// well-conditioned low-order blocks instead of one flattened polynomial.
struct DelayedTransfer {
    RationalTransfer tf;
    double dead_time = 0.0;
    std::vector<RationalTransfer> factors;  // optional factorization of tf

    Complex response(double omega) const;
    RationalTransfer rational(int pade_order = 3) const;
    StateSpaceModel realization(int pade_order = 3) const;
    double static_gain() const { return tf.static_gain(); }
};

/// Block-diagonal SISO transfers multiplied from the right by a constant matrix.
struct TransferMatrix {
    std::vector<RationalTransfer> diagonal_blocks;
    Eigen::MatrixXd right_factor;
};

/// A = blkdiag(A_i), B = blkdiag(B_i) K, C = blkdiag(C_i), D = diag(d_i) K.
StateSpaceModel compose_mimo(const TransferMatrix& tm);
StateSpaceModel compose_blocks(const std::vector<StateSpaceModel>& blocks,
                               const Eigen::MatrixXd& right_factor);

Eigen::MatrixXcd freq_response(const StateSpaceModel& sys, double omega);
std::vector<Eigen::MatrixXcd> freq_response_grid(const StateSpaceModel& sys,
                                                 std::span<const double> omegas,
                                                 ExecPolicy policy = ExecPolicy::Parallel);

/// Complex casts hoisted out of per-frequency loops. One instance may be
/// shared across threads; each thread brings its own Scratch, so the inner
/// loop runs allocation-free.
class FrequencyEvaluator {
  public:
    struct Scratch {
        Eigen::MatrixXcd shifted, solved;
    };

    explicit FrequencyEvaluator(const StateSpaceModel& sys)
        : a_(sys.A.cast<Complex>()),
          b_(sys.B.cast<Complex>()),
          c_(sys.C.cast<Complex>()),
          d_(sys.D.cast<Complex>()) {}

    void eval_into(double omega, Scratch& s, Eigen::MatrixXcd& target) const {
        if (a_.rows() == 0) {
            target = d_;
            return;
        }
        s.shifted = -a_;
        s.shifted.diagonal().array() += Complex(0.0, omega);
        s.solved = Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXcd>>(s.shifted).solve(b_);
        target.resize(c_.rows(), b_.cols());
        target.noalias() = c_ * s.solved;
        target += d_;
    }

    Eigen::MatrixXcd operator()(double omega) const {
        Scratch s;
        Eigen::MatrixXcd target;
        eval_into(omega, s, target);
        return target;
    }

  private:
    Eigen::MatrixXcd a_, b_, c_, d_;
};

struct StepResponse {
    std::vector<double> time;
    std::vector<double> value;
    bool stable = true;
};

/// Unit step via classical fixed-step RK4. Unstable systems are flagged, not rejected.
StepResponse step_response(const StateSpaceModel& sys, double horizon, double dt);
StepResponse step_response(const RationalTransfer& tf, double horizon, double dt);

/// Full spectrum of a real square matrix. Throws ComputationError on iteration failure.
Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& m);

std::vector<double> log_grid(double lo, double hi, int points);

}  // namespace qucert

#endif
