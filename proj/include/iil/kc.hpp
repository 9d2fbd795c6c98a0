#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "iil/matrix.hpp"
#include "iil/nn.hpp"

// Knowledge consolidation: moves student knowledge into the teacher with a
// scheduled exponential moving average.
namespace iil::kc {

struct Schedule {
    std::size_t freeze_epochs = 10;
    std::size_t period_epochs = 5;
    double alpha0 = 0.99;
    double e_w = 500.0;  // warm-up

    void validate() const;
};

struct EmaState {
    ParamVector teacher;
    std::size_t n = 0;  // consolidations applied since the phase started
    struct Step {
        std::size_t epoch;
        double alpha;
    };
    std::vector<Step> history;
};

// min(alpha0, 1 - e / (e + e_w)), e being the within-phase epoch.
double adaptive_momentum(std::size_t epoch, const Schedule& sched);

// epoch > freeze_epochs and epoch % period_epochs == 0.
bool should_consolidate(std::size_t epoch, const Schedule& sched);

// teacher <- alpha * teacher + (1 - alpha) * student; n <- n + 1.
EmaState consolidate(EmaState state, const ParamVector& student, double alpha);
// Variant that also appends (epoch, alpha) to the history.
EmaState consolidate(EmaState state, const ParamVector& student, double alpha, std::size_t epoch);

// alpha^n * theta_t0 + sum_{i=1..n} alpha^(n-i) (1 - alpha) * students[i-1].
ParamVector closed_form_teacher(const ParamVector& theta_t0, const std::vector<ParamVector>& students, double alpha);

// L(theta) = 1/2 (theta - c)^T A (theta - c), with A symmetric.
struct QuadraticLoss {
    Matrix a;
    std::vector<double> c;

    double value(const std::vector<double>& theta) const;
    std::vector<double> gradient(const std::vector<double>& theta) const;
};

// Inspection record for the old/new gradient trade-off at the consolidated
// teacher. The teacher is taken as theta_t^n = alpha^n theta_t0 + (1 - alpha^n) theta_sn
// (a student held at theta_sn over the n steps). The old loss is seen through
// theta_t0 and the new loss through the last student, each as an affine
// function of theta_t^n with the other contributions held fixed:
//   lhs            = d/dtheta_t^n [L_old(theta_t0(theta_t^n)) + L_new(theta_sn(theta_t^n))]
//   rhs_old_term   = (1 / alpha^n) dL_old/dtheta_t0
//   rhs_new_term   = (1 / (1 - alpha)) dL_new/dtheta_sn
// lhs is obtained by central differences of the composed loss, which are exact
// for quadratics up to rounding.
struct TradeoffReport {
    std::vector<double> teacher;
    std::vector<double> lhs;
    std::vector<double> rhs_old_term;
    std::vector<double> rhs_new_term;
    double max_abs_discrepancy = 0.0;  // max_i |lhs_i - (rhs_old_i + rhs_new_i)|
    double alpha = 0.0;
    std::size_t n = 0;

    // key=value lines, vectors as space-separated values.
    std::string to_kv() const;
};

TradeoffReport gradient_tradeoff_diagnostic(const QuadraticLoss& loss_old, const QuadraticLoss& loss_new,
                                            const std::vector<double>& theta_t0, const std::vector<double>& theta_sn,
                                            double alpha, std::size_t n);

// Euclidean distance between parameter vectors.
double param_distance(const ParamVector& a, const ParamVector& b);

}  // namespace iil::kc
