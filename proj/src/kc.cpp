#include "iil/kc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace iil::kc {

void Schedule::validate() const {
    if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw std::invalid_argument("alpha0 must lie in (0, 1)");
    if (period_epochs < 1) throw std::invalid_argument("period_epochs must be >= 1");
    if (!(e_w > 0.0)) throw std::invalid_argument("e_w must be positive");
}

double adaptive_momentum(std::size_t epoch, const Schedule& sched) {
    const double e = static_cast<double>(epoch);
    return std::min(sched.alpha0, 1.0 - e / (e + sched.e_w));
}

bool should_consolidate(std::size_t epoch, const Schedule& sched) {
    return epoch > sched.freeze_epochs && epoch % sched.period_epochs == 0;
}

EmaState consolidate(EmaState state, const ParamVector& student, double alpha) {
    if (state.teacher.size() != student.size()) throw std::invalid_argument("teacher/student length mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    for (std::size_t i = 0; i < student.size(); ++i)
        state.teacher[i] = alpha * state.teacher[i] + (1.0 - alpha) * student[i];
    ++state.n;
    return state;
}

EmaState consolidate(EmaState state, const ParamVector& student, double alpha, std::size_t epoch) {
    state = consolidate(std::move(state), student, alpha);
    state.history.push_back({epoch, alpha});
    return state;
}

ParamVector closed_form_teacher(const ParamVector& theta_t0, const std::vector<ParamVector>& students, double alpha) {
    if (students.empty()) throw std::invalid_argument("need at least one student");
    for (const auto& s : students)
        if (s.size() != theta_t0.size()) throw std::invalid_argument("student length mismatch");
    const std::size_t n = students.size();
    ParamVector out(theta_t0.size());
    const double an = std::pow(alpha, static_cast<double>(n));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = an * theta_t0[j];
    for (std::size_t i = 1; i <= n; ++i) {
        const double w = std::pow(alpha, static_cast<double>(n - i)) * (1.0 - alpha);
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * students[i - 1][j];
    }
    return out;
}

double QuadraticLoss::value(const std::vector<double>& theta) const {
    const std::size_t d = c.size();
    double v = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) v += (theta[i] - c[i]) * a(i, j) * (theta[j] - c[j]);
    return 0.5 * v;
}

std::vector<double> QuadraticLoss::gradient(const std::vector<double>& theta) const {
    const std::size_t d = c.size();
    std::vector<double> g(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) g[i] += a(i, j) * (theta[j] - c[j]);
    return g;
}

TradeoffReport gradient_tradeoff_diagnostic(const QuadraticLoss& loss_old, const QuadraticLoss& loss_new,
                                            const std::vector<double>& theta_t0, const std::vector<double>& theta_sn,
                                            double alpha, std::size_t n) {
    if (alpha == 0.0) throw std::invalid_argument("alpha = 0: 1/alpha^n is undefined");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    const std::size_t d = theta_t0.size();
    if (theta_sn.size() != d || loss_old.c.size() != d || loss_new.c.size() != d || loss_old.a.rows() != d ||
        loss_new.a.rows() != d)
        throw std::invalid_argument("dimension mismatch");

    const double an = std::pow(alpha, static_cast<double>(n));
    TradeoffReport rep;
    rep.alpha = alpha;
    rep.n = n;
    rep.teacher.resize(d);
    for (std::size_t i = 0; i < d; ++i) rep.teacher[i] = an * theta_t0[i] + (1.0 - an) * theta_sn[i];

    // theta_t^n = an * theta_t0 + r_old   and   theta_t^n = (1 - alpha) * theta_sn + r_new.
    std::vector<double> r_old(d), r_new(d);
    for (std::size_t i = 0; i < d; ++i) {
        r_old[i] = rep.teacher[i] - an * theta_t0[i];
        r_new[i] = rep.teacher[i] - (1.0 - alpha) * theta_sn[i];
    }
    auto composed = [&](const std::vector<double>& tn) {
        std::vector<double> t0(d), sn(d);
        for (std::size_t i = 0; i < d; ++i) {
            t0[i] = (tn[i] - r_old[i]) / an;
            sn[i] = (tn[i] - r_new[i]) / (1.0 - alpha);
        }
        return loss_old.value(t0) + loss_new.value(sn);
    };

    rep.lhs.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double h = 1e-3 * std::max({1.0, std::abs(rep.teacher[i])}) * std::min(an, 1.0 - alpha);
        auto up = rep.teacher, dn = rep.teacher;
        up[i] += h;
        dn[i] -= h;
        rep.lhs[i] = (composed(up) - composed(dn)) / (2.0 * h);
    }

    const auto g_old = loss_old.gradient(theta_t0);
    const auto g_new = loss_new.gradient(theta_sn);
    rep.rhs_old_term.resize(d);
    rep.rhs_new_term.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        rep.rhs_old_term[i] = g_old[i] / an;
        rep.rhs_new_term[i] = g_new[i] / (1.0 - alpha);
        rep.max_abs_discrepancy =
            std::max(rep.max_abs_discrepancy, std::abs(rep.lhs[i] - (rep.rhs_old_term[i] + rep.rhs_new_term[i])));
    }
    return rep;
}

std::string TradeoffReport::to_kv() const {
    std::ostringstream out;
    auto vec = [&](const char* key, const std::vector<double>& v) {
        out << key << '=';
        char buf[32];
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            out << (i ? " " : "") << buf;
        }
        out << '\n';
    };
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", alpha);
    out << "alpha=" << buf << '\n' << "n=" << n << '\n';
    vec("teacher", teacher);
    vec("lhs", lhs);
    vec("rhs_old_term", rhs_old_term);
    vec("rhs_new_term", rhs_new_term);
    std::snprintf(buf, sizeof buf, "%.17g", max_abs_discrepancy);
    out << "max_abs_discrepancy=" << buf << '\n';
    return out.str();
}

double param_distance(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("parameter length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace iil::kc
