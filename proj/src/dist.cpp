#include "rcar/dist.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace rcar {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

void validate(const ScalarDist::Variant& v) {
    if (const auto* c = std::get_if<Constant>(&v)) {
        if (!finite_nonneg(c->value))
            throw ValidationError("Constant: value must be finite and >= 0");
    } else if (const auto* b = std::get_if<ScaledBernoulli>(&v)) {
        if (!(std::isfinite(b->prob) && b->prob >= 0.0 && b->prob <= 1.0))
            throw ValidationError("ScaledBernoulli: prob must lie in [0,1]");
        if (!finite_nonneg(b->value))
            throw ValidationError("ScaledBernoulli: value must be finite and >= 0");
    } else if (const auto* e = std::get_if<Exponential>(&v)) {
        if (!(std::isfinite(e->rate) && e->rate > 0.0))
            throw ValidationError("Exponential: rate must be finite and > 0");
    } else if (const auto* l = std::get_if<LogNormal>(&v)) {
        if (!std::isfinite(l->mu))
            throw ValidationError("LogNormal: mu must be finite");
        if (!(std::isfinite(l->sigma) && l->sigma > 0.0))
            throw ValidationError("LogNormal: sigma must be finite and > 0");
    } else if (const auto* u = std::get_if<UniformLaw>(&v)) {
        if (!(std::isfinite(u->lo) && std::isfinite(u->hi) && u->lo >= 0.0 && u->hi > u->lo))
            throw ValidationError("Uniform: need 0 <= lo < hi, both finite");
    }
}

// ---- adaptive Simpson ------------------------------------------------------

struct SimpsonState {
    long evals = 0;
    long max_evals = 0;
    double abs_error = 0.0;
};

double eval_counted(const std::function<double(double)>& f, double x, SimpsonState& st) {
    if (++st.evals > st.max_evals)
        throw NumericError("quadrature: evaluation cap reached before tolerance");
    return f(x);
}

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole, double eps,
                   int depth, SimpsonState& st) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = eval_counted(f, lm, st);
    const double frm = eval_counted(f, rm, st);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) {
        st.abs_error += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    return simpson_rec(f, a, m, fa, flm, fm, left, eps * 0.5, depth - 1, st) +
           simpson_rec(f, m, b, fm, frm, fb, right, eps * 0.5, depth - 1, st);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double eps, SimpsonState& st) {
    const double fa = eval_counted(f, a, st);
    const double fb = eval_counted(f, b, st);
    const double m = 0.5 * (a + b);
    const double fm = eval_counted(f, m, st);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, eps, 52, st);
}

// E[g(D)] for the absolutely continuous laws, as an integral over t in (0,1).
// Exponential and LogNormal use x = t/(1-t); ChiSquare1 integrates over the
// half-line of the underlying normal (u = t/(1-t), x = u^2), which removes
// the density singularity at zero. The weight factor is checked first so g
// is never evaluated where the weight has underflowed to zero.
std::function<double(double)> continuous_integrand(const ScalarDist::Variant& v,
                                                   const std::function<double(double)>& g) {
    if (const auto* e = std::get_if<Exponential>(&v)) {
        const double lam = e->rate;
        return [lam, g](double t) {
            if (t <= 0.0 || t >= 1.0) return 0.0;
            const double x = t / (1.0 - t);
            const double jac = 1.0 / ((1.0 - t) * (1.0 - t));
            const double w = lam * std::exp(-lam * x) * jac;
            if (w == 0.0) return 0.0;
            return w * g(x);
        };
    }
    if (const auto* l = std::get_if<LogNormal>(&v)) {
        const double mu = l->mu, sig = l->sigma;
        return [mu, sig, g](double t) {
            if (t <= 0.0 || t >= 1.0) return 0.0;
            const double x = t / (1.0 - t);
            const double jac = 1.0 / ((1.0 - t) * (1.0 - t));
            const double z = (std::log(x) - mu) / sig;
            const double w = std::exp(-0.5 * z * z) / (x * sig * std::sqrt(2.0 * kPi)) * jac;
            if (w == 0.0 || !std::isfinite(w)) return 0.0;
            return w * g(x);
        };
    }
    // ChiSquare1
    return [g](double t) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        const double u = t / (1.0 - t);
        const double jac = 1.0 / ((1.0 - t) * (1.0 - t));
        const double w = std::sqrt(2.0 / kPi) * std::exp(-0.5 * u * u) * jac;
        if (w == 0.0) return 0.0;
        return w * g(u * u);
    };
}

} // namespace

ScalarDist::ScalarDist(Variant law) : law_(std::move(law)) { validate(law_); }

bool ScalarDist::almost_surely_positive() const {
    return std::visit(
        [](const auto& d) -> bool {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Constant>) return d.value > 0.0;
            else if constexpr (std::is_same_v<T, ScaledBernoulli>) return d.prob >= 1.0 && d.value > 0.0;
            else if constexpr (std::is_same_v<T, UniformLaw>) return true; // P(D=0)=0 even when lo=0
            else return true;
        },
        law_);
}

bool ScalarDist::is_degenerate() const {
    if (std::holds_alternative<Constant>(law_)) return true;
    if (const auto* b = std::get_if<ScaledBernoulli>(&law_))
        return b->prob >= 1.0 || b->prob <= 0.0 || b->value == 0.0;
    return false;
}

double moment(const ScalarDist& d, double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw ValidationError("moment: theta must be finite and > 0");
    return std::visit(
        [theta](const auto& law) -> double {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return std::pow(law.value, theta);
            } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                return law.prob * std::pow(law.value, theta);
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return std::exp(std::lgamma(theta + 1.0) - theta * std::log(law.rate));
            } else if constexpr (std::is_same_v<T, LogNormal>) {
                return std::exp(theta * law.mu + 0.5 * theta * theta * law.sigma * law.sigma);
            } else if constexpr (std::is_same_v<T, ChiSquare1>) {
                return std::exp(theta * std::log(2.0) + std::lgamma(theta + 0.5) - std::lgamma(0.5));
            } else { // UniformLaw
                const double p = theta + 1.0;
                return (std::pow(law.hi, p) - std::pow(law.lo, p)) / (p * (law.hi - law.lo));
            }
        },
        d.law());
}

QuadratureResult expect(const ScalarDist& d, const std::function<double(double)>& g,
                        double tol, long max_evals) {
    // Atomic laws are summed exactly.
    if (const auto* c = std::get_if<Constant>(&d.law()))
        return {g(c->value), 0.0, 0};
    if (const auto* b = std::get_if<ScaledBernoulli>(&d.law()))
        return {b->prob * g(b->value) + (1.0 - b->prob) * g(0.0), 0.0, 0};
    if (const auto* u = std::get_if<UniformLaw>(&d.law())) {
        SimpsonState st{0, max_evals, 0.0};
        const double inv = 1.0 / (u->hi - u->lo);
        auto f = [&g, inv](double x) { return inv * g(x); };
        double v = adaptive_simpson(f, u->lo, u->hi, tol, st);
        if (std::abs(v) > 1.0) { // tighten to the relative target
            SimpsonState st2{st.evals, max_evals, 0.0};
            v = adaptive_simpson(f, u->lo, u->hi, tol * std::abs(v), st2);
            return {v, st2.abs_error, st2.evals};
        }
        return {v, st.abs_error, st.evals};
    }

    SimpsonState st{0, max_evals, 0.0};
    auto f = continuous_integrand(d.law(), g);
    double v = adaptive_simpson(f, 0.0, 1.0, tol, st);
    if (std::abs(v) > 1.0) {
        SimpsonState st2{st.evals, max_evals, 0.0};
        v = adaptive_simpson(f, 0.0, 1.0, tol * std::abs(v), st2);
        return {v, st2.abs_error, st2.evals};
    }
    return {v, st.abs_error, st.evals};
}

QuadratureResult moment_by_quadrature(const ScalarDist& d, double theta,
                                      double tol, long max_evals) {
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw ValidationError("moment_by_quadrature: theta must be finite and > 0");
    return expect(d, [theta](double x) { return std::pow(x, theta); }, tol, max_evals);
}

double sample(const ScalarDist& d, RandomStream& stream) {
    return std::visit(
        [&stream](const auto& law) -> double {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return law.value;
            } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                return stream.next_double() < law.prob ? law.value : 0.0;
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return -std::log(stream.next_double_pos()) / law.rate;
            } else if constexpr (std::is_same_v<T, LogNormal>) {
                return std::exp(law.mu + law.sigma * stream.next_normal());
            } else if constexpr (std::is_same_v<T, ChiSquare1>) {
                const double n = stream.next_normal();
                return n * n;
            } else { // UniformLaw
                return law.lo + (law.hi - law.lo) * stream.next_double();
            }
        },
        d.law());
}

std::string describe(const ScalarDist& d) {
    std::ostringstream os;
    std::visit(
        [&os](const auto& law) {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, Constant>) os << "constant(" << law.value << ")";
            else if constexpr (std::is_same_v<T, ScaledBernoulli>)
                os << "scaled_bernoulli(q=" << law.prob << ", c=" << law.value << ")";
            else if constexpr (std::is_same_v<T, Exponential>) os << "exponential(rate=" << law.rate << ")";
            else if constexpr (std::is_same_v<T, LogNormal>)
                os << "lognormal(mu=" << law.mu << ", sigma=" << law.sigma << ")";
            else if constexpr (std::is_same_v<T, ChiSquare1>) os << "chisquare1";
            else os << "uniform(" << law.lo << ", " << law.hi << ")";
        },
        d.law());
    return os.str();
}

} // namespace rcar
