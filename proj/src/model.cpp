#include "rcar/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace rcar {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

CoeffFamily::CoeffFamily(Variant v) : family_(std::move(v)) {
    if (const auto* fi = std::get_if<FiniteIndependent>(&family_)) {
        if (fi->dists.empty())
            throw ValidationError("coeffs.finite_independent: need p >= 1 distributions");
    } else if (const auto* sf = std::get_if<FiniteSingleFactor>(&family_)) {
        if (sf->weights.empty())
            throw ValidationError("coeffs.finite_single_factor: need p >= 1 weights");
        for (double w : sf->weights)
            if (!(std::isfinite(w) && w >= 0.0))
                throw ValidationError("coeffs.finite_single_factor: weights must be finite and >= 0");
    } else if (const auto* gf = std::get_if<GeometricFactor>(&family_)) {
        if (!(std::isfinite(gf->beta) && gf->beta > 0.0 && gf->beta < 1.0))
            throw ValidationError("coeffs.geometric_factor: beta must lie strictly in (0,1)");
    }
}

std::optional<int> CoeffFamily::order() const {
    if (const auto* fi = std::get_if<FiniteIndependent>(&family_))
        return static_cast<int>(fi->dists.size());
    if (const auto* sf = std::get_if<FiniteSingleFactor>(&family_))
        return static_cast<int>(sf->weights.size());
    return std::nullopt;
}

void ModelSpec::validate() const {
    if (assumption == Assumption::A2 && noise.dependence != NoiseDependence::IndependentOfA)
        throw ValidationError("noise.dependence: assumption A2 requires independent noise");
    // CoeffFamily and ScalarDist members validated at construction.
}

double MomentOracle::beta() const {
    if (!is_geometric())
        throw ValidationError("oracle: beta() is defined for geometric families only");
    return beta_;
}

double MomentOracle::weight(int j) const {
    if (beta_ > 0.0) return std::pow(beta_, j);
    return weights_[static_cast<std::size_t>(j - 1)];
}

double MomentOracle::marginal(int j, double theta) const {
    if (j < 1) throw ValidationError("oracle: index j must be >= 1");
    if (!(theta > 0.0)) throw ValidationError("oracle: theta must be > 0");
    if (order_ && j > *order_) return 0.0;
    if (!independent_.empty())
        return moment(independent_[static_cast<std::size_t>(j - 1)], theta);
    return std::pow(weight(j), theta) * factor_moment_(theta);
}

double MomentOracle::joint(int i, int j, double theta) const {
    if (i < 1 || j < 1) throw ValidationError("oracle: indices must be >= 1");
    if (!(theta > 0.0)) throw ValidationError("oracle: theta must be > 0");
    if (i == j) return marginal(i, theta);
    if (order_ && (i > *order_ || j > *order_)) return 0.0;
    if (!independent_.empty())
        return marginal(i, theta / 2.0) * marginal(j, theta / 2.0);
    return std::pow(weight(i) * weight(j), theta / 2.0) * factor_moment_(theta);
}

double MomentOracle::noise_moment(double theta) const {
    if (!(theta > 0.0)) throw ValidationError("oracle: theta must be > 0");
    return noise_moment_(theta);
}

double MomentOracle::group_moment(std::span<const std::pair<int, int>> sizes_mults,
                                  double unit) const {
    if (!(unit > 0.0)) throw ValidationError("oracle: unit exponent must be > 0");
    std::map<int, int> merged;
    for (const auto& [j, m] : sizes_mults) {
        if (j < 1 || m < 1) throw ValidationError("oracle: group entries need j >= 1, mult >= 1");
        merged[j] += m;
    }
    if (merged.empty()) return 1.0;
    if (!independent_.empty()) {
        double prod = 1.0;
        for (const auto& [j, m] : merged) prod *= marginal(j, m * unit);
        return prod;
    }
    double wprod = 1.0;
    int total = 0;
    for (const auto& [j, m] : merged) {
        if (order_ && j > *order_) return 0.0;
        wprod *= std::pow(weight(j), m * unit);
        total += m;
    }
    return wprod * factor_moment_(total * unit);
}

double MomentOracle::sum_marginal(double theta) const {
    if (order_) {
        double s = 0.0;
        for (int j = 1; j <= *order_; ++j) s += marginal(j, theta);
        return s;
    }
    const double bt = std::pow(beta_, theta);
    return bt * factor_moment_(theta) / (1.0 - bt);
}

double MomentOracle::sum_marginal_root(double theta) const {
    if (order_) {
        double s = 0.0;
        for (int j = 1; j <= *order_; ++j) s += std::pow(marginal(j, theta), 1.0 / theta);
        return s;
    }
    return beta_ * std::pow(factor_moment_(theta), 1.0 / theta) / (1.0 - beta_);
}

double MomentOracle::sum_joint_pow(double theta, double r) const {
    if (!(r > 0.0)) throw ValidationError("oracle: power r must be > 0");
    if (order_) {
        double s = 0.0;
        for (int i = 1; i <= *order_; ++i)
            for (int j = 1; j <= *order_; ++j) s += std::pow(joint(i, j, theta), r);
        return s;
    }
    // joint(i,j,theta) = beta^{(i+j)theta/2} E[Z^theta]:
    // sum = E[Z^theta]^r * (q/(1-q))^2 with q = beta^{theta r / 2}.
    const double q = std::pow(beta_, theta * r / 2.0);
    const double g = q / (1.0 - q);
    return std::pow(factor_moment_(theta), r) * g * g;
}

double MomentOracle::tail_mass(double theta, int J) const {
    if (order_)
        throw ValidationError("tail_mass: defined for geometric families only");
    if (J < 0) throw ValidationError("tail_mass: J must be >= 0");
    const double bt = std::pow(beta_, theta);
    return factor_moment_(theta) * std::pow(bt, J + 1) / (1.0 - bt);
}

double MomentOracle::factor_moment(double theta) const {
    if (!factor_moment_)
        throw ValidationError("oracle: family has no shared factor");
    return factor_moment_(theta);
}

MomentOracle build_oracle(const ModelSpec& spec) {
    spec.validate();
    MomentOracle o;
    o.order_ = spec.coeffs.order();
    o.assumption_ = spec.assumption;
    o.noise_dependence_ = spec.noise.dependence;
    const ScalarDist noise = spec.noise.dist;
    o.noise_moment_ = [noise](double theta) { return moment(noise, theta); };

    if (const auto* fi = std::get_if<FiniteIndependent>(&spec.coeffs.family())) {
        o.independent_ = fi->dists;
        o.coeffs_positive_ = std::all_of(fi->dists.begin(), fi->dists.end(),
                                         [](const ScalarDist& d) { return d.almost_surely_positive(); });
    } else if (const auto* sf = std::get_if<FiniteSingleFactor>(&spec.coeffs.family())) {
        o.weights_ = sf->weights;
        const ScalarDist f = sf->factor;
        o.factor_moment_ = [f](double theta) { return moment(f, theta); };
        o.coeffs_positive_ = f.almost_surely_positive() &&
                             std::all_of(sf->weights.begin(), sf->weights.end(),
                                         [](double w) { return w > 0.0; });
    } else {
        const auto* gf = std::get_if<GeometricFactor>(&spec.coeffs.family());
        o.beta_ = gf->beta;
        const ScalarDist f = gf->factor;
        o.factor_moment_ = [f](double theta) { return moment(f, theta); };
        o.coeffs_positive_ = f.almost_surely_positive();
    }
    return o;
}

double tail_mass(const ModelSpec& spec, double theta, int J) {
    const MomentOracle o = build_oracle(spec);
    return o.tail_mass(theta, J);
}

MomentOracle geometric_oracle(double beta, std::function<double(double)> z_moment,
                              const ScalarDist& noise_dist, Assumption assumption) {
    if (!(beta > 0.0 && beta < 1.0))
        throw ValidationError("geometric_oracle: beta must lie strictly in (0,1)");
    MomentOracle o;
    o.order_ = std::nullopt;
    o.beta_ = beta;
    o.factor_moment_ = std::move(z_moment);
    const ScalarDist noise = noise_dist;
    o.noise_moment_ = [noise](double theta) { return moment(noise, theta); };
    o.assumption_ = assumption;
    o.noise_dependence_ = NoiseDependence::IndependentOfA;
    o.coeffs_positive_ = false; // unknown for custom moments
    return o;
}

} // namespace rcar
