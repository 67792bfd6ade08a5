#pragma once

#include "hetbayes/design.hpp"
#include "hetbayes/gaussian_model.hpp"
#include "hetbayes/holder_functions.hpp"
#include "hetbayes/priors.hpp"
#include "hetbayes/random.hpp"
#include "hetbayes/spline_basis.hpp"
#include "hetbayes/stats.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hetbayes {

/// Default sup-norm grid for Gaussian-process small-ball probabilities.
inline constexpr int kMaxSmallBallGrid = 128;

/// Outcome of one numerical bound check.
///
/// For an upper bound the margin is bound - empirical; for a lower bound it is
/// empirical - bound. Either way the check passes when margin >= -allowance.
struct BoundCheckReport {
    std::string quantity;
    double empirical = 0.0;
    double bound = 0.0;
    double margin = 0.0;
    double allowance = 0.0;
    bool pass = false;
    double mc_error = 0.0;
    bool lower_bound = false;
    nlohmann::json details = nlohmann::json::object();

    static BoundCheckReport make(std::string quantity, double empirical, double bound, double allowance, double mc_error = 0.0,
                                 bool lower_bound = false) {
        BoundCheckReport r;
        r.quantity = std::move(quantity);
        r.empirical = empirical;
        r.bound = bound;
        r.margin = lower_bound ? empirical - bound : bound - empirical;
        r.allowance = allowance;
        r.mc_error = mc_error;
        r.lower_bound = lower_bound;
        r.pass = r.recompute_pass();
        return r;
    }

    [[nodiscard]] bool recompute_pass() const { return margin >= -allowance; }

    [[nodiscard]] nlohmann::json to_json() const {
        auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(std::to_string(v)); };
        return {{"quantity", quantity}, {"empirical", num(empirical)}, {"bound", num(bound)},  {"margin", num(margin)},
                {"allowance", num(allowance)}, {"pass", pass},         {"mc_error", num(mc_error)}, {"lower_bound", lower_bound},
                {"details", details}};
    }
};

class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sieve radii, dimension cap and target rate for one sample size.
struct SieveSpec {
    double M_n = 1.0;
    double N_n = 1.0;
    int J_cap = 1;
    double n = 2.0;
    double eps_n = 0.5;

    void validate() const {
        if (!(M_n > 0.0) || !(N_n > 0.0)) throw std::invalid_argument("SieveSpec: radii must be positive");
        if (J_cap < 1) throw std::invalid_argument("SieveSpec: J_cap must be >= 1");
        if (!(eps_n > 0.0 && eps_n < 1.0)) throw std::invalid_argument("SieveSpec: eps_n must lie in (0,1)");
    }

    /// eps_n from the rate, k_n from the floored schedule, M_n = N_n = sqrt(n) eps_n.
    static SieveSpec from_rate(const RateSpec& spec, double n) {
        SieveSpec s;
        s.n = n;
        s.eps_n = rate_theoretical(spec, n);
        s.J_cap = sieve_dimension_cap(spec, n);
        s.M_n = s.N_n = std::sqrt(n) * s.eps_n;
        s.validate();
        return s;
    }
};

// ---------------------------------------------------------------------------
// KL and variance divergence versus squared L2 distances

/// Random spline pairs with Gaussian mean coefficients and log-variance
/// coefficients uniform on [-N, N], so that sup |f| <= N by the convex-combination bound.
inline std::vector<std::pair<FunctionPair, FunctionPair>> random_spline_pairs(int count, const std::shared_ptr<const SplineBasis>& basis,
                                                                              double N, Rng& rng, double eta_scale = 1.0) {
    std::vector<std::pair<FunctionPair, FunctionPair>> out;
    out.reserve(static_cast<std::size_t>(count));
    const int J = basis->dimension();
    auto draw = [&] {
        Eigen::VectorXd be(J), bf(J);
        for (int j = 0; j < J; ++j) be(j) = eta_scale * rng.normal();
        for (int j = 0; j < J; ++j) bf(j) = N * (2.0 * rng.uniform() - 1.0);
        return FunctionPair::from_splines(CoefficientVector(basis, be), CoefficientVector(basis, bf));
    };
    for (int i = 0; i < count; ++i) {
        FunctionPair a = draw();
        FunctionPair b = draw();
        out.emplace_back(std::move(a), std::move(b));
    }
    return out;
}

/// K <= (1 + e^{2N}) (||eta1 - eta2||^2 + ||f1 - f2||^2) and Var <= e^{4N} (...), norms in L2(Q).
inline BoundCheckReport verify_lemma2(const std::vector<std::pair<FunctionPair, FunctionPair>>& pairs, double N, const DesignSpec& design,
                                      double slack = 1e-12) {
    if (!(N >= 0.0)) throw std::invalid_argument("verify_lemma2: N must be >= 0");
    const QuadratureRule rule = design.averaging_rule();
    Eigen::MatrixXd check_nodes = rule.nodes;
    if (design.dimension() == 1) {
        check_nodes.conservativeResize(rule.nodes.rows() + 1001, 1);
        for (int i = 0; i <= 1000; ++i) check_nodes(rule.nodes.rows() + i, 0) = i / 1000.0;
    }
    const double ck = 1.0 + std::exp(2.0 * N);
    const double cv = std::exp(4.0 * N);
    double worst = std::numeric_limits<double>::infinity();
    double worst_k = worst, worst_v = worst, max_ratio_k = 0.0, max_ratio_v = 0.0;
    double worst_emp = 0.0, worst_bound = 0.0;
    long violations_k = 0, violations_v = 0;
    for (const auto& [a, b] : pairs) {
        for (const FunctionPair* p : {&a, &b}) {
            const FieldValues fv = evaluate(*p, check_nodes);
            if (fv.log_variance.cwiseAbs().maxCoeff() > N + 1e-12) {
                throw std::invalid_argument("verify_lemma2: a pair member has sup |f| > N");
            }
        }
        const FieldValues va = evaluate(a, rule.nodes);
        const FieldValues vb = evaluate(b, rule.nodes);
        const DivergenceReport r = average_divergences(va.mean, va.log_variance, vb.mean, vb.log_variance, rule.weights);
        const double dist2 = rule.weights.dot(((va.mean - vb.mean).array().square() + (va.log_variance - vb.log_variance).array().square()).matrix());
        const double mk = ck * dist2 - r.kl;
        const double mv = cv * dist2 - r.var_div;
        violations_k += mk < -slack;
        violations_v += mv < -slack;
        worst_k = std::min(worst_k, mk);
        worst_v = std::min(worst_v, mv);
        if (dist2 > 0.0) {
            max_ratio_k = std::max(max_ratio_k, r.kl / (ck * dist2));
            max_ratio_v = std::max(max_ratio_v, r.var_div / (cv * dist2));
        }
        if (std::min(mk, mv) < worst) {
            worst = std::min(mk, mv);
            worst_emp = mk <= mv ? r.kl : r.var_div;
            worst_bound = mk <= mv ? ck * dist2 : cv * dist2;
        }
    }
    if (pairs.empty()) worst = 0.0;
    BoundCheckReport rep = BoundCheckReport::make("lemma2", worst_emp, worst_bound, slack);
    rep.margin = worst;
    rep.pass = rep.recompute_pass() && violations_k == 0 && violations_v == 0;
    rep.details = {{"pairs", pairs.size()},        {"N", N},
                   {"violations_kl", violations_k}, {"violations_var", violations_v},
                   {"worst_margin_kl", pairs.empty() ? 0.0 : worst_k}, {"worst_margin_var", pairs.empty() ? 0.0 : worst_v},
                   {"max_ratio_kl", max_ratio_k},   {"max_ratio_var", max_ratio_v},
                   {"design", to_string(design.kind())}};
    return rep;
}

// ---------------------------------------------------------------------------
// Covering numbers

/// Farthest-point insertion: starting from `first`, repeatedly add the member
/// farthest from the current centres until every member is within `radius`.
/// Returns the centres; they are radius-separated and form a radius-net.
template <class Distance>
std::vector<std::size_t> farthest_point_net(std::size_t count, double radius, Distance&& dist, std::size_t first = 0) {
    std::vector<std::size_t> centres;
    if (count == 0) return centres;
    std::vector<double> nearest(count, std::numeric_limits<double>::infinity());
    std::size_t next = first;
    for (;;) {
        centres.push_back(next);
        double far = -1.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < count; ++i) {
            if (nearest[i] > radius) nearest[i] = std::min(nearest[i], dist(next, i));
            if (nearest[i] > far) {
                far = nearest[i];
                arg = i;
            }
        }
        if (far <= radius) break;
        next = arg;
    }
    return centres;
}

struct CoveringResult {
    long net_size = 0;
    double lower = 0.0;
    double upper = 0.0;
    long samples = 0;
    [[nodiscard]] bool within_bounds() const { return lower <= static_cast<double>(net_size) && static_cast<double>(net_size) <= upper; }
};

/// Greedy eps-net of the Euclidean ball of radius R in R^J, built over a dense
/// uniform sample of the ball, with the volume bounds (R/eps)^J and (1 + 2R/eps)^J.
inline CoveringResult covering_number(double eps, double R, int J, std::uint64_t seed = 20240611) {
    if (J < 1 || J > 6) throw std::invalid_argument("covering_number: J must lie in 1..6");
    if (!(eps > 0.0) || !(R > 0.0)) throw std::invalid_argument("covering_number: eps and R must be positive");
    CoveringResult res;
    res.lower = std::pow(R / eps, J);
    res.upper = std::pow(1.0 + 2.0 * R / eps, J);
    if (eps >= R) {
        res.net_size = 1;
        res.samples = 0;
        return res;
    }
    if (res.upper > 1e6) throw BudgetError("covering_number: predicted net size exceeds 1e6");
    const long samples = std::clamp(static_cast<long>(60.0 * res.upper), 20000L, 400000L);
    Rng rng(seed);
    Eigen::MatrixXd pts(J, samples);
    pts.col(0).setZero();  // the centre goes first
    for (long s = 1; s < samples; ++s) {
        Eigen::VectorXd z(J);
        for (int j = 0; j < J; ++j) z(j) = rng.normal();
        const double radius = R * std::pow(rng.uniform(), 1.0 / J);
        pts.col(s) = radius * z / z.norm();
    }
    const auto centres = farthest_point_net(static_cast<std::size_t>(samples), eps, [&](std::size_t a, std::size_t b) {
        return (pts.col(static_cast<Eigen::Index>(a)) - pts.col(static_cast<Eigen::Index>(b))).norm();
    });
    res.net_size = static_cast<long>(centres.size());
    res.samples = samples;
    return res;
}

/// Values of each family member at the rule nodes (rows are members).
inline Eigen::MatrixXd family_values(const std::vector<std::function<double(double)>>& family, const QuadratureRule& rule) {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(family.size()), rule.size());
    for (std::size_t i = 0; i < family.size(); ++i) {
        for (Eigen::Index k = 0; k < rule.size(); ++k) v(static_cast<Eigen::Index>(i), k) = family[i](rule.nodes(k, 0));
    }
    return v;
}

struct EntropyCovers {
    long eta = 0;
    long f = 0;
    long product = 0;
    double ratio = 0.0;
};

/// Farthest-point covers: the eta family at eps / e^{N} and the f family at eps in L2(Q),
/// and the product family at 3 eps under d_n.
inline EntropyCovers entropy_covers(const Eigen::MatrixXd& eta_values, const Eigen::MatrixXd& f_values, const Eigen::VectorXd& weights,
                                    double eps, double N_n, std::size_t budget = 10000) {
    const auto m1 = static_cast<std::size_t>(eta_values.rows());
    const auto m2 = static_cast<std::size_t>(f_values.rows());
    if (m1 == 0 || m2 == 0) throw std::invalid_argument("entropy_covers: empty family");
    if (eta_values.cols() != weights.size() || f_values.cols() != weights.size()) throw std::invalid_argument("entropy_covers: node count mismatch");
    if (m1 * m2 > budget) throw BudgetError("entropy_covers: product family of " + std::to_string(m1 * m2) + " members exceeds the budget");
    if (f_values.minCoeff() < -N_n) throw std::invalid_argument("entropy_covers: a variance falls below e^{-N_n}");

    auto l2 = [&](const Eigen::MatrixXd& v) {
        return [&v, &weights](std::size_t a, std::size_t b) {
            const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
            return std::sqrt(weights.dot((v.row(ia) - v.row(ib)).transpose().array().square().matrix()));
        };
    };
    EntropyCovers c;
    c.eta = static_cast<long>(farthest_point_net(m1, eps / std::exp(N_n), l2(eta_values)).size());
    c.f = static_cast<long>(farthest_point_net(m2, eps, l2(f_values)).size());
    // Per f-pair tables: 4 (V1 + V2) and half the log-cosh of the log-variance gap, node by node.
    const Eigen::Index nodes = weights.size();
    Eigen::MatrixXd four_vsum(static_cast<Eigen::Index>(m2 * m2), nodes), half_lc(static_cast<Eigen::Index>(m2 * m2), nodes);
    const Eigen::MatrixXd var = f_values.array().exp().matrix();
    for (std::size_t a = 0; a < m2; ++a) {
        for (std::size_t b = 0; b < m2; ++b) {
            const auto row = static_cast<Eigen::Index>(a * m2 + b);
            const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
            for (Eigen::Index k = 0; k < nodes; ++k) {
                four_vsum(row, k) = 4.0 * (var(ia, k) + var(ib, k));
                half_lc(row, k) = 0.5 * detail::log_cosh(0.5 * (f_values(ia, k) - f_values(ib, k)));
            }
        }
    }
    auto dn = [&](std::size_t a, std::size_t b) {
        const auto ea = static_cast<Eigen::Index>(a / m2), eb = static_cast<Eigen::Index>(b / m2);
        const auto row = static_cast<Eigen::Index>((a % m2) * m2 + b % m2);
        double h = 0.0;
        for (Eigen::Index k = 0; k < nodes; ++k) {
            const double d = eta_values(ea, k) - eta_values(eb, k);
            h -= weights(k) * std::expm1(-d * d / four_vsum(row, k) - half_lc(row, k));
        }
        return std::sqrt(std::max(2.0 * h, 0.0));
    };
    c.product = static_cast<long>(farthest_point_net(m1 * m2, 3.0 * eps, dn).size());
    const double num = std::log(static_cast<double>(c.product));
    const double den = std::log(static_cast<double>(c.eta)) + std::log(static_cast<double>(c.f));
    c.ratio = den > 0.0 ? num / den : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return c;
}

/// log N(3 eps, product, d_n) / [log N(eps/e^{N}, eta, L2) + log N(eps, f, L2)] <= ratio_bound
/// at every eps of the sweep.
inline BoundCheckReport verify_hellinger_entropy_bound(const Eigen::MatrixXd& eta_values, const Eigen::MatrixXd& f_values,
                                                       const Eigen::VectorXd& weights, const std::vector<double>& eps_sweep, double N_n,
                                                       double ratio_bound = 2.0, std::size_t budget = 10000) {
    if (eps_sweep.empty()) throw std::invalid_argument("verify_hellinger_entropy_bound: empty eps sweep");
    double worst = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (double eps : eps_sweep) {
        const EntropyCovers c = entropy_covers(eta_values, f_values, weights, eps, N_n, budget);
        worst = std::max(worst, c.ratio);
        rows.push_back({{"eps", eps}, {"cover_eta", c.eta}, {"cover_f", c.f}, {"cover_product", c.product}, {"ratio", c.ratio}});
    }
    BoundCheckReport r = BoundCheckReport::make("hellinger_entropy", worst, ratio_bound, 0.0);
    r.details = {{"sweep", rows}, {"N_n", N_n}, {"members_eta", eta_values.rows()}, {"members_f", f_values.rows()}};
    return r;
}

inline BoundCheckReport verify_hellinger_entropy_bound(const Eigen::MatrixXd& eta_values, const Eigen::MatrixXd& f_values,
                                                       const Eigen::VectorXd& weights, double eps, double N_n) {
    return verify_hellinger_entropy_bound(eta_values, f_values, weights, std::vector<double>{eps}, N_n);
}

// ---------------------------------------------------------------------------
// Prior concentration

struct ConcentrationConfig {
    int draws = 100000;
    /// Extra draws uniform in the coefficient ball, for the inclusion check.
    int inclusion_draws = 2000;
    /// Importance proposal sd per coordinate, in units of eps.
    double proposal_sd = 1.0;
    int nodes = 256;
};

namespace detail {

inline double log_ball_volume(int J, double r) {
    return 0.5 * J * std::log(std::numbers::pi) + J * std::log(r) - std::lgamma(0.5 * J + 1.0);
}

inline Eigen::VectorXd uniform_in_ball(int J, double r, Rng& rng) {
    Eigen::VectorXd z(J);
    for (int j = 0; j < J; ++j) z(j) = rng.normal();
    return r * std::pow(rng.uniform(), 1.0 / J) * z / z.norm();
}

}  // namespace detail

/// Importance-sampled prior mass of {K <= eps^2, Var <= eps^2} around a truth,
/// with per-draw checks of the chain coefficient ball => L2 ball => divergence ball.
///
/// Both spline blocks share `basis`; the proposal is normal around the L2(Q)
/// projections of the truth with sd proposal_sd * eps per coordinate, and the
/// weights are exact prior / proposal density ratios. The coefficient-ball
/// radius is e^{-2N} sqrt(J / (2 c_upper)) eps per block, where c_upper = J
/// lambda_max(Sigma).
inline BoundCheckReport concentration_mc(const SplinePriorConfig& prior, const std::shared_ptr<const SplineBasis>& basis, const FunctionPair& truth,
                                         double eps, double N, Rng& rng, ConcentrationConfig cfg = {},
                                         const DesignSpec& design = DesignSpec::uniform()) {
    if (cfg.draws < 10000) throw std::invalid_argument("concentration_mc: need at least 1e4 draws");
    if (!(eps > 0.0) || !(N > 0.0)) throw std::invalid_argument("concentration_mc: eps and N must be positive");
    const int J = basis->dimension();
    const CoefficientLaw& law = prior.coefficients;
    const QuadratureRule rule = design.averaging_rule(cfg.nodes);
    const Eigen::MatrixXd E = basis->design_matrix(rule.nodes.col(0));
    const FieldValues t = evaluate(truth, rule.nodes);

    ProjectionConfig pc;
    const Eigen::VectorXd b_eta = project(basis, [&](double x) { return truth.at(x).mean; }, design, pc).coeffs.values();
    const Eigen::VectorXd b_f = project(basis, [&](double x) { return truth.at(x).log_variance; }, design, pc).coeffs.values();
    const double c_upper = check_gram_regularity(gram_matrix(*basis, design, {std::max(2 * basis->order(), 8)})).c_upper;
    const double radius = std::exp(-2.0 * N) * std::sqrt(J / (2.0 * c_upper)) * eps;
    const double eps2 = eps * eps;
    const double sd = cfg.proposal_sd * eps;
    const double sup_f0 = t.log_variance.cwiseAbs().maxCoeff();

    struct Outcome {
        double kl, var, dist2_eta, dist2_f;
        bool hit;
    };
    auto evaluate_draw = [&](const Eigen::VectorXd& be, const Eigen::VectorXd& bf) {
        const Eigen::VectorXd m = E * be;
        const Eigen::VectorXd l = E * bf;
        const DivergenceReport r = average_divergences(t.mean, t.log_variance, m, l, rule.weights);
        Outcome o{r.kl, r.var_div, rule.weights.dot((m - t.mean).array().square().matrix()),
                  rule.weights.dot((l - t.log_variance).array().square().matrix()), false};
        o.hit = o.kl <= eps2 && o.var <= eps2;
        return o;
    };

    long failures_l2 = 0, failures_sup = 0, failures_lemma = 0, failures_ball = 0, checked = 0;
    const double half_l2 = 0.5 * std::exp(-4.0 * N) * eps2;
    auto check_inclusion = [&](const Eigen::VectorXd& be, const Eigen::VectorXd& bf, const Outcome& o) {
        ++checked;
        failures_l2 += (o.dist2_eta > half_l2 * (1 + 1e-12)) || (o.dist2_f > half_l2 * (1 + 1e-12));
        failures_sup += bf.cwiseAbs().maxCoeff() >= N;
        const double d2 = o.dist2_eta + o.dist2_f;
        failures_lemma += (o.kl > (1.0 + std::exp(2.0 * N)) * d2 + 1e-15) || (o.var > std::exp(4.0 * N) * d2 + 1e-15);
        failures_ball += !o.hit;
        (void)be;
    };

    // Importance sampling.
    const double log_q_norm = -0.5 * std::log(2.0 * std::numbers::pi * sd * sd);
    std::vector<double> log_w;
    log_w.reserve(static_cast<std::size_t>(cfg.draws));
    long hits = 0, ball_hits = 0;
    Eigen::VectorXd de(J), df(J);
    for (int s = 0; s < cfg.draws; ++s) {
        for (int j = 0; j < J; ++j) de(j) = sd * rng.normal();
        for (int j = 0; j < J; ++j) df(j) = sd * rng.normal();
        const Eigen::VectorXd be = b_eta + de, bf = b_f + df;
        const Outcome o = evaluate_draw(be, bf);
        const double lq = 2.0 * J * log_q_norm - 0.5 * (de.squaredNorm() + df.squaredNorm()) / (sd * sd);
        if (o.hit) {
            ++hits;
            log_w.push_back(log_prior(law, be) + log_prior(law, bf) - lq);
        }
        if (de.norm() <= radius && df.norm() <= radius) {
            ++ball_hits;
            check_inclusion(be, bf, o);
        }
    }
    for (int s = 0; s < cfg.inclusion_draws; ++s) {
        const Eigen::VectorXd be = b_eta + detail::uniform_in_ball(J, radius, rng);
        const Eigen::VectorXd bf = b_f + detail::uniform_in_ball(J, radius, rng);
        check_inclusion(be, bf, evaluate_draw(be, bf));
    }

    double log_p = -std::numeric_limits<double>::infinity();
    double rel_se = std::numeric_limits<double>::infinity();
    if (hits > 0) {
        const double mx = *std::max_element(log_w.begin(), log_w.end());
        double s1 = 0.0, s2 = 0.0;
        for (double lw : log_w) {
            const double w = std::exp(lw - mx);
            s1 += w;
            s2 += w * w;
        }
        const double n = cfg.draws;
        const double mean = s1 / n;
        const double var = std::max(s2 / n - mean * mean, 0.0);
        log_p = mx + std::log(mean);
        rel_se = std::sqrt(var / n) / mean;
    }

    // Lower bound: prior mass of the product of coefficient balls, using the
    // smallest prior density over each ball.
    auto log_min_density = [&](const Eigen::VectorXd& centre) {
        const double far = centre.norm() + radius;
        if (std::holds_alternative<NormalCoefficients>(law)) return -0.5 * far * far - 0.5 * J * std::log(2.0 * std::numbers::pi);
        double s = 0.0;
        for (Eigen::Index j = 0; j < centre.size(); ++j) s += log_prior_coordinate(law, std::abs(centre(j)) + radius);
        return s;
    };
    const double log_lower = log_min_density(b_eta) + log_min_density(b_f) + 2.0 * detail::log_ball_volume(J, radius);

    BoundCheckReport r = BoundCheckReport::make("concentration", log_p, log_lower, 3.0 * rel_se, rel_se, true);
    r.pass = r.pass && hits > 0 && failures_ball == 0;
    r.details = {{"eps", eps},
                 {"J", J},
                 {"N", N},
                 {"draws", cfg.draws},
                 {"hits", hits},
                 {"lower_bound_only", hits == 0},
                 {"log_probability", std::isfinite(log_p) ? nlohmann::json(log_p) : nlohmann::json(nullptr)},
                 {"log_probability_se", std::isfinite(rel_se) ? nlohmann::json(rel_se) : nlohmann::json(nullptr)},
                 {"coefficient_radius", radius},
                 {"c_upper", c_upper},
                 {"sup_f0", sup_f0},
                 {"ball_hits_in_is", ball_hits},
                 {"inclusion_checked", checked},
                 {"inclusion_failures_l2", failures_l2},
                 {"inclusion_failures_sup", failures_sup},
                 {"inclusion_failures_lemma2", failures_lemma},
                 {"inclusion_failures_divergence_ball", failures_ball},
                 {"proposal_sd", sd}};
    return r;
}

/// Slope of log Pi(B(theta_0, eps; 2)) against log eps over a sweep, compared with 2J.
inline BoundCheckReport concentration_slope(const SplinePriorConfig& prior, const std::shared_ptr<const SplineBasis>& basis,
                                            const FunctionPair& truth, const std::vector<double>& eps_sweep, double N, Rng& rng,
                                            ConcentrationConfig cfg = {}) {
    std::vector<double> xs, ys;
    nlohmann::json rows = nlohmann::json::array();
    bool inclusion = true;
    long checked = 0;
    for (double eps : eps_sweep) {
        const BoundCheckReport r = concentration_mc(prior, basis, truth, eps, N, rng, cfg);
        inclusion = inclusion && r.details["inclusion_failures_divergence_ball"].get<long>() == 0;
        checked += r.details["inclusion_checked"].get<long>();
        if (std::isfinite(r.empirical)) {
            xs.push_back(std::log(eps));
            ys.push_back(r.empirical);
        }
        rows.push_back(r.to_json());
    }
    const double target = 2.0 * basis->dimension();
    double slope = std::numeric_limits<double>::quiet_NaN();
    double slope_se = 0.0;
    if (xs.size() >= 2) {
        const LinearFit fit = fit_line(xs, ys);
        slope = fit.slope;
        slope_se = fit.slope_se;
    }
    BoundCheckReport r = BoundCheckReport::make("concentration_slope", std::abs(slope - target), 0.5 * target, 0.0, slope_se);
    r.pass = r.pass && std::isfinite(slope) && inclusion && xs.size() == eps_sweep.size();
    r.details = {{"slope", std::isfinite(slope) ? nlohmann::json(slope) : nlohmann::json(nullptr)},
                 {"target", target},
                 {"inclusion_all", inclusion},
                 {"inclusion_checked", checked},
                 {"per_eps", rows}};
    return r;
}

// ---------------------------------------------------------------------------
// Sup-norm tails of the spline prior

/// Empirical Pr(sup_x |sum_j beta_j B_j(x)| > M) on a uniform grid against C J exp(-M^rho / 2).
inline BoundCheckReport tail_probability_mc(const SplinePriorConfig& prior, const std::shared_ptr<const SplineBasis>& basis, double M, long draws,
                                            Rng& rng, int grid_points = 1000, double slack = 2.0) {
    if (draws < 100000) throw std::invalid_argument("tail_probability_mc: need at least 1e5 draws");
    if (!(M > 0.0)) throw std::invalid_argument("tail_probability_mc: M must be positive");
    const int J = basis->dimension();
    const int q = basis->order();
    std::vector<int> first(static_cast<std::size_t>(grid_points));
    std::vector<double> vals(static_cast<std::size_t>(grid_points * q));
    for (int i = 0; i < grid_points; ++i) {
        const double x = grid_points == 1 ? 0.5 : static_cast<double>(i) / (grid_points - 1);
        first[static_cast<std::size_t>(i)] = basis->eval_local(x, &vals[static_cast<std::size_t>(i * q)]);
    }
    long exceed = 0, grid_scans = 0;
    for (long s = 0; s < draws; ++s) {
        const Eigen::VectorXd beta = sample_coefficients(prior.coefficients, J, rng);
        // sup |g| <= max |beta_j|, so the grid scan is needed only above M.
        if (beta.cwiseAbs().maxCoeff() <= M) continue;
        ++grid_scans;
        for (int i = 0; i < grid_points; ++i) {
            double g = 0.0;
            for (int r = 0; r < q; ++r) g += beta(first[static_cast<std::size_t>(i)] + r) * vals[static_cast<std::size_t>(i * q + r)];
            if (std::abs(g) > M) {
                ++exceed;
                break;
            }
        }
    }
    const double p = static_cast<double>(exceed) / static_cast<double>(draws);
    const double rho = tail_exponent(prior.coefficients);
    const double bound = slack * coefficient_tail_bound(J, M, rho);
    BoundCheckReport r = BoundCheckReport::make("sup_tail", p, bound, 0.0, std::sqrt(p * (1.0 - p) / static_cast<double>(draws)));
    r.details = {{"J", J},           {"M", M},       {"rho", rho},         {"draws", draws}, {"exceedances", exceed},
                 {"grid_points", grid_points}, {"slack", slack}, {"grid_scans", grid_scans}, {"max_coefficient_bound", J * std::erfc(M / std::sqrt(2.0))}};
    return r;
}

// ---------------------------------------------------------------------------
// Gaussian-process small-ball probabilities

struct SmallBallCurve {
    std::vector<double> eps;
    std::vector<long> hits;
    std::vector<double> log_probability;
    long draws = 0;
    [[nodiscard]] bool strictly_decreasing_in_shrinking_eps() const {
        for (std::size_t i = 1; i < log_probability.size(); ++i) {
            if (!(log_probability[i] < log_probability[i - 1])) return false;
        }
        return true;
    }
};

/// Sup-norm distances between prior paths and `truth` on the config grid; one path per draw.
inline std::vector<double> gp_sup_distances(const GPPriorConfig& config, const std::function<double(double)>& truth, long draws, Rng& rng) {
    config.validate();
    if (config.grid.cols() != 1) throw std::invalid_argument("gp_sup_distances: one-dimensional grid required");
    Eigen::VectorXd g0(config.grid.rows());
    for (Eigen::Index i = 0; i < g0.size(); ++i) g0(i) = truth(config.grid(i, 0));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(draws));
    for (long s = 0; s < draws; ++s) out.push_back((sample_gp_path(config, rng).values - g0).cwiseAbs().maxCoeff());
    return out;
}

/// eps sorted in decreasing order is expected.
inline SmallBallCurve small_ball_curve(const std::vector<double>& sup_distances, const std::vector<double>& eps) {
    SmallBallCurve c;
    c.eps = eps;
    c.draws = static_cast<long>(sup_distances.size());
    for (double e : eps) {
        const long h = std::count_if(sup_distances.begin(), sup_distances.end(), [e](double d) { return d <= e; });
        c.hits.push_back(h);
        c.log_probability.push_back(h > 0 ? std::log(static_cast<double>(h) / static_cast<double>(c.draws)) : -std::numeric_limits<double>::infinity());
    }
    return c;
}

/// Smallest n with rate_theoretical(spec, n) <= eps, by bisection on log n; 0 if beyond 1e15.
inline double sample_size_for_rate(const RateSpec& spec, double eps) {
    double lo = std::log(3.0), hi = std::log(1e15);
    if (rate_theoretical(spec, std::exp(hi)) > eps) return 0.0;
    if (rate_theoretical(spec, std::exp(lo)) <= eps) return std::exp(lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (rate_theoretical(spec, std::exp(mid)) <= eps) hi = mid;
        else lo = mid;
    }
    return std::exp(hi);
}

/// Small-ball log-probabilities log Pr(||W - g0||_inf <= eps) over an eps sweep
/// (decreasing eps), reported beside -n eps^2 at the n where the rate equals eps.
inline BoundCheckReport verify_gp_sieve(const GPPriorConfig& config, const std::function<double(double)>& truth, const std::vector<double>& eps_sweep,
                                        long draws, Rng& rng, const RateSpec& reference = {.alpha = 2.0, .gamma = 2.0, .kind = PriorKind::rescaled_se}) {
    if (draws < 10000) throw std::invalid_argument("verify_gp_sieve: need at least 1e4 draws");
    const SmallBallCurve c = small_ball_curve(gp_sup_distances(config, truth, draws, rng), eps_sweep);
    long non_decreasing = 0;
    for (std::size_t i = 1; i < c.log_probability.size(); ++i) non_decreasing += !(c.log_probability[i] < c.log_probability[i - 1]);
    const bool zero_hit = std::any_of(c.hits.begin(), c.hits.end(), [](long h) { return h == 0; });
    BoundCheckReport r = BoundCheckReport::make("gp_small_ball", static_cast<double>(non_decreasing), 0.0, 0.0);
    r.pass = r.pass && !zero_hit;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        const double n = sample_size_for_rate(reference, c.eps[i]);
        const double p = static_cast<double>(c.hits[i]) / static_cast<double>(c.draws);
        rows.push_back({{"eps", c.eps[i]},
                        {"hits", c.hits[i]},
                        {"log_probability", c.hits[i] > 0 ? nlohmann::json(c.log_probability[i]) : nlohmann::json(nullptr)},
                        {"mc_error", std::sqrt(p * (1 - p) / static_cast<double>(c.draws))},
                        {"matched_n", n},
                        {"reference_log_mass", n > 0 ? nlohmann::json(-n * c.eps[i] * c.eps[i]) : nlohmann::json(nullptr)}});
    }
    r.details = {{"curve", rows}, {"draws", draws}, {"grid_points", config.grid.rows()}, {"zero_hit", zero_hit}, {"strictly_decreasing", non_decreasing == 0}};
    return r;
}

// ---------------------------------------------------------------------------
// Spline approximation rates

struct ApproximationSlope {
    double alpha = 0.0;
    std::vector<int> J;
    std::vector<double> sup_error;
    double slope = 0.0;
    double slope_se = 0.0;
    /// Target reproduced to rounding level at every J; the slope is not meaningful.
    bool exact = false;
    bool pass = false;
};

inline ApproximationSlope approximation_slope(const std::function<double(double)>& target, double alpha, const std::vector<int>& Js, int order,
                                              int nodes_per_interval = 64, double tolerance = 0.2) {
    ApproximationSlope a;
    a.alpha = alpha;
    a.J = Js;
    std::vector<double> lx, ly;
    for (int J : Js) {
        const Projection p = project(make_basis_with_dimension(order, J), target, DesignSpec::uniform(), {nodes_per_interval, 10000});
        a.sup_error.push_back(p.sup_error);
        lx.push_back(std::log(static_cast<double>(J)));
        ly.push_back(std::log(std::max(p.sup_error, 1e-300)));
    }
    a.exact = *std::max_element(a.sup_error.begin(), a.sup_error.end()) < 1e-10;
    if (a.exact) {
        a.pass = true;
        return a;
    }
    const LinearFit fit = fit_line(lx, ly);
    a.slope = fit.slope;
    a.slope_se = fit.slope_se;
    a.pass = std::abs(a.slope + alpha) <= tolerance;
    return a;
}

/// Fitted log sup-error slopes against log J for each alpha, with canonical Hoelder targets.
inline std::vector<ApproximationSlope> approximation_rate_check(const std::vector<double>& alphas, const std::vector<int>& Js, int order = 4,
                                                                int nodes_per_interval = 64) {
    for (double a : alphas) {
        if (order < a) throw std::invalid_argument("approximation_rate_check: spline order must be >= every alpha");
    }
    std::vector<ApproximationSlope> out;
    for (double a : alphas) out.push_back(approximation_slope(holder_target(a), a, Js, order, nodes_per_interval));
    return out;
}

inline BoundCheckReport approximation_report(const std::vector<ApproximationSlope>& slopes, double tolerance = 0.2) {
    double worst = 0.0;
    bool all = true;
    nlohmann::json rows = nlohmann::json::array();
    for (const ApproximationSlope& s : slopes) {
        if (!s.exact) worst = std::max(worst, std::abs(s.slope + s.alpha));
        all = all && s.pass;
        rows.push_back({{"alpha", s.alpha}, {"target", holder_target_name(s.alpha)}, {"J", s.J}, {"sup_error", s.sup_error},
                        {"slope", s.slope}, {"slope_se", s.slope_se}, {"exact", s.exact}, {"pass", s.pass}});
    }
    BoundCheckReport r = BoundCheckReport::make("approximation_slope", worst, tolerance, 0.0);
    r.pass = r.pass && all;
    r.details = {{"slopes", rows}, {"sup_grid_points", 10000}};
    return r;
}

}  // namespace hetbayes
