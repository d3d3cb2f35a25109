// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hflow/core_model.hpp"
#include "hflow/numerics/counting.hpp"
#include "hflow/numerics/format.hpp"
#include "hflow/randomness.hpp"

namespace hflow {

/// Switching threshold on psi = s2 / m^2 between the two QE branches.
inline constexpr double kPsiCritical = 1.5;

enum class Branch : std::uint8_t { quadratic, exponential };

/// Per-asset constants of the QE step, held in the kernel format.
///
/// The moment ratio psi (and the shape parameters b^2, p that depend only on
/// psi) are evaluated in binary64 whatever the format, so a coarse format can
/// never flip a branch. Everything that carries the magnitude of the state
/// (m, a, beta, the drift constants, the log price) is computed in format.
template <class Arith>
struct QeCoefficients {
    using V = typename Arith::value_type;

    HestonParams real;
    double e_real;       // exp(-kappa dt)
    double s2_slope;     // s2 = v * s2_slope + s2_floor
    double s2_floor;

    V theta, e, rdt;
    V k0, k1, k2, k3, k4;
    V a_mart;            // K2 + K4/2
    V k1_half_k3;        // K1 + K3/2
    V half, one, two;
    V v0, x0;            // initial variance and log price
};

template <class Arith, class Real = DoubleArith>
QeCoefficients<Arith> make_coefficients(const Arith& ar, const HestonParams& p, const Real& re = Real()) {
    using N = Num<Arith>;
    QeCoefficients<Arith> c{};
    c.real = p;

    {
        using R = Num<Real>;
        const R kappa = num(re, p.kappa), theta = num(re, p.theta), sigma = num(re, p.sigma);
        const R dt = num(re, p.dt), one = num(re, 1.0), two = num(re, 2.0);
        const R e = exp(-(kappa * dt));
        const R ome = one - e;
        const R sig2 = sigma * sigma;
        c.e_real = e.v;
        c.s2_slope = (sig2 * e * ome / kappa).v;
        c.s2_floor = (theta * sig2 * ome * ome / (two * kappa)).v;
    }

    const N kappa = num(ar, p.kappa), theta = num(ar, p.theta), sigma = num(ar, p.sigma);
    const N rho = num(ar, p.rho), r = num(ar, p.r), dt = num(ar, p.dt);
    const N half = num(ar, 0.5), one = num(ar, 1.0), two = num(ar, 2.0);
    const N gamma1 = half, gamma2 = half;

    const N e = exp(-(kappa * dt));
    const N one_minus_rho2 = one - rho * rho;
    N k0 = num(ar, 0.0), k1, k2;
    if (sigma.is_zero()) {
        // sigma -> 0 limit: the variance is deterministic and the correlated
        // terms vanish, so the price noise carries the full variance
        const N drift_half = gamma1 * dt * (-half);
        k1 = drift_half;
        k2 = gamma2 * dt * (-half);
        c.k3 = (gamma1 * dt).v;
        c.k4 = (gamma2 * dt).v;
    } else {
        const N rho_over_sigma = rho / sigma;
        const N kappa_rho_over_sigma = kappa * rho / sigma;
        k0 = -(rho * kappa * theta / sigma * dt);
        k1 = gamma1 * dt * (kappa_rho_over_sigma - half) - rho_over_sigma;
        k2 = gamma2 * dt * (kappa_rho_over_sigma - half) + rho_over_sigma;
        c.k3 = (gamma1 * dt * one_minus_rho2).v;
        c.k4 = (gamma2 * dt * one_minus_rho2).v;
    }
    c.theta = theta.v;
    c.e = e.v;
    c.rdt = (r * dt).v;
    c.k0 = k0.v;
    c.k1 = k1.v;
    c.k2 = k2.v;
    c.a_mart = (k2 + wrap_num(ar, c.k4) * half).v;
    c.k1_half_k3 = (k1 + half * wrap_num(ar, c.k3)).v;
    c.half = half.v;
    c.one = one.v;
    c.two = two.v;
    c.v0 = num(ar, p.v0).v;
    c.x0 = log(num(ar, p.s0)).v;
    return c;
}

/// Result of one variance step, including the branch data the martingale
/// correction needs.
template <class Arith>
struct VarianceOutcome {
    using V = typename Arith::value_type;

    V v_next{};
    Branch branch = Branch::quadratic;
    bool deterministic = false;  // sigma == 0 or psi == 0: v_next = m
    bool degenerate = false;     // m == 0: v_next = 0, no branch data
    V a{}, b2{};                 // quadratic branch
    V p{}, beta{};               // exponential branch
};

/// QE variance step from `v_n` with Gaussian input `z_v`.
template <class Arith, class Real = DoubleArith>
VarianceOutcome<Arith> variance_step(const Arith& ar, const QeCoefficients<Arith>& c, typename Arith::value_type v_n,
                                     double z_v, const Real& re = Real()) {
    using N = Num<Arith>;
    using R = Num<Real>;
    VarianceOutcome<Arith> out;

    const N v = wrap_num(ar, v_n), theta = wrap_num(ar, c.theta);
    const N m = theta + (v - theta) * wrap_num(ar, c.e);

    const R vd = num(re, ar.to_real(v_n));
    const R theta_d = num(re, c.real.theta);
    const R md = theta_d + (vd - theta_d) * num(re, c.e_real);
    const R s2d = vd * num(re, c.s2_slope) + num(re, c.s2_floor);

    if (c.real.sigma == 0.0) {
        out.deterministic = true;
        out.v_next = m.v;
        return out;
    }
    if (md.v == 0.0 && s2d.v == 0.0) {
        out.branch = Branch::exponential;
        out.degenerate = true;
        out.v_next = ar.from_real(0.0);
        return out;
    }
    const R psi = s2d / (md * md);
    if (psi.v == 0.0) {
        out.deterministic = true;
        out.v_next = m.v;
        return out;
    }

    if (psi.v <= kPsiCritical) {
        const R one = num(re, 1.0);
        const R two_over_psi = num(re, 2.0) / psi;
        const R b2d = two_over_psi - one + sqrt(two_over_psi) * sqrt(two_over_psi - one);
        const N b2 = num(ar, b2d.v);
        const N b = num(ar, sqrt(b2d).v);
        const N inv_one_plus_b2 = num(ar, (one / (one + b2d)).v);
        const N a = m * inv_one_plus_b2;
        const N y = b + num(ar, z_v);
        out.branch = Branch::quadratic;
        out.a = a.v;
        out.b2 = b2.v;
        out.v_next = (a * (y * y)).v;
        return out;
    }

    out.branch = Branch::exponential;
    const R p_d = (psi - num(re, 1.0)) / (psi + num(re, 1.0));
    const N p = num(ar, p_d.v);
    out.p = p.v;
    if (m.is_zero()) {
        out.degenerate = true;
        out.v_next = ar.from_real(0.0);
        return out;
    }
    const N one_minus_p = wrap_num(ar, c.one) - p;
    const N beta = one_minus_p / m;
    out.beta = beta.v;
    const double u = normal_cdf(z_v);
    if (u <= p_d.v) {
        out.v_next = ar.from_real(0.0);
        return out;
    }
    // ln((1-p)/(1-u)) with the draw-only term -ln(1-u) taken in binary64
    const double neg_log_tail = -std::log(normal_cdf(-z_v));
    out.v_next = ((log(one_minus_p) + num(ar, neg_log_tail)) / beta).v;
    return out;
}

/// Drift constant of the log-price step: K0, or the martingale-corrected K0*
/// when `martingale` is set and the correction is well defined.
template <class Arith>
typename Arith::value_type drift_constant(const Arith& ar, const QeCoefficients<Arith>& c,
                                          typename Arith::value_type v_n, const VarianceOutcome<Arith>& o,
                                          bool martingale) {
    using N = Num<Arith>;
    if (!martingale) return c.k0;

    const N v = wrap_num(ar, v_n), a_mart = wrap_num(ar, c.a_mart), k1_half_k3 = wrap_num(ar, c.k1_half_k3);
    const N one = wrap_num(ar, c.one), half = wrap_num(ar, c.half);
    auto fallback = [&] {
        if (auto* d = ar.diagnostics()) ++d->martingale_fallbacks;
        return c.k0;
    };

    if (o.deterministic) {
        return (-(k1_half_k3 * v) - a_mart * wrap_num(ar, o.v_next)).v;
    }
    if (o.degenerate) return fallback();
    if (o.branch == Branch::quadratic) {
        const N a = wrap_num(ar, o.a);
        const N two_a_a = wrap_num(ar, c.two) * a_mart * a;
        if (!(two_a_a < one)) return fallback();
        const N arg = one - two_a_a;
        if (!(arg > N{&ar, ar.from_real(0.0)})) return fallback();
        return (-(a_mart * wrap_num(ar, o.b2) * a / arg) + half * log(arg) - k1_half_k3 * v).v;
    }
    const N p = wrap_num(ar, o.p), beta = wrap_num(ar, o.beta);
    if (!(a_mart < beta)) return fallback();
    const N inner = p + beta * (one - p) / (beta - a_mart);
    if (!(inner > N{&ar, ar.from_real(0.0)})) return fallback();
    return (-log(inner) - k1_half_k3 * v).v;
}

/// One log-price step: x_n + (r dt + K + K1 v_n + K2 v_next + sqrt(K3 v_n + K4 v_next) z_x).
/// The increment is summed before it meets x_n. Adding the constant r dt to
/// x_n directly would round the same residual away on every step, a bias that
/// grows linearly with T in the narrow float formats.
template <class Arith>
typename Arith::value_type log_price_step(const Arith& ar, const QeCoefficients<Arith>& c,
                                          typename Arith::value_type x_n, typename Arith::value_type v_n,
                                          typename Arith::value_type v_next, typename Arith::value_type drift,
                                          double z_x) {
    using N = Num<Arith>;
    const N v = wrap_num(ar, v_n), vn = wrap_num(ar, v_next);
    const N diffusion = sqrt(wrap_num(ar, c.k3) * v + wrap_num(ar, c.k4) * vn);
    const N increment = wrap_num(ar, c.rdt) + wrap_num(ar, drift) + wrap_num(ar, c.k1) * v +
                        wrap_num(ar, c.k2) * vn + diffusion * num(ar, z_x);
    return (wrap_num(ar, x_n) + increment).v;
}

template <class Arith>
typename Arith::value_type asset_path_exponential(const Arith& ar, typename Arith::value_type x) {
    return ar.exp(x);
}

// ---------------------------------------------------------------------------
// Chunk kernels. A chunk is one asset of one path batch, laid out
// [timestep][path-in-batch]: the interchanged loop order, with the per-path
// state held in a cache indexed by path.
// ---------------------------------------------------------------------------

template <class Arith>
void variance_chunk(const Arith& ar, const QeCoefficients<Arith>& c, bool martingale, std::size_t batch_paths,
                    std::size_t timesteps, std::span<const double> z_v, std::span<typename Arith::value_type> v_out,
                    std::span<typename Arith::value_type> drift_out) {
    using V = typename Arith::value_type;
    std::vector<V> cached_v(batch_paths, c.v0);
    for (std::size_t t = 0; t < timesteps; ++t) {
        const std::size_t row = t * batch_paths;
        for (std::size_t j = 0; j < batch_paths; ++j) {
            const VarianceOutcome<Arith> o = variance_step(ar, c, cached_v[j], z_v[row + j]);
            drift_out[row + j] = drift_constant(ar, c, cached_v[j], o, martingale);
            v_out[row + j] = o.v_next;
            cached_v[j] = o.v_next;
        }
    }
}

template <class Arith>
void log_price_chunk(const Arith& ar, const QeCoefficients<Arith>& c, std::size_t batch_paths, std::size_t timesteps,
                     std::span<const typename Arith::value_type> v_next,
                     std::span<const typename Arith::value_type> drift, std::span<const double> z_x,
                     std::span<typename Arith::value_type> x_out) {
    using V = typename Arith::value_type;
    std::vector<V> cached_x(batch_paths, c.x0);
    std::vector<V> cached_v(batch_paths, c.v0);
    for (std::size_t t = 0; t < timesteps; ++t) {
        const std::size_t row = t * batch_paths;
        for (std::size_t j = 0; j < batch_paths; ++j) {
            const V x = log_price_step(ar, c, cached_x[j], cached_v[j], v_next[row + j], drift[row + j], z_x[row + j]);
            x_out[row + j] = x;
            cached_x[j] = x;
            cached_v[j] = v_next[row + j];
        }
    }
}

template <class Arith>
void exponential_chunk(const Arith& ar, std::span<const typename Arith::value_type> x,
                       std::span<typename Arith::value_type> price) {
    for (std::size_t i = 0; i < x.size(); ++i) price[i] = asset_path_exponential(ar, x[i]);
}

// ---------------------------------------------------------------------------
// Batches and the full price surface.
// ---------------------------------------------------------------------------

/// Half-open path range of one batch. The final batch may be ragged.
struct BatchRange {
    std::uint64_t index;
    std::uint64_t first_path;
    std::uint64_t count;
};

inline std::uint64_t batch_count(std::uint64_t paths, std::uint64_t batch) { return (paths + batch - 1) / batch; }

inline BatchRange batch_range(std::uint64_t paths, std::uint64_t batch, std::uint64_t k) {
    const std::uint64_t first = k * batch;
    return {k, first, std::min(batch, paths - first)};
}

enum class Layout { host, device };

/// Values over the whole grid, in host ([path][asset][timestep]) or batched
/// device ([batch][asset][timestep][path-in-batch]) order.
template <class T>
struct PathSurface {
    std::vector<T> values;
    Layout layout = Layout::device;
    GridSpec grid{1, 1, 1};
    std::uint64_t batch = 1;
};

/// Per-asset parameter list; a single entry is broadcast to every asset.
inline std::vector<HestonParams> expand_params(const std::vector<HestonParams>& params, std::uint64_t assets) {
    if (params.size() == 1 && assets > 1) return std::vector<HestonParams>(assets, params.front());
    if (params.size() != assets) {
        throw ValidationError("parameter list has " + std::to_string(params.size()) + " entries for " +
                              std::to_string(assets) + " assets");
    }
    return params;
}

template <class Arith>
std::vector<QeCoefficients<Arith>> make_all_coefficients(const Arith& ar, const std::vector<HestonParams>& params) {
    std::vector<QeCoefficients<Arith>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(make_coefficients(ar, validate_heston(p).params));
    return out;
}

/// Runs the variance -> log-price -> exponential stages for one chunk.
template <class Arith>
void price_chunk(const Arith& ar, const QeCoefficients<Arith>& c, bool martingale, std::size_t batch_paths,
                 std::size_t timesteps, std::span<const double> z_v, std::span<const double> z_x,
                 std::span<typename Arith::value_type> price) {
    using V = typename Arith::value_type;
    const std::size_t n = batch_paths * timesteps;
    std::vector<V> v(n), drift(n), x(n);
    variance_chunk(ar, c, martingale, batch_paths, timesteps, z_v, std::span<V>(v), std::span<V>(drift));
    log_price_chunk(ar, c, batch_paths, timesteps, std::span<const V>(v), std::span<const V>(drift), z_x,
                    std::span<V>(x));
    exponential_chunk(ar, std::span<const V>(x), price);
}

/// Simulates every asset price in device layout. Output is identical for every
/// batch size and thread count.
template <class Arith>
PathSurface<typename Arith::value_type> simulate_paths(const GridSpec& grid, const std::vector<HestonParams>& params,
                                                       const DrawProvider& draws, const Arith& proto,
                                                       std::uint64_t batch, bool martingale = true,
                                                       unsigned threads = 1, Diagnostics* diag = nullptr) {
    using V = typename Arith::value_type;
    if (batch < 1) throw ValidationError("batch size must be >= 1");
    if (!(draws.grid() == grid)) throw ValidationError("draw provider grid does not match simulation grid");
    const auto asset_params = expand_params(params, grid.assets());
    batch = std::min(batch, grid.paths());
    threads = std::max(1u, threads);

    PathSurface<V> out;
    out.values.resize(grid.elements());
    out.layout = Layout::device;
    out.grid = grid;
    out.batch = batch;

    const std::uint64_t nb = batch_count(grid.paths(), batch);
    const std::size_t T = grid.timesteps();
    std::vector<Diagnostics> lane_diag(threads);
    std::vector<std::exception_ptr> lane_error(threads);

    auto lane = [&](unsigned id) {
        try {
            const Arith ar = proto.with_diagnostics(&lane_diag[id]);
            const auto coeffs = make_all_coefficients(ar, asset_params);
            std::vector<double> z_v, z_x;
            for (std::uint64_t k = id; k < nb; k += threads) {
                const BatchRange br = batch_range(grid.paths(), batch, k);
                const std::size_t n = br.count * T;
                z_v.resize(n);
                z_x.resize(n);
                for (std::uint64_t a = 0; a < grid.assets(); ++a) {
                    draws.fill_chunk(br.first_path, br.count, a, z_v.data(), z_x.data());
                    const std::size_t base = br.first_path * grid.assets() * T + a * n;
                    price_chunk(ar, coeffs[a], martingale, br.count, T, std::span<const double>(z_v),
                                std::span<const double>(z_x), std::span<V>(out.values.data() + base, n));
                }
            }
        } catch (...) {
            lane_error[id] = std::current_exception();
        }
    };

    if (threads == 1) {
        lane(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned id = 0; id < threads; ++id) pool.emplace_back(lane, id);
        for (auto& th : pool) th.join();
    }
    for (auto& e : lane_error)
        if (e) std::rethrow_exception(e);
    if (diag)
        for (const auto& d : lane_diag) *diag += d;
    return out;
}

// ---------------------------------------------------------------------------
// Operation accounting
// ---------------------------------------------------------------------------

/// Floating-point operations of one inverse-normal evaluation in its central
/// region, plus the bits-to-uniform mapping.
inline constexpr std::uint64_t kDrawOpsCentral = 32;

struct ElementOpReport {
    std::uint64_t setup = 0;     ///< per-asset constants (recomputed per element in an unhoisted kernel)
    std::uint64_t variance = 0;  ///< variance step incl. moment ratio
    std::uint64_t drift = 0;     ///< K0 / martingale-corrected K0*
    std::uint64_t log_price = 0;
    std::uint64_t exponential = 0;
    std::uint64_t draws = 0;     ///< two Gaussian draws (static count)
    std::uint64_t reduction = 0; ///< max over assets, one comparison

    std::uint64_t total() const noexcept {
        return setup + variance + drift + log_price + exponential + draws + reduction;
    }
};

/// Static operation counts of the kernel formulas, per branch.
inline ElementOpReport static_element_ops(Branch branch, bool martingale) {
    ElementOpReport r;
    // binary64 side: e (mul, neg, exp), 1-e, sigma^2, s2 slope (2 mul, div),
    // s2 floor (4 mul, div)
    const std::uint64_t setup_real = 3 + 1 + 1 + 3 + 5;
    // format side: e (mul, neg, exp), 1-rho^2 (mul, sub), rho/sigma,
    // kappa*rho/sigma (mul, div), K0 (3 mul, div, neg), K1 and K2 (mul, sub,
    // mul, add/sub each), K3 and K4 (2 mul each), r*dt, A (mul, add),
    // K1+K3/2 (mul, add), ln s0
    const std::uint64_t setup_format = 3 + 2 + 1 + 2 + 5 + 4 + 4 + 2 + 2 + 1 + 2 + 2 + 1;
    r.setup = setup_real + setup_format;
    // m (sub, mul, add); md (sub, mul, add); s2 (mul, add); psi (mul, div)
    const std::uint64_t common = 3 + 3 + 2 + 2;
    if (branch == Branch::quadratic) {
        // 2/psi, b2 (sub, 2 sqrt, mul, add, sub), sqrt b2, 1+b2, 1/(1+b2),
        // a, b+z, y*y, a*y^2
        r.variance = common + 1 + 6 + 1 + 2 + 1 + 1 + 1 + 1;
        // 2*A*a, 1-2Aa, A*b2*a/arg (2 mul, div, neg), ln, half*ln, add, K*v, sub
        r.drift = martingale ? 2 + 1 + 4 + 1 + 1 + 1 + 1 + 1 : 0;
    } else {
        // p (sub, add, div), 1-p, beta, ln(1-p), add, div
        r.variance = common + 3 + 1 + 1 + 1 + 1 + 1;
        // 1-p, beta-A, beta*(1-p)/(beta-A) (mul, div), p+, ln, neg, K*v, sub
        r.drift = martingale ? 1 + 1 + 2 + 1 + 1 + 1 + 1 + 1 : 0;
    }
    // K3 v, K4 v', add, sqrt, 5 adds, K1 v, K2 v', sqrt*z
    r.log_price = 2 + 1 + 1 + 5 + 2 + 1;
    r.exponential = 1;
    r.draws = 2 * kDrawOpsCentral;
    r.reduction = 1;
    return r;
}

/// Counts the operations the kernel actually executes for one element.
/// The draw and reduction figures are the static ones.
inline ElementOpReport count_element_ops(const HestonParams& params, double v_n, double z_v, double z_x,
                                         bool martingale, Branch* branch_taken = nullptr) {
    OpCounts counts;
    const Counting<DoubleArith> ar(DoubleArith{}, &counts);
    ElementOpReport r;
    auto lap = [&counts, last = std::uint64_t{0}]() mutable {
        const std::uint64_t now = counts.arithmetic();
        const std::uint64_t d = now - last;
        last = now;
        return d;
    };

    const auto coeffs = make_coefficients(ar, params, ar);
    r.setup = lap();
    const auto o = variance_step(ar, coeffs, v_n, z_v, ar);
    r.variance = lap();
    const double drift = drift_constant(ar, coeffs, v_n, o, martingale);
    r.drift = lap();
    const double x = log_price_step(ar, coeffs, coeffs.x0, v_n, o.v_next, drift, z_x);
    r.log_price = lap();
    (void)asset_path_exponential(ar, x);
    r.exponential = lap();
    r.draws = 2 * kDrawOpsCentral;
    r.reduction = 1;
    if (branch_taken) *branch_taken = o.branch;
    return r;
}

}  // namespace hflow
