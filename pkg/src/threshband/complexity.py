"""Characteristic times, optimal sampling weights, and alternative projections.

The central object is the transportation value
    F(w) = inf over alternatives lam of sum_a w_a (mu_a - lam_a)^2 / 2,
whose supremum over the probability simplex is the inverse characteristic
time. F is concave (an infimum of linear functions of w), so the solver is a
projected sub-gradient ascent, followed by a derivative-free polish that
pushes the iterate to the tolerances the closed forms are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import _kernels
from .core import BanditInstance, Setting, Weights, optimal_arm_of_means

B_OPT_TOL = 1e-9


@dataclass(frozen=True)
class Projection:
    """An alternative model, its transportation cost, and its optimal arm."""

    lam: np.ndarray
    cost: float
    target_arm: int


@dataclass(frozen=True)
class ComplexitySolution:
    """Optimal weights, characteristic time, and solver diagnostics."""

    weights: np.ndarray
    t_star: float
    f_value: float
    iterations: int
    gap_certificate: float


def _as_w(w) -> np.ndarray:
    if isinstance(w, Weights):
        return np.asarray(w.w, dtype=float)
    return np.asarray(w, dtype=float)


def _unique_astar(instance: BanditInstance) -> int:
    idx, ties = optimal_arm_of_means(instance.mu, instance.threshold, instance.setting)
    if idx < 0:
        raise ValueError("no arm below the threshold")
    if ties > 1:
        raise ValueError("optimal arm is tied")
    return int(idx)


def alt_cost_nonmonotonic(instance: BanditInstance, w):
    """Cheapest two-arm alternative cost in the non-monotonic setting.

    Returns (value, challenger). A tied optimal arm yields value 0 (the
    degenerate convention), with the smallest-index other arm as challenger.
    """
    wv = _as_w(w)
    idx, ties = optimal_arm_of_means(instance.mu, instance.threshold, instance.setting)
    if ties > 1:
        return 0.0, int(min(a for a in range(instance.n_arms) if a != idx))
    val, costs, _ = _kernels.F_value(
        instance.mu, instance.threshold, wv, _kernels.SETTING_NONMONOTONIC, idx
    )
    return float(val), int(np.argmin(costs))


def project_alternative_increasing(instance: BanditInstance, w, b: int) -> Projection:
    """Cheapest increasing model whose threshold-closest arm is b.

    Reflects the arms above b through the threshold, solves a bound-restricted
    fixed-mode unimodal regression, and reflects back; both reflection branches
    (target mean below or above the threshold) are tried. Zero weights are
    floored at 1e-12 to keep the weighted regression well posed.
    """
    if instance.setting is not Setting.INCREASING:
        raise ValueError("projection defined for the increasing setting")
    if not 0 <= b < instance.n_arms:
        raise ValueError(f"target arm {b} out of range")
    wv = _as_w(w)
    lam, cost = _kernels.project_alt_increasing(instance.mu, instance.threshold, wv, b)
    lam.setflags(write=False)
    return Projection(lam=lam, cost=float(cost), target_arm=b)


def F_increasing(instance: BanditInstance, w):
    """Transportation value of the increasing setting at weights w.

    Returns (value, best_arms, subgradient): best_arms is the set of
    challengers within 1e-9 of the minimum, and the subgradient is
    [(mu_a - lam_a)^2 / 2]_a for the smallest-index one.
    """
    if instance.setting is not Setting.INCREASING:
        raise ValueError("defined for the increasing setting")
    wv = _as_w(w)
    idx, ties = optimal_arm_of_means(instance.mu, instance.threshold, instance.setting)
    if ties > 1:
        return 0.0, set(), np.zeros(instance.n_arms)
    val, costs, grad = _kernels.F_value(
        instance.mu, instance.threshold, wv, _kernels.SETTING_INCREASING, idx
    )
    best = {int(b) for b in range(instance.n_arms) if costs[b] <= val + B_OPT_TOL}
    return float(val), best, grad


def two_arm_closed_form(instance: BanditInstance):
    """Closed-form inverse characteristic times for K = 2.

    Returns (t_star_I_inverse, t_star_M_inverse); both are 0 when the
    threshold sits at the midpoint of the two means (infinite time).
    """
    if instance.n_arms != 2:
        raise ValueError("closed form requires K = 2")
    m1, m2 = float(instance.mu[0]), float(instance.mu[1])
    if m1 == m2:
        raise ValueError("closed form requires distinct means")
    s = instance.threshold
    chi2 = (2.0 * s - m1 - m2) ** 2
    return chi2 / 8.0, min(chi2, (m1 - m2) ** 2) / 8.0


def d_plus(instance: BanditInstance, theta: float, w3) -> float:
    """Cost of the reduced alternative that promotes the upper neighbour.

    w3 = (weight below, weight at, weight above) the optimal arm; +inf when
    the optimal arm is the last one (no upper neighbour exists).
    """
    a = _unique_astar(instance)
    mu, s = instance.mu, instance.threshold
    w3 = np.asarray(w3, dtype=float)
    if a == instance.n_arms - 1:
        return math.inf
    val = w3[1] * (mu[a] - theta) ** 2 / 2.0
    val += w3[2] * (mu[a + 1] - (2.0 * s - theta)) ** 2 / 2.0
    if a > 0:
        val += w3[0] * (mu[a - 1] - min(mu[a - 1], theta)) ** 2 / 2.0
    return float(val)


def d_minus(instance: BanditInstance, theta: float, w3) -> float:
    """Cost of the reduced alternative that promotes the lower neighbour."""
    a = _unique_astar(instance)
    mu, s = instance.mu, instance.threshold
    w3 = np.asarray(w3, dtype=float)
    if a == 0:
        return math.inf
    val = w3[1] * (mu[a] - theta) ** 2 / 2.0
    val += w3[0] * (mu[a - 1] - (2.0 * s - theta)) ** 2 / 2.0
    if a < instance.n_arms - 1:
        val += w3[2] * (mu[a + 1] - max(mu[a + 1], theta)) ** 2 / 2.0
    return float(val)


def _min_over_theta(fn, lo: float, hi: float) -> float:
    if hi <= lo:
        return fn(lo)
    res = minimize_scalar(fn, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, fn(lo), fn(hi)))


def three_point_characteristic_time(instance: BanditInstance) -> float:
    """Characteristic time of the increasing setting via the 3-weight reduction.

    Independent route: nested optimization of the reduced two-alternative
    costs — exact 1-D minimization over the displaced mean, barycentric grid
    plus a local simplex search over the three weights. Serves as an oracle
    for the projection-based solver.
    """
    if instance.setting is not Setting.INCREASING:
        raise ValueError("defined for the increasing setting")
    a = _unique_astar(instance)
    mu, s = instance.mu, instance.threshold

    def g(w3):
        vplus = math.inf
        vminus = math.inf
        if a < instance.n_arms - 1:
            vplus = _min_over_theta(lambda t: d_plus(instance, t, w3), 2.0 * s - mu[a + 1], s)
        if a > 0:
            vminus = _min_over_theta(lambda t: d_minus(instance, t, w3), s, 2.0 * s - mu[a - 1])
        return min(vplus, vminus)

    best_val = -math.inf
    best_w = np.full(3, 1.0 / 3.0)
    steps = 40
    for i in range(steps + 1):
        for j in range(steps + 1 - i):
            w3 = np.array([i / steps, j / steps, (steps - i - j) / steps])
            v = g(w3)
            if v > best_val:
                best_val = v
                best_w = w3

    def neg(p):
        w0, w1 = p
        w2 = 1.0 - w0 - w1
        if w0 < 0 or w1 < 0 or w2 < 0:
            return 1.0 + (max(0.0, -w0) + max(0.0, -w1) + max(0.0, -w2))
        return -g(np.array([w0, w1, w2]))

    res = minimize(
        neg,
        best_w[:2],
        method="Nelder-Mead",
        options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 2000, "maxfev": 4000},
    )
    best_val = max(best_val, -float(res.fun))
    if best_val <= 0.0:
        return math.inf
    return 1.0 / best_val


def characteristic_time_bounds(instance: BanditInstance):
    """Gap-based sandwich (lower, upper) on the increasing characteristic time."""
    if instance.setting is not Setting.INCREASING:
        raise ValueError("defined for the increasing setting")
    a = _unique_astar(instance)
    if a == 0 or a == instance.n_arms - 1:
        raise ValueError("bounds require an interior optimal arm")
    mu, s = instance.mu, instance.threshold
    d_m1 = (2.0 * s - mu[a - 1] - mu[a]) ** 2 / 8.0
    d_p1 = (2.0 * s - mu[a + 1] - mu[a]) ** 2 / 8.0
    d_0 = min(d_m1, d_p1)
    return 1.0 / d_0, 1.0 / d_m1 + 1.0 / d_0 + 1.0 / d_p1


def below_threshold_closed_form(instance: BanditInstance) -> ComplexitySolution:
    """Exact weights and characteristic time of the below-threshold variant.

    Only the optimal arm and its upper neighbour carry mass; the binding
    alternatives each move a single arm across the threshold.
    """
    if instance.setting is not Setting.BELOW_THRESHOLD:
        raise ValueError("defined for the below-threshold setting")
    a = _unique_astar(instance)
    if a == instance.n_arms - 1:
        raise ValueError("below-threshold closed form needs an arm above the threshold")
    mu, s = instance.mu, instance.threshold
    inv_left = 2.0 / (s - mu[a]) ** 2 if s != mu[a] else math.inf
    inv_right = 2.0 / (mu[a + 1] - s) ** 2
    f = 1.0 / (inv_left + inv_right)
    w = _kernels.below_weights(instance.mu, s, a)
    w.setflags(write=False)
    return ComplexitySolution(
        weights=w,
        t_star=1.0 / f if f > 0 else math.inf,
        f_value=f,
        iterations=0,
        gap_certificate=0.0,
    )


def _polish_nonmonotonic(mu, threshold, astar, w_start):
    """High-accuracy non-monotonic solve via the epigraph program.

    The per-challenger costs are smooth concave functions of w on the
    interior of the simplex, so max_w min_b cost_b(w) is the smooth program
    max v s.t. cost_b(w) >= v, solved with SLSQP and analytic gradients.
    """
    n = mu.shape[0]
    d = np.array(
        [
            min((mu[astar] - mu[b]) ** 2, (2.0 * threshold - mu[astar] - mu[b]) ** 2)
            for b in range(n)
        ]
    )
    chall = [b for b in range(n) if b != astar]

    def phi(w, b):
        tot = w[astar] + w[b]
        if tot <= 0.0:
            return 0.0
        return w[astar] * w[b] / (2.0 * tot) * d[b]

    def phi_grad(w, b):
        g = np.zeros(n + 1)
        tot = w[astar] + w[b]
        if tot > 0.0:
            g[astar] = (w[b] / tot) ** 2 * d[b] / 2.0
            g[b] = (w[astar] / tot) ** 2 * d[b] / 2.0
        g[n] = -1.0
        return g

    x0 = np.concatenate([w_start, [min(phi(w_start, b) for b in chall)]])
    cons = [
        {
            "type": "eq",
            "fun": lambda x: x[:n].sum() - 1.0,
            "jac": lambda x: np.concatenate([np.ones(n), [0.0]]),
        }
    ]
    for b in chall:
        cons.append(
            {
                "type": "ineq",
                "fun": (lambda x, b=b: phi(x[:n], b) - x[n]),
                "jac": (lambda x, b=b: phi_grad(x[:n], b)),
            }
        )
    obj_jac = np.concatenate([np.zeros(n), [-1.0]])
    res = minimize(
        lambda x: -x[n],
        x0,
        jac=lambda x: obj_jac,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * n + [(0.0, None)],
        constraints=cons,
        options={"maxiter": 500, "ftol": 1e-14},
    )
    w = np.clip(res.x[:n], 0.0, None)
    w = w / w.sum()
    val, _, _ = _kernels.F_value(mu, threshold, w, _kernels.SETTING_NONMONOTONIC, astar)
    return w, float(val)


def _polish_support(mu, threshold, setting_code, astar, support, w_start, maxiter=4000):
    """Nelder-Mead refinement of F over the simplex restricted to a support."""
    n = mu.shape[0]
    support = list(support)
    k = len(support)
    ws = np.array([max(w_start[a], 0.0) for a in support])
    ws = ws / ws.sum() if ws.sum() > 0 else np.full(k, 1.0 / k)

    def build(p):
        w = np.zeros(n)
        last = 1.0 - p.sum()
        for i, a in enumerate(support[:-1]):
            w[a] = p[i]
        w[support[-1]] = last
        return w

    def neg(p):
        w = build(p)
        v = min(w[s] for s in support)
        if v < 0:
            return 1.0 - v
        val, _, _ = _kernels.F_value(mu, threshold, w, setting_code, astar)
        return -val

    res = minimize(
        neg,
        ws[:-1],
        method="Nelder-Mead",
        options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": maxiter, "maxfev": 2 * maxiter},
    )
    w = np.maximum(build(res.x), 0.0)
    w = w / w.sum()
    val, _, _ = _kernels.F_value(mu, threshold, w, setting_code, astar)
    return w, float(val)


def solve_complexity(
    instance: BanditInstance,
    *,
    max_iter: int = 10_000,
    patience: int = 200,
    ftol: float = 1e-10,
    polish: bool = True,
) -> ComplexitySolution:
    """Optimal weights and characteristic time for the instance's setting.

    Tied optimal arms return infinite time with uniform-over-argmin weights;
    the below-threshold variant is closed form. Otherwise: projected
    sub-gradient ascent (step c/sqrt(k), uniform start), then an optional
    support-restricted Nelder-Mead polish. In the increasing setting the
    optimal weights provably live on the optimal arm and its two neighbours,
    so the polish is restricted to that support (mass elsewhere is exactly 0).
    """
    mu, s = instance.mu, instance.threshold
    n = instance.n_arms
    idx, ties = optimal_arm_of_means(mu, s, instance.setting)
    if idx < 0:
        raise ValueError("no arm below the threshold")
    if ties > 1:
        dists = np.abs(mu - s)
        sel = dists == dists[idx]
        if instance.setting is Setting.BELOW_THRESHOLD:
            sel &= mu <= s
        w = np.where(sel, 1.0 / ties, 0.0)
        w.setflags(write=False)
        return ComplexitySolution(
            weights=w, t_star=math.inf, f_value=0.0, iterations=0, gap_certificate=0.0
        )
    if instance.setting is Setting.BELOW_THRESHOLD:
        return below_threshold_closed_form(instance)

    code = instance.setting.code
    w0 = np.full(n, 1.0 / n)
    w, f, iters, gap = _kernels.ascent(mu, s, code, idx, w0, max_iter, patience, ftol)

    if polish:
        if instance.setting is Setting.INCREASING:
            support = [a for a in (idx - 1, idx, idx + 1) if 0 <= a < n]
            wp, fp = _polish_support(mu, s, code, idx, support, w)
        else:
            wp, fp = _polish_nonmonotonic(mu, s, idx, w)
        if fp > f:
            w, f = wp, fp
            _, _, g = _kernels.F_value(mu, s, w, code, idx)
            gap = float(np.max(g) - f)

    w = np.asarray(w, dtype=float)
    w.setflags(write=False)
    t_star = 1.0 / f if f > 0 else math.inf
    return ComplexitySolution(
        weights=w,
        t_star=t_star,
        f_value=float(f),
        iterations=int(iters),
        gap_certificate=float(gap),
    )


def kl_bernoulli(p: float, q: float) -> float:
    """Bernoulli Kullback-Leibler divergence kl(p, q)."""
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError("kl arguments must lie in (0, 1)")
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


def lower_bound_samples(instance: BanditInstance, delta: float) -> float:
    """Instance-dependent lower bound on the expected sample count at risk delta."""
    if not 0.0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    sol = solve_complexity(instance)
    if delta == 0.5:
        return 0.0
    return sol.t_star * kl_bernoulli(delta, 1.0 - delta)
