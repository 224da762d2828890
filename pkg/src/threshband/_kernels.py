"""Numba-compiled numeric kernels shared by the library API and the simulator.

Everything here operates on plain numpy arrays with 0-based arm indices.
The public modules (isotonic, complexity, policies) validate inputs and wrap
these kernels; the Monte-Carlo trial loop calls them directly so that a full
10000-replication experiment stays within a few minutes of CPU time.

Setting codes: 0 = non-monotonic, 1 = increasing, 2 = below-threshold.
Algorithm codes: 0 = DT, 1 = BC, 2 = Racing, 3 = APT.
Beta kinds: 0 = practical, 1 = theoretical.
"""

import numpy as np
from numba import njit

SETTING_NONMONOTONIC = 0
SETTING_INCREASING = 1
SETTING_BELOW = 2

ALGO_DT = 0
ALGO_BC = 1
ALGO_RACING = 2
ALGO_APT = 3

BETA_PRACTICAL = 0
BETA_THEORETICAL = 1

WEIGHT_FLOOR = 1e-12


@njit(cache=True)
def pava_increasing(x, w):
    """Weighted least-squares projection onto nondecreasing sequences (PAVA)."""
    n = x.shape[0]
    vals = np.empty(n)
    wts = np.empty(n)
    cnt = np.empty(n, np.int64)
    m = 0
    for i in range(n):
        v = x[i]
        ww = w[i]
        c = 1
        while m > 0 and vals[m - 1] > v:
            tot = wts[m - 1] + ww
            v = (wts[m - 1] * vals[m - 1] + ww * v) / tot
            ww = tot
            c += cnt[m - 1]
            m -= 1
        vals[m] = v
        wts[m] = ww
        cnt[m] = c
        m += 1
    out = np.empty(n)
    pos = 0
    for j in range(m):
        for _ in range(cnt[j]):
            out[pos] = vals[j]
            pos += 1
    return out


@njit(cache=True)
def pava_decreasing(x, w):
    """Projection onto nonincreasing sequences, by index reversal."""
    n = x.shape[0]
    xr = np.empty(n)
    wr = np.empty(n)
    for i in range(n):
        xr[i] = x[n - 1 - i]
        wr[i] = w[n - 1 - i]
    fr = pava_increasing(xr, wr)
    out = np.empty(n)
    for i in range(n):
        out[i] = fr[n - 1 - i]
    return out


@njit(cache=True)
def weighted_cost(x, w, fit):
    c = 0.0
    for i in range(x.shape[0]):
        d = x[i] - fit[i]
        c += 0.5 * w[i] * d * d
    return c


@njit(cache=True)
def unimodal_fixed_mode(x, w, mode):
    """Exact projection onto {v[0] <= ... <= v[mode] >= ... >= v[n-1]}.

    The two chains are coupled only through the apex value c: with c fixed,
    the optimal chains are the unconstrained isotonic fits clipped at c
    (bound-restriction lemma), so the objective reduces to a convex piecewise
    quadratic in c which is minimized exactly by a breakpoint scan.
    """
    n = x.shape[0]
    left = pava_increasing(x[:mode], w[:mode])
    nl = mode
    nr = n - mode - 1
    xr = np.empty(nr)
    wr = np.empty(nr)
    for i in range(nr):
        xr[i] = x[mode + 1 + i]
        wr[i] = w[mode + 1 + i]
    right = pava_decreasing(xr, wr)

    # breakpoints: every fitted value of either chain
    nb = nl + nr
    bp = np.empty(nb)
    for i in range(nl):
        bp[i] = left[i]
    for i in range(nr):
        bp[nl + i] = right[i]
    bp = np.sort(bp)

    c_star = 0.0
    found = False
    for s in range(nb + 1):
        lo = -np.inf if s == 0 else bp[s - 1]
        hi = np.inf if s == nb else bp[s]
        if hi <= lo:
            continue
        # positions clipped on (lo, hi): fitted chain value >= hi
        sw = w[mode]
        swx = w[mode] * x[mode]
        for i in range(nl):
            if left[i] >= hi:
                sw += w[i]
                swx += w[i] * x[i]
        for i in range(nr):
            if right[i] >= hi:
                sw += wr[i]
                swx += wr[i] * xr[i]
        c0 = swx / sw
        if c0 < lo:
            c_star = lo
            found = True
            break
        if c0 <= hi:
            c_star = c0
            found = True
            break
    if not found:
        # objective is decreasing up to the last stationary point; cannot happen
        c_star = bp[nb - 1] if nb > 0 else x[mode]

    out = np.empty(n)
    for i in range(nl):
        out[i] = min(left[i], c_star)
    out[mode] = c_star
    for i in range(nr):
        out[mode + 1 + i] = min(right[i], c_star)
    return out


@njit(cache=True)
def unimodal_bounded(x, w, mode, bound):
    """Projection onto the fixed-mode unimodal set with apex value <= bound."""
    fit = unimodal_fixed_mode(x, w, mode)
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = min(fit[i], bound)
    return out


@njit(cache=True)
def iso_split_bounded(x, w, split, bound):
    """Projection onto {v[0] <= ... <= v[split] <= bound <= v[split+1] <= ...}.

    The bound decouples the two chains; each one is an isotonic fit clipped
    against the bound (from above on the left, from below on the right).
    split may equal n-1, in which case the right chain is empty.
    """
    n = x.shape[0]
    out = np.empty(n)
    left = pava_increasing(x[: split + 1], w[: split + 1])
    for i in range(split + 1):
        out[i] = min(left[i], bound)
    if split + 1 < n:
        right = pava_increasing(x[split + 1 :], w[split + 1 :])
        for i in range(split + 1, n):
            out[i] = max(right[i - split - 1], bound)
    return out


@njit(cache=True)
def project_alt_increasing(mu, threshold, w, b):
    """Cheapest increasing model in which arm b is threshold-optimal.

    Returns (lam, cost) for the infimum over the closure of
    {lam increasing, argmin |lam_a - S| = b}, which splits into the branch
    lam_b <= S (reflect arms above b through S, fixed-mode unimodal
    regression bounded by S, reflect back) and its mirror image.
    """
    n = mu.shape[0]
    we = np.empty(n)
    for i in range(n):
        we[i] = max(w[i], WEIGHT_FLOOR)

    # branch 1: lam_b <= threshold
    xp = np.empty(n)
    for a in range(n):
        xp[a] = mu[a] if a <= b else 2.0 * threshold - mu[a]
    fit = unimodal_bounded(xp, we, b, threshold)
    lam1 = np.empty(n)
    for a in range(n):
        lam1[a] = fit[a] if a <= b else 2.0 * threshold - fit[a]
    c1 = weighted_cost(mu, we, lam1)

    # branch 2: lam_b >= threshold; reflect through S and reverse indices
    mu2 = np.empty(n)
    w2 = np.empty(n)
    for a in range(n):
        mu2[a] = 2.0 * threshold - mu[n - 1 - a]
        w2[a] = we[n - 1 - a]
    b2 = n - 1 - b
    xp2 = np.empty(n)
    for a in range(n):
        xp2[a] = mu2[a] if a <= b2 else 2.0 * threshold - mu2[a]
    fit2 = unimodal_bounded(xp2, w2, b2, threshold)
    lam2 = np.empty(n)
    for a in range(n):
        m = fit2[a] if a <= b2 else 2.0 * threshold - fit2[a]
        lam2[n - 1 - a] = 2.0 * threshold - m
    c2 = weighted_cost(mu, we, lam2)

    if c1 <= c2:
        return lam1, c1
    return lam2, c2


@njit(cache=True)
def alt_lam_nonmonotonic(mu, threshold, w, astar, b):
    """Optimal two-arm alternative of the Lemma-style non-monotonic cost."""
    n = mu.shape[0]
    lam = mu.copy()
    d_same = (mu[astar] - mu[b]) ** 2
    d_mirror = (2.0 * threshold - mu[astar] - mu[b]) ** 2
    denom = w[astar] + w[b]
    if denom <= 0.0:
        if d_mirror < d_same:
            lam[b] = 2.0 * threshold - mu[astar]
        else:
            lam[b] = mu[astar]
        return lam
    if d_same <= d_mirror:
        m = (w[astar] * mu[astar] + w[b] * mu[b]) / denom
        lam[astar] = m
        lam[b] = m
    else:
        x = (w[astar] * (mu[astar] - threshold) - w[b] * (mu[b] - threshold)) / denom
        lam[astar] = threshold + x
        lam[b] = threshold - x
    return lam


@njit(cache=True)
def argmin_distance(mu, threshold, setting):
    """Smallest-index threshold-closest arm and the argmin cardinality.

    Below-threshold restricts candidates to arms with mean <= threshold;
    returns (-1, 0) when that candidate set is empty.
    """
    n = mu.shape[0]
    best = -1
    bestd = np.inf
    ties = 0
    for a in range(n):
        if setting == SETTING_BELOW and mu[a] > threshold:
            continue
        d = abs(mu[a] - threshold)
        if d < bestd:
            bestd = d
            best = a
            ties = 1
        elif d == bestd:
            ties += 1
    return best, ties


@njit(cache=True)
def F_value(mu, threshold, w, setting, astar):
    """Transportation value F(w), per-challenger costs, and a supergradient.

    Returns (value, costs, grad) where costs[b] is the cost of the cheapest
    alternative with optimal arm b (inf at b = astar), and grad is
    [(mu_a - lam_a)^2 / 2]_a for the smallest-index minimizing challenger.
    """
    n = mu.shape[0]
    costs = np.full(n, np.inf)
    grad = np.zeros(n)
    best = np.inf
    bbest = -1
    if setting == SETTING_NONMONOTONIC:
        for b in range(n):
            if b == astar:
                continue
            d = min((mu[astar] - mu[b]) ** 2, (2.0 * threshold - mu[astar] - mu[b]) ** 2)
            denom = w[astar] + w[b]
            if denom <= 0.0:
                c = 0.0
            else:
                c = w[astar] * w[b] / (2.0 * denom) * d
            costs[b] = c
            if c < best:
                best = c
                bbest = b
        if bbest >= 0:
            lam = alt_lam_nonmonotonic(mu, threshold, w, astar, bbest)
            for a in range(n):
                grad[a] = 0.5 * (mu[a] - lam[a]) ** 2
    elif setting == SETTING_INCREASING:
        for b in range(n):
            if b == astar:
                continue
            lam, c = project_alt_increasing(mu, threshold, w, b)
            costs[b] = c
            if c < best:
                best = c
                bbest = b
                for a in range(n):
                    grad[a] = 0.5 * (mu[a] - lam[a]) ** 2
    else:  # below-threshold
        we = np.empty(n)
        for i in range(n):
            we[i] = max(w[i], WEIGHT_FLOOR)
        for b in range(n):
            if b == astar:
                continue
            lam = iso_split_bounded(mu, we, b, threshold)
            c = weighted_cost(mu, we, lam)
            costs[b] = c
            if c < best:
                best = c
                bbest = b
                for a in range(n):
                    grad[a] = 0.5 * (mu[a] - lam[a]) ** 2
    return best, costs, grad


@njit(cache=True)
def simplex_project(v):
    """Euclidean projection onto the probability simplex."""
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = 0.0
    rho = -1
    theta = 0.0
    for j in range(n):
        css += u[j]
        t = (css - 1.0) / (j + 1)
        if u[j] - t > 0.0:
            rho = j
            theta = t
    out = np.empty(n)
    for i in range(n):
        out[i] = max(v[i] - theta, 0.0)
    s = out.sum()
    if s > 0.0:
        for i in range(n):
            out[i] /= s
    return out


@njit(cache=True)
def ascent(mu, threshold, setting, astar, w0, max_iter, patience, ftol):
    """Projected sub-gradient ascent of F over the probability simplex.

    Step size c/sqrt(k) with c set from the initial supergradient scale;
    tracks the best iterate and stops when it has not improved by ftol for
    `patience` consecutive iterations. Returns (w_best, f_best, iters, gap)
    where gap is the single-supergradient optimality-gap proxy
    max_a g_a - F(w) at the best iterate.
    """
    w = w0.copy()
    f0, _, g0 = F_value(mu, threshold, w, setting, astar)
    gmax = 0.0
    for a in range(g0.shape[0]):
        if abs(g0[a]) > gmax:
            gmax = abs(g0[a])
    c = 1.0 / (gmax + 1e-12)
    w_best = w.copy()
    f_best = f0
    gap_best = np.max(g0) - f0
    since = 0
    k = 0
    for k in range(1, max_iter + 1):
        f, _, g = F_value(mu, threshold, w, setting, astar)
        if f > f_best + ftol:
            f_best = f
            w_best = w.copy()
            gap_best = np.max(g) - f
            since = 0
        else:
            since += 1
            if since >= patience:
                break
        step = c / np.sqrt(k)
        w = simplex_project(w + step * g)
    return w_best, f_best, k, gap_best


@njit(cache=True)
def equalized_weights_nonmonotonic(mu, threshold, astar):
    """Exact optimal weights of the unstructured max-min objective.

    At the optimum every challenger's transportation cost is equalized and
    the ratios r_b = w_b / w_astar satisfy sum_b r_b^2 = 1. With
    d_b = min((mu_astar - mu_b)^2, (2S - mu_astar - mu_b)^2) the equalized
    ratios are r_b(c) = c / (d_b - c), increasing in c on (0, min_b d_b),
    so a single bisection on c recovers the weights.
    """
    n = mu.shape[0]
    d = np.empty(n)
    dmin = np.inf
    for b in range(n):
        if b == astar:
            continue
        d[b] = min(
            (mu[astar] - mu[b]) ** 2, (2.0 * threshold - mu[astar] - mu[b]) ** 2
        )
        if d[b] < dmin:
            dmin = d[b]
    lo = 0.0
    hi = dmin
    for _ in range(80):
        c = 0.5 * (lo + hi)
        s = 0.0
        for b in range(n):
            if b == astar:
                continue
            r = c / (d[b] - c)
            s += r * r
        if s < 1.0:
            lo = c
        else:
            hi = c
    c = 0.5 * (lo + hi)
    w = np.empty(n)
    tot = 1.0
    for b in range(n):
        if b == astar:
            continue
        w[b] = c / (d[b] - c)
        tot += w[b]
    w[astar] = 1.0
    for a in range(n):
        w[a] /= tot
    return w


@njit(cache=True)
def below_weights(mu, threshold, astar):
    """Closed-form optimal weights of the below-threshold variant.

    Mass only on the optimal arm and its upper neighbour; when the optimal
    arm is the last one there is no upper neighbour and all mass goes to it
    (the binding alternative then moves only that arm above the threshold).
    """
    n = mu.shape[0]
    w = np.zeros(n)
    if astar == n - 1:
        w[astar] = 1.0
        return w
    il = 2.0 / (threshold - mu[astar]) ** 2
    ir = 2.0 / (mu[astar + 1] - threshold) ** 2
    w[astar] = il / (il + ir)
    w[astar + 1] = ir / (il + ir)
    return w


@njit(cache=True)
def track_weights(mu_hat, threshold, setting, w_prev, inner_iters):
    """Per-step optimal-weight estimate for Direct-Tracking.

    Exact equalization solve for the non-monotonic setting, closed form
    below threshold, and warm-started sub-gradient ascent from the previous
    step's weights for the increasing setting.
    Empirically tied optimal arms fall back to the uniform-over-argmin
    convention (the transportation value is zero there).
    """
    n = mu_hat.shape[0]
    astar, ties = argmin_distance(mu_hat, threshold, setting)
    if astar < 0 or ties > 1:
        w = np.zeros(n)
        if astar < 0:
            # below-threshold transient with no empirical mean under S
            for a in range(n):
                w[a] = 1.0 / n
            return w
        bestd = abs(mu_hat[astar] - threshold)
        for a in range(n):
            if setting == SETTING_BELOW and mu_hat[a] > threshold:
                continue
            if abs(mu_hat[a] - threshold) == bestd:
                w[a] = 1.0 / ties
        return w
    if setting == SETTING_BELOW:
        return below_weights(mu_hat, threshold, astar)
    if setting == SETTING_NONMONOTONIC:
        return equalized_weights_nonmonotonic(mu_hat, threshold, astar)
    w = simplex_project(w_prev)
    f_best, _, g = F_value(mu_hat, threshold, w, setting, astar)
    gmax = 0.0
    for a in range(n):
        if abs(g[a]) > gmax:
            gmax = abs(g[a])
    c = 1.0 / (gmax + 1e-12)
    w_best = w.copy()
    for k in range(1, inner_iters + 1):
        w = simplex_project(w + (c / np.sqrt(k)) * g)
        f, _, g = F_value(mu_hat, threshold, w, setting, astar)
        if f > f_best:
            f_best = f
            w_best = w.copy()
    return w_best


@njit(cache=True)
def glr(mu_hat, threshold, counts, setting):
    """Generalized likelihood-ratio stopping statistic.

    The transportation infimum evaluated with the raw counts as weights;
    zero when the empirical threshold-closest arm is tied (or, below
    threshold, when no empirical mean is under the threshold yet).
    """
    astar, ties = argmin_distance(mu_hat, threshold, setting)
    if astar < 0 or ties > 1:
        return 0.0
    val, _, _ = F_value(mu_hat, threshold, counts, setting, astar)
    return val


@njit(cache=True)
def beta_threshold_value(t, delta, k_arms, kind, c_theo):
    if kind == BETA_PRACTICAL:
        return np.log((np.log(float(t)) + 1.0) / delta)
    x = np.log(float(t) * c_theo / delta)
    return x + (3.0 * k_arms + 2.0) * np.log(x)


@njit(cache=True)
def restricted_cost(mu_hat, threshold, counts, setting, b):
    """inf over {lam in setting : optimal arm of lam is b} of the count-weighted cost.

    Racing's elimination statistic. For the non-monotonic setting this is a
    1-D convex problem in the distance r = |lam_b - S| (every other arm is
    pushed out to distance at least r); the structured settings reuse the
    projection machinery.
    """
    n = mu_hat.shape[0]
    if setting == SETTING_INCREASING:
        _, c = project_alt_increasing(mu_hat, threshold, counts, b)
        return c
    if setting == SETTING_BELOW:
        we = np.empty(n)
        for i in range(n):
            we[i] = max(counts[i], WEIGHT_FLOOR)
        lam = iso_split_bounded(mu_hat, we, b, threshold)
        return weighted_cost(mu_hat, we, lam)
    # non-monotonic: scan the breakpoints of the convex piecewise quadratic
    d = np.empty(n)
    for a in range(n):
        d[a] = abs(mu_hat[a] - threshold)
    order = np.argsort(d)
    r_best = d[b]
    # candidate stationary points segment by segment
    sw = counts[b]
    swx = counts[b] * d[b]
    prev = 0.0
    found = False
    for j in range(n + 1):
        hi = np.inf
        if j < n:
            hi = d[order[j]]
        if hi > prev:
            r0 = swx / sw
            if r0 < prev:
                r_best = prev
                found = True
                break
            if r0 <= hi:
                r_best = r0
                found = True
                break
        if j < n:
            a = order[j]
            if a != b:
                sw += counts[a]
                swx += counts[a] * d[a]
            prev = hi
    if not found:
        r_best = prev
    cost = 0.5 * counts[b] * (r_best - d[b]) ** 2
    for a in range(n):
        if a != b and d[a] < r_best:
            cost += 0.5 * counts[a] * (r_best - d[a]) ** 2
    return cost


@njit(cache=True)
def recommend_arm(mu_hat, threshold, setting):
    """Decision rule: smallest-index empirical threshold-closest arm.

    Below threshold the argmin runs over empirical means <= S; if there is
    none yet, fall back to the smallest-mean arm.
    """
    astar, _ = argmin_distance(mu_hat, threshold, setting)
    if astar >= 0:
        return astar
    best = 0
    for a in range(1, mu_hat.shape[0]):
        if mu_hat[a] < mu_hat[best]:
            best = a
    return best


@njit(cache=True)
def _forced_exploration_arm(counts, t, n):
    """Abnormally-rarely-sampled arm to pull, or -1 when none."""
    h = np.sqrt(float(t)) - 0.5 * n
    if h <= 0.0:
        return -1
    arm = -1
    cmin = np.iinfo(np.int64).max
    for a in range(n):
        if counts[a] < h and counts[a] < cmin:
            cmin = counts[a]
            arm = a
    return arm


@njit(cache=True)
def run_trial_chunk(
    mu,
    threshold,
    setting,
    algo,
    delta,
    beta_kind,
    c_theo,
    apt_eps,
    inner_iters,
    recompute_every,
    stop_enabled,
    noise,
    counts,
    sums,
    t,
    w,
    active,
    racing_pos,
    max_steps,
):
    """Advance one identification run until it stops or exhausts the noise.

    noise[s] is the standard-normal innovation of step s (shared across
    arms), so the run is a pure function of the noise stream. State arrays
    (counts, sums, w, active) are mutated in place; t and racing_pos are
    returned updated. Status: 1 = stopped (rec valid), 0 = needs more noise,
    2 = step cap hit.
    """
    n = mu.shape[0]
    while True:
        if t >= max_steps:
            return 2, t, racing_pos, -1
        if t >= noise.shape[0]:
            return 0, t, racing_pos, -1

        # ---- choose the arm to pull ----
        if algo == ALGO_RACING:
            # racing_pos-th active arm in index order
            arm = -1
            seen = 0
            for a in range(n):
                if active[a]:
                    if seen == racing_pos:
                        arm = a
                        break
                    seen += 1
        elif t < n:
            arm = t
        else:
            mu_hat = sums / counts
            arm = -1
            if algo == ALGO_DT or algo == ALGO_BC:
                arm = _forced_exploration_arm(counts, t, n)
            if arm < 0:
                if algo == ALGO_DT:
                    best = -np.inf
                    for a in range(n):
                        v = t * w[a] - counts[a]
                        if v > best:
                            best = v
                            arm = a
                elif algo == ALGO_BC:
                    astar, _ = argmin_distance(mu_hat, threshold, setting)
                    if astar < 0:
                        astar = recommend_arm(mu_hat, threshold, setting)
                    _, costs, _ = F_value(
                        mu_hat, threshold, counts.astype(np.float64), setting, astar
                    )
                    bhat = -1
                    cbest = np.inf
                    for b in range(n):
                        if b != astar and costs[b] < cbest:
                            cbest = costs[b]
                            bhat = b
                    arm = astar if counts[astar] <= counts[bhat] else bhat
                else:  # APT
                    best = np.inf
                    for a in range(n):
                        v = np.sqrt(float(counts[a])) * (abs(mu_hat[a] - threshold) + apt_eps)
                        if v < best:
                            best = v
                            arm = a

        # ---- pull ----
        y = mu[arm] + noise[t]
        counts[arm] += 1
        sums[arm] += y
        t += 1

        if algo == ALGO_RACING:
            racing_pos += 1
            n_active = 0
            for a in range(n):
                if active[a]:
                    n_active += 1
            if racing_pos >= n_active:
                racing_pos = 0
                if t >= n:
                    mu_hat = sums / counts
                    beta = beta_threshold_value(t, delta, n, beta_kind, c_theo)
                    cf = counts.astype(np.float64)
                    keep = -1
                    cmin = np.inf
                    for b in range(n):
                        if active[b]:
                            c = restricted_cost(mu_hat, threshold, cf, setting, b)
                            if c < cmin:
                                cmin = c
                                keep = b
                    for b in range(n):
                        if active[b] and b != keep:
                            c = restricted_cost(mu_hat, threshold, cf, setting, b)
                            if c > beta:
                                active[b] = False
                    n_active = 0
                    last = -1
                    for a in range(n):
                        if active[a]:
                            n_active += 1
                            last = a
                    if n_active == 1:
                        return 1, t, racing_pos, last
            continue

        if t < n:
            continue

        mu_hat = sums / counts
        if algo == ALGO_DT and (t - n) % recompute_every == 0:
            wn = track_weights(mu_hat, threshold, setting, w, inner_iters)
            for a in range(n):
                w[a] = wn[a]
        if stop_enabled != 0:
            stat = glr(mu_hat, threshold, counts.astype(np.float64), setting)
            beta = beta_threshold_value(t, delta, n, beta_kind, c_theo)
            if stat > beta:
                return 1, t, racing_pos, recommend_arm(mu_hat, threshold, setting)


def theoretical_constant(k_arms):
    """The exploration-threshold constant of the theoretical beta."""
    k = float(k_arms)
    return np.exp(k + 1.0) * (2.0 / k) ** k * (2.0 * (3.0 * k + 2.0)) ** (3.0 * k) * 4.0 / np.log(3.0)
