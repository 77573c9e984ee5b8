"""Saturated CSMA contention over Rayleigh channels, with one storage.

Each unit-length control slot, source s attempts with probability q_s; the
destination grants the channel to the attempter with the highest control
SINR provided it exceeds the detection threshold.  The winner's transfer
takes C_s / log(1 + |H_s|^2 / noise) time units.  Because the max-SINR
ordering coincides with the ordering of |H_s|^2 * A_s, every slot outcome is
a function of the attempt flags and the per-source exponential channel gains.

The per-source conditional transfer moments have no closed form, so they are
Monte Carlo estimated.  ``ChannelMomentCache`` decomposes the estimate by
attempt subset with common random numbers: the per-subset win probabilities
and conditional moments do not depend on q, so one draw of the channel matrix
prices every attempt profile.  That makes the best-response and cooperative
searches cheap and smooth in q.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoSuccessProbability
from .estimate import AaoiEstimate
from .search import golden_section_min

_T_CAP_DEFAULT = 1e6


@dataclass(frozen=True)
class ChannelModel:
    """Rayleigh contention channel: |H_s|^2 ~ Exp(mean 2*sigma2[s])."""

    sigma2: tuple          # per-source Rayleigh variance parameters
    sigma_n2: float        # noise variance
    theta: float           # SINR detection threshold
    c: tuple               # per-source rate constants in T = C / log(1 + SNR)
    lam: tuple             # per-source update arrival rates
    t_cap: float = _T_CAP_DEFAULT

    def __post_init__(self):
        sigma2 = tuple(float(v) for v in self.sigma2)
        c = tuple(float(v) for v in self.c)
        lam = tuple(float(v) for v in self.lam)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "lam", lam)
        if not (len(sigma2) == len(c) == len(lam)):
            raise ValueError("per-source parameter lengths disagree")
        if any(v <= 0 for v in sigma2 + c + lam):
            raise ValueError("sigma2, c and lam must be positive")
        if self.sigma_n2 <= 0 or self.theta <= 0:
            raise ValueError("noise variance and threshold must be positive")

    @property
    def n_sources(self) -> int:
        return len(self.sigma2)

    def is_symmetric(self) -> bool:
        return (len(set(self.sigma2)) == 1 and len(set(self.c)) == 1
                and len(set(self.lam)) == 1)


@dataclass
class SuccessStats:
    """Per-source success probabilities and conditional transfer moments."""

    phi: np.ndarray
    t1: np.ndarray         # E[T | source wins the slot]
    t2: np.ndarray         # E[T^2 | source wins the slot]
    phi_half_width: np.ndarray
    n_slots: int
    clamped: int = 0
    closed_form_checks: dict = field(default_factory=dict)


def _validate_profile(channel, q):
    q = np.asarray(q, dtype=float)
    if q.shape != (channel.n_sources,):
        raise ValueError("attempt profile length mismatch")
    if np.any((q < 0) | (q > 1)):
        raise ValueError("attempt probabilities must lie in [0, 1]")
    return q


def _transfer_times(channel, gains):
    snr = gains / channel.sigma_n2
    log_term = np.log1p(snr)
    with np.errstate(divide="ignore"):
        t = np.asarray(channel.c) / log_term
    clamped = int(np.count_nonzero(~(t <= channel.t_cap)))
    return np.minimum(np.nan_to_num(t, nan=channel.t_cap, posinf=channel.t_cap),
                      channel.t_cap), clamped


def _slot_outcomes(channel, gains, attempts):
    """(winner index per slot or -1, transfer time per slot) for given draws."""
    b = gains * attempts
    winner = np.argmax(b, axis=1)
    rows = np.arange(b.shape[0])
    best = b[rows, winner]
    interference = b.sum(axis=1) - best
    success = best > channel.theta * (interference + channel.sigma_n2)
    winner = np.where(success, winner, -1)
    return winner


def success_stats(channel: ChannelModel, q, seed: int = 0,
                  n_slots: int = 100_000,
                  fast_paths_allowed: bool = False) -> SuccessStats:
    """Direct slot Monte Carlo over joint (attempt, channel-gain) draws."""
    if n_slots < 10_000:
        raise ValueError("need at least 1e4 slots")
    q = _validate_profile(channel, q)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC5)))
    s_count = channel.n_sources
    gains = rng.exponential(2.0 * np.asarray(channel.sigma2),
                            size=(n_slots, s_count))
    attempts = rng.random((n_slots, s_count)) < q
    winner = _slot_outcomes(channel, gains, attempts)
    times, clamped = _transfer_times(channel, gains)
    phi = np.empty(s_count)
    t1 = np.zeros(s_count)
    t2 = np.zeros(s_count)
    hw = np.empty(s_count)
    for s in range(s_count):
        wins = winner == s
        n_wins = int(wins.sum())
        phi[s] = n_wins / n_slots
        hw[s] = 1.96 * math.sqrt(max(phi[s] * (1 - phi[s]), 0.0) / n_slots)
        if n_wins:
            t1[s] = float(times[wins, s].mean())
            t2[s] = float(np.mean(times[wins, s] ** 2))
        elif q[s] > 0:
            raise NoSuccessProbability(
                f"source {s} never won in {n_slots} slots despite q={q[s]}")
    checks = {}
    if fast_paths_allowed:
        if channel.theta >= 1.0:
            checks["exact_high_theta"] = phi_exact_high_theta(channel, q)
        else:
            checks["low_noise_approx"] = phi_low_noise_approx(channel, q)
        if s_count == 2:
            checks["two_source_approx"] = phi_two_source_approx(channel, q)
        for s in range(s_count):
            if q[s] > 0 and all(q[j] == 0 for j in range(s_count) if j != s):
                checks["solo"] = (s, phi_solo(channel, s, q[s]))
    return SuccessStats(phi=phi, t1=t1, t2=t2, phi_half_width=hw,
                        n_slots=n_slots, clamped=clamped,
                        closed_form_checks=checks)


def phi_solo(channel: ChannelModel, s: int, q_s: float) -> float:
    """Exact success probability of a lone attempter."""
    return q_s * math.exp(-0.5 * channel.theta * channel.sigma_n2
                          / channel.sigma2[s])


def phi_exact_high_theta(channel: ChannelModel, q) -> np.ndarray:
    """Exact phi for theta >= 1: interference subsets cannot out-rank the
    winner, so the success event factorizes over attacker subsets."""
    q = _validate_profile(channel, q)
    s_count = channel.n_sources
    theta = channel.theta
    phi = np.zeros(s_count)
    for s in range(s_count):
        others = [j for j in range(s_count) if j != s]
        total = 0.0
        for bits in itertools.product((0, 1), repeat=len(others)):
            term = 1.0
            for j, bit in zip(others, bits):
                if bit:
                    term *= q[j] * channel.sigma2[s] / (
                        channel.sigma2[s] + theta * channel.sigma2[j])
                else:
                    term *= 1.0 - q[j]
            total += term
        phi[s] = q[s] * math.exp(
            -0.5 * theta * channel.sigma_n2 / channel.sigma2[s]) * total
    return phi


def phi_low_noise_approx(channel: ChannelModel, q) -> np.ndarray:
    """theta < 1, noise ~ 0 approximation; the expectation over the winner's
    gain is evaluated exactly by expanding the product into subset terms."""
    q = _validate_profile(channel, q)
    s_count = channel.n_sources
    phi = np.zeros(s_count)
    for s in range(s_count):
        rate_s = 1.0 / (2.0 * channel.sigma2[s])
        others = [j for j in range(s_count) if j != s]
        total = 0.0
        for bits in itertools.product((0, 1), repeat=len(others)):
            coeff = 1.0
            rate = rate_s
            for j, bit in zip(others, bits):
                if bit:
                    coeff *= -q[j]
                    rate += 1.0 / (2.0 * channel.sigma2[j])
            total += coeff * rate_s / rate
        phi[s] = q[s] * total
    return phi


def phi_two_source_approx(channel: ChannelModel, q) -> np.ndarray:
    """Moderate-SINR two-source approximation."""
    if channel.n_sources != 2:
        raise ValueError("two-source approximation needs S = 2")
    q = _validate_profile(channel, q)
    m = max(channel.theta, 1.0)
    out = np.zeros(2)
    for s, o in ((0, 1), (1, 0)):
        out[s] = q[s] * (1.0 - q[o] * m * channel.sigma2[o]
                         / (m * channel.sigma2[o] + channel.sigma2[s]))
    return out


class ChannelMomentCache:
    """Subset-decomposed slot statistics with common random numbers.

    Per attempt subset A and winner s in A, the win probability and the
    conditional transfer moments are independent of q; a profile is priced by
    mixing the subsets with their Bernoulli weights.  One cache therefore
    serves every profile evaluated during an equilibrium search, and the
    resulting phi(q) is exactly linear in each q_s.
    """

    def __init__(self, channel: ChannelModel, n_samples: int = 200_000,
                 seed: int = 0):
        self.channel = channel
        self.n_samples = n_samples
        self.seed = seed
        s_count = channel.n_sources
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0xCA)))
        gains = rng.exponential(2.0 * np.asarray(channel.sigma2),
                                size=(n_samples, s_count))
        times, self.clamped = _transfer_times(channel, gains)
        n_subsets = 1 << s_count
        self._win = np.zeros((n_subsets, s_count))
        self._m1 = np.zeros((n_subsets, s_count))
        self._m2 = np.zeros((n_subsets, s_count))
        for mask in range(1, n_subsets):
            members = [s for s in range(s_count) if mask >> s & 1]
            sub = gains[:, members]
            arg = np.argmax(sub, axis=1)
            rows = np.arange(n_samples)
            best = sub[rows, arg]
            interference = sub.sum(axis=1) - best
            success = best > channel.theta * (interference + channel.sigma_n2)
            for i, s in enumerate(members):
                wins = success & (arg == i)
                self._win[mask, s] = wins.mean()
                if wins.any():
                    ts = times[wins, s]
                    self._m1[mask, s] = ts.sum() / n_samples
                    self._m2[mask, s] = (ts ** 2).sum() / n_samples

    def stats(self, q) -> SuccessStats:
        q = _validate_profile(self.channel, q)
        s_count = self.channel.n_sources
        n_subsets = 1 << s_count
        weights = np.empty(n_subsets)
        for mask in range(n_subsets):
            w = 1.0
            for s in range(s_count):
                w *= q[s] if mask >> s & 1 else 1.0 - q[s]
            weights[mask] = w
        phi = weights @ self._win
        num1 = weights @ self._m1
        num2 = weights @ self._m2
        t1 = np.divide(num1, phi, out=np.zeros_like(phi), where=phi > 0)
        t2 = np.divide(num2, phi, out=np.zeros_like(phi), where=phi > 0)
        hw = 1.96 * np.sqrt(np.maximum(phi * (1 - phi), 0.0) / self.n_samples)
        return SuccessStats(phi=phi, t1=t1, t2=t2, phi_half_width=hw,
                            n_slots=self.n_samples, clamped=self.clamped)


def aaoi_csma(channel: ChannelModel, q, stats: SuccessStats,
              backend: str = "corrected"):
    """Per-source AAoI from the slot-level cycle moments.

    ``corrected`` uses the multinomial treatment of the other-source transfer
    counts; ``published`` evaluates the published second-moment display verbatim
    (its cross terms drop the per-slot winner weights).
    """
    q = _validate_profile(channel, q)
    out = []
    phi, t1, t2 = stats.phi, stats.t1, stats.t2
    for s in range(channel.n_sources):
        if q[s] == 0 or phi[s] <= 0:
            raise NoSuccessProbability(f"source {s} cannot succeed (phi = 0)")
        f = phi[s]
        others = [j for j in range(channel.n_sources) if j != s]
        en = 1.0 / f
        en2 = (2.0 - f) / f ** 2
        e_rc = en + float(np.sum(phi * t1)) / f
        sum_m_t1 = sum(phi[j] * t1[j] for j in others) / f     # E[M^j] mu_j
        sum_m_t2 = sum(phi[j] * t2[j] for j in others) / f
        if backend == "corrected":
            enn12 = en2 - 3.0 * en + 2.0                       # E[(N-1)(N-2)]
            mix = sum(phi[j] * t1[j] for j in others) / (1.0 - f)
            e_rc2 = (en2 + t2[s] + sum_m_t2
                     + enn12 * mix ** 2
                     + 2.0 * sum(2.0 * phi[j] / f ** 2 * t1[j] for j in others)
                     + 2.0 * en * t1[s]
                     + 2.0 * t1[s] * sum_m_t1)
        elif backend == "published":
            sum_t1 = sum(t1[j] for j in others)
            e_rc2 = (en2 + t2[s] + sum_m_t2
                     + (en2 - 3.0 * en + 2.0) * sum_t1 ** 2
                     + 2.0 * sum((2.0 * phi[j] / f ** 2 - phi[j] / f) * t1[j]
                                 for j in others)
                     + 2.0 * en * t1[s]
                     + 2.0 * (en - 1.0) * t1[s] * sum_t1)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        value = t1[s] + 1.0 / channel.lam[s] + 0.5 * e_rc2 / e_rc
        out.append(AaoiEstimate(value=value))
    return out


def structural_cycle_moments(channel: ChannelModel, q, s: int, seed: int = 0,
                             n_cycles: int = 100_000,
                             n_slots: int = 200_000):
    """Oracle for the cycle moments of source s: sample geometric cycles with
    per-failed-slot winners and bootstrap conditional transfer draws from an
    independent slot Monte Carlo.  Returns (m1, m2, se1, se2)."""
    q = _validate_profile(channel, q)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5C)))
    s_count = channel.n_sources
    gains = rng.exponential(2.0 * np.asarray(channel.sigma2),
                            size=(n_slots, s_count))
    attempts = rng.random((n_slots, s_count)) < q
    winner = _slot_outcomes(channel, gains, attempts)
    times, _ = _transfer_times(channel, gains)
    pools = []
    phi = np.empty(s_count)
    for j in range(s_count):
        wins = winner == j
        phi[j] = wins.mean()
        pools.append(times[wins, j])
    if phi[s] <= 0:
        raise NoSuccessProbability(f"source {s} never succeeds at q={q}")
    n_attempts = rng.geometric(phi[s], n_cycles)
    rc = n_attempts.astype(float)
    rc += rng.choice(pools[s], size=n_cycles)
    fail_probs = phi.copy()
    fail_probs[s] = 0.0
    none_prob = 1.0 - phi.sum()
    options = np.append(fail_probs, none_prob) / (1.0 - phi[s])
    for i in range(n_cycles):
        for _ in range(int(n_attempts[i]) - 1):
            w = rng.choice(s_count + 1, p=options)
            if w < s_count:
                rc[i] += rng.choice(pools[w])
    m1 = float(rc.mean())
    m2 = float(np.mean(rc ** 2))
    return (m1, m2, float(rc.std(ddof=1)) / math.sqrt(n_cycles),
            float((rc ** 2).std(ddof=1)) / math.sqrt(n_cycles))


def simulate_csma(channel: ChannelModel, q, horizon_slots: int, seed: int = 0,
                  replications: int = 4):
    """End-to-end slot simulation; returns a list with one AaoiEstimate per
    source, or None for a source that never delivered (divergence flag)."""
    if horizon_slots < 1:
        raise ValueError("need at least one slot")
    q = _validate_profile(channel, q)
    s_count = channel.n_sources
    per_rep = np.full((replications, s_count), np.nan)
    for rep in range(replications):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep, 0x51)))
        gains = rng.exponential(2.0 * np.asarray(channel.sigma2),
                                size=(horizon_slots, s_count))
        attempts = rng.random((horizon_slots, s_count)) < q
        winner = _slot_outcomes(channel, gains, attempts)
        times, _ = _transfer_times(channel, gains)
        slot_len = np.ones(horizon_slots)
        delivered = winner >= 0
        slot_len[delivered] += times[np.nonzero(delivered)[0],
                                     winner[delivered]]
        ends = np.cumsum(slot_len)
        total = ends[-1]
        for s in range(s_count):
            own = np.nonzero(winner == s)[0]
            if own.size == 0:
                continue  # diverged: age grows without bound
            resets = times[own, s] + rng.exponential(1.0 / channel.lam[s],
                                                     own.size)
            t_deliver = ends[own]
            start_age = rng.exponential(1.0 / channel.lam[s])
            prev_t = np.concatenate(([0.0], t_deliver))
            prev_g = np.concatenate(([start_age], resets))
            gaps = np.concatenate((t_deliver, [total])) - prev_t
            area = float(np.sum(prev_g * gaps + 0.5 * gaps ** 2))
            per_rep[rep, s] = area / total
    out = []
    for s in range(s_count):
        vals = per_rep[:, s]
        if np.any(np.isnan(vals)):
            out.append(None)
            continue
        mean = float(vals.mean())
        hw = (1.96 * float(vals.std(ddof=1)) / math.sqrt(replications)
              if replications > 1 else 0.0)
        out.append(AaoiEstimate(value=mean, half_width=hw,
                                replications=replications, seed=seed))
    return out


def _payoff(channel, cache, q, s):
    try:
        return aaoi_csma(channel, q, cache.stats(q))[s].value
    except NoSuccessProbability:
        return math.inf


def best_response(channel: ChannelModel, q, s: int,
                  cache: ChannelMomentCache | None = None,
                  grid_size: int = 21) -> float:
    """Minimize source s's AAoI over its own attempt probability.

    Grid scan plus golden-section refinement; exact ties break toward the
    larger attempt probability.
    """
    if grid_size < 11:
        raise ValueError("grid_size must be at least 11")
    if cache is None:
        cache = ChannelMomentCache(channel)
    q = np.asarray(q, dtype=float).copy()

    def f(x):
        q[s] = x
        return _payoff(channel, cache, q, s)

    grid = np.linspace(0.0, 1.0, grid_size)
    vals = [f(x) for x in grid]
    best_i = max(range(grid_size),
                 key=lambda i: (-vals[i], grid[i]))  # ties toward larger q
    lo = grid[max(best_i - 1, 0)]
    hi = grid[min(best_i + 1, grid_size - 1)]
    x_star, v_star = golden_section_min(f, lo, hi, tol=1e-6)
    if vals[best_i] <= v_star:
        x_star, v_star = grid[best_i], vals[best_i]
    # snap to the boundary when it is at least as good (observed all-ones NE)
    if f(1.0) <= v_star + 1e-12:
        x_star = 1.0
    return float(x_star)


def nash_equilibrium(channel: ChannelModel, init=None, tol: float = 1e-3,
                     max_rounds: int = 50,
                     cache: ChannelMomentCache | None = None,
                     grid_size: int = 21):
    """Synchronous best-response iteration.

    Returns (profile, per-source AAoI list, converged flag); non-convergence
    is reported honestly with the last iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if cache is None:
        cache = ChannelMomentCache(channel)
    q = (np.full(channel.n_sources, 0.5) if init is None
         else np.asarray(init, dtype=float).copy())
    converged = False
    for _ in range(max_rounds):
        new_q = np.array([best_response(channel, q, s, cache, grid_size)
                          for s in range(channel.n_sources)])
        if float(np.max(np.abs(new_q - q))) < tol:
            q = new_q
            converged = True
            break
        q = new_q
    aaoi = aaoi_csma(channel, q, cache.stats(q))
    return q, aaoi, converged


def _social(channel, cache, q):
    try:
        vals = aaoi_csma(channel, q, cache.stats(q))
    except NoSuccessProbability:
        return math.inf
    return sum(v.value for v in vals) / channel.n_sources


def cooperative_optimum(channel: ChannelModel,
                        cache: ChannelMomentCache | None = None,
                        grid_size: int = 21, sweeps: int = 6):
    """Minimize the average AAoI over attempt profiles.

    Symmetric channels are first searched over symmetric profiles; coordinate
    descent from multiple starts then verifies no per-source improvement.
    Returns (profile, social AaoiEstimate).
    """
    if cache is None:
        cache = ChannelMomentCache(channel)
    s_count = channel.n_sources
    starts = [np.ones(s_count), np.full(s_count, 0.5)]
    ne_q, _, _ = nash_equilibrium(channel, cache=cache, grid_size=grid_size)
    starts.append(ne_q)
    if channel.is_symmetric():
        sym, _ = golden_section_min(
            lambda x: _social(channel, cache, np.full(s_count, x)),
            0.0, 1.0, tol=1e-6)
        grid = np.linspace(0.0, 1.0, 4 * grid_size)
        g_best = min(grid, key=lambda x: _social(channel, cache,
                                                 np.full(s_count, x)))
        cand = min((sym, g_best),
                   key=lambda x: _social(channel, cache, np.full(s_count, x)))
        starts.append(np.full(s_count, cand))
    best_q, best_v = None, math.inf
    for start in starts:
        q = start.copy()
        for _ in range(sweeps):
            moved = 0.0
            for s in range(s_count):
                def f(x, s=s):
                    trial = q.copy()
                    trial[s] = x
                    return _social(channel, cache, trial)

                grid = np.linspace(0.0, 1.0, grid_size)
                vals = [f(x) for x in grid]
                i = int(np.argmin(vals))
                lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
                x_star, v_star = golden_section_min(f, lo, hi, tol=1e-6)
                if vals[i] <= v_star:
                    x_star, v_star = grid[i], vals[i]
                moved = max(moved, abs(q[s] - x_star))
                q[s] = x_star
            if moved < 1e-4:
                break
        v = _social(channel, cache, q)
        if v < best_v:
            best_q, best_v = q.copy(), v
    return best_q, AaoiEstimate(value=best_v)
