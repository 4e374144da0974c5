"""Fidelities and converse bounds for N-to-M replication of clock states.

The figure of merit throughout is the global fidelity between the M-copy
output of a process and M perfect copies, at the worst evolution time
(for energy-diagonal filters followed by the coherent grid shift the value
is time-independent, so the worst case equals the value at time zero).

Provided here:

* :func:`exact_fidelity` -- the fidelity of an arbitrary diagonal filter
  followed by the shift isometry, evaluated exactly on the grid.
* :func:`deterministic_fidelity` -- the no-filter baseline: the best
  coherent grid shift alone (success probability one).
* :func:`fidelity_lower_bound` -- Hoeffding-tail guarantee for the
  amplitude-matching filter, vanishing error for output sizes up to
  nearly quadratic in the input size.
* :func:`fidelity_upper_bound` -- converse: no process, whatever its
  success probability, beats this energy-window bound.
* :func:`windowed_fidelity_bound` -- guarantee for the occupation-windowed
  filter in terms of its window parameters.
* :func:`pyes_decay_rate` -- the exponential rate at which the success
  probability of the amplitude-matching filter must fall with N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .filters import Filter, build_super_filter, success_probability
from .spectra import (
    DEFAULT_SUPPORT_CAP,
    Spectrum,
    anchor_shift,
    n_copy_distribution,
)


@dataclass(frozen=True)
class ReplicationResult:
    """Outcome of one replication computation."""

    n: int
    m: int
    fidelity: float
    p_yes: float
    filter_kind: str
    delta_e0: int

    def __post_init__(self):
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValidationError(f"fidelity {self.fidelity} outside [0, 1]")
        if not 0.0 < self.p_yes <= 1.0:
            raise ValidationError(f"success probability {self.p_yes} outside (0, 1]")
        if self.filter_kind == "identity" and self.p_yes != 1.0:
            raise ValidationError("identity filter must succeed with certainty")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "fidelity": self.fidelity,
            "p_yes": self.p_yes,
            "filter_kind": self.filter_kind,
            "delta_e0": self.delta_e0,
        }


@dataclass(frozen=True)
class BoundReport:
    """Sandwich of fidelity bounds at one (N, M) point.

    ``e_delta`` is the half-width of the energy window used by the upper
    bound, measured on the centered integer grid (see
    :func:`fidelity_upper_bound`); ``exact`` is filled when the
    amplitude-matching filter's fidelity was evaluated alongside.
    """

    lower: float
    exact: float | None
    upper: float
    e_delta: float
    p_yes_used: float

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "exact": self.exact,
            "upper": self.upper,
            "e_delta": self.e_delta,
            "p_yes_used": self.p_yes_used,
        }


def _distributions(s, n, m, support_cap):
    dn = n_copy_distribution(s, n, support_cap=support_cap)
    dm = n_copy_distribution(s, m, support_cap=support_cap)
    return dn, dm


def exact_fidelity(
    s: Spectrum,
    n: int,
    m: int,
    flt: Filter,
    *,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> ReplicationResult:
    """Worst-case fidelity of ``filter -> coherent grid shift`` replication.

    The value is
    ``(sum_E pi_E sqrt(p_{N,E} p_{M,E+dE0}))^2 / (sum_E pi_E^2 p_{N,E})``,
    evaluated in log space.  For the amplitude-matching filter this reduces
    algebraically to ``sum_E p_{M,E+dE0}`` over the N-copy support.
    """
    if not 1 <= n <= m:
        raise ValidationError(f"need 1 <= N <= M, got N={n}, M={m}")
    if flt.n_copies != n:
        raise ValidationError(
            f"filter was built for N={flt.n_copies}, cannot replicate N={n}"
        )
    if flt.m_copies is not None and flt.m_copies != m:
        raise ValidationError(
            f"filter targets M={flt.m_copies}, cannot replicate to M={m}"
        )
    delta = flt.delta_e0 if flt.kind != "identity" else anchor_shift(s, n, m).delta_e0
    dn, dm = _distributions(s, n, m, support_cap)

    log_pn = np.array([dn.log_prob(int(e)) for e in flt.energies])
    log_pm = np.array([dm.log_prob(int(e) + delta) for e in flt.energies])
    log_num_half = logsumexp(flt.log_coeffs + 0.5 * (log_pn + log_pm))
    log_den = logsumexp(2.0 * flt.log_coeffs + log_pn)
    log_f = 2.0 * log_num_half - log_den
    fidelity = math.exp(min(0.0, log_f))
    p_yes = 1.0 if flt.kind == "identity" else math.exp(min(0.0, log_den))
    return ReplicationResult(
        n=int(n),
        m=int(m),
        fidelity=fidelity,
        p_yes=p_yes,
        filter_kind=flt.kind,
        delta_e0=int(delta),
    )


def deterministic_fidelity(
    s: Spectrum, n: int, m: int, *, support_cap: int = DEFAULT_SUPPORT_CAP
) -> ReplicationResult:
    """Best coherent-shift baseline, with no filter (unit success probability).

    Maximizes the squared Bhattacharyya overlap
    ``(sum_E sqrt(p_{N,E} p_{M,E+d}))^2`` over integer shifts ``d`` within
    one support-width of the anchor shift; the anchor is asymptotically
    optimal but at finite N the best shift can differ by a few grid steps,
    and the window search makes the baseline canonical.
    """
    if not 1 <= n <= m:
        raise ValidationError(f"need 1 <= N <= M, got N={n}, M={m}")
    dn, dm = _distributions(s, n, m, support_cap)
    delta0 = anchor_shift(s, n, m).delta_e0

    # Amplitudes in linear space: entries far in the M-copy tails may
    # underflow, but those shifts are never the maximizer.
    amp_n = np.exp(0.5 * dn.log_weights)
    amp_m = np.exp(0.5 * dm.log_weights)
    width = len(amp_n) - 1
    best, best_delta = -1.0, delta0
    for delta in range(delta0 - width, delta0 + width + 1):
        base = dn.offset + delta - dm.offset
        lo = max(0, -base)
        hi = min(len(amp_n) - 1, len(amp_m) - 1 - base)
        if hi < lo:
            continue
        overlap = float(np.dot(amp_n[lo : hi + 1], amp_m[lo + base : hi + base + 1]))
        if overlap > best:
            best, best_delta = overlap, delta
    return ReplicationResult(
        n=int(n),
        m=int(m),
        fidelity=min(1.0, best * best),
        p_yes=1.0,
        filter_kind="identity",
        delta_e0=int(best_delta),
    )


def fidelity_lower_bound(s: Spectrum, n: int, m: int) -> float:
    """Tail-bound guarantee for the amplitude-matching filter's fidelity.

    Returns ``max(0, 1 - 2 K exp(-2 N^2 p_min^2 / M + 4 N / (K M)))``.
    The error term vanishes faster than any polynomial whenever M grows
    slower than quadratically in N.  Only valid once every level holds at
    least one expected copy.

    Raises:
        ValidationError: if ``N < 1 / p_min`` (outside the bound's regime)
            or ``M < N``.
    """
    if not 1 <= n <= m:
        raise ValidationError(f"need 1 <= N <= M, got N={n}, M={m}")
    p_min = s.p_min
    if n * p_min < 1.0:
        raise ValidationError(
            f"lower bound requires N >= 1/p_min = {1.0 / p_min:.6g}, got N={n}",
            n=int(n),
            p_min=p_min,
        )
    k = s.k
    val = 1.0 - 2.0 * k * math.exp(-2.0 * n * n * p_min * p_min / m + 4.0 * n / (k * m))
    return max(0.0, val)


def max_e_delta(s: Spectrum, n: int) -> float:
    """Largest admissible window half-width for :func:`fidelity_upper_bound`.

    Equals ``N max_E |E - <H>|`` in grid units; with this choice the window
    covers the whole N-copy spectrum.
    """
    return n * s.centered_h_norm_grid


def fidelity_upper_bound(
    s: Spectrum,
    n: int,
    m: int,
    p_yes: float,
    e_delta: float,
    *,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> BoundReport:
    """Converse bound valid for every energy-diagonal process.

    For any window half-width ``e_delta`` the fidelity is at most::

        [ sqrt(max_mu sum_{|E| <= e_delta} p_{M, E+mu})
          + sqrt(max_{|E| > e_delta} p_{N,E} * (N+1)^K / p_yes) ]^2

    with energies centered so the mean single-copy energy is zero and
    ``e_delta`` measured on that centered grid (it may be fractional, since
    the centering offset generally is).  The maximum over ``mu`` scans every
    grid shift with non-empty overlap; the result is clamped to [0, 1].

    At ``e_delta = max_e_delta(s, n)`` the second term is an empty maximum
    (zero) and the bound no longer depends on ``p_yes``: it caps all
    processes regardless of how rarely they succeed, which is what forces
    fidelity to collapse beyond quadratic output sizes.
    """
    if not 1 <= n <= m:
        raise ValidationError(f"need 1 <= N <= M, got N={n}, M={m}")
    if not 0.0 < p_yes <= 1.0 + 1e-12:
        raise ValidationError(f"success probability {p_yes!r} outside (0, 1]")
    p_yes = min(1.0, float(p_yes))
    limit = max_e_delta(s, n)
    if not 0.0 <= e_delta <= limit + 1e-9:
        raise ValidationError(
            f"e_delta={e_delta!r} outside the admissible range [0, {limit!r}]"
        )
    dn, dm = _distributions(s, n, m, support_cap)

    center = n * s.grid_mean
    finite = np.isfinite(dn.log_weights)
    centered = dn.energies - center
    in_window = finite & (np.abs(centered) <= e_delta + 1e-9)
    outside = finite & ~in_window

    if np.any(outside):
        term2 = (
            math.exp(float(np.max(dn.log_weights[outside])))
            * (n + 1) ** s.k
            / p_yes
        )
    else:
        term2 = 0.0

    if np.any(in_window):
        indicator = in_window.astype(float)
        probs_m = np.exp(dm.log_weights)
        term1 = float(np.convolve(probs_m, indicator[::-1], mode="full").max())
    else:
        term1 = 0.0

    upper = min(1.0, (math.sqrt(term1) + math.sqrt(term2)) ** 2)
    try:
        lower = fidelity_lower_bound(s, n, m)
    except ValidationError:
        lower = 0.0
    return BoundReport(
        lower=lower,
        exact=None,
        upper=upper,
        e_delta=float(e_delta),
        p_yes_used=p_yes,
    )


def full_bound_report(
    s: Spectrum,
    n: int,
    m: int,
    e_delta: float | None = None,
    *,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> BoundReport:
    """Sandwich report with the amplitude-matching filter's exact fidelity."""
    flt = build_super_filter(s, n, m, support_cap=support_cap)
    p_yes = success_probability(flt, s, n, support_cap=support_cap)
    exact = exact_fidelity(s, n, m, flt, support_cap=support_cap).fidelity
    if e_delta is None:
        e_delta = max_e_delta(s, n)
    report = fidelity_upper_bound(
        s, n, m, p_yes, e_delta, support_cap=support_cap
    )
    return BoundReport(
        lower=report.lower,
        exact=exact,
        upper=report.upper,
        e_delta=report.e_delta,
        p_yes_used=report.p_yes_used,
    )


def windowed_fidelity_bound(s: Spectrum, m: int, f_value: float, xi: float) -> float:
    """Fidelity guarantee of the occupation-windowed filter.

    Returns ``max(0, 1 - 2 K exp(-2 xi f + 4 sqrt(xi f / M)))``: the mass of
    the M-copy multinomial outside the occupation window, tail-bounded.
    """
    if m < 1:
        raise ValidationError(f"need M >= 1, got {m}")
    if not (f_value > 0.0 and xi > 0.0):
        raise ValidationError("window parameters f_value and xi must be positive")
    val = 1.0 - 2.0 * s.k * math.exp(
        -2.0 * xi * f_value + 4.0 * math.sqrt(xi * f_value / m)
    )
    return max(0.0, val)


def pyes_decay_rate(s: Spectrum) -> float:
    """Exponential decay rate of the amplitude-matching success probability.

    The success probability falls like ``exp(-rate * N)`` with
    ``rate = ln(1 / p_{E*})``, where ``E*`` is the level of maximum
    ``|E - <H>|`` (ties resolved toward the higher energy): the binding
    coefficient of the filter sits at the extreme of the spectrum, where a
    single occupation pattern carries all the probability.
    """
    return -math.log(s.levels[s.max_modulus_index][1])
