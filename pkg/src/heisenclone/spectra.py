"""Exact Hamiltonian spectra and the combinatorics of N-copy energy laws.

A pure state evolving under a Hamiltonian ``H`` is fully described, for our
purposes, by the list of distinct energy levels that carry population: pairs
``(E, p_E)`` with ``p_E > 0``.  All level energies are required to be exact
rationals; they are rescaled onto a common integer grid (via the least common
multiple of their denominators) so that sums of energies of many copies can be
aggregated exactly.  Floating-point binning would make questions like
"does energy ``E + mu`` occur in the M-copy spectrum?" ambiguous, and the
whole construction hinges on exact level identification.

The total energy of ``N`` independent copies follows the N-fold convolution
of the single-copy law.  Its weights span hundreds of orders of magnitude
(binomial tails at ``N ~ 1000`` underflow doubles), so distributions are
stored and combined in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ResourceError, ValidationError

#: Hard ceiling on the number of grid points of an N-copy distribution.
DEFAULT_SUPPORT_CAP = 10**8

#: Hard ceiling on the number of partitions materialized by enumeration.
DEFAULT_PARTITION_CAP = 10**7

#: A partition of N into K non-negative occupation numbers, one per level.
Partition = tuple[int, ...]


def _parse_energy(value) -> Fraction:
    """Parse an energy entry into an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # Go through the decimal representation so "0.5" means 1/2, not the
        # binary expansion of the double.
        value = repr(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(
                f"could not parse energy {value!r} as an exact rational",
                energy=str(value),
            ) from exc
    raise ValidationError(
        f"unsupported energy type {type(value).__name__!r}", energy=str(value)
    )


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Distinct energy levels of a Hamiltonian with their populations.

    Attributes:
        levels: ascending ``(energy, prob)`` pairs, energies exact rationals,
            probabilities strictly positive and summing to one.
        grid_unit: the common rational unit of the integer energy grid.
        int_energies: level energies divided by ``grid_unit`` (exact ints).
    """

    levels: tuple[tuple[Fraction, float], ...]
    grid_unit: Fraction
    int_energies: tuple[int, ...]

    def __post_init__(self):
        if len(self.levels) < 2:
            raise ValidationError("degenerate spectrum: fewer than 2 levels")
        probs = [p for _, p in self.levels]
        if any(p <= 0.0 for p in probs):
            raise ValidationError("spectrum probabilities must be positive")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValidationError("spectrum probabilities must sum to 1")
        if len(set(self.int_energies)) != len(self.int_energies):
            raise ValidationError("grid energies must be distinct")
        if list(self.int_energies) != sorted(self.int_energies):
            raise ValidationError("levels must be sorted by energy")

    @property
    def k(self) -> int:
        """Number of populated energy levels."""
        return len(self.levels)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.levels], dtype=float)

    @property
    def log_probs(self) -> np.ndarray:
        return np.log(self.probs)

    @property
    def p_min(self) -> float:
        return min(p for _, p in self.levels)

    @property
    def energies(self) -> np.ndarray:
        """Physical level energies as floats."""
        return np.array([float(e) for e, _ in self.levels])

    @property
    def e_min(self) -> float:
        return float(self.levels[0][0])

    @property
    def e_max(self) -> float:
        return float(self.levels[-1][0])

    @property
    def span(self) -> float:
        """Width ``E_max - E_min`` of the populated spectrum."""
        return self.e_max - self.e_min

    @property
    def h_norm(self) -> float:
        """Operator norm ``max |E|`` over populated levels."""
        return max(abs(self.e_min), abs(self.e_max))

    @property
    def mean_energy(self) -> float:
        """Expected single-copy energy ``<H>``."""
        return float(np.dot(self.probs, self.energies))

    @property
    def grid_mean(self) -> float:
        """Expected single-copy energy in grid units."""
        return float(np.dot(self.probs, np.array(self.int_energies, dtype=float)))

    @property
    def centered_h_norm_grid(self) -> float:
        """``max |E - <H>|`` in grid units (operator norm after centering)."""
        mean = self.grid_mean
        return max(abs(e - mean) for e in self.int_energies)

    @property
    def max_modulus_index(self) -> int:
        """Index of the level maximizing ``|E - <H>|``, ties to higher energy."""
        mean = self.grid_mean
        best, best_val = 0, -1.0
        for i, e in enumerate(self.int_energies):
            val = abs(e - mean)
            if val >= best_val - 1e-12:
                best, best_val = i, max(val, best_val)
        return best

    def to_dict(self) -> dict:
        """JSON-ready form: ``{"levels": [{"energy": "...", "prob": p}, ...]}``."""
        return {
            "levels": [
                {"energy": str(e), "prob": float(p)} for e, p in self.levels
            ]
        }


def normalize_spectrum(
    raw_levels: Iterable[tuple], *, prob_tol: float = 1e-9
) -> Spectrum:
    """Validate and canonicalize raw ``(energy, prob)`` pairs.

    Energies are parsed as exact rationals (``"1/3"``, ``"-0.5"``, ints,
    :class:`~fractions.Fraction`); equal energies are merged by adding their
    probabilities; zero-probability levels are dropped (only the populated
    subspace matters).  The surviving probabilities must sum to 1 within
    ``prob_tol`` and are then renormalized exactly.  The integer grid is the
    coarsest one containing every level: unit ``1 / lcm(denominators)``.

    Raises:
        ValidationError: on negative probabilities, unparseable energies, a
            probability sum off by more than ``prob_tol``, or fewer than two
            populated levels (a Hamiltonian proportional to the identity
            generates no evolution and is rejected).
    """
    merged: dict[Fraction, float] = {}
    for entry in raw_levels:
        try:
            energy_raw, prob_raw = entry
        except (TypeError, ValueError) as exc:
            raise ValidationError(
                "each level must be an (energy, prob) pair", entry=str(entry)
            ) from exc
        energy = _parse_energy(energy_raw)
        try:
            prob = float(prob_raw)
        except (TypeError, ValueError) as exc:
            raise ValidationError(
                f"could not read probability {prob_raw!r}", energy=str(energy)
            ) from exc
        if not math.isfinite(prob) or prob < 0.0:
            raise ValidationError(
                f"probability must be a finite non-negative number, got {prob!r}",
                energy=str(energy),
            )
        if prob == 0.0:
            continue
        merged[energy] = merged.get(energy, 0.0) + prob

    if len(merged) < 2:
        raise ValidationError(
            "degenerate spectrum: need at least 2 levels with positive probability"
        )

    total = sum(merged.values())
    if abs(total - 1.0) > prob_tol:
        raise ValidationError(
            f"probabilities sum to {total!r}, expected 1 within {prob_tol}"
        )

    energies = sorted(merged)
    lcm = math.lcm(*(e.denominator for e in energies))
    grid_unit = Fraction(1, lcm)
    int_energies = tuple(int(e * lcm) for e in energies)
    levels = tuple((e, merged[e] / total) for e in energies)
    return Spectrum(levels=levels, grid_unit=grid_unit, int_energies=int_energies)


def spectrum_from_dict(data) -> Spectrum:
    """Build a :class:`Spectrum` from the JSON schema ``{"levels": [...]}``."""
    if not isinstance(data, dict) or "levels" not in data:
        raise ValidationError('spectrum JSON must be an object with a "levels" key')
    raw = data["levels"]
    if not isinstance(raw, list):
        raise ValidationError('"levels" must be a list of {"energy", "prob"} objects')
    pairs = []
    for item in raw:
        if not isinstance(item, dict) or "energy" not in item or "prob" not in item:
            raise ValidationError(
                'each level must be an object with "energy" and "prob" keys',
                entry=str(item),
            )
        pairs.append((item["energy"], item["prob"]))
    return normalize_spectrum(pairs)


@dataclass(frozen=True)
class EnergyDistribution:
    """Total-energy law of ``n_copies`` independent copies, in log space.

    ``log_weights[i]`` is the log-probability that the total grid energy is
    ``offset + i``; unreachable grid points hold ``-inf``.
    """

    n_copies: int
    offset: int
    log_weights: np.ndarray
    support_size: int

    def __post_init__(self):
        total = logsumexp(self.log_weights)
        if abs(math.expm1(total)) > 1e-12:
            raise ValidationError(
                f"energy distribution not normalized: sum is exp({total!r})"
            )

    @property
    def energies(self) -> np.ndarray:
        """Grid energies covered by the dense weight array."""
        return self.offset + np.arange(len(self.log_weights))

    @property
    def support(self) -> np.ndarray:
        """Grid energies with non-zero probability."""
        return self.offset + np.flatnonzero(np.isfinite(self.log_weights))

    def log_prob(self, energy: int) -> float:
        """Log-probability of a grid energy (``-inf`` off the grid)."""
        i = energy - self.offset
        if i < 0 or i >= len(self.log_weights):
            return -math.inf
        return float(self.log_weights[i])

    def prob(self, energy: int) -> float:
        return math.exp(self.log_prob(energy))


def _binomial_log_weights(n: int, log_probs: np.ndarray, step: int) -> np.ndarray:
    # Two-level closed form: the N-fold convolution of a two-point law is the
    # binomial distribution on the sub-grid with spacing `step`.
    k = np.arange(n + 1)
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    vals = log_binom + k * log_probs[1] + (n - k) * log_probs[0]
    out = np.full(n * step + 1, -np.inf)
    out[k * step] = vals
    return out


def _convolved_log_weights(int_energies, log_probs, n: int) -> np.ndarray:
    # Iterated log-space convolution with the single-copy law; accumulation
    # order is fixed (ascending level energy) so results are reproducible.
    lo = int_energies[0]
    shifts = [e - lo for e in int_energies]
    span = shifts[-1]
    cur = np.full(span + 1, -np.inf)
    for sh, lp in zip(shifts, log_probs):
        cur[sh] = np.logaddexp(cur[sh], lp)
    for copies in range(2, n + 1):
        nxt = np.full(copies * span + 1, -np.inf)
        for sh, lp in zip(shifts, log_probs):
            seg = nxt[sh : sh + len(cur)]
            np.logaddexp(seg, cur + lp, out=seg)
        cur = nxt
    return cur


def n_copy_distribution(
    s: Spectrum, n: int, *, support_cap: int = DEFAULT_SUPPORT_CAP
) -> EnergyDistribution:
    """Exact total-energy law of ``n`` copies on the integer grid.

    Computed as the n-fold convolution of the single-copy law, entirely in
    log space; for two-level spectra the equivalent binomial closed form is
    used (iterating the convolution to ``n ~ 1e5`` copies would be
    needlessly quadratic).

    Raises:
        ValidationError: if ``n < 1``.
        ResourceError: if the dense support would exceed ``support_cap``
            grid points.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"number of copies must be a positive integer, got {n!r}")
    n = int(n)
    ints = s.int_energies
    span = ints[-1] - ints[0]
    size = n * span + 1
    if size > support_cap:
        raise ResourceError(
            f"distribution support of {size} grid points exceeds cap {support_cap}",
            support=size,
            cap=int(support_cap),
        )
    log_probs = s.log_probs
    if s.k == 2:
        weights = _binomial_log_weights(n, log_probs, span)
    else:
        weights = _convolved_log_weights(ints, log_probs, n)
    # Remove the accumulated rounding drift of the total (a uniform log
    # shift, so probability ratios are untouched).
    weights -= logsumexp(weights)
    return EnergyDistribution(
        n_copies=n,
        offset=n * ints[0],
        log_weights=weights,
        support_size=int(np.isfinite(weights).sum()),
    )


def enumerate_partitions(
    n: int, k: int, *, cap: int = DEFAULT_PARTITION_CAP
) -> list[Partition]:
    """All ways to distribute ``n`` copies over ``k`` levels, in lexicographic order.

    The list has exactly ``C(n+k-1, k-1)`` entries.

    Raises:
        ValidationError: if ``n < 0`` or ``k < 1``.
        ResourceError: if the partition count exceeds ``cap`` (the error
            reports the count that would have been produced).
    """
    if n < 0 or k < 1:
        raise ValidationError(f"need n >= 0 and k >= 1, got n={n}, k={k}")
    count = math.comb(n + k - 1, k - 1)
    if count > cap:
        raise ResourceError(
            f"enumeration would produce {count} partitions, cap is {cap}",
            count=count,
            cap=int(cap),
        )

    out: list[Partition] = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for c in range(remaining + 1):
            rec(prefix + (c,), remaining - c, slots - 1)

    rec((), n, k)
    return out


def multinomial_weight(s: Spectrum, counts: Sequence[int]) -> float:
    """Log-probability that ``sum(counts)`` copies occupy the levels as ``counts``.

    This is the multinomial weight ``log [ N! * prod_E p_E^{c_E} / c_E! ]``,
    evaluated through log-gamma.
    """
    if len(counts) != s.k:
        raise ValidationError(
            f"partition has {len(counts)} entries for {s.k} levels"
        )
    if any(c < 0 or c != int(c) for c in counts):
        raise ValidationError("partition entries must be non-negative integers")
    n = int(sum(counts))
    log_probs = s.log_probs
    total = math.lgamma(n + 1)
    for c, lp in zip(counts, log_probs):
        c = int(c)
        total -= math.lgamma(c + 1)
        if c:
            total += c * lp
    return total


def partition_energy(s: Spectrum, counts: Sequence[int]) -> int:
    """Total grid energy of a partition."""
    return int(sum(int(c) * e for c, e in zip(counts, s.int_energies)))


@dataclass(frozen=True)
class AnchorPair:
    """Reference partitions aligning the N-copy spectrum inside the M-copy one.

    ``n0`` and ``m0`` round the expected occupations ``N p_E`` and ``M p_E``
    to integers (largest-remainder rule, ties to the lower-energy level), and
    ``delta_e0 = E(m0) - E(n0)`` is the grid translation under which every
    N-copy total energy reappears as an M-copy total energy.
    """

    n0: Partition
    m0: Partition
    delta_e0: int


def _largest_remainder(total: int, probs: np.ndarray) -> Partition:
    targets = total * probs
    floors = np.floor(targets).astype(int)
    residual = int(total - floors.sum())
    # Stable sort keeps ascending-energy order among equal fractional parts,
    # so ties send the extra count to the lower-energy level.
    order = np.argsort(-(targets - floors), kind="stable")
    for i in range(residual):
        floors[order[i % len(floors)]] += 1
    return tuple(int(c) for c in floors)


def anchor_shift(s: Spectrum, n: int, m: int) -> AnchorPair:
    """Rounded occupation anchors and the energy shift between N and M copies.

    The shift tracks ``(M - N) <H>``: on physical units it deviates from it
    by at most ``2 K ||H||_inf`` because each rounded occupation is within 1
    of its target.
    """
    if not 1 <= n <= m:
        raise ValidationError(f"need 1 <= N <= M, got N={n}, M={m}")
    probs = s.probs
    n0 = _largest_remainder(int(n), probs)
    m0 = _largest_remainder(int(m), probs)
    delta = partition_energy(s, m0) - partition_energy(s, n0)
    return AnchorPair(n0=n0, m0=m0, delta_e0=delta)
