"""Probabilistic filters diagonal in the total-energy eigenbasis.

A filter is the "yes" branch of a two-outcome instrument acting on the
N-copy input state.  Phase covariance forces it to be diagonal on total
energy, so it is fully described by coefficients ``pi_E in [0, 1]`` over the
N-copy grid.  Three constructions are provided:

* :func:`build_super_filter` -- reweights the Fourier amplitudes of the
  N-copy state so that they match the (shifted) M-copy amplitudes, with the
  overall scale ``gamma`` pushed as high as the constraint ``pi_E <= 1``
  allows.  This is the filter achieving fast replication rates.
* :func:`build_windowed_filter` -- the same reweighting restricted to
  occupation numbers within a window of the typical ones, trading a little
  fidelity for an exponentially larger success probability.
* :func:`identity_filter` -- passes everything (the deterministic regime).

Coefficients and ``gamma`` are carried in log space: the amplitude ratios
involve tail probabilities far below double-precision underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .spectra import (
    DEFAULT_PARTITION_CAP,
    DEFAULT_SUPPORT_CAP,
    Spectrum,
    anchor_shift,
    enumerate_partitions,
    multinomial_weight,
    n_copy_distribution,
    partition_energy,
)

FILTER_KINDS = ("super", "windowed", "identity")


@dataclass(frozen=True, eq=False)
class Filter:
    """Diagonal filter over the N-copy total-energy grid.

    Attributes:
        n_copies: number of input copies the filter acts on.
        energies: grid energies carrying a (possibly) non-zero coefficient;
            energies absent from this list have ``pi_E = 0``.
        log_coeffs: ``log pi_E`` aligned with ``energies``.
        log_gamma: log of the normalization constant ``gamma``.
        delta_e0: grid shift aligning the N-copy spectrum in the M-copy one
            (0 for the identity filter, which is not tied to a target M).
        kind: one of ``"super"``, ``"windowed"``, ``"identity"``.
        m_copies: target copy number the filter was built for, if any.
        window: ``(xi, f_value)`` for windowed filters, else ``None``.
    """

    n_copies: int
    energies: np.ndarray
    log_coeffs: np.ndarray
    log_gamma: float
    delta_e0: int
    kind: str
    m_copies: int | None = None
    window: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValidationError(f"unknown filter kind {self.kind!r}")
        if len(self.energies) != len(self.log_coeffs) or len(self.energies) == 0:
            raise ValidationError("filter needs one coefficient per energy")
        if np.any(self.log_coeffs > 1e-12):
            raise ValidationError("filter coefficients must lie in [0, 1]")
        if self.kind == "identity" and (
            np.any(self.log_coeffs != 0.0) or self.log_gamma != 0.0
        ):
            raise ValidationError("identity filter must have all coefficients 1")
        if self.kind == "super" and abs(float(np.max(self.log_coeffs))) > 1e-12:
            raise ValidationError("super filter must have a binding coefficient 1")

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)

    @property
    def coeffs(self) -> dict[int, float]:
        """Coefficients as an energy -> pi mapping (linear scale)."""
        return {
            int(e): math.exp(lc) for e, lc in zip(self.energies, self.log_coeffs)
        }

    def log_coeff(self, energy: int) -> float:
        """``log pi_E`` for one grid energy (``-inf`` where the filter is 0)."""
        i = np.searchsorted(self.energies, energy)
        if i < len(self.energies) and self.energies[i] == energy:
            return float(self.log_coeffs[i])
        return -math.inf

    def to_dict(self) -> dict:
        obj = {
            "kind": self.kind,
            "n": int(self.n_copies),
            "m": None if self.m_copies is None else int(self.m_copies),
            "gamma_log": float(self.log_gamma),
            "delta_e0": int(self.delta_e0),
            "coeffs": [
                {
                    "energy": int(e),
                    "pi": float(math.exp(lc)),
                    "pi_log": float(lc),
                }
                for e, lc in zip(self.energies, self.log_coeffs)
            ],
        }
        if self.window is not None:
            obj["window"] = {"xi": self.window[0], "f_value": self.window[1]}
        return obj


def filter_from_dict(data: dict) -> Filter:
    """Rebuild a filter from its JSON form (inverse of :meth:`Filter.to_dict`)."""
    try:
        coeffs = data["coeffs"]
        energies = np.array([int(c["energy"]) for c in coeffs])
        log_coeffs = np.array(
            [
                float(c["pi_log"]) if "pi_log" in c else math.log(float(c["pi"]))
                for c in coeffs
            ]
        )
        window = None
        if data.get("window") is not None:
            window = (float(data["window"]["xi"]), float(data["window"]["f_value"]))
        return Filter(
            n_copies=int(data["n"]),
            energies=energies,
            log_coeffs=log_coeffs,
            log_gamma=float(data["gamma_log"]),
            delta_e0=int(data["delta_e0"]),
            kind=str(data["kind"]),
            m_copies=None if data.get("m") is None else int(data["m"]),
            window=window,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed filter JSON: {exc}") from exc


def build_super_filter(
    s: Spectrum, n: int, m: int, *, support_cap: int = DEFAULT_SUPPORT_CAP
) -> Filter:
    """Amplitude-matching filter for replicating ``n`` copies into ``m``.

    Coefficients are ``pi_E = gamma * sqrt(p_{M, E+dE0} / p_{N, E})`` over
    the N-copy support, with ``gamma`` the largest constant keeping every
    coefficient at most 1 (the binding level is an extreme of the spectrum).
    For ``n == m`` the construction degenerates to the identity.
    """
    if not 1 <= n <= m:
        raise ValidationError(f"need 1 <= N <= M, got N={n}, M={m}")
    anchor = anchor_shift(s, n, m)
    dn = n_copy_distribution(s, n, support_cap=support_cap)
    dm = n_copy_distribution(s, m, support_cap=support_cap)

    idx = np.flatnonzero(np.isfinite(dn.log_weights))
    energies = dn.offset + idx
    log_pn = dn.log_weights[idx]
    j = energies + anchor.delta_e0 - dm.offset
    if j.min() < 0 or j.max() >= len(dm.log_weights):
        raise ValidationError(
            "shift misalignment: shifted N-copy support leaves the M-copy grid"
        )
    log_pm = dm.log_weights[j]
    if not np.all(np.isfinite(log_pm)):
        raise ValidationError(
            "shift misalignment: shifted N-copy energy has zero M-copy probability"
        )

    half_ratio = 0.5 * (log_pm - log_pn)
    log_gamma = -float(np.max(half_ratio))
    return Filter(
        n_copies=int(n),
        energies=energies,
        log_coeffs=log_gamma + half_ratio,
        log_gamma=log_gamma,
        delta_e0=int(anchor.delta_e0),
        kind="super",
        m_copies=int(m),
    )


def identity_filter(
    s: Spectrum, n: int, *, support_cap: int = DEFAULT_SUPPORT_CAP
) -> Filter:
    """All-pass filter: ``pi_E = 1`` on the full N-copy support."""
    dn = n_copy_distribution(s, n, support_cap=support_cap)
    energies = dn.support
    return Filter(
        n_copies=int(n),
        energies=energies,
        log_coeffs=np.zeros(len(energies)),
        log_gamma=0.0,
        delta_e0=0,
        kind="identity",
    )


def build_windowed_filter(
    s: Spectrum,
    n: int,
    m: int,
    f_value: float,
    xi: float,
    *,
    support_cap: int = DEFAULT_SUPPORT_CAP,
    partition_cap: int = DEFAULT_PARTITION_CAP,
) -> Filter:
    """Occupation-windowed variant of the amplitude-matching filter.

    Only partitions whose occupation numbers deviate from the anchor ``n0``
    by at most ``sqrt(xi * m * f_value)`` on every level keep a non-zero
    coefficient; within the window the reweighting is the multinomial ratio
    ``gamma * sqrt(q_M(n - n0 + m0) / q_N(n))`` with ``gamma`` again chosen
    maximal.  Shrinking the window costs fidelity but raises the success
    probability from exponentially small to nearly polynomial.

    For three or more levels distinct partitions can share a total energy
    while the filter must stay energy-diagonal; such partitions are merged
    into a single coefficient through the multinomial-weighted aggregate
    ``pi_E^2 = gamma^2 * sum_in-window q_M / p_{N,E}``, which leaves the
    induced success probability and fidelity unchanged.
    """
    if not 1 <= n <= m:
        raise ValidationError(f"need 1 <= N <= M, got N={n}, M={m}")
    if not (f_value > 0.0 and xi > 0.0):
        raise ValidationError("window parameters f_value and xi must be positive")
    anchor = anchor_shift(s, n, m)
    radius = math.sqrt(xi * m * f_value)

    n0 = np.array(anchor.n0)
    m0 = np.array(anchor.m0)
    in_window = []
    for part in enumerate_partitions(int(n), s.k, cap=partition_cap):
        x = np.array(part) - n0
        if np.max(np.abs(x)) > radius:
            continue
        target = x + m0
        if np.min(target) < 0:
            # Unreachable M-copy occupation: weight would be zero anyway.
            continue
        in_window.append((part, tuple(int(t) for t in target)))
    if not in_window:
        raise ValidationError("empty window: no partition qualifies")

    log_qn = np.array([multinomial_weight(s, p) for p, _ in in_window])
    log_qm = np.array([multinomial_weight(s, t) for _, t in in_window])
    log_gamma = 0.5 * float(np.min(log_qn - log_qm))

    dn = n_copy_distribution(s, n, support_cap=support_cap)
    groups: dict[int, list[int]] = {}
    for i, (part, _) in enumerate(in_window):
        groups.setdefault(partition_energy(s, part), []).append(i)
    energies = np.array(sorted(groups))
    log_coeffs = np.empty(len(energies))
    for pos, e in enumerate(energies):
        log_sum_qm = logsumexp(log_qm[groups[int(e)]])
        log_coeffs[pos] = min(
            0.0, log_gamma + 0.5 * (log_sum_qm - dn.log_prob(int(e)))
        )
    return Filter(
        n_copies=int(n),
        energies=energies,
        log_coeffs=log_coeffs,
        log_gamma=log_gamma,
        delta_e0=int(anchor.delta_e0),
        kind="windowed",
        m_copies=int(m),
        window=(float(xi), float(f_value)),
    )


def success_probability(
    flt: Filter, s: Spectrum, n: int, *, support_cap: int = DEFAULT_SUPPORT_CAP
) -> float:
    """Probability that ``n`` fresh copies pass the filter.

    This is ``sum_E pi_E^2 p_{N,E}``; it does not depend on the evolution
    time of the input, which only enters through phases.
    """
    if flt.n_copies != n:
        raise ValidationError(
            f"filter was built for N={flt.n_copies}, asked about N={n}"
        )
    if flt.kind == "identity":
        return 1.0
    dn = n_copy_distribution(s, n, support_cap=support_cap)
    log_pn = np.array([dn.log_prob(int(e)) for e in flt.energies])
    log_pyes = logsumexp(2.0 * flt.log_coeffs + log_pn)
    return float(math.exp(min(0.0, log_pyes)))
