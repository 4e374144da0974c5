"""Sweeps over input size and extraction of scaling exponents.

A sweep evaluates, for each input size ``N`` (with output size
``M = ceil(c N^alpha)``, or for a fixed ``N`` with an explicit list of
``M`` values), the full set of replication quantities: filtered and
deterministic fidelities, the lower/upper bound sandwich, and the success
probability of the chosen filter policy.  Rows are deterministic and
independent, and serialize to a fixed-header CSV so that two runs of the
same sweep are byte-identical.

:func:`fit_exponent` recovers decay rates from the rows.  The transform
matters: an exponential decay ``p ~ exp(s N)`` shows up as a slope in
``ln p`` versus ``N``, while a stretched-exponential error
``1 - F ~ exp(-c N^beta)`` shows its exponent ``beta`` only as the slope of
``ln(-ln(1 - F))`` versus ``ln N`` -- fitting the wrong chart hides the
scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .filters import build_super_filter, build_windowed_filter, success_probability
from .replication import (
    deterministic_fidelity,
    exact_fidelity,
    fidelity_lower_bound,
    fidelity_upper_bound,
    max_e_delta,
)
from .spectra import DEFAULT_SUPPORT_CAP, Spectrum

CSV_HEADER = "N,M,F_super,F_det,F_lower,F_upper,p_yes"

POLICIES = ("super", "windowed", "identity")


def default_window_growth(n: int) -> float:
    """Default window growth function ``ln(N + 1)``.

    Slowly divergent but sub-polynomial, which is exactly what the windowed
    construction needs for near-polynomial success probabilities.
    """
    return math.log(n + 1.0)


@dataclass(frozen=True)
class SweepSpec:
    """Declarative description of one sweep.

    Either ``alpha`` mode (one row per ``n`` in ``n_values``, with
    ``m = ceil(c * n**alpha)``) or fixed-N mode (``n_values`` has a single
    entry and ``m_values`` lists the output sizes).  ``policy`` selects the
    filter whose success probability fills the ``p_yes`` column; the
    fidelity columns are always computed for the canonical objects.
    """

    spectrum: Spectrum
    n_values: tuple[int, ...]
    alpha: float = 1.5
    c: float = 1.0
    m_values: tuple[int, ...] | None = None
    policy: str = "super"
    xi: float | None = None
    support_cap: int = DEFAULT_SUPPORT_CAP

    def __post_init__(self):
        if not self.n_values:
            raise ValidationError("n_values must be non-empty")
        if list(self.n_values) != sorted(set(self.n_values)):
            raise ValidationError("n_values must be strictly ascending")
        if self.m_values is None:
            if not 1.0 <= self.alpha <= 3.0:
                raise ValidationError(f"alpha must be in [1, 3], got {self.alpha!r}")
            if self.c <= 0.0:
                raise ValidationError(f"c must be positive, got {self.c!r}")
        else:
            if len(self.n_values) != 1:
                raise ValidationError("fixed-N mode needs a single N value")
            if not self.m_values or list(self.m_values) != sorted(set(self.m_values)):
                raise ValidationError("m_values must be non-empty and ascending")
        if self.policy not in POLICIES:
            raise ValidationError(f"unknown filter policy {self.policy!r}")
        if self.policy == "windowed" and (self.xi is None or self.xi <= 0.0):
            raise ValidationError("windowed policy requires a positive xi")

    def pairs(self) -> list[tuple[int, int]]:
        """The (N, M) grid of the sweep."""
        if self.m_values is not None:
            n = self.n_values[0]
            return [(n, int(m)) for m in self.m_values]
        return [
            (int(n), int(math.ceil(self.c * float(n) ** self.alpha)))
            for n in self.n_values
        ]

    def to_dict(self) -> dict:
        return {
            "spectrum": self.spectrum.to_dict(),
            "n_values": list(self.n_values),
            "alpha": self.alpha,
            "c": self.c,
            "m_values": None if self.m_values is None else list(self.m_values),
            "policy": self.policy,
            "xi": self.xi,
            "support_cap": self.support_cap,
        }


@dataclass(frozen=True)
class SweepRow:
    """One evaluated (N, M) point."""

    n: int
    m: int
    f_super: float
    f_det: float
    f_lower: float
    f_upper: float
    p_yes: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "f_super": self.f_super,
            "f_det": self.f_det,
            "f_lower": self.f_lower,
            "f_upper": self.f_upper,
            "p_yes": self.p_yes,
        }


def _policy_p_yes(spec: SweepSpec, n: int, m: int) -> float:
    s, cap = spec.spectrum, spec.support_cap
    if spec.policy == "identity":
        return 1.0
    if spec.policy == "windowed":
        flt = build_windowed_filter(
            s, n, m, default_window_growth(n), spec.xi, support_cap=cap
        )
    else:
        flt = build_super_filter(s, n, m, support_cap=cap)
    return success_probability(flt, s, n, support_cap=cap)


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Evaluate every (N, M) point of the sweep, in order."""
    s, cap = spec.spectrum, spec.support_cap
    rows = []
    for n, m in spec.pairs():
        super_flt = build_super_filter(s, n, m, support_cap=cap)
        f_super = exact_fidelity(s, n, m, super_flt, support_cap=cap).fidelity
        f_det = deterministic_fidelity(s, n, m, support_cap=cap).fidelity
        try:
            f_lower = fidelity_lower_bound(s, n, m)
        except ValidationError:
            f_lower = 0.0
        p_yes = _policy_p_yes(spec, n, m)
        f_upper = fidelity_upper_bound(
            s, n, m, p_yes, max_e_delta(s, n), support_cap=cap
        ).upper
        if not (f_lower <= f_super + 1e-9 and f_super <= f_upper + 1e-9):
            raise ValidationError(
                f"bound sandwich violated at N={n}, M={m}: "
                f"{f_lower} <= {f_super} <= {f_upper} fails"
            )
        rows.append(
            SweepRow(
                n=n,
                m=m,
                f_super=f_super,
                f_det=f_det,
                f_lower=f_lower,
                f_upper=f_upper,
                p_yes=p_yes,
            )
        )
    return rows


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2}


COLUMNS = ("neg_log_pyes", "neg_log_infidelity")
TRANSFORMS = ("vs_n", "vs_log_n")


def fit_exponent(
    rows: list[SweepRow], column: str = "neg_log_pyes", transform: str = "vs_n"
) -> FitResult:
    """Least-squares decay-rate extraction from sweep rows.

    ``column`` picks the decaying quantity: the success probability
    (``neg_log_pyes``) or the infidelity ``1 - F_super``
    (``neg_log_infidelity``).  ``transform`` picks the chart:

    * ``vs_n``: regress ``ln(quantity)`` on ``N`` -- the slope of an
      exponential decay (e.g. ``-0.7`` for ``exp(-0.7 N)``).
    * ``vs_log_n``: regress ``ln(-ln(quantity))`` on ``ln N`` -- the
      stretching exponent of ``exp(-c N^beta)``.

    Raises:
        ValidationError: with fewer than 4 rows, on unknown column or
            transform names, or when a log is taken of a non-positive value
            (the offending row's N is reported).
    """
    if column not in COLUMNS:
        raise ValidationError(f"unknown column {column!r}, expected one of {COLUMNS}")
    if transform not in TRANSFORMS:
        raise ValidationError(
            f"unknown transform {transform!r}, expected one of {TRANSFORMS}"
        )
    if len(rows) < 4:
        raise ValidationError(f"need at least 4 rows to fit, got {len(rows)}")

    xs, ys = [], []
    for row in rows:
        quantity = row.p_yes if column == "neg_log_pyes" else 1.0 - row.f_super
        if quantity <= 0.0:
            raise ValidationError(
                f"cannot take log of non-positive {column} value at N={row.n}",
                n=row.n,
            )
        neg_log = -math.log(quantity)
        if transform == "vs_n":
            xs.append(float(row.n))
            ys.append(-neg_log)
        else:
            if neg_log <= 0.0:
                raise ValidationError(
                    f"cannot take log of non-positive decay exponent at N={row.n}",
                    n=row.n,
                )
            xs.append(math.log(row.n))
            ys.append(math.log(neg_log))

    x = np.array(xs)
    y = np.array(ys)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = y - y.mean()
    ss_tot = float(np.dot(total, total))
    ss_res = float(np.dot(resid, resid))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(slope=float(slope), intercept=float(intercept), r2=r2)


def rows_to_csv(rows: list[SweepRow]) -> str:
    """Fixed-header CSV with 12 significant digits per float."""
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.n},{r.m},{r.f_super:.12g},{r.f_det:.12g},"
            f"{r.f_lower:.12g},{r.f_upper:.12g},{r.p_yes:.12g}"
        )
    return "\n".join(lines) + "\n"


def sweep_to_json(spec: SweepSpec, rows: list[SweepRow]) -> dict:
    """JSON dataset with the sweep specification echoed for provenance."""
    return {"spec": spec.to_dict(), "rows": [r.to_dict() for r in rows]}
