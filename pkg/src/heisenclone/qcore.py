"""Dense complex Hilbert-space computations for clock-state metrology.

Small systems only (dimension capped at 64): states are vectors, operators
are dense matrices, and every matrix function goes through a Hermitian
eigendecomposition.  The module covers:

* time evolution of clock states and their quantum Fisher information (QFI);
* the post-selected analogues: the non-Hermitian generator of the filtered
  state family, its QFI, and the pointwise/average Cramer-Rao bounds;
* the prior-averaged QFI bound machinery (uniform prior over one period,
  Gaussian twirl for non-periodic evolution);
* the decomposition of a general quantum instrument into a pure filter
  followed by a trace-preserving channel.

Everything is a pure function of immutable values; the quadrature loops are
internally sequential so results are reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .spectra import Spectrum

#: Largest Hilbert-space dimension accepted by the dense routines.
MAX_DIM = 64

#: Relative cutoff below which singular/eigen-values count as kernel.
SUPPORT_CUTOFF = 1e-12


def _as_complex_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class QuantumSystem:
    """A Hamiltonian together with the initial state of one clock.

    Attributes:
        dim: Hilbert-space dimension (at most :data:`MAX_DIM`).
        hamiltonian: Hermitian ``dim x dim`` complex matrix.
        psi: unit-norm complex state vector.
    """

    dim: int
    hamiltonian: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        h = self.hamiltonian
        if self.dim < 1 or self.dim > MAX_DIM:
            raise ValidationError(f"dimension must be in [1, {MAX_DIM}], got {self.dim}")
        if h.shape != (self.dim, self.dim):
            raise ValidationError(f"hamiltonian shape {h.shape} != ({self.dim}, {self.dim})")
        if np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
            raise ValidationError("hamiltonian must be Hermitian (1e-12 entrywise)")
        if self.psi.shape != (self.dim,):
            raise ValidationError(f"state shape {self.psi.shape} != ({self.dim},)")
        if abs(np.linalg.norm(self.psi) - 1.0) > 1e-12:
            raise ValidationError("state vector must have unit norm (1e-12)")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "hamiltonian": [
                [[float(z.real), float(z.imag)] for z in row]
                for row in self.hamiltonian
            ],
            "psi": [[float(z.real), float(z.imag)] for z in self.psi],
        }


def quantum_system(hamiltonian, psi, *, normalize: bool = True) -> QuantumSystem:
    """Build a :class:`QuantumSystem`, optionally normalizing the state."""
    h = _as_complex_matrix(hamiltonian, "hamiltonian")
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if normalize:
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            raise ValidationError("state vector is zero")
        v = v / nrm
    return QuantumSystem(dim=h.shape[0], hamiltonian=h, psi=v)


def _parse_complex_entry(entry, name: str) -> complex:
    if isinstance(entry, (int, float)):
        return complex(entry)
    if isinstance(entry, (list, tuple)) and len(entry) == 2:
        return complex(float(entry[0]), float(entry[1]))
    raise ValidationError(f"{name} entries must be numbers or [re, im] pairs")


def system_from_dict(data) -> QuantumSystem:
    """Parse the JSON schema ``{"dim": d, "hamiltonian": ..., "psi": ...}``.

    Matrix entries are ``[re, im]`` pairs (plain numbers are accepted and
    read as real).
    """
    if not isinstance(data, dict):
        raise ValidationError("system JSON must be an object")
    try:
        dim = int(data["dim"])
        h_rows = data["hamiltonian"]
        psi_raw = data["psi"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed system JSON: {exc}") from exc
    if not isinstance(h_rows, list) or len(h_rows) != dim:
        raise ValidationError("hamiltonian must be a list of dim rows")
    h = np.zeros((dim, dim), dtype=complex)
    for i, row in enumerate(h_rows):
        if not isinstance(row, list) or len(row) != dim:
            raise ValidationError("hamiltonian rows must have dim entries")
        for j, entry in enumerate(row):
            h[i, j] = _parse_complex_entry(entry, "hamiltonian")
    if not isinstance(psi_raw, list) or len(psi_raw) != dim:
        raise ValidationError("psi must be a list of dim entries")
    psi = np.array([_parse_complex_entry(e, "psi") for e in psi_raw])
    return QuantumSystem(dim=dim, hamiltonian=h, psi=psi)


def system_from_spectrum(s: Spectrum) -> QuantumSystem:
    """Diagonal system realizing a spectrum: ``H = diag(E)``, amplitudes ``sqrt(p)``."""
    energies = s.energies
    return QuantumSystem(
        dim=s.k,
        hamiltonian=np.diag(energies).astype(complex),
        psi=np.sqrt(s.probs).astype(complex),
    )


@dataclass(frozen=True, eq=False)
class FilterOperator:
    """The "yes" branch operator of a two-outcome instrument (a contraction)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"filter operator must be square, got {m.shape}")
        top = np.linalg.eigvalsh(m.conj().T @ m).max()
        if top > 1.0 + 1e-10:
            raise ValidationError(
                f"filter operator must satisfy M^dag M <= I (largest eigenvalue {top!r})"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def filter_operator(matrix) -> FilterOperator:
    return FilterOperator(_as_complex_matrix(matrix, "filter operator"))


def _eig(sys: QuantumSystem):
    return np.linalg.eigh(sys.hamiltonian)


def clock_state(sys: QuantumSystem, t: float) -> np.ndarray:
    """State after evolving for time ``t``: ``exp(-i t H) psi``."""
    evals, vecs = _eig(sys)
    return vecs @ (np.exp(-1j * t * evals) * (vecs.conj().T @ sys.psi))


def qfi(sys: QuantumSystem, t: float) -> float:
    """Quantum Fisher information ``4 Var(H)`` of the clock state at time ``t``.

    Time-independent for clock states; ``t`` is accepted so callers can
    assert exactly that.
    """
    phi = clock_state(sys, t)
    h_phi = sys.hamiltonian @ phi
    mean = float(np.real(np.vdot(phi, h_phi)))
    second = float(np.real(np.vdot(h_phi, h_phi)))
    return 4.0 * (second - mean * mean)


def _pinv(m: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(m, rcond=SUPPORT_CUTOFF)


def prob_generator(sys: QuantumSystem, flt: FilterOperator, t: float) -> np.ndarray:
    """Generator of the filtered state family at time ``t``.

    The filtered states ``phi_t = M psi_t / ||M psi_t||`` obey
    ``i d phi_t / dt = K_t phi_t`` with the (generally non-Hermitian)
    operator::

        K_t = M H M^+  +  <psi_t | [H, M^dag M] | psi_t> / (2 ||M psi_t||^2)

    where ``M^+`` is the pseudo-inverse of ``M`` on its support.  The
    identity holds whenever the evolving state stays inside that support.

    Raises:
        ValidationError: if the filter annihilates the state at time ``t``.
    """
    m = flt.matrix
    psi_t = clock_state(sys, t)
    m_psi = m @ psi_t
    norm_sq = float(np.real(np.vdot(m_psi, m_psi)))
    if norm_sq <= 1e-24:
        raise ValidationError("state annihilated by filter")
    h = sys.hamiltonian
    mm = m.conj().T @ m
    commutator_term = np.vdot(psi_t, (h @ mm - mm @ h) @ psi_t) / (2.0 * norm_sq)
    return m @ h @ _pinv(m) + commutator_term * np.eye(sys.dim)


def prob_qfi(sys: QuantumSystem, flt: FilterOperator, t: float) -> float:
    """QFI of the post-selected state family at time ``t``.

    ``4 ( <phi|K^dag K|phi> - <phi|K|phi>^2 )`` with the generator of
    :func:`prob_generator`.  Values below 1e-15 are reported as exactly 0.
    """
    k = prob_generator(sys, flt, t)
    psi_t = clock_state(sys, t)
    m_psi = flt.matrix @ psi_t
    phi = m_psi / np.linalg.norm(m_psi)
    k_phi = k @ phi
    first = float(np.real(np.vdot(k_phi, k_phi)))
    mean = float(np.real(np.vdot(phi, k_phi)))
    q = 4.0 * (first - mean * mean)
    return q if q >= 1e-15 else 0.0


def prob_crb(sys: QuantumSystem, flt: FilterOperator, t: float) -> float:
    """Pointwise Cramer-Rao variance bound ``1 / prob_qfi``.

    Raises:
        NumericError: when the post-selected QFI vanishes ("unbounded
            variance": the bound carries no information).
    """
    q = prob_qfi(sys, flt, t)
    if q == 0.0:
        raise NumericError("unbounded variance: post-selected QFI is zero")
    return 1.0 / q


def pointwise_filter(sys: QuantumSystem, t0: float, epsilon: float) -> FilterOperator:
    """Filter that boosts the pointwise QFI at one anchor time by ``1/epsilon^2``.

    ``M = epsilon |psi_t0><psi_t0| + |perp><perp|`` where ``|perp>`` is the
    normalized component of ``H psi_t0`` orthogonal to ``psi_t0``.  The
    filter leaves ``psi_t0`` unchanged but amplifies its time derivative, so
    the QFI of the filtered family at ``t0`` is exactly ``qfi / epsilon^2``
    -- a spike at a single point, not a uniform improvement.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValidationError(f"epsilon must be in (0, 1], got {epsilon!r}")
    psi_t = clock_state(sys, t0)
    h_psi = sys.hamiltonian @ psi_t
    h_psi = h_psi - np.vdot(psi_t, h_psi) * psi_t
    nrm = np.linalg.norm(h_psi)
    if nrm < 1e-12:
        raise ValidationError("state is stationary: no direction to amplify")
    perp = h_psi / nrm
    m = epsilon * np.outer(psi_t, psi_t.conj()) + np.outer(perp, perp.conj())
    return FilterOperator(m)


def noon_filter(sys: QuantumSystem) -> FilterOperator:
    """Diagonal filter steering the state onto the extreme-energy superposition.

    Maps ``psi`` to ``(|E_max> + |E_min>)/sqrt(2)`` (extremes taken over
    populated levels), the state of largest energy variance.  Used to
    saturate the averaged post-selected precision bound.
    """
    evals, vecs = _eig(sys)
    amps = vecs.conj().T @ sys.psi
    populated = np.flatnonzero(np.abs(amps) ** 2 > 1e-14)
    if len(populated) < 2 or evals[populated[-1]] - evals[populated[0]] < 1e-12:
        raise ValidationError("need two populated levels with distinct energies")
    lo, hi = populated[0], populated[-1]
    diag = np.zeros(sys.dim, dtype=complex)
    diag[lo] = 1.0 / (math.sqrt(2.0) * amps[lo])
    diag[hi] = 1.0 / (math.sqrt(2.0) * amps[hi])
    diag /= np.max(np.abs(diag))
    return FilterOperator(vecs @ np.diag(diag) @ vecs.conj().T)


def avg_qfi_uniform(
    sys: QuantumSystem,
    flt: FilterOperator,
    period: float,
    quadrature_points: int = 128,
    *,
    rel_tol: float = 1e-8,
    max_points: int = 2**20,
) -> float:
    """Post-selection-averaged QFI over one period of the evolution.

    Averages ``prob_qfi`` against the conditional density
    ``p(t | yes) ~ ||M psi_t||^2`` with a uniform prior on ``[0, period)``.
    The integrands are trigonometric polynomials, so the periodic trapezoid
    rule converges spectrally; the point count is doubled until the value
    moves by less than ``rel_tol`` (relative).

    Raises:
        ValidationError: if the spectrum is incommensurate with ``period``
            or fewer than 64 quadrature points are requested.
        NumericError: if no convergence by ``max_points`` points.
    """
    if quadrature_points < 64:
        raise ValidationError("need at least 64 quadrature points")
    if period <= 0.0:
        raise ValidationError("period must be positive")
    evals, vecs = _eig(sys)
    gaps = (evals - evals[0]) * period / (2.0 * math.pi)
    dev = np.abs(gaps - np.round(gaps))
    if np.any(dev > 1e-8 * np.maximum(1.0, np.abs(gaps))):
        raise ValidationError("spectrum is not commensurate with the given period")

    # Work in the energy eigenbasis and hoist all t-independent pieces.
    psi_e = vecs.conj().T @ sys.psi
    m_e = vecs.conj().T @ flt.matrix @ vecs
    mm_e = m_e.conj().T @ m_e
    gap_matrix = evals[:, None] - evals[None, :]
    h_comm = gap_matrix * mm_e  # [H, M^dag M] in the eigenbasis
    b = m_e @ np.diag(evals) @ _pinv(m_e)  # M H M^+ in the eigenbasis

    def average(points: int) -> float:
        ts = np.linspace(0.0, period, points, endpoint=False)
        num = 0.0
        den = 0.0
        for t in ts:
            pt = np.exp(-1j * t * evals) * psi_e
            m_pt = m_e @ pt
            w = float(np.real(np.vdot(m_pt, m_pt)))
            if w <= 1e-14:
                continue
            c = np.vdot(pt, h_comm @ pt) / (2.0 * w)
            phi = m_pt / math.sqrt(w)
            v = b @ phi + c * phi
            first = float(np.real(np.vdot(v, v)))
            mean = float(np.real(np.vdot(phi, v)))
            q = max(0.0, 4.0 * (first - mean * mean))
            num += w * q
            den += w
        if den == 0.0:
            raise NumericError("filter annihilates the state on the whole period")
        return num / den

    points = int(quadrature_points)
    value = average(points)
    while True:
        points *= 2
        if points > max_points:
            raise NumericError(
                f"quadrature did not converge within {max_points} points"
            )
        refined = average(points)
        if abs(refined - value) <= rel_tol * max(1.0, abs(refined)):
            return refined
        value = refined


def hl_variance_bound(s: Spectrum, n: int) -> float:
    """Variance floor for estimating time from ``n`` copies, filters allowed.

    ``1 / (n^2 (E_max - E_min)^2)`` in the spectrum's physical energy units:
    post-selection cannot beat the extreme-energy superposition of the
    N-copy spectrum, whose width grows linearly in ``n``.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    return 1.0 / (n * n * s.span * s.span)


def avg_crb(samples) -> tuple[float, bool]:
    """Averaged Cramer-Rao bound from ``(weight, variance, qfi)`` samples.

    Returns ``(1 / sum(w Q), holds)`` where ``holds`` reports whether the
    weighted variance satisfies the bound.  Follows from the pointwise bound
    and the Cauchy-Schwarz inequality, so any pointwise-valid samples must
    satisfy it.
    """
    samples = list(samples)
    if not samples:
        raise ValidationError("need at least one sample")
    w = np.array([x[0] for x in samples], dtype=float)
    v = np.array([x[1] for x in samples], dtype=float)
    q = np.array([x[2] for x in samples], dtype=float)
    if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValidationError("weights must be non-negative and sum to 1")
    if np.any(v <= 0.0) or np.any(q <= 0.0):
        raise ValidationError("variances and QFI values must be positive")
    lower = 1.0 / float(np.dot(w, q))
    holds = float(np.dot(w, v)) >= lower * (1.0 - 1e-12)
    return lower, holds


def _cluster_eigenvalues(evals: np.ndarray, tol: float) -> np.ndarray:
    # Replace each eigenvalue by its cluster representative so that
    # numerically degenerate levels are treated as exactly equal.
    reps = np.empty_like(evals)
    start = 0
    for i in range(1, len(evals) + 1):
        if i == len(evals) or evals[i] - evals[i - 1] > tol:
            reps[start:i] = evals[start:i].mean()
            start = i
    return reps


def gaussian_twirl(P, sys: QuantumSystem, sigma: float) -> np.ndarray:
    """Average ``P`` over the evolution orbit with a Gaussian prior of width ``sigma``.

    In the energy eigenbasis each off-diagonal element is damped by exactly
    ``exp(-sigma^2 (E - E')^2 / 2)``; diagonal blocks of numerically
    degenerate levels (gap below 1e-10) are left untouched.  As ``sigma``
    grows the result approaches ``diag(P)``, which is what makes the
    uniform-prior precision bound carry over to non-periodic evolutions.
    """
    p = _as_complex_matrix(P, "twirl input")
    if p.shape != (sys.dim, sys.dim):
        raise ValidationError(f"operator shape {p.shape} does not match dim {sys.dim}")
    scale = max(1.0, float(np.max(np.abs(p))))
    if np.max(np.abs(p - p.conj().T)) > 1e-10 * scale:
        raise ValidationError("twirl input must be Hermitian")
    if np.linalg.eigvalsh(p).min() < -1e-10 * scale:
        raise ValidationError("twirl input must be positive semidefinite (1e-10)")
    if sigma < 0.0:
        raise ValidationError(f"sigma must be non-negative, got {sigma!r}")
    evals, vecs = _eig(sys)
    reps = _cluster_eigenvalues(evals, 1e-10)
    gap = reps[:, None] - reps[None, :]
    damping = np.exp(-0.5 * (sigma * gap) ** 2)
    p_eig = vecs.conj().T @ p @ vecs
    return vecs @ (damping * p_eig) @ vecs.conj().T


@dataclass(frozen=True, eq=False)
class InstrumentDecomposition:
    """A CP trace-non-increasing map split as channel-after-measurement.

    ``m_op`` is the pure measurement operator (the square root of the map's
    normalization) and ``channel_kraus`` a trace-preserving Kraus set; the
    original map is recovered as ``rho -> channel(m_op rho m_op^dag)``.
    """

    m_op: np.ndarray
    channel_kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        total = sum(k.conj().T @ k for k in self.channel_kraus)
        if np.max(np.abs(total - np.eye(self.m_op.shape[0]))) > 1e-10:
            raise ValidationError("channel part is not trace-preserving (1e-10)")


def decompose_instrument(kraus_list) -> InstrumentDecomposition:
    """Split a CP trace-non-increasing map into filter + channel.

    Given Kraus operators ``K_i`` with ``sum K_i^dag K_i <= I``, returns
    ``m_op = sqrt(sum K_i^dag K_i)`` and the channel with Kraus operators
    ``K_i m_op^+`` (pseudo-inverse on the support), completed on the kernel
    of ``m_op``: states the measurement can never produce are passed through
    a kernel projector so the channel stays trace-preserving.

    Raises:
        ValidationError: if the Kraus set is empty, shapes disagree, or the
            normalization exceeds the identity beyond 1e-10.
    """
    ks = [_as_complex_matrix(k, "kraus operator") for k in kraus_list]
    if not ks:
        raise ValidationError("need at least one Kraus operator")
    d_out, d_in = ks[0].shape
    if any(k.shape != (d_out, d_in) for k in ks):
        raise ValidationError("all Kraus operators must share one shape")

    total = sum(k.conj().T @ k for k in ks)
    total = (total + total.conj().T) / 2.0
    evals, u = np.linalg.eigh(total)
    if evals.max() > 1.0 + 1e-10:
        raise ValidationError(
            f"invalid instrument: normalization eigenvalue {evals.max()!r} exceeds 1"
        )
    evals = np.clip(evals, 0.0, None)
    roots = np.sqrt(evals)
    m_op = u @ np.diag(roots) @ u.conj().T
    support = evals > SUPPORT_CUTOFF
    inv_roots = np.where(support, 1.0 / np.where(support, roots, 1.0), 0.0)
    m_inv = u @ np.diag(inv_roots) @ u.conj().T

    channel = [k @ m_inv for k in ks]
    kernel = u[:, ~support]
    if kernel.shape[1]:
        if d_out == d_in:
            channel.append(kernel @ kernel.conj().T)
        else:
            # Different output dimension: route each kernel direction to a
            # fixed output state; any isometric completion preserves both
            # the trace and the reconstruction of the original map.
            basis0 = np.zeros(d_out, dtype=complex)
            basis0[0] = 1.0
            for j in range(kernel.shape[1]):
                channel.append(np.outer(basis0, kernel[:, j].conj()))
    return InstrumentDecomposition(m_op=m_op, channel_kraus=tuple(channel))


def kraus_to_choi(kraus_list) -> np.ndarray:
    """Choi matrix of a Kraus set, in the (input x output) tensor convention."""
    ks = [_as_complex_matrix(k, "kraus operator") for k in kraus_list]
    d_out, d_in = ks[0].shape
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in ks:
        w = k.T.reshape(-1)
        choi += np.outer(w, w.conj())
    return choi
