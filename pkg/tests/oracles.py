"""Independent exact-arithmetic oracles used to freeze expected values.

Everything here works with big integers and :class:`~fractions.Fraction`
probabilities and deliberately avoids the library's log-space code paths,
so agreement between the two is a real cross-check.
"""

from __future__ import annotations

import math
from fractions import Fraction


def compositions(n: int, k: int):
    """All ways to write ``n`` as an ordered sum of ``k`` non-negative ints."""
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in compositions(n - first, k - 1):
            yield (first,) + rest


def frac_multinomial(probs: list[Fraction], counts) -> Fraction:
    """Exact multinomial weight ``N! * prod p^c / c!``."""
    n = sum(counts)
    coeff = math.factorial(n)
    for c in counts:
        coeff //= math.factorial(c)
    weight = Fraction(coeff)
    for p, c in zip(probs, counts):
        weight *= p**c
    return weight


def frac_distribution(int_energies, probs: list[Fraction], n: int) -> dict[int, Fraction]:
    """Exact N-copy total-energy law by brute-force partition enumeration."""
    out: dict[int, Fraction] = {}
    for counts in compositions(n, len(int_energies)):
        energy = sum(c * e for c, e in zip(counts, int_energies))
        out[energy] = out.get(energy, Fraction(0)) + frac_multinomial(probs, counts)
    return out


def largest_remainder(total: int, probs: list[Fraction]) -> tuple[int, ...]:
    """Exact-arithmetic largest-remainder rounding, ties to lower energy."""
    targets = [total * p for p in probs]
    floors = [int(t) if t >= 0 else -int(-t) for t in targets]
    floors = [math.floor(t) for t in targets]
    residual = total - sum(floors)
    order = sorted(range(len(probs)), key=lambda i: (-(targets[i] - floors[i]), i))
    for i in range(residual):
        floors[order[i % len(floors)]] += 1
    return tuple(floors)


def anchor_delta(int_energies, probs: list[Fraction], n: int, m: int) -> int:
    n0 = largest_remainder(n, probs)
    m0 = largest_remainder(m, probs)
    return sum(c * e for c, e in zip(m0, int_energies)) - sum(
        c * e for c, e in zip(n0, int_energies)
    )


def frac_super_fidelity(int_energies, probs: list[Fraction], n: int, m: int) -> Fraction:
    """Exact amplitude-matching fidelity: shifted M-copy mass over the N-copy support."""
    delta = anchor_delta(int_energies, probs, n, m)
    dist_n = frac_distribution(int_energies, probs, n)
    dist_m = frac_distribution(int_energies, probs, m)
    return sum(
        (dist_m.get(e + delta, Fraction(0)) for e in dist_n), start=Fraction(0)
    )


def frac_gamma_sq(int_energies, probs: list[Fraction], n: int, m: int) -> Fraction:
    """Exact squared normalization of the amplitude-matching filter."""
    delta = anchor_delta(int_energies, probs, n, m)
    dist_n = frac_distribution(int_energies, probs, n)
    dist_m = frac_distribution(int_energies, probs, m)
    return min(dist_n[e] / dist_m[e + delta] for e in dist_n)


def frac_super_pyes(int_energies, probs: list[Fraction], n: int, m: int) -> Fraction:
    return frac_gamma_sq(int_energies, probs, n, m) * frac_super_fidelity(
        int_energies, probs, n, m
    )


def qubit_binom(n: int, k: int) -> Fraction:
    """Exact ``C(n, k) / 2^n`` for the equal-weight two-level clock."""
    return Fraction(math.comb(n, k), 2**n)
