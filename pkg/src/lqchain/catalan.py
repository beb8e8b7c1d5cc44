"""Closed-form layer: stationary coefficients, generating function, the rho
polynomials and half-integer modified Bessel functions of the second kind.

Everything here is exact-rational internally (Python integers / ``Fraction``)
and converted to float only at the boundary, so no factorial overflows and
correctly rounded doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .params import GameParams, ValidationError

# ---------------------------------------------------------------------------
# stationary coefficients
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def chain_coefficients_exact(depth: int) -> tuple:
    """Stationary nearest-neighbor coefficients as exact rationals.

    phi_0 = 1, phi_1 = -1/2 and phi_j = -Catalan(j-1) / 2^(2j-1) for j >= 2,
    built by the multiplicative Catalan recurrence (no raw factorials).
    """
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    vals = [Fraction(1)]
    cat = 1  # Catalan(0)
    for j in range(1, depth + 1):
        vals.append(Fraction(-cat, 2 ** (2 * j - 1)))
        cat = cat * 2 * (2 * j - 1) // (j + 1)  # Catalan(j)
    return tuple(vals)


def catalan_jump_probabilities(depth: int) -> np.ndarray:
    """p_k = -phi_k for k = 1..depth; sums to 1 as depth grows."""
    exact = chain_coefficients_exact(depth)
    return np.array([float(-v) for v in exact[1:]])


@dataclass(frozen=True)
class StationaryCoeffs:
    """Stationary coefficient vector for one interaction topology.

    ``values[k]`` is phi_k for offsets 0..depth; ``psi`` is the mean-field
    attraction coefficient (mixed topology only, infinite at u = 1).
    """

    kind: str  # chain | mixed | tree
    values: np.ndarray
    psi: float | None = None
    u: float | None = None
    branching: int | None = None

    @property
    def depth(self) -> int:
        return len(self.values) - 1

    def tail_mass(self) -> float:
        """Jump mass beyond the truncation depth, sum_{k>depth} |phi_k|-ish.

        For the chain this is 1 - sum p_k (exact); mixed and tree weight the
        chain tail by u^(k-1) and d^-k so the chain value is an upper bound.
        """
        exact = chain_coefficients_exact(self.depth)
        head = -sum(exact[1:])
        chain_tail = float(1 - head)
        if self.kind == "chain":
            return chain_tail
        if self.kind == "tree":
            return chain_tail / float(self.branching) ** self.depth
        return chain_tail * (self.u ** max(self.depth - 1, 0) if self.u else 0.0)


def stationary_coeffs(kind: str, depth: int, u: float = 1.0, branching: int = 1) -> StationaryCoeffs:
    """Stationary solution of the long-horizon coefficient recurrence.

    Parameters
    ----------
    kind : {'chain', 'mixed', 'tree'}
    depth : int
        Largest offset returned.
    u : float
        Mixing weight, mixed topology only.
    branching : int
        Descendant count, tree topology only.
    """
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    exact = chain_coefficients_exact(depth)
    if kind == "chain":
        return StationaryCoeffs(kind, np.array([float(v) for v in exact]))
    if kind == "tree":
        if branching < 1:
            raise ValidationError("branching must be >= 1")
        d = branching
        vals = np.array([float(v / Fraction(d) ** k) for k, v in enumerate(exact)])
        return StationaryCoeffs(kind, vals, branching=d)
    if kind == "mixed":
        if not 0.0 <= u <= 1.0:
            raise ValidationError(f"u must lie in [0, 1], got {u}")
        psi = math.inf if u == 1.0 else 1.0 / math.sqrt(1.0 - u)
        phi0 = 0.5 if u == 0.0 else (1.0 - math.sqrt(1.0 - u)) / u
        vals = [phi0]
        for k in range(1, depth + 1):
            vals.append(float(exact[k]) * u ** (k - 1))
        return StationaryCoeffs(kind, np.array(vals), psi=psi, u=u)
    raise ValidationError(f"unknown topology {kind!r}")


# ---------------------------------------------------------------------------
# generating function of the time-dependent coefficients
# ---------------------------------------------------------------------------


def generating_function(z: float, t: float, params: GameParams) -> float:
    """Value of sum_k z^k phi_k(t) in closed form.

    Exactly 0 at z = 1; tends to sqrt(eps*(1-z)) as the remaining horizon
    grows.  Requires 0 <= z <= 1 and 0 <= t <= T.
    """
    if not 0.0 <= z <= 1.0:
        raise ValidationError(f"z must lie in [0, 1], got {z}")
    if not 0.0 <= t <= params.horizon * (1 + 1e-12):
        raise ValidationError(f"t={t} outside [0, T]")
    if z == 1.0:
        return 0.0
    eps, c = params.epsilon, params.c
    w = math.sqrt(eps * (1.0 - z))
    x = 2.0 * w * (params.horizon - t)
    if x < 350.0:
        e = math.exp(x)
        num = (-eps * (1 - z) - c * w * (1 - z)) * e + eps * (1 - z) - c * w * (1 - z)
        den = (-w - c * (1 - z)) * e - w + c * (1 - z)
    else:
        # divide through by e^x to avoid overflow on long horizons
        r = math.exp(-x)
        num = (-eps * (1 - z) - c * w * (1 - z)) + (eps * (1 - z) - c * w * (1 - z)) * r
        den = (-w - c * (1 - z)) + (-w + c * (1 - z)) * r
    return num / den


def phi0_closed_form(t: float, params: GameParams) -> float:
    """Closed form of the leading coefficient phi_0(t) (z = 0 read-off)."""
    return generating_function(0.0, t, params)


# ---------------------------------------------------------------------------
# rho polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RhoPolynomial:
    """Finite expansion rho_k(x) = sum_j coeffs[j] * (-x)^(-j/2), j = k..2k-1.

    These multiply e^{-sqrt(-x)} in the k-th derivative of exp(-sqrt(-x));
    they satisfy rho_{k+1} = rho_k' + rho_k / (2 sqrt(-x)) with rho_0 = 1.
    """

    order: int
    coeffs: tuple  # Fractions indexed by j - order

    def __call__(self, x: float) -> float:
        if x >= 0:
            raise ValidationError(f"rho is defined for x < 0, got {x}")
        if self.order == 0:
            return 1.0
        s = math.sqrt(-x)
        return sum(float(c) * s ** -(self.order + i) for i, c in enumerate(self.coeffs))


@lru_cache(maxsize=None)
def rho_polynomial(k: int) -> RhoPolynomial:
    """Exact coefficients of rho_k via the closed-form sum.

    coeff(j) = (j-1)! / ((2j-2k)!! (2k-j-1)! 2^k), for j = k..2k-1.
    """
    if k < 0:
        raise ValidationError("order must be >= 0")
    if k == 0:
        return RhoPolynomial(0, ())
    coeffs = []
    for j in range(k, 2 * k):
        num = math.factorial(j - 1)
        den = _double_factorial(2 * j - 2 * k) * math.factorial(2 * k - j - 1) * 2 ** k
        coeffs.append(Fraction(num, den))
    return RhoPolynomial(k, tuple(coeffs))


def rho(k: int, x: float) -> float:
    """Evaluate rho_k at a negative argument."""
    return rho_polynomial(k)(x)


def _double_factorial(n: int) -> int:
    if n <= 0:
        return 1
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


# ---------------------------------------------------------------------------
# half-integer modified Bessel K
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def bessel_half_coefficients(k: int) -> tuple:
    """Integer coefficients A_a with K_{k-1/2}(x) =
    sqrt(pi/(2x)) e^{-x} sum_a A_a (2x)^{-a}; k = 0 maps to K_{1/2}."""
    kk = max(k, 1)
    return tuple(
        math.factorial(kk - 1 + a) // (math.factorial(a) * math.factorial(kk - 1 - a))
        for a in range(kk)
    )


def bessel_k_half(k: int, x: float) -> float:
    """K_{k-1/2}(x) for integer k >= 0 and x > 0 by the exact finite sum.

    K_{-1/2} = K_{1/2} covers k = 0.
    """
    if k < 0:
        raise ValidationError("order index must be >= 0")
    if not x > 0:
        raise ValidationError(f"argument must be > 0, got {x}")
    acc = 0.0
    for a, A in enumerate(bessel_half_coefficients(k)):
        acc += A / (2.0 * x) ** a
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) * acc
