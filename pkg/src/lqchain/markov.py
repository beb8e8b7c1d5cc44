"""Upper-triangular Toeplitz jump-chain layer: generators built from the
stationary coefficients, the closed-form transition kernel, and a jump-chain
sampler for Monte-Carlo cross-checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .catalan import chain_coefficients_exact, rho_polynomial
from .params import ValidationError

# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """Banded Toeplitz generator: diagonal -1, upper band q_1..q_{size-1}.

    The chain generator is conservative (off-diagonal mass 1); the mixed one
    kills with mass sqrt(1-u); the tree generator coincides with the chain.
    """

    kind: str  # chain | mixed | tree
    size: int
    offdiag: np.ndarray
    u: float = 1.0
    branching: int = 1

    diagonal: float = -1.0

    @property
    def kill_mass(self) -> float:
        """Per-unit-rate defect of the truncated generator row."""
        return 1.0 - float(self.offdiag.sum())

    def dense(self) -> np.ndarray:
        Q = np.zeros((self.size, self.size))
        np.fill_diagonal(Q, self.diagonal)
        for k in range(1, self.size):
            idx = np.arange(self.size - k)
            Q[idx, idx + k] = self.offdiag[k - 1]
        return Q


def build_generator(kind: str, size: int, u: float = 1.0, branching: int = 1) -> GeneratorSpec:
    """Jump rates q_k = -phi_k (chain, tree in averaged form) or -u phi_k
    (mixed) from the stationary coefficients."""
    if size < 2:
        raise ValidationError("generator size must be >= 2")
    exact = chain_coefficients_exact(size - 1)
    if kind in ("chain", "tree"):
        q = np.array([float(-v) for v in exact[1:]])
        return GeneratorSpec(kind, size, q, branching=branching)
    if kind == "mixed":
        if not 0.0 <= u <= 1.0:
            raise ValidationError(f"u must lie in [0, 1], got {u}")
        q = np.array([float(-v) * u ** k for k, v in enumerate(exact[1:], start=1)])
        return GeneratorSpec(kind, size, q, u=u)
    raise ValidationError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# closed-form transition kernel
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _band_poly(m: int) -> tuple:
    # p_m(t) = e^{-t} * sum_deg coeff[deg] t^deg, exact rationals from rho_m / m!
    if m == 0:
        return (Fraction(1),)
    fact = math.factorial(m)
    rp = rho_polynomial(m)
    # t^{2m} rho_m(-t^2) = sum_j c_j t^{2m - j}, j = m..2m-1  -> degrees m..1
    coeffs = [Fraction(0)] * (m + 1)
    for i, cj in enumerate(rp.coeffs):
        deg = 2 * m - (m + i)
        coeffs[deg] += cj / fact
    return tuple(coeffs)


def band_entry(m: int, t: float, u: float = 1.0) -> float:
    """Kernel entry p_{i,i+m}(t) = u^m t^{2m}/m! rho_m(-t^2) e^{-t}."""
    if t < 0:
        raise ValidationError("time must be >= 0")
    if t == 0.0:
        return 1.0 if m == 0 else 0.0
    poly = _band_poly(m)
    acc = 0.0
    for deg in range(len(poly) - 1, -1, -1):  # Horner
        acc = acc * t + float(poly[deg])
    return (u ** m) * acc * math.exp(-t)


@dataclass(frozen=True)
class TransitionMatrix:
    """Upper-triangular Toeplitz transition kernel at one time.

    ``band[m]`` is p_{i,i+m}(t); strictly lower entries are zero.
    """

    t: float
    size: int
    band: np.ndarray

    def dense(self) -> np.ndarray:
        P = np.zeros((self.size, self.size))
        for m in range(self.size):
            idx = np.arange(self.size - m)
            P[idx, idx + m] = self.band[m]
        return P

    def row_sum(self, i: int = 1) -> float:
        """Mass retained inside the band for 1-based row ``i``."""
        return float(self.band[: self.size - (i - 1)].sum())

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("row,col,value\n")
            for i in range(1, self.size + 1):
                for j in range(i, self.size + 1):
                    fh.write(f"{i},{j},{self.band[j - i]:.17g}\n")


def transition_matrix(gen: GeneratorSpec, t: float) -> TransitionMatrix:
    """Evaluate the closed-form kernel of ``gen`` at time t >= 0."""
    if t < 0:
        raise ValidationError("time must be >= 0")
    u = gen.u if gen.kind == "mixed" else 1.0
    band = np.array([band_entry(m, t, u) for m in range(gen.size)])
    return TransitionMatrix(t=float(t), size=gen.size, band=band)


# ---------------------------------------------------------------------------
# jump-chain sampler
# ---------------------------------------------------------------------------


@dataclass
class SampleResult:
    """Empirical end-state frequencies of the jump chain started at state 1."""

    t: float
    n_paths: int
    seed: int
    counts: dict          # end state (1-based) -> paths
    killed: int

    def frequency(self, state: int) -> float:
        return self.counts.get(state, 0) / self.n_paths

    @property
    def survival_frequency(self) -> float:
        return 1.0 - self.killed / self.n_paths

    def to_json(self, path) -> None:
        doc = {
            "t": self.t,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "killed": self.killed,
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)


def sample_chain(gen: GeneratorSpec, t: float, n_paths: int, seed: int) -> SampleResult:
    """Simulate the continuous-time jump chain of ``gen`` from state 1.

    Holding times are exponential(1); each event displaces by k with
    probability q_k and kills with the residual band mass, which reproduces
    the truncated generator's defect exactly.  Vectorized over paths in
    event rounds; deterministic given ``seed``.
    """
    if t < 0:
        raise ValidationError("time must be >= 0")
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    state = np.ones(n_paths, dtype=np.int64)
    remaining = np.full(n_paths, float(t))
    alive = np.ones(n_paths, dtype=bool)

    q = gen.offdiag
    kill = max(gen.kill_mass, 0.0)
    # event distribution: displacement k w.p. q_k, cemetery w.p. kill
    probs = np.concatenate([q, [kill]])
    probs = probs / probs.sum()
    jumps = np.arange(1, gen.size)

    active = np.flatnonzero(remaining > 0)
    while active.size:
        remaining[active] -= rng.exponential(1.0, size=active.size)
        fired = active[remaining[active] > 0]
        if fired.size:
            draw = rng.choice(gen.size, size=fired.size, p=probs, replace=True)
            killed_now = draw == gen.size - 1
            alive[fired[killed_now]] = False
            moved = fired[~killed_now]
            state[moved] += jumps[draw[~killed_now]]
        active = np.flatnonzero((remaining > 0) & alive)

    states, freq = np.unique(state[alive], return_counts=True)
    counts = {int(s): int(n) for s, n in zip(states, freq)}
    return SampleResult(t=float(t), n_paths=n_paths, seed=seed, counts=counts, killed=int((~alive).sum()))
