"""Backward-in-time solvers for every coefficient ODE system of the game:
finite chain (three boundary conditions), periodic ring, truncated infinite
chain, mixed finite and infinite systems, and the directed tree.

All solvers use classical fixed-step RK4 on the reversed time axis and store
dense samples on the caller's grid.  Terminal values are assigned, never
integrated, so terminal read-back is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .params import BlowUpError, BoundaryCondition, GameParams, TimeGrid, ValidationError

# ---------------------------------------------------------------------------
# solution container
# ---------------------------------------------------------------------------


@dataclass
class RiccatiSolution:
    """Coefficient functions sampled on a uniform grid.

    ``phi`` maps a coefficient index to its samples: an ``(i, j)`` pair for
    finite systems (1-based, i <= j <= N), an integer offset otherwise.
    ``psi`` holds the affine offsets when present: per-player entries for the
    general boundary condition, ``"theta"`` for the mixed finite system,
    ``"psi"`` for the mixed infinite one.
    """

    grid: TimeGrid
    kind: str
    phi: dict
    psi: dict | None = None
    meta: dict = field(default_factory=dict)

    def columns(self) -> list:
        names = []
        for key in self.phi:
            if isinstance(key, tuple):
                names.append(f"phi_{key[0]}_{key[1]}")
            else:
                names.append(f"phi_{key}")
        if self.psi:
            for key in self.psi:
                names.append(f"psi_{key}" if isinstance(key, int) else str(key))
        return names

    def _series(self) -> list:
        out = list(self.phi.values())
        if self.psi:
            out.extend(self.psi.values())
        return out

    def value(self, key, t: float) -> float:
        """Linear interpolation between grid nodes."""
        arr = self.phi[key] if key in self.phi else self.psi[key]
        return float(np.interp(t, self.grid.nodes, arr))

    def to_csv(self, path) -> None:
        cols = self.columns()
        series = self._series()
        with open(path, "w") as fh:
            fh.write(",".join(["t"] + cols) + "\n")
            for m, t in enumerate(self.grid.nodes):
                row = [f"{t:.17g}"] + [f"{s[m]:.17g}" for s in series]
                fh.write(",".join(row) + "\n")

    def to_json(self, path) -> None:
        doc = {
            "kind": self.kind,
            "grid": {"step": self.grid.step, "t_end": self.grid.t_end, "n_nodes": len(self.grid.nodes)},
            "meta": self.meta,
            "columns": self.columns(),
            "data": {name: s.tolist() for name, s in zip(self.columns(), self._series())},
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)


def _check_grid(params: GameParams, grid: TimeGrid) -> None:
    if abs(grid.t_end - params.horizon) > 1e-9 * max(1.0, params.horizon):
        raise ValidationError(
            f"grid ends at {grid.t_end} but the horizon is {params.horizon}"
        )


def _raise_blowup(kind: str, grid: TimeGrid, fail: int) -> None:
    if fail >= 0:
        t = grid.nodes[fail]
        raise BlowUpError(f"{kind} solution became nonfinite at t={t:.6g}", time=float(t))


# ---------------------------------------------------------------------------
# infinite chain / tree / mixed infinite (offset cascades)
# ---------------------------------------------------------------------------


def solve_infinite_chain(params: GameParams, depth: int, grid: TimeGrid) -> RiccatiSolution:
    """Offsets phi_0..phi_depth of the infinite nearest-neighbor game.

    phi_0 solves the scalar quadratic ODE; each higher offset solves a linear
    ODE in the previous ones, so truncation at ``depth`` leaves the computed
    offsets exact.
    """
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    _check_grid(params, grid)
    y_T = np.zeros(depth + 1)
    y_T[0] = params.c
    if depth >= 1:
        y_T[1] = -params.c
    out, fail = _kernels.chain_cascade_rk4(y_T, params.epsilon, params.epsilon, grid.step, grid.n_steps)
    _raise_blowup("infinite chain", grid, fail)
    phi = {k: out[:, k] for k in range(depth + 1)}
    from .catalan import stationary_coeffs

    tail = stationary_coeffs("chain", depth).tail_mass()
    return RiccatiSolution(grid, "infinite", phi, meta={"depth": depth, "stationary_tail_mass": tail})


def solve_tree(params: GameParams, depth: int, grid: TimeGrid) -> RiccatiSolution:
    """Generation offsets for the d-ary directed tree.

    Identical to the chain cascade except the first offset carries eps/d in
    its source term and terminal value -c/d.
    """
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    d = params.branching
    _check_grid(params, grid)
    y_T = np.zeros(depth + 1)
    y_T[0] = params.c
    if depth >= 1:
        y_T[1] = -params.c / d
    out, fail = _kernels.chain_cascade_rk4(y_T, params.epsilon, params.epsilon / d, grid.step, grid.n_steps)
    _raise_blowup("tree", grid, fail)
    phi = {k: out[:, k] for k in range(depth + 1)}
    from .catalan import stationary_coeffs

    tail = stationary_coeffs("tree", depth, branching=d).tail_mass()
    return RiccatiSolution(
        grid, "tree", phi, meta={"depth": depth, "branching": d, "stationary_tail_mass": tail}
    )


def solve_mixed_infinite(params: GameParams, depth: int, grid: TimeGrid) -> RiccatiSolution:
    """psi and phi_0..phi_depth of the infinite chain/mean-field mixture.

    The mean-field coefficient psi solves psi' = (1-u) psi^2 - eps on its
    own; the offsets follow the u-weighted cascade.  u = 0 integrates the
    formal limit of the cascade (phi_k for k >= 2 stay 0).
    """
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    _check_grid(params, grid)
    u = params.u
    y_T = np.zeros(depth + 2)
    y_T[0] = params.c  # psi
    y_T[1] = params.c
    if depth >= 1:
        y_T[2] = -params.c
    out, fail = _kernels.mixed_cascade_rk4(y_T, u, params.epsilon, grid.step, grid.n_steps)
    _raise_blowup("mixed infinite", grid, fail)
    phi = {k: out[:, k + 1] for k in range(depth + 1)}
    from .catalan import stationary_coeffs

    tail = stationary_coeffs("mixed", depth, u=u).tail_mass()
    return RiccatiSolution(
        grid,
        "mixed-infinite",
        phi,
        psi={"psi": out[:, 0]},
        meta={"depth": depth, "u": u, "stationary_tail_mass": tail},
    )


# ---------------------------------------------------------------------------
# periodic ring
# ---------------------------------------------------------------------------


def solve_periodic_chain(params: GameParams, n_players: int, grid: TimeGrid) -> RiccatiSolution:
    """The N circulant coefficients of the ring game.

    Exploits the circulant reduction: N scalar ODEs coupled through a cyclic
    self-convolution, rather than the dense N x N matrix form.
    """
    if n_players < 2:
        raise ValidationError("the ring needs at least 2 players")
    _check_grid(params, grid)
    y_T = np.zeros(n_players)
    y_T[0] = params.c
    y_T[1] = -params.c
    out, fail = _kernels.ring_rk4(y_T, params.epsilon, grid.step, grid.n_steps)
    _raise_blowup("ring", grid, fail)
    phi = {k: out[:, k] for k in range(n_players)}
    return RiccatiSolution(grid, "ring", phi, meta={"n_players": n_players})


# ---------------------------------------------------------------------------
# finite chain
# ---------------------------------------------------------------------------


def solve_finite_chain(
    params: GameParams,
    bc: BoundaryCondition,
    n_players: int,
    grid: TimeGrid,
) -> RiccatiSolution:
    """Pair coefficients phi^{i,j} (i <= j <= N) of the N-player chain.

    The pair block follows the upper-triangular matrix quadratic ODE
    Phi' = Phi^2 - E; the boundary condition only reshapes the last column
    and the (N, N) entry.  The general condition adds the affine offsets
    psi^i, which vanish identically for the two special conditions.
    """
    if n_players < 2:
        raise ValidationError("the chain needs at least 2 players")
    _check_grid(params, grid)
    N = n_players
    eps, c = params.epsilon, params.c
    a1 = bc.a1 if bc.kind == "general" else eps
    c1 = bc.c1 if bc.kind == "general" else c
    m = bc.m if bc.kind == "general" else 0.0

    E = eps * (np.eye(N) - np.diag(np.ones(N - 1), 1))
    E[N - 1, N - 1] = a1
    no_control = bc.kind == "no-control"

    def rhs(Phi, psi):
        D = Phi @ Phi
        if no_control:
            # player N is uncontrolled: its state feeds no drift back
            D[:, N - 1] -= Phi[:, N - 1] * Phi[N - 1, N - 1]
        D -= E
        if no_control:
            D[N - 1, N - 1] = -eps
        dpsi = Phi @ psi
        dpsi[N - 1] += a1 * m
        return D, dpsi

    Phi = c * (np.eye(N) - np.diag(np.ones(N - 1), 1))
    Phi[N - 1, N - 1] = c1
    psi = np.zeros(N)
    psi[N - 1] = -c1 * m

    n = grid.n_steps
    h = grid.step
    phis = np.empty((n + 1, N, N))
    psis = np.empty((n + 1, N))
    phis[n], psis[n] = Phi, psi
    for idx in range(n, 0, -1):
        kP1, kp1 = rhs(Phi, psi)
        kP2, kp2 = rhs(Phi - 0.5 * h * kP1, psi - 0.5 * h * kp1)
        kP3, kp3 = rhs(Phi - 0.5 * h * kP2, psi - 0.5 * h * kp2)
        kP4, kp4 = rhs(Phi - h * kP3, psi - h * kp3)
        Phi = Phi - (h / 6.0) * (kP1 + 2 * kP2 + 2 * kP3 + kP4)
        psi = psi - (h / 6.0) * (kp1 + 2 * kp2 + 2 * kp3 + kp4)
        phis[idx - 1], psis[idx - 1] = Phi, psi
        if not (np.all(np.isfinite(Phi)) and np.all(np.isfinite(psi))):
            _raise_blowup("finite chain", grid, idx - 1)

    phi = {(i + 1, j + 1): phis[:, i, j] for i in range(N) for j in range(i, N)}
    psi_map = {i + 1: psis[:, i] for i in range(N)} if bc.kind == "general" else None
    return RiccatiSolution(
        grid, "finite-chain", phi, psi=psi_map, meta={"n_players": N, "bc": bc.kind}
    )


# ---------------------------------------------------------------------------
# mixed finite system
# ---------------------------------------------------------------------------


def solve_mixed_finite(params: GameParams, n_players: int, grid: TimeGrid) -> RiccatiSolution:
    """Pair coefficients and theta of the N-player chain/mean-field mixture.

    theta's equation is taken from the last player's block; the per-row
    consistency sums the ansatz would require are not identical for finite N,
    so that equation is the defining one.  At u = 1 the system reduces
    exactly to the finite chain attracted to zero; at u = 0 only theta
    matters and it solves theta' = theta^2 - eps (1 - 1/N).
    """
    if n_players < 2:
        raise ValidationError("the mixed system needs at least 2 players")
    _check_grid(params, grid)
    N = n_players
    eps, c, u = params.epsilon, params.c, params.u
    lower = np.tril(np.ones((N, N)), -1) > 0

    def rhs(Phi, th):
        pNN = Phi[N - 1, N - 1]
        colsum = Phi.sum(axis=0)
        rowsum = Phi.sum(axis=1)
        D = u * (Phi @ Phi) + 2 * (1 - u) * th * Phi
        D += (1 - u) * (th / N) * (pNN - colsum[None, :] - rowsum[:, None])
        idx = np.arange(N)
        D[idx, idx] += -(1 - u) * th * pNN - eps
        D[idx[:-1], idx[:-1] + 1] += eps
        D[lower] = 0.0
        dth = u * th * pNN + (1 - u) * th * th - eps * (1 - 1.0 / N)
        return D, dth

    Phi = c * (np.eye(N) - np.diag(np.ones(N - 1), 1))
    th = c * (1 - 1.0 / N)
    n, h = grid.n_steps, grid.step
    phis = np.empty((n + 1, N, N))
    ths = np.empty(n + 1)
    phis[n], ths[n] = Phi, th
    for idx in range(n, 0, -1):
        kP1, kt1 = rhs(Phi, th)
        kP2, kt2 = rhs(Phi - 0.5 * h * kP1, th - 0.5 * h * kt1)
        kP3, kt3 = rhs(Phi - 0.5 * h * kP2, th - 0.5 * h * kt2)
        kP4, kt4 = rhs(Phi - h * kP3, th - h * kt3)
        Phi = Phi - (h / 6.0) * (kP1 + 2 * kP2 + 2 * kP3 + kP4)
        th = th - (h / 6.0) * (kt1 + 2 * kt2 + 2 * kt3 + kt4)
        phis[idx - 1], ths[idx - 1] = Phi, th
        if not (np.all(np.isfinite(Phi)) and np.isfinite(th)):
            _raise_blowup("mixed finite", grid, idx - 1)

    phi = {(i + 1, j + 1): phis[:, i, j] for i in range(N) for j in range(i, N)}
    return RiccatiSolution(
        grid,
        "mixed-finite",
        phi,
        psi={"theta": ths},
        meta={"n_players": N, "u": u},
    )
