"""Euler-Maruyama simulation of the truncated equilibrium particle systems
and empirical moment estimation.

Noise discipline: every (player, path) pair owns a counter-based RNG stream
keyed by (seed, player index, path index), so results are bit-identical no
matter how paths are partitioned into blocks or workers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._backend import backend_name
from .analytics import MomentReport
from .catalan import StationaryCoeffs
from .params import BlowUpError, ValidationError
from .riccati import RiccatiSolution

_MAGIC = b"LQCB"
_VERSION = 1
_BLOCK_BYTES = 2.0e8  # noise-buffer budget per path block


@dataclass
class SimConfig:
    """Truncated particle-system simulation setup.

    ``coeffs`` is either a StationaryCoeffs (time-constant drift) or a
    RiccatiSolution of an offset kind (time-varying drift sampled from its
    grid).  ``depth`` is the drift support J; players with index above
    ``n_players - depth`` evolve with clipped drift and are excluded from
    the trusted range.
    """

    coeffs: object
    n_players: int = 64
    depth: int = 40
    step: float = 0.01
    t_end: float = 10.0
    n_paths: int = 1000
    seed: int = 0
    sigma: float = 1.0
    sample_every: int | None = None
    init_std: float = 0.0

    def __post_init__(self):
        if self.step <= 0 or self.t_end <= 0:
            raise ValidationError("step and t_end must be > 0")
        if self.n_paths < 1:
            raise ValidationError("n_paths must be >= 1")
        if self.depth < 1:
            raise ValidationError("depth must be >= 1")
        if self.depth >= self.n_players:
            raise ValidationError("depth must be < n_players")
        n = self.t_end / self.step
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValidationError("step must divide t_end evenly")
        if isinstance(self.coeffs, StationaryCoeffs):
            if self.coeffs.depth < self.depth:
                raise ValidationError("coefficient source shallower than drift support")
        elif isinstance(self.coeffs, RiccatiSolution):
            if self.coeffs.kind not in ("infinite", "mixed-infinite", "tree"):
                raise ValidationError("time-varying drift needs an offset-indexed solution")
            if self.coeffs.grid.t_end < self.t_end - 1e-9:
                raise ValidationError("coefficient grid does not cover [0, t_end]")
            if self.coeffs.meta.get("depth", 0) < self.depth:
                raise ValidationError("coefficient source shallower than drift support")
        else:
            raise ValidationError("coeffs must be StationaryCoeffs or RiccatiSolution")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.step))

    @property
    def kind(self) -> str:
        if isinstance(self.coeffs, StationaryCoeffs):
            return self.coeffs.kind
        return {"infinite": "chain", "mixed-infinite": "mixed", "tree": "tree"}[self.coeffs.kind]

    def echo(self) -> dict:
        return {
            "kind": self.kind,
            "n_players": self.n_players,
            "depth": self.depth,
            "step": self.step,
            "t_end": self.t_end,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "sigma": self.sigma,
            "init_std": self.init_std,
            "source": "stationary" if isinstance(self.coeffs, StationaryCoeffs) else "time-varying",
        }


@dataclass
class TrajectoryBundle:
    """Sampled paths: ``data[path, player, sample]`` with players 0-based
    internally; public accessors take 1-based labels."""

    data: np.ndarray
    times: np.ndarray
    seed: int
    config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.data.shape[0]

    @property
    def n_players(self) -> int:
        return self.data.shape[1]

    def time_index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, float(self.times[-1])):
            raise ValidationError(f"t={t} was not sampled")
        return i

    def player_series(self, player: int, t: float) -> np.ndarray:
        """Cross-path samples of 1-based ``player`` at sampled time ``t``."""
        if not 1 <= player <= self.n_players:
            raise ValidationError(f"player {player} out of range")
        return self.data[:, player - 1, self.time_index(t)]

    # binary layout: magic, u32 version, u64 n_paths/n_players/n_samples,
    # i64 seed, u64 config-json length, config json, times float64, data float64
    def save(self, path) -> None:
        blob = json.dumps({"config": self.config, "meta": self.meta}, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IQQQqQ", _VERSION, *self.data.shape, self.seed, len(blob)))
            fh.write(blob)
            fh.write(np.ascontiguousarray(self.times, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.data, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "TrajectoryBundle":
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                raise ValidationError("not a trajectory bundle")
            version, np_, npl, ns, seed, blen = struct.unpack("<IQQQqQ", fh.read(44))
            if version != _VERSION:
                raise ValidationError(f"unsupported bundle version {version}")
            blob = json.loads(fh.read(blen).decode())
            times = np.frombuffer(fh.read(8 * ns), dtype="<f8")
            data = np.frombuffer(fh.read(8 * np_ * npl * ns), dtype="<f8").reshape(np_, npl, ns)
        return cls(data=data.copy(), times=times.copy(), seed=seed,
                   config=blob["config"], meta=blob["meta"])


# ---------------------------------------------------------------------------
# drift assembly
# ---------------------------------------------------------------------------


def _drift_tables(config: SimConfig) -> tuple:
    """Per-step drift weights (n_steps, J+1), mean-field pull (n_steps,),
    and the per-player noise scale."""
    J = config.depth
    n_steps = config.n_steps
    src = config.coeffs
    if isinstance(src, StationaryCoeffs):
        phi = src.values[: J + 1]
        if src.kind == "chain":
            w, kappa = phi, 0.0
        elif src.kind == "tree":
            d = float(src.branching)
            w, kappa = phi * d ** np.arange(J + 1), 0.0
        else:  # mixed
            u = src.u
            kappa = 0.0 if u == 1.0 else (1.0 - u) * src.psi
            w = u * phi
        weights = np.broadcast_to(w, (n_steps, J + 1)).copy()
        kappa_t = np.full(n_steps, float(kappa))
    else:
        ts = np.arange(n_steps) * config.step
        weights = np.empty((n_steps, J + 1))
        for j in range(J + 1):
            weights[:, j] = np.interp(ts, src.grid.nodes, src.phi[j])
        if src.kind == "tree":
            weights *= float(src.meta["branching"]) ** np.arange(J + 1)
            kappa_t = np.zeros(n_steps)
        elif src.kind == "mixed-infinite":
            u = src.meta["u"]
            psi_t = np.interp(ts, src.grid.nodes, src.psi["psi"])
            kappa_t = (1.0 - u) * psi_t
            weights *= u
        else:
            kappa_t = np.zeros(n_steps)

    scale = np.full(config.n_players, config.sigma * np.sqrt(config.step))
    if config.kind == "tree":
        if isinstance(src, StationaryCoeffs):
            d = float(src.branching)
        else:
            d = float(src.meta["branching"])
        scale *= d ** (-0.5 * np.arange(config.n_players))
    return weights, kappa_t, scale


def _path_noise(seed: int, path: int, n_players: int, n_steps: int, out: np.ndarray) -> None:
    # stream per (seed, player, path): Philox counter words pin the pair
    for i in range(n_players):
        bg = np.random.Philox(key=seed, counter=[0, i, path, 0])
        out[:, i] = np.random.Generator(bg).standard_normal(n_steps)


def _path_init(seed: int, path: int, n_players: int, std: float) -> np.ndarray:
    if std == 0.0:
        return np.zeros(n_players)
    vals = np.empty(n_players)
    for i in range(n_players):
        bg = np.random.Philox(key=seed, counter=[0, i, path, 1])
        vals[i] = std * np.random.Generator(bg).standard_normal()
    return vals


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def simulate(config: SimConfig) -> TrajectoryBundle:
    """Run the Euler-Maruyama scheme and return sampled trajectories.

    Drift of player i is minus the weighted sum of players i..i+J (weights
    from the coefficient source), plus the mean-field pull in the mixed
    case; indices past the truncation use zero.  The first sample is the
    initial condition.
    """
    M, J = config.n_players, config.depth
    n_steps = config.n_steps
    stride = config.sample_every or max(1, n_steps // 100)
    sample_steps = sorted(set(range(0, n_steps + 1, stride)) | {n_steps})
    times = np.array([s * config.step for s in sample_steps])
    weights, kappa_t, scale = _drift_tables(config)

    data = np.empty((config.n_paths, M, len(sample_steps)))
    block = max(1, int(_BLOCK_BYTES / (n_steps * M * 8)))
    for start in range(0, config.n_paths, block):
        stop = min(start + block, config.n_paths)
        nb = stop - start
        X = np.empty((nb, M))
        for p in range(nb):
            X[p] = _path_init(config.seed, start + p, M, config.init_std)
        noise = np.empty((nb, n_steps, M))
        for p in range(nb):
            _path_noise(config.seed, start + p, M, n_steps, noise[p])
        cursor = 0
        for si, s_target in enumerate(sample_steps):
            if s_target > cursor:
                _kernels.em_advance(
                    X, weights[cursor:s_target], kappa_t[cursor:s_target],
                    noise[:, cursor:s_target, :], config.step, scale,
                )
                cursor = s_target
            data[start:stop, :, si] = X
        if not np.all(np.isfinite(X)):
            raise BlowUpError("simulation produced nonfinite states", time=config.t_end)

    tail = config.coeffs.tail_mass() if isinstance(config.coeffs, StationaryCoeffs) \
        else config.coeffs.meta.get("stationary_tail_mass", 0.0)
    meta = {
        "trusted_players": [1, M - J],
        "tail_mass": float(tail),
        "tail_warning": bool(tail > 0.05),
        "backend": backend_name(),
    }
    return TrajectoryBundle(data=data, times=times, seed=config.seed, config=config.echo(), meta=meta)


# ---------------------------------------------------------------------------
# empirical moments
# ---------------------------------------------------------------------------


def estimate_moments(bundle: TrajectoryBundle, pairs) -> MomentReport:
    """Unbiased sample covariances across paths.

    ``pairs`` is an iterable of (player_a, player_b, time_a, time_b) with
    1-based players and sampled times; player_a == player_b with equal times
    yields the variance.  Standard errors come from the cross-path spread of
    the centered products.
    """
    entries = []
    n = bundle.n_paths
    for (pa, pb, ta, tb) in pairs:
        x = bundle.player_series(pa, ta)
        y = bundle.player_series(pb, tb)
        xc = x - x.mean()
        yc = y - y.mean()
        prod = xc * yc
        cov = prod.sum() / (n - 1) if n > 1 else 0.0
        se = float(prod.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
        entries.append(
            {
                "player_a": int(pa), "player_b": int(pb),
                "time_a": float(ta), "time_b": float(tb),
                "value": float(cov), "std_error": se, "n_paths": n,
            }
        )
    trusted = bundle.meta.get("trusted_players")
    return MomentReport(
        params=dict(bundle.config),
        empirical=entries,
        metadata={"trusted_players": trusted, "seed": bundle.seed},
    )
