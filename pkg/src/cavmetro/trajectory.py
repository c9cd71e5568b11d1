"""Stochastic repeated-interaction model.

Atoms arrive as a Poisson process of rate ``r``.  Each arrival applies the
single-atom kick map instantaneously; between arrivals the cavity decays
under the zero-temperature damping channel, applied in closed form.  Only the
arrival times are random, so every trajectory carries a full density matrix.

Trajectory ``i`` draws its arrival gaps from
``Generator(Philox(SeedSequence(seed, spawn_key=(i,))))``, so results do not
depend on batching or execution order.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import comb

from .atom import kraus_operators
from .errors import TruncationTooSmall
from .fock import LEAKAGE_TOL, CavityState, FockTruncation, annihilation, vacuum
from .params import SystemParams

logger = logging.getLogger(__name__)

RNG_STREAM = "numpy.random.Philox via SeedSequence(entropy=seed, spawn_key=(trajectory_index,))"


def trajectory_truncation(params: SystemParams) -> FockTruncation:
    """Default truncation for trajectories; tighter than the steady-state rule
    because the leakage monitor catches any trajectory that outgrows it."""
    n0 = abs(params.alpha0) ** 2
    return FockTruncation(int(math.ceil(n0 + 6.0 * math.sqrt(n0 + 1.0) + 4.0)))


@dataclass(frozen=True)
class TrajectoryConfig:
    params: SystemParams
    t_final: float
    n_trajectories: int
    seed: int
    sample_times: tuple = ()
    trunc: Optional[FockTruncation] = None
    initial: Optional[CavityState] = field(default=None, repr=False)
    chunk_size: int = 1000

    def __post_init__(self):
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be positive")
        times = tuple(float(t) for t in self.sample_times)
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("sample_times must be ordered")
        if times and (times[0] < 0 or times[-1] > self.t_final):
            raise ValueError("sample_times must lie in [0, t_final]")
        if not times or times[-1] != self.t_final:
            times = times + (float(self.t_final),)
        object.__setattr__(self, "sample_times", times)
        if self.trunc is None:
            trunc = self.initial.trunc if self.initial is not None else trajectory_truncation(self.params)
            object.__setattr__(self, "trunc", trunc)
        elif self.initial is not None and self.initial.trunc.dim != self.trunc.dim:
            raise ValueError("initial state truncation differs from trunc")
        r_tau = self.params.r * self.params.tau
        if r_tau > 0.1:
            warnings.warn(
                f"r*tau = {r_tau:.3g}: atoms are likely to overlap in the cavity",
                RuntimeWarning,
                stacklevel=3,
            )


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def arrival_times(config: TrajectoryConfig, index: int) -> np.ndarray:
    r = config.params.r
    if r == 0:
        return np.empty(0)
    rng = trajectory_rng(config.seed, index)
    out = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / r)
        if t > config.t_final:
            return np.array(out)
        out.append(t)


class _Propagators:
    """Damping channel and kick for one truncation, applied to stacks of matrices."""

    def __init__(self, params: SystemParams, trunc: FockTruncation):
        d = trunc.dim
        self.d = d
        self.kappa = params.kappa
        idx = np.arange(d)
        self.coef = []
        for k in range(d):
            m = idx[: d - k]
            self.coef.append(np.sqrt(np.outer(comb(m + k, k), comb(m + k, k))))
        self.msum = (idx[:, None] + idx[None, :]) / 2.0
        self.kraus = np.array(kraus_operators(params.atom, params.g_tau, trunc))
        self.kraus_h = self.kraus.conj().transpose(0, 2, 1)
        self.kick_enabled = params.g_tau != 0
        a = annihilation(trunc).entries
        n = a.conj().T @ a
        self.ops = (a, n, n @ n)

    def decay(self, rho: np.ndarray, dt: np.ndarray) -> np.ndarray:
        """``exp(L t) rho`` for damping; element ``(m, n)`` collects
        ``sqrt(C(m+k,k) C(n+k,k)) (1-eta)^k rho[m+k, n+k]`` times ``eta^((m+n)/2)``."""
        eta = np.exp(-self.kappa * np.asarray(dt, dtype=float))
        loss = (1.0 - eta)[:, None, None]
        out = rho * self.coef[0]
        pw = np.ones_like(loss)
        d = self.d
        for k in range(1, d):
            pw = pw * loss
            if not np.any(pw):
                break
            out[:, : d - k, : d - k] += pw * self.coef[k] * rho[:, k:, k:]
        return out * eta[:, None, None] ** self.msum

    def kick(self, rho: np.ndarray) -> np.ndarray:
        if not self.kick_enabled:
            return rho
        out = np.zeros_like(rho)
        for k, kh in zip(self.kraus, self.kraus_h):
            out += k @ rho @ kh
        return out

    def observables(self, rho: np.ndarray) -> tuple:
        return tuple(np.einsum("bij,ji->b", rho, op) for op in self.ops)


def _run_batch(config: TrajectoryConfig, indices: Sequence[int], prop: _Propagators):
    b = len(indices)
    d = prop.d
    arrivals = [arrival_times(config, i) for i in indices]
    width = max([len(x) for x in arrivals] + [0]) + 1
    table = np.full((b, width), np.inf)
    for row, x in zip(table, arrivals):
        row[: len(x)] = x
    init = config.initial.matrix if config.initial is not None else vacuum(config.trunc).matrix
    rho = np.broadcast_to(init, (b, d, d)).copy()
    t_cur = np.zeros(b)
    ptr = np.zeros(b, dtype=int)
    rows = np.arange(b)
    n_samples = len(config.sample_times)
    obs = np.zeros((3, b, n_samples), dtype=complex)
    for s_idx, ts in enumerate(config.sample_times):
        while True:
            nxt = table[rows, ptr]
            sel = np.nonzero(nxt <= ts)[0]
            if sel.size == 0:
                break
            sub = prop.decay(rho[sel], nxt[sel] - t_cur[sel])
            rho[sel] = prop.kick(sub)
            t_cur[sel] = nxt[sel]
            ptr[sel] += 1
        rho = prop.decay(rho, ts - t_cur)
        t_cur[:] = ts
        top = rho[:, -1, -1].real.max()
        drift = np.abs(np.trace(rho, axis1=1, axis2=2).real - 1.0).max()
        if top > LEAKAGE_TOL or drift > 1e-9:
            raise TruncationTooSmall(
                f"trajectory left the truncation n_max={config.trunc.n_max} "
                f"(top population {top:.3e}, trace drift {drift:.3e})"
            )
        for j, vals in enumerate(prop.observables(rho)):
            obs[j, :, s_idx] = vals
    return obs, rho, arrivals


@dataclass(frozen=True, eq=False)
class TrajectorySeries:
    times: np.ndarray
    a: np.ndarray
    n: np.ndarray
    n2: np.ndarray
    arrivals: np.ndarray
    final_state: CavityState


def simulate_trajectory(config: TrajectoryConfig, trajectory_index: int) -> TrajectorySeries:
    prop = _Propagators(config.params, config.trunc)
    obs, rho, arrivals = _run_batch(config, [trajectory_index], prop)
    m = 0.5 * (rho[0] + rho[0].conj().T)
    return TrajectorySeries(
        times=np.array(config.sample_times),
        a=obs[0, 0],
        n=obs[1, 0].real,
        n2=obs[2, 0].real,
        arrivals=arrivals[0],
        final_state=CavityState(m / np.trace(m).real, config.trunc),
    )


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    times: np.ndarray
    mean_a: np.ndarray
    se_a_re: np.ndarray
    se_a_im: np.ndarray
    mean_n: np.ndarray
    se_n: np.ndarray
    mean_n2: np.ndarray
    se_n2: np.ndarray
    final_state: CavityState
    metadata: dict

    def rows(self) -> list[dict]:
        return [
            {
                "t": float(t),
                "n_mean": float(self.mean_n[i]),
                "n_stderr": float(self.se_n[i]),
                "re_a": float(self.mean_a[i].real),
                "re_a_stderr": float(self.se_a_re[i]),
                "im_a": float(self.mean_a[i].imag),
                "im_a_stderr": float(self.se_a_im[i]),
                "n2_mean": float(self.mean_n2[i]),
                "n2_stderr": float(self.se_n2[i]),
            }
            for i, t in enumerate(self.times)
        ]


def _stderr(x: np.ndarray) -> np.ndarray:
    return x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])


def ensemble_average(config: TrajectoryConfig) -> EnsembleResult:
    if config.n_trajectories < 2:
        raise ValueError("need at least 2 trajectories for standard errors")
    prop = _Propagators(config.params, config.trunc)
    per = []
    sums = []
    total = config.n_trajectories
    for start in range(0, total, config.chunk_size):
        idx = range(start, min(start + config.chunk_size, total))
        obs, rho, _ = _run_batch(config, idx, prop)
        per.append(obs)
        sums.append(rho.sum(axis=0))
        logger.debug("trajectories %d-%d done", idx[0], idx[-1])
    obs = np.concatenate(per, axis=1)
    a, n, n2 = obs[0], obs[1].real, obs[2].real
    mean_rho = np.sum(np.array(sums), axis=0) / total
    mean_rho = 0.5 * (mean_rho + mean_rho.conj().T)
    return EnsembleResult(
        times=np.array(config.sample_times),
        mean_a=a.mean(axis=0),
        se_a_re=_stderr(a.real),
        se_a_im=_stderr(a.imag),
        mean_n=n.mean(axis=0),
        se_n=_stderr(n),
        mean_n2=n2.mean(axis=0),
        se_n2=_stderr(n2),
        final_state=CavityState(mean_rho / np.trace(mean_rho).real, config.trunc),
        metadata={
            "seed": int(config.seed),
            "n_trajectories": int(total),
            "rng_stream": RNG_STREAM,
            "n_max": int(config.trunc.n_max),
            "chunk_size": int(config.chunk_size),
        },
    )
