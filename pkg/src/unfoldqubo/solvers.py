"""Minimizers for the integer objective and its QUBO encoding.

``solve_bruteforce`` is the exact oracle for small models, ``solve_anneal`` is a
single-bit-flip Metropolis annealer on the QUBO, and ``solve_integer_cd``
works directly on the bounded integer problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numba
import numpy as np

from .core import CapacityError, SingularResponseError, UnfoldingError
from .qubo import BoundsVector, QuadraticObjective, QuboModel, decode

BRUTE_MAX_BITS = 24
_CHUNK_BITS = 16


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric inverse-temperature ramp.

    Leaving ``beta_start``/``beta_end`` as ``None`` derives them from the model
    (see :func:`default_betas`).
    """

    sweeps: int = 1000
    reads: int = 20
    beta_start: float | None = None
    beta_end: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1 or self.reads < 1:
            raise UnfoldingError("sweeps and reads must be >= 1")
        if (self.beta_start is None) != (self.beta_end is None):
            raise UnfoldingError("give both beta_start and beta_end or neither")
        if self.beta_start is not None and not 0 < self.beta_start < self.beta_end:
            raise UnfoldingError("need 0 < beta_start < beta_end")

    def betas(self, model: QuboModel) -> np.ndarray:
        if self.beta_start is None:
            b0, b1 = default_betas(model)
        else:
            b0, b1 = self.beta_start, self.beta_end
        if self.sweeps == 1:
            return np.array([b1])
        return np.geomspace(b0, b1, self.sweeps)


@dataclass
class SolveOutcome:
    best_z: np.ndarray
    energy: float
    evaluations: int
    best_x: np.ndarray | None = None
    read_energies: list[float] = field(default_factory=list)
    diagnostics: dict[str, Any] = field(default_factory=dict)


def _bits_of(indices: np.ndarray, nbits: int) -> np.ndarray:
    # x[0] is the most significant bit so enumeration order is lexicographic
    shifts = np.arange(nbits - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(float)


def solve_bruteforce(model: QuboModel) -> SolveOutcome:
    """Global minimum over all bitstrings; ties go to the lexicographically smallest."""
    n = model.nbits
    if n > BRUTE_MAX_BITS:
        raise CapacityError(f"brute force is capped at {BRUTE_MAX_BITS} bits, model has {n}")
    a, B = model.a_bin, model.B_bin
    total = 1 << n
    chunk = 1 << min(n, _CHUNK_BITS)
    best_e, best_idx = math.inf, 0
    for start in range(0, total, chunk):
        X = _bits_of(np.arange(start, min(start + chunk, total), dtype=np.int64), n)
        e = X @ a + np.einsum("ij,ij->i", X @ B, X)
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e, best_idx = float(e[k]), start + k
    x = _bits_of(np.array([best_idx], dtype=np.int64), n)[0].astype(np.int8)
    diag: dict[str, Any] = {}
    z = decode(model, x, diag)
    return SolveOutcome(z, model.energy(x), total, best_x=x, diagnostics=diag)


def default_betas(model: QuboModel) -> tuple[float, float]:
    """Hot end: the largest single-flip change is accepted half the time.
    Cold end: the smallest curvature step (least significant bit of the
    stiffest-resolved bin) is accepted 1% of the time.
    """
    lin = model.a_bin + np.diag(model.B_bin)
    J = model.B_bin - np.diag(np.diag(model.B_bin))
    max_delta = float(np.max(np.abs(lin) + 2.0 * np.abs(J).sum(axis=1)))
    diag = np.diag(model.B_bin)
    pos = diag[diag > 0]
    min_delta = float(pos.min()) if pos.size else 1.0
    max_delta = max(max_delta, min_delta * 10)
    return math.log(2.0) / max_delta, math.log(100.0) / min_delta


@numba.njit(cache=True)
def _anneal_read(lin, J, betas, x, uniforms):
    n = lin.size
    h = J @ x
    energy = lin @ x + x @ h
    best_e = energy
    best_x = x.copy()
    for s in range(betas.size):
        beta = betas[s]
        for k in range(n):
            sign = 1.0 - 2.0 * x[k]
            delta = sign * (lin[k] + 2.0 * h[k])
            if delta <= 0.0 or uniforms[s, k] < math.exp(-beta * delta):
                x[k] = 1.0 - x[k]
                energy += delta
                for j in range(n):
                    h[j] += sign * J[j, k]
                if energy < best_e:
                    best_e = energy
                    best_x[:] = x
    return best_x


def _read_rng(seed: int, read: int) -> np.random.Generator:
    # each read gets its own stream keyed by (seed, read index)
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, read]))


def solve_anneal(model: QuboModel, sched: AnnealSchedule = AnnealSchedule()) -> SolveOutcome:
    lin = model.a_bin + np.diag(model.B_bin)
    J = np.ascontiguousarray(model.B_bin - np.diag(np.diag(model.B_bin)))
    betas = sched.betas(model)
    n = model.nbits
    best_x, best_e = None, math.inf
    energies = []
    for r in range(sched.reads):
        rng = _read_rng(sched.seed, r)
        x0 = rng.integers(0, 2, n).astype(float)
        u = rng.random((sched.sweeps, n))
        x = _anneal_read(lin, J, betas, x0, u)
        e = model.energy(x)
        energies.append(e)
        if e < best_e:
            best_e, best_x = e, x
    x = best_x.astype(np.int8)
    diag: dict[str, Any] = {
        "sweeps": sched.sweeps,
        "reads": sched.reads,
        "beta_start": float(betas[0]),
        "beta_end": float(betas[-1]),
        "seed": sched.seed,
    }
    z = decode(model, x, diag)
    return SolveOutcome(z, model.energy(x), sched.reads * sched.sweeps * n, best_x=x,
                        read_energies=energies, diagnostics=diag)


def _pair_move(a, B, z, zmax) -> bool:
    """Apply the best improving +-1 move on a pair of bins, if any."""
    g = a + 2.0 * (B @ z)
    d = np.diag(B)
    best, move = -1e-12 * (1.0 + np.abs(g).sum()), None
    m = z.size
    for i in range(m):
        for j in range(i + 1, m):
            for s in (-1.0, 1.0):
                if not 0 <= z[i] + s <= zmax[i]:
                    continue
                for t in (-1.0, 1.0):
                    if not 0 <= z[j] + t <= zmax[j]:
                        continue
                    delta = g[i] * s + g[j] * t + d[i] + d[j] + 2.0 * B[i, j] * s * t
                    if delta < best:
                        best, move = delta, (i, j, s, t)
    if move is None:
        return False
    i, j, s, t = move
    z[i] += s
    z[j] += t
    return True


def solve_integer_cd(
    obj: QuadraticObjective,
    bounds: BoundsVector,
    seed: int = 0,
    start=None,
    eff=None,
    max_sweeps: int = 200,
) -> SolveOutcome:
    """Exact one-coordinate integer updates, then +-1 pair moves when those stall.

    Single-coordinate updates alone get stuck on ridges where neighbouring
    bins are strongly coupled (large lambda); a pass over all pairs
    ``(z_i + s, z_j + t)`` with ``s, t`` in ``{-1, +1}`` escapes most of them.
    The search stops when neither move type improves the objective.

    ``start`` defaults to the rounded matrix-inversion solution, or to the
    efficiency-corrected data when the response cannot be inverted. ``seed``
    is recorded only; the method is deterministic.
    """
    zmax = bounds.z_max.astype(float)
    m = obj.nbins
    if start is None:
        try:
            cond = np.linalg.cond(obj.R)
            if not np.isfinite(cond) or cond > 1e12:
                raise SingularResponseError("singular")
            start = np.linalg.solve(obj.R, obj.data)
        except (SingularResponseError, np.linalg.LinAlgError):
            e = np.asarray(eff if eff is not None else obj.R.sum(axis=0), dtype=float)
            start = obj.data / np.where(e > 0, e, 1.0)
    z = np.clip(np.round(np.asarray(start, dtype=float)), 0, zmax)

    a, B = obj.a, obj.B
    skipped = set()
    history = [obj.value(z)]
    sweeps = pair_moves = 0
    changed = True
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for i in range(m):
            bii = B[i, i]
            if bii <= 0:
                skipped.add(i)
                continue
            rest = B[i] @ z - bii * z[i]
            zstar = (-0.5 * a[i] - rest) / bii
            cur = z[i]
            best_v, best_c = None, cur
            for c in (math.floor(zstar), math.ceil(zstar)):
                c = min(max(c, 0.0), zmax[i])
                # 1-D objective in z_i up to a constant
                v = a[i] * c + bii * c * c + 2.0 * rest * c
                if best_v is None or v < best_v or (v == best_v and c == cur):
                    best_v, best_c = v, c
            v_cur = a[i] * cur + bii * cur * cur + 2.0 * rest * cur
            if best_v < v_cur:
                z[i] = best_c
                changed = True
        if not changed:
            changed = _pair_move(a, B, z, zmax)
            pair_moves += changed
        history.append(obj.value(z))
        if not changed:
            break
    diag: dict[str, Any] = {"sweeps": sweeps, "seed": seed, "energy_history": history, "pair_moves": pair_moves,
                            "converged": not changed}
    if skipped:
        diag["skipped_coordinates"] = sorted(skipped)
    zi = z.astype(np.int64)
    return SolveOutcome(zi, obj.value(zi), sweeps * m, diagnostics=diag)
