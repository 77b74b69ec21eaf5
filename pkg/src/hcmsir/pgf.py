"""Joint hyperstub PGF: evaluation, derivatives, excess structure, moments.

Per-orbit marginals are split uniformly across the orbit's positions:
Poisson(r) over s positions becomes s independent Poisson(r/s) (exact
thinning), ExactCount(n) becomes a uniform multinomial with factor
((a_1 + ... + a_s)/s)^n, and ScaledPoisson keeps its integer multiplier as
the exponent of each position argument.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ExactCount, Marginal, NetworkModel, Poisson, ScaledPoisson
from .subgraphs import OrbitKey, PositionIndex, Subgraph

J_FLOOR = 1e-12


class DegeneratePositionError(RuntimeError):
    """A position's expected count underflowed the floor."""


def _orbit_factor(family: Marginal, th: np.ndarray):
    """Value, per-position gradient and within-orbit Hessian block of one
    orbit's marginal PGF factor."""
    s = len(th)
    if isinstance(family, Poisson):
        lp = family.rate / s
        f = float(np.exp(lp * np.sum(th - 1.0)))
        df = np.full(s, lp * f)
        d2 = np.full((s, s), lp * lp * f)
        return f, df, d2
    if isinstance(family, ScaledPoisson):
        lp = family.rate / s
        c = family.scale
        f = float(np.exp(lp * np.sum(th ** c - 1.0)))
        g = lp * c * th ** (c - 1)          # d(log f)/d(theta_i)
        df = g * f
        d2 = np.outer(g, g) * f
        if c > 1:
            d2[np.diag_indices(s)] += lp * c * (c - 1) * th ** (c - 2) * f
        return f, df, d2
    if isinstance(family, ExactCount):
        n = family.count
        u = float(np.sum(th)) / s
        if n == 0:
            return 1.0, np.zeros(s), np.zeros((s, s))
        f = u ** n
        df = np.full(s, (n / s) * u ** (n - 1))
        d2 = np.full((s, s), (n * (n - 1) / s ** 2) *
                     (u ** (n - 2) if n >= 2 else 0.0))
        return f, df, d2
    raise TypeError(f"unknown marginal family {family!r}")


@dataclass(frozen=True)
class HyperstubPGF:
    """Evaluator for the joint hyperstub PGF, its gradient and Hessian.

    Orbits are independent, so the PGF is the product of per-orbit factors.
    Immutable; evaluation is pure.
    """

    index: PositionIndex
    marginals: dict[OrbitKey, Marginal]

    def _groups(self):
        for key in self.index.orbit_keys():
            yield np.array(self.index.orbit_positions(key)), self.marginals[key]

    def _check(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.index.m,):
            raise ValueError(
                f"theta has shape {theta.shape}, expected ({self.index.m},)")
        if np.any(theta < -1e-9) or np.any(theta > 1 + 1e-9):
            raise ValueError("theta components must lie in [0, 1]")
        return np.clip(theta, 0.0, 1.0)

    def eval(self, theta: np.ndarray) -> float:
        theta = self._check(theta)
        out = 1.0
        for pos, fam in self._groups():
            out *= _orbit_factor(fam, theta[pos])[0]
        return out

    def _parts(self, theta: np.ndarray):
        theta = self._check(theta)
        return [(pos,) + _orbit_factor(fam, theta[pos])
                for pos, fam in self._groups()]

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        parts = self._parts(theta)
        vals = [p[1] for p in parts]
        grad = np.zeros(self.index.m)
        for k, (pos, _, df, _) in enumerate(parts):
            rest = np.prod([v for i, v in enumerate(vals) if i != k])
            grad[pos] = df * rest
        return grad

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        parts = self._parts(theta)
        vals = [p[1] for p in parts]
        m = self.index.m
        hess = np.zeros((m, m))
        for k, (pos, _, df_k, d2_k) in enumerate(parts):
            rest = np.prod([v for i, v in enumerate(vals) if i != k])
            hess[np.ix_(pos, pos)] = d2_k * rest
            for l in range(k + 1, len(parts)):
                pos_l, _, df_l, _ = parts[l]
                rest_kl = np.prod([v for i, v in enumerate(vals)
                                   if i not in (k, l)])
                block = np.outer(df_k, df_l) * rest_kl
                hess[np.ix_(pos, pos_l)] = block
                hess[np.ix_(pos_l, pos)] = block.T
        return hess

    def excess_matrix(self, theta: np.ndarray, strict: bool = False):
        """Delta[i, j] = theta_j * H[i, j] / J[i].

        Rows whose J entry underflows the floor are frozen to zero (strict
        mode raises instead); returns (delta, frozen_row_mask).
        """
        theta = self._check(theta)
        grad = self.gradient(theta)
        hess = self.hessian(theta)
        frozen = grad < J_FLOOR
        if strict and frozen.any():
            bad = int(np.flatnonzero(frozen)[0])
            raise DegeneratePositionError(
                f"position {bad}: expected count {grad[bad]:.3e} below floor")
        safe = np.where(frozen, 1.0, grad)
        delta = (hess / safe[:, None]) * theta[None, :]
        delta[frozen, :] = 0.0
        return delta, frozen


def build_pgf(model: NetworkModel) -> HyperstubPGF:
    return HyperstubPGF(model.index, dict(model.marginals))


@dataclass(frozen=True)
class MomentReport:
    mean_degree: float
    degree_variance: float
    triangles_per_node: float
    global_clustering: float


def moments(model: NetworkModel | None) -> MomentReport:
    """Classical degree moments, triangles per node and global clustering
    implied by a model's orbit marginals."""
    if model is None or not model.subgraphs:
        return MomentReport(0.0, 0.0, 0.0, 0.0)
    mean_k = var_k = tri = 0.0
    for s, part in zip(model.index.subgraphs, model.index.orbit_partitions):
        for k, orbit in enumerate(part.orbits):
            fam = model.marginal((s.id, k))
            a = s.degree(orbit[0])
            t = s.triangles_at(orbit[0])
            mean_k += a * fam.mean
            var_k += a * a * fam.var
            tri += t * fam.mean
    k2 = var_k + mean_k ** 2 - mean_k          # <k(k-1)>
    phi = 2.0 * tri / k2 if k2 > 0 else 0.0
    return MomentReport(mean_k, var_k, tri, phi)


def contribution_matrix(subgraphs: list[Subgraph]) -> np.ndarray:
    """Per-subgraph contributions of a unit membership rate to mean degree,
    degree variance and triangles per node (position-averaged)."""
    cols = []
    for s in subgraphs:
        d = np.mean([s.degree(v) for v in range(s.n)])
        t = np.mean([s.triangles_at(v) for v in range(s.n)])
        cols.append((d, d * d, t))
    return np.array(cols).T


class MixtureInfeasibleError(RuntimeError):
    def __init__(self, residual: float):
        super().__init__(
            f"no nonnegative rate vector reproduces the targets "
            f"(best residual {residual:.3e})")
        self.residual = residual


def solve_mixture(subgraphs: list[Subgraph],
                  targets: tuple[float, float, float],
                  fixed: dict[str, float] | None = None) -> np.ndarray:
    """Nonnegative rate vector hitting (mean degree, variance, triangles).

    When the 3-row contribution system is underdetermined, returns the
    minimum-Euclidean-norm nonnegative solution, found by exact support
    enumeration (the subgraph count is small). Rates in `fixed` are pinned.
    """
    if not subgraphs:
        raise ValueError("at least one subgraph is required")
    fixed = fixed or {}
    unknown = set(fixed) - {s.id for s in subgraphs}
    if unknown:
        raise ValueError(f"pinned rates for unknown subgraphs {sorted(unknown)}")
    C = contribution_matrix(subgraphs)
    t = np.asarray(targets, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("targets must be finite")

    free = [i for i, s in enumerate(subgraphs) if s.id not in fixed]
    out = np.zeros(len(subgraphs))
    for i, s in enumerate(subgraphs):
        if s.id in fixed:
            if fixed[s.id] < 0:
                raise ValueError("pinned rates must be nonnegative")
            out[i] = fixed[s.id]
    resid_target = t - C @ out

    scale = max(1.0, float(np.linalg.norm(resid_target)))
    best: np.ndarray | None = None
    best_norm = np.inf
    for mask in range(1 << len(free)):
        support = [free[i] for i in range(len(free)) if mask >> i & 1]
        cand_s = (np.linalg.pinv(C[:, support]) @ resid_target
                  if support else np.zeros(0))
        cand = np.zeros(len(subgraphs))
        cand[support] = cand_s
        if np.any(cand_s < -1e-12):
            continue
        if np.linalg.norm(C[:, free] @ cand[free] - resid_target) > 1e-9 * scale:
            continue
        norm = float(np.linalg.norm(cand_s))
        if norm < best_norm - 1e-12:
            best_norm = norm
            best = np.clip(cand, 0.0, None)
    if best is None:
        from scipy.optimize import nnls
        _, resid = nnls(C[:, free], resid_target) if free else (None, float(
            np.linalg.norm(resid_target)))
        raise MixtureInfeasibleError(float(resid))
    return out + best
