"""Compilation of a subgraph set + hyperstub PGF into the mean-field SIR ODEs.

Each subgraph carries 3^|G| states encoded as base-3 integers (digits
S=0, I=1, R=2, node 0 most significant). Transition rates are stored
symbolically as coefficient triples on (tau, gamma, external flux at one
position) and evaluated numerically on every right-hand-side call.
"""
from __future__ import annotations

import io
import csv
from dataclasses import dataclass

import numpy as np

from .pgf import HyperstubPGF
from .subgraphs import PositionIndex, Subgraph

S, I, R = 0, 1, 2
_LETTER = "SIR"


def n_states(subgraph_nodes: int) -> int:
    return 3 ** subgraph_nodes


def state_digit(code: int, node: int, n: int) -> int:
    return (code // 3 ** (n - 1 - node)) % 3


def state_label(code: int, n: int) -> str:
    return "".join(_LETTER[state_digit(code, v, n)] for v in range(n))


def state_code(label: str) -> int:
    code = 0
    for ch in label:
        code = code * 3 + _LETTER.index(ch)
    return code


def _infected_neighbors(s: Subgraph, code: int, node: int) -> int:
    return sum(1 for u in s.neighbors(node)
               if state_digit(code, u, s.n) == I)


@dataclass(frozen=True)
class TAssembly:
    """Per global position: (state code, multiplicity) pairs such that
    T_i = tau * sum multiplicity * G(state) over the position's subgraph."""

    terms: tuple[tuple[tuple[int, int], ...], ...]   # indexed by position


def build_T(index: PositionIndex) -> TAssembly:
    terms: list[tuple[tuple[int, int], ...]] = []
    for sid, local in index.subgraph_of:
        s = index.subgraph(sid)
        rows = []
        for code in range(n_states(s.n)):
            if state_digit(code, local, s.n) != S:
                continue
            mult = _infected_neighbors(s, code, local)
            if mult:
                rows.append((code, mult))
        terms.append(tuple(rows))
    return TAssembly(tuple(terms))


@dataclass(frozen=True)
class RateMatrixZ:
    """Sparse symbolic rate matrix of one subgraph.

    Entry (i, j) has rate tau_coeff*tau + gamma_coeff*gamma + (TD)_flux_pos,
    with flux_pos a global position index or -1 for no external-flux term.
    """

    subgraph_id: str
    n: int
    rows: np.ndarray
    cols: np.ndarray
    tau_coeff: np.ndarray
    gamma_coeff: np.ndarray
    flux_pos: np.ndarray

    def entry(self, i: int, j: int):
        """(tau coeff, gamma coeff, flux position or None), or None if zero."""
        for k in range(len(self.rows)):
            if self.rows[k] == i and self.cols[k] == j:
                fp = int(self.flux_pos[k])
                return (int(self.tau_coeff[k]), int(self.gamma_coeff[k]),
                        fp if fp >= 0 else None)
        return None


def build_Z(subgraph: Subgraph, index: PositionIndex) -> RateMatrixZ:
    """Enumerate all single-node S->I and I->R transitions of a subgraph."""
    n = subgraph.n
    rows, cols, a, b, fp = [], [], [], [], []
    for code in range(n_states(n)):
        for v in range(n):
            digit = state_digit(code, v, n)
            step = 3 ** (n - 1 - v)
            if digit == S:
                rows.append(code)
                cols.append(code + step)       # S -> I
                a.append(_infected_neighbors(subgraph, code, v))
                b.append(0)
                fp.append(index.position(subgraph.id, v))
            elif digit == I:
                rows.append(code)
                cols.append(code + step)       # I -> R
                a.append(0)
                b.append(1)
                fp.append(-1)
    return RateMatrixZ(subgraph.id, n, np.array(rows), np.array(cols),
                       np.array(a), np.array(b), np.array(fp))


@dataclass(frozen=True)
class EpidemicParams:
    tau: float
    gamma: float
    epsilon: float

    def __post_init__(self):
        if self.tau < 0 or self.gamma < 0:
            raise ValueError("tau and gamma must be nonnegative")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")


class CompiledSystem:
    """The assembled mean-field ODE program.

    State vector layout: per-subgraph state expectations (3^|G| each, in
    declaration order), then the m survivor probabilities theta, then the
    infected and recovered prevalences. S is reported as psi(theta) and R
    as the closure 1 - S - I (so R(0) = -eps), which keeps S + I + R
    conserved exactly and drives the final size to the seed-free limit.
    """

    def __init__(self, pgf: HyperstubPGF, params: EpidemicParams):
        self.pgf = pgf
        self.params = params
        self.index = pgf.index
        self.subgraphs = self.index.subgraphs
        self.t_assembly = build_T(self.index)
        self.z = {s.id: build_Z(s, self.index) for s in self.subgraphs}

        self.block_offset: dict[str, int] = {}
        off = 0
        for s in self.subgraphs:
            self.block_offset[s.id] = off
            off += n_states(s.n)
        # Vectorized T lookup tables: global state indices and multiplicities.
        self._t_idx = []
        for i, terms in enumerate(self.t_assembly.terms):
            sid = self.index.subgraph_of[i][0]
            boff = self.block_offset[sid]
            codes = np.array([boff + c for c, _ in terms], dtype=np.intp)
            mults = np.array([m for _, m in terms], dtype=float)
            self._t_idx.append((codes, mults))
        self._j_floor = 1e-12
        self.n_subgraph_states = off
        self.m = self.index.m
        self.theta_slice = slice(off, off + self.m)
        self.i_index = off + self.m
        self.r_index = off + self.m + 1
        self.n_equations = off + self.m + 2

    # -- evaluation ------------------------------------------------------

    def _T(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(self.m)
        for i, (codes, mults) in enumerate(self._t_idx):
            if len(codes):
                out[i] = y[codes] @ mults
        return self.params.tau * out

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        p = self.params
        th = np.clip(y[self.theta_slice], 0.0, 1.0)
        grad = self.pgf.gradient(th)
        hess = self.pgf.hessian(th)
        T = self._T(y)
        # Per-copy external hazard: the expected number of surviving copies
        # whose focal node is susceptible at position j is theta_j*J_j, so
        # each exerts hazard T_j/(theta_j*J_j). Contracting with the excess
        # count Delta[i,j] = theta_j*H[i,j]/J_i gives the external force
        # (TD)_i = sum_j H[i,j]*T_j/(J_i*J_j) on a copy's position-i node.
        frozen = grad <= self._j_floor
        safe_J = np.where(frozen, 1.0, grad)
        hz = np.where(frozen, 0.0, T / safe_J)
        flux = np.where(frozen, 0.0, (hess @ hz) / safe_J)   # (TD)_i

        dy = np.zeros_like(y)
        for s in self.subgraphs:
            z = self.z[s.id]
            off = self.block_offset[s.id]
            rates = z.tau_coeff * p.tau + z.gamma_coeff * p.gamma
            ext = z.flux_pos >= 0
            rates = rates + np.where(ext, flux[np.where(ext, z.flux_pos, 0)],
                                     0.0)
            outflow = rates * y[off + z.rows]
            np.add.at(dy, off + z.rows, -outflow)
            np.add.at(dy, off + z.cols, outflow)

        # theta_i' = -theta_i * hazard_i = -T_i/J_i.
        dtheta = -hz
        dy[self.theta_slice] = dtheta

        i_prev = y[self.i_index]
        ds = float(dtheta @ grad)
        dy[self.i_index] = -ds - p.gamma * i_prev
        dy[self.r_index] = p.gamma * i_prev
        return dy

    # -- initial conditions ---------------------------------------------

    def initial_state(self, split_seed_mass: bool = False) -> np.ndarray:
        """All-S states carry J*(1-eps); each single-I state carries J_p*eps
        (divided by |G| when split_seed_mass keeps subgraph totals exact)."""
        eps = self.params.epsilon
        y0 = np.zeros(self.n_equations)
        ones = np.ones(self.m)
        J = self.pgf.gradient(ones)
        for s in self.subgraphs:
            off = self.block_offset[s.id]
            pos = list(self.index.positions_of(s.id))
            j_sub = float(np.mean(J[pos]))
            y0[off] = j_sub * (1.0 - eps)
            for v in range(s.n):
                code = 3 ** (s.n - 1 - v)      # I at node v, rest S
                mass = J[pos[v]] * eps
                if split_seed_mass:
                    mass /= s.n
                y0[off + code] = mass
        y0[self.theta_slice] = 1.0
        y0[self.i_index] = eps
        # R is the closure 1 - S - I. Seed nodes are infected without any
        # transmission having occurred, so S = psi(theta) starts at 1 and R
        # starts at -eps; the sum S + I + R is then conserved exactly and
        # the final size converges to the seed-free limit 1 - psi(theta_inf).
        y0[self.r_index] = -eps
        return y0

    # -- observation -----------------------------------------------------

    def susceptible(self, y: np.ndarray) -> float:
        th = np.clip(y[self.theta_slice], 0.0, 1.0)
        return self.pgf.eval(th)

    def observe(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """S, I, R series for a (n_points, n_equations) solution array."""
        Y = np.atleast_2d(Y)
        s_arr = np.array([self.susceptible(y) for y in Y])
        return s_arr, Y[:, self.i_index].copy(), Y[:, self.r_index].copy()

    def subgraph_mass(self, y: np.ndarray) -> dict[str, float]:
        out = {}
        for s in self.subgraphs:
            off = self.block_offset[s.id]
            out[s.id] = float(np.sum(y[off:off + n_states(s.n)]))
        return out

    # -- dumps -----------------------------------------------------------

    def _rate_str(self, a: int, b: int, pos: int) -> str:
        parts = []
        if a:
            parts.append("tau" if a == 1 else f"{a}*tau")
        if b:
            parts.append("gamma" if b == 1 else f"{b}*gamma")
        if pos >= 0:
            parts.append(f"(TD)_{pos + 1}")
        return " + ".join(parts) if parts else "0"

    def dump_equations(self) -> str:
        """Human-readable ODE listing, one equation per line."""
        lines = [f"# {self.n_equations} equations: "
                 + " + ".join([f"3^{s.n}" for s in self.subgraphs])
                 + f" + {self.m} + 2"]
        for i, terms in enumerate(self.t_assembly.terms):
            sid = self.index.subgraph_of[i][0]
            n = self.index.subgraph(sid).n
            body = " + ".join(
                (f"{mult}*" if mult > 1 else "") + f"G_{sid}({state_label(code, n)})"
                for code, mult in terms) or "0"
            lines.append(f"T_{i + 1} = tau*[{body}]")
        for s in self.subgraphs:
            z = self.z[s.id]
            n = s.n
            inflow: dict[int, list[str]] = {}
            outflow: dict[int, list[str]] = {}
            for k in range(len(z.rows)):
                r, c = int(z.rows[k]), int(z.cols[k])
                rate = self._rate_str(int(z.tau_coeff[k]),
                                      int(z.gamma_coeff[k]),
                                      int(z.flux_pos[k]))
                outflow.setdefault(r, []).append(rate)
                inflow.setdefault(c, []).append(
                    f"[{rate}]*G_{s.id}({state_label(r, n)})")
            for code in range(n_states(n)):
                lhs = f"dG_{s.id}({state_label(code, n)})/dt"
                terms = []
                if code in outflow:
                    terms.append(f"-[{' + '.join(outflow[code])}]"
                                 f"*G_{s.id}({state_label(code, n)})")
                terms.extend("+ " + t for t in inflow.get(code, []))
                lines.append(f"{lhs} = " + (" ".join(terms) if terms else "0"))
        for i in range(self.m):
            lines.append(f"dtheta_{i + 1}/dt = -T_{i + 1}/J_{i + 1}")
        lines.append("S = psi(theta)")
        lines.append("dI/dt = -sum_i dtheta_i/dt * J_i - gamma*I")
        lines.append("dR/dt = gamma*I  (R(0) = -eps, i.e. R = 1 - S - I)")
        return "\n".join(lines)

    def dump_z_csv(self) -> str:
        """Z matrices as CSV rows (subgraph, row state, col state, tau, gamma,
        flux position or empty)."""
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["subgraph", "row_state", "col_state",
                    "tau_coeff", "gamma_coeff", "flux_position"])
        for s in self.subgraphs:
            z = self.z[s.id]
            for k in range(len(z.rows)):
                fp = int(z.flux_pos[k])
                w.writerow([s.id, state_label(int(z.rows[k]), s.n),
                            state_label(int(z.cols[k]), s.n),
                            int(z.tau_coeff[k]), int(z.gamma_coeff[k]),
                            fp + 1 if fp >= 0 else ""])
        return buf.getvalue()


def assemble_system(pgf: HyperstubPGF, params: EpidemicParams) -> CompiledSystem:
    return CompiledSystem(pgf, params)
