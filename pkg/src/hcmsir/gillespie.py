"""Exact stochastic SIR simulation on networks and ensemble aggregation.

Event selection keeps the live S-I edge list and the infected-node list as
swap-pop arrays with index maps, so every event is O(degree). Ensembles
discard runs that never reach the outbreak threshold and time-shift the
rest to a common prevalence crossing before averaging.
"""
from __future__ import annotations

import multiprocessing
import os
import random
from dataclasses import dataclass, field

import numpy as np

from .models import NetworkModel
from .netgen import Network, generate_network

WORKERS_ENV = "HCMSIR_WORKERS"


@dataclass(frozen=True)
class SimProtocol:
    tau: float
    gamma: float
    n_networks: int = 100
    runs_per_network: int = 1
    outbreak_threshold: float = 0.05
    alignment_prevalence: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.tau < 0 or self.gamma < 0:
            raise ValueError("rates must be nonnegative")
        for name in ("outbreak_threshold", "alignment_prevalence"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass
class EventTrace:
    """Right-continuous step-function record of one run."""

    times: np.ndarray
    i_counts: np.ndarray
    r_counts: np.ndarray
    n_nodes: int

    def prevalence_at(self, t_grid: np.ndarray, shift: float = 0.0):
        """(S, I, R) prevalences sampled at shifted grid times."""
        t = np.asarray(t_grid) + shift
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1,
                      0, len(self.times) - 1)
        i = self.i_counts[idx] / self.n_nodes
        r = self.r_counts[idx] / self.n_nodes
        return 1.0 - i - r, i, r


def simulate_once(net: Network, tau: float, gamma: float,
                  initial_infected: int, rng) -> EventTrace:
    """Continuous-time Gillespie SIR run to extinction of infection."""
    n = net.n_nodes
    if not 0 <= initial_infected < n:
        raise ValueError(f"initial node {initial_infected} out of range")
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = random.Random(rng)
    adj = net.adj
    status = bytearray(n)                  # 0 S, 1 I, 2 R

    infected: list[int] = []
    inf_pos: dict[int, int] = {}
    si: list[tuple[int, int]] = []         # (infected, susceptible)
    si_pos: dict[tuple[int, int], int] = {}

    def si_add(e):
        si_pos[e] = len(si)
        si.append(e)

    def si_remove(e):
        idx = si_pos.pop(e)
        last = si.pop()
        if last != e:
            si[idx] = last
            si_pos[last] = idx

    def infect(v):
        status[v] = 1
        inf_pos[v] = len(infected)
        infected.append(v)
        for w in adj[v]:
            st = status[w]
            if st == 0:
                si_add((v, w))
            elif st == 1:
                si_remove((w, v))

    def recover(v):
        status[v] = 2
        idx = inf_pos.pop(v)
        last = infected.pop()
        if last != v:
            infected[idx] = last
            inf_pos[last] = idx
        for w in adj[v]:
            if status[w] == 0:
                si_remove((v, w))

    infect(initial_infected)
    t = 0.0
    times = [0.0]
    i_counts = [1]
    r_counts = [0]
    n_r = 0
    while infected:
        rate_inf = tau * len(si)
        rate_rec = gamma * len(infected)
        total = rate_inf + rate_rec
        t += rng.expovariate(total)
        if rng.random() * total < rate_inf:
            _, v = si[rng.randrange(len(si))]
            infect(v)
        else:
            recover(infected[rng.randrange(len(infected))])
            n_r += 1
        times.append(t)
        i_counts.append(len(infected))
        r_counts.append(n_r)
    return EventTrace(np.array(times), np.array(i_counts),
                      np.array(r_counts), n)


class NoOutbreaksError(RuntimeError):
    def __init__(self, total: int):
        super().__init__(f"all {total} runs died out below the outbreak "
                         f"threshold")
        self.total = total


@dataclass
class EnsembleResult:
    t: np.ndarray
    mean_s: np.ndarray
    mean_i: np.ndarray
    mean_r: np.ndarray
    n_retained: int
    n_discarded: int
    protocol: SimProtocol
    runs: list | None = field(default=None, repr=False)

    def mean_trace(self):
        from .odesolve import EpidemicTrace
        return EpidemicTrace(self.t, self.mean_s, self.mean_i, self.mean_r,
                             metadata={"n_retained": self.n_retained,
                                       "n_discarded": self.n_discarded})

    def sidecar(self) -> dict:
        p = self.protocol
        return {"tau": p.tau, "gamma": p.gamma,
                "n_networks": p.n_networks,
                "runs_per_network": p.runs_per_network,
                "outbreak_threshold": p.outbreak_threshold,
                "alignment_prevalence": p.alignment_prevalence,
                "seed": p.seed,
                "n_retained": self.n_retained,
                "n_discarded": self.n_discarded}


def _replicate(args):
    """One network with its runs; executed in a worker process."""
    model, n_nodes, protocol, grid, seed = args
    ss = np.random.SeedSequence(seed)
    net_rng = np.random.default_rng(ss)
    net = generate_network(model, n_nodes, net_rng)
    out = []
    child = ss.spawn(protocol.runs_per_network)
    for run_ss in child:
        run_rng = np.random.default_rng(run_ss)
        start = int(run_rng.integers(n_nodes))
        ev = simulate_once(net, protocol.tau, protocol.gamma, start,
                           random.Random(int(run_ss.generate_state(1)[0])))
        peak = ev.i_counts.max() / n_nodes
        if peak < protocol.outbreak_threshold:
            out.append(None)
            continue
        crossing = ev.i_counts / n_nodes >= protocol.alignment_prevalence
        if not crossing.any():
            out.append(None)
            continue
        cross = int(np.argmax(crossing))
        shift = float(ev.times[cross])
        out.append(ev.prevalence_at(grid, shift))
    return out


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, (os.cpu_count() or 1) - 1)


def run_ensemble(model: NetworkModel, protocol: SimProtocol,
                 n_nodes: int, t_end: float = 15.0, h_out: float = 0.01,
                 workers: int | None = None,
                 keep_runs: bool = False) -> EnsembleResult:
    """Ensemble of Gillespie runs on freshly generated networks, aligned and
    averaged on a uniform grid. Deterministic for a fixed protocol seed."""
    grid = np.round(np.arange(0.0, t_end + h_out / 2, h_out), 12)
    seeds = [int(s.generate_state(1)[0])
             for s in np.random.SeedSequence(protocol.seed).spawn(
                 protocol.n_networks)]
    tasks = [(model, n_nodes, protocol, grid, s) for s in seeds]
    n_workers = resolve_workers(workers)
    if n_workers > 1 and len(tasks) > 1:
        with multiprocessing.Pool(n_workers) as pool:
            per_net = pool.map(_replicate, tasks, chunksize=1)
    else:
        per_net = [_replicate(t) for t in tasks]

    retained = [r for net_runs in per_net for r in net_runs if r is not None]
    total = sum(len(net_runs) for net_runs in per_net)
    if not retained:
        raise NoOutbreaksError(total)
    mean_s = np.mean([r[0] for r in retained], axis=0)
    mean_i = np.mean([r[1] for r in retained], axis=0)
    mean_r = np.mean([r[2] for r in retained], axis=0)
    return EnsembleResult(grid, mean_s, mean_i, mean_r,
                          n_retained=len(retained),
                          n_discarded=total - len(retained),
                          protocol=protocol,
                          runs=retained if keep_runs else None)
