"""Event-driven simulation: exactness on tiny graphs, bookkeeping audits,
ensemble alignment and determinism."""
import random

import numpy as np
import pytest

from hcmsir.gillespie import (EnsembleResult, NoOutbreaksError, SimProtocol,
                              run_ensemble, simulate_once)
from hcmsir.models import PRESET_MODELS
from hcmsir.netgen import Network


def edge_net():
    return Network(2, [(0, 1)])


class TestSingleRun:
    def test_terminates_with_no_infected(self):
        net = Network(4, [(0, 1), (1, 2), (2, 3)])
        tr = simulate_once(net, 1.0, 1.0, 0, random.Random(0))
        assert tr.i_counts[-1] == 0
        assert tr.i_counts[0] == 1

    def test_counts_are_consistent(self):
        net = Network(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)])
        tr = simulate_once(net, 2.0, 1.0, 2, random.Random(1))
        assert np.all(tr.i_counts >= 0)
        assert np.all(np.diff(tr.r_counts) >= 0)
        total = tr.i_counts + tr.r_counts
        # each event changes I+R by +1 (infection) or 0 (recovery)
        assert set(np.diff(total)) <= {0, 1}

    def test_edge_transmission_probability(self):
        # competing exponentials: transmission wins with prob tau/(tau+gamma)
        rng = random.Random(123)
        n_runs = 30000
        hits = sum(simulate_once(edge_net(), 1.0, 1.0, 0, rng).r_counts[-1]
                   == 2 for _ in range(n_runs))
        assert hits / n_runs == pytest.approx(0.5, abs=0.01)

    def test_edge_transmission_probability_asymmetric(self):
        rng = random.Random(99)
        n_runs = 20000
        hits = sum(simulate_once(edge_net(), 3.0, 1.0, 0, rng).r_counts[-1]
                   == 2 for _ in range(n_runs))
        assert hits / n_runs == pytest.approx(0.75, abs=0.012)

    def test_recovery_time_distribution(self):
        # isolated-seed recovery times are Exp(gamma)
        net = Network(2, [(0, 1)])
        rng = random.Random(5)
        times = [simulate_once(net, 0.0, 2.0, 0, rng).times[-1]
                 for _ in range(20000)]
        assert np.mean(times) == pytest.approx(0.5, abs=0.02)

    def test_prevalence_sampling_is_right_continuous(self):
        tr = simulate_once(edge_net(), 1.0, 1.0, 0, random.Random(2))
        s, i, r = tr.prevalence_at(np.array([0.0]))
        assert i[0] == pytest.approx(0.5)
        s, i, r = tr.prevalence_at(np.array([1e9]))
        assert i[0] == 0.0

    def test_initial_node_validation(self):
        with pytest.raises(ValueError, match="out of range"):
            simulate_once(edge_net(), 1.0, 1.0, 5, random.Random(0))


class TestEnsemble:
    def test_deterministic_across_worker_counts(self):
        model = PRESET_MODELS["null"]()
        proto = SimProtocol(tau=1.0, gamma=1.0, n_networks=6, seed=11)
        a = run_ensemble(model, proto, 400, t_end=6.0, workers=1)
        b = run_ensemble(model, proto, 400, t_end=6.0, workers=3)
        assert a.n_retained == b.n_retained
        assert np.array_equal(a.mean_i, b.mean_i)

    def test_alignment_crossing_at_origin(self):
        model = PRESET_MODELS["c1"]()
        proto = SimProtocol(tau=1.0, gamma=1.0, n_networks=8, seed=21,
                            alignment_prevalence=0.02)
        res = run_ensemble(model, proto, 800, t_end=8.0, workers=2,
                           keep_runs=True)
        for s, i, r in res.runs:
            assert i[0] >= 0.02            # every run crosses at t = 0
        assert res.mean_i[0] >= 0.02

    def test_discards_counted(self):
        model = PRESET_MODELS["null"]()
        proto = SimProtocol(tau=1.0, gamma=1.0, n_networks=10, seed=4)
        res = run_ensemble(model, proto, 500, t_end=5.0, workers=2)
        assert res.n_retained + res.n_discarded == 10
        assert res.n_retained >= 1

    def test_no_outbreaks_raises(self):
        model = PRESET_MODELS["null"]()
        proto = SimProtocol(tau=0.01, gamma=5.0, n_networks=4, seed=0)
        with pytest.raises(NoOutbreaksError, match="4 runs"):
            run_ensemble(model, proto, 300, t_end=3.0, workers=1)

    def test_mean_trace_sidecar(self):
        model = PRESET_MODELS["null"]()
        proto = SimProtocol(tau=1.0, gamma=1.0, n_networks=5, seed=8)
        res = run_ensemble(model, proto, 400, t_end=4.0, workers=1)
        trace = res.mean_trace()
        assert np.allclose(trace.s + trace.i + trace.r, 1.0, atol=1e-12)
        side = res.sidecar()
        assert side["n_retained"] == res.n_retained
        assert side["seed"] == 8

    def test_protocol_validation(self):
        with pytest.raises(ValueError):
            SimProtocol(tau=-1.0, gamma=1.0)
        with pytest.raises(ValueError):
            SimProtocol(tau=1.0, gamma=1.0, outbreak_threshold=0.0)
