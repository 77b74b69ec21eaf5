"""Symbolic system assembly: rate matrices, T terms, counts, seeding.

The edge rate matrix and the T-term tables are frozen by hand from the
transition logic: an S node is infected at rate (infected in-subgraph
neighbours)*tau plus the external flux at its position; an I node recovers
at rate gamma.
"""
import numpy as np
import pytest

from hcmsir.compiler import (EpidemicParams, assemble_system, build_T,
                             build_Z, n_states, state_code, state_label)
from hcmsir.models import PRESET_MODELS, Poisson, mixture_model, \
    single_orbit_model
from hcmsir.pgf import build_pgf
from hcmsir.subgraphs import LIBRARY, build_position_index


def edge_triangle_model():
    return mixture_model([(LIBRARY["edge"], Poisson(2.0)),
                          (LIBRARY["triangle"], Poisson(1.0))])


def z_as_dict(z, n):
    out = {}
    for k in range(len(z.rows)):
        key = (state_label(int(z.rows[k]), n), state_label(int(z.cols[k]), n))
        fp = int(z.flux_pos[k])
        out[key] = (int(z.tau_coeff[k]), int(z.gamma_coeff[k]),
                    fp + 1 if fp >= 0 else None)
    return out


# Frozen edge rate matrix: entries are (tau coeff, gamma coeff, 1-based flux
# position), with positions x1 = first node, x2 = second node.
EDGE_Z = {
    ("SS", "SI"): (0, 0, 2),
    ("SS", "IS"): (0, 0, 1),
    ("SI", "SR"): (0, 1, None),
    ("SI", "II"): (1, 0, 1),
    ("SR", "IR"): (0, 0, 1),
    ("IS", "II"): (1, 0, 2),
    ("IS", "RS"): (0, 1, None),
    ("II", "IR"): (0, 1, None),
    ("II", "RI"): (0, 1, None),
    ("IR", "RR"): (0, 1, None),
    ("RS", "RI"): (0, 0, 2),
    ("RI", "RR"): (0, 1, None),
}


class TestStateEncoding:
    def test_roundtrip(self):
        for n in (2, 3):
            for code in range(n_states(n)):
                assert state_code(state_label(code, n)) == code

    def test_ordering_is_first_node_most_significant(self):
        assert state_label(0, 2) == "SS"
        assert state_label(1, 2) == "SI"
        assert state_label(3, 2) == "IS"
        assert state_label(5, 3) == "SIR"


class TestRateMatrix:
    def test_edge_matrix_matches_frozen_table(self):
        idx = build_position_index([LIBRARY["edge"]])
        z = build_Z(LIBRARY["edge"], idx)
        assert z_as_dict(z, 2) == EDGE_Z

    def test_all_s_row_has_no_internal_rates(self):
        idx = build_position_index([LIBRARY["triangle"]])
        z = z_as_dict(build_Z(LIBRARY["triangle"], idx), 3)
        for (row, col), (a, b, fp) in z.items():
            if set(row) == {"S"}:
                assert (a, b) == (0, 0) and fp is not None

    def test_all_r_state_is_absorbing(self):
        idx = build_position_index([LIBRARY["triangle"]])
        z = z_as_dict(build_Z(LIBRARY["triangle"], idx), 3)
        assert not any(set(row) == {"R"} for row, _ in z)

    def test_triangle_sii_double_rate(self):
        # an S with two infected triangle partners is infected at rate 2*tau
        idx = build_position_index([LIBRARY["triangle"]])
        z = z_as_dict(build_Z(LIBRARY["triangle"], idx), 3)
        assert z[("SII", "III")] == (2, 0, 1)
        assert z[("ISI", "III")] == (2, 0, 2)

    def test_transitions_change_exactly_one_node(self):
        idx = build_position_index([LIBRARY["k4"]])
        z = z_as_dict(build_Z(LIBRARY["k4"], idx), 4)
        for (row, col), _ in z.items():
            diffs = [(a, b) for a, b in zip(row, col) if a != b]
            assert len(diffs) == 1
            assert diffs[0] in [("S", "I"), ("I", "R")]


class TestTTerms:
    def test_edge_triangle_t_terms(self):
        idx = build_position_index([LIBRARY["edge"], LIBRARY["triangle"]])
        terms = build_T(idx).terms
        assert len(terms) == 5

        def named(i, n):
            return {state_label(c, n): mult for c, mult in terms[i]}

        assert named(0, 2) == {"SI": 1}
        assert named(1, 2) == {"IS": 1}
        assert named(2, 3) == {"SSI": 1, "SIS": 1, "SII": 2,
                               "SIR": 1, "SRI": 1}
        assert named(3, 3) == {"SSI": 1, "ISI": 2, "ISS": 1,
                               "RSI": 1, "ISR": 1}
        assert named(4, 3) == {"SIS": 1, "ISS": 1, "IIS": 2,
                               "IRS": 1, "RIS": 1}

    def test_square_t_terms(self):
        # square corner x1 is adjacent to nodes 1 and 3, not node 2
        idx = build_position_index([LIBRARY["square"]])
        terms = build_T(idx).terms
        named = {state_label(c, 4): m for c, m in terms[0]}
        assert named["SISI"] == 2
        assert named["SISS"] == 1
        assert named["SSSI"] == 1
        assert "SSIS" not in named


class TestAssembledSystem:
    def test_equation_count_edge_triangle(self):
        system = assemble_system(build_pgf(edge_triangle_model()),
                                 EpidemicParams(1.0, 1.0, 0.01))
        assert system.n_equations == 3 ** 2 + 3 ** 3 + 5 + 2

    def test_equation_counts_presets(self):
        for name, expect in [("model1", 27 + 3 + 2), ("model4", 748),
                             ("c4", 737), ("null", 13)]:
            system = assemble_system(build_pgf(PRESET_MODELS[name]()),
                                     EpidemicParams(1.0, 1.0, 0.01))
            assert system.n_equations == expect, name

    def test_initial_conditions_edge_poisson(self):
        model = single_orbit_model(LIBRARY["edge"], Poisson(4.0))
        system = assemble_system(build_pgf(model),
                                 EpidemicParams(1.0, 1.0, 0.05))
        y0 = system.initial_state()
        g = {state_label(c, 2): y0[c] for c in range(9)}
        assert g["SS"] == pytest.approx(2.0 * 0.95)
        assert g["SI"] == pytest.approx(2.0 * 0.05)
        assert g["IS"] == pytest.approx(2.0 * 0.05)
        assert sum(v for k, v in g.items()
                   if k not in ("SS", "SI", "IS")) == 0.0
        assert np.all(y0[system.theta_slice] == 1.0)
        assert y0[system.i_index] == pytest.approx(0.05)
        assert y0[system.r_index] == pytest.approx(-0.05)

    def test_initial_conditions_zero_epsilon(self):
        model = single_orbit_model(LIBRARY["triangle"], Poisson(2.0))
        system = assemble_system(build_pgf(model),
                                 EpidemicParams(1.0, 1.0, 0.0))
        y0 = system.initial_state()
        assert y0[0] == pytest.approx(2.0 / 3)     # J per position
        assert np.sum(np.abs(y0[1:27])) == 0.0
        assert y0[system.i_index] == 0.0

    def test_split_seed_mass_switch(self):
        model = single_orbit_model(LIBRARY["triangle"], Poisson(2.0))
        system = assemble_system(build_pgf(model),
                                 EpidemicParams(1.0, 1.0, 0.03))
        plain = system.initial_state()
        split = system.initial_state(split_seed_mass=True)
        c = state_code("ISS")
        assert split[c] == pytest.approx(plain[c] / 3)

    def test_rhs_conserves_subgraph_mass(self):
        system = assemble_system(build_pgf(edge_triangle_model()),
                                 EpidemicParams(1.3, 0.7, 0.02))
        dy = system.rhs(0.0, system.initial_state())
        assert np.sum(dy[:9]) == pytest.approx(0.0, abs=1e-12)
        assert np.sum(dy[9:36]) == pytest.approx(0.0, abs=1e-12)

    def test_rhs_conserves_prevalence_sum(self):
        # dS + dI + dR = 0 with S = psi(theta)
        system = assemble_system(build_pgf(PRESET_MODELS["c2"]()),
                                 EpidemicParams(1.0, 1.0, 0.01))
        y0 = system.initial_state()
        dy = system.rhs(0.0, y0)
        grad = system.pgf.gradient(y0[system.theta_slice])
        ds = float(dy[system.theta_slice] @ grad)
        assert ds + dy[system.i_index] + dy[system.r_index] == \
            pytest.approx(0.0, abs=1e-14)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            EpidemicParams(-1.0, 1.0, 0.01)
        with pytest.raises(ValueError):
            EpidemicParams(1.0, 1.0, 1.0)

    def test_dump_equations_contains_t_and_rates(self):
        system = assemble_system(build_pgf(edge_triangle_model()),
                                 EpidemicParams(1.0, 1.0, 0.01))
        text = system.dump_equations()
        assert "T_1 = tau*[G_edge(SI)]" in text
        assert "2*G_triangle(SII)" in text
        assert "dtheta_5/dt = -T_5/J_5" in text
        assert text.count("dG_") == 9 + 27

    def test_dump_z_csv_shape(self):
        system = assemble_system(build_pgf(PRESET_MODELS["null"]()),
                                 EpidemicParams(1.0, 1.0, 0.01))
        lines = system.dump_z_csv().strip().splitlines()
        assert lines[0].startswith("subgraph,row_state,col_state")
        assert len(lines) - 1 == len(EDGE_Z)
