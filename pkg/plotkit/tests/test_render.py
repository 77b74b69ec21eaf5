"""Spec validation, trace parsing, and deterministic bundle rendering.

The bundle fixtures run the primary pipeline at tiny scale through its CLI
so the rendered figures come from real experiment artifacts.
"""
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest
from matplotlib.figure import Figure

from plotkit.render import SpecError, load_spec, main, read_trace, render

FIG4_MODELS = ["null", "c1", "c2", "c3", "c4"]
FIG5_MODELS = ["model1", "model2", "model3", "model4"]


def write_trace(path: Path, n: int = 120, scale: float = 1.0) -> Path:
    rows = ["t,S,I,R"]
    for k in range(n):
        t = 0.05 * k
        i = scale * 0.3 * math.exp(-(t - 2.0) ** 2)
        r = min(0.9, scale * 0.2 * t)
        rows.append(f"{t:.4f},{1 - i - r:.6f},{i:.6f},{r:.6f}")
    path.write_text("\n".join(rows) + "\n")
    return path


def write_spec(path: Path, series, **over) -> Path:
    doc = {"series": series, "column": "I", "marker_every": 10,
           "output": "figure.png", **over}
    path.write_text(json.dumps(doc))
    return path


def make_bundle(out: Path, models, seed: int) -> Path:
    cfg = {
        "seed": seed,
        "epidemic": {"tau": 1.0, "gamma": 1.0, "epsilon": 0.01,
                     "t_end": 4.0},
        "network": {"n_nodes": 250},
        "ensemble": {"n_networks": 6},
        "models": {name: {"preset": name} for name in models},
    }
    cfg_path = out / "config.json"
    out.mkdir(parents=True)
    cfg_path.write_text(json.dumps(cfg))
    r = subprocess.run([sys.executable, "-m", "hcmsir.cli", "experiment",
                       str(cfg_path), "-o", str(out), "--workers", "1"],
                      capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    return out


@pytest.fixture(scope="session")
def bundles(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundles")
    return {"fig4": make_bundle(root / "fig4", FIG4_MODELS, seed=31),
            "fig5": make_bundle(root / "fig5", FIG5_MODELS, seed=32)}


class TestSpec:
    def test_empty_spec_rejected(self, tmp_path):
        p = tmp_path / "spec.json"
        p.write_text(json.dumps({"series": []}))
        with pytest.raises(SpecError, match="at least one series"):
            load_spec(p)

    def test_missing_trace_file_rejected(self, tmp_path):
        p = write_spec(tmp_path / "spec.json",
                       [{"file": "gone.csv", "role": "line"}])
        with pytest.raises(SpecError, match="not found"):
            load_spec(p)

    def test_bad_role_rejected(self, tmp_path):
        write_trace(tmp_path / "a.csv")
        p = write_spec(tmp_path / "spec.json",
                       [{"file": "a.csv", "role": "dashed"}])
        with pytest.raises(SpecError, match="role"):
            load_spec(p)

    def test_bad_column_rejected(self, tmp_path):
        write_trace(tmp_path / "a.csv")
        p = write_spec(tmp_path / "spec.json",
                       [{"file": "a.csv", "role": "line"}], column="Q")
        with pytest.raises(SpecError, match="column"):
            load_spec(p)

    def test_relative_paths_resolve_against_spec_dir(self, tmp_path):
        write_trace(tmp_path / "a.csv")
        p = write_spec(tmp_path / "spec.json",
                       [{"file": "a.csv", "role": "line"}])
        spec = load_spec(p)
        assert spec.resolve(spec.series[0].file).exists()


class TestTrace:
    def test_roundtrip_columns(self, tmp_path):
        t, cols = read_trace(write_trace(tmp_path / "a.csv", n=40))
        assert len(t) == 40
        assert set(cols) == {"S", "I", "R"}

    def test_malformed_header_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x,y\n1,2\n")
        with pytest.raises(SpecError, match="header"):
            read_trace(p)

    def test_non_numeric_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,S,I,R\n0,a,b,c\n")
        with pytest.raises(SpecError, match="non-numeric"):
            read_trace(p)


class TestRender:
    def test_single_line_only(self, tmp_path):
        write_trace(tmp_path / "a.csv")
        spec = load_spec(write_spec(tmp_path / "spec.json",
                                    [{"file": "a.csv", "role": "line"}]))
        png, svg = render(spec)
        assert png.stat().st_size > 0 and svg.stat().st_size > 0

    def test_marker_subsampling(self, tmp_path, monkeypatch):
        write_trace(tmp_path / "a.csv", n=100)
        spec = load_spec(write_spec(
            tmp_path / "spec.json",
            [{"file": "a.csv", "role": "line"},
             {"file": "a.csv", "role": "marker"}], marker_every=10))
        captured = []
        monkeypatch.setattr(Figure, "savefig",
                            lambda self, *a, **k: captured.append(self))
        render(spec)
        lines = captured[0].axes[0].lines
        assert len(lines[0].get_xdata()) == 100
        assert len(lines[1].get_xdata()) == 10

    def test_pair_colors_shared(self, tmp_path, monkeypatch):
        write_trace(tmp_path / "a.csv")
        write_trace(tmp_path / "b.csv", scale=0.8)
        spec = load_spec(write_spec(
            tmp_path / "spec.json",
            [{"file": "a.csv", "role": "line"},
             {"file": "a.csv", "role": "marker"},
             {"file": "b.csv", "role": "line"},
             {"file": "b.csv", "role": "marker"}]))
        captured = []
        monkeypatch.setattr(Figure, "savefig",
                            lambda self, *a, **k: captured.append(self))
        render(spec)
        lines = captured[0].axes[0].lines
        assert lines[0].get_color() == lines[1].get_color()
        assert lines[2].get_color() == lines[3].get_color()
        assert lines[0].get_color() != lines[2].get_color()

    def test_main_reports_missing_spec(self, capsys):
        assert main(["/no/such/spec.json"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_main_renders_and_prints_paths(self, tmp_path, capsys):
        write_trace(tmp_path / "a.csv")
        p = write_spec(tmp_path / "spec.json",
                       [{"file": "a.csv", "role": "line"}])
        assert main([str(p)]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 2
        assert all(Path(line).exists() for line in out)


class TestBundles:
    def test_criterion_11_bundle_rendering(self, bundles, tmp_path):
        ok = True
        parts = []
        for name, pairs in [("fig4", 5), ("fig5", 4)]:
            spec = load_spec(bundles[name] / "figure_spec.json")
            roles = [s.role for s in spec.series]
            shape = roles == ["line", "marker"] * pairs
            outs = []
            for tag in ("a", "b"):
                outs.append(render(spec, tmp_path / name / tag / "fig.png"))
            same = all(x.read_bytes() == y.read_bytes()
                       for x, y in zip(*outs))
            ok = ok and shape and same
            parts.append(f"{name}: {len(roles) // 2} line/marker pairs, "
                         f"repeat render {'identical' if same else 'DIFFERS'}")
        print(f"[criterion 11] {'PASS' if ok else 'FAIL'} " + "; ".join(parts))
        assert ok
