"""Experiment configuration: JSON schema, validation, model resolution."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import models as model_presets
from .compiler import EpidemicParams
from .gillespie import SimProtocol
from .models import (ExactCount, Marginal, NetworkModel, Poisson,
                     ScaledPoisson, mixture_model)
from .pgf import solve_mixture
from .subgraphs import LIBRARY, Subgraph, build_position_index


class ConfigError(ValueError):
    pass


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required key '{key}'")
    return d[key]


def parse_subgraph(entry: dict) -> Subgraph:
    sid = _require(entry, "id", "subgraph entry")
    if "library" in entry:
        name = entry["library"]
        if name not in LIBRARY:
            raise ConfigError(
                f"subgraph '{sid}': unknown library name '{name}' "
                f"(available: {sorted(LIBRARY)})")
        return LIBRARY[name].renamed(sid)
    if "adjacency" in entry:
        try:
            return Subgraph(sid, np.array(entry["adjacency"]))
        except Exception as exc:
            raise ConfigError(f"subgraph '{sid}': {exc}") from exc
    raise ConfigError(
        f"subgraph '{sid}': needs either 'library' or 'adjacency'")


def parse_marginal(entry: dict) -> Marginal:
    family = _require(entry, "family", "marginal entry")
    try:
        if family == "poisson":
            return Poisson(float(_require(entry, "rate", "poisson marginal")))
        if family == "scaled_poisson":
            return ScaledPoisson(
                int(_require(entry, "scale", "scaled_poisson marginal")),
                float(_require(entry, "rate", "scaled_poisson marginal")))
        if family == "exact":
            return ExactCount(int(_require(entry, "count", "exact marginal")))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"marginal entry: {exc}") from exc
    raise ConfigError(f"unknown marginal family '{family}'")


def parse_model(spec: dict, where: str = "model") -> NetworkModel:
    if "preset" in spec:
        name = spec["preset"]
        if name not in model_presets.PRESET_MODELS:
            raise ConfigError(
                f"{where}: unknown model preset '{name}' "
                f"(available: {sorted(model_presets.PRESET_MODELS)})")
        return model_presets.PRESET_MODELS[name]()
    subgraphs = [parse_subgraph(e)
                 for e in _require(spec, "subgraphs", where)]
    if "targets" in spec:
        t = spec["targets"]
        targets = (float(_require(t, "mean_degree", where)),
                   float(_require(t, "degree_variance", where)),
                   float(_require(t, "triangles_per_node", where)))
        rates = solve_mixture(subgraphs, targets, spec.get("fixed"))
        return mixture_model([(s, Poisson(float(r)))
                              for s, r in zip(subgraphs, rates)])
    index = build_position_index(subgraphs)
    marginals = {}
    for entry in _require(spec, "marginals", where):
        sid = _require(entry, "subgraph", "marginal entry")
        orbit = int(entry.get("orbit", 0))
        marginals[(sid, orbit)] = parse_marginal(entry)
    try:
        return NetworkModel(tuple(index.subgraphs), marginals)
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class ExperimentConfig:
    models: dict[str, NetworkModel]
    model_specs: dict[str, dict]
    params: EpidemicParams
    t_end: float
    h_out: float
    n_nodes: int
    protocol: SimProtocol
    seed: int
    raw: dict = field(repr=False, default_factory=dict)


def parse_config(doc: dict) -> ExperimentConfig:
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]            # accept a manifest.json verbatim
    seed = int(doc.get("seed", 0))
    epi = doc.get("epidemic", {})
    try:
        params = EpidemicParams(float(epi.get("tau", 1.0)),
                                float(epi.get("gamma", 1.0)),
                                float(epi.get("epsilon", 0.01)))
    except ValueError as exc:
        raise ConfigError(f"epidemic: {exc}") from exc
    t_end = float(epi.get("t_end", 15.0))
    h_out = float(epi.get("h_out", 0.01))
    n_nodes = int(doc.get("network", {}).get("n_nodes", 5000))
    ens = doc.get("ensemble", {})
    try:
        protocol = SimProtocol(
            tau=params.tau, gamma=params.gamma,
            n_networks=int(ens.get("n_networks", 100)),
            runs_per_network=int(ens.get("runs_per_network", 1)),
            outbreak_threshold=float(ens.get("outbreak_threshold", 0.05)),
            alignment_prevalence=float(
                ens.get("alignment_prevalence", params.epsilon)),
            seed=seed)
    except ValueError as exc:
        raise ConfigError(f"ensemble: {exc}") from exc

    if "models" in doc:
        specs = doc["models"]
    elif "model" in doc:
        specs = {"model": doc["model"]}
    else:
        raise ConfigError("config needs a 'model' or 'models' section")
    if not isinstance(specs, dict) or not specs:
        raise ConfigError("'models' must be a non-empty name -> spec mapping")
    parsed = {name: parse_model(spec, where=f"models.{name}")
              for name, spec in specs.items()}
    return ExperimentConfig(models=parsed, model_specs=specs, params=params,
                            t_end=t_end, h_out=h_out, n_nodes=n_nodes,
                            protocol=protocol, seed=seed, raw=doc)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(doc)


def preset_names() -> list[str]:
    pkg = resources.files("hcmsir") / "presets"
    return sorted(p.name[:-5] for p in pkg.iterdir()
                  if p.name.endswith(".json"))


def load_preset(name: str) -> ExperimentConfig:
    pkg = resources.files("hcmsir") / "presets"
    path = pkg / f"{name}.json"
    if not path.is_file():
        raise ConfigError(
            f"unknown preset '{name}' (available: {preset_names()})")
    return parse_config(json.loads(path.read_text()))
