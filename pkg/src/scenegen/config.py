"""Run configuration: a flat key-value document (YAML or JSON) plus CLI overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import platform
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import __version__


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` maps field names to messages."""

    def __init__(self, errors: Mapping[str, str]):
        self.errors = dict(errors)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.errors.items()))


def bundled(*parts: str) -> str:
    return str(resources.files("scenegen").joinpath("data", *parts))


@dataclass
class RunConfig:
    dataset: str = field(default_factory=lambda: bundled("fixture"))
    format: str = "csv"
    years: list[int] | None = None
    seed: int = 7
    out: str = "runs/default"

    llm_mode: str = "stub"
    llm_endpoint: str = ""
    llm_model: str = ""
    llm_temperature: float = 0.0
    llm_timeout: float = 30.0
    llm_max_in_flight: int = 4
    llm_api_key_env: str = "SCENEGEN_API_KEY"
    feature_dim: int = 8

    method: str = "gt"
    method_params: dict = field(default_factory=dict)
    gt_threshold: float | None = None
    strict_gt: bool = False
    hss_threshold: float = 0.5
    cluster_k: int | None = None
    cluster_sigma: float = 1.0

    alpha: float = 0.5
    beta: float = 0.5

    knowledge_dir: str = field(default_factory=lambda: bundled("knowledge"))
    prompts_path: str = field(default_factory=lambda: bundled("prompts.txt"))
    constraints_dir: str = field(default_factory=lambda: bundled("constraints"))
    theta_high: float = 0.6
    theta_risk: float = 2.0
    z_cap: float = 3.0
    credibility_mode: str = "stub-statistical"
    candidate_cap: int = 5000

    policy_ii: float = 0.9
    policy_ig: float = 0.1
    policy_gg: float = 0.5

    eta: float = 0.05
    epsilon: float = 1e-3
    max_iters: int = 100
    fd_step: float = 1e-3
    max_rounds: int = 20

    n_scenarios: int = 50
    n_reduced: int = 10
    n_perturbations: int = 16
    sample_spread: float = 0.05

    bench_runs: int = 15

    def validate(self, check_paths: bool = True) -> "RunConfig":
        errs: dict[str, str] = {}
        if self.seed is None:
            errs["seed"] = "required"
        if self.format not in ("csv", "jsonl"):
            errs["format"] = f"must be csv or jsonl, got {self.format!r}"
        if self.llm_mode not in ("stub", "remote"):
            errs["llm_mode"] = f"must be stub or remote, got {self.llm_mode!r}"
        if self.llm_mode == "remote" and not self.llm_endpoint:
            errs["llm_endpoint"] = "required in remote mode"
        if self.method not in ("gt", "hss", "pla", "cluster"):
            errs["method"] = f"unknown method {self.method!r}"
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            errs["alpha"] = "alpha, beta must be >= 0 with a positive sum"
        if not 0 < self.hss_threshold <= 1:
            errs["hss_threshold"] = "must lie in (0, 1]"
        for name in ("policy_ii", "policy_ig", "policy_gg"):
            if not 0 < getattr(self, name) < 1:
                errs[name] = "quantile must lie in (0, 1)"
        for name in ("eta", "epsilon", "fd_step"):
            if getattr(self, name) <= 0:
                errs[name] = "must be positive"
        for name in ("max_iters", "max_rounds", "n_scenarios", "n_reduced", "bench_runs",
                     "n_perturbations", "feature_dim", "candidate_cap"):
            if getattr(self, name) < 1:
                errs[name] = "must be >= 1"
        if self.n_reduced > self.n_scenarios:
            errs["n_reduced"] = "cannot exceed n_scenarios"
        if self.credibility_mode not in ("stub-statistical", "remote-judge"):
            errs["credibility_mode"] = f"unknown mode {self.credibility_mode!r}"
        if check_paths:
            for name in ("dataset", "knowledge_dir", "constraints_dir"):
                if not Path(getattr(self, name)).is_dir():
                    errs[name] = f"directory not found: {getattr(self, name)}"
            if not Path(self.prompts_path).is_file():
                errs["prompts_path"] = f"file not found: {self.prompts_path}"
        if errs:
            raise ConfigError(errs)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of every setting that affects results (the output directory does not)."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def backbone_params(self, method: str | None = None) -> dict:
        method = method or self.method
        if method == "gt":
            p = {"threshold": self.gt_threshold, "strict": self.strict_gt}
        elif method == "hss":
            p = {"salience_threshold": self.hss_threshold}
        elif method == "cluster":
            p = {"k": self.cluster_k, "sigma_mult": self.cluster_sigma, "seed": self.seed}
        else:
            p = {}
        if method == self.method:
            p.update(self.method_params)
        return p


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name: str, value: Any) -> Any:
    """Coerce text values (from files or ``--set``) to the field's type."""
    default = _FIELDS[name].default
    if default is dataclasses.MISSING:
        default = _FIELDS[name].default_factory()  # type: ignore[misc]
    if value is None or not isinstance(value, str):
        if name == "years" and isinstance(value, (list, tuple)):
            return [int(v) for v in value]
        return value
    if name == "years":
        if value.strip().lower() in ("", "all"):
            return None
        if "-" in value and "," not in value:
            a, b = value.split("-")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in value.split(",")]
    if name in ("gt_threshold",):
        return None if value.lower() in ("", "none", "median") else float(value)
    if name == "cluster_k":
        return None if value.lower() in ("", "none", "auto") else int(value)
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError({"config": f"file not found: {p}"})
        try:
            data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError({"config": f"unparseable: {exc}"}) from None
        if not isinstance(data, dict):
            raise ConfigError({"config": "expected a flat key-value mapping"})
        values.update(data)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError({k: "unknown key" for k in unknown})
    errs = {}
    kwargs = {}
    for k, v in values.items():
        try:
            kwargs[k] = _coerce(k, v)
        except (TypeError, ValueError) as exc:
            errs[k] = f"bad value {v!r}: {exc}"
    if errs:
        raise ConfigError(errs)
    return RunConfig(**kwargs)


def manifest(command: str, cfg: RunConfig, extra: Mapping | None = None) -> dict:
    import numpy

    out = {
        "command": command,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "config": {k: v for k, v in cfg.to_dict().items() if k != "out"},
        "versions": {"scenegen": __version__, "python": platform.python_version(),
                     "numpy": numpy.__version__},
    }
    if extra:
        out.update(extra)
    return out
