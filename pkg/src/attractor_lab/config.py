"""Run configuration: YAML or JSON file, then command line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import InvalidInputError
from .model import ConstantDiffusion, ProblemSpec, SaturatingDiffusion

PRESETS = ("default", "constant", "counterexample")


@dataclass(frozen=True)
class RunConfig:
    lam: float = 10.0
    diffusion: str = "default"
    diffusion_value: float = 1.0  # only for the constant preset
    cx_delta: float = 0.02  # only for the counterexample preset
    cx_J: float = 6.0
    K: int = 64
    K_check: int = 128
    tol_hyp: float = 1e-6
    step_tol: float = 1e-8
    r_capture: float = 1e-3
    dwell: float = 1.0
    T_max: float = 200.0
    departure: float = 1e-4
    samples: int = 20
    seed: int = 0
    random_trajectories: int = 20
    reclock_fields: int = 3
    reclock_T: float = 2.0
    tau_points: int = 11
    count_probes: tuple = (0.5, 5.0)
    conjugacy_lambdas: tuple = (2.0, 5.0)  # PDE runs for n = 1, 2
    counterexample_deltas: tuple = (0.01, 0.02, 0.05)
    counterexample_Js: tuple = (3.0, 6.0, 10.0)
    model_samples: int = 20
    out_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidInputError("lambda must be positive")
        if self.K < 8 or self.K_check < 8:
            raise InvalidInputError("K must be at least 8")
        for name in ("tol_hyp", "step_tol", "r_capture", "dwell", "T_max", "departure",
                     "reclock_T", "diffusion_value", "cx_delta", "cx_J"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.diffusion not in PRESETS:
            raise InvalidInputError(f"unknown diffusion preset {self.diffusion!r}; use {PRESETS}")
        if self.tau_points < 2:
            raise InvalidInputError("tau_points must be at least 2")
        for name in ("count_probes", "conjugacy_lambdas", "counterexample_deltas",
                     "counterexample_Js"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    def spec(self, lam: float | None = None) -> ProblemSpec:
        lam = self.lam if lam is None else lam
        if self.diffusion == "counterexample":
            # several fixed points per branch; only the scanning commands handle that
            raise InvalidInputError(
                "the counterexample preset is only supported by 'equilibria' and 'counterexample'")
        if self.diffusion == "constant":
            return ProblemSpec(lam, a=ConstantDiffusion(self.diffusion_value))
        return ProblemSpec(lam, a=SaturatingDiffusion())

    def replace(self, **kw) -> RunConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


ALIASES = {"lambda": "lam"}
A_PARAMS = {"constant": {"value": "diffusion_value"},
            "default": {},
            "counterexample": {"delta": "cx_delta", "J": "cx_J"}}


def _flatten_model(model) -> dict:
    """``model: {lambda, f, a, a_params}`` section to flat RunConfig fields."""
    if not isinstance(model, dict):
        raise InvalidInputError("model section must be a mapping")
    unknown = set(model) - {"lambda", "f", "a", "a_params"}
    if unknown:
        raise InvalidInputError(f"unknown model keys: {sorted(unknown)}")
    if model.get("f", "cubic") != "cubic":
        raise InvalidInputError(f"only f = 'cubic' is supported, got {model['f']!r}")
    out = {}
    if "lambda" in model:
        out["lam"] = model["lambda"]
    a = str(model.get("a", "default")).removesuffix("_a")
    if a not in A_PARAMS:
        raise InvalidInputError(f"unknown diffusion preset {a!r}; use {PRESETS}")
    out["diffusion"] = a
    params = model.get("a_params") or {}
    bad = set(params) - set(A_PARAMS[a])
    if bad:
        raise InvalidInputError(f"unknown a_params for {a!r}: {sorted(bad)}")
    out.update({A_PARAMS[a][k]: v for k, v in params.items()})
    return out


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Read a YAML (or JSON, which YAML accepts) mapping of RunConfig fields.

    Flat keys and a nested ``model`` section are both accepted.
    """
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidInputError("config must be a mapping")
    if "model" in data:
        model = data.pop("model")
        data.update(_flatten_model(model))
    data = {ALIASES.get(k, k): v for k, v in data.items()}
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**data)
