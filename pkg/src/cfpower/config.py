"""Experiment configuration: YAML files, validation and built-in presets."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import yaml

from .asymmetric import A3_ASYM_MAX_STATES, NlpConfig
from .continuous import ContinuousChannelModel, ShapingConfig
from .errors import ArgumentError, ConfigError
from .rates import DiscreteChannelModel
from .symmetric import A3_MAX_STATES, BisectionConfig

POLICY_KINDS = ("symmetric", "asymmetric", "continuous")
ALGORITHMS = {
    "symmetric": ("A0", "A1", "A2", "A3"),
    "asymmetric": ("A0", "A1", "A2", "A3"),
    "continuous": ("A0", "A1", "A2"),
}


@dataclass(frozen=True)
class ModelSpec:
    """Channel description: discrete marginals per user, or the folded Gaussian."""

    kind: str = "discrete"
    values: tuple = ()
    probs: tuple = ()
    nodes: int = 128
    box: tuple = (0.0, 5.0)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    a: tuple
    pbar_grid: tuple
    algorithms: tuple = ("A0", "A1", "A2", "A3")
    policy_kind: str = "symmetric"
    bisection: BisectionConfig = field(default_factory=BisectionConfig)
    nlp: NlpConfig = field(default_factory=NlpConfig)
    shaping: ShapingConfig = field(default_factory=ShapingConfig)
    seed: int = 0
    output: Optional[str] = None
    name: str = "custom"
    workers: int = 1

    def nlp_config(self) -> NlpConfig:
        return dataclasses.replace(self.nlp, seed=self.seed)


@lru_cache(maxsize=16)
def build_model(spec: ModelSpec, L: int):
    if spec.kind == "gaussian":
        return ContinuousChannelModel.gaussian(L=L, box=tuple(spec.box), nodes=spec.nodes)
    return DiscreteChannelModel.from_marginals(spec.values, spec.probs)


def _grid(start, stop, step):
    n = int(round((stop - start) / step))
    return tuple(float(np.round(start + k * step, 10)) for k in range(n + 1))


# per-user marginals, identical for both users (Rayleigh-derived, rounded to 4 places)
EXAMPLE2_PROBS = (0.1175, 0.2760, 0.6065)
EXAMPLE3_VALUES = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0)
EXAMPLE3_PROBS = (0.0308, 0.0867, 0.1277, 0.1483, 0.1487, 0.1332, 0.1893, 0.0914, 0.0328, 0.0111)

PRESETS = {
    "example1": lambda: ExperimentConfig(
        name="example1",
        model=ModelSpec(values=((1.0, 3.0), (0.5, 2.0)), probs=((0.6, 0.4), (0.8, 0.2))),
        a=(1, 1),
        pbar_grid=_grid(0.1, 5.0, 0.1),
    ),
    "example2": lambda: ExperimentConfig(
        name="example2",
        model=ModelSpec(values=((0.5, 1.0, 2.5),) * 2, probs=(EXAMPLE2_PROBS,) * 2),
        a=(1, 1),
        pbar_grid=_grid(0.1, 5.0, 0.1),
    ),
    "example3": lambda: ExperimentConfig(
        name="example3",
        model=ModelSpec(values=(EXAMPLE3_VALUES,) * 2, probs=(EXAMPLE3_PROBS,) * 2),
        a=(1, 1),
        pbar_grid=_grid(0.1, 13.0, 0.1),
        algorithms=("A0", "A1", "A2"),
    ),
    "remark": lambda: ExperimentConfig(
        name="remark",
        model=ModelSpec(values=((0.5, 1.0),) * 2, probs=((0.5, 0.5),) * 2),
        a=(1, 1),
        pbar_grid=(2.0,),
        policy_kind="asymmetric",
    ),
    "gaussian": lambda: ExperimentConfig(
        name="gaussian",
        model=ModelSpec(kind="gaussian"),
        a=(1, 1),
        pbar_grid=_grid(0.5, 4.0, 0.5),
        algorithms=("A0", "A1", "A2"),
        policy_kind="continuous",
    ),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# -- parsing -----------------------------------------------------------------

class _Locator:
    """Maps key paths of a YAML document to 1-based line numbers."""

    def __init__(self, source, node):
        self.source = source
        self.lines = {}
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = path + (key.value,)
                self.lines[sub] = key.start_mark.line + 1
                self._walk(value, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                self._walk(item, path + (i,))

    def error(self, path, message):
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        key = ".".join(str(p) for p in path) or "<root>"
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: {key}: {message}")


def _number(loc, path, value, kind=float):
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise loc.error(path, f"expected a number, got {value!r}") from None
    if kind is int and float(value) != out:
        raise loc.error(path, f"expected an integer, got {value!r}")
    return out


def _numbers(loc, path, value, kind=float):
    if not isinstance(value, (list, tuple)) or not value:
        raise loc.error(path, "expected a nonempty list")
    return tuple(_number(loc, path + (i,), v, kind) for i, v in enumerate(value))


def _sub_config(loc, path, raw, cls, defaults=None):
    if raw is None:
        return defaults if defaults is not None else cls()
    if not isinstance(raw, dict):
        raise loc.error(path, "expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in names:
            raise loc.error(path + (key,), f"unknown key; expected one of {sorted(names)}")
        kind = int if names[key].type in ("int", int) else float
        kwargs[key] = _number(loc, path + (key,), value, kind)
    try:
        return dataclasses.replace(defaults, **kwargs) if defaults is not None else cls(**kwargs)
    except (ArgumentError, TypeError) as exc:
        raise loc.error(path, str(exc)) from None


def _parse_model(loc, raw):
    path = ("model",)
    if isinstance(raw, str):
        if raw in PRESETS:
            return preset(raw).model
        raise loc.error(path, f"unknown preset model {raw!r}")
    if not isinstance(raw, dict):
        raise loc.error(path, "expected a mapping or a preset name")
    if "preset" in raw:
        return preset(raw["preset"]).model
    kind = raw.get("kind", "discrete")
    if kind == "gaussian":
        nodes = _number(loc, path + ("nodes",), raw.get("nodes", 128), int)
        box = _numbers(loc, path + ("box",), raw.get("box", [0.0, 5.0]))
        if len(box) != 2:
            raise loc.error(path + ("box",), "expected [lo, hi]")
        return ModelSpec(kind="gaussian", nodes=nodes, box=box)
    if kind != "discrete":
        raise loc.error(path + ("kind",), f"unknown model kind {kind!r}")
    users = raw.get("users")
    if not isinstance(users, list) or len(users) < 2:
        raise loc.error(path + ("users",), "expected a list of at least two users")
    values, probs = [], []
    for i, user in enumerate(users):
        upath = path + ("users", i)
        if not isinstance(user, dict):
            raise loc.error(upath, "expected a mapping with 'values' and 'probs'")
        v = _numbers(loc, upath + ("values",), user.get("values"))
        p = _numbers(loc, upath + ("probs",), user.get("probs"))
        if len(v) != len(p):
            raise loc.error(upath, f"{len(v)} values but {len(p)} probabilities")
        if abs(sum(p) - 1.0) > 1e-9:
            raise loc.error(upath + ("probs",), f"probabilities sum to {sum(p):.12g}, not 1")
        if any(x < 0 for x in v):
            raise loc.error(upath + ("values",), "channel gains must be non-negative")
        if any(x <= 0 for x in p):
            raise loc.error(upath + ("probs",), "probabilities must be positive")
        values.append(v)
        probs.append(p)
    return ModelSpec(values=tuple(values), probs=tuple(probs))


KNOWN_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def parse_config(raw, loc: _Locator) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise loc.error((), "top level must be a mapping")
    base = preset(raw["preset"]) if "preset" in raw else None
    unknown = set(raw) - KNOWN_KEYS - {"preset"}
    if unknown:
        raise loc.error((sorted(unknown)[0],), f"unknown key; expected one of {sorted(KNOWN_KEYS)}")

    def pick(key, default=None):
        if key in raw:
            return raw[key]
        return getattr(base, key) if base is not None else default

    model = _parse_model(loc, raw["model"]) if "model" in raw else (base.model if base else None)
    if model is None:
        raise loc.error(("model",), "missing")
    if pick("a") is None:
        raise loc.error(("a",), "missing")
    a = _numbers(loc, ("a",), list(pick("a")), int)
    if pick("pbar_grid") is None:
        raise loc.error(("pbar_grid",), "missing")
    grid_raw = pick("pbar_grid")
    if isinstance(grid_raw, dict):
        try:
            grid = _grid(float(grid_raw["start"]), float(grid_raw["stop"]), float(grid_raw["step"]))
        except (KeyError, TypeError, ValueError):
            raise loc.error(("pbar_grid",), "range form needs numeric start, stop and step") from None
    else:
        grid = _numbers(loc, ("pbar_grid",), list(grid_raw))
    algorithms = pick("algorithms", ("A0", "A1", "A2", "A3"))
    if not isinstance(algorithms, (list, tuple)):
        raise loc.error(("algorithms",), "expected a list")
    cfg = ExperimentConfig(
        model=model,
        a=a,
        pbar_grid=grid,
        algorithms=tuple(str(x) for x in algorithms),
        policy_kind=str(pick("policy_kind", "symmetric")),
        bisection=_sub_config(loc, ("bisection",), raw.get("bisection"), BisectionConfig,
                              base.bisection if base else None),
        nlp=_sub_config(loc, ("nlp",), raw.get("nlp"), NlpConfig, base.nlp if base else None),
        shaping=_sub_config(loc, ("shaping",), raw.get("shaping"), ShapingConfig,
                            base.shaping if base else None),
        seed=_number(loc, ("seed",), pick("seed", 0), int),
        output=pick("output"),
        name=str(pick("name", "custom")),
        workers=_number(loc, ("workers",), pick("workers", 1), int),
    )
    validate(cfg, loc)
    return cfg


def validate(cfg: ExperimentConfig, loc: Optional[_Locator] = None) -> ExperimentConfig:
    loc = loc or _Locator("<config>", None)
    if cfg.policy_kind not in POLICY_KINDS:
        raise loc.error(("policy_kind",), f"expected one of {POLICY_KINDS}")
    if (cfg.model.kind == "gaussian") != (cfg.policy_kind == "continuous"):
        raise loc.error(("policy_kind",), "continuous policies go with the gaussian model and only with it")
    if len(cfg.a) < 2 or not any(cfg.a):
        raise loc.error(("a",), "need at least two coefficients, not all zero")
    if cfg.model.kind == "discrete" and len(cfg.model.values) != len(cfg.a):
        raise loc.error(("a",), f"{len(cfg.a)} coefficients for {len(cfg.model.values)} users")
    grid = np.asarray(cfg.pbar_grid, dtype=float)
    if grid.size == 0:
        raise loc.error(("pbar_grid",), "must be nonempty")
    if np.any(grid <= 0):
        raise loc.error(("pbar_grid",), "budgets must be positive")
    if np.any(np.diff(grid) <= 0):
        raise loc.error(("pbar_grid",), "must be strictly increasing")
    if not cfg.algorithms:
        raise loc.error(("algorithms",), "must name at least one algorithm")
    allowed = ALGORITHMS[cfg.policy_kind]
    for i, alg in enumerate(cfg.algorithms):
        if alg not in allowed:
            raise loc.error(("algorithms", i), f"{alg!r} not available for {cfg.policy_kind} policies; "
                                               f"choose from {allowed}")
    if len(set(cfg.algorithms)) != len(cfg.algorithms):
        raise loc.error(("algorithms",), "duplicate algorithm")
    if "A3" in cfg.algorithms and cfg.model.kind == "discrete":
        M = int(np.prod([len(v) for v in cfg.model.values]))
        cap = A3_MAX_STATES if cfg.policy_kind == "symmetric" else A3_ASYM_MAX_STATES
        if M > cap:
            raise loc.error(("algorithms",), f"A3 needs M <= {cap} for {cfg.policy_kind} policies, "
                                             f"model has M={M}")
    if cfg.model.kind == "discrete":
        try:
            DiscreteChannelModel.from_marginals(cfg.model.values, cfg.model.probs)
        except ArgumentError as exc:
            raise loc.error(("model",), str(exc)) from None
    if cfg.workers < 1:
        raise loc.error(("workers",), "must be at least 1")
    if cfg.seed < 0 or cfg.seed >= 2 ** 64:
        raise loc.error(("seed",), "must be an unsigned 64-bit integer")
    return cfg


def loads_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: {getattr(exc, 'problem', None) or exc}") from None
    return parse_config(raw, _Locator(source, node))


def load_config(path) -> ExperimentConfig:
    """Read a YAML config; a bare preset name (no such file) loads that preset."""
    path = os.fspath(path)
    if not os.path.exists(path):
        if path in PRESETS:
            return preset(path)
        raise ConfigError(f"{path}: no such file or preset")
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read(), source=path)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    if cfg.model.kind == "gaussian":
        model = {"kind": "gaussian", "nodes": cfg.model.nodes, "box": list(cfg.model.box)}
    else:
        model = {
            "kind": "discrete",
            "users": [{"values": list(v), "probs": list(p)} for v, p in zip(cfg.model.values, cfg.model.probs)],
        }
    return {
        "name": cfg.name,
        "model": model,
        "a": list(cfg.a),
        "pbar_grid": list(cfg.pbar_grid),
        "algorithms": list(cfg.algorithms),
        "policy_kind": cfg.policy_kind,
        "seed": cfg.seed,
        "output": cfg.output,
        "workers": cfg.workers,
        "bisection": dataclasses.asdict(cfg.bisection),
        "nlp": {k: v for k, v in dataclasses.asdict(cfg.nlp).items() if k != "seed"},
        "shaping": dataclasses.asdict(cfg.shaping),
    }


def dumps_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)


def write_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_config(cfg))
