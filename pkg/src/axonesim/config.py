"""Declarative run configuration, dotted-path overrides and manifests.

One JSON document describes one run.  Manifests embed the full canonical
config plus content hashes so any output can be re-produced byte for byte
from its manifest alone.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

from .params import PhysicalParams

VERSION = "0.1.0"

MODEL_KINDS = ("one_row", "two_row", "n_row")
ENGINE_KINDS = ("pde", "ode")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def default_config() -> dict:
    """Baseline two-row PDE run with the standard constant set."""
    kBT = 4.2668e-3
    return {
        "model": {"kind": "two_row"},
        "engine": {"kind": "pde", "J": 200, "dt": None, "cfl_fraction": 0.25},
        "params": {
            "ell": 10.0,
            "eta": 1.0e-7,
            "k_spring": 9.5e-5,
            "U": 10.0 * kBT,
            "kBT": kBT,
            "c": 1.0e3,
            "Omega0": 15.0 * kBT,
        },
        "delta": 0.1,
        "a1_scale": 1.0,
        "steps": None,
        "t_end": 0.4,
        "seed": 0,
        "x0": 0.01,
        "record_stride": 10,
        "output": "run",
    }


_VARIANT_BLOCKS = ("model", "engine")  # replaced wholesale, validated per kind


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if key in _VARIANT_BLOCKS and not path:
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = copy.deepcopy(value)
        elif isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def apply_override(config: dict, dotted: str, raw_value: str) -> None:
    """Set one leaf by dotted path; the value parses as JSON, else string."""
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    keys = dotted.split(".")
    node = config
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"no config section {dotted!r}")
        node = node[key]
    # leaves inside the variant blocks may be absent until validation
    if keys[-1] not in node and keys[0] not in _VARIANT_BLOCKS:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[keys[-1]] = value


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_of(obj) -> str:
    return "sha256:" + hashlib.sha256(canonical_json(obj).encode()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """Validated run description.

    Exactly one of steps / t_end is set; n_rows is present only for the
    n_row model; the ode engine applies to the two-row model only.
    """

    model_kind: str
    n_rows: int | None
    engine_kind: str
    engine: dict
    params: PhysicalParams
    delta: float
    a1_scale: float
    steps: int | None
    t_end: float | None
    seed: int
    x0: float
    record_stride: int
    output: str
    data: dict  # canonical config dict

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.data == other.data

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if "config" in raw and isinstance(raw["config"], dict):
            raw = raw["config"]  # accept a manifest document directly
        try:
            cfg = _merge(default_config(), raw)
        except ConfigError:
            raise
        model = cfg["model"]
        kind = model.get("kind")
        if kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {MODEL_KINDS}")
        if set(model) - {"kind", "n"}:
            raise ConfigError(f"unknown model keys {set(model) - {'kind', 'n'}}")
        n_rows = model.get("n")
        if kind == "n_row":
            if not isinstance(n_rows, int) or n_rows < 2:
                raise ConfigError("n_row model needs integer model.n >= 2")
        elif n_rows is not None:
            raise ConfigError("model.n only applies to the n_row model")
        engine = cfg["engine"]
        ekind = engine.get("kind")
        if ekind not in ENGINE_KINDS:
            raise ConfigError(f"engine.kind must be one of {ENGINE_KINDS}")
        if ekind == "ode":
            if kind != "two_row":
                raise ConfigError("the ode engine integrates the two-row model")
            if set(engine) - {"kind", "dt", "n_max"}:
                raise ConfigError("unknown ode engine keys "
                                  f"{set(engine) - {'kind', 'dt', 'n_max'}}")
            dt = engine.get("dt")
            n_max = engine.get("n_max", 5)
            engine = {"kind": "ode",
                      "dt": 1e-4 if dt is None else dt,
                      "n_max": n_max}
            if not engine["dt"] > 0:
                raise ConfigError("engine.dt must be positive")
            if not (isinstance(n_max, int) and n_max >= 1):
                raise ConfigError("engine.n_max must be an integer >= 1")
        else:
            if set(engine) - {"kind", "J", "dt", "cfl_fraction"}:
                raise ConfigError(
                    "unknown pde engine keys "
                    f"{set(engine) - {'kind', 'J', 'dt', 'cfl_fraction'}}")
            engine = {"kind": "pde",
                      "J": engine.get("J", 200),
                      "dt": engine.get("dt"),
                      "cfl_fraction": engine.get("cfl_fraction", 0.25)}
            if not isinstance(engine["J"], int) or engine["J"] < 8:
                raise ConfigError("engine.J must be an integer >= 8")
            if engine["dt"] is not None and not engine["dt"] > 0:
                raise ConfigError("engine.dt must be positive when given")
            if not 0.0 < engine["cfl_fraction"] <= 0.9:
                raise ConfigError("engine.cfl_fraction must lie in (0, 0.9]")
        delta = cfg["delta"]
        if not isinstance(delta, (int, float)) or delta <= -1.0:
            raise ConfigError("delta must be a number > -1")
        a1_scale = cfg["a1_scale"]
        if not isinstance(a1_scale, (int, float)) or a1_scale < 0.0:
            raise ConfigError("a1_scale must be a non-negative number")
        steps, t_end = cfg["steps"], cfg["t_end"]
        if (steps is None) == (t_end is None):
            raise ConfigError("exactly one of steps / t_end must be set")
        if steps is not None and (not isinstance(steps, int) or steps < 1):
            raise ConfigError("steps must be a positive integer")
        if t_end is not None and t_end <= 0:
            raise ConfigError("t_end must be positive")
        seed = cfg["seed"]
        if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        stride = cfg["record_stride"]
        if not isinstance(stride, int) or stride < 1:
            raise ConfigError("record_stride must be a positive integer")
        p = cfg["params"]
        try:
            params = PhysicalParams(
                ell=float(p["ell"]), eta=float(p["eta"]),
                k_spring=float(p["k_spring"]), U=float(p["U"]),
                kBT=float(p["kBT"]), c=float(p["c"]),
                Omega0=float(p["Omega0"]),
                Omega=float(p["Omega0"]) * (1.0 + float(delta)),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad params block: {exc}") from exc
        cfg["model"] = {"kind": kind, **({"n": n_rows} if n_rows else {})}
        cfg["engine"] = engine
        return cls(
            model_kind=kind, n_rows=n_rows, engine_kind=ekind, engine=engine,
            params=params, delta=float(delta), a1_scale=float(a1_scale),
            steps=steps, t_end=t_end, seed=seed, x0=float(cfg["x0"]),
            record_stride=stride, output=str(cfg["output"]), data=cfg,
        )

    def config_hash(self) -> str:
        return sha256_of(self.data)

    def params_hash(self) -> str:
        return sha256_of(self.data["params"])


def load_config(path: str | None, overrides: list[str] | None = None) -> RunConfig:
    """Config from a JSON file (or defaults) plus --set style overrides."""
    if path is None:
        raw = default_config()
    else:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    if "config" in raw and isinstance(raw.get("config"), dict):
        raw = raw["config"]
    merged = _merge(default_config(), raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, value = item.split("=", 1)
        apply_override(merged, key, value)
    return RunConfig.from_dict(merged)


def manifest_for(config: RunConfig, command: str, outputs: list[str],
                 truncated: bool = False, extra: dict | None = None) -> dict:
    doc = {
        "tool": "axonesim",
        "version": VERSION,
        "command": command,
        "config": config.data,
        "config_hash": config.config_hash(),
        "params_hash": config.params_hash(),
        "seed": config.seed,
        "outputs": outputs,
        "truncated": truncated,
    }
    if extra:
        doc.update(extra)
    return doc


def write_manifest(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
