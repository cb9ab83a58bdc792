"""Experiment configuration: a TOML key tree with complete defaults.

Every SNR and threshold is written in dB in the file and converted to
linear units only when the link objects are built. Unknown keys, wrong
types and out-of-range values raise :class:`ConfigError` naming the dotted
key path.
"""

from __future__ import annotations

import copy
import hashlib
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXPERIMENTS = ("fig2", "fig4", "fig5", "train", "evaluate")
PROFILES = ("desk", "full")
PROFILE_TRIALS = {"desk": 100_000, "full": 1_000_000}
PROFILE_EPISODES = {"desk": 200, "full": 1000}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Field:
    default: Any
    kind: str
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _prob(x):
    return 0 <= x <= 1


def _f(default, check=None, rule=""):
    return Field(default, "float", check, rule)


def _i(default, check=None, rule=""):
    return Field(default, "int", check, rule)


SCHEMA: dict[str, Any] = {
    "experiment": Field("fig4", "str", lambda v: v in EXPERIMENTS, f"one of {EXPERIMENTS}"),
    "seed": _i(0, _nonneg, ">= 0"),
    "profile": Field("desk", "str", lambda v: v in PROFILES, f"one of {PROFILES}"),
    "mc": {
        "n_trials": _i(0, _nonneg, ">= 0 (0 selects the profile default)"),
        "n_workers": _i(1, _pos, ">= 1"),
        "batch_size": _i(50_000, _pos, ">= 1"),
    },
    "fso": {
        "wavelength_nm": _f(1550.0, lambda v: 100 < v < 10_000, "in (100, 10000)"),
        "cn2": _f(1e-13, _pos, "> 0"),
        "distance_m": _f(500.0, _pos, "> 0"),
        "thresholds_db": Field([7.0, 10.0], "list[float]", lambda v: len(v) > 0, "non-empty"),
    },
    "rf": {
        "n_elements": Field([0, 16, 64], "list[int]", lambda v: len(v) > 0 and all(n >= 0 for n in v),
                            "every entry >= 0"),
        "gain_tx_db": _f(44.0),
        "gain_rx_db": _f(44.0),
        "dist_sd_m": _f(500.0, _pos, "> 0"),
        "dist_sr_m": _f(450.0, _pos, "> 0"),
        "dist_rd_m": _f(60.0, _pos, "> 0"),
        "mean_snr_db": _f(38.0),
        "threshold_db": _f(3.0),
    },
    "uwoc": {
        "n_elements": Field([16, 32, 64, 128], "list[int]", lambda v: len(v) > 0 and all(n >= 1 for n in v),
                            "every entry >= 1"),
        "extinction_per_m": _f(0.05, _nonneg, ">= 0"),
        "dist_sr_m": _f(40.0, _pos, "> 0"),
        "dist_rd_m": _f(40.0, _pos, "> 0"),
        "wavelength_nm": _f(532.0, _pos, "> 0"),
        "threshold_db": _f(15.0),
        "beam_waist_m": _f(0.01, _pos, "> 0"),
        "aperture_m": _f(0.05, _pos, "> 0"),
        "jitter_elev_mrad": _f(2.0, _nonneg, ">= 0"),
        "jitter_azim_mrad": _f(1.5, _nonneg, ">= 0"),
        "turbulence": Field("weak", "str"),
        "turbulence_presets": Field({"weak": 0.2, "strong": 0.6}, "dict[float]",
                                    lambda d: len(d) > 0 and all(v > 0 for v in d.values()),
                                    "non-empty, every Rytov variance > 0"),
    },
    "fig2": {
        "snr_start_db": _f(0.0),
        "snr_stop_db": _f(32.0),
        "points": _i(17, lambda v: v >= 2, ">= 2"),
        "turbulence": Field(["weak", "strong"], "list[str]", lambda v: len(v) > 0, "non-empty"),
        "monte_carlo": Field(True, "bool"),
    },
    "fig4": {
        "snr_start_db": _f(0.0),
        "snr_stop_db": _f(30.0),
        "points": _i(10, lambda v: v >= 2, ">= 2"),
        "monte_carlo": Field(True, "bool"),
    },
    "fig5": {
        "snr_start_db": _f(0.0),
        "snr_stop_db": _f(100.0),
        "points": _i(21, lambda v: v >= 2, ">= 2"),
        "n_elements": Field([16, 64], "list[int]", lambda v: len(v) > 0 and all(n >= 1 for n in v),
                            "non-empty, every entry >= 1"),
        "uwoc_snr_offset_db": _f(0.0),
        "fso_distance_m": _f(1000.0, _pos, "> 0"),
        "rf_dist_sd_m": _f(1000.0, _pos, "> 0"),
        "rf_dist_sr_m": _f(960.0, _pos, "> 0"),
        "rf_dist_rd_m": _f(70.0, _pos, "> 0"),
        "uwoc_dist_sr_m": _f(50.0, _pos, "> 0"),
        "uwoc_dist_rd_m": _f(50.0, _pos, "> 0"),
        "direct_uwoc_distance_m": _f(120.0, _pos, "> 0"),
        "monte_carlo": Field(True, "bool"),
    },
    "drl": {
        "n_elements": _i(32, _pos, ">= 1"),
        "train_snr_db": _f(33.0),
        "snr_threshold_db": _f(15.0),
        "n_episodes": _i(0, _nonneg, ">= 0 (0 selects the profile default)"),
        "steps_per_episode": _i(100, _pos, ">= 1"),
        "discount": _f(0.99, lambda v: 0 <= v < 1, "in [0, 1)"),
        "polyak": _f(0.005, lambda v: 0 < v <= 1, "in (0, 1]"),
        "policy_delay": _i(2, _pos, ">= 1"),
        "explore_std": _f(0.1, _nonneg, ">= 0"),
        "explore_clip": _f(0.5, _nonneg, ">= 0"),
        "target_noise_std": _f(0.2, _nonneg, ">= 0"),
        "target_noise_clip": _f(0.5, _nonneg, ">= 0"),
        "actor_lr": _f(1e-4, _nonneg, ">= 0"),
        "critic_lr": _f(1e-3, _nonneg, ">= 0"),
        "batch_size": _i(64, _pos, ">= 1"),
        "hidden": Field([256, 256], "list[int]", lambda v: len(v) > 0 and all(h >= 1 for h in v),
                        "non-empty, every entry >= 1"),
        "buffer_size": _i(100_000, _pos, ">= 1"),
        "bits": _i(3, lambda v: 1 <= v <= 16, "in [1, 16]"),
        "reward_weight": _f(0.7, _prob, "in [0, 1]"),
        "phase_penalty": _f(1e-3, _nonneg, ">= 0"),
        "fbl_channel_uses": _i(256, _pos, ">= 1"),
        "fbl_info_bits": _i(128, _pos, ">= 1"),
        "fbl_target_error": _f(1e-5, lambda v: 0 < v < 1, "in (0, 1)"),
        "csi_correlation": _f(0.95, _prob, "in [0, 1]"),
        "beta_min": _f(0.72, _prob, "in [0, 1]"),
        "amplitude_exponent": _f(1.6, _pos, "> 0"),
        "amplitude_offset_rad": _f(0.43 * math.pi),
    },
    "evaluate": {
        "snr_start_db": _f(20.0),
        "snr_stop_db": _f(50.0),
        "points": _i(11, lambda v: v >= 2, ">= 2"),
        "checkpoint_dir": Field("", "str"),
    },
}


def _default_tree(schema):
    return {k: (_default_tree(v) if isinstance(v, dict) else copy.deepcopy(v.default)) for k, v in schema.items()}


def _coerce(path: str, value, spec: Field):
    kind = spec.kind

    def scalar(v, k, where):
        if k == "float":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(where, f"expected a number, got {type(v).__name__}")
            v = float(v)
            if not math.isfinite(v):
                raise ConfigError(where, "must be finite")
            return v
        if k == "int":
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(where, f"expected an integer, got {type(v).__name__}")
            return v
        if k == "str":
            if not isinstance(v, str):
                raise ConfigError(where, f"expected a string, got {type(v).__name__}")
            return v
        if k == "bool":
            if not isinstance(v, bool):
                raise ConfigError(where, f"expected true/false, got {type(v).__name__}")
            return v
        raise AssertionError(k)

    if kind.startswith("list["):
        if kind == "list[int]" and isinstance(value, int) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        inner = kind[5:-1]
        out = [scalar(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    elif kind.startswith("dict["):
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected a table, got {type(value).__name__}")
        inner = kind[5:-1]
        out = {k: scalar(v, inner, f"{path}.{k}") for k, v in value.items()}
    else:
        out = scalar(value, kind, path)
    if spec.check is not None and not spec.check(out):
        raise ConfigError(path, f"value {out!r} out of range (must be {spec.rule})")
    return out


def _merge(schema, tree, raw, prefix=""):
    if not isinstance(raw, dict):
        raise ConfigError(prefix.rstrip(".") or "<root>", "expected a table")
    for key, value in raw.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(path, "unknown key")
        spec = schema[key]
        if isinstance(spec, dict):
            _merge(spec, tree[key], value, path + ".")
        else:
            tree[key] = _coerce(path, value, spec)


@dataclass
class ExperimentConfig:
    """Fully defaulted, validated key tree (see :data:`SCHEMA`)."""

    tree: dict

    def __getitem__(self, dotted: str):
        node = self.tree
        for part in dotted.split("."):
            node = node[part]
        return node

    @property
    def experiment(self) -> str:
        return self.tree["experiment"]

    @property
    def seed(self) -> int:
        return self.tree["seed"]

    @property
    def profile(self) -> str:
        return self.tree["profile"]

    def n_trials(self) -> int:
        return self["mc.n_trials"] or PROFILE_TRIALS[self.profile]

    def n_episodes(self) -> int:
        return self["drl.n_episodes"] or PROFILE_EPISODES[self.profile]

    def with_overrides(self, **top) -> "ExperimentConfig":
        raw = copy.deepcopy(self.tree)
        raw.update({k: v for k, v in top.items() if v is not None})
        return from_dict(raw)

    def dumps(self) -> str:
        return tomli_w.dumps(self.tree)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()


def _cross_checks(tree):
    presets = tree["uwoc"]["turbulence_presets"]
    if tree["uwoc"]["turbulence"] not in presets:
        raise ConfigError("uwoc.turbulence", f"unknown preset {tree['uwoc']['turbulence']!r}")
    for i, name in enumerate(tree["fig2"]["turbulence"]):
        if name not in presets:
            raise ConfigError(f"fig2.turbulence[{i}]", f"unknown preset {name!r}")


def from_dict(raw: dict) -> ExperimentConfig:
    tree = _default_tree(SCHEMA)
    _merge(SCHEMA, tree, raw)
    _cross_checks(tree)
    return ExperimentConfig(tree)


def loads(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"not valid TOML: {exc}") from exc
    return from_dict(raw)


def load_config(path) -> ExperimentConfig:
    return loads(Path(path).read_text(encoding="utf-8"))


def save_config(cfg: ExperimentConfig, path):
    Path(path).write_text(cfg.dumps(), encoding="utf-8")
