"""Flat ``section.key = value`` configuration files.

Sections map onto the config dataclasses:

    solver.*  SolverConfig      renode.*  ReNodeConfig
    loss.*    LossConfig        train.*   TrainConfig (scalar fields)
    split.*   train_per_class, val_per_class, seed, runs

Blank lines and ``#`` comments are ignored. Unknown keys are errors so a
typo never silently falls back to a default.
"""

from dataclasses import dataclass, field, fields, replace

from rsgslm.dataset import SplitSpec, SynthSpec
from rsgslm.errors import ConfigError, DatasetError
from rsgslm.io import stable_hash
from rsgslm.objective import LossConfig
from rsgslm.renode import ReNodeConfig
from rsgslm.trainer import TrainConfig
from rsgslm.view_graph import SolverConfig

_NESTED = {"solver": SolverConfig, "renode": ReNodeConfig, "loss": LossConfig}
_TRAIN_SCALARS = tuple(f.name for f in fields(TrainConfig) if f.name not in _NESTED)
SYNTH_REQUIRED = ("n", "c", "views", "dims")
SYNTH_OPTIONAL = ("spread", "noise", "seed", "latent_dim")


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitSpec = field(default_factory=lambda: SplitSpec(train_per_class=5, val_per_class=5, seed=0))
    runs: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("split.runs must be >= 1")


def parse_lines(text, source="<config>"):
    """Return an ordered {key: raw string} mapping; duplicate keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _coerce(key, raw, like):
    if isinstance(like, bool):
        lowered = raw.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {type(like).__name__}, got {raw!r}") from None
    return raw


def build_config(entries):
    """Turn a raw key/value mapping into a validated RunConfig."""
    base = RunConfig()
    nested = {name: {} for name in _NESTED}
    train, split = {}, {}
    runs = base.runs
    for key, raw in entries.items():
        section, _, name = key.partition(".")
        if section in _NESTED:
            defaults = _NESTED[section]()
            if name not in {f.name for f in fields(defaults)}:
                raise ConfigError(f"unknown config key {key!r}")
            nested[section][name] = _coerce(key, raw, getattr(defaults, name))
        elif section == "train" and name in _TRAIN_SCALARS:
            train[name] = _coerce(key, raw, getattr(base.train, name))
        elif section == "split" and name in ("train_per_class", "val_per_class", "seed"):
            split[name] = _coerce(key, raw, 0)
        elif key == "split.runs":
            runs = _coerce(key, raw, 0)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    # the pseudo-label schedule runs over the training horizon unless set apart
    if "max_epochs" in train and "max_epochs" not in nested["loss"]:
        nested["loss"]["max_epochs"] = train["max_epochs"]
    try:
        parts = {name: replace(getattr(base.train, name), **nested[name]) for name in _NESTED}
        cfg = replace(base.train, **train, **parts)
        split_spec = replace(base.split, **split)
    except DatasetError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(train=cfg, split=split_spec, runs=runs)


def load_config(path=None, overrides=()):
    """Read a config file (optional) and apply ``key=value`` overrides on top."""
    entries = {}
    if path is not None:
        try:
            text = open(path).read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        entries.update(parse_lines(text, str(path)))
    for item in overrides:
        entries.update(parse_lines(item, "--set"))
    return build_config(entries)


def flatten(run_config):
    """Every key with its effective value, including defaults."""
    flat = {}
    train = run_config.train
    for name in _TRAIN_SCALARS:
        flat[f"train.{name}"] = getattr(train, name)
    for section in _NESTED:
        part = getattr(train, section)
        for f in fields(part):
            flat[f"{section}.{f.name}"] = getattr(part, f.name)
    for name in ("train_per_class", "val_per_class", "seed"):
        flat[f"split.{name}"] = getattr(run_config.split, name)
    flat["split.runs"] = run_config.runs
    return flat


def dump_config(run_config):
    return "".join(f"{key} = {value}\n" for key, value in sorted(flatten(run_config).items()))


def config_hash(run_config, keys=None):
    """Order-independent hash of the effective config (optionally a subset of keys)."""
    flat = flatten(run_config)
    if keys is not None:
        flat = {k: v for k, v in flat.items() if k.split(".", 1)[0] in keys or k in keys}
    return stable_hash(flat)


def _floats(key, raw):
    try:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {raw!r}") from None


def load_synth_spec(path):
    """Parse a generator spec file: n, c, views, dims (comma list), optional spread/noise/seed/latent_dim.

    A single spread or noise value is broadcast to every view.
    """
    try:
        text = open(path).read()
    except OSError as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from exc
    entries = parse_lines(text, str(path))
    for key in entries:
        if key not in SYNTH_REQUIRED + SYNTH_OPTIONAL:
            raise ConfigError(f"unknown spec key {key!r}")
    for key in SYNTH_REQUIRED:
        if key not in entries:
            raise ConfigError(f"spec is missing required field {key!r}")
    ints = {}
    for key in ("n", "c", "views", "seed", "latent_dim"):
        if key in entries:
            ints[key] = _coerce(key, entries[key], 0)
    V = ints["views"]
    dims = tuple(int(d) for d in _floats("dims", entries["dims"]))
    per_view = {}
    for key in ("spread", "noise"):
        if key in entries:
            values = _floats(key, entries[key])
            per_view[key] = values * V if len(values) == 1 else values
    try:
        return SynthSpec(n=ints["n"], c=ints["c"], num_views=V, dims=dims, seed=ints.get("seed", 0),
                         latent_dim=ints.get("latent_dim"), **per_view)
    except DatasetError as exc:
        raise ConfigError(str(exc)) from exc
