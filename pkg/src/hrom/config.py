"""Experiment configuration.

Line-oriented `key = value` files with [burgers], [training], [online] and
an optional [sweep] section. Unknown sections or keys are errors: a typo in
a tolerance should fail loudly, not run the default.
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .adapt import AdaptConfig
from .fom import BurgersConfig


class ConfigError(ValueError):
    """Malformed experiment configuration."""


@dataclass(frozen=True)
class ExperimentSpec:
    burgers: BurgersConfig
    training_inputs: tuple
    training_steps: int
    online_mu: tuple
    p0: int | None          # None means no truncation (full snapshot rank)
    adapt: AdaptConfig
    adaptive: bool
    output_dir: Path
    seed: int = 0
    sweep_fom_tols: tuple = field(default=())


_BURGERS_KEYS = {"n_cells", "domain_length", "dt", "n_steps", "source_coeff"}
_TRAINING_KEYS = {"inputs", "n_steps", "p0", "k_means", "seed"}
_ONLINE_KEYS = {"mu", "adaptive", "rom_tol", "fom_tol", "reset_freq",
                "partition_fraction", "refine_variant", "max_refine_rounds",
                "output_dir"}
_SWEEP_KEYS = {"fom_tols"}


def _parse_pair(text, where):
    toks = text.split()
    if len(toks) != 2:
        raise ConfigError(f"{where}: expected two numbers, got {text!r}")
    try:
        return float(toks[0]), float(toks[1])
    except ValueError as err:
        raise ConfigError(f"{where}: {err}") from None


def _parse_bool(text, where):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _get(section, key, cast, default, where):
    if key not in section:
        if default is _REQUIRED:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    try:
        return cast(section[key])
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(f"{where}.{key}: {err}") from None


_REQUIRED = object()


def load_spec(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        read = parser.read(path)
    except configparser.Error as err:
        raise ConfigError(f"{path}: {err}") from None
    if not read:
        raise ConfigError(f"{path}: not found or unreadable")

    known = {"burgers": _BURGERS_KEYS, "training": _TRAINING_KEYS,
             "online": _ONLINE_KEYS, "sweep": _SWEEP_KEYS}
    for sec in parser.sections():
        if sec not in known:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        extra = set(parser[sec]) - known[sec]
        if extra:
            raise ConfigError(f"{path}: unknown key(s) in [{sec}]: {sorted(extra)}")
    for sec in ("burgers", "training", "online"):
        if sec not in parser:
            raise ConfigError(f"{path}: missing section [{sec}]")

    b = parser["burgers"]
    burgers = BurgersConfig(
        n_cells=_get(b, "n_cells", int, 250, "burgers"),
        domain_length=_get(b, "domain_length", float, 100.0, "burgers"),
        dt=_get(b, "dt", float, 0.05, "burgers"),
        n_steps=_get(b, "n_steps", int, 1000, "burgers"),
        source_coeff=_get(b, "source_coeff", float, 0.02, "burgers"),
    )

    t = parser["training"]
    raw_inputs = _get(t, "inputs", str, _REQUIRED, "training")
    pairs = [p.strip() for p in raw_inputs.split(",") if p.strip()]
    if not pairs:
        raise ConfigError("training.inputs: need at least one mu pair")
    training_inputs = tuple(_parse_pair(p, "training.inputs") for p in pairs)
    training_steps = _get(t, "n_steps", int, _REQUIRED, "training")
    if not 1 <= training_steps <= burgers.n_steps:
        raise ConfigError(
            f"training.n_steps must lie in [1, {burgers.n_steps}], "
            f"got {training_steps}")
    raw_p0 = _get(t, "p0", str, _REQUIRED, "training").strip()
    if raw_p0.lower() == "full":
        p0 = None
    else:
        try:
            p0 = int(raw_p0)
        except ValueError:
            raise ConfigError(f"training.p0: expected an int or 'full', "
                              f"got {raw_p0!r}") from None
        if p0 < 1:
            raise ConfigError("training.p0 must be >= 1")
    k_means = _get(t, "k_means", int, 10, "training")
    if k_means < 2:
        raise ConfigError("training.k_means must be >= 2")
    seed = _get(t, "seed", int, 0, "training")

    o = parser["online"]
    online_mu = _parse_pair(_get(o, "mu", str, _REQUIRED, "online"), "online.mu")
    adaptive = _get(o, "adaptive", lambda s: _parse_bool(s, "online.adaptive"),
                    True, "online")
    try:
        adapt = AdaptConfig(
            rom_tol=_get(o, "rom_tol", float, 5e-3, "online"),
            fom_tol=_get(o, "fom_tol", float, 0.05, "online"),
            reset_freq=_get(o, "reset_freq", int, 50, "online"),
            k_means=k_means,
            partition_fraction=_get(o, "partition_fraction", float, 0.5, "online"),
            max_refine_rounds=_get(o, "max_refine_rounds", int, 50, "online"),
            refine_variant=_get(o, "refine_variant", str, "child_grouping",
                                "online").strip(),
        )
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None
    output_dir = Path(_get(o, "output_dir", str, "out", "online"))

    sweep_tols = ()
    if "sweep" in parser:
        raw = _get(parser["sweep"], "fom_tols", str, _REQUIRED, "sweep")
        try:
            sweep_tols = tuple(float(tok) for tok in raw.split())
        except ValueError as err:
            raise ConfigError(f"sweep.fom_tols: {err}") from None
        if any(tol <= 0 for tol in sweep_tols):
            raise ConfigError("sweep.fom_tols must be positive")

    return ExperimentSpec(
        burgers=burgers,
        training_inputs=training_inputs,
        training_steps=training_steps,
        online_mu=online_mu,
        p0=p0,
        adapt=adapt,
        adaptive=adaptive,
        output_dir=output_dir,
        seed=seed,
        sweep_fom_tols=sweep_tols,
    )
