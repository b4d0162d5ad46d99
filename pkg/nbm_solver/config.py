"""
Run configuration: a flat ``key = value`` text format.

Lines are ``key = value`` pairs, ``#`` starts a comment and blank lines are
ignored. Integer lists (layer widths, convergence levels) are comma
separated. Empty ``layers_*``/``activation_*`` values select the problem's
default network. ``format_config`` writes every key in declaration order,
so ``parse_config(format_config(cfg)) == cfg``.
"""

from dataclasses import dataclass, fields, replace
from typing import Tuple

from .errors import InvalidConfigError
from .levelset import INTERP_MODES
from .network import ACTIVATIONS
from .problems import PROBLEMS
from .regex import match_line, match_value
from .trainer import SWITCHING_MODES, TrainConfig

APPROACH_CHOICES = ("regression", "neural", "pinn")
BIAS_CHOICES = ("slow", "fast")
SAMPLING_CHOICES = ("auto", "uniform", "cloud")


@dataclass(frozen=True)
class RunConfig:
    problem: str = "bulk"
    sampling: str = "auto"
    resolution: int = 16
    levels: Tuple[int, ...] = (8, 16)
    n_plus: int = 2000
    n_minus: int = 100
    n_boundary: int = 1000
    n_interface: int = 200
    voxel: float = 0.00244
    levelset_file: str = ""
    interp_mode: str = "trilinear"
    layers_minus: Tuple[int, ...] = ()
    layers_plus: Tuple[int, ...] = ()
    activation_minus: str = ""
    activation_plus: str = ""
    omega0: float = 1.0
    epochs: int = 1000
    batch_size: int = 0
    lr0: float = 1e-2
    decay_rate: float = 0.975
    decay_scale: float = 100.0
    clip_norm: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    approach: str = "regression"
    bias: str = "slow"
    switching: str = "off"
    tau: int = 4
    multires_levels: int = 1
    workers: int = 0
    seed: int = 0
    eval_resolution: int = 128
    log_every: int = 100
    checkpoint_every: int = 0
    out: str = "nbm-run"


FIELD_TYPES = {f.name: type(f.default) for f in fields(RunConfig)}


def _parse_value(key, text, lineno):
    kind = FIELD_TYPES[key]
    if kind is int:
        if not match_value(text, "INTEGER"):
            raise InvalidConfigError(f"line {lineno}: {key} expects an integer, got {text!r}")
        return int(text)
    if kind is float:
        if not match_value(text, "FLOAT"):
            raise InvalidConfigError(f"line {lineno}: {key} expects a number, got {text!r}")
        return float(text)
    if kind is tuple:
        if not match_value(text, "INT_LIST"):
            raise InvalidConfigError(f"line {lineno}: {key} expects comma-separated integers, got {text!r}")
        return tuple(int(v) for v in text.split(",")) if text else ()
    return text


def _format_value(value):
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, base: RunConfig = None) -> RunConfig:
    """
    Parse configuration text on top of ``base`` (the defaults if omitted).

    Raises
    ------
    InvalidConfigError
        On malformed lines, unknown or repeated keys and values of the wrong
        type. Semantic checks are left to :func:`validate_config`.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        groups, line_type = match_line(line)
        if line_type in ("BLANK_LINE", "COMMENT_LINE"):
            continue
        if line_type != "CONFIG_LINE":
            raise InvalidConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, text_value = groups
        if key not in FIELD_TYPES:
            raise InvalidConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise InvalidConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, text_value, lineno)
    return replace(base or RunConfig(), **values)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n" for f in fields(cfg))


def read_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


def write_config(path, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_config(cfg))


def _check_choice(name, value, choices):
    if value not in choices:
        raise InvalidConfigError(f"{name} must be one of {', '.join(choices)}; got {value!r}")


def _check_layers(name, layers):
    if not layers:
        return
    if len(layers) < 2 or layers[0] != 3 or layers[-1] != 1 or min(layers) < 1:
        raise InvalidConfigError(f"{name} must start with 3, end with 1 and be positive; got {layers}")


def validate_config(cfg: RunConfig) -> RunConfig:
    """
    Check a configuration for consistency.

    Returns
    -------
    RunConfig
        The same configuration, for chaining.

    Raises
    ------
    InvalidConfigError
        If any value is out of range or names an unknown option.
    """
    _check_choice("problem", cfg.problem, tuple(PROBLEMS))
    _check_choice("sampling", cfg.sampling, SAMPLING_CHOICES)
    _check_choice("interp_mode", cfg.interp_mode, INTERP_MODES)
    _check_choice("approach", cfg.approach, APPROACH_CHOICES)
    _check_choice("bias", cfg.bias, BIAS_CHOICES)
    _check_choice("switching", cfg.switching, SWITCHING_MODES)
    for name in ("activation_minus", "activation_plus"):
        if getattr(cfg, name):
            _check_choice(name, getattr(cfg, name), ACTIVATIONS)
    _check_layers("layers_minus", cfg.layers_minus)
    _check_layers("layers_plus", cfg.layers_plus)

    minimums = {
        "resolution": 2, "eval_resolution": 2, "tau": 1, "multires_levels": 1,
        "epochs": 0, "batch_size": 0, "workers": 0, "log_every": 0, "checkpoint_every": 0,
        "n_plus": 0, "n_minus": 0, "n_boundary": 0, "n_interface": 0,
    }
    for name, minimum in minimums.items():
        if getattr(cfg, name) < minimum:
            raise InvalidConfigError(f"{name} must be at least {minimum}; got {getattr(cfg, name)}")
    for name in ("voxel", "lr0", "decay_scale", "clip_norm", "adam_eps", "omega0"):
        if not getattr(cfg, name) > 0:
            raise InvalidConfigError(f"{name} must be positive; got {getattr(cfg, name)}")
    if not 0 < cfg.decay_rate < 1:
        raise InvalidConfigError(f"decay_rate must lie in (0, 1); got {cfg.decay_rate}")
    for name in ("adam_beta1", "adam_beta2"):
        if not 0 <= getattr(cfg, name) < 1:
            raise InvalidConfigError(f"{name} must lie in [0, 1); got {getattr(cfg, name)}")
    if any(n < 2 for n in cfg.levels):
        raise InvalidConfigError(f"levels must be at least 2 each; got {cfg.levels}")
    if cfg.levelset_file and cfg.problem != "star":
        raise InvalidConfigError("levelset_file replaces the star interface and needs problem = star")
    if cfg.sampling == "cloud" and cfg.n_plus + cfg.n_minus + cfg.n_boundary + cfg.n_interface == 0:
        raise InvalidConfigError("point-cloud sampling needs at least one point")
    return cfg


def to_train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        lr0=cfg.lr0,
        decay_rate=cfg.decay_rate,
        decay_scale=cfg.decay_scale,
        clip_norm=cfg.clip_norm,
        adam_betas=(cfg.adam_beta1, cfg.adam_beta2),
        adam_eps=cfg.adam_eps,
        switching=cfg.switching,
        tau=cfg.tau,
        approach=cfg.approach,
        bias=f"bias_{cfg.bias}",
        multires_levels=cfg.multires_levels,
        workers=cfg.workers,
        seed=cfg.seed,
        log_every=cfg.log_every,
    )
