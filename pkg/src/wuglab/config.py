"""Experiment configuration: a key = value text file plus CLI overrides."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data import FREQ_MODES
from .errors import ValidationError
from .model import HyperParams

_HP_KEYS = {f.name for f in fields(HyperParams)}
_INT_KEYS = {"samples", "workers", "accuracy_every"}
_LIST_KEYS = {"seeds", "epoch_checkpoints"}
_PATH_KEYS = {"corpus", "nonce", "out_dir"}


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: Path
    nonce: Path
    out_dir: Path
    hp: HyperParams = field(default_factory=HyperParams)
    seeds: tuple[int, ...] = (1,)
    epoch_checkpoints: tuple[int, ...] = ()
    freq_mode: str = "type"
    samples: int = 100
    workers: int = 1
    accuracy_every: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ValidationError("seed list must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValidationError(f"duplicate seeds: {list(self.seeds)}")
        if self.freq_mode not in FREQ_MODES:
            raise ValidationError(f"unknown freq mode {self.freq_mode!r}")
        checkpoints = self.epoch_checkpoints or (self.hp.epochs,)
        if list(checkpoints) != sorted(set(checkpoints)):
            raise ValidationError("epoch checkpoints must be strictly increasing")
        if checkpoints[0] < 1 or checkpoints[-1] > self.hp.epochs:
            raise ValidationError(
                f"epoch checkpoints must lie in [1, {self.hp.epochs}]")
        if self.samples < 1 or self.workers < 1 or self.accuracy_every < 1:
            raise ValidationError("samples, workers, accuracy_every must be >= 1")
        object.__setattr__(self, "epoch_checkpoints", tuple(checkpoints))

    @property
    def final_epoch(self) -> int:
        return self.epoch_checkpoints[-1]

    def canonical_text(self) -> str:
        lines = [f"corpus = {self.corpus}", f"nonce = {self.nonce}"]
        for f in fields(HyperParams):
            lines.append(f"{f.name} = {getattr(self.hp, f.name)}")
        lines.append("seeds = " + ",".join(str(s) for s in self.seeds))
        lines.append("epoch_checkpoints = "
                     + ",".join(str(e) for e in self.epoch_checkpoints))
        lines.append(f"freq_mode = {self.freq_mode}")
        lines.append(f"samples = {self.samples}")
        lines.append(f"accuracy_every = {self.accuracy_every}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        # workers and out_dir excluded: they never change results.
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:12]

    def write(self, path) -> None:
        Path(path).write_text(self.canonical_text(), encoding="utf-8")


def _parse_int_list(value: str) -> tuple[int, ...]:
    value = value.strip()
    if not value:
        return ()
    try:
        return tuple(int(v.strip()) for v in value.split(","))
    except ValueError:
        raise ValidationError(f"bad integer list: {value!r}") from None


def parse_config_text(text: str, base_dir: Path | None = None) -> dict:
    """Parse `key = value` lines (# starts a comment) into raw settings."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValidationError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key in raw:
            raise ValidationError(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return _typed_settings(raw, base_dir)


def _typed_settings(raw: dict[str, str], base_dir: Path | None) -> dict:
    settings: dict = {}
    hp_kwargs: dict = {}
    for key, value in raw.items():
        if key in _PATH_KEYS:
            p = Path(value)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            settings[key] = p
        elif key in _LIST_KEYS:
            settings[key] = _parse_int_list(value)
        elif key in _INT_KEYS:
            settings[key] = int(value)
        elif key == "freq_mode":
            settings[key] = value
        elif key in _HP_KEYS:
            hp_kwargs[key] = (float(value) if key in ("dropout_p", "opt_rho",
                                                      "opt_eps")
                              else int(value))
        else:
            raise ValidationError(f"unknown config key {key!r}")
    if hp_kwargs:
        settings["_hp_kwargs"] = hp_kwargs
    return settings


def load_config(path, **overrides) -> ExperimentConfig:
    """Build a config from a file; keyword overrides win over file values.

    Overrides use the same keys as the file (seeds/epoch_checkpoints as
    tuples, hp fields flat, paths as str/Path).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e}") from None
    settings = parse_config_text(text, base_dir=path.parent)
    hp_kwargs = settings.pop("_hp_kwargs", {})
    for key, value in overrides.items():
        if value is None:
            continue
        if key in _HP_KEYS:
            hp_kwargs[key] = value
        elif key in _PATH_KEYS:
            settings[key] = Path(value)
        else:
            settings[key] = value
    for required in ("corpus", "nonce", "out_dir"):
        if required not in settings:
            raise ValidationError(f"config is missing {required!r}")
    settings["hp"] = HyperParams(**hp_kwargs)
    return ExperimentConfig(**settings)
