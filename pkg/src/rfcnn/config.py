"""Flat ``key=value`` pipeline configuration.

Keys prefixed ``det_`` feed the detector (architecture and training),
``clf_`` the classifier, and the rest describe the dataset and evaluation.
A ``preset`` key (``desk`` or ``paper``) picks the starting values; every
other key in the file overrides the preset.
"""

from dataclasses import dataclass, fields, replace

from rfcnn.classifier import ClassifierConfig, TrainConfig, trace_shapes
from rfcnn.detection.model import DetectorConfig
from rfcnn.detection.train import DetectorTrainConfig
from rfcnn.errors import ConfigError
from rfcnn.synth.dataset import (
    DESK_N_TEST,
    DESK_N_TRAIN,
    PAPER_STRAB_FRACTION_TEST,
    PAPER_STRAB_FRACTION_TRAIN,
)


@dataclass(frozen=True)
class PipelineConfig:
    preset: str = "paper"
    seed: int = 0
    n_train: int = 3409
    n_test: int = 2276
    strab_fraction_train: float = PAPER_STRAB_FRACTION_TRAIN
    strab_fraction_test: float = PAPER_STRAB_FRACTION_TEST
    threshold: float = 0.5  # strabismus iff probability >= threshold
    match_iou: float = 0.5  # detector box replaces the annotation for classifier training above this IoU
    curve_sizes: tuple = (50, 100, 200, 341)
    detector: DetectorConfig = DetectorConfig()
    detector_train: DetectorTrainConfig = DetectorTrainConfig()
    classifier: ClassifierConfig = ClassifierConfig(input_side=224)
    classifier_train: TrainConfig = TrainConfig()

    def classifier_train_for(self):
        return replace(self.classifier_train, seed=self.seed, dropout=self.classifier.dropout)

    def detector_train_for(self):
        return replace(self.detector_train, seed=self.seed)


# Paper training setup; the detector's iteration count is not given there.
PRESETS = {
    "paper": {},
    "desk": {
        "n_train": DESK_N_TRAIN,
        "n_test": DESK_N_TEST,
        "det_lr": 0.001,
        "det_iterations": 3000,
        "clf_input_side": 64,
        "clf_iterations": 400,
    },
}
DEFAULT_PRESET = "desk"

_TOP = [f.name for f in fields(PipelineConfig) if f.name not in ("detector", "detector_train", "classifier", "classifier_train")]
_SECTIONS = (
    ("det_", "detector", DetectorConfig),
    ("det_", "detector_train", DetectorTrainConfig),
    ("clf_", "classifier", ClassifierConfig),
    ("clf_", "classifier_train", TrainConfig),
)


def _key_table():
    table = {name: (None, name) for name in _TOP}
    for prefix, section, cls in _SECTIONS:
        for f in fields(cls):
            if f.name == "seed":
                continue  # one seed drives everything
            key = prefix + f.name
            table.setdefault(key, [])
            if isinstance(table[key], tuple):
                raise AssertionError(f"config key {key} clashes with a top-level key")
            table[key].append((section, f.name))
    return table


KEYS = _key_table()


def _parse_value(key, text, default):
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            kind = type(default[0]) if default else float
            return tuple(kind(t) for t in items)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(default).__name__}") from None
    return text


def _format_value(value):
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_lines(text, origin="<config>"):
    """``key=value`` pairs from config text; ``#`` starts a comment."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _current(cfg, key):
    target = KEYS[key]
    if isinstance(target, tuple):
        return getattr(cfg, target[1])
    section, name = target[0]
    return getattr(getattr(cfg, section), name)


def _apply(cfg, key, value):
    target = KEYS[key]
    if isinstance(target, tuple):
        return replace(cfg, **{target[1]: value})
    updates = {}
    for section, name in target:
        updates[section] = replace(updates.get(section, getattr(cfg, section)), **{name: value})
    return replace(cfg, **updates)


def resolve(pairs, seed=None):
    """Build a PipelineConfig from raw string pairs (plus an optional seed override)."""
    preset = pairs.get("preset", DEFAULT_PRESET)
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cfg = PipelineConfig(preset=preset)
    merged = {k: _format_value(v) for k, v in PRESETS[preset].items()}
    merged.update({k: v for k, v in pairs.items() if k != "preset"})
    if seed is not None:
        merged["seed"] = str(seed)
    try:
        for key, text in merged.items():
            cfg = _apply(cfg, key, _parse_value(key, text, _current(cfg, key)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    trace_shapes(cfg.classifier)
    sizes = cfg.curve_sizes
    if not sizes or min(sizes) < 1 or len(set(sizes)) != len(sizes):
        raise ConfigError("curve_sizes must be distinct positive integers")
    return cfg


def load_config(path=None, seed=None):
    text = ""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return resolve(parse_lines(text, origin=str(path)), seed=seed)


def dump_config(cfg):
    """Every key with its resolved value, one ``key=value`` line each, sorted."""
    lines = [f"preset={cfg.preset}"]
    for key in sorted(KEYS):
        if key != "preset":
            lines.append(f"{key}={_format_value(_current(cfg, key))}")
    return "\n".join(lines) + "\n"
