"""Plain-text ``key = value`` run configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

OUT_DIR_ENV = "RDDI_OUT_DIR"


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(t) for t in text.split(",")) if text else ()


def _ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(t) for t in text.split(",")) if text else ()


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    # geometry
    n_atoms: int = 32
    axis: tuple[float, ...] = (1.0, 0.0, 0.0)
    dipole: tuple[float, ...] = (0.0, 0.0, 1.0)
    # spectrum scan and dataset range
    spacing_min: float = 0.1
    spacing_max: float = 1.0
    spacing_points: int = 91
    count: int = 20000
    data_seed: int = 0
    # split and training
    train_fraction: float = 0.9
    split_seed: int = 0
    init_seed: int = 0
    shuffle_seed: int = 0
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    # evaluation and attribution
    gate_min_spacing: float = 0.15
    attr_spacings: tuple[float, ...] = (0.25, 0.5, 0.75)
    targets: tuple[int, ...] = ()  # 1-based; empty means the crossover triple
    ig_steps: int = 1000
    # files
    out_dir: str = "out"
    dataset: str = ""  # default <out_dir>/dataset.bin
    checkpoint: str = ""  # default <out_dir>/model.ckpt

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if not 0 < self.spacing_min <= self.spacing_max:
            raise ValueError("need 0 < spacing_min <= spacing_max")
        if self.spacing_points < 1 or self.count < 1 or self.ig_steps < 1:
            raise ValueError("spacing_points, count and ig_steps must be >= 1")
        if len(self.axis) != 3 or len(self.dipole) != 3:
            raise ValueError("axis and dipole must be 3-vectors")
        if any(not 1 <= t <= self.n_atoms for t in self.targets):
            raise ValueError(f"targets must lie in 1..{self.n_atoms}")

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    @property
    def dataset_path(self) -> Path:
        return Path(self.dataset) if self.dataset else self.out_path / "dataset.bin"

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else self.out_path / "model.ckpt"

    def dumps(self) -> str:
        lines = ["# resolved run configuration"]
        lines += [f"{f.name} = {_fmt(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())


_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "tuple[float, ...]": _floats,
    "tuple[int, ...]": _ints,
}


def field_types() -> dict[str, str]:
    return {f.name: f.type for f in fields(RunConfig)}


def parse_value(key: str, text: str):
    types = field_types()
    if key not in types:
        raise KeyError(f"unknown configuration key {key!r}")
    try:
        return _PARSERS[types[key]](text.strip())
    except ValueError as exc:
        raise ValueError(f"bad value for {key!r}: {text!r} ({exc})") from None


def parse_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = parse_value(key, value)
        except KeyError as exc:
            raise KeyError(f"{source}:{lineno}: {exc.args[0]}") from None
    return values


def resolve(config_file=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then ``$RDDI_OUT_DIR``, then the config file, then explicit overrides."""
    values = {}
    if os.environ.get(OUT_DIR_ENV):
        values["out_dir"] = os.environ[OUT_DIR_ENV]
    if config_file is not None:
        values.update(parse_text(Path(config_file).read_text(), str(config_file)))
    for key, value in (overrides or {}).items():
        if key not in field_types():
            raise KeyError(f"unknown configuration key {key!r}")
        values[key] = value
    return RunConfig(**values)
