"""Run manifests: a plain-text ``key = value`` file that pins every input of a run.

Resolution order is defaults, then the manifest file, then command-line
overrides. The resolved manifest is rendered canonically (schema order, one
key per line) and its sha256 is quoted in every output of the run.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {v!r}")


def _csv(v: str) -> list[str]:
    return [p.strip() for p in v.split(",") if p.strip()]


def _floats(v: str) -> list[float]:
    return [float(p) for p in _csv(v)]


def _path(v: str) -> str:
    return v.strip()


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, list):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "seed": (int, 0),
    "mode": (str, "qubit"),
    "channel": (str, "bit_flip:0.01"),
    "corpus": (_path, ""),
    "dictionary": (_path, ""),
    "checkpoint": (_path, ""),
    "segment": (_bool, True),
    "max_unit": (int, 16),
    "post_decode": (str, "auto"),  # auto | none | wlrm | full
    "weights": (str, "ema"),  # ema | raw
    "threshold": (float, 0.5),
    "metrics": (_csv, ["ber", "wer", "ser"]),
    "replicates": (int, 10),
    "lambdas": (_floats, []),
    "modes": (_csv, ["classical", "qubit", "qudit4"]),
    "kinds": (_csv, ["bit_flip"]),
    "buckets": (_csv, ["1-4", "5-16", "17+"]),
    "synth_sentences": (int, 300),
    "train_copies": (int, 1),
    "epochs": (int, 10),
    "outer_iterations": (int, 1),
    "theta": (float, 0.5),
    "alpha": (float, 0.25),
    "gamma": (float, 2.0),
    "epsilon": (float, 1e-8),
    "lr": (float, 1e-3),
    "ema_decay": (float, 0.999),
    "batch_size": (int, 1),
    "d_model": (int, 64),
    "heads": (int, 4),
    "num_blocks": (int, 2),
    "ffn_dim": (int, 0),  # 0 means 4 * d_model
    "max_len": (int, 64),
}

PATH_KEYS = ("corpus", "dictionary", "checkpoint")
METRIC_NAMES = ("ber", "wer", "ser")


@dataclass
class Manifest:
    values: dict[str, Any]
    base_dir: Path

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def path(self, key: str) -> Path | None:
        v = self.values[key]
        if not v:
            return None
        p = Path(v)
        return p if p.is_absolute() else self.base_dir / p

    def render(self) -> str:
        lines = ["# qtp run manifest"]
        for key in SCHEMA:
            v = self.values[key]
            if key in PATH_KEYS and v:
                v = str(self.path(key))
            lines.append(f"{key} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.render().encode("utf-8")).hexdigest()

    def write(self, path: Path) -> str:
        path.write_text(self.render(), encoding="utf-8")
        return self.sha256()


def _set(values: dict, key: str, raw: str, where: str) -> None:
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown manifest key {key!r}")
    parser = SCHEMA[key][0]
    try:
        values[key] = parser(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from exc


def parse_manifest(text: str, source: str = "<manifest>") -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        _set(values, key.strip(), raw.strip(), f"{source}:{lineno}")
    return values


def load_manifest(path: str | Path | None, overrides: dict[str, str] | None = None) -> Manifest:
    """Defaults, then ``path`` (if any), then string ``overrides``."""
    values = {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in SCHEMA.items()}
    base = Path.cwd()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read manifest {p}: {exc.strerror}") from exc
        values.update(parse_manifest(text, str(p)))
        base = p.resolve().parent
    for key, raw in (overrides or {}).items():
        _set(values, key, raw, "command line")
    m = Manifest(values, base)
    _validate(m)
    return m


def _validate(m: Manifest) -> None:
    if m["post_decode"] not in ("auto", "none", "wlrm", "full"):
        raise ConfigError(f"post_decode must be auto, none, wlrm or full, got {m['post_decode']!r}")
    if m["weights"] not in ("ema", "raw"):
        raise ConfigError(f"weights must be ema or raw, got {m['weights']!r}")
    if m["replicates"] < 1:
        raise ConfigError("replicates must be >= 1")
    bad = set(m["metrics"]) - set(METRIC_NAMES)
    if bad:
        raise ConfigError(f"unknown metrics {sorted(bad)}; choose from {', '.join(METRIC_NAMES)}")
    for key in PATH_KEYS:
        p = m.path(key)
        if p is not None and not p.is_file():
            raise ConfigError(f"{key} file not found: {p}")
