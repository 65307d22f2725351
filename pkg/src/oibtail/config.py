"""Run configuration for the pipeline, loadable from a JSON file."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from .distfit import BinSpec, Estimator, Model
from .errors import ParameterError
from .imbalance import SeriesKind
from .synth import GenConfig
from .tailfit import DEFAULT_MAX_CANDIDATES, DEFAULT_MIN_TAIL, DEFAULT_N_BOOT, DEFAULT_SIGNIFICANCE

ENV_OUTPUT_DIR = "OIBTAIL_OUTPUT_DIR"
ENV_WORKERS = "OIBTAIL_WORKERS"
DEFAULT_TIMESCALES = (5, 10, 15, 30, 60, 120, 240)


@dataclass(frozen=True)
class TailSettings:
    min_tail: int = DEFAULT_MIN_TAIL
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    n_boot: int = DEFAULT_N_BOOT
    significance: float = DEFAULT_SIGNIFICANCE
    strict: bool = False


def _default_output_dir():
    return os.environ.get(ENV_OUTPUT_DIR, "out")


def _default_workers():
    return int(os.environ.get(ENV_WORKERS, "1"))


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple = ()
    calendar: str | None = None
    synth: GenConfig | None = None
    instruments: tuple | None = None
    kinds: tuple = ("NUM", "VOL")
    timescales: tuple = DEFAULT_TIMESCALES
    estimators: tuple = ("NLSE", "MLE")
    models: tuple = ("Student", "QExp")
    bins: BinSpec = field(default_factory=BinSpec)
    tail: TailSettings = field(default_factory=TailSettings)
    seed: int = 0
    output_dir: str = field(default_factory=_default_output_dir)
    workers: int = field(default_factory=_default_workers)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("inputs", tuple(str(p) for p in self.inputs))
        if self.instruments is not None:
            set_("instruments", tuple(str(i) for i in self.instruments))
        set_("kinds", tuple(SeriesKind(k).value for k in self.kinds))
        set_("estimators", tuple(Estimator(e).value for e in self.estimators))
        set_("models", tuple(Model(m).value for m in self.models))
        set_("timescales", tuple(int(t) for t in self.timescales))
        if isinstance(self.synth, dict):
            set_("synth", GenConfig(**self.synth))
        if isinstance(self.bins, dict):
            b = dict(self.bins)
            if b.get("edges") is not None:
                b["edges"] = tuple(b["edges"])
            set_("bins", BinSpec(**b))
        if isinstance(self.tail, dict):
            set_("tail", TailSettings(**self.tail))
        for dt in self.timescales:
            if dt <= 0 or 240 % dt:
                raise ParameterError(f"timescale {dt} does not divide 240")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path) as fh:
            data = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def with_overrides(self, **overrides):
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def analysis_dict(self):
        """Everything that determines results; excludes output_dir and workers."""
        return {
            "inputs": list(self.inputs),
            "calendar": self.calendar,
            "synth": self.synth.as_dict() if self.synth else None,
            "instruments": list(self.instruments) if self.instruments is not None else None,
            "kinds": list(self.kinds),
            "timescales": list(self.timescales),
            "estimators": list(self.estimators),
            "models": list(self.models),
            "bins": {**asdict(self.bins), "edges": list(self.bins.edges) if self.bins.edges else None},
            "tail": asdict(self.tail),
            "seed": self.seed,
        }
