"""Report assembly and serialization.

Reports are plain dicts: a header with the resolved configuration, the
package version, wall-clock and per-stage timings, and a command-specific
payload. JSON output is sorted and indented so identical runs serialize
identically (timing fields aside); CSV output carries data only.
"""

from __future__ import annotations

import dataclasses
import json
import time

import numpy as np
import pandas as pd

from . import __version__
from .kernels import BACKEND


class StageTimer:
    """Accumulates named wall-clock stages.

    with timer.stage("fit"): ...
    """

    def __init__(self):
        self.t0 = time.perf_counter()
        self.stages = {}

    def stage(self, name):
        return _Stage(self, name)

    @property
    def wall_clock(self):
        return time.perf_counter() - self.t0


class _Stage:
    def __init__(self, timer, name):
        self.timer = timer
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = time.perf_counter() - self.start
        self.timer.stages[self.name] = self.timer.stages.get(self.name, 0.0) + elapsed
        return False


def sanitize(obj):
    """Recursively convert an object into JSON-serializable primitives.
    Tuple dict keys become ':'-joined strings; arrays become lists."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj if obj == obj else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return sanitize(float(obj))
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return sanitize(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        out = {}
        for key, value in obj.items():
            if isinstance(key, tuple):
                key = ":".join(str(part) for part in key)
            out[str(key)] = sanitize(value)
        return out
    if isinstance(obj, (list, tuple, set)):
        return [sanitize(v) for v in obj]
    return str(obj)


def build_report(command, config, payload, timer=None):
    doc = {
        "command": command,
        "version": f"shiftboot {__version__}",
        "kernel_backend": BACKEND,
        "config": sanitize(config),
    }
    if timer is not None:
        doc["wall_clock_s"] = round(timer.wall_clock, 6)
        doc["timings_s"] = {k: round(v, 6) for k, v in timer.stages.items()}
    doc.update(sanitize(payload))
    return doc


def dump_json(doc, path=None):
    text = json.dumps(sanitize(doc), indent=2, sort_keys=True)
    if path is None:
        return text + "\n"
    with open(path, "w") as fh:
        fh.write(text + "\n")
    return None


def write_coverage_csv(report, path):
    """One CSV row per method cell, mirroring the coverage table layout."""
    pd.DataFrame(report.rows()).to_csv(path, index=False)


def summarize_replicates(reps):
    reps = np.asarray(reps, dtype=np.float64)
    if reps.size == 0:
        return {"count": 0}
    return {
        "count": int(reps.size),
        "mean": float(reps.mean()),
        "sd": float(reps.std(ddof=1)) if reps.size > 1 else 0.0,
        "min": float(reps.min()),
        "max": float(reps.max()),
    }
