"""Run records: everything needed to re-execute a command and compare."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Optional

VERSION = "0.1.0"


@dataclass
class RunRecord:
    """A command, its resolved options and every number it emitted.

    ``options`` holds the fully resolved option set (after config file and
    flags), so replaying does not depend on the environment apart from the
    thread count, which by construction does not change any output.
    """

    command: str
    options: dict
    outputs: dict
    wall_time: float = 0.0
    version: str = VERSION
    extras: dict = field(default_factory=dict)

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=True)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "options": self.options,
            "outputs": self.outputs,
            "wall_time": self.wall_time,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(data["command"], dict(data["options"]), dict(data["outputs"]),
                   float(data.get("wall_time", 0.0)), data.get("version", VERSION))

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "RunRecord":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def canonical(outputs: Any) -> str:
    """Serialization used for bit-exact comparison (floats via repr)."""
    return json.dumps(outputs, sort_keys=True, allow_nan=True)


def replay(record: RunRecord, workers: Optional[int] = None) -> RunRecord:
    """Re-run ``record`` (optionally with another thread count)."""
    from .cli import execute

    opts = dict(record.options)
    if workers is not None:
        opts["workers"] = workers
    t0 = time.perf_counter()
    outputs, _ = execute(record.command, opts)
    return RunRecord(record.command, opts, outputs, time.perf_counter() - t0)


def same_outputs(a: RunRecord, b: RunRecord) -> bool:
    return canonical(a.outputs) == canonical(b.outputs)
