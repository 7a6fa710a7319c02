"""Generation results and their JSON-lines serialisation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

METHOD_IDS = ("scfe", "scfe_cf", "cw", "cw_cf", "deepfool", "cchvae", "nae")


@dataclass(frozen=True)
class GenerationResult:
    x: np.ndarray
    x_prime: np.ndarray
    method: str
    success: bool
    iterations: int | None = None
    radius: float | None = None
    params: dict = field(default_factory=dict)
    message: str | None = None
    instance_id: int | None = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        xp = np.array(self.x_prime, dtype=float)
        if x.shape != xp.shape:
            raise ValueError("x and x_prime must have the same shape")
        x.setflags(write=False)
        xp.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_prime", xp)
        object.__setattr__(self, "success", bool(self.success))
        if self.instance_id is not None:
            object.__setattr__(self, "instance_id", int(self.instance_id))
        if self.iterations is not None:
            object.__setattr__(self, "iterations", int(self.iterations))
        if self.radius is not None:
            object.__setattr__(self, "radius", float(self.radius))

    @property
    def delta(self) -> np.ndarray:
        return self.x_prime - self.x

    def norms(self) -> dict:
        d = self.delta
        return {
            "l1": float(np.sum(np.abs(d))),
            "l2": float(np.sqrt(d @ d)),
            "linf": float(np.max(np.abs(d))) if d.size else 0.0,
        }

    def to_record(self, **extra) -> dict:
        rec = {
            "instance_id": self.instance_id,
            "method": self.method,
            "success": self.success,
            "x": [float(v) for v in self.x],
            "x_prime": [float(v) for v in self.x_prime],
            "delta": [float(v) for v in self.delta],
            "norms": self.norms(),
            "iterations": self.iterations,
            "radius": self.radius,
            "params": _jsonable(self.params),
            "message": self.message,
        }
        rec.update(extra)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "GenerationResult":
        return cls(
            x=np.asarray(rec["x"], dtype=float),
            x_prime=np.asarray(rec["x_prime"], dtype=float),
            method=rec["method"],
            success=rec["success"],
            iterations=rec.get("iterations"),
            radius=rec.get("radius"),
            params=rec.get("params") or {},
            message=rec.get("message"),
            instance_id=rec.get("instance_id"),
        )

    def with_id(self, instance_id: int) -> "GenerationResult":
        return replace(self, instance_id=int(instance_id))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and obj == float("inf"):
        return "inf"
    return obj


def write_jsonl(path, results, **extra) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_record(**extra), sort_keys=True))
            fh.write("\n")


def read_jsonl(path) -> list[GenerationResult]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(GenerationResult.from_record(json.loads(line)))
    return out
