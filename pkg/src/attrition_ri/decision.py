"""Decision records returned by every inference route."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional


@dataclass
class KDiagnostic:
    """Per-cardinality result: ``k`` always-reporters in the table."""

    k: int
    p_heuristic: Optional[float] = None
    p_upper: Optional[float] = None
    certified: bool = True
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"k": self.k, "p_heuristic": self.p_heuristic,
               "p_upper": self.p_upper, "certified": self.certified}
        out.update(self.extra)
        return out


@dataclass
class Decision:
    reject: bool
    mode: str
    kind: str
    alpha: float
    beta: float
    worst_p_lower: Optional[float]
    worst_p_upper: Optional[float]
    per_k: list
    seed: Optional[int] = None
    runtime_ms: float = 0.0
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "kind": self.kind,
            "alpha": self.alpha,
            "beta": self.beta,
            "reject": bool(self.reject),
            "worst_p_lower": self.worst_p_lower,
            "worst_p_upper": self.worst_p_upper,
            "per_k": [d.to_json() for d in self.per_k],
            "seed": self.seed,
            "runtime_ms": self.runtime_ms,
            "config": dict(self.config),
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Decision":
        per_k = []
        for row in data.get("per_k", []):
            row = dict(row)
            base = {key: row.pop(key) for key in ("k", "p_heuristic", "p_upper", "certified")}
            per_k.append(KDiagnostic(**base, extra=row))
        return cls(
            reject=bool(data["reject"]), mode=data["mode"], kind=data["kind"],
            alpha=data["alpha"], beta=data["beta"],
            worst_p_lower=data.get("worst_p_lower"), worst_p_upper=data.get("worst_p_upper"),
            per_k=per_k, seed=data.get("seed"), runtime_ms=data.get("runtime_ms", 0.0),
            config=dict(data.get("config", {})), notes=list(data.get("notes", [])),
        )

    def as_dict(self) -> dict:
        return asdict(self)
