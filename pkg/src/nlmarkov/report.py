"""JSON-serializable analysis reports emitted by the command line."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .hypermatrix import StochasticHypermatrix


@dataclass
class AnalysisReport:
    command: str
    operator: dict | None = None
    verdicts: dict = field(default_factory=dict)
    certificates: list = field(default_factory=list)
    oracle: dict | None = None
    seed: int | None = None
    timings: dict | None = None

    @staticmethod
    def digest_of(p: StochasticHypermatrix) -> dict:
        return {"m": p.m, "l": p.l, "sha256": p.digest()}

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> AnalysisReport:
        return cls(**data)

    @classmethod
    def loads(cls, text: str) -> AnalysisReport:
        return cls.from_json(json.loads(text))

    def render_text(self) -> str:
        lines = [f"command     : {self.command}"]
        if self.operator:
            op = self.operator
            lines.append(f"operator    : m={op['m']} l={op['l']} sha256={op['sha256'][:16]}")
        if self.seed is not None:
            lines.append(f"seed        : {self.seed}")
        width = max((len(k) for k in self.verdicts), default=0)
        for key, value in self.verdicts.items():
            lines.append(f"{key.ljust(width)} : {_fmt(value)}")
        for cert in self.certificates:
            lines.append(f"certificate : {_fmt(cert)}")
        if self.oracle:
            for key, value in self.oracle.items():
                if key == "failures":
                    lines.append(f"oracle.{key} : {len(value)} target(s)")
                    for fail in value[:10]:
                        lines.append(f"  target={_fmt(fail['target'])} residual={fail['residual']:.3g}")
                else:
                    lines.append(f"oracle.{key} : {_fmt(value)}")
        if self.timings:
            for key, value in self.timings.items():
                lines.append(f"time.{key} : {value:.3f}s")
        return "\n".join(lines)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, list) and value and all(isinstance(v, float) for v in value):
        return "(" + ", ".join(f"{v:.6g}" for v in value) + ")"
    if isinstance(value, dict):
        return " ".join(f"{k}={_fmt(v)}" for k, v in value.items())
    return str(value)
