import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import polars as pl

logger = logging.getLogger(__name__)

FEFFERMAN_LOCAL = "FEFFERMAN_LOCAL"
ODD_DIM_NILPOTENT = "ODD_DIM_NILPOTENT"
HYPOTHESES_FAIL = "HYPOTHESES_FAIL"
INCONCLUSIVE_SIGN = "INCONCLUSIVE_SIGN"

HYPOTHESIS = "hypothesis"
IDENTITY = "identity"
CONSEQUENCE = "consequence"
DIAGNOSTIC = "diagnostic"


@dataclass
class CheckRecord:
    name: str
    residual: float
    threshold: float
    passed: bool
    anchor: str
    role: str = IDENTITY

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "threshold": self.threshold,
            "passed": self.passed,
            "anchor": self.anchor,
            "role": self.role,
        }

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status:4} {self.name:28} {self.residual:10.3e} <= {self.threshold:9.2e}  [{self.role}] {self.anchor}"


@dataclass
class LambdaRecord:
    values: list
    mean: float
    spread: float
    sign: str

    @classmethod
    def from_samples(cls, values, zero_band: float):
        values = [float(value) for value in values]
        mean = float(np.mean(values))
        spread = float(np.max(values) - np.min(values))
        if mean < -zero_band:
            sign = "negative"
        elif mean > zero_band:
            sign = "positive"
        else:
            sign = "zero"
        return cls(values=values, mean=mean, spread=spread, sign=sign)

    def to_dict(self) -> dict:
        return {"values": self.values, "mean": self.mean, "spread": self.spread, "sign": self.sign}


@dataclass
class CheckReport:
    name: str
    dimension: int
    verdict: str
    checks: list
    lambda_record: LambdaRecord
    tool_version: str
    input_hash: str
    seed: int
    samples: int
    points: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def check(self, name: str) -> Optional[CheckRecord]:
        for record in self.checks:
            if record.name == name:
                return record
        return None

    def failed(self, role: str = None) -> list:
        return [record for record in self.checks if not record.passed and (role is None or record.role == role)]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "verdict": self.verdict,
            "checks": [record.to_dict() for record in self.checks],
            "lambda": self.lambda_record.to_dict(),
            "tool_version": self.tool_version,
            "input_hash": self.input_hash,
            "seed": self.seed,
            "samples": self.samples,
            "details": self.details,
        }

    def to_json(self) -> str:
        return encode_json(self.to_dict())

    def lambda_table(self) -> pl.DataFrame:
        """One row per sample point: its coordinates and the value of λ there."""
        columns = {"sample": list(range(len(self.lambda_record.values)))}
        if self.points:
            for axis in range(len(self.points[0])):
                columns[f"x{axis}"] = [float(point[axis]) for point in self.points]
        columns["lambda"] = self.lambda_record.values
        return pl.DataFrame(columns)

    def format_text(self) -> str:
        lines = [f"geometry {self.name} (n = {self.dimension}, {self.samples} samples, seed {self.seed})"]
        lines.extend(record.line() for record in self.checks)
        record = self.lambda_record
        lines.append(f"lambda mean {record.mean:.12g} spread {record.spread:.3e} sign {record.sign}")
        lines.append(f"verdict {self.verdict}")
        return "\n".join(lines)


def encode_json(value, indent: int = 2, level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits; NaN and infinities become null."""
    pad = " " * (indent * (level + 1))
    closing = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{_encode_string(str(key))}: {encode_json(item, indent, level + 1)}" for key, item in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + closing + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}{encode_json(item, indent, level + 1)}" for item in value]
        return "[\n" + ",\n".join(items) + "\n" + closing + "]"
    if isinstance(value, np.ndarray):
        return encode_json(value.tolist(), indent, level)
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isnan(number) or math.isinf(number):
            return "null"
        return format(number, ".17g")
    if isinstance(value, complex):
        return encode_json([value.real, value.imag], indent, level)
    return _encode_string(str(value))


def _encode_string(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)
