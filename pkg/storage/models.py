from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from services.errors import ParameterError

if TYPE_CHECKING:
    from services.algebra import AlgebraicNumber


class Parity(str, enum.Enum):
    EVEN = "even"
    ODD = "odd"


class Ordering(str, enum.Enum):
    LT = "LT"
    EQ = "EQ"
    GT = "GT"


class Regime(str, enum.Enum):
    EVEN_INTERIOR = "EVEN_INTERIOR"
    EVEN_HALF = "EVEN_HALF"
    EVEN_INV_LAMBDA = "EVEN_INV_LAMBDA"
    ODD_LOW = "ODD_LOW"
    ODD_RHO = "ODD_RHO"
    ODD_HIGH = "ODD_HIGH"
    ODD_HALF = "ODD_HALF"
    ODD_INV_LAMBDA = "ODD_INV_LAMBDA"


class Experiment(str, enum.Enum):
    LENSTRA = "lenstra"
    THETA2D = "theta2d"
    EQUIDISTRIBUTION = "equidistribution"


class OutputFormat(str, enum.Enum):
    CSV = "csv"
    JSON = "json"


@dataclass(frozen=True)
class GroupIndex:
    q: int

    def __post_init__(self) -> None:
        if not isinstance(self.q, int) or self.q < 3:
            raise ParameterError(f"q должно быть целым ≥ 3, получено {self.q!r}")

    @property
    def parity(self) -> Parity:
        return Parity.EVEN if self.q % 2 == 0 else Parity.ODD

    @property
    def is_even(self) -> bool:
        return self.parity is Parity.EVEN

    @property
    def p(self) -> int:
        """q = 2p для чётного q"""
        if not self.is_even:
            raise ParameterError(f"p определено только для чётного q, q={self.q}")
        return self.q // 2

    @property
    def h(self) -> int:
        """q = 2h + 3 для нечётного q"""
        if self.is_even:
            raise ParameterError(f"h определено только для нечётного q, q={self.q}")
        return (self.q - 3) // 2


@dataclass(frozen=True)
class Digit:
    epsilon: int
    d: Optional[int]

    def __post_init__(self) -> None:
        if self.epsilon not in (-1, 0, 1):
            raise ParameterError(f"ε должно быть -1, 0 или +1: {self.epsilon}")
        if (self.epsilon == 0) != (self.d is None):
            raise ParameterError("ε = 0 тогда и только тогда, когда d = ∞")
        if self.d is not None and self.d < 1:
            raise ParameterError(f"d должно быть ≥ 1: {self.d}")

    @property
    def is_terminal(self) -> bool:
        return self.epsilon == 0

    def __str__(self) -> str:
        if self.is_terminal:
            return "(0:∞)"
        return f"({'+' if self.epsilon > 0 else '-'}1:{self.d})"


TERMINAL_DIGIT = Digit(0, None)


@dataclass(frozen=True)
class Expansion:
    digits: Tuple[Digit, ...]
    terminated: bool
    # орбита вошла в полосу |x| < 2^(-precision/2), а не в точный ноль
    approximate_zero: bool = False

    def __len__(self) -> int:
        return len(self.digits)

    def prefix(self, n: int) -> Tuple[Digit, ...]:
        return self.digits[:n]


@dataclass(frozen=True)
class ConvergentPair:
    n: int
    R: Any
    S: Any


@dataclass(frozen=True)
class Rectangle:
    """Прямоугольник [left, right) × [0, height] области Ω_α"""
    left: "AlgebraicNumber"
    right: "AlgebraicNumber"
    height: "AlgebraicNumber"
    label: str = ""


@dataclass(frozen=True)
class NatExtDomain:
    q: GroupIndex
    alpha: "AlgebraicNumber"
    regime: Regime
    rectangles: Tuple[Rectangle, ...]
    critical_digits: Dict[str, int] = field(default_factory=dict)
    # число пустых J_n, отброшенных при построении
    dropped: int = 0

    @property
    def left(self) -> "AlgebraicNumber":
        return self.rectangles[0].left

    @property
    def right(self) -> "AlgebraicNumber":
        return self.rectangles[-1].right


@dataclass
class ChainCheck:
    label: str
    relation: str
    outcome: Optional[Ordering]
    ok: bool
    lhs: float = 0.0
    rhs: float = 0.0
    # соотношение ссылается на несуществующие индексы (h = 0)
    skipped: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check": self.label,
            "relation": self.relation,
            "outcome": self.outcome.value if self.outcome else None,
            "ok": self.ok,
            "skipped": self.skipped,
            "lhs": self.lhs,
            "rhs": self.rhs,
        }


@dataclass(frozen=True)
class DomainMass:
    """Точное произведение ∏(1+bH)/(1+aH) и его логарифм"""
    argument: "AlgebraicNumber"
    value: Any


@dataclass(frozen=True)
class NormalizingConstant:
    argument: "AlgebraicNumber"
    value: Any
    formula: str
    trigonometric: Any


@dataclass
class EndpointOrbits:
    ell: List["AlgebraicNumber"]
    r: List["AlgebraicNumber"]
    digits_l: List[Digit]
    digits_r: List[Digit]
    meet_index: int
    closed_form_checks: List[ChainCheck] = field(default_factory=list)


@dataclass
class Certificate:
    q: int
    alpha: str
    regime: Regime
    checks: List[ChainCheck] = field(default_factory=list)
    critical_digits: Dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(check.ok for check in self.checks)

    @property
    def failures(self) -> List[ChainCheck]:
        return [check for check in self.checks if not check.ok]

    def extend(self, checks: List[ChainCheck]) -> None:
        self.checks.extend(checks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": 1,
            "q": self.q,
            "alpha": self.alpha,
            "regime": self.regime.value,
            "status": "PASS" if self.ok else "FAIL",
            "critical_digits": dict(self.critical_digits),
            "checks": [check.to_dict() for check in self.checks],
        }


@dataclass(frozen=True)
class OrbitSample:
    t: float
    v: float
    epsilon_next: int
    n: int


@dataclass(frozen=True)
class ThetaPair:
    theta_prev: float
    theta_cur: float
    eps_next: int


@dataclass(frozen=True)
class GammaRegion:
    """Γ^± задаётся неявно: точка принадлежит, если F⁻¹ попадает в Ω_α с нужным знаком t"""
    sign: int
    domain: NatExtDomain


@dataclass(frozen=True)
class ImagePiece:
    """Прямоугольник [x0, x1) × [y0, y1] с точными углами"""
    x0: "AlgebraicNumber"
    x1: "AlgebraicNumber"
    y0: "AlgebraicNumber"
    y1: "AlgebraicNumber"
    label: str = ""


@dataclass
class TilingReport:
    q: int
    alpha: str
    pieces: int = 0
    slabs: int = 0
    tail_digit: Optional[int] = None
    defects: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.defects

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "alpha": self.alpha,
            "pieces": self.pieces,
            "slabs": self.slabs,
            "tail_digit": self.tail_digit,
            "status": "PASS" if self.ok else "FAIL",
            "defects": list(self.defects),
        }


@dataclass
class LenstraResult:
    c: float
    n: int
    hits: int
    theory: float

    @property
    def frequency(self) -> float:
        return self.hits / self.n

    @property
    def stderr(self) -> float:
        p = min(max(self.theory, 1e-12), 1 - 1e-12)
        return (p * (1 - p) / self.n) ** 0.5

    @property
    def z(self) -> float:
        return (self.frequency - self.theory) / self.stderr


@dataclass
class ExperimentTable:
    """Результат эксперимента: строки таблицы и метаданные для заголовка CSV/JSON"""
    experiment: str
    metadata: Dict[str, Any]
    columns: List[str]
    rows: List[List[float]]
    summary: Dict[str, Any] = field(default_factory=dict)


_ALPHA_TOKEN = re.compile(r"^\s*[+-]?\d+(\.\d+)?(\s*/\s*\d+)?\s*$")
_SYMBOLIC_ALPHA = {"1/lambda", "rho/lambda", "1/λ", "ρ/λ"}


class RunConfig(BaseModel):
    q: int
    alpha: str = "1/2"
    precision: int = Field(default=128, ge=64)
    seed: int = Field(default=0, ge=0, lt=2**64)
    n: int = Field(default=20, ge=1)
    x: Optional[str] = None
    c: Optional[str] = None
    threads: int = Field(default=1, ge=1)
    out: Optional[Path] = None
    format: OutputFormat = OutputFormat.JSON
    experiment: Optional[Experiment] = None
    grid: bool = False

    @field_validator("q")
    @classmethod
    def _check_q(cls, value: int) -> int:
        GroupIndex(value)
        return value

    @field_validator("alpha")
    @classmethod
    def _check_alpha(cls, value: str) -> str:
        token = value.strip()
        if token in _SYMBOLIC_ALPHA or _ALPHA_TOKEN.match(token):
            return token
        raise ValueError(f"неизвестный токен α: {value!r}")
