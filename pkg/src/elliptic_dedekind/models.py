"""Pydantic models for the emitted artifacts."""

from typing import Optional

from pydantic import BaseModel, Field, computed_field


def cpair(z: complex) -> list[float]:
    """Serialise a complex number as [re, im]."""
    z = complex(z)
    return [z.real, z.imag]


class FieldInfo(BaseModel):
    """Ring data and continued-fraction setup of one field."""

    D: int
    d_K: int
    omega: list[float]
    min_poly: str
    units: list[str]
    B: list[str]
    eps: float
    covering_threshold: float
    mu: float
    zeta: float
    description: str = ""


class ExpansionStep(BaseModel):
    """One step of a continued-fraction expansion."""

    n: int
    a: str
    b: str
    p: str
    q: str
    det_check: bool
    abs_residual: float = Field(..., description="|q_n z - p_n|")
    abs_remainder: Optional[float] = Field(default=None, description="|z_n|")


class ExpansionReport(BaseModel):
    """A full expansion in the documented JSON layout."""

    D: int
    eps: float
    z: list[float]
    policy: str = "greedy"
    B: list[str] = Field(default_factory=list)
    mu: float = 1.0
    steps: list[ExpansionStep] = Field(default_factory=list)
    terminated: bool = Field(default=False, description="True when z was found to lie in K")
    integral_upto: int = 0
    display: Optional[str] = None


class GrowthReport(BaseModel):
    """Outcome of the growth and approximation bounds on an expansion."""

    length: int
    checks: int = 0
    passed: bool = True
    min_margin_remainder: float = Field(default=0.0, description="min |z_n| * eps")
    max_ratio_residual: float = Field(default=0.0, description="max |r_n| / (eps |r_n-1|)")
    min_margin_growth: float = Field(default=0.0, description="min |q_n| / lower bound")
    max_ratio_approx: float = Field(default=0.0, description="max |z - p_n/q_n| / bound")
    failures: list[str] = Field(default_factory=list)


class BracketReport(BaseModel):
    """Counts of exact bracket identity checks."""

    depth: int
    trials: int
    checks: dict[str, int] = Field(default_factory=dict)


class EisensteinValue(BaseModel):
    """A certified value of E_2(0) or E_1(z)."""

    D: int
    kind: str
    point: Optional[list[float]] = None
    value: list[float]
    err_bound: float


class DedekindReport(BaseModel):
    """D(a, c) and its normalization."""

    D: int
    a: str
    c: str
    ncosets: int
    value: list[float]
    normalized: Optional[float] = None
    normalized_imag: Optional[float] = None
    err_bound: float


class PhiCheckReport(BaseModel):
    """Homomorphism residuals of the Sczech map on random words."""

    D: int
    trials: int
    seed: int
    max_c_norm: int
    max_residual: float
    identity_value: list[float]
    quarter_turn_value: list[float]
    passed: bool


class PhiFactor(BaseModel):
    """Phi of one factor of the witness matrix."""

    name: str
    value: Optional[list[float]] = None
    c_norm: int = 0


class LemmaReport(BaseModel):
    """Approximation diagnostic for M_n W(inf) along one expansion."""

    accepted: bool
    reason: str = ""
    w_inf: Optional[list[float]] = None
    delta: float
    zeta: float
    checks: int = 0
    denominators_ok: bool = True
    min_denominator_margin: Optional[float] = None
    distances: list[float] = Field(default_factory=list, description="|z - M_n W(inf)|, n >= 2")
    bounds: list[float] = Field(default_factory=list, description="certified bound per n")
    certified_n: Optional[int] = None
    first_within: Optional[int] = None


class WitnessReport(BaseModel):
    """Every artifact of a density witness."""

    D: int
    eps: float
    u_mode: str = "lemma"
    x: list[float]
    z: list[float]
    m: int
    n: int
    Mx: list[str]
    Mz: list[str]
    S: list[str]
    Sstar: list[str]
    u: str
    A: list[str]
    det_ok: bool
    alpha: str
    beta: str
    alpha_value: list[float]
    beta_value: list[float]
    delta1: list[float]
    delta2: list[float]
    target: float
    predicted: float
    bound: float
    computed: Optional[float] = None
    c_norm: int
    phi_factors: list[PhiFactor] = Field(default_factory=list)
    phi_total: Optional[list[float]] = None
    phi_direct: Optional[list[float]] = None
    err_bound: float


class GraphPoint(BaseModel):
    """A sample (alpha, normalized sum at alpha)."""

    re_alpha: float
    im_alpha: float
    d_tilde: float
    a: str
    c: str


class SuiteResult(BaseModel):
    """Outcome of one verify-all suite."""

    name: str
    checks: int = 0
    failures: list[str] = Field(default_factory=list)
    skipped: bool = False

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return not self.failures


class VerifyAllReport(BaseModel):
    """Per-suite pass counts of a verify-all run."""

    D: int
    seed: int
    suites: list[SuiteResult] = Field(default_factory=list)
    passed: bool = True
