"""Configuration management using Pydantic Settings."""

import logging
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import InadmissibleEpsilonError
from .qfield import FieldContext, QuadInt, parse_quadint

logger = logging.getLogger(__name__)

DEFAULT_EPS = 0.9


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")

    # Continued fractions
    default_eps: Optional[float] = Field(
        default=None, description="Fixed eps for every field; None picks it per field"
    )
    mp_dps: int = Field(default=60, ge=20, description="Decimal digits for CF remainders")
    covering_grid: int = Field(
        default=400, ge=20, description="Coarse grid size per axis for covering_epsilon"
    )

    # Eisenstein series and Dedekind sums
    eisenstein_prec: float = Field(default=1e-10, description="Target accuracy of E_1")
    dedekind_budget: int = Field(
        default=100_000, ge=1, description="Largest N(c) summed over cosets"
    )

    # Density witness
    u_search_norm: int = Field(
        default=40_000_000, ge=1, description="Largest N(u) tried by the translation search"
    )

    # Paths
    fields_config: Path = Field(
        default=Path("./config/fields.yaml"), description="Path to per-field profiles"
    )


class FieldProfile:
    """Per-field overrides for the continued-fraction setup."""

    def __init__(
        self,
        D: int,
        eps: float | None = None,
        B: list[str] | None = None,
        description: str = "",
    ):
        self.D = D
        self.eps = eps
        self.B = [str(b) for b in (B or [])]
        self.description = description

    def admissible_elements(self, field: FieldContext) -> list[QuadInt] | None:
        """The explicit admissible set, or None for the default one."""
        if not self.B:
            return None
        return [parse_quadint(b, field) for b in self.B]


class FieldProfiles:
    """Field profiles loaded from YAML."""

    def __init__(self, config_path: Path):
        self.profiles: dict[int, FieldProfile] = {}
        self._load_config(config_path)

    def _load_config(self, config_path: Path) -> None:
        """Load profiles from YAML file."""
        if not config_path.exists():
            return

        with open(config_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)

        if not data:
            return

        for key, entry in (data.get("fields") or {}).items():
            entry = entry or {}
            D = int(entry.get("D", key))
            self.profiles[D] = FieldProfile(
                D=D,
                eps=entry.get("eps"),
                B=entry.get("B"),
                description=entry.get("description", ""),
            )

    def get(self, D: int) -> FieldProfile:
        return self.profiles.get(D) or FieldProfile(D=D)

    def all_profiles(self) -> list[FieldProfile]:
        """All profiles sorted by D."""
        return sorted(self.profiles.values(), key=lambda p: p.D)


def get_settings() -> Settings:
    """Get application settings singleton."""
    return Settings()


def get_field_profiles(settings: Settings | None = None) -> FieldProfiles:
    """Get field profiles configuration."""
    if settings is None:
        settings = get_settings()
    return FieldProfiles(settings.fields_config)


def resolve_eps(
    field: FieldContext,
    B: list[QuadInt],
    settings: Settings | None = None,
    profile: FieldProfile | None = None,
    explicit: float | None = None,
) -> float:
    """Pick eps for a field.

    An explicit value (argument, then profile, then settings) is used as given and
    checked later by default_admissible. Otherwise 0.9, raised to the midpoint of
    (covering_epsilon, 1) when 0.9 does not clear the covering threshold.
    """
    from .cfmartin import covering_epsilon

    settings = settings or get_settings()
    for value in (explicit, profile.eps if profile else None, settings.default_eps):
        if value is not None:
            return float(value)

    threshold = covering_epsilon(B, field, grid=settings.covering_grid)
    if DEFAULT_EPS > threshold:
        return DEFAULT_EPS
    if threshold >= 1.0:
        raise InadmissibleEpsilonError(DEFAULT_EPS, threshold)
    eps = (threshold + 1.0) / 2
    logger.warning(
        f"eps={DEFAULT_EPS} does not clear covering radius {threshold:.4f} for "
        f"D={field.D}; using {eps:.4f}"
    )
    return eps


class RunConfig(BaseModel):
    """Validated options of one command-line run."""

    D: int = Field(..., ge=1)
    eps: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    prec: float = Field(default=1e-10, ge=1e-12)
    budget: int = Field(default=100_000, ge=1)
    seed: int = Field(default=0)
    output: Literal["json", "csv", "text"] = Field(default="json")

    @field_validator("D")
    @classmethod
    def _squarefree(cls, v: int) -> int:
        from .qfield import is_squarefree

        if not is_squarefree(v):
            raise ValueError(f"D={v} is not squarefree")
        return v
