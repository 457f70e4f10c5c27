"""Model family definitions."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum

from ..data import DEFAULT_HOURS
from ..exceptions import DomainError


class Family(str, Enum):
    PERSISTENCE = "Persistence"
    AR = "AR"
    ARX_DIURNAL = "ARX_Diurnal"
    ARX_DIURNAL_MODE_DUMMIES = "ARX_Diurnal_ModeDummies"
    CAR = "CAR"
    VAR = "VAR"
    VAR_DIURNAL = "VAR_Diurnal"
    VAR_DIURNAL_MODE_DUMMIES = "VAR_Diurnal_ModeDummies"
    CVAR = "CVAR"

    @property
    def univariate(self) -> bool:
        return self in (Family.AR, Family.ARX_DIURNAL, Family.ARX_DIURNAL_MODE_DUMMIES, Family.CAR)

    @property
    def diurnal(self) -> bool:
        return self not in (Family.PERSISTENCE, Family.AR, Family.VAR)

    @property
    def mode_dummies(self) -> bool:
        return self in (Family.ARX_DIURNAL_MODE_DUMMIES, Family.VAR_DIURNAL_MODE_DUMMIES)

    @property
    def conditional(self) -> bool:
        return self in (Family.CAR, Family.CVAR)

    @property
    def needs_modes(self) -> bool:
        return self.conditional or self.mode_dummies


@dataclass(frozen=True)
class ModelSpec:
    """One member of the model family with its lag order and horizons.

    ``intercept`` only affects AR and VAR; the diurnal families use the
    hour dummies as time-varying intercepts instead.
    """

    family: Family = Family.CVAR
    p: int = 3
    horizons: tuple = (1, 2, 3, 4, 5, 6)
    hours: tuple = field(default=DEFAULT_HOURS)
    n_modes: int = 1
    intercept: bool = True

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise DomainError(f"unknown model family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        object.__setattr__(self, "hours", tuple(int(h) for h in self.hours))
        if self.p < 1:
            raise DomainError("lag order p must be >= 1")
        if not self.horizons or min(self.horizons) < 1:
            raise DomainError("horizons must be >= 1")
        if self.n_modes < 1:
            raise DomainError("n_modes must be >= 1")
        if family.diurnal and not self.hours:
            raise DomainError("diurnal families need a non-empty hour set")

    @property
    def partitions(self) -> tuple:
        """Mode partitions with a dedicated coefficient matrix; 0 means all rows."""
        return tuple(range(1, self.n_modes + 1)) if self.family.conditional else (0,)

    @property
    def has_intercept(self) -> bool:
        return self.intercept and self.family in (Family.AR, Family.VAR)

    def feature_names(self, sites) -> list:
        """Column names of a design row in storage order."""
        if self.family is Family.PERSISTENCE:
            return []
        if self.family.univariate:
            names = [f"lag{j}" for j in range(1, self.p + 1)]
        else:
            names = [f"lag{j}:{s}" for j in range(1, self.p + 1) for s in sites]
        if self.has_intercept:
            names.append("const")
        if self.family.diurnal:
            names += [f"hour{h:02d}" for h in self.hours]
        if self.family.mode_dummies:
            names += [f"mode{s}" for s in range(2, self.n_modes + 1)]
        return names

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        d["horizons"] = list(self.horizons)
        d["hours"] = list(self.hours)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)

    def replace(self, **changes) -> "ModelSpec":
        d = self.to_dict()
        d.update(changes)
        return ModelSpec.from_dict(d)
