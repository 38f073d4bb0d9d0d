"""Domain types for the hierarchical N-player trust game."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

# Strategies
PUNISHING_INVESTOR = "P"
NORMAL_INVESTOR = "M"
TRUSTWORTHY_TRUSTEE = "T"
UNTRUSTWORTHY_TRUSTEE = "U"
STRATEGIES = (PUNISHING_INVESTOR, NORMAL_INVESTOR, TRUSTWORTHY_TRUSTEE, UNTRUSTWORTHY_TRUSTEE)

# Equilibrium labels
MU = "M+U"
MT = "M+T"
PU = "P+U"
PT = "P+T"
PTU = "P+T+U"
PMU = "P+M+U"
PMT = "P+M+T"
INTERIOR = "INTERIOR"
EQUILIBRIUM_LABELS = (MU, MT, PU, PT, PTU, PMU, PMT, INTERIOR)

# Stability verdicts
STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"

# Tolerance used when checking that a state lies on the rectangle
STATE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class GameParams:
    """Full parameterisation of the game. Build through payoffs.validate_params."""

    N: int
    alpha: float
    lam: float
    r: float
    R_T: float
    t_v: float = 1.0

    @property
    def R_U(self) -> float:
        return (1.0 + self.r) * self.R_T

    def to_dict(self) -> dict:
        """Serialisable form, keyed the way configuration files spell it."""
        return {
            "N": self.N,
            "alpha": self.alpha,
            "lambda": self.lam,
            "r": self.r,
            "R_T": self.R_T,
            "t_v": self.t_v,
            "R_U": self.R_U,
        }


@dataclass(frozen=True)
class PopulationState:
    """Reduced state (x_i, x_t) on the rectangle [0, alpha] x [0, 1 - alpha]."""

    x_i: float
    x_t: float
    alpha: float

    def __post_init__(self):
        if not -STATE_TOLERANCE <= self.x_i <= self.alpha + STATE_TOLERANCE:
            raise ValueError(f"x_i={self.x_i} outside [0, {self.alpha}]")
        if not -STATE_TOLERANCE <= self.x_t <= 1.0 - self.alpha + STATE_TOLERANCE:
            raise ValueError(f"x_t={self.x_t} outside [0, {1.0 - self.alpha}]")

    @property
    def y_i(self) -> float:
        return self.alpha - self.x_i

    @property
    def y_t(self) -> float:
        return (1.0 - self.alpha) - self.x_t

    @property
    def punisher_share(self) -> float:
        """Share of punishers inside the investor community."""
        return self.x_i / self.alpha

    @property
    def trust_level(self) -> float:
        """Share of trustworthy trustees inside the trustee community."""
        return self.x_t / (1.0 - self.alpha)

    @property
    def location(self) -> tuple:
        return (self.x_i, self.x_t)


@dataclass(frozen=True)
class GroupComposition:
    """Strategy counts among the N-1 co-players of a focal individual."""

    n_p: int
    n_m: int
    n_t: int
    n_u: int

    @property
    def total(self) -> int:
        return self.n_p + self.n_m + self.n_t + self.n_u


@dataclass(frozen=True)
class ExpectedPayoffs:
    f_P: float
    f_M: float
    f_T: float
    f_U: float

    def as_dict(self) -> dict:
        return {"P": self.f_P, "M": self.f_M, "T": self.f_T, "U": self.f_U}


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sampled expected payoffs with their standard errors."""

    means: ExpectedPayoffs
    std_errors: ExpectedPayoffs
    sample_count: int
    seed: int


@dataclass(frozen=True)
class VectorField2:
    dx_i: float
    dx_t: float

    @property
    def max_norm(self) -> float:
        return max(abs(self.dx_i), abs(self.dx_t))


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 0.01
    t_max: float = 1e6
    convergence_eps: float = 1e-10
    clamp_eps: float = 1e-12
    sample_every: int = 100
    max_samples: int = 10000

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"integrator step must be positive, got {self.step}")
        if not self.t_max > 0:
            raise ValueError(f"integrator t_max must be positive, got {self.t_max}")
        if not self.convergence_eps > 0:
            raise ValueError(f"convergence_eps must be positive, got {self.convergence_eps}")
        if self.clamp_eps < 0:
            raise ValueError(f"clamp_eps must be non-negative, got {self.clamp_eps}")
        if self.sample_every < 1 or self.max_samples < 2:
            raise ValueError("sample_every must be >= 1 and max_samples >= 2")


@dataclass(frozen=True)
class Trajectory:
    samples: tuple  # ((t, PopulationState), ...)
    terminal: PopulationState
    converged: bool
    steps: int
    sample_every: int
    terminal_label: Optional[str] = None


@dataclass(frozen=True)
class EquilibriumReport:
    label: str
    location: tuple
    jacobian: tuple  # ((J11, J12), (J21, J22))
    eigenvalues: tuple  # (complex, complex)
    stability: Optional[str] = None

    def with_stability(self, verdict: str) -> "EquilibriumReport":
        return EquilibriumReport(self.label, self.location, self.jacobian, self.eigenvalues, verdict)


@dataclass(frozen=True)
class ThresholdSet:
    alpha_star: float
    lambda_low: float
    lambda_high: float


@dataclass(frozen=True)
class RegimeVerdict:
    case_id: str
    stable_set: frozenset
    thresholds: ThresholdSet


@dataclass(frozen=True)
class RegimeGrid:
    """Row-major verdict grid: one row per alpha value, one column per lambda value."""

    lambdas: tuple
    alphas: tuple
    verdicts: tuple


@dataclass(frozen=True)
class BasinResult:
    """P+T share of a grid; unresolved hit t_max, stalled converged away from every stable point."""

    fraction: float
    grid_resolution: int
    unresolved: int
    absolute_area: float
    label_counts: dict = field(default_factory=dict)
    stalled: int = 0
    cells: tuple = ()


@dataclass(frozen=True)
class BasinCell:
    x_i: float
    x_t: float
    label: Optional[str]
    converged: bool


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: GameParams
    integrator: IntegratorConfig
    options: dict
    seed: int
    threads: int
    out_path: Path
    out_format: str
