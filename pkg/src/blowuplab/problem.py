"""Problem description: domain, boundary partition and source exponent."""

from dataclasses import dataclass, field

from .errors import ConfigError


def critical_exponent(n: int) -> float:
    """Sobolev critical exponent 2* for H^1 embedding (inf for n in {1,2})."""
    if n <= 2:
        return float("inf")
    return 2.0 * n / (n - 2)


@dataclass(frozen=True)
class ProblemSpec:
    """Semilinear heat problem with interior source |u|^(p-2)u, homogeneous
    Dirichlet data on Gamma0 and linear dynamic dissipation on Gamma1.

    The dissipation exponent is fixed at 2 (linear boundary damping); the
    nonlinear-damping regime is out of scope.
    """

    n: int
    p: float
    geometry: tuple = (1.0,)          # (L,) in 1D, (Lx, Ly) in 2D
    gamma0_tag: str = "left"          # 1D: left/right; 2D: comma list of edges
    dissipation_exponent: float = field(default=2.0)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ConfigError(f"spatial dimension must be 1 or 2, got {self.n}")
        if self.dissipation_exponent != 2.0:
            raise ConfigError("only linear boundary dissipation (exponent 2) is modeled")
        if self.p < 2.0:
            raise ConfigError(f"source exponent must satisfy p >= 2, got {self.p}")
        pmax = 1.0 + critical_exponent(self.n) / 2.0
        if self.p > pmax:
            raise ConfigError(f"p={self.p} exceeds the admissible range p <= 1 + 2*/2 = {pmax}")
        if len(self.geometry) != self.n or any(g <= 0 for g in self.geometry):
            raise ConfigError(f"geometry {self.geometry} inconsistent with n={self.n}")

    @property
    def superlinear(self) -> bool:
        """True on the blow-up analysis path (p > 2); p == 2 is the
        global-existence sanity path."""
        return self.p > 2.0

    @property
    def gamma0_edges(self) -> tuple:
        return tuple(s.strip() for s in self.gamma0_tag.split(",") if s.strip())
