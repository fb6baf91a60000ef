"""Protocol parameters and the fixed per-round step schedule.

Every schedule field depends only on (psi, k, lambda); none depend on the
grid or the number of agents, which is what makes round length a constant
per configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .grid import ViewMode


class Policy(str, Enum):
    DMAR = "dmar"
    BP = "bp"
    DMAR_GCI = "dmar_gci"
    BP_GCI = "bp_gci"
    CENTRALIZED = "centralized"

    @property
    def uses_rollout(self) -> bool:
        return self in (Policy.DMAR, Policy.DMAR_GCI, Policy.CENTRALIZED)

    @property
    def gci(self) -> bool:
        return self in (Policy.DMAR_GCI, Policy.BP_GCI)


class LambdaMode(str, Enum):
    DEFAULT = "default"
    ANALYTIC = "analytic"
    OVERRIDE = "override"


class ParameterError(ValueError):
    pass


def tree_height_bound(psi: int) -> int:
    """Maximum cluster-tree height: ceil(3/2 * (psi - 2))."""
    if psi < 2:
        raise ParameterError("psi must be >= 2")
    return (3 * (psi - 2) + 1) // 2


def max_cluster_size(psi: int, c: int) -> int:
    """Geometric series bound on members: (c^(L+1) - 1) / (c - 1)."""
    L = tree_height_bound(psi)
    return (c ** (L + 1) - 1) // (c - 1)


def max_route_length(psi: int, k: int, lambda_mode: LambdaMode = LambdaMode.DEFAULT,
                     override: int | None = None) -> int:
    """Common control-sequence length bound for the execution window.

    Default is a practical bound of 8*k*(L+1).  Analytic is 2*s^3 with
    s = 2*k*(L+1)+1 the aggregated-map side bound: a route visits at most
    s^2 tasks with legs bounded by the map extent.
    """
    if psi < 2:
        raise ParameterError("psi must be >= 2")
    if k < 1:
        raise ParameterError("k must be >= 1")
    L = tree_height_bound(psi)
    if lambda_mode == LambdaMode.DEFAULT:
        return 8 * k * (L + 1)
    if lambda_mode == LambdaMode.ANALYTIC:
        s = 2 * k * (L + 1) + 1
        return 2 * s ** 3
    if lambda_mode == LambdaMode.OVERRIDE:
        if not override or override < 1:
            raise ParameterError("lambda override must be >= 1")
        return override
    raise ParameterError(f"unknown lambda mode {lambda_mode!r}")


@dataclass(frozen=True)
class ProtocolParams:
    k: int
    psi: int = 8
    c: int = 4
    view_mode: ViewMode = ViewMode.HOP
    lambda_mode: LambdaMode = LambdaMode.DEFAULT
    lambda_override: int | None = None
    policy: Policy = Policy.DMAR
    collision_mode: bool = False
    master_seed: int = 0

    def __post_init__(self):
        if self.psi < 2:
            raise ParameterError("psi must be >= 2")
        if self.c < 2:
            raise ParameterError("c must be >= 2")
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if self.collision_mode and self.policy.gci:
            raise ParameterError("collision mode is incompatible with GCI depot gathering")

    @property
    def em_length(self) -> int:
        return max_route_length(self.psi, self.k, self.lambda_mode, self.lambda_override)


@dataclass(frozen=True)
class Schedule:
    steps_election: int
    steps_soac_outer: int      # outer iterations, each 1 append + join window
    steps_join_inner: int      # join-propagation steps per outer iteration
    steps_lma: int
    steps_dissolve: int
    steps_tmar_broadcast: int  # 1 compute step + L broadcast steps
    steps_em: int

    @property
    def steps_soac(self) -> int:
        return self.steps_election + self.steps_soac_outer * (1 + self.steps_join_inner)

    @property
    def steps_per_round(self) -> int:
        return (self.steps_soac + self.steps_lma + self.steps_dissolve
                + self.steps_tmar_broadcast + self.steps_em)


def build_schedule(params: ProtocolParams) -> Schedule:
    L = tree_height_bound(params.psi)
    return Schedule(
        steps_election=1,
        steps_soac_outer=(params.psi - 1).bit_length(),  # ceil(log2(psi)), exact
        steps_join_inner=L,
        steps_lma=2 * L,
        steps_dissolve=L,
        steps_tmar_broadcast=1 + L,
        steps_em=params.em_length,
    )
