"""Semi-discrete operators and the explicit SSP-RK2 scheme.

Three spatial discretisations share one driver:

``standard``   consistent mass, Galerkin convection ``T a``
``low_order``  lumped mass, ``(T + D) a``
``afc``        lumped mass, ``(T + D) a + rbar(a)``

Operators are rebuilt from the stage's own state and time.  Stage one is
evaluated at ``t``, stage two at ``t + k``.  Boundary rows of the right-hand
side are zeroed and boundary coefficients are re-pinned to zero after every
stage.
"""
from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fem
from .mesh import Mesh
from .problems import FluxField
from .stabilization import (
    afc_correction,
    antidiffusive_fluxes,
    artificial_diffusion,
    correction_factors,
)

log = logging.getLogger(__name__)

VARIANTS = ("standard", "low_order", "afc")


class DivergenceError(RuntimeError):
    def __init__(self, step):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass(eq=False)
class SchemeConfig:
    """Everything needed to advance one discretisation in time.

    The step is either ``t_final / n0`` or derived from ``cfl * h0**cfl_power``
    (rounded down so that a whole number of steps reaches ``t_final``).
    """

    variant: str
    mesh: Mesh
    flux: FluxField
    t_final: float
    n0: int | None = None
    cfl: float | None = None
    cfl_power: float = 1.0
    source: Callable | None = None  # f(x, y, t)
    cg_tol: float = 1e-12
    gamma: np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown scheme {self.variant!r}; choose from {VARIANTS}")
        if not self.t_final > 0.0:
            raise ValueError("t_final must be positive")
        if self.n0 is None and self.cfl is None:
            raise ValueError("give either n0 or cfl")
        if self.n0 is not None and int(self.n0) < 1:
            raise ValueError("n0 must be at least 1")
        if self.cfl is not None and not self.cfl > 0.0:
            raise ValueError("cfl must be positive")

    def time_step(self) -> tuple[float, int]:
        if self.n0 is not None:
            n0 = int(self.n0)
        else:
            target = self.cfl * self.mesh.h0 ** self.cfl_power
            n0 = max(1, math.ceil(self.t_final / target - 1e-9))
        return self.t_final / n0, n0


@dataclass
class StepReport:
    """Extrema of the coefficient vector along a run.

    ``minima[n]``/``maxima[n]`` cover both the intermediate stage and the end
    of step ``n + 1``.  ``violations`` lists ``(step, stage, min, max)`` for
    states that left ``[g_min, g_max]`` by more than ``slack``.
    """

    g_min: float
    g_max: float
    slack: float
    minima: list = field(default_factory=list)
    maxima: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def within_bounds(self) -> bool:
        return not self.violations

    def record(self, step, stage, state):
        lo, hi = float(state.min()), float(state.max())
        if lo < self.g_min - self.slack or hi > self.g_max + self.slack:
            self.violations.append((step, stage, lo, hi))
        return lo, hi


class Integrator:
    def __init__(self, cfg: SchemeConfig):
        self.cfg = cfg
        mesh = cfg.mesh
        self.mesh = mesh
        self.mass = fem.assemble_mass(mesh)
        self.lumped = fem.lump_mass(self.mass)
        self.boundary = mesh.boundary_ids
        self._static = cfg.flux.exponent == 0 and not cfg.flux.time_dependent
        self._cache = None
        nodes = mesh.nodes
        self._x, self._y = nodes[:, 0], nodes[:, 1]

    def operators(self, alpha, t):
        """Convection matrix and artificial diffusion at state ``alpha``, time ``t``."""
        if self._static and self._cache is not None:
            return self._cache
        T = fem.assemble_convection(self.mesh, self.cfg.flux, alpha, t)
        D = artificial_diffusion(T, self.mesh) if self.cfg.variant != "standard" else None
        if self._static:
            self._cache = (T, D)
        return T, D

    def load(self, t):
        f = self.cfg.source
        if f is None:
            return None
        vals = np.broadcast_to(f(self._x, self._y, t), self._x.shape)
        if self.cfg.variant == "standard":
            return self.mass @ vals
        return self.lumped * vals

    def limiter(self, alpha, t):
        """Fluxes and correction factors at state ``alpha``."""
        _, D = self.operators(alpha, t)
        if D is None:
            T = fem.assemble_convection(self.mesh, self.cfg.flux, alpha, t)
            D = artificial_diffusion(T, self.mesh)
        fluxes = antidiffusive_fluxes(D, alpha)
        factors = correction_factors(self.mesh, D, fluxes, alpha, self.cfg.gamma)
        return fluxes, factors

    def spatial_operator(self, alpha, t):
        """Right-hand side before the mass matrix is inverted."""
        alpha = np.asarray(alpha, dtype=float)
        T, D = self.operators(alpha, t)
        L = T @ alpha
        variant = self.cfg.variant
        if variant != "standard":
            L += D.matrix @ alpha
        if variant == "afc":
            fluxes = antidiffusive_fluxes(D, alpha)
            factors = correction_factors(self.mesh, D, fluxes, alpha, self.cfg.gamma)
            L += afc_correction(factors, fluxes, self.mesh.n_nodes)
        b = self.load(t)
        if b is not None:
            L += b
        L[self.boundary] = 0.0
        return L

    def solve_mass(self, L):
        if self.cfg.variant == "standard":
            return fem.cg_solve(self.mass, L, tol=self.cfg.cg_tol, fixed=self.boundary)
        return L / self.lumped

    def forward_euler_stage(self, alpha, t, k):
        if not k > 0.0:
            raise ValueError("time step must be positive")
        out = alpha + k * self.solve_mass(self.spatial_operator(alpha, t))
        out[self.boundary] = 0.0
        return out

    def ssp_rk2_step(self, alpha, t, k):
        """One step; returns the new state and the intermediate stage."""
        stage = self.forward_euler_stage(alpha, t, k)
        out = 0.5 * alpha + 0.5 * self.forward_euler_stage(stage, t + k, k)
        out[self.boundary] = 0.0
        return out, stage

    def integrate(self, u0, callback=None):
        """Advance ``u0`` to ``t_final``.

        ``callback(step, t, state)`` is invoked after every completed step.
        Returns the final coefficients and a :class:`StepReport`.
        """
        k, n0 = self.cfg.time_step()
        alpha = np.array(u0, dtype=float)
        alpha[self.boundary] = 0.0
        g_min, g_max = float(alpha.min()), float(alpha.max())
        report = StepReport(g_min, g_max, 1e-12 * max(1.0, abs(g_min), abs(g_max)))
        t = 0.0
        for n in range(1, n0 + 1):
            alpha, stage = self.ssp_rk2_step(alpha, t, k)
            if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(stage))):
                raise DivergenceError(n)
            lo1, hi1 = report.record(n, 1, stage)
            lo2, hi2 = report.record(n, 2, alpha)
            report.minima.append(min(lo1, lo2))
            report.maxima.append(max(hi1, hi2))
            t = n * k
            if callback is not None:
                callback(n, t, alpha)
        if report.violations:
            log.info("%s: %d bound violations", self.cfg.variant, len(report.violations))
        return alpha, report


_integrators: "weakref.WeakKeyDictionary[SchemeConfig, Integrator]" = weakref.WeakKeyDictionary()


def _integrator(cfg: SchemeConfig) -> Integrator:
    integ = _integrators.get(cfg)
    if integ is None:
        integ = _integrators[cfg] = Integrator(cfg)
    return integ


def spatial_operator(cfg: SchemeConfig, alpha, t: float) -> np.ndarray:
    return _integrator(cfg).spatial_operator(alpha, t)


def forward_euler_stage(cfg: SchemeConfig, alpha, t: float, k: float) -> np.ndarray:
    return _integrator(cfg).forward_euler_stage(np.asarray(alpha, dtype=float), t, k)


def ssp_rk2_step(cfg: SchemeConfig, alpha, t: float, k: float) -> np.ndarray:
    return _integrator(cfg).ssp_rk2_step(np.asarray(alpha, dtype=float), t, k)[0]


def integrate(cfg: SchemeConfig, u0, callback=None):
    return _integrator(cfg).integrate(u0, callback)
