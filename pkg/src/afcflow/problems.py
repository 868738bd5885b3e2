"""Flux fields, initial data and manufactured solutions used by the studies.

Fluxes have the form ``f(u) = beta(x, y, t) u^(l+1)`` with ``l`` in {0, 1}.
All callables are vectorised over numpy arrays of coordinates.

The sourced Burgers cases rely on ``div(beta u^2) = 2 u beta . grad u``, which
holds only because their ``beta`` is divergence free.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

pi = np.pi


@dataclass(frozen=True)
class FluxField:
    name: str
    exponent: int
    beta: Callable  # (x, y, t) -> (bx, by)
    divergence_free: bool
    time_dependent: bool = False

    def __post_init__(self):
        if self.exponent not in (0, 1):
            raise ValueError(f"flux exponent must be 0 or 1, got {self.exponent!r}")
        if self.exponent == 1 and not self.divergence_free:
            warnings.warn(
                f"flux {self.name!r}: quadratic flux with div(beta) != 0 is not "
                "covered by the error theory",
                stacklevel=2,
            )


def _const(bx, by):
    def beta(x, y, t):
        return np.full(np.shape(x), float(bx)), np.full(np.shape(x), float(by))

    return beta


FLUXES = {
    "advect-13": FluxField("advect-13", 0, _const(1.0, 3.0), True),
    "advect-x2-2y": FluxField(
        "advect-x2-2y", 0, lambda x, y, t: (x**2, 2.0 * y), False
    ),
    "advect-sin-t": FluxField(
        "advect-sin-t",
        0,
        lambda x, y, t: (np.exp(-t) * np.sin(pi * x), np.exp(-t) * np.sin(pi * y)),
        False,
        time_dependent=True,
    ),
    "advect-24": FluxField("advect-24", 0, _const(2.0, 4.0), True),
    "burgers": FluxField("burgers", 1, _const(0.5, 0.5), True),
    "burgers-xy": FluxField("burgers-xy", 1, lambda x, y, t: (x, -y), True),
    "burgers-rot-t": FluxField(
        "burgers-rot-t",
        1,
        lambda x, y, t: (np.exp(-t) * np.sin(pi * y), np.exp(-t) * np.sin(pi * x)),
        True,
        time_dependent=True,
    ),
}


def builtin_flux(name: str) -> FluxField:
    try:
        return FLUXES[name]
    except KeyError:
        raise ValueError(
            f"unknown flux {name!r}; available: {', '.join(FLUXES)}"
        ) from None


@dataclass(frozen=True)
class InitialCondition:
    """Initial datum ``u0(x, y)``.

    ``zero_boundary`` marks formulas that do not vanish on the boundary; their
    interpolants must have the boundary values zeroed.
    """

    name: str
    func: Callable
    zero_boundary: bool = False
    nonnegative: bool = True

    def __call__(self, x, y):
        return self.func(x, y)


INITIALS = {
    "poly": InitialCondition("poly", lambda x, y: x * (1 - x) * y * (1 - y)),
    "sine": InitialCondition("sine", lambda x, y: np.sin(pi * x) * np.sin(pi * y)),
    "gauss": InitialCondition(
        "gauss",
        lambda x, y: np.exp(-100.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)),
        zero_boundary=True,
    ),
    "gauss-shifted": InitialCondition(
        "gauss-shifted",
        lambda x, y: 10.0 * np.exp(-10.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)) + 5.0,
        zero_boundary=True,
    ),
}


def builtin_initial(name: str) -> InitialCondition:
    try:
        return INITIALS[name]
    except KeyError:
        raise ValueError(
            f"unknown initial condition {name!r}; available: {', '.join(INITIALS)}"
        ) from None


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    flux: FluxField
    exact: Callable  # (x, y, t)
    source: Callable  # (x, y, t)

    def initial(self, x, y):
        return self.exact(x, y, 0.0)


def _trig(x, y, t):
    return np.exp(-t) * np.sin(pi * x) * np.sin(pi * y)


def _trig_grad(x, y, t):
    e = np.exp(-t)
    return (
        e * pi * np.cos(pi * x) * np.sin(pi * y),
        e * pi * np.sin(pi * x) * np.cos(pi * y),
    )


def _poly(x, y, t):
    return np.exp(-t) * x * (1 - x) * y * (1 - y)


def _poly_grad(x, y, t):
    e = np.exp(-t)
    return e * (1 - 2 * x) * y * (1 - y), e * x * (1 - x) * (1 - 2 * y)


def _make_case(name, flux, u, grad_u):
    # u_t = -u for both solutions; beta is constant here, so div beta = 0
    bx, by = flux.beta(0.0, 0.0, 0.0)
    bx, by = float(bx), float(by)

    if flux.exponent == 0:
        def source(x, y, t):
            ux, uy = grad_u(x, y, t)
            return -u(x, y, t) + bx * ux + by * uy
    else:
        def source(x, y, t):
            val = u(x, y, t)
            ux, uy = grad_u(x, y, t)
            return -val + 2.0 * val * (bx * ux + by * uy)

    return ManufacturedCase(name, flux, u, source)


MANUFACTURED = {
    "trig-advect": _make_case("trig-advect", FLUXES["advect-24"], _trig, _trig_grad),
    "poly-advect": _make_case("poly-advect", FLUXES["advect-24"], _poly, _poly_grad),
    "trig-burgers": _make_case("trig-burgers", FLUXES["burgers"], _trig, _trig_grad),
    "poly-burgers": _make_case("poly-burgers", FLUXES["burgers"], _poly, _poly_grad),
}


def manufactured_source(case_name: str) -> ManufacturedCase:
    try:
        return MANUFACTURED[case_name]
    except KeyError:
        raise ValueError(
            f"unknown manufactured case {case_name!r}; "
            f"available: {', '.join(MANUFACTURED)}"
        ) from None


@dataclass(frozen=True)
class Problem:
    """A runnable setup: flux, initial datum, final time and study defaults."""

    name: str
    flux: FluxField
    initial: InitialCondition
    t_final: float
    n0_list: tuple = ()
    ref_n0: int = 0
    case: ManufacturedCase | None = None


def _problem(name, flux, initial, t_final, n0_list=(), ref_n0=0):
    return Problem(name, FLUXES[flux], INITIALS[initial], t_final, tuple(n0_list), ref_n0)


_LONG = (100, 200, 400, 800, 1600, 3200)
_SHORT = (10, 20, 40, 80, 160, 320)

PROBLEMS = {
    p.name: p
    for p in [
        _problem("advect-13", "advect-13", "poly", 0.1, _LONG, 10_000),
        _problem("advect-13-sine", "advect-13", "sine", 0.1, _LONG, 10_000),
        _problem("advect-x2-2y", "advect-x2-2y", "sine", 0.1, _LONG, 10_000),
        _problem("advect-x2-2y-poly", "advect-x2-2y", "poly", 0.1, _LONG, 10_000),
        _problem("advect-sin-t", "advect-sin-t", "sine", 0.1, _SHORT, 2000),
        _problem("advect-sin-t-gauss", "advect-sin-t", "gauss-shifted", 0.1, _SHORT, 2000),
        _problem("burgers", "burgers", "sine", 0.01, _SHORT, 2000),
        _problem("burgers-gauss", "burgers", "gauss-shifted", 0.01, _SHORT, 2000),
        _problem("burgers-xy", "burgers-xy", "sine", 0.01, _SHORT, 2000),
        _problem("burgers-rot-t", "burgers-rot-t", "gauss-shifted", 0.01, _SHORT[1:], 2000),
        _problem("dmp-gauss", "advect-13", "gauss", 0.1),
    ]
}
for _case in MANUFACTURED.values():
    PROBLEMS[_case.name] = Problem(
        _case.name,
        _case.flux,
        InitialCondition(_case.name, _case.initial, nonnegative=True),
        0.01,
        case=_case,
    )


def get_problem(name: str) -> Problem:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}; available: {', '.join(PROBLEMS)}"
        ) from None
