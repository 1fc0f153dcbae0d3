"""Increasing path functionals (epidemic cost metrics).

A metric is *increasing* when ``Z(h) <= Z(g)`` whenever ``h`` is below ``g``
at every time step. Each metric below is increasing by construction:

* ``absorption_time``: if ``g`` is all-susceptible at ``t`` then so is ``h``.
* ``social_cost``: a sum of infected counts, each monotone in the state.
* ``epidemic_spread``: an ever-infected node in ``h`` is ever-infected in ``g``.
* ``endemic_fraction``: an average of infected counts (real valued, so it is
  usable for dominance probes but not for the integer gap identity).

Metrics read recorded, horizon-capped paths. Past the recorded part an
absorbed path is all-susceptible; reading past the horizon of an unabsorbed
path is an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import SamplePath
from .errors import MetricContractError, ParameterError
from .rng import as_generator


def absorption_time(path: SamplePath) -> int | None:
    """First time the path is all-susceptible, or ``None`` when censored at the horizon."""
    return path.absorbed_at


def _window(path: SamplePath, m: int) -> np.ndarray:
    if m < 0:
        raise ParameterError("window m must be non-negative")
    if m > path.horizon and path.absorbed_at is None:
        raise ParameterError(f"window m={m} exceeds recorded horizon {path.horizon}")
    return path.padded(m + 1)


def social_cost(path: SamplePath, m: int) -> int:
    """Total infected node-steps over ``t = 0..m``."""
    return int(_window(path, m).sum())


def epidemic_spread(path: SamplePath, m: int) -> int:
    """Number of nodes infected at least once in ``t = 0..m`` (initial seeds included)."""
    return int(_window(path, m).any(axis=0).sum())


def spread_curve(path: SamplePath, horizon: int | None = None) -> np.ndarray:
    """``epidemic_spread(path, t)`` for every ``t = 0..horizon``."""
    rows = path.padded(None if horizon is None else horizon + 1)
    return np.logical_or.accumulate(rows, axis=0).sum(axis=1)


def endemic_fraction(path: SamplePath) -> float:
    """Mean infected fraction over indices ``ceil(L/2)..L-1`` of the length ``L = horizon + 1`` path."""
    rows = path.padded()
    L = len(rows)
    if L < 2:
        raise ParameterError("endemic fraction needs a path of length >= 2")
    return float(rows[math.ceil(L / 2):].mean())


# --- registry ------------------------------------------------------------------

@dataclass
class PathMetric:
    name: str
    evaluate: Callable[[SamplePath], float | int | None]
    integer: bool = True
    window: int | None = None
    monotone_certificate: int | None = None

    def __call__(self, path):
        return self.evaluate(path)


_REGISTRY: dict[str, Callable[..., PathMetric]] = {}


def register_metric(name: str):
    def deco(factory):
        _REGISTRY[name] = factory
        return factory
    return deco


@register_metric("absorption_time")
def absorption_time_metric() -> PathMetric:
    return PathMetric("absorption_time", absorption_time)


@register_metric("social_cost")
def social_cost_metric(m: int) -> PathMetric:
    return PathMetric("social_cost", lambda p: social_cost(p, m), window=m)


@register_metric("epidemic_spread")
def epidemic_spread_metric(m: int) -> PathMetric:
    return PathMetric("epidemic_spread", lambda p: epidemic_spread(p, m), window=m)


@register_metric("endemic_fraction")
def endemic_fraction_metric() -> PathMetric:
    return PathMetric("endemic_fraction", endemic_fraction, integer=False)


def registered_metrics() -> tuple[str, ...]:
    return tuple(_REGISTRY)


def get_metric(name: str, **kwargs) -> PathMetric:
    if name not in _REGISTRY:
        raise MetricContractError(f"unknown metric {name!r}; registered: {registered_metrics()}")
    return _REGISTRY[name](**kwargs)


def require_registered(metric: PathMetric, integer: bool = False) -> None:
    if not isinstance(metric, PathMetric) or metric.name not in _REGISTRY:
        raise MetricContractError(f"{metric!r} is not a registered increasing metric")
    if integer and not metric.integer:
        raise MetricContractError(f"metric {metric.name!r} is not integer valued")


def parse_metric(spec: str) -> PathMetric:
    """``"social_cost:50"`` -> ``social_cost_metric(m=50)``; bare names take no window."""
    name, _, arg = spec.partition(":")
    if arg:
        return get_metric(name, m=int(arg))
    return get_metric(name)


def thin_path(path: SamplePath, rng, flip: float = 0.5) -> SamplePath:
    """A path below ``path``: every infected bit is cleared independently with probability ``flip``.

    The thinned path keeps the same horizon; it is absorbed at the first
    all-susceptible time, which can only come earlier.
    """
    rng = as_generator(rng)
    rows = path.states & (rng.random(path.states.shape) >= flip)
    counts = rows.sum(axis=1)
    zero = np.flatnonzero(counts == 0)
    if len(zero):
        T = int(zero[0])
        return SamplePath(rows[: T + 1], path.horizon, T, path.kind)
    return SamplePath(rows, path.horizon, None, path.kind)


def certify_monotone(metric: PathMetric, paths, rng, pairs_per_path: int = 1) -> int:
    """Check ``Z(thinned) <= Z(path)`` on random ordered pairs and record the count.

    Censored absorption times compare as +infinity. Raises ``AssertionError``
    on the first violation.
    """
    rng = as_generator(rng)
    checked = 0
    for g in paths:
        for _ in range(pairs_per_path):
            h = thin_path(g, rng, flip=float(rng.uniform(0.05, 0.95)))
            zg, zh = metric(g), metric(h)
            zg = math.inf if zg is None else zg
            zh = math.inf if zh is None else zh
            if zh > zg:
                raise AssertionError(f"{metric.name}: {zh} > {zg} on an ordered pair")
            checked += 1
    metric.monotone_certificate = (metric.monotone_certificate or 0) + checked
    return checked
