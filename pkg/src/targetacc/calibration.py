"""Temperature scaling: fit a single softmax temperature on labeled logits.

The temperature T rescales logits z -> z/T before the softmax. It preserves
every row's argmax (so accuracy is unchanged) while sharpening (T < 1) or
softening (T > 1) the probabilities. The fit minimizes the mean per-sample
negative log-likelihood over T in [0.01, 100] with a 200-point log-spaced
grid followed by golden-section refinement of the bracketing interval.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import (
    InvalidConfig,
    MissingLabels,
    NonFiniteValue,
    validate_labels,
    validate_logits,
    validate_scores,
)

TEMPERATURE_BOUNDS = (0.01, 100.0)
GRID_POINTS = 200
GOLDEN_TOL = 1e-4
# Floor added before log() when recovering logits from probabilities.
LOGIT_FLOOR = 1e-12

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateDataWarning(UserWarning):
    """Logits carry no class information; the fit is undetermined."""


@dataclass(frozen=True)
class TemperatureFit:
    """Fitted temperature with its achieved objective value.

    Attributes
    ----------
    temperature : float
        NLL-minimizing temperature, within [0.01, 100].
    nll : float
        Mean per-sample negative log-likelihood at the fitted temperature.
    grid_best : float
        Winner of the coarse grid stage, before refinement.
    """

    temperature: float
    nll: float
    grid_best: float


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Numerically stable softmax of logits divided by a temperature.

    Accepts a single row of K logits or an (n, K) matrix; the softmax is
    taken along the last axis after subtracting the row maximum.
    """
    if not (np.isfinite(temperature) and temperature > 0.0):
        raise InvalidConfig(f"temperature must be positive, got {temperature!r}")
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteValue("logits must be finite")
    z = z / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def apply_temperature(logits, temperature: float) -> np.ndarray:
    """Row-wise softmax of a logit matrix at the given temperature.

    Returns a validated probability score matrix; per-row argmax equals the
    argmax of the input logits for every temperature.
    """
    z = validate_logits(logits)
    return validate_scores(softmax(z, temperature))


def recover_logits(probabilities) -> np.ndarray:
    """Surrogate logits log(p + 1e-12) for probability-only inputs.

    softmax(recover_logits(p), 1.0) reproduces p up to the epsilon floor,
    so temperature scaling stays available when the original logits were
    never exported.
    """
    p = validate_scores(probabilities)
    return np.log(p + LOGIT_FLOOR)


def negative_log_likelihood(logits, labels, temperature: float = 1.0) -> float:
    """Mean per-sample NLL of softmax(logits / temperature) against labels."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels)
    zy = z[np.arange(z.shape[0]), y]
    return float(np.mean(logsumexp(z / temperature, axis=1) - zy / temperature))


def _golden_section(f, a: float, b: float, tol: float) -> float:
    """Golden-section minimizer of a unimodal f on [a, b] to width tol."""
    h = b - a
    c, d = b - _INV_PHI * h, a + _INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - _INV_PHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INV_PHI * h
            fd = f(d)
    return (a + b) / 2.0


def fit_temperature(logits, labels) -> TemperatureFit:
    """Fit the NLL-minimizing softmax temperature on labeled logits.

    Two-stage search over [0.01, 100]: a 200-point log-spaced grid locates
    the basin, then golden-section refinement of the bracketing interval
    converges to absolute tolerance 1e-4 in T. The search is deterministic.
    T = 1 is always considered as a candidate, so the returned NLL never
    exceeds the unscaled NLL.

    Raises
    ------
    MissingLabels
        If ``labels`` is None.

    Warns
    -----
    DegenerateDataWarning
        When every row's logits are constant across classes: the NLL is then
        independent of T and the fit returns T = 1.
    """
    if labels is None:
        raise MissingLabels("temperature fitting needs labeled data")
    z = validate_logits(logits)
    y = validate_labels(labels, z.shape[0], z.shape[1])

    def objective(t: float) -> float:
        return negative_log_likelihood(z, y, t)

    if float(np.max(np.ptp(z, axis=1))) == 0.0:
        warnings.warn(
            "all rows have identical logits across classes; the likelihood "
            "does not depend on the temperature, returning T = 1",
            DegenerateDataWarning,
            stacklevel=2,
        )
        return TemperatureFit(temperature=1.0, nll=objective(1.0), grid_best=1.0)

    lo, hi = TEMPERATURE_BOUNDS
    grid = np.geomspace(lo, hi, GRID_POINTS)
    values = np.array([objective(t) for t in grid])
    best = int(np.argmin(values))
    grid_best = float(grid[best])

    a = float(grid[best - 1]) if best > 0 else lo
    b = float(grid[best + 1]) if best < GRID_POINTS - 1 else hi
    refined = _golden_section(objective, a, b, GOLDEN_TOL)

    candidates = [refined, grid_best, 1.0]
    nlls = [objective(t) for t in candidates]
    i = int(np.argmin(nlls))
    return TemperatureFit(temperature=float(candidates[i]), nll=float(nlls[i]),
                          grid_best=grid_best)
