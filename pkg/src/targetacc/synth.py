"""Synthetic source/target score generator with known ground truth.

Generative model, per sample: draw a class y from the prior; draw logits
z_j = margin * 1[j = y] + Normal(0, noise); with probability label_noise,
replace y by a uniformly random *other* class (logits unchanged); emit
z / gen_temperature. Source and target sides use independent parameter sets
and independent random streams, so shifts are dialed in by changing the
target's prior, margin, noise, or label noise.

For uniform priors and zero label noise the Bayes posterior given emitted
logits w is softmax(w / T*) with T* = noise**2 / (margin * gen_temperature);
configs with noise**2 = gen_temperature**2 * margin therefore produce data
whose NLL-optimal softmax temperature equals gen_temperature exactly.

Randomness is counter-based and splittable: sample i of stream s (0 =
source, 1 = target) reads uniforms from a Philox-4x64-10 generator with
key = (s << 64) | seed and counter = i << 64, mapped to [0, 1) doubles by
numpy's Generator.random and to Gaussians by the inverse normal CDF
(scipy.special.ndtri). Consequences: the same seed and config reproduce
bit-identical output, and growing n appends samples without reshuffling
earlier ones. The algorithm choice is fixed; do not change it across
versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import InvalidConfig, LabeledDataset, accuracy

_U64 = 0xFFFFFFFFFFFFFFFF
# Uniform draws are clipped away from 0 so ndtri never returns -inf.
_U_FLOOR = 1e-300


@dataclass(frozen=True)
class SynthConfig:
    """Generator configuration for one source/target pair.

    ``prior_source`` / ``prior_target`` default to uniform. ``margin_*`` is
    the correct-class logit boost, ``noise_*`` the logit Gaussian standard
    deviation, ``label_noise_*`` the probability of flipping the label to a
    uniformly random other class, and ``gen_temperature`` divides every
    emitted logit.
    """

    k: int = 2
    n_source: int = 1000
    n_target: int = 1000
    prior_source: tuple[float, ...] | None = None
    prior_target: tuple[float, ...] | None = None
    margin_source: float = 1.0
    margin_target: float = 1.0
    noise_source: float = 1.0
    noise_target: float = 1.0
    label_noise_source: float = 0.0
    label_noise_target: float = 0.0
    gen_temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise InvalidConfig(f"k must be >= 2, got {self.k}")
        if self.n_source < 1 or self.n_target < 1:
            raise InvalidConfig("n_source and n_target must be >= 1")
        for name in ("margin_source", "margin_target"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidConfig(f"{name} must be finite")
        for name in ("noise_source", "noise_target"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise InvalidConfig(f"{name} must be positive, got {value!r}")
        for name in ("label_noise_source", "label_noise_target"):
            value = getattr(self, name)
            if not (0.0 <= value <= 0.5):
                raise InvalidConfig(f"{name} must lie in [0, 0.5], got {value!r}")
        if not (math.isfinite(self.gen_temperature) and self.gen_temperature > 0.0):
            raise InvalidConfig("gen_temperature must be positive")
        if not (-(2**63) <= int(self.seed) < 2**64):
            raise InvalidConfig("seed must fit in 64 bits")
        for name in ("prior_source", "prior_target"):
            prior = getattr(self, name)
            if prior is None:
                continue
            prior = tuple(float(p) for p in prior)
            if len(prior) != self.k:
                raise InvalidConfig(f"{name} must have {self.k} entries")
            if any(p < 0.0 for p in prior):
                raise InvalidConfig(f"{name} entries must be nonnegative")
            if abs(math.fsum(prior) - 1.0) > 1e-9:
                raise InvalidConfig(f"{name} must sum to 1 within 1e-9")
            object.__setattr__(self, name, prior)


@dataclass(frozen=True)
class SynthOutput:
    """Generated datasets plus their exact empirical accuracies.

    Target labels are retained so the generator can serve as a ground-truth
    oracle; estimators must not see them.
    """

    source: LabeledDataset
    target: LabeledDataset
    true_source_accuracy: float
    true_target_accuracy: float


def _sample_stream(stream: int, seed: int, n: int, k: int, prior, margin: float,
                   noise: float, label_noise: float, gen_temperature: float):
    key = ((stream & 1) << 64) | (int(seed) & _U64)
    cumulative = np.cumsum(prior)
    logits = np.empty((n, k), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        gen = np.random.Generator(np.random.Philox(key=key, counter=i << 64))
        u = gen.random(k + 3)
        y = min(int(np.searchsorted(cumulative, u[0], side="right")), k - 1)
        z = noise * ndtri(np.clip(u[1 : k + 1], _U_FLOOR, None))
        z[y] += margin
        if u[k + 1] < label_noise:
            other = int(u[k + 2] * (k - 1))
            y = other if other < y else other + 1
        logits[i] = z / gen_temperature
        labels[i] = y
    return logits, labels


def generate(cfg: SynthConfig) -> SynthOutput:
    """Generate a source/target pair of labeled logit datasets.

    Deterministic under (seed, config): calling twice yields bit-identical
    arrays. The reported accuracies equal :func:`targetacc.core.accuracy`
    recomputed on the emitted data.
    """
    uniform = tuple(1.0 / cfg.k for _ in range(cfg.k))
    src_logits, src_labels = _sample_stream(
        0, cfg.seed, cfg.n_source, cfg.k, cfg.prior_source or uniform,
        cfg.margin_source, cfg.noise_source, cfg.label_noise_source,
        cfg.gen_temperature,
    )
    tgt_logits, tgt_labels = _sample_stream(
        1, cfg.seed, cfg.n_target, cfg.k, cfg.prior_target or uniform,
        cfg.margin_target, cfg.noise_target, cfg.label_noise_target,
        cfg.gen_temperature,
    )
    source = LabeledDataset(src_logits, src_labels, logits=True)
    target = LabeledDataset(tgt_logits, tgt_labels, logits=True)
    return SynthOutput(
        source=source,
        target=target,
        true_source_accuracy=accuracy(source),
        true_target_accuracy=accuracy(target),
    )


def shift_preset(seed: int = 0, **overrides) -> SynthConfig:
    """Default two-class shift: target logit noise doubled vs. source.

    Doubling the noise with an unchanged margin lowers the target accuracy
    below the source accuracy while *raising* raw confidence, a handy
    worst-case for confidence-based estimators.
    """
    base = dict(k=2, n_source=5000, n_target=5000, margin_source=1.0,
                margin_target=1.0, noise_source=1.0, noise_target=2.0,
                gen_temperature=1.0, seed=seed)
    base.update(overrides)
    return SynthConfig(**base)
