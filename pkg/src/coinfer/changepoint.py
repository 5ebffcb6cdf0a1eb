"""Bayesian online changepoint detection over a bandwidth stream.

Run-length recursion with a Normal-Gamma conjugate model (unknown mean and
variance, Student-t predictive) and a constant hazard 1/lambda. Run length r
after observing x_t means "x_t is the (r+1)-th sample of the current segment";
the r = 0 hypothesis scores x_t under the prior predictive.

The posterior itself does not declare changes. A change is declared when the
MAP run length collapses: it falls below ``map_drop_threshold`` times the
previous MAP run length (and below it in absolute terms). The new segment is
then taken to be the last MAP+1 samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp


@dataclass(frozen=True)
class NormalGammaPrior:
    mu0: float | None = None  # None: use the first observed sample
    kappa0: float = 1.0
    alpha0: float = 1.0
    beta0: float = 1e4


@dataclass(frozen=True)
class DetectorConfig:
    hazard_lambda: float = 100.0
    map_drop_threshold: float = 0.5
    prior: NormalGammaPrior = field(default_factory=NormalGammaPrior)
    max_hypotheses: int | None = 500

    def __post_init__(self):
        if not self.hazard_lambda > 0:
            raise ValueError("hazard_lambda must be positive")
        if not 0 < self.map_drop_threshold < 1:
            raise ValueError("map_drop_threshold must lie in (0, 1)")
        p = self.prior
        if p.mu0 is not None and not p.mu0 > 0:
            raise ValueError("prior mean must be positive")
        if min(p.kappa0, p.alpha0, p.beta0) <= 0:
            raise ValueError("Normal-Gamma hyperparameters must be positive")
        if self.max_hypotheses is not None and self.max_hypotheses < 1:
            raise ValueError("max_hypotheses must be >= 1")


@dataclass(frozen=True)
class Observation:
    changed: bool
    current_state_kbps: float
    map_run_length: int


def _student_t_logpdf(x, mu, kappa, alpha, beta):
    nu = 2.0 * alpha
    scale2 = beta * (kappa + 1.0) / (alpha * kappa)
    z = (x - mu) ** 2 / (nu * scale2)
    return (
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * np.log(np.pi * nu * scale2)
        - (nu + 1.0) / 2.0 * np.log1p(z)
    )


class ChangepointDetector:
    """Single-stream detector; feed samples one at a time with :meth:`observe`."""

    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()
        self.reset()

    def reset(self) -> "ChangepointDetector":
        self.t = 0
        self.run_lengths = np.zeros(0, dtype=np.int64)
        self.log_posterior = np.zeros(0)
        self._mu = np.zeros(0)
        self._kappa = np.zeros(0)
        self._alpha = np.zeros(0)
        self._beta = np.zeros(0)
        self._mu0 = self.config.prior.mu0
        self._prev_map = None
        self._segment: list[float] = []
        self._segment_sum = 0.0
        self.change_indices: list[int] = []
        return self

    @property
    def run_length_posterior(self) -> np.ndarray:
        """Posterior mass per tracked hypothesis, aligned with ``run_lengths``.

        Before the first sample this is a point mass at run length 0.
        """
        if self.t == 0:
            return np.ones(1)
        return np.exp(self.log_posterior)

    @property
    def samples_since_change(self) -> int:
        return len(self._segment)

    @property
    def current_state_kbps(self) -> float:
        if not self._segment:
            raise RuntimeError("no samples observed yet")
        return self._segment_sum / len(self._segment)

    def _posterior_update(self, x: float) -> None:
        prior = self.config.prior
        log_h = -math.log(self.config.hazard_lambda)
        log_1mh = math.log1p(-1.0 / self.config.hazard_lambda)
        k0, a0, b0 = prior.kappa0, prior.alpha0, prior.beta0

        log_prior_pred = float(_student_t_logpdf(x, self._mu0, k0, a0, b0))
        if self.run_lengths.size:
            log_pred = _student_t_logpdf(x, self._mu, self._kappa, self._alpha, self._beta)
            growth = self.log_posterior + log_pred + log_1mh
            cp = log_h + logsumexp(self.log_posterior) + log_prior_pred
        else:
            growth = np.zeros(0)
            cp = log_prior_pred

        # Fold x into every hypothesis: a fresh one from the prior, the rest grown.
        mu = np.concatenate(([self._mu0], self._mu))
        kappa = np.concatenate(([k0], self._kappa))
        alpha = np.concatenate(([a0], self._alpha))
        beta = np.concatenate(([b0], self._beta))
        new_beta = beta + kappa * (x - mu) ** 2 / (2.0 * (kappa + 1.0))
        new_mu = (kappa * mu + x) / (kappa + 1.0)

        joint = np.concatenate(([cp], growth))
        run_lengths = np.concatenate(([0], self.run_lengths + 1))
        joint -= logsumexp(joint)

        cap = self.config.max_hypotheses
        if cap is not None and joint.size > cap:
            keep = np.sort(np.argpartition(-joint, cap - 1)[:cap])
            joint = joint[keep]
            joint -= logsumexp(joint)
            run_lengths, new_mu, kappa, alpha, new_beta = (
                a[keep] for a in (run_lengths, new_mu, kappa, alpha, new_beta)
            )

        self.log_posterior = joint
        self.run_lengths = run_lengths
        self._mu = new_mu
        self._kappa = kappa + 1.0
        self._alpha = alpha + 0.5
        self._beta = new_beta

    def observe(self, sample_kbps: float) -> Observation:
        if not sample_kbps > 0:
            raise ValueError(f"bandwidth sample must be positive, got {sample_kbps}")
        x = float(sample_kbps)
        if self._mu0 is None:
            self._mu0 = x
        self._posterior_update(x)
        map_r = int(self.run_lengths[int(np.argmax(self.log_posterior))])

        changed = False
        prev = self._prev_map
        if prev is not None and map_r < self.config.map_drop_threshold * prev and map_r < prev:
            changed = True
            n_prev = min(map_r, len(self._segment))
            self._segment = self._segment[len(self._segment) - n_prev:] if n_prev else []
            self._segment_sum = math.fsum(self._segment)
            self.change_indices.append(self.t)
        self._segment.append(x)
        self._segment_sum += x
        self._prev_map = map_r
        self.t += 1
        return Observation(changed, self.current_state_kbps, map_r)


def reset(config: DetectorConfig | None = None) -> ChangepointDetector:
    """Fresh detector: no hypotheses until the first sample arrives."""
    return ChangepointDetector(config)


def observe(detector: ChangepointDetector, sample_kbps: float) -> Observation:
    return detector.observe(sample_kbps)


def detect_changes(samples, config: DetectorConfig | None = None) -> list[Observation]:
    det = ChangepointDetector(config)
    return [det.observe(x) for x in samples]
