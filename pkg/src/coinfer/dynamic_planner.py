"""Online optimizer for fluctuating bandwidth.

Every measurement goes through the changepoint detector. The strategy is
replaced by the map's entry for the detected state only when the detector
declares a state transition; otherwise the previous strategy is kept. Two
consecutive states count as equal exactly when no change fired between them.
The first measurement always adopts the mapped strategy.
"""

from __future__ import annotations

from dataclasses import dataclass

from .changepoint import ChangepointDetector, DetectorConfig
from .config_map import ConfigurationMap, Strategy, lookup
from .errors import ValidationError


@dataclass(frozen=True)
class StepResult:
    strategy: Strategy
    switched: bool
    state_kbps: float


class OnlineOptimizer:
    def __init__(self, cmap: ConfigurationMap, detector_config: DetectorConfig | None = None):
        if cmap is None or len(cmap) == 0:
            raise ValidationError("online optimizer needs a nonempty configuration map")
        self.map = cmap
        self.detector = ChangepointDetector(detector_config)
        self._strategy: Strategy | None = None
        self.last_state_kbps: float | None = None

    @property
    def strategy(self) -> Strategy:
        if self._strategy is None:
            raise RuntimeError("no strategy before the first measurement")
        return self._strategy

    def step(self, sample_kbps: float) -> StepResult:
        obs = self.detector.observe(sample_kbps)
        switched = False
        if self._strategy is None or obs.changed:
            self._strategy = lookup(self.map, obs.current_state_kbps).strategy
            self.last_state_kbps = obs.current_state_kbps
            switched = True
        return StepResult(self._strategy, switched, obs.current_state_kbps)


def init_optimizer(cmap: ConfigurationMap, detector_config: DetectorConfig | None = None) -> OnlineOptimizer:
    return OnlineOptimizer(cmap, detector_config)


def step(opt: OnlineOptimizer, sample_kbps: float) -> StepResult:
    return opt.step(sample_kbps)
