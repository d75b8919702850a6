"""The result record shared by every estimator."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo or quadrature result.

    ``stderr`` is zero for deterministic quadrature; such results may carry
    a ``quad_error`` instead, measured by comparing against a coarser rule.
    """

    value: float
    stderr: float = 0.0
    n_samples: int = 0
    seed: int | None = None
    method: str = ""
    quad_error: float = 0.0

    @property
    def confidence_interval(self):
        half = Z95 * self.stderr + self.quad_error
        return (self.value - half, self.value + half)

    @property
    def deterministic(self) -> bool:
        return self.stderr == 0.0

    def scaled(self, factor: float) -> "Estimate":
        return Estimate(
            self.value * factor,
            self.stderr * abs(factor),
            self.n_samples,
            self.seed,
            self.method,
            self.quad_error * abs(factor),
        )

    def as_row(self) -> dict:
        row = asdict(self)
        row["ci_low"], row["ci_high"] = self.confidence_interval
        return row


def mean_estimate(samples, seed=None, method="monte_carlo") -> Estimate:
    """Sample mean with its standard error."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("inf")
    return Estimate(float(x.mean()), se, int(x.size), seed, method)
