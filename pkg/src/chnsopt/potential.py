"""Quartic double-well potential and its first three derivatives.

The wells sit at +-1 (pure phases).  The curvature is bounded below by -4,
so the semi-implicit schemes' stabilization constant defaults to 2, half the
maximal curvature magnitude on [-1, 1].
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_STABILIZATION = 2.0


@dataclass(frozen=True)
class Potential:
    """Double-well bulk energy density F(s) = (s^2 - 1)^2.

    ``stabilization`` is the scheme parameter S >= 0 used by the
    semi-implicit splitting; it is carried here so every solver sees the
    same value.
    """

    kind: str = "quartic"
    stabilization: float = DEFAULT_STABILIZATION

    def __post_init__(self):
        if self.kind != "quartic":
            raise ValidationError(f"unsupported potential kind '{self.kind}'")
        if self.stabilization < 0:
            raise ValidationError("stabilization must be >= 0")

    def f_val(self, s):
        s = np.asarray(s, dtype=float)
        return (s * s - 1.0) ** 2

    def f_d1(self, s):
        s = np.asarray(s, dtype=float)
        return 4.0 * s ** 3 - 4.0 * s

    def f_d2(self, s):
        s = np.asarray(s, dtype=float)
        return 12.0 * s * s - 4.0

    def f_d3(self, s):
        s = np.asarray(s, dtype=float)
        return 24.0 * s

    # curvature lower bound: f_d2(s) >= -4 for all s
    curvature_floor: float = -4.0
