"""Lower-order terms ``b(k)`` of the normal velocity ``beta = -k_ss + b(k)``.

Every model is an odd polynomial in the curvature, so ``b(0) = 0`` holds by
construction and the quotient ``b(k)/k`` needed by the position update has a
closed form that is finite at ``k = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FlowModel:
    """Odd-polynomial lower-order term ``b(k) = c1 k + c3 k^3 + c5 k^5``.

    Use the :meth:`surface_diffusion`, :meth:`willmore` and
    :meth:`odd_polynomial` constructors rather than the raw fields.
    """

    kind: str
    c1: float = 0.0
    c3: float = 0.0
    c5: float = 0.0

    @classmethod
    def surface_diffusion(cls) -> "FlowModel":
        return cls("surface_diffusion")

    @classmethod
    def willmore(cls) -> "FlowModel":
        return cls("willmore", c3=-0.5)

    @classmethod
    def odd_polynomial(cls, c1: float, c3: float = 0.0, c5: float = 0.0) -> "FlowModel":
        return cls("odd_polynomial", float(c1), float(c3), float(c5))

    def b(self, k):
        """Evaluate ``b(k)``; accepts scalars or arrays."""
        k = np.asarray(k, dtype=float)
        k2 = k * k
        out = k * (self.c1 + k2 * (self.c3 + self.c5 * k2))
        return out if out.ndim else float(out)

    def phi(self, k):
        """Evaluate ``k^2 - b(k)/k`` through the analytic quotient (total at 0)."""
        k = np.asarray(k, dtype=float)
        k2 = k * k
        out = k2 - (self.c1 + k2 * (self.c3 + self.c5 * k2))
        return out if out.ndim else float(out)

    def to_config(self):
        if self.kind in ("surface_diffusion", "willmore"):
            return self.kind
        return {"odd_polynomial": [self.c1, self.c3, self.c5]}

    @classmethod
    def from_config(cls, value) -> "FlowModel":
        """Parse ``"surface_diffusion" | "willmore" | {"odd_polynomial": [c1, c3, c5]}``."""
        if value == "surface_diffusion":
            return cls.surface_diffusion()
        if value == "willmore":
            return cls.willmore()
        if isinstance(value, dict) and set(value) == {"odd_polynomial"}:
            coeffs = value["odd_polynomial"]
            if not isinstance(coeffs, (list, tuple)) or len(coeffs) != 3:
                raise ValueError("odd_polynomial needs exactly three coefficients [c1, c3, c5]")
            return cls.odd_polynomial(*(float(c) for c in coeffs))
        raise ValueError(f"unknown flow model: {value!r}")


def eval_b(model: FlowModel, k):
    return model.b(k)


def eval_phi(model: FlowModel, k):
    return model.phi(k)
