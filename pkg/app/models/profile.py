# app/models/profile.py
import math

import numpy as np


class Profile1D:
    """Lazily evaluated one-dimensional profile r -> value with its derivative."""

    def __init__(self, name, value, derivative, support_radius=math.inf):
        self.name = name
        self._value = value
        self._derivative = derivative
        self.support_radius = support_radius

    def __call__(self, r):
        return self._value(np.asarray(r, dtype=float))

    def derivative(self, r):
        return self._derivative(np.asarray(r, dtype=float))

    def __repr__(self):
        return f'<Profile1D {self.name} support={self.support_radius:.4g}>'


class TruncatedProfile(Profile1D):
    """
    Unit-scale truncated profile plus its eps-rescaling.

    `scaled(r)` evaluates the rescaled profile bar-H(r/eps) which is identically
    +-1 for |r| >= 2*eps*Lambda.
    """

    def __init__(self, value, derivative, eps, base):
        super().__init__('truncated ' + base.name, value, derivative,
                         support_radius=2.0 * eps.Lambda)
        self.eps = eps
        self.base = base

    def scaled(self, r):
        return self(np.asarray(r, dtype=float) / self.eps.value)

    def scaled_derivative(self, r):
        return self.derivative(np.asarray(r, dtype=float) / self.eps.value) / self.eps.value


class CollapsingProfile:
    """Even profile Psi_t(r) = bar-H^eps(-|r| + 2 eps Lambda - t)."""

    def __init__(self, truncated, t):
        self.truncated = truncated
        self.t = float(t)
        eps = truncated.eps
        self.offset = 2.0 * eps.value * eps.Lambda

    @property
    def dead_radius(self):
        return max(0.0, 2.0 * self.offset - self.t)

    def argument(self, r):
        return -np.abs(np.asarray(r, dtype=float)) + self.offset - self.t

    def __call__(self, r):
        return self.truncated.scaled(self.argument(r))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return -np.sign(r) * self.truncated.scaled_derivative(self.argument(r))

    def __repr__(self):
        return f'<CollapsingProfile t={self.t:.4g}>'
