# app/models/potential.py
import math

import numpy as np
from scipy.interpolate import CubicSpline

from app.exceptions import DomainError, InputError

# The quartic is kept on |x| <= BLEND_START and replaced by a parabola beyond BLEND_END
BLEND_START = 2.0
BLEND_END = 2.5


def _smoothstep(s):
    """Quintic step with vanishing first and second derivatives at 0 and 1."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s ** 2)


def _smoothstep_d1(s):
    inside = (s > 0) & (s < 1)
    return np.where(inside, 30 * s ** 2 * (1 - s) ** 2, 0.0)


def _smoothstep_d2(s):
    inside = (s > 0) & (s < 1)
    return np.where(inside, 60 * s * (1 - s) * (1 - 2 * s), 0.0)


class Potential:
    """
    Even double well with wells at +-1.

    kind='standard' is (1-x^2)^2/4 on |x| <= 2, blended C^2 into a parabola
    on [2, 2.5]; `scale` multiplies the whole well. kind='table' wraps a
    spline through tabulated (x, W) samples on x >= 0, mirrored.
    """

    def __init__(self, kind='standard', scale=1.0, table=None, source=None):
        if kind not in ('standard', 'table'):
            raise InputError(f"Unknown potential kind '{kind}'")
        if scale <= 0:
            raise InputError("Potential scale must be positive")
        self.kind = kind
        self.scale = float(scale)
        self.source = source
        self.modification_radius = BLEND_START
        self._spline = None
        if kind == 'table':
            self._spline = self._build_spline(table)

    @staticmethod
    def _build_spline(table):
        if table is None:
            raise InputError("A table potential needs (x, W) samples")
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 8:
            raise InputError("Potential table must have at least 8 rows of (x, W)")
        x, w = table[:, 0], table[:, 1]
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise InputError("Potential table must start at x=0 with increasing x")
        if x[-1] < BLEND_END:
            raise InputError(f"Potential table must reach x >= {BLEND_END}")
        if np.any(w < 0):
            raise DomainError("Potential table has negative values")
        # clamped at 0 so the even extension stays C^1
        spline = CubicSpline(x, w, bc_type=((1, 0.0), 'not-a-knot'))
        if abs(float(spline(1.0))) > 1e-8 or float(spline(1.0, 2)) <= 0:
            raise DomainError("Tabulated potential must have a nondegenerate well at 1")
        return spline

    # -- standard quartic and its quadratic extension -----------------------

    @staticmethod
    def _quartic(x, k=0):
        if k == 0:
            return (1 - x ** 2) ** 2 / 4
        if k == 1:
            return x ** 3 - x
        return 3 * x ** 2 - 1

    @classmethod
    def _parabola(cls, x, k=0):
        w0 = cls._quartic(BLEND_END)
        w1 = cls._quartic(BLEND_END, 1)
        dx = x - BLEND_END
        if k == 0:
            return w0 + w1 * dx + dx ** 2
        if k == 1:
            return w1 + 2 * dx
        return 2.0 + 0 * dx

    @classmethod
    def _standard(cls, x, k):
        a = np.abs(x)
        s = (a - BLEND_START) / (BLEND_END - BLEND_START)
        width = BLEND_END - BLEND_START
        q = [cls._quartic(a, j) for j in range(k + 1)]
        p = [cls._parabola(a, j) for j in range(k + 1)]
        b = [_smoothstep(s), _smoothstep_d1(s) / width, _smoothstep_d2(s) / width ** 2]
        diff = [p[j] - q[j] for j in range(k + 1)]
        if k == 0:
            value = q[0] + b[0] * diff[0]
        elif k == 1:
            value = q[1] + b[0] * diff[1] + b[1] * diff[0]
        else:
            value = q[2] + b[0] * diff[2] + 2 * b[1] * diff[1] + b[2] * diff[0]
        # odd derivative of an even function
        if k == 1:
            value = np.sign(x) * value
        return value

    def _table(self, x, k):
        a = np.abs(x)
        top = self._spline.x[-1]
        inside = self._spline(np.minimum(a, top), k)
        # quadratic continuation past the last sample
        dx = np.maximum(a - top, 0.0)
        w0, w1 = self._spline(top), self._spline(top, 1)
        if k == 0:
            value = np.where(a > top, w0 + w1 * dx + dx ** 2, inside)
        elif k == 1:
            value = np.sign(x) * np.where(a > top, w1 + 2 * dx, inside)
        else:
            value = np.where(a > top, 2.0, inside)
        return value

    def _eval(self, x, k):
        x = np.asarray(x, dtype=float)
        if self.kind == 'standard':
            value = self._standard(x, k)
        else:
            value = self._table(x, k)
        value = self.scale * value
        return value if value.ndim else float(value)

    def W(self, x):
        return self._eval(x, 0)

    def dW(self, x):
        return self._eval(x, 1)

    def d2W(self, x):
        return self._eval(x, 2)

    def scaled(self, factor):
        clone = Potential.__new__(Potential)
        clone.__dict__.update(self.__dict__)
        clone.scale = self.scale * factor
        return clone

    def __repr__(self):
        return f'<Potential {self.kind} scale={self.scale}>'

    def to_dict(self):
        return {'kind': self.kind, 'scale': self.scale, 'source': self.source,
                'modification_radius': self.modification_radius}


class Epsilon:
    """Interface width parameter; Lambda = 3|log eps| sets the truncation radius."""

    def __init__(self, value):
        value = float(value)
        if not 0.0 < value < math.exp(-1):
            raise DomainError(f"eps must lie in (0, 1/e), got {value}")
        self.value = value

    @property
    def Lambda(self):
        return 3.0 * abs(math.log(self.value))

    @property
    def eps_log(self):
        """eps*|log eps|, monotone increasing on (0, 1/e)."""
        return self.value * abs(math.log(self.value))

    def __float__(self):
        return self.value

    def __repr__(self):
        return f'<Epsilon {self.value}>'

    def to_dict(self):
        return {'eps': self.value, 'Lambda': self.Lambda}
