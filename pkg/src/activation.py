#!/usr/bin/env python3
"""
Activation families with a flat region.

Each family carries the activation ``A_0``, its generalized derivative ``a``
(the true derivative off the kink set ``S``), the flat interval ``(lo, hi)``
on which ``a`` vanishes, a lower bound on ``inf A_0`` and a sequence of C¹
approximations ``A_r`` that agree exactly with ``A_0`` and ``a`` at any fixed
point once ``r`` is large enough.

Families are plain classes rather than closures so they pickle into worker
processes.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from error_handler import ValidationError

ArrayFn = Callable[[np.ndarray], np.ndarray]


class ActivationFamily(ABC):
    """Base class; subclasses set the attributes below in ``__init__``."""

    name: str = "activation"
    exception_set: Tuple[float, ...] = ()
    flat_lo: float = -np.inf
    flat_hi: float = 0.0
    inf_bound: float = -np.inf
    monotone_breaks: Tuple[float, ...] = ()

    @abstractmethod
    def value(self, x: np.ndarray) -> np.ndarray:
        """``A_0(x)``."""

    @abstractmethod
    def gen_deriv(self, x: np.ndarray) -> np.ndarray:
        """``a(x)``, defined everywhere."""

    def mollified_value(self, x: np.ndarray, r: int) -> np.ndarray:
        return self.value(x)

    def mollified_derivative(self, x: np.ndarray, r: int) -> np.ndarray:
        return self.gen_deriv(x)

    def __call__(self, x, r: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.value(x) if r == 0 else self.mollified_value(x, int(r))

    def derivative(self, x, r: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.gen_deriv(x) if r == 0 else self.mollified_derivative(x, int(r))

    def mollified(self, r: int) -> Tuple[ArrayFn, ArrayFn]:
        """The pair ``(A_r, A_r')``."""
        if r < 1:
            raise ValidationError("Approximation index r must be >= 1", {"field": "r"})
        return (lambda x: self(x, r)), (lambda x: self.derivative(x, r))

    def is_flat(self, x) -> np.ndarray:
        """Elementwise membership in ``(lo, hi) \\ S``."""
        x = np.asarray(x, dtype=np.float64)
        inside = (x > self.flat_lo) & (x < self.flat_hi)
        for s in self.exception_set:
            inside &= x != s
        return inside

    def interval_image(self, lo, hi) -> Tuple[np.ndarray, np.ndarray]:
        """
        Elementwise ``[min, max]`` of ``A_0`` over ``[lo, hi]``.

        ``A_0`` is monotone between consecutive ``monotone_breaks``, so the
        extrema sit at the endpoints or at break points inside the interval.
        """
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        v_lo = self.value(lo)
        v_hi = self.value(hi)
        out_lo = np.minimum(v_lo, v_hi)
        out_hi = np.maximum(v_lo, v_hi)
        for c in self.monotone_breaks:
            vc = self.value(np.full_like(lo, c))
            inside = (lo < c) & (c < hi)
            out_lo = np.where(inside, np.minimum(out_lo, vc), out_lo)
            out_hi = np.where(inside, np.maximum(out_hi, vc), out_hi)
        return out_lo, out_hi

    def params(self) -> Dict[str, Any]:
        return {}

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"name": self.name}
        record.update(self.params())
        return record

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.name}({args})"


class PiecewiseLinearActivation(ActivationFamily):
    """
    Continuous piecewise-linear activation with kinks ``(c, A_0(c), left slope, right slope)``.

    ``A_r`` replaces ``A_0`` on ``|x - c| < h`` with ``h = min(1/r, gap/2)``
    by the cubic ``v + s_R (2t²/h - t³/h²)`` right of the kink and
    ``v - s_L (2u²/h - u³/h²)`` left of it (``t = x - c``, ``u = c - x``).
    Both pieces meet ``A_0`` in value and slope at ``c ± h`` and have slope 0
    at ``c``, where ``a(c) = 0``.
    """

    kinks: Tuple[Tuple[float, float, float, float], ...] = ()

    def _half_width(self, r: int) -> float:
        h = 1.0 / r
        centers = sorted(c for c, _, _, _ in self.kinks)
        for left, right in zip(centers, centers[1:]):
            h = min(h, (right - left) / 2.0)
        return h

    def mollified_value(self, x: np.ndarray, r: int) -> np.ndarray:
        out = np.array(self.value(x), dtype=np.float64)
        h = self._half_width(r)
        for c, v, s_left, s_right in self.kinks:
            t = x - c
            right = (t >= 0) & (t < h)
            left = (t < 0) & (-t < h)
            tr = np.where(right, t, 0.0)
            ul = np.where(left, -t, 0.0)
            out = np.where(right, v + s_right * (2 * tr**2 / h - tr**3 / h**2), out)
            out = np.where(left, v - s_left * (2 * ul**2 / h - ul**3 / h**2), out)
        return out

    def mollified_derivative(self, x: np.ndarray, r: int) -> np.ndarray:
        out = np.array(self.gen_deriv(x), dtype=np.float64)
        h = self._half_width(r)
        for c, _, s_left, s_right in self.kinks:
            t = x - c
            right = (t >= 0) & (t < h)
            left = (t < 0) & (-t < h)
            tr = np.where(right, t, 0.0)
            ul = np.where(left, -t, 0.0)
            out = np.where(right, s_right * (4 * tr / h - 3 * tr**2 / h**2), out)
            out = np.where(left, s_left * (4 * ul / h - 3 * ul**2 / h**2), out)
        return out


class ReLU(PiecewiseLinearActivation):
    name = "relu"

    def __init__(self) -> None:
        self.exception_set = (0.0,)
        self.flat_lo = -np.inf
        self.flat_hi = 0.0
        self.inf_bound = 0.0
        self.kinks = ((0.0, 0.0, 0.0, 1.0),)

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0.0)

    def gen_deriv(self, x: np.ndarray) -> np.ndarray:
        return np.where(x > 0, 1.0, 0.0)


class Clip(PiecewiseLinearActivation):
    """``max(u, min(x, v))``."""

    name = "clip"

    def __init__(self, u: float, v: float) -> None:
        u, v = float(u), float(v)
        if not u < v:
            raise ValidationError(
                f"clip needs u < v, got u={u}, v={v}",
                {"field": "activation.u", "u": u, "v": v},
            )
        self.u, self.v = u, v
        self.exception_set = (u, v)
        self.flat_lo = -np.inf
        self.flat_hi = u
        self.inf_bound = u
        self.kinks = ((u, u, 0.0, 1.0), (v, v, 1.0, 0.0))

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.u, self.v)

    def gen_deriv(self, x: np.ndarray) -> np.ndarray:
        return np.where((x > self.u) & (x < self.v), 1.0, 0.0)

    def params(self) -> Dict[str, Any]:
        return {"u": self.u, "v": self.v}


class RePU(ActivationFamily):
    """``max(x, 0)^p``; already C¹, so ``A_r = A_0``."""

    name = "repu"

    def __init__(self, p: int) -> None:
        if isinstance(p, bool) or int(p) != p or p < 2:
            raise ValidationError(f"repu needs an integer power p >= 2, got {p}", {"field": "activation.p"})
        self.p = int(p)
        self.exception_set = ()
        self.flat_lo = -np.inf
        self.flat_hi = 0.0
        self.inf_bound = 0.0

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0.0) ** self.p

    def gen_deriv(self, x: np.ndarray) -> np.ndarray:
        return self.p * np.maximum(x, 0.0) ** (self.p - 1)

    def params(self) -> Dict[str, Any]:
        return {"p": self.p}


class CustomActivation(ActivationFamily):
    """
    User-supplied activation.

    ``monotone_breaks`` must list every point where ``value`` may change
    monotonicity, otherwise ``interval_image`` is unsound. Without mollified
    callables ``A_r = A_0`` is assumed, which is only correct for C¹ ``value``.
    """

    def __init__(
        self,
        name: str,
        value: ArrayFn,
        gen_deriv: ArrayFn,
        exception_set: Iterable[float] = (),
        flat_lo: float = -np.inf,
        flat_hi: float = 0.0,
        inf_bound: float = -np.inf,
        mollified_value: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
        mollified_derivative: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
        monotone_breaks: Iterable[float] = (),
    ) -> None:
        if not flat_lo < flat_hi:
            raise ValidationError("Flat interval must satisfy lo < hi", {"field": "activation.flat"})
        self.name = name
        self._value = value
        self._gen_deriv = gen_deriv
        self._mollified_value = mollified_value
        self._mollified_derivative = mollified_derivative
        self.exception_set = tuple(sorted(float(s) for s in exception_set))
        self.flat_lo = float(flat_lo)
        self.flat_hi = float(flat_hi)
        self.inf_bound = float(inf_bound)
        self.monotone_breaks = tuple(sorted(float(c) for c in monotone_breaks))

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._value(x), dtype=np.float64)

    def gen_deriv(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._gen_deriv(x), dtype=np.float64)

    def mollified_value(self, x: np.ndarray, r: int) -> np.ndarray:
        if self._mollified_value is None:
            return self.value(x)
        return np.asarray(self._mollified_value(x, r), dtype=np.float64)

    def mollified_derivative(self, x: np.ndarray, r: int) -> np.ndarray:
        if self._mollified_derivative is None:
            return self.gen_deriv(x)
        return np.asarray(self._mollified_derivative(x, r), dtype=np.float64)


def relu() -> ReLU:
    return ReLU()


def clip(u: float, v: float) -> Clip:
    return Clip(u, v)


def repu(p: int) -> RePU:
    return RePU(p)


def activation_from_name(name: str, **params: Any) -> ActivationFamily:
    """Build a shipped family from its config name and parameters."""
    if name == "relu":
        return relu()
    if name == "clip":
        if "u" not in params or "v" not in params:
            raise ValidationError("clip needs parameters u and v", {"field": "activation"})
        return clip(params["u"], params["v"])
    if name == "repu":
        if "p" not in params:
            raise ValidationError("repu needs parameter p", {"field": "activation.p"})
        return repu(params["p"])
    raise ValidationError(f"Unknown activation: {name}", {"field": "activation.name", "value": name})


def _flat_grid(act: ActivationFamily, n: int) -> np.ndarray:
    lo = max(act.flat_lo, -1e6)
    grid = np.linspace(lo, act.flat_hi, n + 2)[1:-1]
    return grid[act.is_flat(grid)]


def check_flatness(act: ActivationFamily, n: int = 10_000) -> bool:
    """``a`` vanishes on a dense grid of the flat interval minus ``S``."""
    grid = _flat_grid(act, n)
    return bool(np.all(act.gen_deriv(grid) == 0.0))


def check_nonconstancy(act: ActivationFamily, probes: Optional[Sequence[float]] = None) -> bool:
    """``A_0`` is not constant: some probe has ``A_0(x) != A_0(0)``."""
    grid = np.linspace(-10.0, 10.0, 2001) if probes is None else np.asarray(probes, dtype=np.float64)
    return bool(np.any(act.value(grid) != act.value(np.zeros(1))[0]))


def check_eventual_exactness(
    act: ActivationFamily, probes: Optional[Sequence[float]] = None, r_cap: int = 1024
) -> bool:
    """
    ``|A_r(x) - A_0(x)| + |A_r'(x) - a(x)| == 0`` for ``r`` in ``{r_cap, 2 r_cap, 4 r_cap}``.

    Probes closer than ``1/r_cap`` to a kink (but not on it) are dropped;
    they only become exact for larger ``r``.
    """
    grid = np.linspace(-5.0, 5.0, 1001) if probes is None else np.asarray(probes, dtype=np.float64)
    kinks = np.asarray(act.exception_set, dtype=np.float64)
    if kinks.size:
        dist = np.min(np.abs(grid[:, None] - kinks[None, :]), axis=1)
        grid = grid[(dist == 0.0) | (dist > 1.0 / r_cap)]
    base_value = act.value(grid)
    base_deriv = act.gen_deriv(grid)
    for r in (r_cap, 2 * r_cap, 4 * r_cap):
        err = np.abs(act(grid, r) - base_value) + np.abs(act.derivative(grid, r) - base_deriv)
        if np.any(err != 0.0):
            return False
    return True


def check_inf_bound(act: ActivationFamily, samples: Optional[Sequence[float]] = None) -> bool:
    """The declared lower bound does not exceed ``A_0`` on the samples."""
    grid = np.linspace(-100.0, 100.0, 20_001) if samples is None else np.asarray(samples, dtype=np.float64)
    return bool(act.inf_bound <= np.min(act.value(grid)))


def invariant_report(act: ActivationFamily) -> List[Tuple[str, bool]]:
    """All activation invariants as ``(name, passed)`` pairs."""
    return [
        ("flatness", check_flatness(act)),
        ("nonconstancy", check_nonconstancy(act)),
        ("eventual_exactness", check_eventual_exactness(act)),
        ("inf_bound", check_inf_bound(act)),
    ]
