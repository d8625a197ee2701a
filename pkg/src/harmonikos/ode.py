"""Embedded Runge-Kutta 5(4) (Dormand-Prince) for jet or array states.

All trajectories in a batch share one step sequence.  That keeps the
integration error a smooth function of the initial data, which matters
when results are later differentiated numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .jets import Jet

# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


class IntegrationError(RuntimeError):
    pass


def _raw(y):
    return y.data if isinstance(y, Jet) else np.asarray(y)


@dataclass
class Tolerances:
    rtol: float = 1e-9
    atol: float = 1e-11
    h0: float | None = None
    max_steps: int = 20000
    safety: float = 0.9


@dataclass
class Trajectory:
    """Accepted steps of a solve; supports cubic Hermite dense output."""
    s: list = field(default_factory=list)
    y: list = field(default_factory=list)
    f: list = field(default_factory=list)
    n_rejected: int = 0
    n_steps: int = 0

    def __call__(self, s):
        grid = self.s
        if not grid[0] - 1e-14 <= s <= grid[-1] + 1e-14:
            raise ValueError("dense output requested outside the solved interval")
        k = int(np.searchsorted(grid, s, side="right")) - 1
        k = min(max(k, 0), len(grid) - 2)
        s0, s1 = grid[k], grid[k + 1]
        h = s1 - s0
        th = (s - s0) / h
        h00 = 2 * th**3 - 3 * th**2 + 1
        h10 = th**3 - 2 * th**2 + th
        h01 = -2 * th**3 + 3 * th**2
        h11 = th**3 - th**2
        return self.y[k] * h00 + self.f[k] * (h * h10) + self.y[k + 1] * h01 + self.f[k + 1] * (h * h11)


def _lincomb(y, ks, cs):
    """y + sum_j cs[j] ks[j] with one output allocation."""
    if isinstance(y, Jet):
        nz = y.nz.copy()
        for k, c in zip(ks, cs):
            if c:
                nz |= k.nz
        if nz.all():
            data = y.data.copy()
            for k, c in zip(ks, cs):
                if c:
                    data += c * k.data
            return Jet(y.space, data, nz)
        # sparse jets: skip structurally zero components
        data = np.zeros(y.data.shape, np.result_type(y.data, complex))
        idx = np.flatnonzero(y.nz)
        data[idx] = y.data[idx]
        for k, c in zip(ks, cs):
            if c:
                idx = np.flatnonzero(k.nz)
                data[idx] += c * k.data[idx]
        return Jet(y.space, data, nz)
    out = np.array(y, dtype=complex, copy=True)
    for k, c in zip(ks, cs):
        if c:
            out += c * k
    return out


def _err_norm(err, y0, y1, tol):
    # error relative to the overall size of the state (all jet components)
    e, a, b = _raw(err), _raw(y0), _raw(y1)
    if not e.size:
        return 0.0
    scale = tol.atol + tol.rtol * max(np.max(np.abs(a)), np.max(np.abs(b)))
    return float(np.max(np.abs(e)) / scale)


def integrate(rhs, y0, s_end=1.0, tol=None, dense=False):
    """Integrate dy/ds = rhs(s, y) from s=0 to ``s_end`` (real, > 0).

    Returns ``(y_end, trajectory)``; the trajectory holds only the end
    points unless ``dense`` is set.
    """
    tol = tol or Tolerances()
    s, y = 0.0, y0
    f = rhs(s, y)
    traj = Trajectory()
    if dense:
        traj.s.append(s)
        traj.y.append(y)
        traj.f.append(f)

    if tol.h0 is not None:
        h = float(tol.h0)
    else:
        # standard starting-step heuristic
        d0 = np.max(np.abs(_raw(y))) if _raw(y).size else 0.0
        d1 = np.max(np.abs(_raw(f))) if _raw(f).size else 0.0
        h = 0.01 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, 0.1 * s_end) if d1 > 0 else 0.1 * s_end
    h = min(h, s_end)
    steps = 0
    while s < s_end - 1e-15 * s_end:
        if steps >= tol.max_steps:
            raise IntegrationError("maximum number of steps exceeded")
        if h < 1e-12 * s_end:
            raise IntegrationError("step size underflow")
        h = min(h, s_end - s)
        k = [f]
        for i in range(1, 7):
            acc = _lincomb(y, k, [h * a for a in _A[i]])
            k.append(rhs(s + _C[i] * h, acc))
        y_new = _lincomb(y, k, [h * b for b in _B])
        err = _lincomb(k[0] * 0.0, k, [h * e for e in _E])
        en = _err_norm(err, y, y_new, tol)
        steps += 1
        if en <= 1.0:
            s += h
            y = y_new
            traj.n_steps += 1
            f = k[6]
            if dense:
                traj.s.append(s)
                traj.y.append(y)
                traj.f.append(f)
            fac = 5.0 if en == 0 else min(5.0, tol.safety * en ** -0.2)
            h *= max(fac, 0.2)
        else:
            traj.n_rejected += 1
            h *= max(0.2, tol.safety * en ** -0.2)
        if not np.all(np.isfinite(_raw(y))):
            raise IntegrationError("non-finite state")
    if not dense:
        traj.s = [0.0, s]
        traj.y = [y0, y]
        traj.f = [None, f]
    return y, traj
