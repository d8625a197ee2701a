"""Seeding of jets along directions on harmonic space.

A probe is a list of groups ``(kind, items, degree)``:

* ``("x", [(i, a), ...], d)``      coordinate directions d/dx^{ia}
* ``("frame", [("+", a), ...], d)`` frame fields e_{+a}, e_{-a}
* ``("flow", ["Hpp", ...], d)``     fiber flows U -> U exp(t H)
* ``("expcoord", ["G0", ...], d)``  one joint exponential chart U exp(sum t_k G_k)

Each item becomes one infinitesimal parameter.  Items act in order, so the
coefficient of eps_k eps_l (k before l) is V_k(V_l f).  Indices are 0-based.
"""

from __future__ import annotations

import numpy as np

from .harmonics import GENERATORS, raise_index
from .jets import Jet, expm_nilpotent, jet_space


def space_for(groups, base=()):
    return jet_space(tuple(base) + tuple((len(items), deg) for _, items, deg in groups))


def apply_groups(xj, Uj, groups, first_var):
    """Displace (xj, Uj) along ``groups``, using parameters from ``first_var`` on."""
    space = xj.space
    k = first_var
    two_n = xj.shape[-1]
    for kind, items, deg in groups:
        if kind == "expcoord":
            X = None
            for m, name in enumerate(items):
                term = Jet.variable(space, k + m) * GENERATORS[name]
                X = term if X is None else X + term
            Uj = Uj @ expm_nilpotent(X, order=deg)
            k += len(items)
            continue
        for item in items:
            eps = Jet.variable(space, k)
            if kind == "x":
                i, a = item
                E = np.zeros((2, two_n))
                E[i, a] = 1.0
                xj = xj + eps * E
            elif kind == "frame":
                sign, a = item
                col = Uj[..., :, 0 if sign == "+" else 1]
                d = raise_index(col) * eps
                onehot = np.zeros(two_n)
                onehot[a] = 1.0
                xj = xj + d[..., :, None] * onehot
            elif kind == "flow":
                Uj = Uj @ expm_nilpotent(eps * GENERATORS[item], order=deg)
            else:
                raise ValueError(f"unknown direction kind {kind!r}")
            k += 1
    return xj, Uj


def seed(x, U, groups):
    """Return (space, xj, Uj) for the base point (x, U) displaced along ``groups``."""
    space = space_for(groups)
    xj = Jet.const(space, np.asarray(x, dtype=complex))
    Uj = Jet.const(space, np.asarray(U, dtype=complex))
    xj, Uj = apply_groups(xj, Uj, groups, 0)
    return space, xj, Uj


def extend(xj, Uj, groups):
    """Embed jets into a larger space and displace them along extra directions."""
    parent = xj.space
    child = space_for(groups, parent.groups)
    xe, Ue = xj.embed(child), Uj.embed(child)
    xe, Ue = apply_groups(xe, Ue, groups, parent.nvars)
    return child, xe, Ue
