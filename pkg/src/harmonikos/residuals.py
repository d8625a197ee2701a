"""Named residual magnitudes with pass/fail against tolerances."""

from __future__ import annotations

import numpy as np


class ResidualReport:
    def __init__(self, title=""):
        self.title = title
        self.entries = {}

    def add(self, name, values, tol=None, exact=False, note=None):
        v = np.abs(np.asarray(values)).astype(float).ravel()
        entry = {
            "max": float(v.max()) if v.size else 0.0,
            "mean": float(v.mean()) if v.size else 0.0,
            "n_samples": int(v.size),
            "tol": None if tol is None else float(tol),
        }
        if exact:
            entry["exact"] = True
        if note:
            entry["note"] = note
        entry["pass"] = True if tol is None else bool(entry["max"] <= tol)
        self.entries[name] = entry
        return entry

    def __getitem__(self, name):
        return self.entries[name]

    def __contains__(self, name):
        return name in self.entries

    def max(self, name):
        return self.entries[name]["max"]

    @property
    def passed(self):
        return all(e["pass"] for e in self.entries.values())

    def failing(self):
        return [k for k, e in self.entries.items() if not e["pass"]]

    def merge(self, other, prefix=""):
        for k, e in other.entries.items():
            self.entries[prefix + k] = dict(e)
        return self

    def to_json(self):
        return {k: dict(self.entries[k]) for k in sorted(self.entries)}

    def __repr__(self):
        rows = [f"{k}: max={e['max']:.3e} pass={e['pass']}" for k, e in self.entries.items()]
        return f"ResidualReport({self.title!r}; " + "; ".join(rows) + ")"
