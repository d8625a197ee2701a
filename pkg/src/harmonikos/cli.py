"""Command line entry point: reconstruct, verify, norms, compactness, oracle.

Every command writes one JSON document (schema ``report_v1``) holding the
resolved configuration, the tool version, the sampled fields and the residual
suites.  Exit status: 0 all entries pass, 1 some entry fails, 2 bad
configuration or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .estimates import (EstimateError, elliptic_ratio_check, exp_gauge_ratio,
                        family_from_config, norm_profile, parse_box, prepotential_bound_check,
                        uniform_grid, compactness_run)
from .fields import ChargeError, ParseError, PrepotentialError, load_source, make_prepotential
from .flatspace import real_to_x
from .harmonics import HarmonicError, grid_from_spec, random_su2
from .lie import AlgebraError, get_algebra
from .ode import IntegrationError, Tolerances
from .oracle import bilinear_oracle
from .reconstruct import (BridgeOptions, ReconstructionError, extract_central, reconstruct,
                          sample_fields)
from .residuals import ResidualReport
from .verify import (asd_suite, bianchi_yangmills_exact, central_sampler, check_analytic_gauge,
                     check_bianchi_yangmills, check_lift_conditions, leznov_residual,
                     tolerance_profile)

SCHEMA = "report_v1"
TOOL = "harmonikos"
SUITES = ("gauge", "asd", "leznov", "lift", "central", "bianchi", "fd")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    algebra: str = "sl2"
    prepotential: str | None = None
    box: list = field(default_factory=lambda: [-1.0, 1.0])
    nx: int = 3
    harmonics_per_point: int = 1
    haar: str = "euler:4"
    ode_tol: float = 1e-9
    circle_nodes: int = 64
    order: int = 20
    fd_h: float = 0.05
    fd_sites: int = 2
    check_samples: int = 8
    tol_profile: object = "default"
    suite: str = "all"
    seed: int = 0
    family: str | None = None
    limit: int = -1
    case: str = "abelian"
    coef: float = 0.7
    generator: int = 1

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.algebra, str) and self.algebra, "algebra must be a selector string")
        need(isinstance(self.box, list) and len(self.box) in (2, 8), "box needs 2 or 8 bounds")
        try:
            self.box = [float(v) for v in self.box]
        except (TypeError, ValueError):
            raise ConfigError("box bounds must be numbers") from None
        need(all(np.isfinite(self.box)), "box bounds must be finite")
        need(all(lo < hi for lo, hi in zip(self.box[::2], self.box[1::2])), "box needs lo < hi")
        for name, lo, hi in (("nx", 1, 12), ("harmonics_per_point", 1, 64), ("circle_nodes", 8, 1024),
                             ("order", 1, 200), ("fd_sites", 0, 64), ("check_samples", 0, 4096),
                             ("generator", 1, 64)):
            v = getattr(self, name)
            need(isinstance(v, int) and not isinstance(v, bool), f"{name} must be an integer")
            need(lo <= v <= hi, f"{name} must lie in [{lo}, {hi}]")
        need(self.circle_nodes >= 2 * self.order + 2, "circle_nodes must exceed 2*order + 1")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed must be a non-negative integer")
        need(isinstance(self.limit, int), "limit must be an integer")
        for name, lo, hi in (("ode_tol", 0.0, 1e-3), ("fd_h", 0.0, 0.5)):
            v = getattr(self, name)
            need(isinstance(v, (int, float)) and lo < v <= hi, f"{name} must lie in ({lo}, {hi}]")
        need(np.isfinite(self.coef), "coef must be finite")
        need(self.case in ("abelian", "zero"), "case must be 'abelian' or 'zero'")
        need(self.suite == "all" or all(s in SUITES for s in self.suite.split(",")),
             f"suite must be 'all' or a comma list from {', '.join(SUITES)}")
        try:
            tolerance_profile(self.tol_profile)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def suites(self):
        return SUITES if self.suite == "all" else tuple(self.suite.split(","))

    @property
    def tolerances(self):
        return tolerance_profile(self.tol_profile)

    def bridge_options(self):
        tol = Tolerances(rtol=self.ode_tol, atol=self.ode_tol * 1e-2)
        return BridgeOptions(circle_nodes=self.circle_nodes, order=self.order, tol=tol)

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(doc) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(extra)}")
        return cls(**doc).validate()


# JSON helpers ---------------------------------------------------------------

def _plain(v):
    """Recursively convert numpy scalars/arrays to JSON-safe values."""
    if isinstance(v, dict):
        return {str(k): _plain(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(w) for w in v]
    if isinstance(v, np.ndarray):
        if np.iscomplexobj(v):
            return {"re": _plain(v.real.tolist()), "im": _plain(v.imag.tolist())}
        return _plain(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, complex):
        return {"re": _plain(v.real), "im": _plain(v.imag)}
    return v


def from_complex(doc):
    """Inverse of the {"re", "im"} encoding."""
    return np.asarray(doc["re"], float) + 1j * np.asarray(doc["im"], float)


def dumps(doc):
    return json.dumps(_plain(doc), sort_keys=True, indent=1) + "\n"


# sampling ---------------------------------------------------------------------

def sample_points(cfg):
    """Real grid points mapped to x, each paired with seeded random SU(2) harmonics."""
    box = parse_box(cfg.box if len(cfg.box) == 8 else list(cfg.box), 4)
    y = uniform_grid(box, cfg.nx)
    rng = np.random.default_rng(cfg.seed)
    k = cfg.harmonics_per_point
    x = np.repeat(real_to_x(y), k, axis=0)
    U = random_su2(rng, len(x))
    return x, U


def _samples_doc(x, U, vals):
    keys = ("g", "App", "Aplus", "F_pm")
    return [{"x": x[i], "U": U[i], **{k: vals[k][i] for k in keys}} for i in range(len(x))]


def _flat(reports):
    out = ResidualReport("all")
    for name, rep in reports.items():
        out.merge(rep, name + ".")
    return out


def _status(reports):
    failing = [f"{name}.{e}" for name, rep in reports.items() for e in rep.failing()]
    return ("pass" if not failing else "fail"), failing


# suites -------------------------------------------------------------------------

def run_suites(cfg, Gd, x, U, vals):
    tol = cfg.tolerances
    alg = Gd.algebra
    m = min(cfg.check_samples, len(x))
    xs, Us = x[:m], U[:m]
    reps, meta = {}, {}
    todo = cfg.suites
    if "gauge" in todo and m:
        reps["gauge"] = check_analytic_gauge(Gd, xs, Us, tol["algebraic"])
    if "asd" in todo:
        r = asd_suite(vals["F_pm"], U, alg, tol["algebraic"], tol["symmetry"])
        reps["asd"] = r
        meta["norm_F"] = r.meta["norm_F"]
    if "leznov" in todo and m:
        reps["leznov"] = leznov_residual(Gd.second_prepotential, Gd.prepotential, xs, Us, tol["algebraic"])
    if "lift" in todo and m:
        reps["lift"] = check_lift_conditions(Gd, xs, Us, tol["ode"])
    if "central" in todo:
        ce = extract_central(Gd, x[0], grid_from_spec(cfg.haar))
        r = ResidualReport("central")
        r.add("A_defect", [ce.A_defect], tol["ode"])
        r.add("F_defect", [ce.F_defect], tol["ode"])
        reps["central"] = r
    if "bianchi" in todo and m:
        reps["bianchi"] = bianchi_yangmills_exact(Gd, xs, tol["bianchi"])
    if "fd" in todo and cfg.fd_sites:
        rng = np.random.default_rng(cfg.seed + 1)
        lo, hi = np.asarray(cfg.box[::2]), np.asarray(cfg.box[1::2])
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        sites = mid + 0.5 * half * rng.uniform(-1, 1, (cfg.fd_sites, 4))
        r = check_bianchi_yangmills(central_sampler(Gd), sites, cfg.fd_h, alg, tol["fd"])
        reps["fd"] = r
        meta["fd"] = r.meta
    st = Gd.bridge.stats
    meta["bridge"] = {k: st[k] for k in sorted(st) if k in ("gluing_max", "tail_max", "steps")}
    return reps, meta


# commands --------------------------------------------------------------------

def _prepare(cfg):
    if cfg.prepotential is None:
        raise ConfigError("--prepotential is required")
    alg = get_algebra(cfg.algebra)
    src = load_source(cfg.prepotential)
    A = make_prepotential(src, alg)
    grid_from_spec(cfg.haar)
    return alg, src, A


def _base_doc(command, cfg):
    return {"schema": SCHEMA, "tool": {"name": TOOL, "version": __version__},
            "command": command, "config": cfg.to_json()}


def cmd_reconstruct(cfg, ctx):
    alg, src, A = _prepare(cfg)
    x, U = sample_points(cfg)
    ctx["stage"] = "numeric"
    Gd = reconstruct(A, cfg.bridge_options())
    vals = sample_fields(Gd, x, U)
    reps, meta = run_suites(cfg, Gd, x, U, vals)
    doc = _base_doc("reconstruct", cfg)
    doc.update(prepotential=src, samples=_samples_doc(x, U, vals),
               residuals={k: reps[k].to_json() for k in reps}, diagnostics=meta)
    return doc, reps


def cmd_verify(cfg, ctx, stored):
    alg, src, A = _prepare(cfg)
    try:
        samples = stored["samples"]
        x = np.stack([from_complex(s["x"]) for s in samples])
        U = np.stack([from_complex(s["U"]) for s in samples])
        old = {k: np.stack([from_complex(s[k]) for s in samples]) for k in ("App", "F_pm")}
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"gauge data is malformed: {exc}") from None
    ctx["stage"] = "numeric"
    Gd = reconstruct(A, cfg.bridge_options())
    vals = sample_fields(Gd, x, U)
    reps, meta = run_suites(cfg, Gd, x, U, vals)
    r = ResidualReport("stored")
    for k in ("App", "F_pm"):
        r.add(k, alg.matrix_norm(vals[k] - old[k]).reshape(len(x), -1).max(axis=-1), cfg.tolerances["ode"])
    reps["stored"] = r
    doc = _base_doc("verify", cfg)
    doc.update(prepotential=src, samples=_samples_doc(x, U, vals),
               residuals={k: reps[k].to_json() for k in reps}, diagnostics=meta)
    return doc, reps


def _refined_haar(spec):
    grid = grid_from_spec(spec)
    if isinstance(spec, str) and spec.startswith("euler"):
        parts = spec.split(":")
        ns = [int(v) for v in parts[1].split("x")] if len(parts) > 1 else [12]
        return grid, grid_from_spec("euler:" + "x".join(str(v + 2) for v in ns))
    if isinstance(spec, str) and spec.startswith("mc"):
        parts = spec.split(":") + [None, None]
        n = int(parts[1] or 100000)
        return grid, grid_from_spec(f"mc:{2 * n}:{parts[2] or 7}")
    raise ConfigError("norms needs an euler:... or mc:... Haar spec")


def _drift(a, b):
    if a is None or b is None:
        return None
    if not (np.isfinite(a) and np.isfinite(b)):
        return float("inf")
    return abs(a - b) / max(abs(b), 1e-300)


def cmd_norms(cfg, ctx):
    alg, src, A = _prepare(cfg)
    coarse, fine = _refined_haar(cfg.haar)
    ctx["stage"] = "numeric"
    tol = cfg.tolerances
    Gd = reconstruct(A, cfg.bridge_options())
    reps, out = {}, {}
    eg = ResidualReport("exp_gauge")
    rows = []
    for nx in (cfg.nx, cfg.nx + 1):
        vals, rep = exp_gauge_ratio(Gd, cfg.box, nx)
        eg.merge(rep, f"nx{nx}.")
        rows.append(vals)
    out["exp_gauge"] = rows
    d = _drift(rows[0]["ratio"], rows[1]["ratio"])
    if d is not None:
        eg.add("ratio_drift", [d], tol["drift"])
    reps["exp_gauge"] = eg

    if getattr(A, "normalized_form", False):
        pb = ResidualReport("prepotential_bound")
        brow = [prepotential_bound_check(A, r["F_C0"], cfg.box, coarse, nx)
                for r, nx in zip(rows, (cfg.nx, cfg.nx + 1))]
        out["prepotential_bound"] = brow
        d = _drift(brow[0]["ratio"], brow[1]["ratio"])
        if d is not None:
            pb.add("ratio_drift", [d], tol["drift"])
        reps["prepotential_bound"] = pb
    else:
        out["prepotential_bound"] = {"applicable": False,
                                     "reason": "prepotential is not in normalized form"}

    xs = real_to_x(uniform_grid(parse_box(cfg.box, 4), 2))[: max(cfg.check_samples, 1)]
    el = ResidualReport("elliptic")
    out["elliptic"] = []
    for k in (1, 2):
        a, ra = elliptic_ratio_check(A, Gd.second_prepotential, xs, k, coarse)
        b, rb = elliptic_ratio_check(A, Gd.second_prepotential, xs, k, fine)
        el.merge(ra, f"C{k}.coarse.")
        el.merge(rb, f"C{k}.fine.")
        out["elliptic"].append({"coarse": a, "fine": b})
        for key in ("max_ratio", "max_inverse"):
            d = _drift(a[key], b[key])
            if d is not None:
                el.add(f"C{k}_{key}_drift", [d], tol["drift"])
    reps["elliptic"] = el
    prof = norm_profile(A, cfg.box, order=4)
    out["prepotential_profile"] = prof.to_json()
    doc = _base_doc("norms", cfg)
    doc.update(prepotential=src, estimates=out, residuals={k: reps[k].to_json() for k in reps})
    return doc, reps


def cmd_compactness(cfg, ctx):
    if cfg.family is None:
        raise ConfigError("--family is required")
    path = Path(cfg.family)
    if path.is_file():
        fam_doc = json.loads(path.read_text(encoding="utf-8"))
    else:
        fam_doc = json.loads(cfg.family)
    if not isinstance(fam_doc, dict):
        raise ConfigError("family must be a JSON object")
    fam_doc.setdefault("algebra", cfg.algebra)
    try:
        fam = family_from_config(fam_doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed family: {exc}") from None
    alg = get_algebra(fam.algebra)
    for s, _ in fam.sources:
        make_prepotential(load_source(s), alg)
    nmem = len(fam.sources)
    limit = cfg.limit if cfg.limit >= 0 else nmem + cfg.limit
    if not 0 <= limit < nmem or nmem < 2:
        raise ConfigError("limit index out of range (or fewer than two members)")
    x, U = sample_points(cfg)
    ctx["stage"] = "numeric"
    res = compactness_run(fam, limit, x, U, cfg.box, cfg.haar, cfg.nx, cfg.bridge_options(),
                          fam_doc.get("eps_gate"), fam_doc.get("cm_gate"))
    rep = ResidualReport("compactness")
    for name, g in res["gates"].items():
        rep.add(f"gate_{name}", [0.0 if g["pass"] else 1.0], 0.0)
    doc = _base_doc("compactness", cfg)
    doc.update(family=fam_doc, result=res, residuals={"compactness": rep.to_json()})
    ctx["convergence"] = res
    return doc, {"compactness": rep}


def cmd_oracle(cfg, ctx):
    alg = get_algebra(cfg.algebra)
    if cfg.generator > alg.dim:
        raise ConfigError(f"generator T{cfg.generator} outside algebra {alg.name}")
    c = 0.0 if cfg.case == "zero" else cfg.coef
    orc = bilinear_oracle(c, alg, cfg.generator - 1)
    src = f"{c!r}*T{cfg.generator}*xm1*xm2"
    x, U = sample_points(cfg)
    ctx["stage"] = "numeric"
    vals = {"g": orc.g(x, U), "App": orc.App(x, U),
            "Aplus": orc.Aplus(x, U), "F_pm": np.array(orc.F_pm(x, U))}
    rep = asd_suite(vals["F_pm"], U, alg, cfg.tolerances["algebraic"], cfg.tolerances["symmetry"])
    cfg.prepotential = src
    doc = _base_doc("oracle", cfg)
    doc.update(prepotential=src, samples=_samples_doc(x, U, vals),
               residuals={"asd": rep.to_json()}, diagnostics={"norm_F": rep.meta["norm_F"]})
    return doc, {"asd": rep}


COMMANDS = {"reconstruct": cmd_reconstruct, "norms": cmd_norms,
            "compactness": cmd_compactness, "oracle": cmd_oracle}


# argument handling ------------------------------------------------------------

FLAG_FIELDS = {
    "algebra": str, "prepotential": str, "box": str, "nx": int, "haar": str, "ode_tol": float,
    "fd_h": float, "tol_profile": str, "seed": int, "suite": str, "family": str, "limit": int,
    "case": str, "coef": float, "generator": int, "harmonics_per_point": int,
    "check_samples": int, "fd_sites": int,
}


def build_parser():
    ap = argparse.ArgumentParser(prog=TOOL, description="Instanton reconstruction from prepotentials.")
    ap.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("reconstruct", "verify", "norms", "compactness", "oracle"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="report path (stdout if omitted)")
        p.add_argument("--timing", action="store_true", help="record wall time in the report")
        p.add_argument("--no-figure", action="store_true")
        for key, typ in FLAG_FIELDS.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
        if name == "verify":
            p.add_argument("--gauge-data", required=True, help="report written by reconstruct")
    return ap


def _parse_box(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse box {text!r}") from None
    return vals


def resolve_config(args, base=None):
    doc = dict(base or {})
    if args.config:
        try:
            doc.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for key in FLAG_FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            doc[key] = _parse_box(v) if key == "box" else v
    if isinstance(doc.get("tol_profile"), str) and doc["tol_profile"].startswith("{"):
        try:
            doc["tol_profile"] = json.loads(doc["tol_profile"])
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad tolerance profile: {exc}") from None
    return RunConfig.from_json(doc)


def _figure(path, ctx, reps):
    from . import plotting
    conv = ctx.get("convergence")
    if conv is not None:
        ks = [m["k"] for m in conv["members"]]
        devs = [m["deviation"] for m in conv["members"]]
        if ks and all(d > 0 for d in devs):
            return plotting.convergence(ks, devs, path, conv.get("rate_exponent"))
        return None
    flat = _flat(reps)
    if flat.entries:
        return plotting.residual_bars(flat, path)
    return None


CONFIG_ERRORS = (ConfigError, ParseError, ChargeError, PrepotentialError, AlgebraError,
                 HarmonicError, OSError, json.JSONDecodeError)
NUMERIC_ERRORS = (IntegrationError, ReconstructionError, EstimateError, np.linalg.LinAlgError,
                  FloatingPointError, ArithmeticError)


def _glue_negative(argv):
    # "--box -1,1" would otherwise read the bounds as an option
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--box":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--box={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_negative(argv))
    ctx = {"stage": "config"}
    t0 = time.perf_counter()
    try:
        stored = None
        base = None
        if args.command == "verify":
            stored = json.loads(Path(args.gauge_data).read_text(encoding="utf-8"))
            if not isinstance(stored, dict) or stored.get("schema") != SCHEMA:
                raise ConfigError("gauge data is not a report_v1 document")
            base = stored.get("config")
        cfg = resolve_config(args, base)
        with np.errstate(over="ignore", invalid="ignore"):
            if args.command == "verify":
                doc, reps = cmd_verify(cfg, ctx, stored)
            else:
                doc, reps = COMMANDS[args.command](cfg, ctx)
    except NUMERIC_ERRORS as exc:
        print(f"{TOOL}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CONFIG_ERRORS as exc:
        print(f"{TOOL}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        code = EXIT_CONFIG if ctx["stage"] == "config" else EXIT_NUMERIC
        print(f"{TOOL}: {'configuration' if code == EXIT_CONFIG else 'numerical'} error: {exc}",
              file=sys.stderr)
        return code

    status, failing = _status(reps)
    doc["status"] = status
    doc["failing"] = failing
    doc["timing_ms"] = round(1e3 * (time.perf_counter() - t0), 3) if args.timing else None
    text = dumps(doc)
    if args.out:
        out = Path(args.out)
        out.write_text(text, encoding="utf-8")
        if not args.no_figure:
            _figure(out.with_suffix(".png"), ctx, reps)
    else:
        sys.stdout.write(text)
    for name in failing:
        print(f"FAIL {name}", file=sys.stderr)
    return EXIT_OK if status == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
