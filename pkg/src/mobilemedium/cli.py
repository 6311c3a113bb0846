"""Command line entry point: ``mobilemedium <command> [flags]``.

Every command resolves its options (config file first, flags win), runs,
and emits rows with the columns ``quantity,d,p,theta,sigma,t,mean,stderr,
n,seed,bias_note`` as CSV, or the complete run record as JSON.  A JSON
record can be replayed with ``mobilemedium replay``.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
import time
import warnings
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import special
from .direct import TruncationSpec, annealed_survival_direct, verify_identity_bounded
from .exceptions import ParameterError, RegimeError
from .fitting import fit_power, fit_scaling
from .functional import (
    EstimateCI,
    Psi_bar,
    exponential_moment_via_identity,
    moment2_closed_form,
    moment2_shifted,
    pascal_check,
    psi_bar,
    standard_test_paths,
)
from .kernels import KernelSpec
from .params import ModelParams, Regime, validate
from .quadrature import QuadratureSpec
from .records import VERSION, RunRecord, replay, same_outputs
from .sampler import SeedSpec
from .twopoint import Q_of_b, convolution_integral
from .variational import (
    estimate_gamma_dp,
    gM_profile,
    gM_ratio_closed_form,
    hardy_dichotomy,
    hardy_objective,
    hardy_ratio,
    random_profile,
)

CSV_FIELDS = ("quantity", "d", "p", "theta", "sigma", "t", "mean", "stderr", "n", "seed",
              "bias_note")
COMMANDS = ("constants", "psi-bar", "moment", "direct-verify", "pascal", "hardy", "qlimits",
            "scaling-fit", "verify")
SUITES = ("identity", "pascal", "hardy", "qlimits", "constants-crosscheck")

DEFAULTS = dict(
    d=3, p=2.0, theta=1.0, sigma=1.0, t=1.0, kappa=0.5, seed=0, n_outer=256, n_mc=64,
    r_max=None, n_steps=256, n_x=48, workers=None,
)

# hard failure threshold for verification suites
Z_HARD = 4.0


# --- helpers ---------------------------------------------------------------------

def _params(o: dict) -> ModelParams:
    return validate({k: o[k] for k in ("d", "p", "theta", "sigma", "t", "kappa")})


def _quad(o: dict) -> QuadratureSpec:
    return QuadratureSpec(n_x=int(o["n_x"]), r_max=o["r_max"], n_steps=int(o["n_steps"]))


def _row(o: dict, quantity: str, mean, stderr=0.0, n=1, bias_note="", t=None) -> dict:
    return {
        "quantity": quantity,
        "d": o["d"],
        "p": o["p"],
        "theta": o["theta"],
        "sigma": o["sigma"],
        "t": o["t"] if t is None else t,
        "mean": mean,
        "stderr": stderr,
        "n": n,
        "seed": o["seed"],
        "bias_note": bias_note,
    }


def _est_row(o: dict, quantity: str, e: EstimateCI, t=None) -> dict:
    return _row(o, quantity, e.mean, e.stderr, e.n, e.bias_note, t)


# --- commands ------------------------------------------------------------------------
# each returns (rows, details, ok)

def cmd_constants(o: dict):
    params = _params(o)
    rep = special.constants_report(params)
    v = rep.value
    rows = []
    if rep.is_interval:
        rows.append(_row(o, f"{rep.formula_id}:lower", v[0], bias_note=f"scale {rep.scale}"))
        rows.append(_row(o, f"{rep.formula_id}:upper", v[1], bias_note=f"scale {rep.scale}"))
    else:
        rows.append(_row(o, rep.formula_id, v, bias_note=f"scale {rep.scale}"))
    if params.d == 3 and abs(params.p - 2) < 1e-12:
        rows.append(_row(o, "catalytic_threshold", special.catalytic_threshold(params.sigma),
                         bias_note="sigma^2/8"))
    return rows, {"report": rep.to_dict()}, True


def cmd_psi_bar(o: dict):
    params = _params(o)
    fn = psi_bar if o.get("functional", "psi") == "psi" else Psi_bar
    e = fn(params.t, None, params, _quad(o), int(o["n_mc"]), SeedSpec(int(o["seed"])),
           workers=o["workers"])
    name = "psi_bar(t,0)" if fn is psi_bar else "Psi_bar(t,0)"
    return [_est_row(o, name, e)], {"estimate": e.to_dict()}, True


def cmd_moment(o: dict):
    params = _params(o)
    seed = SeedSpec(int(o["seed"]))
    if o.get("kind", "exponential") == "second":
        e = moment2_shifted(params.t, None, params, n=int(o.get("n_moment", 20000)), seed=seed)
        rows = [_est_row(o, "moment2(t,0)", e),
                _row(o, "moment2_closed_form", moment2_closed_form(params.t, params))]
        return rows, {"estimate": e.to_dict()}, True
    e = exponential_moment_via_identity(params.t, params, int(o["n_outer"]), int(o["n_mc"]),
                                        _quad(o), seed, o.get("sign", "negative"),
                                        workers=o["workers"])
    rows = [_est_row(o, f"log_moment_{o.get('sign', 'negative')}", e)]
    pb = e.extras.get("pascal_bound")
    if pb:
        rows.append(_row(o, "pascal_bound psi_bar(t,0)", pb["mean"], pb["stderr"], pb["n"]))
    return rows, {"estimate": e.to_dict()}, True


def _kernel_from(o: dict) -> KernelSpec:
    if o.get("kernel", "indicator") == "tent":
        return KernelSpec("custom-radial", table=((0.0, float(o["radius"])), (1.0, 0.0)),
                          amplitude=float(o["amplitude"]))
    return KernelSpec.indicator(float(o["amplitude"]), float(o["radius"]))


def cmd_direct_verify(o: dict):
    params = _params(o)
    rep = verify_identity_bounded(_kernel_from(o), params.t, params, int(o["n_lhs"]),
                                  int(o["n_rhs"]), int(o["n_mc"]), SeedSpec(int(o["seed"])),
                                  _quad(o), which=o.get("which", "psi"), workers=o["workers"])
    rows = [_est_row(o, "identity_lhs_direct", rep.lhs), _est_row(o, "identity_rhs_functional", rep.rhs),
            _row(o, "z_score", rep.z_score)]
    return rows, {"report": rep.to_dict()}, abs(rep.z_score) < Z_HARD


def cmd_pascal(o: dict):
    params = _params(o)
    t = params.t
    paths, labels = standard_test_paths(t, params.d, int(o["n_steps"]),
                                        SeedSpec(int(o["seed"])).stream(1))
    rep = pascal_check(t, paths, params, _quad(o), int(o["n_mc"]), SeedSpec(int(o["seed"])),
                       labels, o.get("which", "psi"), workers=o["workers"])
    rows = [_est_row(o, "pascal:zero", rep.zero)]
    hard = True
    for lab, est, m in zip(rep.labels, rep.shifted, rep.margins):
        rows.append(_est_row(o, f"pascal:{lab}", est))
        z = (est.mean - rep.zero.mean) / math.hypot(est.stderr, rep.zero.stderr)
        hard &= z < Z_HARD
    return rows, {"report": rep.to_dict(), "violations": int(sum(not p for p in rep.passed))}, hard


def cmd_hardy(o: dict):
    rows = []
    Ms = [math.exp(k) for k in range(1, 21)]
    ratios = [hardy_ratio(gM_profile(M)) for M in Ms]
    for M, r in zip(Ms, ratios):
        rows.append(_row(o, f"hardy_ratio_gM(logM={math.log(M):.0f})", r,
                         bias_note=f"closed form {gM_ratio_closed_form(M):.12g}"))
    rng = SeedSpec(int(o["seed"])).generator("hardy-profiles")
    rand = [hardy_ratio(random_profile(rng)) for _ in range(100)]
    rows.append(_row(o, "hardy_ratio_random_max", max(rand), n=100))
    sigma = float(o["sigma"])
    hi = hardy_dichotomy(float(o.get("theta_hi", 0.2)), sigma)
    lo = hardy_dichotomy(float(o.get("theta_lo", 0.125)), sigma)
    rows.append(_row(o, f"hardy_objective_max(theta={hi.theta})", hi.max_objective))
    rows.append(_row(o, f"hardy_objective_max(theta={lo.theta})", lo.max_objective))
    details = {"monotone": bool(np.all(np.diff(ratios) > 0)), "ratios": ratios}
    ok = max(ratios + rand) <= 4 * (1 + 1e-12) and details["monotone"]
    ok &= hi.max_objective > 1e3 and lo.max_objective <= 1e-9
    if o.get("gamma"):
        g = estimate_gamma_dp(int(o["d"]), float(o["p"]), seed=int(o["seed"]), workers=o["workers"])
        rows.append(_row(o, "gamma_dp_lower_bound", g.value, n=len(g.restarts),
                         bias_note="lower bound"))
        details["gamma"] = g.to_dict()
    return rows, details, bool(ok)


def cmd_qlimits(o: dict):
    d, p = int(o["d"]), float(o["p"])
    q0 = Q_of_b(d, p, 1e-3)
    lim0 = special.q_limit_zero(d, p)
    qb = 50.0 * Q_of_b(d, p, 50.0)
    limi = special.q_limit_infinity(d, p)
    rows = [_row(o, "Q(1e-3)", q0, bias_note=f"limit {lim0:.10g}"),
            _row(o, "50*Q(50)", qb, bias_note=f"limit {limi:.10g}")]
    ok = abs(q0 / lim0 - 1) <= 0.01 and abs(qb / limi - 1) <= 0.02
    return rows, {"rel_err_zero": q0 / lim0 - 1, "rel_err_inf": qb / limi - 1}, ok


def _t_list(o: dict) -> List[float]:
    raw = o.get("t_list") or "1,10,100,1000"
    if isinstance(raw, str):
        return [float(x) for x in raw.split(",") if x.strip()]
    return [float(x) for x in raw]


def cmd_scaling_fit(o: dict):
    params = _params(o)
    ts = _t_list(o)
    est = o.get("estimator", "psi-bar-zero")
    seed = SeedSpec(int(o["seed"]))
    rows, ys = [], []
    for i, t in enumerate(ts):
        s = seed.stream(i)
        if est == "psi-bar-zero":
            e = psi_bar(t, None, params, _quad(o), int(o["n_mc"]), s, workers=o["workers"])
        elif est == "identity":
            e = exponential_moment_via_identity(t, params, int(o["n_outer"]), int(o["n_mc"]),
                                                _quad(o), s, workers=o["workers"])
        elif est == "direct":
            d = annealed_survival_direct(params, TruncationSpec.default_for(
                KernelSpec.power(params.p), params, t), int(o["n_outer"]), s, t, _quad(o),
                workers=o["workers"])
            e = EstimateCI(d.extras["log_mean"], d.stderr / d.mean, d.n, s, d.bias_note)
        elif est == "moment2":
            e = moment2_shifted(t, None, params, n=int(o.get("n_moment", 20000)), seed=s)
        else:
            raise ValueError(f"unknown estimator {est!r}")
        rows.append(_est_row(o, est, e, t=t))
        ys.append(e.mean)
    fit = fit_scaling(ts, ys, params, o.get("model"))
    if params.regime is Regime.I and est == "psi-bar-zero":
        fit.theory_prefactor = special.rho1(params.d, params.p, params.theta)
    rows.append(_row(o, f"fit_{fit.model}_prefactor", fit.prefactor))
    if fit.exponent is not None:
        rows.append(_row(o, "fit_exponent", fit.exponent,
                         bias_note=f"theory {fit.theory_exponent}"))
    return rows, {"fit": fit.to_dict()}, True


def _suite_identity(o):
    base = dict(o, d=1, p=0.75, theta=1.0, sigma=1.0, t=1.0)
    cases = [dict(amplitude=1.0, radius=1.0, which="psi", kernel="indicator"),
             dict(amplitude=0.1, radius=1.0, which="psi", kernel="indicator"),
             dict(amplitude=0.5, radius=1.0, which="psi", kernel="tent"),
             dict(amplitude=0.1, radius=1.0, which="Psi", kernel="indicator")]
    rows, details, ok = [], [], True
    for c in cases:
        r, det, good = cmd_direct_verify(dict(base, **c))
        rows.extend(r)
        details.append(det)
        ok &= good
    return rows, {"reports": details}, ok


def _suite_constants(o):
    rng = SeedSpec(int(o["seed"])).generator("constants-crosscheck")
    rows, worst = [], 0.0
    for _ in range(10):
        d = int(rng.integers(1, 9))
        p = float(rng.uniform(d / 2, d))
        p = min(max(p, d / 2 + 0.05 * d), d - 0.05 * d)
        a = special.psi_radial_integral(d, p)
        b = special.psi_radial_quadrature(d, p)
        worst = max(worst, abs(a / b - 1))
        rows.append(_row(dict(o, d=d, p=p), "psi_radial closed/quadrature - 1", a / b - 1))
    y, z = np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.5, 0.0])
    conv = convolution_integral(y, z, 2.0)
    target = special.convolution_constant(3, 2.0) * np.linalg.norm(z) ** -1.0
    rows.append(_row(dict(o, d=3, p=2.0), "convolution rel err", conv / target - 1))
    ok = worst <= 1e-6 and abs(conv / target - 1) < 1e-3
    return rows, {"worst_rel": worst}, ok


def cmd_verify(o: dict):
    suite = o.get("suite", "constants-crosscheck")
    if suite == "identity":
        return _suite_identity(o)
    if suite == "pascal":
        return cmd_pascal(dict(o, d=3, p=2.0, t=1.0))
    if suite == "hardy":
        return cmd_hardy(o)
    if suite == "qlimits":
        return cmd_qlimits(dict(o, d=3, p=2.0))
    if suite == "constants-crosscheck":
        return _suite_constants(o)
    raise ValueError(f"unknown suite {suite!r}")


HANDLERS: Dict[str, Callable] = {
    "constants": cmd_constants,
    "psi-bar": cmd_psi_bar,
    "moment": cmd_moment,
    "direct-verify": cmd_direct_verify,
    "pascal": cmd_pascal,
    "hardy": cmd_hardy,
    "qlimits": cmd_qlimits,
    "scaling-fit": cmd_scaling_fit,
    "verify": cmd_verify,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def execute(command: str, options: dict) -> Tuple[dict, bool]:
    """Run ``command`` with resolved ``options``; returns ``(outputs, ok)``."""
    if command not in HANDLERS:
        raise ValueError(f"unknown command {command!r}")
    opts = dict(DEFAULTS, **options)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows, details, ok = HANDLERS[command](opts)
    outputs = {"rows": _jsonable(rows), "details": _jsonable(details), "ok": bool(ok),
               "warnings": sorted({f"{w.category.__name__}: {w.message}" for w in caught})}
    return outputs, bool(ok)


# --- argument parsing ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--d", type=int)
    g.add_argument("--p", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--t", type=float)
    g.add_argument("--kappa", type=float)
    r = p.add_argument_group("run")
    r.add_argument("--seed", type=int)
    r.add_argument("--n-outer", type=int)
    r.add_argument("--n-mc", type=int)
    r.add_argument("--r-max", type=float)
    r.add_argument("--n-steps", type=int)
    r.add_argument("--n-x", type=int)
    r.add_argument("--workers", type=int, help="threads (default: MOBILEMEDIUM_THREADS or 1)")
    o = p.add_argument_group("output")
    o.add_argument("--out", help="write here instead of stdout")
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("--config", help="INI file; [DEFAULT] and [<command>] sections")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mobilemedium",
                                     description="Exponent functionals of mobile Poissonian media.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "constants": "regime constant, scale and thresholds",
        "psi-bar": "estimate psi_bar(t,0) or Psi_bar(t,0)",
        "moment": "exponential moment through the identity, or the second moment",
        "direct-verify": "direct simulation against the identity on a bounded kernel",
        "pascal": "Pascal comparison over standard test paths",
        "hardy": "Hardy ratio, dichotomy and optional gamma(d,p) bound",
        "qlimits": "small- and large-b limits of Q(b)",
        "scaling-fit": "run an estimator over t and fit the growth law",
        "verify": "property suites with a pass/fail exit status",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        _common(sp)
        if name == "psi-bar":
            sp.add_argument("--functional", choices=("psi", "Psi"))
        if name == "moment":
            sp.add_argument("--kind", choices=("exponential", "second"))
            sp.add_argument("--sign", choices=("negative", "positive"))
            sp.add_argument("--n-moment", type=int)
        if name in ("direct-verify",):
            sp.add_argument("--amplitude", type=float)
            sp.add_argument("--radius", type=float)
            sp.add_argument("--kernel", choices=("indicator", "tent"))
            sp.add_argument("--n-lhs", type=int)
            sp.add_argument("--n-rhs", type=int)
        if name in ("direct-verify", "pascal"):
            sp.add_argument("--which", choices=("psi", "Psi"))
        if name == "hardy":
            sp.add_argument("--gamma", action="store_const", const=True)
        if name == "scaling-fit":
            sp.add_argument("--t-list", help="comma-separated times")
            sp.add_argument("--estimator", choices=("psi-bar-zero", "identity", "direct", "moment2"))
            sp.add_argument("--model", choices=("power", "power-log"))
            sp.add_argument("--n-moment", type=int)
        if name == "verify":
            sp.add_argument("--suite", choices=SUITES)
    rp = sub.add_parser("replay", help="re-run a JSON run record and compare bit-exactly")
    rp.add_argument("record")
    rp.add_argument("--workers", type=int)
    return parser


COMMAND_DEFAULTS = {
    "direct-verify": dict(amplitude=1.0, radius=1.0, kernel="indicator", n_lhs=10000,
                          n_rhs=1000, which="psi", d=1, p=0.75),
    "scaling-fit": dict(estimator="psi-bar-zero"),
}

_INT_KEYS = {"d", "seed", "n_outer", "n_mc", "n_steps", "n_x", "workers", "n_lhs", "n_rhs",
             "n_moment"}
_STR_KEYS = {"functional", "kind", "sign", "kernel", "which", "t_list", "estimator", "model",
             "suite"}


def _read_config(path: str, command: str) -> dict:
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    items = dict(cp.defaults())
    if cp.has_section(command):
        items.update(dict(cp.items(command)))
    out = {}
    for k, v in items.items():
        key = k.replace("-", "_")
        if key in _STR_KEYS:
            out[key] = v
        elif key in _INT_KEYS:
            out[key] = int(v)
        elif key == "gamma":
            out[key] = v.strip().lower() in ("1", "true", "yes", "on")
        else:
            out[key] = float(v)
    return out


def resolve_options(ns: argparse.Namespace) -> dict:
    """Defaults, then command defaults, then config file, then flags."""
    opts = dict(DEFAULTS)
    opts.update(COMMAND_DEFAULTS.get(ns.command, {}))
    if getattr(ns, "config", None):
        opts.update(_read_config(ns.config, ns.command))
    for k, v in vars(ns).items():
        if k in ("command", "config", "out", "format") or v is None:
            continue
        opts[k] = v
    return opts


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def rows_to_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in CSV_FIELDS})
    return buf.getvalue()


def rows_from_csv(text: str) -> List[dict]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        row = dict(r)
        for k in ("d", "n", "seed"):
            row[k] = int(row[k])
        for k in ("p", "theta", "sigma", "t", "mean", "stderr"):
            row[k] = float(row[k])
        out.append(row)
    return out


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "replay":
        rec = RunRecord.load(ns.record)
        new = replay(rec, ns.workers)
        same = same_outputs(rec, new)
        sys.stdout.write(json.dumps({"bit_exact": same, "workers": ns.workers}) + "\n")
        return 0 if same else 1
    try:
        opts = resolve_options(ns)
        t0 = time.perf_counter()
        outputs, ok = execute(ns.command, opts)
    except (ParameterError, RegimeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    rec = RunRecord(ns.command, opts, outputs, time.perf_counter() - t0, VERSION)
    if (ns.format or "csv") == "json":
        _emit(rec.to_json() + "\n", ns.out)
    else:
        _emit(rows_to_csv(outputs["rows"]), ns.out)
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
