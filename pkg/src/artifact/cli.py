"""Command-line entry point ``mourre-lab``.

Configuration comes from an optional JSON document (``--config``); flags
given on the command line override the JSON fields, which override the
built-in defaults.  Exit codes: 0 success, 1 validation, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from typing import Any, Optional, Sequence

import numpy as np

from . import perturbation_classes as pc
from . import spectral_probe as sprobe
from .errors import MourreLabError, NumericalError, ValidationError
from .lattice_ops import (
    LatticeWindow,
    PotentialSpec,
    build_A0,
    build_Ak,
    build_H0,
    build_potential,
    projected_commutator_min_eig,
)
from .model_core import (
    fourier_mourre_deviation,
    g_k_eval,
    inf_g_on,
    kappa_k,
    make_params,
    spectral_bands,
)

fmt = sprobe.fmt

ANCHORS = {
    "mourre_fourier": "Fourier-side commutator density of the conjugate operator A_k equals the Mourre function g_k",
    "mourre_truncated": "strict Mourre estimate for H_0 with conjugate operator A_k on bands minus the critical set",
    "mourre_identity": "exact commutator identity [iA_0, H_0] = 4|a|^2 - H_0^2 in the gapless case",
    "classify": "perturbation classes S, M_k and Q_{k,m} admissible for the conjugate operators A_k",
    "counterexample": "subordinate-family construction separating the classes from l^1 difference conditions",
    "edge": "half-line operator has the single eigenvalue -alpha when |b| > |a|",
    "eigs": "eigenvalues of perturbed operators accumulate only at critical energies",
    "lap": "limiting absorption principle for weighted resolvents away from critical energies",
}

DEFAULTS: dict[str, Any] = {
    "alpha": 0.0,
    "a": 1.0,
    "b": 1.0,
    "lattice": "bilateral",
    "N": 200,
    "k": 1,
    "order": 1,
    "s": 1.0,
    "mode": "fourier",
    "n_theta": 4096,
    "beta": 1.0,
    "gamma": 2.0,
    "horizon": 10**6,
    "p": 1,
    "pmax": 8,
    "n_max": 19,
    "a_family": "harmonic",
    "threads": None,
    "output": None,
    "format": None,
    "tol": 1e-6,
    "iter_cap": 500,
    "potential_scale": 1.0,
    "lo": -1000,
    "hi": 1000,
    "n_points": 401,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _complex(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ValidationError(f"not a complex number: {text!r}") from exc


def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"not a comma-separated list of numbers: {text!r}") from exc


def _ints(text) -> list:
    return [int(round(x)) for x in _floats(text)]


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------
def _flatten_config(doc: dict) -> dict:
    """Map the JSON layout (model / lattice / output blocks) to flat keys."""
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    flat: dict[str, Any] = {}
    for key, val in doc.items():
        if key == "model":
            m = dict(val)
            if "alpha" in m:
                flat["alpha"] = m["alpha"]
            for c in ("a", "b"):
                if c in m:
                    flat[c] = m[c] if not isinstance(m[c], str) else _complex(m[c])
                elif f"{c}_re" in m or f"{c}_im" in m:
                    flat[c] = complex(m.get(f"{c}_re", 0.0), m.get(f"{c}_im", 0.0))
        elif key == "lattice":
            if isinstance(val, dict):
                if "kind" in val:
                    flat["lattice"] = val["kind"]
                if "N" in val:
                    flat["N"] = val["N"]
            else:
                flat["lattice"] = val
        elif key == "output":
            if isinstance(val, dict):
                if "path" in val:
                    flat["output"] = val["path"]
                if "format" in val:
                    flat["format"] = val["format"]
            else:
                flat["output"] = val
        elif isinstance(val, dict):
            flat.update(val)
        else:
            flat[key] = val
    return flat


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then JSON config, then explicitly given flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config: {exc}") from exc
        cfg.update(_flatten_config(doc))
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        cfg[key] = val
    return cfg


def _params(cfg):
    return make_params(float(cfg["alpha"]), _complex(cfg["a"]), _complex(cfg["b"]))


def _window(cfg, N: Optional[int] = None) -> LatticeWindow:
    kind = cfg["lattice"]
    if kind not in ("bilateral", "unilateral"):
        raise ValidationError("lattice must be 'bilateral' or 'unilateral'")
    N = int(cfg["N"] if N is None else N)
    if N < 1:
        raise ValidationError("N must be positive")
    return LatticeWindow.make(kind, N)


def _threads(cfg) -> int:
    t = cfg.get("threads")
    return int(t) if t else (os.cpu_count() or 1)


def _sequence(cfg) -> pc.MatrixSequence:
    if cfg.get("csv"):
        try:
            with open(cfg["csv"]) as fh:
                return pc.load_sequence_csv(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read sequence CSV: {exc}") from exc
    name = cfg.get("family")
    if not name:
        raise ValidationError("a sequence family (--family) or --csv is required")
    extra = {k: cfg[k] for k in ("l", "r", "k", "s", "c") if cfg.get(k) is not None}
    if "mode" in cfg and cfg["mode"] in ("S_rate", "Mk_rate"):
        extra["mode"] = cfg["mode"]
    if name == "counterexample":
        extra = {"n_max": cfg["n_max"], "a": cfg["a_family"]}
    return pc.named_sequence(name, **extra)


def _potential_builder(cfg, params):
    """``N -> H0 (+ scaled potential)`` for the configured lattice."""
    V = None
    if cfg.get("potential"):
        V = pc.named_sequence(cfg["potential"]).scaled(float(cfg["potential_scale"]))

    def build(N):
        win = _window(cfg, N)
        H = build_H0(params, win)
        if V is not None:
            H = H + build_potential(PotentialSpec(v0=V), win)
        return H

    return build


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------
_FLOAT_TOKEN = re.compile(r'"@@F(\d+)@@"')


def dumps_json(obj) -> str:
    """JSON with every float written as ``%.17g``."""
    floats: list = []

    def walk(o):
        if isinstance(o, dict):
            return {str(k): walk(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [walk(v) for v in o]
        if isinstance(o, (bool, np.bool_)):
            return bool(o)
        if isinstance(o, (int, np.integer)):
            return int(o)
        if isinstance(o, (float, np.floating)):
            floats.append(float(o))
            return f"@@F{len(floats) - 1}@@"
        if isinstance(o, complex):
            return {"re": walk(o.real), "im": walk(o.imag)}
        return o

    text = json.dumps(walk(obj), indent=2, sort_keys=True)

    def sub(m):
        x = floats[int(m.group(1))]
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return fmt(x)

    return _FLOAT_TOKEN.sub(sub, text) + "\n"


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) if not isinstance(x, str) else x for x in r])
    return buf.getvalue()


def _emit(text: str, cfg) -> None:
    if cfg.get("output"):
        with open(cfg["output"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------
def cmd_bands(cfg) -> str:
    b = spectral_bands(_params(cfg))
    rows = [["minus", b.i_minus[0], b.i_minus[1], b.has_gap], ["plus", b.i_plus[0], b.i_plus[1], b.has_gap]]
    return _rows_csv(["band", "lo", "hi", "has_gap"], rows)


def cmd_kappa(cfg) -> str:
    k = int(cfg["k"])
    ks = kappa_k(_params(cfg), k)
    return _rows_csv(["k", "point"], [[k, p] for p in ks.points])


def cmd_g(cfg) -> str:
    params = _params(cfg)
    k = int(cfg["k"])
    if cfg.get("t") is not None:
        t = np.array(_floats(cfg["t"]))
        if np.any(t == 0.0):
            raise ValidationError("t = 0 is excluded from the domain of g_k")
    else:
        b = spectral_bands(params)
        n = int(cfg["n_points"])
        lo = b.lambda_min if b.has_gap else b.lambda_max / n
        pos = np.linspace(lo, b.lambda_max, n)
        t = np.concatenate([-pos[::-1], pos])
    g = g_k_eval(params, k, t)
    return _rows_csv(["t", "g_k"], zip(t.tolist(), np.atleast_1d(g).tolist()))


def cmd_mourre(cfg) -> str:
    params = _params(cfg)
    k = int(cfg["k"])
    mode = cfg["mode"]
    if mode == "fourier":
        n = int(cfg["n_theta"])
        if n < 8:
            raise ValidationError("n_theta must be at least 8")
        rep = fourier_mourre_deviation(params, k, n)
        rep.update(mode="fourier", k=k, deviation=max(rep["max_dev_density"], rep["max_dev_projected_symbol"]),
                   paper_anchor=ANCHORS["mourre_fourier"])
        return dumps_json(rep)
    if mode != "truncated":
        raise ValidationError("mode must be 'fourier' or 'truncated'")
    if cfg.get("window") is None:
        raise ValidationError("truncated mode requires an energy window (--window lo,hi)")
    lam = _floats(cfg["window"])
    if len(lam) != 2 or not lam[0] < lam[1]:
        raise ValidationError("window must be two increasing numbers")
    if k == 0 and not params.gapless():
        raise ValidationError("k = 0 requires a gapless model")
    win = _window(cfg)
    H = build_H0(params, win)
    A = build_A0(params, win) if k == 0 else build_Ak(params, k, win)
    margin = cfg.get("margin")
    min_eig, rank = projected_commutator_min_eig(H, A, (lam[0], lam[1]), None if margin is None else int(margin))
    inf_g = inf_g_on(params, k, (lam[0], lam[1])) if k > 0 else float("nan")
    return dumps_json({
        "mode": "truncated", "k": k, "N": win.N, "lattice": win.kind, "window": lam,
        "min_eig": min_eig, "inf_g": inf_g, "rank": rank,
        "paper_anchor": ANCHORS["mourre_truncated"],
    })


def cmd_classify(cfg) -> str:
    W = _sequence(cfg)
    which = cfg.get("cls") or "Q"
    h = int(float(cfg["horizon"]))
    lat = cfg["lattice"]
    k = int(cfg["k"])
    if which == "Q":
        v = pc.class_Q(W, k, int(cfg["order"]), h, lat)
    elif which == "S":
        v = pc.class_S(W, float(cfg["beta"]), float(cfg["gamma"]), h, lat)
    elif which == "M":
        v = pc.class_M(W, k, float(cfg["beta"]), float(cfg["gamma"]), h, lat)
    elif which == "l1":
        comp = tuple(_ints(cfg.get("component", "0,0")))
        v = pc.l1_difference_test(W, int(cfg["p"]), comp, h, lat)
    elif which == "rho":
        rho = pc.decay_rate_estimate(W, h, lat)
        return dumps_json({"class": "rho", "rho": rho, "horizon": h, "paper_anchor": ANCHORS["classify"]})
    else:
        raise ValidationError("class must be one of Q, S, M, l1, rho")
    out = v.as_dict()
    out.update({"class": which, "sequence": W.label, "paper_anchor": ANCHORS["classify"]})
    return dumps_json(out)


def cmd_counterexample(cfg) -> str:
    if cfg.get("family", "dyadic") not in ("dyadic", None):
        raise ValidationError("only the 'dyadic' subordinate family is bundled")
    if cfg["a_family"] not in pc.A_FAMILIES:
        raise ValidationError(f"a must be one of {sorted(pc.A_FAMILIES)}")
    fam = pc.dyadic_tent_family(int(cfg["n_max"]))
    seq = pc.build_counterexample(fam, pc.A_FAMILIES[cfg["a_family"]])
    h = cfg.get("horizon_ce")
    rep = pc.verify_counterexample(seq, int(cfg["pmax"]), None if h is None else int(float(h)))
    V = pc.counterexample_potential(seq).v0
    hq = min(int(rep["horizon"]), seq.b.size)
    rep["potential"] = {
        "Q_1_2": pc.class_Q(V, 1, 2, hq, "unilateral").as_dict(),
        "l1_difference": {
            str(p): pc.l1_difference_test(V, p, (0, 0), hq, "unilateral").verdict.value
            for p in range(1, int(cfg["pmax"]) + 1)
        },
    }
    rep["L1"] = seq.L1
    rep["L2"] = seq.L2
    rep["paper_anchor"] = ANCHORS["counterexample"]
    if cfg.get("series"):
        with open(cfg["series"], "w") as fh:
            fh.write(_rows_csv(["j", "b_j"], enumerate(seq.b.tolist())))
    return dumps_json(rep)


def cmd_eigs(cfg) -> str:
    params = _params(cfg)
    N_list = _ints(cfg.get("N_list") or f"{cfg['N']},{2 * int(cfg['N'])}")
    if cfg.get("window") is None:
        raise ValidationError("eigs requires an energy window (--window lo,hi)")
    lam = _floats(cfg["window"])
    if len(lam) != 2 or not lam[0] < lam[1]:
        raise ValidationError("window must be two increasing numbers")
    rep = sprobe.truncation_stable_eigs(_potential_builder(cfg, params), (lam[0], lam[1]), N_list, _threads(cfg))
    buf = io.StringIO()
    rep.to_csv(buf)
    return buf.getvalue()


def cmd_edge(cfg) -> str:
    params = _params(cfg)
    lam, ratio = sprobe.edge_state_check(params, int(cfg["N"]))
    return dumps_json({"eigenvalue": lam, "decay_ratio": ratio, "expected_ratio": params.abs_a / params.abs_b,
                       "N": int(cfg["N"]), "paper_anchor": ANCHORS["edge"]})


def cmd_lap(cfg) -> str:
    params = _params(cfg)
    if cfg.get("x_grid") is None or cfg.get("eps_list") is None:
        raise ValidationError("lap requires --x-grid and --eps-list")
    H = _potential_builder(cfg, params)(int(cfg["N"]))
    grid = sprobe.lap_scan(H, float(cfg["s"]), _floats(cfg["x_grid"]), _floats(cfg["eps_list"]),
                           float(cfg["tol"]), int(cfg["iter_cap"]), _threads(cfg))
    buf = io.StringIO()
    grid.to_csv(buf)
    return buf.getvalue()


def cmd_sequence(cfg) -> str:
    W = _sequence(cfg)
    lo, hi = int(cfg["lo"]), int(cfg["hi"])
    if hi < lo:
        raise ValidationError("hi must be >= lo")
    buf = io.StringIO()
    pc.dump_sequence_csv(W, lo, hi, buf)
    return buf.getvalue()


COMMANDS = {
    "bands": cmd_bands,
    "kappa": cmd_kappa,
    "g": cmd_g,
    "mourre": cmd_mourre,
    "classify": cmd_classify,
    "counterexample": cmd_counterexample,
    "eigs": cmd_eigs,
    "edge": cmd_edge,
    "lap": cmd_lap,
    "sequence": cmd_sequence,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mourre-lab", description="Spectral numerics for one-dimensional discrete Dirac operators.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON configuration file")
    # every flag defaults to None so that JSON values survive unless overridden
    p.add_argument("--alpha", type=float)
    p.add_argument("--a", type=_complex)
    p.add_argument("--b", type=_complex)
    p.add_argument("--lattice", choices=["bilateral", "unilateral"])
    p.add_argument("--N", type=int)
    p.add_argument("--N-list", dest="N_list")
    p.add_argument("--k", type=int)
    p.add_argument("--t")
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument("--mode")
    p.add_argument("--n-theta", dest="n_theta", type=int)
    p.add_argument("--window", help="energy window lo,hi")
    p.add_argument("--margin", type=int)
    p.add_argument("--family")
    p.add_argument("--csv", help="sequence CSV to classify")
    p.add_argument("--class", dest="cls")
    p.add_argument("--order", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--p", type=int)
    p.add_argument("--component")
    p.add_argument("--l", type=int)
    p.add_argument("--r", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--pmax", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--a-family", dest="a_family")
    p.add_argument("--ce-horizon", dest="horizon_ce", type=float)
    p.add_argument("--series", help="write the b_j series CSV here")
    p.add_argument("--potential")
    p.add_argument("--potential-scale", dest="potential_scale", type=float)
    p.add_argument("--x-grid", dest="x_grid")
    p.add_argument("--eps-list", dest="eps_list")
    p.add_argument("--tol", type=float)
    p.add_argument("--iter-cap", dest="iter_cap", type=int)
    p.add_argument("--lo", type=int)
    p.add_argument("--hi", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--output")
    return p


def run(argv: Optional[Sequence[str]] = None) -> str:
    """Parse, validate and execute; returns the rendered output."""
    args = build_parser().parse_args(argv)
    cfg = resolve_config(args)
    return COMMANDS[args.command](cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        _emit(COMMANDS[args.command](cfg), cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except MourreLabError as exc:  # pragma: no cover - every error is one of the two kinds
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
