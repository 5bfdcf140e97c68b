"""Command-line front end.

    currentlab <command> [flags]

Every command reads its inputs from flags and/or a config file of
``key = value`` lines (``#`` comments; keys mirror the long flag names, e.g.
``budget-classes = 50000`` or ``x = L(bolza) + a1``).  Flags override the
file.  Output is JSON (sorted keys) or CSV and always echoes the resolved
configuration, so identical inputs give byte-identical output.

Exit codes: 0 ok, 2 invalid input, 3 budget exceeded, 4 unstable
intersection count.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import re
import sys

import numpy as np

from . import __version__
from .errors import (
    AsymmetricPotential,
    BudgetExceeded,
    NonFillingInput,
    NonPositiveFunctional,
    NotHyperbolic,
    NotMulticurve,
    Singular,
    TrivialWord,
    Unstable,
    ValidationError,
)

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_UNSTABLE = 0, 2, 3, 4
VALIDATION_ERRORS = (ValidationError, NonFillingInput, NotMulticurve, NonPositiveFunctional,
                     AsymmetricPotential, TrivialWord, Singular, NotHyperbolic)

# command input keys with defaults (strings, as read from flags or config)
INPUTS = {
    "x": None, "y": None, "z": None, "b": "L(bolza)", "xi": None, "eta": None,
    "s": None, "t": None, "points": "7", "symmetric": "false",
    "rep": "sym3(bolza)", "rep1": "sym3(bolza)", "rep2": "sym3(bolza+twist(1.0))",
    "phi": "lambda1", "samples": "500", "max-len": "8", "classes": "a1,a1b2,a1a2B1", "N": "32",
}
COMMON = {"genus": "2", "L": None, "radius": None, "seed": "0", "out": None, "format": "json",
          "budget-classes": None, "ref": "bolza"}
COMMAND_DEFAULTS = {
    "enumerate": {"L": "4"},
    "intersect": {"x": "a1", "y": "b1"},
    "dist": {"x": "L(bolza)", "y": "L(bolza+twist(1.0))"},
    "entropy": {"x": "L(bolza)"},
    "ray-check": {"z": "a1", "s": "1", "t": "3"},
    "horofn": {"z": "L(bolza+twist(1.0)) + a1", "x": "L(bolza+twist(1.0))"},
    "detour": {"xi": "a1", "eta": "a2"},
    "decompose": {"x": "a1 + a1b1A1B1 + 2*a2b2"},
    "manhattan": {"x": "L(bolza)", "y": "L(bolza+twist(1.0))"},
    "distortion": {"x": "L(bolza)", "y": "L(bolza+twist(1.0))"},
    "anosov-dist": {},
    "anosov-gap": {},
    "potentials-check": {},
}
DEFAULT_L = "6"


# ---------------------------------------------------------------------------
# configuration


def read_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e.strerror}") from None
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as e:
        raise ValidationError(f"malformed config: {e}") from None
    out = dict(cp["run"])
    unknown = sorted(set(out) - set(COMMON) - set(INPUTS))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    return out


def resolve_config(command: str, flags: dict, file_values: dict) -> dict:
    cfg = dict(COMMON)
    cfg.update({k: v for k, v in INPUTS.items()})
    cfg["L"] = DEFAULT_L
    cfg.update(COMMAND_DEFAULTS[command])
    cfg.update(file_values)
    cfg.update({k: v for k, v in flags.items() if v is not None})
    return validate_config(cfg)


def _int(cfg, key, lo=None):
    try:
        v = int(cfg[key])
    except (TypeError, ValueError):
        raise ValidationError(f"{key} must be an integer, got {cfg[key]!r}") from None
    if lo is not None and v < lo:
        raise ValidationError(f"{key} must be >= {lo}")
    return v


def _float(cfg, key):
    try:
        v = float(cfg[key])
    except (TypeError, ValueError):
        raise ValidationError(f"{key} must be a number, got {cfg[key]!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"{key} must be finite")
    return v


def validate_config(cfg: dict) -> dict:
    _int(cfg, "genus", 2)
    _int(cfg, "L", 1)
    _int(cfg, "seed", 0)
    if cfg["radius"] is not None:
        _int(cfg, "radius", 1)
    if cfg["budget-classes"] is not None:
        _int(cfg, "budget-classes", 1)
    if cfg["format"] not in ("json", "csv"):
        raise ValidationError("format must be json or csv")
    for k in ("s", "t"):
        if cfg[k] is not None:
            _float(cfg, k)
    for k in ("points", "samples", "max-len", "N"):
        _int(cfg, k, 1)
    if str(cfg["symmetric"]).lower() not in ("true", "false", "1", "0", "yes", "no"):
        raise ValidationError("symmetric must be true or false")
    return cfg


# ---------------------------------------------------------------------------
# input objects


def _ref(cfg):
    from .hyperbolic import load_structure, structure_by_label

    r = cfg["ref"]
    return load_structure(r) if os.path.isfile(r) else structure_by_label(r)


def _ctx(cfg):
    from .metric import TruncationContext

    budget = None if cfg["budget-classes"] is None else int(cfg["budget-classes"])
    radius = None if cfg["radius"] is None else int(cfg["radius"])
    return TruncationContext(int(cfg["L"]), int(cfg["genus"]), _ref(cfg), radius, budget)


def _current(cfg, key):
    from .currents import Current

    if cfg[key] is None:
        raise ValidationError(f"missing input {key}")
    return Current.parse(cfg[key], int(cfg["genus"]))


_SYM = re.compile(r"^sym(\d+)\((.+)\)$")


def _rep(text):
    from .anosov import rep_from_json, sym_rep
    from .hyperbolic import load_structure, structure_by_label

    m = _SYM.match(text.strip())
    if m:
        inner = m.group(2)
        x = load_structure(inner) if os.path.isfile(inner) else structure_by_label(inner)
        return sym_rep(x, int(m.group(1)))
    if os.path.isfile(text):
        with open(text, encoding="utf-8") as f:
            try:
                return rep_from_json(json.load(f))
            except json.JSONDecodeError as e:
                raise ValidationError(f"malformed representation file: {e}") from None
    raise ValidationError(f"unknown representation {text!r}")


def _bool(v):
    return str(v).lower() in ("true", "1", "yes")


# ---------------------------------------------------------------------------
# commands; each returns (report dict, csv header, csv rows or None)


def cmd_enumerate(cfg):
    from .surface import enumerate_conjugacy, presentation

    budget = None if cfg["budget-classes"] is None else int(cfg["budget-classes"])
    classes = enumerate_conjugacy(presentation(int(cfg["genus"])), int(cfg["L"]), budget)
    rows = [(str(c), c.length) for c in classes]
    return {"count": len(classes), "classes": [r[0] for r in rows]}, ("class", "length"), rows


def cmd_intersect(cfg):
    from .currents import geometric_intersection, intersect, self_intersection
    from .surface import ConjClass

    ref = _ref(cfg)
    R = None if cfg["radius"] is None else int(cfg["radius"])
    x = _current(cfg, "x")
    c = ConjClass.of(cfg["y"], int(cfg["genus"]))
    out = {"value": intersect(x, c, ref, R), "x": str(x), "y": str(c)}
    if x.is_multicurve() and len(x.terms) == 1 and x.terms[0][0] == 1.0:
        a = x.atoms[0].curve
        if a == c:
            out["selfIntersection"] = self_intersection(c, ref, R)
        else:
            out["report"] = geometric_intersection(a, c, ref, R).to_json()
    return out, None, None


def cmd_dist(cfg):
    from .metric import thurston_distance

    ctx = _ctx(cfg)
    return thurston_distance(_current(cfg, "x"), _current(cfg, "y"), ctx).to_json(), None, None


def cmd_entropy(cfg):
    from .metric import entropy_estimate

    return entropy_estimate(_current(cfg, "x"), _ctx(cfg)).to_json(), None, None


def cmd_ray_check(cfg):
    from .metric import ray_additivity_check

    r = ray_additivity_check(_current(cfg, "b"), _current(cfg, "z"), _float(cfg, "s"), _float(cfg, "t"),
                             _ctx(cfg))
    return r.to_json(), None, None


def cmd_horofn(cfg):
    from .boundary import horofunction

    h = horofunction(_current(cfg, "z"), _current(cfg, "x"), _current(cfg, "b"), _ctx(cfg))
    return h.to_json(), None, None


def cmd_detour(cfg):
    from .boundary import detour_cost, symmetrized_detour

    f = symmetrized_detour if _bool(cfg["symmetric"]) else detour_cost
    r = f(_current(cfg, "xi"), _current(cfg, "eta"), _current(cfg, "b"), _ctx(cfg))
    return r.to_json(), ("t", "value"), [(repr(t), repr(v)) for t, v in r.samples]


def cmd_decompose(cfg):
    from .currents import lamination_part

    R = None if cfg["radius"] is None else int(cfg["radius"])
    return lamination_part(_current(cfg, "x"), _ref(cfg), R).to_json(), None, None


def cmd_manhattan(cfg):
    from .manhattan import theta_curve
    from .metric import entropy_estimate

    ctx = _ctx(cfg)
    x, y = _current(cfg, "x"), _current(cfg, "y")
    hy = entropy_estimate(y, ctx).value
    ts = np.linspace(0.0, hy, int(cfg["points"]))
    samples = theta_curve(x, y, ts, ctx)
    rep = {"entropyX": entropy_estimate(x, ctx).value, "entropyY": hy,
           "samples": [s.to_json() for s in samples]}
    return rep, ("t", "theta"), [(repr(s.t), repr(s.theta)) for s in samples]


def cmd_distortion(cfg):
    from .manhattan import mean_distortion
    from .metric import entropy_estimate

    ctx = _ctx(cfg)
    x, y = _current(cfg, "x"), _current(cfg, "y")
    r = mean_distortion(x, y, ctx)
    rep = r.to_json()
    rep["entropyRatio"] = entropy_estimate(x, ctx).value / entropy_estimate(y, ctx).value
    return rep, ("r", "ball_average"), [(repr(a), repr(b)) for a, b in r.sequence]


def cmd_anosov_dist(cfg):
    from .anosov import Functional, anosov_distance_report

    r1, r2 = _rep(cfg["rep1"]), _rep(cfg["rep2"])
    if r1.n != r2.n:
        raise ValidationError("representations have different dimensions")
    phi = Functional.parse(cfg["phi"], r1.n)
    return anosov_distance_report(r1, r2, phi, _ctx(cfg)).to_json(), None, None


def cmd_anosov_gap(cfg):
    from .anosov import anosov_gap_check

    return anosov_gap_check(_rep(cfg["rep"]), _ctx(cfg)).to_json(), None, None


def cmd_potentials_check(cfg):
    from .anosov import Functional, phi_length
    from .metric import entropy_from_values
    from .potentials import Potential, anosov_stable_length, ball_growth, hyperbolicity_delta

    ctx = _ctx(cfg)
    r = _rep(cfg["rep"])
    phi = Functional.parse(cfg["phi"], r.n)
    wl = Potential.word_length(int(cfg["genus"]))
    growth = ball_growth(wl, ctx)
    conj = entropy_from_values(ctx.word_lengths.astype(float), ctx.word_lengths, ctx.L).value
    delta = hyperbolicity_delta(wl, int(cfg["samples"]), int(cfg["max-len"]), int(cfg["seed"]))
    N = int(cfg["N"])
    stable = []
    for c in cfg["classes"].split(","):
        s = anosov_stable_length(r, phi, c.strip(), N)
        stable.append({"class": c.strip(), "stableLength": s.value, "naive": s.naive,
                       "phiLength": phi_length(r, phi, c.strip())})
    rep = {"ballGrowth": growth.to_json(), "conjugacyEntropy": conj,
           "relativeGap": abs(growth.slope - conj) / conj, "delta": delta.to_json(),
           "stableLengths": stable, "N": N}
    return rep, None, None


COMMANDS = {
    "enumerate": (cmd_enumerate, "list conjugacy classes up to word length L"),
    "intersect": (cmd_intersect, "intersection number of a current with a class"),
    "dist": (cmd_dist, "extended Thurston distance d(x, y)"),
    "entropy": (cmd_entropy, "entropy estimate of a filling current"),
    "ray-check": (cmd_ray_check, "identities along the ray b + t z"),
    "horofn": (cmd_horofn, "horofunction value Psi_z(x) with basepoint b"),
    "detour": (cmd_detour, "detour cost H(xi, eta) along b + t xi"),
    "decompose": (cmd_decompose, "lamination part of a weighted multicurve"),
    "manhattan": (cmd_manhattan, "Manhattan curve samples theta(t)"),
    "distortion": (cmd_distortion, "mean distortion tau(y/x)"),
    "anosov-dist": (cmd_anosov_dist, "d^phi between two representations"),
    "anosov-gap": (cmd_anosov_gap, "simple-root growth regression"),
    "potentials-check": (cmd_potentials_check, "ball growth, delta and stable lengths"),
}


# ---------------------------------------------------------------------------
# output


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def render(command, cfg, report, header, rows) -> str:
    echo = {k: cfg[k] for k in sorted(cfg)}
    if cfg["format"] == "csv":
        buf = io.StringIO()
        for k, v in echo.items():
            buf.write(f"# {k}={'' if v is None else v}\n")
        w = csv.writer(buf, lineterminator="\n")
        if rows is None:
            w.writerow(("key", "value"))
            for k in sorted(report):
                v = report[k]
                w.writerow((k, json.dumps(v, sort_keys=True, default=_jsonable)
                            if isinstance(v, (dict, list)) else v))
        else:
            w.writerow(header)
            w.writerows(rows)
        return buf.getvalue()
    doc = {"command": command, "config": echo, "result": report, "version": __version__}
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--genus", help="surface genus (default 2)")
    common.add_argument("-L", dest="L", help="maximum word length of the curve set")
    common.add_argument("--radius", help="fixed search radius for intersection counts")
    common.add_argument("--seed", help="random seed (default 0)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", help="json or csv")
    common.add_argument("--budget-classes", dest="budget-classes", help="cap on enumerated classes")
    common.add_argument("--ref", help="reference structure label or JSON file (default bolza)")
    for k in INPUTS:
        common.add_argument(f"--{k}", dest=k, help=argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="currentlab", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # usage errors (2), --help and --version (0)
        return int(e.code or 0)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.command, flags, file_values)
        report, header, rows = COMMANDS[args.command][0](cfg)
        text = render(args.command, cfg, report, header, rows)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetExceeded as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except Unstable as e:
        print(f"unstable: {e}", file=sys.stderr)
        return EXIT_UNSTABLE
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
