"""Command-line entry point.

    simverify verify --model sgn-cubic --dt 0.01 --steps 400 --delta 0.1 \\
        --k 2.6667 --lambda 3 --r0 1.5 --ell 1.125 --P 1 --out report.csv

Options may also come from a ``--config`` file of ``key = value`` lines
(``#`` starts a comment); command-line flags win. Exit codes: 0 success or
forward invariant, 1 inconclusive, 2 falsified, 64 usage error, 65 data error.
"""
from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics
from .bounds import StabilityParams, exponential_bound, propagation_bound, sqrt_bound_terms
from .energy import EnergyForm, NotPositiveDefinite, NotSymmetric
from .estimate import monte_carlo_envelope
from .integrate import Divergence, IntegratorKind
from .io import write_csv
from .sample import GridTooLarge
from .verify import VerificationConfig, check_invariance, sweep

EXIT_OK, EXIT_INCONCLUSIVE, EXIT_FALSIFIED, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 64, 65
SUBCOMMANDS = ("bounds", "montecarlo", "verify", "sweep", "repro")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        text = " ".join(str(t) for t in text)
    parts = [p for p in re.split(r"[,\s;]+", str(text).strip()) if p]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"expected a list of numbers, got {text!r}") from None


def _ints(text) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


# option name -> (converter, default); defaults are applied after file merging
_OPTIONS = {
    "model": (str, None),
    "kind": (str, "rk4"),
    "dt": (float, 0.01),
    "steps": (int, None),
    "delta": (float, None),
    "k": (float, None),
    "lambda": (float, None),
    "r0": (float, None),
    "ell": (float, None),
    "P": (_floats, None),
    "A": (_floats, None),
    "rate": (float, None),
    "radius": (float, None),
    "L": (float, None),
    "M": (float, None),
    "adapt_limit": (int, 8),
    "cap": (int, 10_000_000),
    "strict_spacing": (lambda v: str(v).lower() in ("1", "true", "yes", "on"), False),
    "threads": (int, 1),
    "seed": (int, 0),
    "n": (int, 1000),
    "T": (float, None),
    "T_max": (float, 10.0),
    "T_step": (float, 0.1),
    "T_grid": (_ints, None),
    "nsamp_grid": (_ints, None),
    "out": (str, None),
    "example": (str, None),
}


@dataclass
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None


def _build_parser() -> _Parser:
    p = _Parser(prog="simverify", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="subcommand")

    def common(sp, *names):
        sp.add_argument("--config", dest="config", default=None, help="key = value file")
        for n in names:
            flag = "--" + n.replace("_", "-")
            kw = {"dest": n, "default": None}
            if n in ("P", "A", "T_grid", "nsamp_grid"):
                kw["nargs"] = "+"
            if n == "strict_spacing":
                sp.add_argument(flag, dest=n, action="store_const", const="true", default=None)
                continue
            sp.add_argument(flag, **kw)

    model_opts = ("model", "rate", "radius", "A", "L", "M", "kind", "threads")
    common(sub.add_parser("bounds", help="a, b and square-root terms over a T grid"),
           *model_opts, "dt", "k", "lambda", "r0", "T_max", "T_step", "out")
    common(sub.add_parser("montecarlo", help="Monte-Carlo envelope check"),
           *model_opts, "dt", "k", "lambda", "r0", "n", "T", "seed", "out")
    common(sub.add_parser("verify", help="run the forward-invariance certificate"),
           *model_opts, "dt", "steps", "delta", "k", "lambda", "r0", "ell", "P",
           "adapt_limit", "cap", "strict_spacing", "seed", "out")
    common(sub.add_parser("sweep", help="margin over horizon and sample-count grids"),
           *model_opts, "dt", "k", "lambda", "r0", "ell", "P", "T_grid", "nsamp_grid", "cap",
           "seed", "out")
    rp = sub.add_parser("repro", help="reproduce a worked example: " + ", ".join(
        ["ex2", "ex3", "ex4", "ex6", "ex8", "ex9", "fig1", "fig2", "fig3", "fig4"]))
    rp.add_argument("example")
    rp.add_argument("--out", dest="out", default=None, help="directory for emitted files")
    return p


def read_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_config(argv=None) -> RunConfig:
    """Parse flags and an optional config file into a :class:`RunConfig`.

    Raises :class:`UsageError` naming the offending key or flag.
    """
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.subcommand is None:
        raise UsageError("missing subcommand; choose from " + ", ".join(SUBCOMMANDS))
    if ns.subcommand == "repro":
        return RunConfig("repro", {"example": ns.example, "out": ns.out})
    flags = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "config")}
    allowed = set(flags)
    merged = {}
    if ns.config:
        try:
            file_vals = read_config_file(ns.config)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        for key, value in file_vals.items():
            if key not in allowed:
                raise UsageError(f"unknown config key {key!r} for {ns.subcommand}")
            merged[key] = value
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    values = {}
    for key in allowed:
        conv, default = _OPTIONS[key]
        if key in merged:
            raw = merged[key]
            if isinstance(raw, list) and conv in (str, int, float):
                raw = raw[0]
            try:
                values[key] = conv(raw)
            except (TypeError, ValueError):
                raise UsageError(f"bad value for {key!r}: {raw!r}") from None
        else:
            values[key] = default
    cfg = RunConfig(ns.subcommand, values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    if not v.get("model"):
        raise UsageError("--model is required")
    need = {
        "bounds": ("k", "lambda", "r0"),
        "montecarlo": ("k", "lambda", "r0", "T"),
        "verify": ("steps", "delta", "k", "lambda", "r0"),
        "sweep": ("k", "lambda", "r0", "T_grid", "nsamp_grid"),
    }[cfg.subcommand]
    for key in need:
        if v.get(key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required for {cfg.subcommand}")
    for key, value in v.items():
        vals = value if isinstance(value, list) else [value]
        for x in vals:
            if isinstance(x, float) and not math.isfinite(x):
                raise UsageError(f"{key} must be finite")
    positive = ("dt", "delta", "lambda", "r0", "ell", "radius", "T", "T_max", "T_step")
    for key in positive:
        if v.get(key) is not None and not v[key] > 0:
            raise UsageError(f"{key} must be positive")
    if v.get("k") is not None and v["k"] < 1:
        raise UsageError("k must be >= 1")
    for key in ("steps", "n", "threads", "cap"):
        if v.get(key) is not None and v[key] < 1:
            raise UsageError(f"{key} must be >= 1")
    for key in ("L", "M", "adapt_limit"):
        if v.get(key) is not None and v[key] < 0:
            raise UsageError(f"{key} must be >= 0")
    try:
        IntegratorKind.parse(v.get("kind", "rk4"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _model(cfg: RunConfig) -> dynamics.SystemModel:
    v = cfg.values
    kwargs = {}
    if v.get("radius") is not None:
        kwargs["radius"] = v["radius"]
    if v["model"] == "linear-1d" and v.get("rate") is not None:
        kwargs["rate"] = v["rate"]
    if v["model"] == "linear-nd":
        if v.get("A") is None:
            raise UsageError("linear-nd needs --A (row-major matrix entries)")
        kwargs["A"] = v["A"]
    try:
        model = dynamics.get_model(v["model"], **kwargs)
    except dynamics.UnknownModel as exc:
        raise UsageError(str(exc.args[0])) from None
    except TypeError as exc:
        raise UsageError(f"bad model options: {exc}") from None
    overrides = {}
    if v.get("L") is not None:
        overrides["lipschitz_L"] = v["L"]
    if v.get("M") is not None:
        overrides["jump_M"] = v["M"]
    if overrides:
        from dataclasses import replace
        model = replace(model, **overrides)
    return model


def _form(cfg: RunConfig, model) -> EnergyForm:
    v = cfg.values
    P = v.get("P") or list(np.eye(model.dim).ravel())
    mat = np.asarray(P, dtype=np.float64)
    n = int(round(math.sqrt(mat.size)))
    if n * n != mat.size or n != model.dim:
        raise UsageError(f"--P needs {model.dim * model.dim} entries for {model.name}")
    mat = mat.reshape(n, n)
    ell = v.get("ell")
    if ell is None:
        # largest sublevel set inside D0
        from .energy import jacobi_eigh
        ell = jacobi_eigh(mat)[0][0] * v["r0"] ** 2 / 2.0
    return EnergyForm(mat, ell)


def _params(cfg: RunConfig) -> StabilityParams:
    v = cfg.values
    return StabilityParams(v["k"], v["lambda"], v["r0"])


def _cmd_bounds(cfg: RunConfig) -> int:
    v = cfg.values
    model, params = _model(cfg), _params(cfg)
    kind = IntegratorKind.parse(v["kind"])
    stride = max(1, int(round(v["T_step"] / v["dt"])))
    last = int(round(v["T_max"] / v["dt"]))
    rows = []
    for n in range(stride, last + 1, stride):
        pb = propagation_bound(model.lipschitz_L, model.jump_M, v["dt"], n, kind)
        ta, tb = sqrt_bound_terms(params, pb)
        rows.append([n * v["dt"], pb.a, pb.b, exponential_bound(params, n * v["dt"]), ta, tb])
    header = ["T", "a", "b", "exp_bound", "sqrt_a_term", "sqrt_b_term"]
    comments = ["seed=none", f"model={model.name} L={model.lipschitz_L!r} M={model.jump_M!r} "
                f"dt={v['dt']!r} kind={kind.name}"]
    _emit(v.get("out"), header, rows, comments)
    return EXIT_OK


def _cmd_montecarlo(cfg: RunConfig) -> int:
    v = cfg.values
    model, params = _model(cfg), _params(cfg)
    n_steps = int(round(v["T"] / v["dt"]))
    rep = monte_carlo_envelope(model, params, v["n"], v["dt"], n_steps, seed=v["seed"],
                               kind=IntegratorKind.parse(v["kind"]), threads=v["threads"])
    if v.get("out"):
        rep.to_csv(v["out"], comments=[f"model={model.name}"])
    print(f"trajectories={rep.n_traj} violations={rep.violations} "
          f"worst_margin={rep.worst_margin:.6g} chatter_floor={rep.chatter_floor:.6g}")
    return EXIT_OK if rep.violations == 0 else EXIT_INCONCLUSIVE


def _cmd_verify(cfg: RunConfig) -> int:
    v = cfg.values
    model = _model(cfg)
    vc = VerificationConfig(dt=v["dt"], n_steps=v["steps"], delta=v["delta"],
                            params=_params(cfg), form=_form(cfg, model),
                            kind=IntegratorKind.parse(v["kind"]), adapt_limit=v["adapt_limit"],
                            cap=v["cap"], strict_spacing=v["strict_spacing"])
    rep = check_invariance(model, vc, threads=v["threads"])
    if v.get("out"):
        rep.to_csv(v["out"], extra_comments=[f"seed={v['seed']}", f"model={model.name}"])
    print(f"verdict={rep.verdict.name} gamma={rep.gamma:.6g} condition_lhs={rep.condition_lhs:.6g} "
          f"margin={rep.margin:.6g} rounds={rep.rounds} samples={len(rep.samples)}")
    for change, reason in rep.adaptation_trace:
        print(f"  adapted: {change} ({reason})")
    for flag in rep.caveat_flags:
        print(f"  caveat: {flag}")
    return int(rep.verdict)


def _cmd_sweep(cfg: RunConfig) -> int:
    v = cfg.values
    model = _model(cfg)
    vc = VerificationConfig(dt=v["dt"], n_steps=max(v["T_grid"]), delta=1.0,
                            params=_params(cfg), form=_form(cfg, model),
                            kind=IntegratorKind.parse(v["kind"]), cap=v["cap"])
    res = sweep(model, vc, v["T_grid"], v["nsamp_grid"], threads=v["threads"])
    header = ["n_samp\\N"] + [str(n) for n in res.n_steps]
    rows = [[c] + list(r) for c, r in zip(res.sample_counts, res.margin)]
    comments = [f"seed={v['seed']}", f"model={model.name} dt={v['dt']!r}",
                "delta=" + ",".join(repr(d) for d in res.deltas)]
    _emit(v.get("out"), header, rows, comments)
    return EXIT_OK


def _cmd_repro(cfg: RunConfig) -> int:
    from .repro import run_repro

    try:
        checks = run_repro(cfg.values["example"], cfg.values.get("out"))
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INCONCLUSIVE


def _emit(out, header, rows, comments):
    if out:
        write_csv(out, header, rows, comments)
        return
    import csv
    from .io import fmt

    for c in comments:
        sys.stdout.write(f"# {c}\n")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])


_COMMANDS = {
    "bounds": _cmd_bounds,
    "montecarlo": _cmd_montecarlo,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
    "repro": _cmd_repro,
}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return _COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"simverify: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotSymmetric, NotPositiveDefinite, GridTooLarge, Divergence, ValueError) as exc:
        print(f"simverify: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
