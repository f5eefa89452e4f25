"""Command-line front end.

Exit codes: 0 success, 2 invalid input (message on stderr), 3 the optimizer
did not converge (best-so-far result still printed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import clustering, expfam, radius, relative
from .densities import (
    default_grid,
    density_from_dict,
    load_json,
    make_grid,
    set_from_dict,
)
from .divergences import (
    DivergenceSpec,
    divergence,
    entropy,
    jsd,
    renyi_entropy,
    to_base,
)
from .means import MeanSpec

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 2, 3

# dimensionless outputs are never rescaled by --base
UNITLESS_KINDS = ("tv", "bhattacharyya")


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    log_base: str
    grid_lo: float | None
    grid_hi: float | None
    grid_n: int | None
    tol: float | None
    max_iters: int | None
    seed: int
    fmt: str
    threads: int
    trace: str | None

    def grid_for(self, members):
        if self.grid_lo is not None or self.grid_hi is not None:
            if self.grid_lo is None or self.grid_hi is None:
                raise InputError("--grid-lo and --grid-hi go together")
            return make_grid(self.grid_lo, self.grid_hi, self.grid_n or 2001)
        if self.grid_n is not None and any(_needs_grid(m) for m in members):
            return default_grid([m for m in members if _needs_grid(m)], self.grid_n)
        return None

    def search(self) -> radius.SearchConfig:
        kw = {"threads": self.threads}
        if self.tol is not None:
            kw["tol"] = self.tol
        if self.max_iters is not None:
            kw["max_iters"] = self.max_iters
        return radius.SearchConfig(**kw)


def _needs_grid(d) -> bool:
    if isinstance(d, expfam.EFMember):
        return not d.family.discrete
    return isinstance(d, expfam.EFMixture)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--base", choices=("nats", "bits"), default="nats")
    p.add_argument("--grid-lo", type=float)
    p.add_argument("--grid-hi", type=float)
    p.add_argument("--grid-n", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--threads", type=int)
    p.add_argument("--trace", help="write the per-iteration CSV trace here")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="infradius", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    d = sub.add_parser("divergence", parents=[common], help="divergence between two densities")
    d.add_argument("--kind", required=True, choices=DIVERGENCE_CHOICES)
    d.add_argument("--p", required=True)
    d.add_argument("--q", required=True)
    d.add_argument("--alpha", type=float)
    d.add_argument("--beta", type=float)
    d.add_argument("--mean", help="two-point mean for gen_bhattacharyya, e.g. power:0.5")

    e = sub.add_parser("entropy", parents=[common], help="Shannon or Renyi entropy")
    e.add_argument("--p", required=True)
    e.add_argument("--alpha", type=float, help="Renyi order (omit for Shannon)")

    for name, text in (("radius", "information radius"), ("centroid", "radius centroid only")):
        r = sub.add_parser(name, parents=[common], help=text)
        r.add_argument("--set", required=True)
        r.add_argument("--alpha", type=float, default=1.0)
        r.add_argument("--variational", action="store_true")
        r.add_argument("--relative", action="store_true")
        r.add_argument("--family")
        r.add_argument("--mean", help="e.g. arithmetic, renyi:2, power:0.5")
        r.add_argument("--divergence", help="e.g. kld, renyi:2, skew_jsd:0.5,0.5")

    pr = sub.add_parser("project", parents=[common], help="information projection onto a family")
    pr.add_argument("--p", required=True)
    pr.add_argument("--family", required=True)

    c = sub.add_parser("cluster", parents=[common], help="cluster densities")
    c.add_argument("--set", required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--family", default="gaussian")
    c.add_argument("--divergence", choices=clustering.DIVERGENCES, default="kld")
    c.add_argument("--mode", choices=clustering.MODES, default="closed_form")

    q = sub.add_parser("quantize", parents=[common], help="simplify a mixture to k components")
    q.add_argument("--mixture", required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--family", default="gaussian")
    return parser


DIVERGENCE_CHOICES = (
    "kld",
    "reverse_kld",
    "renyi",
    "renyi_inf",
    "tv",
    "bhattacharyya",
    "bhattacharyya_distance",
    "skew_jsd",
    "jsd",
    "gen_bhattacharyya",
)


# -- parsing helpers ------------------------------------------------------------------


def _read_density(path):
    return density_from_dict(load_json(path))


def _family(name: str | None) -> expfam.ExpFamily:
    if name is None:
        raise InputError("--family is required")
    params = {}
    head, _, tail = name.partition(":")
    if tail:
        key = {"weibull": "kappa", "mvn": "d", "categorical": "m"}.get(head)
        if key is None:
            raise InputError(f"family {head!r} takes no parameter")
        params[key] = float(tail) if key == "kappa" else int(tail)
    return expfam.get_family(head, **params)


def parse_mean(text: str | None, weights) -> MeanSpec:
    if not text:
        return MeanSpec.arithmetic(weights)
    kind, _, arg = text.partition(":")
    if kind == "power":
        return MeanSpec.power(float(arg), weights)
    if kind == "renyi":
        return MeanSpec.renyi(float(arg), weights)
    if kind == "quasi_arithmetic":
        gen, _, param = arg.partition(",")
        return MeanSpec.quasi_arithmetic(gen, weights, float(param) if param else None)
    if arg:
        raise InputError(f"mean {kind!r} takes no parameter")
    return MeanSpec(kind, tuple(weights))


def parse_divergence(text: str | None) -> DivergenceSpec:
    if not text:
        return DivergenceSpec("kld")
    kind, _, arg = text.partition(":")
    nums = [float(x) for x in arg.split(",")] if arg else []
    if kind == "skew_jsd":
        if len(nums) != 2:
            raise InputError("skew_jsd needs alpha,beta")
        return DivergenceSpec(kind, alpha=nums[0], beta=nums[1])
    return DivergenceSpec(kind, alpha=nums[0] if nums else None)


def _scalar(value: float, base: str, unitless: bool = False) -> float:
    return value if unitless else to_base(value, base)


def _fmt_scalar(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _dump(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True)


def _trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("iteration", "objective", "residual"))
    for it, obj, res in trace:
        w.writerow((it, repr(float(obj)), repr(float(res))))
    return buf.getvalue()


# -- subcommands ---------------------------------------------------------------------


def _cmd_divergence(a, cfg: RunConfig, out):
    p, q = _read_density(a.p), _read_density(a.q)
    grid = cfg.grid_for([p, q])
    if a.kind == "jsd":
        value = jsd(p, q, grid=grid)
    else:
        if a.kind == "gen_bhattacharyya":
            w = (0.5, 0.5) if a.alpha is None else (1 - a.alpha, a.alpha)
            spec = DivergenceSpec(a.kind, mean=parse_mean(a.mean or "geometric", w))
        else:
            spec = DivergenceSpec(a.kind, alpha=a.alpha, beta=a.beta)
        value = divergence(spec, p, q, grid=grid)
    value = _scalar(value, cfg.log_base, a.kind in UNITLESS_KINDS)
    _emit_scalar(cfg, out, "value", value)
    return EXIT_OK


def _emit_scalar(cfg, out, name, value):
    if cfg.fmt == "csv":
        out.write(f"{name}\n{_fmt_scalar(value)}\n")
    else:
        out.write(_fmt_scalar(value) + "\n")


def _cmd_entropy(a, cfg, out):
    p = _read_density(a.p)
    grid = cfg.grid_for([p])
    if a.alpha is None:
        value = entropy(p, grid=grid)
    else:
        value = renyi_entropy(p, a.alpha, grid=grid)
    _emit_scalar(cfg, out, "value", to_base(value, cfg.log_base))
    return EXIT_OK


def _cmd_radius(a, cfg, out, centroid_only=False):
    s = set_from_dict(load_json(a.set))
    grid = cfg.grid_for(s.members)
    if a.relative:
        fam = _family(a.family)
        mean = parse_mean(a.mean, s.weights) if a.mean else None
        res = relative.relative_radius(s, fam, mean, parse_divergence(a.divergence) if a.divergence else None)
    elif a.variational:
        res = radius.generalized_radius(
            s, parse_mean(a.mean, s.weights), parse_divergence(a.divergence), cfg.search(), grid=grid
        )
    else:
        res = radius.sibson_radius(s, a.alpha, grid=grid)
    d = res.to_dict()
    d["value"] = to_base(res.value, cfg.log_base)
    if a.relative:
        d["centroid"] = expfam.member_to_dict(res.centroid)
    if cfg.trace and res.trace:
        with open(cfg.trace, "w") as fh:
            fh.write(_trace_csv(res.trace))
    if centroid_only:
        out.write(_dump(d["centroid"]) + "\n")
    elif cfg.fmt == "csv":
        out.write(_trace_csv(res.trace) if res.trace else f"value\n{_fmt_scalar(d['value'])}\n")
    else:
        out.write(_dump(d) + "\n")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def _cmd_project(a, cfg, out):
    p = _read_density(a.p)
    member = relative.information_projection(p, _family(a.family), grid=cfg.grid_for([p]))
    out.write(_dump(expfam.member_to_dict(member)) + "\n")
    return EXIT_OK


def _state_out(cfg, out, d, trace):
    if cfg.trace:
        with open(cfg.trace, "w") as fh:
            fh.write(_trace_csv(trace))
    if cfg.fmt == "csv":
        out.write(_trace_csv(trace))
    else:
        out.write(_dump(d) + "\n")


def _cmd_cluster(a, cfg, out):
    s = set_from_dict(load_json(a.set))
    kw = {"max_iters": cfg.max_iters} if cfg.max_iters else {}
    st = clustering.cluster(
        s, a.k, _family(a.family), seed=cfg.seed, divergence=a.divergence, mode=a.mode, **kw
    )
    d = st.to_dict()
    d["objective"] = to_base(st.objective, cfg.log_base)
    _state_out(cfg, out, d, [(i, to_base(o, cfg.log_base), r) for i, o, r in st.trace])
    return EXIT_OK if st.converged else EXIT_NONCONVERGED


def _cmd_quantize(a, cfg, out):
    mix = density_from_dict(load_json(a.mixture))
    if not isinstance(mix, expfam.EFMixture):
        raise InputError("--mixture must hold a mixture object")
    kw = {"max_iters": cfg.max_iters} if cfg.max_iters else {}
    res = clustering.quantize_mixture(mix, a.k, _family(a.family), seed=cfg.seed, grid=cfg.grid_for([mix]), **kw)
    d = res.to_dict()
    d["objective"] = to_base(res.state.objective, cfg.log_base)
    d["jsd"] = to_base(res.jsd, cfg.log_base)
    trace = [(i, to_base(o, cfg.log_base), r) for i, o, r in res.state.trace]
    _state_out(cfg, out, d, trace)
    return EXIT_OK if res.state.converged else EXIT_NONCONVERGED


COMMANDS = {
    "divergence": _cmd_divergence,
    "entropy": _cmd_entropy,
    "radius": _cmd_radius,
    "centroid": lambda a, cfg, out: _cmd_radius(a, cfg, out, centroid_only=True),
    "project": _cmd_project,
    "cluster": _cmd_cluster,
    "quantize": _cmd_quantize,
}


def _threads(a) -> int:
    if a.threads is not None:
        return a.threads
    env = os.environ.get("INFRADIUS_THREADS")
    return int(env) if env else 1


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = RunConfig(
            a.subcommand,
            a.base,
            a.grid_lo,
            a.grid_hi,
            a.grid_n,
            a.tol,
            a.max_iters,
            a.seed,
            a.format,
            _threads(a),
            a.trace,
        )
        if cfg.grid_n is not None and cfg.grid_n < 3:
            raise InputError("--grid-n must be at least 3")
        if cfg.threads < 1:
            raise InputError("--threads must be positive")
        return COMMANDS[a.subcommand](a, cfg, out)
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        err.write(f"infradius {a.subcommand}: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
