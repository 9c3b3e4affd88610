"""Command-line front end.

Subcommands: simulate, exact, param-chain, attractor, occupation,
verify.  All outputs are written atomically; every run is reproducible
from its flags and seed (default seed comes from ITERLIB_SEED).  Values
from a JSON config file (--config) fill in any flag not given
explicitly on the command line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import attractor, figures, mixture, output, samplers, verify
from .core import BROWNIAN, StableParams
from .errors import IterLibError

_ENV_SEED = "ITERLIB_SEED"


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise IterLibError(f"expected comma-separated numbers, got {text!r}")


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise IterLibError(f"expected comma-separated integers, got {text!r}")


def _parse_resolution(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _default_seed() -> int:
    env = os.environ.get(_ENV_SEED)
    return int(env) if env else 0


class _Resolver:
    """Flag value, else config value, else hard default; flags win."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.config = {}
        path = self.args.get("config")
        if path:
            with open(path) as handle:
                self.config = json.load(handle)
            if not isinstance(self.config, dict):
                raise IterLibError("config file must hold a JSON object")

    def get(self, name: str, default=None, required: bool = False):
        value = self.args.get(name)
        if value is None:
            value = self.config.get(name, default)
        if value is None and required:
            raise IterLibError(f"missing required option --{name.replace('_', '-')}")
        return value


def _seed_of(res: _Resolver) -> int:
    return int(res.get("seed", _default_seed()))


def _process_params(res: _Resolver) -> tuple[StableParams, bool]:
    process = res.get("process", required=True)
    if process == "bm":
        return BROWNIAN, False
    if process == "rbm":
        return BROWNIAN, True
    if process == "stable":
        alpha = res.get("alpha", required=True)
        return (
            StableParams(float(alpha), float(res.get("sigma", 1.0)), float(res.get("r", 0.0))),
            False,
        )
    raise IterLibError(f"unknown process {process!r} (choose bm, rbm, stable)")


def _figure_path(out: str) -> str:
    stem, _ = os.path.splitext(out)
    return stem + ".png"


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    res = _Resolver(args)
    params, reflected = _process_params(res)
    times = np.array(_parse_floats(res.get("times", required=True)))
    depth = int(res.get("depth", required=True))
    n = int(res.get("samples", required=True))
    out = res.get("out", required=True)
    seed = _seed_of(res)
    rng = samplers.RandomStream(seed).generator()
    vals = samplers.iterate_fdd(
        np.tile(times, (n, 1)), depth, params, rng, reflected=reflected
    )
    header = [f"x_t{t:.12g}" for t in times]
    output.write_csv(out, header, vals)
    overflow = samplers.overflow_count(vals)
    print(
        f"simulate: wrote {n} samples x {times.size} times to {out}"
        f" (overflow: {overflow} values)",
        file=sys.stderr,
    )
    return 0


def cmd_exact(args) -> int:
    res = _Resolver(args)
    rates = _parse_floats(res.get("rates", required=True))
    k = int(res.get("k", len(rates)))
    if k != len(rates):
        raise IterLibError(f"--k is {k} but --rates has {len(rates)} entries")
    labelling = res.get("labelling")
    labelling = (
        tuple(range(k + 1)) if labelling is None else tuple(_parse_ints(labelling))
    )
    depth = int(res.get("depth", required=True))
    n = int(res.get("samples", required=True))
    out = res.get("out", required=True)
    policy = mixture.PrunePolicy(max_atoms=int(res.get("prune_max", 200_000)))
    seed = _seed_of(res)
    final = mixture.propagate_encoding(depth, np.array(rates), labelling, policy)
    rng = samplers.RandomStream(seed).generator()
    samples = mixture.sample_encoding_mixture(final, n, rng)
    output.write_csv(out, [f"x{i + 1}" for i in range(k)], samples)
    mix_path = os.path.splitext(out)[0] + ".mixture.json"
    output.atomic_write_text(mix_path, mixture.mixture_to_json(final))
    print(
        f"exact: wrote {n} samples to {out}; {final.n_atoms}-atom mixture"
        f" to {mix_path}",
        file=sys.stderr,
    )
    return 0


def cmd_param_chain(args) -> int:
    res = _Resolver(args)
    k = int(res.get("k", required=True))
    steps = int(res.get("steps", required=True))
    burn_in = int(res.get("burn_in", 1000))
    thin = int(res.get("thin", 1))
    variant = res.get("variant", "plain")
    start = res.get("start")
    lam0 = np.full(k, 2.0) if start is None else np.array(_parse_floats(start))
    if lam0.size != k:
        raise IterLibError(f"--start must have {k} entries")
    out = res.get("out", required=True)
    rng = samplers.RandomStream(_seed_of(res)).generator()
    states = mixture.param_chain_run(lam0, steps, burn_in, thin, rng, variant=variant)
    output.write_csv(out, [f"lambda{i + 1}" for i in range(k)], states)
    print(f"param-chain: wrote {states.shape[0]} states to {out}", file=sys.stderr)
    return 0


def cmd_attractor(args) -> int:
    res = _Resolver(args)
    k = int(res.get("k", required=True))
    method = res.get("method", required=True)
    out = res.get("out", required=True)
    plot = bool(res.get("plot", False))
    if method == "boxes":
        resolution = _parse_resolution(str(res.get("resolution", "6/1024")))
        lo, hi = attractor.invariant_box(k)
        upper = float(res.get("upper", hi if hi > lo else 8.0))
        per_axis = max(1, int(round((upper - lo) / resolution)))
        depth = int(res.get("depth", 12))
        cover = attractor.ifs_box_iterate(k, depth, per_axis, upper)
        output.write_csv(out, [f"c{i + 1}" for i in range(k)], cover.centers())
        print(
            f"attractor: wrote {cover.n_boxes} box centers to {out}"
            f" (side {cover.resolution:.6g})",
            file=sys.stderr,
        )
        if plot:
            figures.render_boxes(cover.centers(), cover.resolution, _figure_path(out))
    elif method == "chaos":
        steps = int(res.get("steps", required=True))
        burn_in = int(res.get("burn_in", 1000))
        rng = samplers.RandomStream(_seed_of(res)).generator()
        cloud = attractor.chaos_game(k, steps, burn_in, rng)
        output.write_csv(out, [f"c{i + 1}" for i in range(k)], cloud.points)
        print(
            f"attractor: wrote {cloud.points.shape[0]} points to {out}",
            file=sys.stderr,
        )
        if plot:
            figures.render_cloud(cloud.points, _figure_path(out))
    else:
        raise IterLibError(f"unknown method {method!r} (choose boxes, chaos)")
    return 0


def cmd_occupation(args) -> int:
    res = _Resolver(args)
    params, reflected = _process_params(res)
    depth = int(res.get("depth", required=True))
    points = int(res.get("points", required=True))
    bins = int(res.get("bins", 200))
    clip = res.get("clip")
    range_clip = None if clip is None else tuple(_parse_floats(clip))
    if range_clip is not None and len(range_clip) != 2:
        raise IterLibError("--clip needs exactly two numbers lo,hi")
    out = res.get("out", required=True)
    rng = samplers.RandomStream(_seed_of(res)).generator()
    hist = samplers.occupation_histogram(
        params, depth, points, bins, range_clip, rng, reflected=reflected
    )
    rows = zip(hist.edges[:-1], hist.edges[1:], hist.counts, hist.density)
    output.write_csv(out, ["bin_left", "bin_right", "count", "density"], rows)
    print(
        f"occupation: wrote {bins} bins to {out}"
        f" ({hist.n_outside} of {hist.n_points} values outside range)",
        file=sys.stderr,
    )
    if bool(res.get("plot", False)):
        figures.render_histogram(hist.edges, hist.density, _figure_path(out))
    return 0


def cmd_verify(args) -> int:
    res = _Resolver(args)
    suite = res.get("suite", "all")
    quick = bool(res.get("quick", False))
    threads = res.get("threads")
    threads = os.cpu_count() if threads is None else int(threads)
    seed = _seed_of(res)
    reports = verify.run_suite(suite, seed, quick=quick, threads=threads)
    text = verify.reports_to_json(reports)
    out = res.get("out")
    if out:
        output.atomic_write_text(out, text)
        if bool(res.get("plot", False)):
            figures.render_report(reports, _figure_path(out))
    else:
        print(text)
    for r in reports:
        print(
            f"{r.verdict.upper():4s} {r.name}: statistic {r.statistic:.5g}"
            f" vs threshold {r.threshold:.5g}",
            file=sys.stderr,
        )
    return verify.exit_code(reports)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iterlib",
        description="Iterated stochastic processes: simulation, exact "
        "finite-dimensional laws, attractors, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help=f"RNG seed (default ${_ENV_SEED} or 0)")
        p.add_argument("--config", help="JSON config; explicit flags override it")

    p = sub.add_parser("simulate", help="Monte Carlo iterated-process samples")
    p.add_argument("--process", choices=["bm", "rbm", "stable"])
    p.add_argument("--alpha", type=float, help="stability index (stable)")
    p.add_argument("--sigma", type=float, help="scale (stable; default 1)")
    p.add_argument("--r", type=float, help="location drift (stable; default 0)")
    p.add_argument("--depth", type=int, help="iteration depth")
    p.add_argument("--times", help="comma-separated evaluation times")
    p.add_argument("--samples", type=int, help="number of sample rows")
    p.add_argument("--out", help="output CSV path")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exact", help="exact mixture propagation + sampling")
    p.add_argument("--k", type=int, help="dimension (defaults to len(rates))")
    p.add_argument("--depth", type=int, help="number of propagation steps")
    p.add_argument("--rates", help="comma-separated initial gap rates")
    p.add_argument("--labelling", help="comma-separated labelling (default identity)")
    p.add_argument("--samples", type=int, help="number of sample rows")
    p.add_argument("--prune-max", type=int, dest="prune_max", help="atom cap")
    p.add_argument("--out", help="samples CSV; mixture JSON lands beside it")
    common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("param-chain", help="rate-vector Markov chain states")
    p.add_argument("--k", type=int)
    p.add_argument("--steps", type=int, help="total chain steps")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--thin", type=int)
    p.add_argument("--variant", choices=["plain", "reflected"])
    p.add_argument("--start", help="comma-separated start rates (default all 2)")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_param_chain)

    p = sub.add_parser("attractor", help="box cover or chaos-game cloud")
    p.add_argument("--k", type=int)
    p.add_argument("--method", choices=["boxes", "chaos"])
    p.add_argument("--depth", type=int, help="cover iterations (boxes)")
    p.add_argument("--resolution", help="box side, number or a/b (boxes)")
    p.add_argument("--upper", type=float, help="grid upper bound (boxes; k=1 needs >2)")
    p.add_argument("--steps", type=int, help="chain steps (chaos)")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true", default=None, help="also render a PNG")
    common(p)
    p.set_defaults(func=cmd_attractor)

    p = sub.add_parser("occupation", help="occupation histogram of one iterate")
    p.add_argument("--process", choices=["bm", "rbm", "stable"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--points", type=int, help="evaluation points in [0, 1]")
    p.add_argument("--bins", type=int)
    p.add_argument("--clip", help="histogram range lo,hi")
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true", default=None, help="also render a PNG")
    common(p)
    p.set_defaults(func=cmd_occupation)

    p = sub.add_parser("verify", help="statistical verification suite")
    p.add_argument(
        "--suite", choices=["all", *verify.SUITE_NAMES], help="default: all"
    )
    p.add_argument("--quick", action="store_true", default=None, help="1/10 sizes, 2x thresholds")
    p.add_argument("--threads", type=int, help="worker pool size")
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.add_argument("--plot", action="store_true", default=None, help="also render a PNG")
    common(p)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IterLibError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
