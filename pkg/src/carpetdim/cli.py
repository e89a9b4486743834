"""Command-line front end.

Every command is deterministic given --seed: CSV/SVG/JSON bodies are
byte-identical across reruns and across --threads values.  Wall-clock time
appears only in the sidecar manifest written next to each --out file.

Exit codes: 0 ok, 2 invalid input, 3 parse error, 4 guard exceeded,
5 a result carries a non-convergence flag.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys as _sys
import time

import numpy as np

from . import __version__
from .measures import (
    BlockMeasure,
    PotentialFormatError,
    block_space,
    load_potential,
    thermo,
)
from .oracle import ZeroCylinder, box_count, local_dimension
from .render import render_svg
from .spectrum import bracket_refine, carpet_dimension, spectrum_curve
from .symbolic import OrbitFormatError, read_orbit, sample_orbit, write_orbit
from .system import GuardExceeded, SystemValidationError, load_system

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PARSE = 3
EXIT_GUARD = 4
EXIT_NOCONV = 5


def _fmt(x) -> str:
    return repr(float(x))


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _emit(args, body: str, *, inputs: dict, params: dict, t0: float) -> None:
    """Write to --out with a manifest sidecar, or print to stdout."""
    out = getattr(args, "out", None)
    if out is None:
        _sys.stdout.write(body)
        return
    data = body.encode("utf-8")
    with open(out, "wb") as fh:
        fh.write(data)
    manifest = {
        "command": args.command,
        "version": __version__,
        "inputs": inputs,
        "params": params,
        "seed": getattr(args, "seed", None),
        "output": os.path.basename(out),
        "output_sha256": _sha256(data),
        "wall_time_s": time.monotonic() - t0,
    }
    with open(out + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _params(args, *names) -> dict:
    return {k: getattr(args, k) for k in names if getattr(args, k, None) is not None}


def _default_measure(sys_obj, level: int, weights_path, seed: int, restarts: int):
    """The measure a sampling command uses: given weights, or the dim argmax."""
    if weights_path is not None:
        with open(weights_path, "r", encoding="utf-8") as fh:
            w = json.load(fh)
        vec = np.asarray(w, dtype=float)
        want = block_space(sys_obj, level).n_words
        if vec.ndim != 1 or vec.size != want:
            raise ValueError(
                f"weights file has {vec.size} entries, level {level} needs {want}"
            )
        return BlockMeasure.dense(sys_obj, level, vec), True
    res = carpet_dimension(sys_obj, level, seed=seed, restarts=restarts)
    return res.measure, res.converged


def cmd_validate(args) -> int:
    try:
        sys_obj = load_system(args.system)
    except SystemValidationError as e:
        print(json.dumps({"valid": False, "error": str(e)}, sort_keys=True))
        return EXIT_INVALID
    report = {
        "valid": True,
        "n_digits": sys_obj.n_digits,
        "n_rows": sys_obj.n_rows,
        "a_min": sys_obj.a_min,
        "b_max": sys_obj.b_max,
        "two_dimensional": sys_obj.two_dimensional,
        "has_disjoint_closure": sys_obj.has_disjoint_closure,
        "hash": f"sha256:{sys_obj.content_hash}",
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_dim(args) -> int:
    t0 = time.monotonic()
    sys_obj = load_system(args.system)
    res = carpet_dimension(
        sys_obj, args.level, seed=args.seed, restarts=args.restarts
    )
    space = block_space(sys_obj, args.level)
    labels = [space.label(int(w)) for w in range(space.n_words)]
    print(f"{res.dimension:.9f}")
    print("argmax " + " ".join(
        f"{lab}={_fmt(w)}" for lab, w in zip(labels, res.measure.weights)
    ))
    if args.out:
        rep = res.thermo
        body = json.dumps(
            {
                "dimension": res.dimension,
                "m": res.m,
                "kkt": res.kkt,
                "converged": res.converged,
                "iterations": res.iterations,
                "restarts_used": res.restarts_used,
                "labels": labels,
                "weights": [float(w) for w in res.measure.weights],
                "thermo": {
                    "h": rep.h, "h_v": rep.h_v,
                    "lyap": rep.lyap, "lyap_v": rep.lyap_v,
                },
            },
            indent=2, sort_keys=True,
        ) + "\n"
        _emit(
            args, body,
            inputs={"system": f"sha256:{sys_obj.content_hash}"},
            params=_params(args, "level", "restarts"), t0=t0,
        )
    return EXIT_OK if res.converged else EXIT_NOCONV


def _spectrum_csv(sys_obj, pot, pts, m: int, grid: int, seed: int) -> str:
    lines = [
        "# carpetdim spectrum",
        f"# system sha256:{sys_obj.content_hash}",
        f"# potential sha256:{pot.content_hash}",
        f"# m {m} grid {grid} seed {seed}",
        "alpha,lower,upper,feasible,kkt_residual,restarts_used",
    ]
    for p in pts:
        if p.feasible:
            lines.append(
                f"{_fmt(p.alpha)},{_fmt(p.lower)},{_fmt(p.upper)},true,"
                f"{_fmt(p.kkt_residual)},{p.restarts_used}"
            )
        else:
            lines.append(f"{_fmt(p.alpha)},,,false,,0")
    return "\n".join(lines) + "\n"


def cmd_spectrum(args) -> int:
    t0 = time.monotonic()
    sys_obj = load_system(args.system)
    pot = load_potential(args.potential, sys_obj)
    pts = spectrum_curve(
        sys_obj, pot, args.level,
        points=args.grid, seed=args.seed, restarts=args.restarts,
        threads=args.threads,
    )
    body = _spectrum_csv(sys_obj, pot, pts, args.level, args.grid, args.seed)
    _emit(
        args, body,
        inputs={
            "system": f"sha256:{sys_obj.content_hash}",
            "potential": f"sha256:{pot.content_hash}",
        },
        params=_params(args, "level", "grid", "restarts", "threads"), t0=t0,
    )
    bad = any(p.feasible and not p.converged for p in pts)
    return EXIT_NOCONV if bad else EXIT_OK


def cmd_bracket(args) -> int:
    t0 = time.monotonic()
    sys_obj = load_system(args.system)
    pot = load_potential(args.potential, sys_obj)
    rows = bracket_refine(
        sys_obj, pot, args.alpha, args.level,
        seed=args.seed, restarts=args.restarts,
    )
    if not any(r.feasible for r in rows):
        print(f"error: alpha={args.alpha} infeasible at every level up to "
              f"{args.level}", file=_sys.stderr)
        return EXIT_INVALID
    lines = [
        "# carpetdim bracket",
        f"# system sha256:{sys_obj.content_hash}",
        f"# potential sha256:{pot.content_hash}",
        f"# alpha {_fmt(args.alpha)} seed {args.seed}",
        "m,alpha,lower,upper,var_width,feasible,kkt_residual,restarts_used",
    ]
    for r in rows:
        if r.feasible:
            lines.append(
                f"{r.m},{_fmt(r.alpha)},{_fmt(r.lower)},{_fmt(r.upper)},"
                f"{_fmt(r.var_width)},true,{_fmt(r.kkt_residual)},{r.restarts_used}"
            )
        else:
            lines.append(f"{r.m},{_fmt(r.alpha)},,,{_fmt(r.var_width)},false,,0")
    _emit(
        args, "\n".join(lines) + "\n",
        inputs={
            "system": f"sha256:{sys_obj.content_hash}",
            "potential": f"sha256:{pot.content_hash}",
        },
        params=_params(args, "level", "restarts"), t0=t0,
    )
    bad = any(r.feasible and not r.converged for r in rows)
    return EXIT_NOCONV if bad else EXIT_OK


def cmd_render(args) -> int:
    t0 = time.monotonic()
    sys_obj = load_system(args.system)
    body = render_svg(sys_obj, args.depth)
    _emit(
        args, body,
        inputs={"system": f"sha256:{sys_obj.content_hash}"},
        params=_params(args, "depth"), t0=t0,
    )
    return EXIT_OK


def _rle_lines(keys: np.ndarray, j: int) -> str:
    """Run lengths of the flattened side x side bitmap, zero runs first."""
    side = 2**j
    total = side * side
    bits = np.zeros(total, dtype=np.uint8)
    bits[np.asarray(keys, dtype=np.int64)] = 1
    edges = np.flatnonzero(np.diff(bits)) + 1
    runs = np.diff(np.concatenate([[0], edges, [total]]))
    if bits[0] == 1:
        runs = np.concatenate([[0], runs])
    return f"{j};" + ",".join(str(int(r)) for r in runs)


def cmd_boxcount(args) -> int:
    t0 = time.monotonic()
    sys_obj = load_system(args.system)
    js = list(range(args.jmin, args.jmax + 1))
    depth = args.depth
    if depth is None:
        depth = int(np.ceil((args.jmax + 4) * np.log(2.0) / -np.log(sys_obj.b_max)))
    measure, conv = _default_measure(
        sys_obj, args.level, args.weights, args.seed, args.restarts
    )
    collect = args.boxes_out is not None
    rep = box_count(
        sys_obj, args.points, depth, js, args.seed,
        measure=measure, threads=args.threads, collect=collect,
    )
    lines = [
        "# carpetdim boxcount",
        f"# system sha256:{sys_obj.content_hash}",
        f"# seed {args.seed} points {rep.points_used} depth {depth}",
        "j,scale,count,count_corrected,in_fit,slope,residual,points_used",
    ]
    for j, scale, cnt, cc in zip(rep.js, rep.scales, rep.counts,
                                 rep.counts_corrected):
        infit = "true" if j in rep.js_used else "false"
        lines.append(
            f"{j},{_fmt(scale)},{cnt},{_fmt(cc)},{infit},"
            f"{_fmt(rep.slope)},{_fmt(rep.residual)},{rep.points_used}"
        )
    _emit(
        args, "\n".join(lines) + "\n",
        inputs={"system": f"sha256:{sys_obj.content_hash}"},
        params=_params(args, "points", "jmin", "jmax", "level", "threads"),
        t0=t0,
    )
    if collect:
        rle = [
            "# carpetdim boxes (run-length, row-major, zero runs first)",
            f"# system sha256:{sys_obj.content_hash}",
        ]
        rle += [_rle_lines(k, j) for j, k in zip(rep.js, rep.boxes)]
        data = ("\n".join(rle) + "\n").encode("utf-8")
        with open(args.boxes_out, "wb") as fh:
            fh.write(data)
    print(f"slope {rep.slope:.9f}")
    return EXIT_OK if conv else EXIT_NOCONV


def cmd_sample(args) -> int:
    t0 = time.monotonic()
    sys_obj = load_system(args.system)
    measure, conv = _default_measure(
        sys_obj, args.level, args.weights, args.seed, args.restarts
    )
    orbit = sample_orbit(measure, args.length, args.seed)
    if args.out:
        write_orbit(args.out, orbit, meta={"length": args.length})
        with open(args.out, "rb") as fh:
            body_hash = _sha256(fh.read())
        manifest = {
            "command": "sample",
            "version": __version__,
            "inputs": {"system": f"sha256:{sys_obj.content_hash}"},
            "params": _params(args, "length", "level"),
            "seed": args.seed,
            "output": os.path.basename(args.out),
            "output_sha256": body_hash,
            "wall_time_s": time.monotonic() - t0,
        }
        with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        for lab in orbit.labels():
            print(lab)
    return EXIT_OK if conv else EXIT_NOCONV


def cmd_localdim(args) -> int:
    t0 = time.monotonic()
    sys_obj = load_system(args.system)
    orbit = read_orbit(args.orbit, sys_obj)
    measure, conv = _default_measure(
        sys_obj, args.level, args.weights, args.seed, args.restarts
    )
    n_max = args.nmax if args.nmax is not None else min(len(orbit), 10000)
    rep = local_dimension(measure, orbit, n_max)
    print(f"liminf {rep.liminf_estimate:.9f}")
    print(f"tail_start {rep.tail_start}")
    if args.out:
        lines = [
            "# carpetdim localdim",
            f"# system sha256:{sys_obj.content_hash}",
            f"# seed {args.seed} n_max {n_max} tail_start {rep.tail_start}",
            "n,quotient",
        ]
        lines += [
            f"{n},{_fmt(q)}" for n, q in zip(rep.ns, rep.quotients)
        ]
        _emit(
            args, "\n".join(lines) + "\n",
            inputs={"system": f"sha256:{sys_obj.content_hash}"},
            params=_params(args, "level", "nmax"), t0=t0,
        )
    return EXIT_OK if conv else EXIT_NOCONV


def _add_common(sp, *, threads=False, restarts=False, level=False, out=True):
    sp.add_argument("--seed", type=int, default=0)
    if out:
        sp.add_argument("--out", default=None)
    if threads:
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    if restarts:
        sp.add_argument("--restarts", type=int, default=32)
    if level:
        sp.add_argument("--level", type=int, default=1,
                        help="block length m (default 1)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="carpetdim",
        description="Hausdorff dimension and Birkhoff spectra of "
        "Lalley-Gatzouras carpets via Bernoulli measure optimization",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check a system file")
    sp.add_argument("system")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("dim", help="maximal Ledrappier-Young dimension")
    sp.add_argument("system")
    _add_common(sp, restarts=True, level=True)
    sp.set_defaults(func=cmd_dim)

    sp = sub.add_parser("spectrum", help="Birkhoff spectrum bounds on a grid")
    sp.add_argument("system")
    sp.add_argument("potential")
    sp.add_argument("--grid", type=int, default=33)
    _add_common(sp, threads=True, restarts=True, level=True)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("bracket", help="bounds at one alpha for m=1..level")
    sp.add_argument("system")
    sp.add_argument("potential")
    sp.add_argument("alpha", type=float)
    _add_common(sp, restarts=True, level=True)
    sp.set_defaults(func=cmd_bracket)

    sp = sub.add_parser("render", help="SVG of the depth-n rectangles")
    sp.add_argument("system")
    sp.add_argument("--depth", type=int, default=3)
    _add_common(sp)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("boxcount", help="Monte-Carlo box-counting estimate")
    sp.add_argument("system")
    sp.add_argument("--points", type=int, default=100000)
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--jmin", type=int, default=3)
    sp.add_argument("--jmax", type=int, default=8)
    sp.add_argument("--weights", default=None,
                    help="JSON weight vector; default: dimension argmax")
    sp.add_argument("--boxes-out", default=None,
                    help="write per-scale occupancy bitmaps, run-length encoded")
    _add_common(sp, threads=True, restarts=True, level=True)
    sp.set_defaults(func=cmd_boxcount)

    sp = sub.add_parser("sample", help="sample an orbit from a block measure")
    sp.add_argument("system")
    sp.add_argument("--length", type=int, default=1000)
    sp.add_argument("--weights", default=None,
                    help="JSON weight vector; default: dimension argmax")
    _add_common(sp, restarts=True, level=True)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("localdim", help="local dimension along an orbit")
    sp.add_argument("system")
    sp.add_argument("orbit")
    sp.add_argument("--nmax", type=int, default=None)
    sp.add_argument("--weights", default=None,
                    help="JSON weight vector; default: dimension argmax")
    _add_common(sp, restarts=True, level=True)
    sp.set_defaults(func=cmd_localdim)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemValidationError as e:
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_INVALID
    except (OrbitFormatError, PotentialFormatError) as e:
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_PARSE
    except json.JSONDecodeError as e:
        print(f"error: parse failure at line {e.lineno} column {e.colno}: "
              f"{e.msg}", file=_sys.stderr)
        return EXIT_PARSE
    except GuardExceeded as e:
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_GUARD
    except KeyError as e:
        print(f"error: unknown digit {e}", file=_sys.stderr)
        return EXIT_INVALID
    except ValueError as e:
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
