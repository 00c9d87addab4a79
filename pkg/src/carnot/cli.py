"""Command-line driver: ``carnot <subcommand> [options]``.

Every subcommand writes UTF-8 JSON (and CSV where there is tabular output)
into ``--out``. JSON artifacts carry no timings so seeded reruns are
byte-identical.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .algebra import BUNDLED, load_algebra
from .embedding import LacunaryFamily, assemble_weierstrass, assouad_baseline
from .frames import ExtensionConfig, FrameExtensionError, FrameField, extend_frame
from .harness import (MissingArtifactsError, build_report, distortion, file_digest, fit_loglog_slope,
                      generate_heisenberg_ball, render_report, sweep_epsilon)
from .nets import (PointCloud, circle_cloud, color_net, greedy_maximal_net, locbd_violations,
                   verify_net)
from .oscillator import pasted_oscillator_on_ball, sample_ball

DEFAULT_EPS = [2.0**-j for j in range(2, 7)]


def _mode(args) -> str:
    return "rational" if args.scalar == "rational" else "floating"


def _out(args) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--scalar", choices=["rational", "f64"], default="f64", help="scalar arithmetic")
    p.add_argument("--tol", type=float, default=1e-9, help="numerical tolerance")
    p.add_argument("--out", default="carnot-run", help="output directory")


def _cloud_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--group", default="h3", help=f"bundled group ({', '.join(BUNDLED)}) or JSON path")
    p.add_argument("--points", help="point CSV with header x_r_i; overrides the generated cloud")
    p.add_argument("--R", type=float, default=8.0, help="ball radius")
    p.add_argument("--n", type=int, default=0, help="random points in the ball; 0 means the h3 lattice ball")


def _load_cloud(args) -> PointCloud:
    alg = load_algebra(args.group, "floating")
    if args.points:
        _, pts = io.read_points_csv(args.points)
        return PointCloud.from_carnot(alg, pts, name=str(args.points))
    if args.n > 0:
        pts = sample_ball(alg, args.n, args.R, np.random.default_rng(args.seed))
        return PointCloud.from_carnot(alg, pts, name=f"{alg.name}-random-ball")
    if tuple(alg.strata_dims) != (2, 1):
        raise SystemExit("lattice balls are available for h3 only; pass --n or --points")
    return generate_heisenberg_ball(args.R)


def _cloud_config(args) -> dict:
    return {"group": args.group, "points": args.points, "R": args.R, "n": args.n, "seed": args.seed}


def _write_cloud(out: Path, cloud: PointCloud, group: str) -> None:
    alg = load_algebra(group, "floating")
    io.write_points_csv(out / "cloud.csv", cloud.points, io.coordinate_header(alg))


def _relative(path, base: Path) -> str:
    """Path as seen from the run directory when it lives inside it, so reruns elsewhere match."""
    p = Path(path).resolve()
    try:
        return p.relative_to(base.resolve()).as_posix()
    except ValueError:
        return str(path)


# --- subcommands ---------------------------------------------------------


def cmd_validate(args) -> int:
    alg = load_algebra(args.spec, _mode(args))
    rep = alg.validate()
    data = {"config": {"spec": str(args.spec), "scalar": args.scalar}, "name": alg.name,
            "strata_dims": list(alg.strata_dims), "n_h": alg.n_h, "report": rep.to_dict(), "ok": rep.ok}
    io.write_json(_out(args) / "validate.json", data)
    print(("PASS" if rep.ok else "FAIL") + f" {alg.name}: {len(rep)} violation(s)")
    return 0 if rep.ok else 1


def cmd_net(args) -> int:
    out = _out(args)
    cloud = _load_cloud(args)
    net = greedy_maximal_net(cloud, args.delta)
    ver = verify_net(net)
    radii = [args.delta * 2**j for j in range(4)]
    viol = locbd_violations(net, radii)
    ok = ver.ok and not viol
    data = {"config": {**_cloud_config(args), "delta": args.delta}, "cloud_size": len(cloud),
            "net": net.to_json(), "verify": ver.to_json(), "locbd_radii": radii,
            "locbd_violations": [list(v) for v in viol], "ok": ok}
    _write_cloud(out, cloud, args.group)
    io.write_json(out / "net.json", data)
    print(f"{'PASS' if ok else 'FAIL'} net of {len(net)} points from {len(cloud)}")
    return 0 if ok else 1


def cmd_color(args) -> int:
    out = _out(args)
    cloud = _load_cloud(args)
    net = greedy_maximal_net(cloud, args.delta)
    coarse = args.coarse if args.coarse else 3.0 * args.delta
    col = color_net(net, coarse)
    bound = 7 ** (cloud.n_h or 1)
    ok = col.n_colors <= bound
    data = {"config": {**_cloud_config(args), "delta": args.delta, "coarse": coarse},
            "coloring": col.to_json(), "color_bound": bound, "ok": ok}
    io.write_json(out / "color.json", data)
    print(f"{'PASS' if ok else 'FAIL'} {col.n_colors} colors (bound {bound})")
    return 0 if ok else 1


def cmd_extend_frame(args) -> int:
    out = _out(args)
    cfg = ExtensionConfig(K=args.K, m=args.m, D=args.D, seed=args.seed)
    cloud = circle_cloud(args.n, args.n * cfg.delta / 4.0, seed=args.seed)
    frame = FrameField.constant(cloud, np.eye(args.D)[: args.m]) if args.m else FrameField.empty(cloud, args.D)
    try:
        new, rep = extend_frame(cloud, frame, cfg, strict=False)
    except FrameExtensionError as exc:
        rep = exc.report
        new = None
    data = {"config": {**cfg.to_json(), "n": args.n}, **rep.to_json()}
    io.write_json(out / "extend_frame.json", data)
    if new is not None and args.write_frame:
        io.write_frame_csv(out / "frame.csv", new.vectors)
    print(f"{'PASS' if rep.ok else 'FAIL'} frame extension: resamples={rep.resamples} "
          f"norm2=[{rep.norm2_min:.3f}, {rep.norm2_max:.3f}] lipschitz={rep.lipschitz:.2f}")
    return 0 if rep.ok else 1


def cmd_oscillator(args) -> int:
    out = _out(args)
    alg = load_algebra(args.group, "floating")
    rng = np.random.default_rng(args.seed)
    P = sample_ball(alg, args.samples, args.radius, rng)
    osc, col = pasted_oscillator_on_ball(alg, P, args.radius, fill=args.fill, seed=args.seed)
    wedge = osc.wedge_lower_bound(P)
    ok = bool(np.min(wedge) >= args.threshold)
    data = {"config": {"group": args.group, "samples": args.samples, "radius": args.radius,
                       "fill": args.fill, "seed": args.seed, "threshold": args.threshold},
            "net_size": len(col.net), "n_colors": col.n_colors, "dim": osc.dim,
            "wedge_min": float(np.min(wedge)), "wedge_median": float(np.median(wedge)),
            "wedge_min_point": int(np.argmin(wedge)), "ok": ok}
    io.write_json(out / "oscillator.json", data)
    io.write_indexed_csv(out / "oscillator.csv", np.column_stack([P, wedge]), prefix="c")
    print(f"{'PASS' if ok else 'FAIL'} pasted map wedge min {np.min(wedge):.3g} over {len(P)} points")
    return 0 if ok else 1


def _weierstrass_values(cloud: PointCloud, eps: float, A: float, M1: int, M2: int | None,
                        block: bool) -> tuple[np.ndarray, dict]:
    alg = load_algebra("h3", "floating")
    M2 = int(math.ceil(40.0 / eps)) if M2 is None else M2
    emb = assemble_weierstrass(LacunaryFamily(alg, A, M1, M2, block), eps)
    return emb(cloud.points), {**emb.provenance, "digest": emb.digest, "dim": emb.dim}


def cmd_embed(args) -> int:
    out = _out(args)
    cloud = _load_cloud(args)
    if args.kind == "assouad":
        emb = assouad_baseline(cloud, args.eps, A=args.A, period=args.period)
        values = emb(np.arange(len(cloud)))
        meta = {**emb.provenance, "digest": emb.digest, "dim": emb.dim}
    else:
        values, meta = _weierstrass_values(cloud, args.eps, args.A, args.M1, args.M2, not args.shared)
    _write_cloud(out, cloud, args.group)
    io.write_indexed_csv(out / "embedding.csv", values)
    io.write_json(out / "embed.json", {"config": {**_cloud_config(args), "kind": args.kind, "eps": args.eps},
                                       "embedding": meta, "ok": True})
    print(f"wrote {values.shape[0]} x {values.shape[1]} embedding ({args.kind})")
    return 0


def cmd_distortion(args) -> int:
    out = _out(args)
    alg = load_algebra(args.group, "floating")
    points = args.points or str(out / "cloud.csv")
    embedding = args.embedding or str(out / "embedding.csv")
    _, pts = io.read_points_csv(points)
    cloud = PointCloud.from_carnot(alg, pts)
    values = io.read_indexed_csv(embedding)
    rep = distortion(cloud, values, 1.0 - args.eps, seed=args.seed)
    inputs = {name: {"path": _relative(path, out), "sha256": file_digest(Path(path))}
              for name, path in (("points", points), ("embedding", embedding))}
    data = {"config": {"group": args.group, "eps": args.eps, "seed": args.seed, **inputs}, **rep.to_json()}
    io.write_json(out / "distortion.json", data)
    print(f"distortion {rep.distortion:.6g} over {rep.pairs} pairs")
    return 0 if math.isfinite(rep.distortion) else 1


def cmd_sweep(args) -> int:
    out = _out(args)
    cloud = _load_cloud(args)
    eps_list = args.eps or DEFAULT_EPS
    if args.family == "assouad":
        def builder(e):
            return assouad_baseline(cloud, e, A=args.A, period=args.period)(np.arange(len(cloud)))
        key = "distortion"
    else:
        block = args.family == "weierstrass-block"

        def builder(e):
            return _weierstrass_values(cloud, e, args.A, 0, None, block)[0]
        key = "holder"
    rows = sweep_epsilon(cloud, builder, eps_list, seed=args.seed)
    fit = fit_loglog_slope(rows, key=key)
    data = {"config": {**_cloud_config(args), "family": args.family, "eps": eps_list, "A": args.A,
                       "fit_key": key}, "rows": [r.to_json() for r in rows], "fit": fit.to_json(),
            "ok": all(r.ok for r in rows)}
    io.write_json(out / "sweep.json", data)
    io.write_indexed_csv(out / "sweep.csv", np.array([[r.eps, r.distortion, r.holder] for r in rows]), prefix="c")
    print(f"{args.family}: slope of log {key} vs log(1/eps) = {fit.slope:.3f} +/- {fit.stderr:.3f} "
          f"({fit.used} rows, {fit.dropped} dropped)")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir or args.out)
    try:
        rep = build_report(run_dir)
    except MissingArtifactsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    io.write_json(run_dir / "report.json", rep)
    sys.stdout.write(render_report(rep))
    return 0 if rep["all_pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carnot", description="Carnot group snowflake embedding toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the axioms of a stratified algebra")
    p.add_argument("spec", help=f"group JSON file or bundled name ({', '.join(BUNDLED)})")
    _common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("net", help="greedy net with separation, covering and volumetric checks")
    _cloud_args(p)
    p.add_argument("--delta", type=float, default=2.0)
    _common(p)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("color", help="color a net so each class is coarsely separated")
    _cloud_args(p)
    p.add_argument("--delta", type=float, default=2.0)
    p.add_argument("--coarse", type=float, default=0.0, help="class separation (default 3*delta)")
    _common(p)
    p.set_defaults(func=cmd_color)

    p = sub.add_parser("extend-frame", help="add one Lipschitz unit field on a circle cloud")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--D", type=int, default=2500)
    p.add_argument("--write-frame", action="store_true", help="also write frame.csv")
    _common(p)
    p.set_defaults(func=cmd_extend_frame)

    p = sub.add_parser("oscillator", help="wedge lower bound of the pasted Veronese map")
    p.add_argument("--group", default="h3")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--radius", type=float, default=4.0)
    p.add_argument("--fill", type=int, default=6000)
    p.add_argument("--threshold", type=float, default=0.9)
    _common(p)
    p.set_defaults(func=cmd_oscillator)

    p = sub.add_parser("embed", help="evaluate a snowflake embedding on a cloud")
    p.add_argument("kind", choices=["assouad", "weierstrass"])
    _cloud_args(p)
    p.add_argument("--eps", type=float, default=0.125)
    p.add_argument("--A", type=float, default=2.0)
    p.add_argument("--period", type=int, default=2, help="Assouad block period")
    p.add_argument("--M1", type=int, default=0)
    p.add_argument("--M2", type=int, default=None, help="top scale (default ceil(40/eps))")
    p.add_argument("--shared", action="store_true", help="Weierstrass scales share coordinates")
    _common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("distortion", help="distortion of an embedding CSV against a snowflaked cloud")
    p.add_argument("--group", default="h3")
    p.add_argument("--points", help="cloud CSV (default <out>/cloud.csv)")
    p.add_argument("--embedding", help="embedding CSV (default <out>/embedding.csv)")
    p.add_argument("--eps", type=float, default=0.125)
    _common(p)
    p.set_defaults(func=cmd_distortion)

    p = sub.add_parser("sweep", help="epsilon sweep and log-log slope fit")
    p.add_argument("--family", choices=["assouad", "weierstrass-block", "weierstrass-shared"], default="assouad")
    _cloud_args(p)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--A", type=float, default=2.0)
    p.add_argument("--period", type=int, default=2)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize the artifacts of a run directory")
    p.add_argument("run_dir", nargs="?", help="run directory (default --out)")
    _common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args) or 0)


if __name__ == "__main__":
    raise SystemExit(main())
