"""Command-line front end: generate / label / eval / sweep."""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import camera, energy, evaluation, mesh as mesh_mod, mrf, normal_prior, synth
from .pipeline import PipelineConfig, parse_config_text, full_label, visibility

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2

SWEEP_PARAMS = {
    "cell_size": float, "mu1": float, "mu2": float, "mu3": float,
    "B_a": int, "B_i": int, "bins_azim": int, "bins_incl": int,
}
_PARAM_FIELD = {"B_a": "bins_azim", "B_i": "bins_incl"}


class InputError(Exception):
    pass


def _require(*paths):
    for p in paths:
        if p is None:
            continue
        if not Path(p).exists():
            raise InputError(f"input not found: {p}")


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _config(args) -> PipelineConfig:
    values = {}
    if args.config:
        _require(args.config)
        values.update(parse_config_text(Path(args.config).read_text()))
    for key in ("mu1", "mu2", "mu3", "cell_size", "bins_azim", "bins_incl", "data_norm",
                "seed", "coarse_smoothing"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return PipelineConfig.from_mapping(values)


def _load_inputs(args, cfg):
    _require(args.mesh, args.cameras, args.likelihoods)
    m = mesh_mod.load_mesh(args.mesh)
    views = camera.read_cameras(args.cameras)
    n_classes = camera.count_classes(args.likelihoods)
    if cfg.classes and len(cfg.classes) != n_classes:
        raise InputError(f"config lists {len(cfg.classes)} classes but "
                         f"{args.likelihoods} holds {n_classes}")
    views = [camera.load_likelihoods(args.likelihoods, v, n_classes) for v in views]
    return m, views, n_classes


def _manifest(args, cfg, command):
    return {
        "command": command,
        "inputs": {k: getattr(args, k) for k in ("mesh", "cameras", "likelihoods", "gt", "config")
                   if getattr(args, k, None) is not None},
        "config": cfg.as_dict() if cfg is not None else None,
        "params": {k: getattr(args, k) for k in ("param", "values", "jobs") if hasattr(args, k)},
    }


def _print_timings(timings, stream=sys.stdout):
    for k, v in timings.items():
        print(f"  {k:<12s} {v:8.3f} s", file=stream)


# --------------------------------------------------------------------------

def cmd_generate(args):
    spec = synth.SceneSpec(kind=args.scene, resolution=args.resolution, n_views=args.views,
                           width=args.width, height=args.height, p_flip=args.p_flip,
                           tau=args.tau, noise_block=args.noise_block,
                           n_classes=args.classes, seed=args.seed)
    scene = synth.generate(spec, args.out)
    print(f"wrote {args.scene} scene to {args.out}: {scene.mesh.n_facets} facets, "
          f"{len(scene.views)} views, classes {','.join(scene.class_names)}")
    return EXIT_OK


def run_label(m, views, n_classes, cfg, out_dir=None, dump_debug=False, vis=None):
    t0 = time.perf_counter()
    vis = visibility(m, views) if vis is None else vis
    t_raster = time.perf_counter() - t0
    res = full_label(m, views, vis, n_classes, cfg)
    res.timings = {"rasterize": t_raster, **res.timings}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        mesh_mod.save_ply(out / "labeled.ply", m, res.labels)
        _dump_json(out / "report.json", res.report())
        mrf.write_trace(out / "trace.txt", res.solve)
        if res.coarse_solve is not None:
            mrf.write_trace(out / "coarse_trace.txt", res.coarse_solve)
        if dump_debug:
            energy.dump_unary_csv(out / "unary.csv", res.model.unary)
            energy.dump_edges_csv(out / "edges.csv", energy.build_edges(m))
            if res.grid is not None:
                normal_prior.dump_grid_csv(out / "grid.csv", res.grid)
    return res, vis


def cmd_label(args):
    cfg = _config(args)
    m, views, n_classes = _load_inputs(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "run_manifest.json", _manifest(args, cfg, "label"))
    res, _ = run_label(m, views, n_classes, cfg, out, args.dump_debug)
    _dump_json(out / "timings.json", res.timings)
    rep = res.report()
    print(f"[{res.mode}] {m.n_facets} facets, {len(views)} views, {n_classes} classes")
    if "coarse_energy" in rep:
        print(f"  coarse energy {rep['coarse_energy']:.6f}, label changes {rep['label_changes']}")
    print(f"  final energy  {rep['final_energy']:.6f}")
    if "histograms" in res.timings:
        print(f"  histogram build time: {res.timings['histograms']:.3f} s")
    _print_timings(res.timings)
    return EXIT_OK


def cmd_eval(args):
    _require(args.cameras, args.gt, *args.mesh)
    views = camera.read_cameras(args.cameras)
    gts = []
    for v in views:
        try:
            gts.append(camera.load_gt(args.gt, v))
        except FileNotFoundError as exc:
            raise InputError(f"view/gt mismatch: {exc}") from None
    n_gt = len(list(Path(args.gt).glob("view*_gt.pgm")))
    if n_gt != len(views):
        raise InputError(f"view/gt count mismatch: {len(views)} cameras, {n_gt} ground-truth images")
    n_classes = args.n_classes or int(max(int(g[g != camera.VOID].max(initial=0)) for g in gts)) + 1
    rows = []
    vis = None
    for path in args.mesh:
        m, labels = mesh_mod.load_labeled_mesh(path)
        n_classes = max(n_classes, int(labels.max(initial=0)) + 1)
        vis = visibility(m, views)
        cm = evaluation.evaluate_views(m, labels, views, gts, n_classes, vis)
        name = Path(path).parent.name or Path(path).stem
        rows.append((name, evaluation.metrics(cm)))
    text = evaluation.report_text(rows)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.csv").write_text(evaluation.report_csv(rows))
        (out / "eval.txt").write_text(text)
        _dump_json(out / "eval.json", {name: m for name, m in rows})
    return EXIT_OK


def _sweep_point(payload):
    mesh_path, cams, liks, gt_dir, cfg_dict, value, param = payload
    cfg = PipelineConfig.from_mapping(cfg_dict)
    m = mesh_mod.load_mesh(mesh_path)
    views = camera.read_cameras(cams)
    n = camera.count_classes(liks)
    views = [camera.load_likelihoods(liks, v, n) for v in views]
    gts = [camera.load_gt(gt_dir, v) for v in views]
    return _evaluate_point(m, views, gts, n, cfg, param, value, None)


def _evaluate_point(m, views, gts, n_classes, cfg, param, value, vis):
    field = _PARAM_FIELD.get(param, param)
    cfg = cfg.replace(**{field: SWEEP_PARAMS[param](value)})
    res, vis = run_label(m, views, n_classes, cfg, vis=vis)
    cm = evaluation.evaluate_views(m, res.labels, views, gts, n_classes, vis)
    met = evaluation.metrics(cm)
    rep = res.report()
    return {"value": value, "mode": res.mode, "iou": met["iou"],
            "coarse_energy": rep.get("coarse_energy", float("nan")),
            "final_energy": rep["final_energy"],
            **{c: met[c] for c in evaluation.COLUMNS if c != "iou"}}


def parse_values(text):
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        vals.append(float("inf") if tok.lower() in ("inf", "global") else float(tok))
    if not vals:
        raise InputError("--values is empty")
    return vals


def sweep(m, views, gts, n_classes, cfg, param, values, jobs=1, paths=None):
    if param not in SWEEP_PARAMS:
        raise InputError(f"unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    if jobs > 1 and paths is not None:
        payloads = [(*paths, cfg.as_dict(), v, param) for v in values]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, payloads))
    vis = visibility(m, views)
    return [_evaluate_point(m, views, gts, n_classes, cfg, param, v, vis) for v in values]


def sweep_csv(rows):
    cols = ["value", "mode", "iou", "coarse_energy", "final_energy"] + \
        [c for c in evaluation.COLUMNS if c != "iou"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(r[c] if isinstance(r[c], str) else repr(float(r[c])) for c in cols))
    return "\n".join(lines) + "\n"


def cmd_sweep(args):
    cfg = _config(args)
    if args.param not in SWEEP_PARAMS:
        raise InputError(f"unknown sweep parameter {args.param!r}; choose from {sorted(SWEEP_PARAMS)}")
    values = parse_values(args.values)
    _require(args.gt)
    m, views, n_classes = _load_inputs(args, cfg)
    gts = [camera.load_gt(args.gt, v) for v in views]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "run_manifest.json", _manifest(args, cfg, "sweep"))
    rows = sweep(m, views, gts, n_classes, cfg, args.param, values, args.jobs,
                 (args.mesh, args.cameras, args.likelihoods, args.gt))
    text = sweep_csv(rows)
    (out / "sweep.csv").write_text(text)
    print(text, end="")
    return EXIT_OK


# --------------------------------------------------------------------------

def _add_pipeline_flags(p):
    p.add_argument("--mesh", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("--likelihoods", required=True, help="directory of view{ID}_class{K}.pgm")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--mu3", type=float)
    p.add_argument("--cell-size", dest="cell_size", type=float)
    p.add_argument("--bins-azim", dest="bins_azim", type=int)
    p.add_argument("--bins-incl", dest="bins_incl", type=int)
    p.add_argument("--data-norm", dest="data_norm", choices=["normalized", "raw"])
    p.add_argument("--coarse-smoothing", dest="coarse_smoothing", type=float)
    p.add_argument("--seed", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="meshlabel", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic scene")
    g.add_argument("--scene", choices=synth.KINDS, default="box-on-plane")
    g.add_argument("--out", required=True)
    g.add_argument("--resolution", type=float, default=4.0)
    g.add_argument("--views", type=int, default=6)
    g.add_argument("--width", type=int, default=160)
    g.add_argument("--height", type=int, default=120)
    g.add_argument("--p-flip", dest="p_flip", type=float, default=0.0)
    g.add_argument("--tau", type=float, default=0.0)
    g.add_argument("--noise-block", dest="noise_block", type=int, default=1)
    g.add_argument("--classes", type=int, default=2, choices=[2, 4])
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    lb = sub.add_parser("label", help="label a mesh from likelihood images")
    _add_pipeline_flags(lb)
    lb.add_argument("--dump-debug", action="store_true",
                    help="also write unary.csv, edges.csv and grid.csv")
    lb.set_defaults(func=cmd_label)

    ev = sub.add_parser("eval", help="score labeled meshes against ground-truth views")
    ev.add_argument("--mesh", required=True, nargs="+", help="labeled PLY file(s)")
    ev.add_argument("--cameras", required=True)
    ev.add_argument("--gt", required=True, help="directory of view{ID}_gt.pgm")
    ev.add_argument("--out")
    ev.add_argument("--n-classes", dest="n_classes", type=int)
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="label + evaluate over a range of one parameter")
    _add_pipeline_flags(sw)
    sw.add_argument("--gt", required=True)
    sw.add_argument("--param", required=True)
    sw.add_argument("--values", required=True, help="comma-separated; 'inf' = one global cell")
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except mrf.InvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InputError, FileNotFoundError, mesh_mod.PlyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
