"""Command-line batch driver.

Exit status is 0 when every unit of work succeeded, 1 when some inputs failed
(the rest are still processed) and 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ConfigurationError, MdisError, UndefinedMetricError
from .haar import ORIENTATIONS, forward_haar
from .hmt import default_universal_params, load_params, save_params
from .io import (
    GrayImage,
    default_density_sigma,
    density_map,
    load_fixations,
    load_image,
    read_luminance,
    write_map,
    write_pfm,
    write_pgm,
)
from .metrics import METRIC_LABELS, MetricReport, auc, lcc, nss
from .saliency import compute_saliency
from .train import EmConfig, em_fit, fit_universal

logger = logging.getLogger("mdis")

REPORT_SCHEMA_VERSION = 1
IMAGE_SUFFIXES = (".png", ".pgm")


def _expand_inputs(paths) -> list:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES))
        else:
            out.append(p)
    return out


def _em_config(args) -> EmConfig:
    return EmConfig(args.em_max_iter, args.em_tol, args.sigma_floor)


def _resolve_params(args):
    """Parameter set for UHMT runs (or the EM seed for THMT), or ``None``."""
    if args.params is not None:
        return load_params(args.params)
    if args.mode == "UHMT":
        return default_universal_params(args.levels)
    return None


def _map(func, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _run_one(task):
    """Worker: compute all maps for one image; returns ``(path, result | error)``."""
    path, params, mode, levels, config, rounds, clamp = task
    try:
        image = load_image(path)
        res = compute_saliency(image, params, mode, levels, config, rounds, clamp)
        return path, res, None
    except (MdisError, OSError, ValueError) as exc:
        return path, None, f"{type(exc).__name__}: {exc}"


# -- saliency -----------------------------------------------------------------


def cmd_saliency(args) -> int:
    inputs = _expand_inputs(args.inputs)
    if not inputs:
        raise ConfigurationError("no input images")
    params = _resolve_params(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (p, params, args.mode, args.levels, _em_config(args), args.max_rounds, not args.unclamped)
        for p in inputs
    ]
    failures = []
    timings = {}
    for path, res, err in _map(_run_one, tasks, args.jobs):
        if err is not None:
            failures.append((path, err))
            continue
        stem = path.stem
        try:
            for tag, smap in res.maps.items():
                write_map(out / f"{stem}_{tag.lower()}.{args.format}", smap.data)
                if args.raw_pfm:
                    write_pfm(out / f"{stem}_{tag.lower()}.pfm", res.raw[tag].data)
            if args.dump_labels:
                for grid in res.posteriors:
                    write_pgm(out / f"{stem}_labels{grid.scale}.pgm", grid.labels.astype(float))
            if args.dump_subbands:
                pyr = forward_haar(load_image(path), res.params.levels)
                for j in range(1, pyr.levels + 1):
                    for b in ORIENTATIONS:
                        write_pfm(out / f"{stem}_s{j}_{b}.pfm", pyr.subband(j, b))
                write_pfm(out / f"{stem}_LL.pfm", pyr.approx)
            if res.trace is not None and args.save_params:
                save_params(res.params, out / f"{stem}_params.json")
        except OSError as exc:
            failures.append((path, f"{type(exc).__name__}: {exc}"))
            continue
        timings[stem] = res.seconds
        logger.info("%s: %d maps in %.3fs", path, len(res.maps), res.seconds)
    (out / "timings.json").write_text(
        json.dumps({"mode": args.mode, "seconds": timings}, indent=2) + "\n", encoding="utf-8"
    )
    for path, err in failures:
        print(f"FAILED {path}: {err}", file=sys.stderr)
    return 1 if failures else 0


# -- training -----------------------------------------------------------------


def _trace_path(path: Path) -> Path:
    return path.with_name(path.stem + ".trace.json")


def cmd_train(args) -> int:
    image = load_image(args.image)
    config = _em_config(args)
    if args.params is not None:
        config = EmConfig(config.max_iterations, config.rel_tolerance, config.sigma_floor, load_params(args.params))
    params, trace = em_fit(forward_haar(image, args.levels), config)
    out = Path(args.out)
    save_params(params, out)
    _trace_path(out).write_text(json.dumps(trace.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out} ({trace.iterations} iterations, converged={trace.converged})")
    return 0


def cmd_fit_universal(args) -> int:
    inputs = _expand_inputs(args.inputs)
    if not inputs:
        raise ConfigurationError("no input images")
    images = [load_image(p) for p in inputs]
    params, fits = fit_universal(images, _em_config(args), args.levels, return_fits=True)
    out = Path(args.out)
    save_params(params, out)
    sidecar = {
        "images": [str(p) for p in inputs],
        "traces": [t.to_dict() for _, t in fits],
        "fingerprint": params.fingerprint(),
    }
    _trace_path(out).write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out} from {len(images)} images, sha256 {params.fingerprint()}")
    return 0


# -- evaluation ---------------------------------------------------------------


def _pairs(args, inputs):
    """``[(image_path, fixation_path)]`` paired by stem or from a manifest."""
    if args.manifest:
        base = Path(args.manifest).parent
        with open(args.manifest, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        return [(base / r["image"], base / r["fixations"]) for r in rows], []
    fixdir = Path(args.fixations)
    pairs, missing = [], []
    for p in inputs:
        fx = fixdir / f"{p.stem}.csv"
        if fx.is_file():
            pairs.append((p, fx))
        else:
            missing.append(p)
    return pairs, missing


def _column(mode: str, tag: str) -> str:
    return mode[0] + tag


def _load_precomputed(maps_dir: Path, stem: str, crop):
    maps = {}
    for f in sorted(maps_dir.glob(f"{stem}_hmt*.*")):
        tag = f.stem[len(stem) + 1:].upper()
        if f.suffix.lower() in IMAGE_SUFFIXES and tag[3:].isdigit():
            maps[tag] = read_luminance(f)
    if not maps:
        raise ConfigurationError(f"no maps for {stem} in {maps_dir}")
    for tag, m in maps.items():
        if m.shape != (crop[1], crop[0]):
            raise ConfigurationError(f"{stem} {tag} map has shape {m.shape}, image crop is {crop}")
    return maps


def _defined(metric, *args) -> float:
    try:
        return metric(*args)
    except UndefinedMetricError as exc:
        logger.warning("%s; recorded as NaN", exc)
        return float("nan")


def _score(smap, fix, truth, stem, column, seconds) -> MetricReport:
    """Like :func:`mdis.metrics.evaluate`, but an undefined metric becomes NaN."""
    return MetricReport(
        stem,
        column,
        _defined(lcc, smap, truth),
        _defined(nss, smap, fix),
        _defined(auc, smap, fix),
        float(seconds),
    )


def _nanmean(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    v = v[~np.isnan(v)]
    return float(v.mean()) if v.size else float("nan")


def _mean_rows(reports):
    by_col = {}
    for r in reports:
        by_col.setdefault(r.mode, []).append(r)
    return {
        col: {
            "LCC": _nanmean([r.lcc for r in rs]),
            "NSS": _nanmean([r.nss for r in rs]),
            "AUC": _nanmean([r.auc for r in rs]),
            "TIME(s)": _nanmean([r.time_seconds for r in rs]),
        }
        for col, rs in by_col.items()
    }


def _null_nan(obj):
    """Undefined metrics are NaN in memory and ``null`` in JSON."""
    if isinstance(obj, dict):
        return {k: _null_nan(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_null_nan(v) for v in obj]
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def write_reports(out: Path, reports: list, columns: list) -> None:
    """Per-image rows plus a mean row (``metrics.csv``), a table (``summary.csv``) and JSON."""
    summary = _mean_rows(reports)
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "columns": columns,
        "reports": [r.to_dict() for r in reports],
        "mean": summary,
    }
    (out / "metrics.json").write_text(json.dumps(_null_nan(doc), indent=2) + "\n", encoding="utf-8")

    images = list(dict.fromkeys(r.image_id for r in reports))
    lookup = {(r.image_id, r.mode): r for r in reports}
    header = ["image"] + [f"{c}:{m}" for c in columns for m in METRIC_LABELS]
    with open(out / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for img in images:
            row = [img]
            for c in columns:
                r = lookup.get((img, c))
                row += [repr(v) for v in r.as_row().values()] if r else [""] * len(METRIC_LABELS)
            w.writerow(row)
        w.writerow(["mean"] + [repr(summary[c][m]) for c in columns for m in METRIC_LABELS])
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Observations"] + columns)
        for m in METRIC_LABELS:
            w.writerow([m] + [repr(summary[c][m]) for c in columns])


def cmd_eval(args) -> int:
    inputs = _expand_inputs(args.inputs)
    pairs, missing = _pairs(args, inputs)
    for p in missing:
        logger.warning("no fixation file for %s, skipped", p)
    if not pairs:
        raise ConfigurationError("no image/fixation pairs to evaluate")
    modes = ["UHMT", "THMT"] if args.mode == "BOTH" else [args.mode]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    timings = {}
    if args.maps_dir:
        tfile = Path(args.maps_dir) / "timings.json"
        if tfile.is_file():
            timings = json.loads(tfile.read_text(encoding="utf-8")).get("seconds", {})

    reports, failures = [], []
    columns = []
    for img_path, fix_path in pairs:
        stem = img_path.stem
        found = []
        try:
            image = load_image(img_path)
            fix = load_fixations(fix_path, image.crop)
            sigma = args.density_sigma or default_density_sigma(image.crop)
            truth = density_map(fix, sigma)
            if args.maps_dir:
                maps = _load_precomputed(Path(args.maps_dir), stem, image.crop)
                seconds = timings.get(stem, float("nan"))
                for tag, m in maps.items():
                    found.append(_score(m, fix, truth, stem, _column(modes[0], tag), seconds))
            else:
                for mode in modes:
                    params = load_params(args.params) if args.params else (
                        default_universal_params(args.levels) if mode == "UHMT" else None
                    )
                    res = compute_saliency(image, params, mode, args.levels, _em_config(args), args.max_rounds)
                    for tag, smap in res.maps.items():
                        found.append(_score(smap, fix, truth, stem, _column(mode, tag), res.seconds))
            if args.chance:
                h, w = truth.data.shape
                found.append(_score(rng.random((h, w)), fix, truth, stem, "CHANCE", 0.0))
        except (MdisError, OSError, ValueError) as exc:
            failures.append((img_path, f"{type(exc).__name__}: {exc}"))
            continue
        reports.extend(found)
    for r in reports:
        if r.mode not in columns:
            columns.append(r.mode)
    if not reports:
        for path, err in failures:
            print(f"FAILED {path}: {err}", file=sys.stderr)
        raise ConfigurationError("every evaluation failed")
    columns.sort(key=_column_order)
    write_reports(out, reports, columns)
    summary = _mean_rows(reports)
    print("Observations," + ",".join(columns))
    for m in METRIC_LABELS:
        print(m + "," + ",".join(f"{summary[c][m]:.5f}" for c in columns))
    for path, err in failures:
        print(f"FAILED {path}: {err}", file=sys.stderr)
    return 1 if failures else 0


def _column_order(col: str):
    if col == "CHANCE":
        return (2, 0, "")
    return (0 if col.startswith("U") else 1, int(col[4:]) if col[4:].isdigit() else 99, col)


# -- benchmark ----------------------------------------------------------------


def synthetic_corpus(n: int, side: int, seed) -> list:
    """Smooth ramps with one textured square each, for timing runs."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side] / max(side - 1, 1)
    images = []
    for _ in range(n):
        a, b = rng.uniform(-0.3, 0.3, 2)
        img = 0.5 + a * (xx - 0.5) + b * (yy - 0.5)
        k = max(side // 8, 2)
        r, c = rng.integers(0, side - k + 1, 2)
        img[r: r + k, c: c + k] += 0.2 * rng.standard_normal((k, k))
        images.append(GrayImage(np.clip(img, 0, 1), (side, side)))
    return images


def bench_times(images, modes, levels=5, params=None, config=None, max_rounds=10) -> dict:
    out = {}
    for mode in modes:
        p = params if params is not None else (default_universal_params(levels) if mode == "UHMT" else None)
        times = []
        for image in images:
            t0 = time.perf_counter()
            compute_saliency(image, p, mode, levels, config, max_rounds)
            times.append(time.perf_counter() - t0)
        out[mode] = {
            "mean": statistics.fmean(times),
            "median": statistics.median(times),
            "seconds": times,
        }
    return out


def cmd_bench(args) -> int:
    if args.synthetic:
        images = synthetic_corpus(args.synthetic, args.side, args.seed)
    else:
        images = [load_image(p) for p in _expand_inputs(args.inputs)]
    if not images:
        raise ConfigurationError("benchmark corpus is empty")
    modes = ["UHMT", "THMT"] if args.mode == "BOTH" else [args.mode]
    params = load_params(args.params) if args.params else None
    result = bench_times(images, modes, args.levels, params, _em_config(args), args.max_rounds)
    doc = {"schema_version": REPORT_SCHEMA_VERSION, "images": len(images), "modes": result}
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    for mode, r in result.items():
        print(f"{mode}: mean {r['mean']:.4f}s  median {r['median']:.4f}s  over {len(images)} images")
    return 0


# -- parser -------------------------------------------------------------------


def _mode(value: str) -> str:
    v = value.upper()
    if v not in ("UHMT", "THMT", "BOTH"):
        raise argparse.ArgumentTypeError(f"invalid mode {value!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--levels", type=int, default=5, help="Haar decomposition depth (default 5)")
    common.add_argument("--params", help="HMT parameter JSON (UHMT parameters or THMT/EM seed)")
    common.add_argument("--em-max-iter", type=int, default=50)
    common.add_argument("--em-tol", type=float, default=1e-6)
    common.add_argument("--sigma-floor", type=float, default=1e-6)
    common.add_argument("--max-rounds", type=int, default=10, help="context prior estimation rounds")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mdis", description="Multiscale discriminant saliency")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("saliency", parents=[common], help="compute HMT0..HMTn maps")
    p.add_argument("inputs", nargs="+", help="images or directories")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--mode", type=_mode, default="UHMT")
    p.add_argument("--format", choices=("png", "pgm"), default="png")
    p.add_argument("--raw-pfm", action="store_true", help="also write unnormalized maps as PFM")
    p.add_argument("--unclamped", action="store_true", help="keep negative pointwise MI (debug)")
    p.add_argument("--dump-labels", action="store_true", help="write per-scale MAP labels as PGM")
    p.add_argument("--dump-subbands", action="store_true", help="write wavelet subbands as PFM")
    p.add_argument("--save-params", action="store_true", help="write per-image THMT parameters")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("train", parents=[common], help="fit HMT parameters to one image")
    p.add_argument("image")
    p.add_argument("-o", "--out", required=True, help="parameter JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fit-universal", parents=[common], help="average per-image fits over a corpus")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out", required=True, help="parameter JSON path")
    p.set_defaults(func=cmd_fit_universal)

    p = sub.add_parser("eval", parents=[common], help="score maps against eye fixations")
    p.add_argument("inputs", nargs="*", help="images or directories")
    p.add_argument("--fixations", help="directory of <stem>.csv fixation files")
    p.add_argument("--manifest", help="CSV with columns image,fixations overriding stem pairing")
    p.add_argument("--maps-dir", help="evaluate precomputed <stem>_hmtK maps instead of computing")
    p.add_argument("--mode", type=_mode, default="UHMT")
    p.add_argument("--density-sigma", type=float, help="ground-truth blur in pixels (default 2%% of diagonal)")
    p.add_argument("--chance", action="store_true", help="add a seeded uniform-random baseline column")
    p.add_argument("-o", "--out", required=True, help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="time UHMT and THMT per image")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--mode", type=_mode, default="BOTH")
    p.add_argument("--synthetic", type=int, default=0, help="time N generated images instead")
    p.add_argument("--side", type=int, default=256, help="side of generated images")
    p.add_argument("-o", "--out", help="JSON report path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.levels < 1:
        parser.error("--levels must be >= 1")
    if args.command == "saliency" and args.mode == "BOTH":
        parser.error("saliency runs one mode at a time")
    if args.command == "eval" and not (args.fixations or args.manifest):
        parser.error("eval needs --fixations or --manifest")
    try:
        return args.func(args)
    except (ConfigurationError, MdisError, OSError) as exc:
        print(f"mdis: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
