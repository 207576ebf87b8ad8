"""Command line entry point: ``scribblebench <command> ...``.

Exit codes: 0 success, 1 partial failure (some cases failed or a check did
not pass), 2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import losses, metrics, overlay, phantom
from .manifest import DatasetManifest
from .scribble_gen import ScribbleConfig, check_scribble_correctness, generate_volume
from .volume_io import NiftiError, read_nifti, slice_extract, write_nifti

log = logging.getLogger("scribblebench")

EXIT_OK, EXIT_PARTIAL, EXIT_INVALID = 0, 1, 2


class InvalidInput(Exception):
    pass


def _map(fn, items, workers: int):
    """Ordered map; runs in-process for a single worker."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _resolve_config(args, manifest: DatasetManifest) -> ScribbleConfig:
    try:
        cfg = ScribbleConfig.load(args.config) if args.config else ScribbleConfig()
        overrides = dict(manifest.config)
        if manifest.slice_axis is not None:
            overrides["slice_axis"] = manifest.slice_axis
        if args.slice_axis is not None:
            overrides["slice_axis"] = args.slice_axis
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        return cfg.replace(**overrides) if overrides else cfg
    except (OSError, ValueError, TypeError) as exc:
        raise InvalidInput(f"bad config: {exc}") from exc


def _load_manifest(path) -> DatasetManifest:
    try:
        return DatasetManifest.load(path)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise InvalidInput(f"bad manifest {path}: {exc}") from exc


def _generate_case(job):
    src, dst, case, cfg_dict = job
    cfg = ScribbleConfig.from_dict(cfg_dict)
    try:
        dense = read_nifti(src)
        scribbles = generate_volume(dense, cfg, volume_id=case)
        dst.parent.mkdir(parents=True, exist_ok=True)
        write_nifti(scribbles, dst)
        written = read_nifti(dst)
        if not written.same_grid(dense):
            raise RuntimeError("written scribble grid does not match the reference")
        bad = check_scribble_correctness(written, dense)
        if bad:
            raise RuntimeError(f"{bad} scribble voxels disagree with the reference")
        stats = metrics.scribble_stats(written, dense)
    except (OSError, NiftiError, ValueError, RuntimeError) as exc:
        return case, None, f"{type(exc).__name__}: {exc}"
    return case, stats, None


def _write_stats_csv(path, dataset: str, results) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "case", "class", "annotated", "class_voxels", "fraction"])
        for case, stats in results:
            for c in sorted(stats.class_voxels):
                writer.writerow([dataset, case, c, stats.annotated[c], stats.class_voxels[c], repr(stats.fraction[c])])


def cmd_generate(args) -> int:
    manifest = _load_manifest(args.manifest)
    cfg = _resolve_config(args, manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.yaml")
    jobs = [(manifest.case_path(c), out / c, c, cfg.to_dict()) for c in manifest.cases]
    results = _map(_generate_case, jobs, args.workers)

    done, failed = [], []
    for case, stats, error in results:
        if error:
            log.error("case %s failed: %s", case, error)
            failed.append(case)
        else:
            done.append((case, stats))
    _write_stats_csv(out / "scribble_stats.csv", manifest.name, done)
    print(f"generated {len(done)}/{len(jobs)} cases into {out}")
    for case in failed:
        print(f"FAILED {case}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_phantom(args) -> int:
    try:
        spec = phantom.PhantomSpec.load(args.spec) if args.spec else phantom.default_spec()
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise InvalidInput(f"bad phantom spec: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    cases = []
    for i in range(args.cases):
        try:
            volume = phantom.render(phantom.jittered(spec, rng))
        except ValueError as exc:
            raise InvalidInput(str(exc)) from exc
        name = f"case_{i:03d}.nii.gz"
        write_nifti(volume, out / name)
        cases.append(name)
    manifest = DatasetManifest(args.name, out, cases, classes=list(spec.class_names), slice_axis=args.slice_axis)
    manifest.dump(out / "manifest.yaml")
    print(f"wrote {len(cases)} phantoms and {out / 'manifest.yaml'}")
    return EXIT_OK


def _find_prediction(pred_dir: Path, manifest: DatasetManifest, case: str, multi: bool):
    candidates = [pred_dir / manifest.name / case, pred_dir / case] if multi else [pred_dir / case, pred_dir / manifest.name / case]
    for path in candidates:
        if path.exists():
            return path
    return None


def cmd_evaluate(args) -> int:
    manifests = [_load_manifest(m) for m in args.manifest]
    pred_dir = Path(args.pred)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    multi = len(manifests) > 1

    rows, grouping, case_rows, missing = [], [], [], []
    for manifest in manifests:
        classes = list(range(len(manifest.classes)))
        for case in manifest.cases:
            pred_path = _find_prediction(pred_dir, manifest, case, multi)
            if pred_path is None:
                missing.append(f"{manifest.name}/{case}")
                log.error("missing prediction for %s/%s", manifest.name, case)
                continue
            try:
                ref = read_nifti(manifest.case_path(case))
                pred = read_nifti(pred_path)
                scores = metrics.dice_per_class(pred, ref, classes, case_id=case,
                                                include_background=args.include_background)
            except (OSError, NiftiError, ValueError) as exc:
                missing.append(f"{manifest.name}/{case}")
                log.error("could not score %s/%s: %s", manifest.name, case, exc)
                continue
            rows.append(scores)
            grouping.append(manifest.name)
            case_rows.append((manifest.name, scores))

    metrics.write_case_csv(out / "cases.csv", case_rows)
    if not rows:
        print("no cases could be scored")
        return EXIT_PARTIAL
    try:
        agg = metrics.aggregate(rows, grouping)
    except ValueError as exc:
        print(f"aggregation failed: {exc}")
        return EXIT_PARTIAL
    metrics.write_summary_csv(out / "summary.csv", agg, args.method, missing)
    table = metrics.markdown_table(OrderedDict([(args.method, agg)]))
    if missing:
        table += "\nMissing or unreadable predictions: " + ", ".join(missing) + "\n"
    (out / "summary.md").write_text(table)
    print(table, end="")
    return EXIT_PARTIAL if missing else EXIT_OK


def cmd_stats(args) -> int:
    manifest = _load_manifest(args.manifest)
    totals = {}
    failed = []
    rows = []
    for case in manifest.cases:
        try:
            dense = read_nifti(manifest.case_path(case))
            stats = metrics.scribble_stats(read_nifti(Path(args.scribbles) / case), dense)
            rows.append((case, stats))
            totals["a"] = totals.get("a", 0) + stats.total_annotated
            if args.compare:
                other = metrics.scribble_stats(read_nifti(Path(args.compare) / case), dense)
                totals["b"] = totals.get("b", 0) + other.total_annotated
        except (OSError, NiftiError, ValueError) as exc:
            log.error("case %s failed: %s", case, exc)
            failed.append(case)
    if args.out:
        _write_stats_csv(args.out, manifest.name, rows)
    print(f"annotated voxels: {totals.get('a', 0)}")
    if args.compare:
        print(f"compared set: {totals.get('b', 0)} ({metrics.relative_difference(totals.get('a', 0), totals.get('b', 0))})")
    return EXIT_PARTIAL if failed else EXIT_OK


def _parse_sizes(text: str):
    sizes = []
    for part in text.split(","):
        try:
            c, n = (int(v) for v in part.lower().split("x"))
        except ValueError as exc:
            raise InvalidInput(f"bad size {part!r}; expected CxN") from exc
        if c < 2 or n < 1:
            raise InvalidInput(f"bad size {part!r}; need C >= 2 and N >= 1")
        sizes.append((c, n))
    return sizes


def loss_check_report(seed: int, sizes, trials: int, labeled_fraction: float):
    """Worst finite-difference error per loss over random problems; None marks a degenerate run."""
    rng = np.random.default_rng(seed)
    checks = OrderedDict(
        [("pCE", losses.partial_cross_entropy), ("pDice", losses.partial_dice), ("pL", losses.partial_loss)]
    )
    worst = OrderedDict((name, 0.0) for name in checks)
    degenerate = True
    for c, n in sizes:
        for _ in range(trials):
            logits = rng.normal(size=(c, n))
            labels = rng.integers(0, c, n)
            labels[rng.random(n) >= labeled_fraction] = losses.IGNORE_INDEX
            if np.any(labels != losses.IGNORE_INDEX):
                degenerate = False
            for name, fn in checks.items():
                err = losses.finite_diff_check(fn, logits, labels, rng=rng)
                worst[name] = max(worst[name], err)
    return worst, degenerate


def cmd_loss_check(args) -> int:
    sizes = _parse_sizes(args.sizes)
    if not 0 <= args.labeled_fraction <= 1:
        raise InvalidInput("labeled fraction must lie in [0, 1]")
    worst, degenerate = loss_check_report(args.seed or 0, sizes, args.trials, args.labeled_fraction)
    failed = False
    for name, err in worst.items():
        status = "ok" if err < args.threshold else "FAIL"
        failed |= err >= args.threshold
        print(f"{name:6s} max relative error {err:.3e}  threshold {args.threshold:.1e}  {status}")
    if degenerate:
        print("no labeled voxels: all losses are 0 with zero gradient (degenerate pass)")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_overlay(args) -> int:
    try:
        dense = read_nifti(args.case)
        scribbles = read_nifti(args.scribbles)
    except (OSError, NiftiError) as exc:
        raise InvalidInput(str(exc)) from exc
    if dense.dims != scribbles.dims:
        raise InvalidInput(f"grid mismatch: {dense.dims} vs {scribbles.dims}")
    axis = 2 if args.slice_axis is None else args.slice_axis
    try:
        d = slice_extract(dense, axis, args.slice)
        s = slice_extract(scribbles, axis, args.slice)
    except IndexError as exc:
        raise InvalidInput(str(exc)) from exc
    img = overlay.render_overlay(d.data, s.data, scribbles.ignore_label)
    overlay.save_png(img, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scribblebench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, manifest=False, config=False):
        if manifest:
            p.add_argument("--manifest", required=True)
        if config:
            p.add_argument("--config")
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--slice-axis", type=int, choices=(0, 1, 2))

    p = sub.add_parser("generate", help="synthesize scribbles for every case of a manifest")
    common(p, manifest=True, config=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("phantom", help="write randomized phantom volumes and a manifest")
    common(p)
    p.add_argument("--spec", help="phantom spec YAML (default: sphere + box in 48^3)")
    p.add_argument("--cases", type=int, default=2)
    p.add_argument("--name", default="phantoms")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("evaluate", help="Dice of predictions against manifest references")
    p.add_argument("--manifest", required=True, action="append", help="repeat for several datasets")
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="method")
    p.add_argument("--include-background", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="annotated-voxel statistics of generated scribbles")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scribbles", required=True)
    p.add_argument("--compare", help="second scribble directory to compare totals against")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("loss-check", help="finite-difference verification of the partial losses")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", default="2x30,3x40,4x50,5x60")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--labeled-fraction", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=1e-5)
    p.set_defaults(func=cmd_loss_check)

    p = sub.add_parser("overlay", help="PNG of a slice with its scribbles")
    p.add_argument("--case", required=True, help="dense reference volume")
    p.add_argument("--scribbles", required=True)
    p.add_argument("--slice", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--slice-axis", type=int, choices=(0, 1, 2))
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
