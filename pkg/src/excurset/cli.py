"""Command-line entry point: analyze / simulate / render.

Configuration is flags-first; ``analyze`` optionally reads a JSON config
file, with explicit flags taking precedence over file values. Exit codes:
0 success, 2 validation error (the message names the offending field or
path), 3 inapplicable input (estimated combined set empty or full).
"""

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_quantile
from .errors import ConfigurationError, EmptyEstimateError, ExcursetError
from .excursion import CombineSpec, save_boundary_csv, segment_boundary, standardize
from .field import load_field_stack, load_mask_csv, save_mask, save_overlay_png
from .glm import DesignSpec, fit, intercept_only_design, load_contrast_csv, load_design_csv
from .regions import assert_nested, region_report, threshold_regions
from .simharness import (
    SimulationSpec,
    naive_comparison,
    run_coverage,
    write_reports_csv,
)


@dataclass(frozen=True)
class ConditionInput:
    stack: str
    design: str | None
    contrast: str | None
    threshold: float
    sign: int


@dataclass(frozen=True)
class AnalyzeConfig:
    conditions: tuple
    mode: str
    alpha: float
    boot: int
    seed: int
    eta: float | None
    out: str
    dump_boot: bool


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excurset",
        description="Simultaneous confidence regions for combined excursion sets "
        "on 2D lattices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser(
        "analyze",
        help="compute confidence regions from data stacks",
        description="Fit per-pixel linear models for each condition, combine the "
        "standardized excursion statistics, calibrate the threshold by wild "
        "t-bootstrap and write nested region masks (PNG + CSV), a boundary CSV "
        "and a JSON report. Stacks are raw little-endian float64 payloads with "
        "a JSON sidecar header (<path>.json).",
    )
    pa.add_argument("--config", help="JSON config file; explicit flags override its values")
    pa.add_argument("--stack", action="append", help="stack payload path (repeat per condition)")
    pa.add_argument("--design", action="append",
                    help="design matrix CSV, rows = observations (repeat; default intercept-only)")
    pa.add_argument("--contrast", action="append",
                    help="contrast vector CSV (repeat; default unit contrast)")
    pa.add_argument("--c", action="append", type=float, dest="threshold",
                    help="excursion threshold c_i (repeat per condition)")
    pa.add_argument("--sign", action="append", type=int, choices=(-1, 1),
                    help="exceedance direction delta_i (repeat; default +1)")
    pa.add_argument("--mode", choices=("conjunction", "disjunction"))
    pa.add_argument("--alpha", type=float, help="tolerance level (default 0.05)")
    pa.add_argument("--boot", type=int, help="bootstrap realizations B (default 5000)")
    pa.add_argument("--seed", type=int, help="bootstrap seed (default 0)")
    pa.add_argument("--eta", type=float,
                    help="active-set tolerance (default 2/sqrt(n))")
    pa.add_argument("--out", help="output directory (default excurset-out)")
    pa.add_argument("--dump-boot", action="store_true", default=None,
                    help="also write the bootstrap sample to h_tilde.csv")

    ps = sub.add_parser(
        "simulate",
        help="run a Monte Carlo coverage experiment",
        description="Reproduce the synthetic coverage experiments at desk scale. "
        "Grid values may be comma-separated; one report per grid point.",
    )
    ps.add_argument("--scenario", choices=("circles", "squares", "ramps"), default="circles")
    ps.add_argument("--snr", choices=("low", "high"), default="high")
    ps.add_argument("--sep", default=None,
                    help="center separation in px for circles/squares (comma list allowed)")
    ps.add_argument("--k", default=None,
                    help="ramp gradient multiplier (comma list allowed)")
    ps.add_argument("--n", default="100", help="observations per instance (comma list allowed)")
    ps.add_argument("--rho", type=float, default=0.0, help="between-condition noise correlation")
    ps.add_argument("--m", type=int, default=2, help="condition count")
    ps.add_argument("--instances", type=int, default=100)
    ps.add_argument("--boot", type=int, default=1000)
    ps.add_argument("--alpha", type=float, default=0.05)
    ps.add_argument("--seed", type=int, default=0, help="master seed")
    ps.add_argument("--radius", type=float, default=25.0,
                    help="circle radius / square half-width in px")
    ps.add_argument("--width", type=int, default=100)
    ps.add_argument("--height", type=int, default=100)
    ps.add_argument("--method", choices=("proposed", "naive"), default="proposed",
                    help="'naive' intersects independently calibrated single-condition regions")
    ps.add_argument("--workers", type=int, default=1)
    ps.add_argument("--out", help="write report(s) as JSON")
    ps.add_argument("--csv", help="write one CSV row per grid point")

    pr = sub.add_parser(
        "render",
        help="render mask CSVs as an overlay PNG",
        description="Combine upper/point/lower mask CSVs into a palette overlay "
        "(lower blue, point yellow, upper red).",
    )
    pr.add_argument("--upper", required=True)
    pr.add_argument("--point", required=True)
    pr.add_argument("--lower", required=True)
    pr.add_argument("--out", required=True)
    return parser


def _load_analyze_config(args) -> AnalyzeConfig:
    file_cfg = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        file_cfg = json.loads(path.read_text())

    def pick(flag, key, default):
        return flag if flag is not None else file_cfg.get(key, default)

    if args.stack:
        m = len(args.stack)

        def padded(values, key, fill):
            values = values or []
            if len(values) > m:
                raise ConfigurationError(f"more --{key} values than --stack values")
            return list(values) + [fill] * (m - len(values))

        thresholds = args.threshold or []
        if len(thresholds) != m:
            raise ConfigurationError(
                f"field c: need one --c per condition ({m} stacks, {len(thresholds)} thresholds)"
            )
        conditions = tuple(
            ConditionInput(stack=s, design=d, contrast=l, threshold=c, sign=g)
            for s, d, l, c, g in zip(
                args.stack,
                padded(args.design, "design", None),
                padded(args.contrast, "contrast", None),
                thresholds,
                padded(args.sign, "sign", 1),
            )
        )
    else:
        raw = file_cfg.get("conditions", [])
        if not raw:
            raise ConfigurationError("field conditions: no conditions configured")
        conditions = tuple(
            ConditionInput(
                stack=entry["stack"],
                design=entry.get("design"),
                contrast=entry.get("contrast"),
                threshold=float(entry["threshold"]),
                sign=int(entry.get("sign", 1)),
            )
            for entry in raw
        )
    return AnalyzeConfig(
        conditions=conditions,
        mode=pick(args.mode, "mode", "conjunction"),
        alpha=float(pick(args.alpha, "alpha", 0.05)),
        boot=int(pick(args.boot, "boot", 5000)),
        seed=int(pick(args.seed, "seed", 0)),
        eta=pick(args.eta, "eta", None),
        out=pick(args.out, "out", "excurset-out"),
        dump_boot=bool(pick(args.dump_boot, "dump_boot", False)),
    )


def _condition_design(cond: ConditionInput, n: int) -> DesignSpec:
    if cond.design is None and cond.contrast is None:
        return intercept_only_design(n)
    if cond.design is not None:
        X = load_design_csv(cond.design)
    else:
        X = np.ones((n, 1))
    if cond.contrast is not None:
        L = load_contrast_csv(cond.contrast)
    else:
        if X.shape[1] != 1:
            raise ConfigurationError(
                f"field contrast: required for multi-column design {cond.design}"
            )
        L = np.array([1.0])
    if X.shape[0] != n:
        raise ConfigurationError(
            f"field design: {cond.design} has {X.shape[0]} rows, stack has n={n}"
        )
    return DesignSpec(X=X, L=L)


def cmd_analyze(args) -> int:
    cfg = _load_analyze_config(args)
    t0 = time.perf_counter()

    stacks = [load_field_stack(c.stack) for c in cfg.conditions]
    lattice = stacks[0].lattice
    for c, st in zip(cfg.conditions, stacks):
        if st.lattice != lattice:
            raise ConfigurationError(
                f"field stack: {c.stack} is {st.lattice.width}x{st.lattice.height}, "
                f"expected {lattice.width}x{lattice.height}"
            )
    fits = [fit(st, _condition_design(c, st.n)) for c, st in zip(cfg.conditions, stacks)]

    spec = CombineSpec(
        thresholds=[c.threshold for c in cfg.conditions],
        signs=[c.sign for c in cfg.conditions],
        mode=cfg.mode,
    )
    fields = standardize(fits, spec)
    seg = segment_boundary(fields, eta=cfg.eta)
    qr = bootstrap_quantile(
        [f.residuals for f in fits],
        seg,
        spec.effective_signs(),
        BootstrapConfig(cfg.boot, cfg.alpha, cfg.seed),
    )
    regions = threshold_regions(fields, qr.a, spec, alpha=cfg.alpha)
    assert_nested(regions)
    elapsed = time.perf_counter() - t0

    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, mask in (("upper", regions.upper), ("point", regions.point), ("lower", regions.lower)):
        save_mask(outdir / f"{name}.png", mask)
        save_mask(outdir / f"{name}.csv", mask)
    save_overlay_png(outdir / "overlay.png", regions.upper, regions.point, regions.lower)
    save_boundary_csv(outdir / "boundary.csv", seg)
    if cfg.dump_boot:
        np.savetxt(outdir / "h_tilde.csv", qr.h_tilde, delimiter=",", header="h_tilde", comments="")

    report = region_report(
        regions,
        extra={
            "boundary_points": len(seg.points),
            "eta": seg.eta,
            "thresholds": [c.threshold for c in cfg.conditions],
            "B": cfg.boot,
            "seed": cfg.seed,
            "n": stacks[0].n,
            "lattice": {"width": lattice.width, "height": lattice.height},
            "quantile_index": qr.index,
        },
    )
    payload = {
        "report": report,
        "inputs": {"conditions": [c.stack for c in cfg.conditions]},
        "timing": {"seconds": elapsed},
    }
    (outdir / "report.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    counts = regions.pixel_counts()
    print(
        f"a={qr.a:.6g} boundary_points={len(seg.points)} "
        f"upper={counts['upper']} point={counts['point']} lower={counts['lower']} "
        f"-> {outdir}"
    )
    return 0


def _float_list(text) -> list:
    return [float(tok) for tok in str(text).split(",") if tok != ""]


def _int_list(text) -> list:
    return [int(tok) for tok in str(text).split(",") if tok != ""]


def cmd_simulate(args) -> int:
    if args.scenario == "ramps":
        geometries = _float_list(args.k if args.k is not None else "1.0")
    else:
        geometries = _float_list(args.sep if args.sep is not None else "20")
    reports = []
    for n in _int_list(args.n):
        for geom in geometries:
            spec = SimulationSpec(
                scenario=args.scenario,
                snr=args.snr,
                n=n,
                geometry=geom,
                instances=args.instances,
                boot=BootstrapConfig(args.boot, args.alpha, args.seed),
                M=args.m,
                noise_rho=args.rho,
                width=args.width,
                height=args.height,
                shape_radius=args.radius,
            )
            runner = naive_comparison if args.method == "naive" else run_coverage
            rep = runner(spec, workers=args.workers)
            reports.append(rep)
            print(
                f"{args.scenario} snr={args.snr} n={n} geometry={geom:g} "
                f"method={rep.method}: coverage={rep.coverage:.4f} "
                f"[{rep.ci_low:.4f}, {rep.ci_high:.4f}] mean_a={rep.mean_a:.4f} "
                f"({rep.covered}/{rep.instances - rep.empty_estimates} covered, "
                f"{rep.empty_estimates} empty, {rep.runtime['total_s']:.1f}s)"
            )
    if args.out:
        data = [r.to_dict() for r in reports]
        payload = data[0] if len(data) == 1 else data
        Path(args.out).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    if args.csv:
        write_reports_csv(args.csv, reports)
    return 0


def cmd_render(args) -> int:
    upper = load_mask_csv(args.upper)
    point = load_mask_csv(args.point)
    lower = load_mask_csv(args.lower)
    if upper.shape != point.shape or point.shape != lower.shape:
        raise ConfigurationError("field mask: the three mask CSVs have different shapes")
    save_overlay_png(args.out, upper, point, lower)
    print(f"overlay written to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_render(args)
    except EmptyEstimateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ExcursetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
