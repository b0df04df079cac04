"""Command-line front end: predict, solve, phase, verify.

Every command reads a JSON potential config, resolves a complex window, and
writes its outputs atomically next to a run manifest.  Data files are byte
reproducible: reruns with the same config and options produce identical
bytes, and only the manifest carries a timestamp.

Exit codes: 0 ok, 1 verification failure, 2 bad config or usage, 3 internal
inconsistency (polygon vs closed forms), 4 overflow guard, 5 search left
uncertified boxes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .asymptotics import (
    k_range_for_window,
    three_delta_equal_strings,
    three_delta_gammas,
    two_delta_string,
)
from .errors import ConfigError, NoConvergence, OverflowGuard, ReslabError
from .polygon import build_polygon, gamma_candidates
from .potential import PotentialConfig, load_config
from .rootfind import (
    SearchOptions,
    Window,
    classify_strings,
    find_resonances,
)
from .secular import check_overflow_guard, evaluate_dets, expand_terms, exponent_points

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_INCONSISTENT = 3
EXIT_OVERFLOW = 4
EXIT_UNCERTIFIED = 5

# predict: closed forms and polygon must name the same rates
AGREEMENT_TOL = 1e-9

MAX_GRID = 4096


# ---------------------------------------------------------------------------
# plumbing


@dataclass
class RunManifest:
    config_sha256: str
    command: list[str]
    options: dict
    version: str
    timestamp: str
    outputs: list[str] = field(default_factory=list)

    def write(self, path: str) -> None:
        payload = {
            "config_sha256": self.config_sha256,
            "command": self.command,
            "options": self.options,
            "version": self.version,
            "timestamp": self.timestamp,
            "outputs": self.outputs,
        }
        _write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_atomic(path: str, data) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = os.path.abspath(path)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".reslab-")
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _fmt(x: float) -> str:
    """Shortest round-trip decimal; the reproducibility contract for CSV."""
    return repr(float(x))


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("RESLAB_THREADS", "").strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"RESLAB_THREADS is not an integer: {env!r}")
    return 0


def _window_from_args(config: PotentialConfig, values) -> Window:
    if values is None:
        h = config.h
        return Window(1.0 - 3 * h, 1.0 + 3 * h, -3 * h, 0.0)
    re_min, re_max, im_min, im_max = values
    return Window(re_min, re_max, im_min, im_max)


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        w_str, h_str = text.lower().split("x")
        w, h = int(w_str), int(h_str)
    except ValueError:
        raise ConfigError(f"--grid expects WxH, got {text!r}")
    if not (1 <= w <= MAX_GRID and 1 <= h <= MAX_GRID):
        raise ConfigError(f"grid {w}x{h} outside 1..{MAX_GRID}")
    return w, h


def _stem(out: str | None, default: str) -> str:
    if out is None:
        return default
    root, ext = os.path.splitext(out)
    return root if ext in {".json", ".csv", ".pgm"} else out


def _manifest_for(args, config_path: str, options: dict) -> RunManifest:
    return RunManifest(
        config_sha256=_sha256_file(config_path),
        command=list(sys.argv),
        options=options,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


# ---------------------------------------------------------------------------
# predict


def _closed_form_summary(config: PotentialConfig, window: Window):
    """Closed-form gamma set and string metadata for N=2/3, else None."""
    if config.n == 2:
        ell = config.lengths[0]
        b1, b2 = config.betas()
        gamma = (b1 + b2) / (2.0 * ell)
        return {
            "kind": "two_delta",
            "gammas": [gamma],
            "case_id": None,
            "spacing": math.pi * config.h / ell,
        }
    if config.n == 3:
        g = three_delta_gammas(config)
        return {
            "kind": "three_delta",
            "gammas": sorted(g.as_set()),
            "case_id": g.case_id,
            "gamma_plus": g.gamma_plus,
            "gamma_minus": g.gamma_minus,
        }
    return None


def _prediction_payload(config: PotentialConfig, window: Window) -> tuple[dict, float]:
    expansion = expand_terms(config)
    points = exponent_points(expansion, config)
    polygon = build_polygon(points)
    candidates = gamma_candidates(polygon)
    poly_gammas = sorted(c.gamma for c in candidates)

    closed = _closed_form_summary(config, window)
    max_gap = 0.0
    if closed is not None:
        closed_set = sorted(set(closed["gammas"]))
        poly_set = sorted(set(poly_gammas))
        if len(closed_set) != len(poly_set):
            max_gap = math.inf
        else:
            max_gap = max(
                (abs(a - b) for a, b in zip(closed_set, poly_set)), default=0.0
            )

    payload = {
        "n_poles": config.n,
        "h": config.h,
        "polygon": polygon.to_dict(),
        "gamma_candidates": poly_gammas,
        "candidate_bound": 2 ** (config.n - 1) - 1,
        "closed_form": closed,
        "agreement": {
            "checked": closed is not None,
            "max_gap": None if closed is None else max_gap,
            "tol": AGREEMENT_TOL,
        },
    }
    return payload, max_gap


def cmd_predict(args) -> int:
    config = load_config(args.config)
    window = _window_from_args(config, args.window)
    payload, max_gap = _prediction_payload(config, window)

    stem = _stem(args.out, "reslab_predict")
    out_json = stem + ".json"
    _write_atomic(out_json, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    manifest = _manifest_for(args, args.config, _options_dict(args))
    manifest.outputs.append(out_json)
    manifest.write(stem + ".manifest.json")

    print(f"poles: {config.n}  h: {config.h}")
    print(f"gamma candidates ({len(payload['gamma_candidates'])}, "
          f"bound {payload['candidate_bound']}): "
          + ", ".join(_fmt(g) for g in payload["gamma_candidates"]))
    if payload["closed_form"] is not None:
        closed = payload["closed_form"]
        case = f"  case_id: {closed['case_id']}" if closed["case_id"] else ""
        print("closed form: " + ", ".join(_fmt(g) for g in closed["gammas"]) + case)
        if max_gap > AGREEMENT_TOL:
            print(
                f"WARNING: polygon and closed-form gammas disagree by {max_gap:.3e}",
                file=sys.stderr,
            )
            return EXIT_INCONSISTENT
    print(f"wrote {out_json}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def _solve_csv(rows, report) -> str:
    lines = ["k_index,re,im,residual,gamma_est,cluster_id"]
    for i, row in enumerate(rows):
        k = "" if row["k_index"] is None else str(row["k_index"])
        lines.append(
            f"{k},{_fmt(row['re'])},{_fmt(row['im'])},{_fmt(row['residual'])},"
            f"{_fmt(row['gamma_est'])},{report.cluster_of(i)}"
        )
    return "\n".join(lines) + "\n"


def _run_solve(config: PotentialConfig, window: Window, args):
    opts = SearchOptions(max_depth=args.max_depth, threads=_resolve_threads(args.threads))
    result = find_resonances(config, window, opts)

    expansion = expand_terms(config)
    polygon = build_polygon(exponent_points(expansion, config))
    candidates = gamma_candidates(polygon)
    report = (
        classify_strings(result, candidates, config, gamma_tol=args.gamma_tol)
        if result.resonances
        else None
    )
    return result, candidates, report


def cmd_solve(args) -> int:
    config = load_config(args.config)
    window = _window_from_args(config, args.window)
    result, candidates, report = _run_solve(config, window, args)

    rows = result.to_rows(config)
    payload = {
        "window": {
            "re_min": window.re_min,
            "re_max": window.re_max,
            "im_min": window.im_min,
            "im_max": window.im_max,
        },
        "total_winding": result.total_winding,
        "resonances": [
            dict(row, cluster_id=report.cluster_of(i)) for i, row in enumerate(rows)
        ]
        if report
        else [],
        "clusters": report.to_dict() if report else None,
        "uncertified": [
            {
                "re_min": u.window.re_min,
                "re_max": u.window.re_max,
                "im_min": u.window.im_min,
                "im_max": u.window.im_max,
                "winding": u.winding,
                "reason": u.reason,
            }
            for u in result.uncertified
        ],
    }

    stem = _stem(args.out, "reslab_solve")
    out_csv, out_json = stem + ".csv", stem + ".json"
    _write_atomic(out_csv, _solve_csv(rows, report) if report else
                  "k_index,re,im,residual,gamma_est,cluster_id\n")
    _write_atomic(out_json, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    manifest = _manifest_for(args, args.config, _options_dict(args))
    manifest.outputs.extend([out_csv, out_json])
    manifest.write(stem + ".manifest.json")

    print(f"found {len(result.resonances)} resonances, total winding {result.total_winding}")
    if report:
        for c in report.clusters:
            flag = "  FLAGGED" if c.flagged else ""
            print(
                f"cluster gamma={_fmt(c.gamma)}: count={c.count} "
                f"mean_gamma_est={_fmt(c.mean_gamma_est)} im_mean={_fmt(c.im_mean)} "
                f"im_spread={_fmt(c.im_spread)}{flag}"
            )
    print(f"wrote {out_csv}, {out_json}")
    if result.uncertified:
        print(f"{len(result.uncertified)} box(es) left uncertified", file=sys.stderr)
        return EXIT_UNCERTIFIED
    return EXIT_OK


# ---------------------------------------------------------------------------
# phase


def _phase_grid(config: PotentialConfig, window: Window, w: int, h: int) -> np.ndarray:
    """arg of the cleared determinant at pixel centers, row-major, top = im_max."""
    check_overflow_guard(config, window.im_min)
    res = window.re_min + (np.arange(w) + 0.5) * (window.re_max - window.re_min) / w
    ims = window.im_max - (np.arange(h) + 0.5) * (window.im_max - window.im_min) / h
    out = np.empty((h, w), dtype=float)
    # row-chunked evaluation: keeps peak memory flat on large grids
    for i in range(h):
        out[i] = evaluate_dets(config, res + 1j * ims[i]).arg
    return out


def _phase_pgm(args_grid: np.ndarray) -> bytes:
    h, w = args_grid.shape
    # (-pi, pi] -> 0..255; arg = pi lands on 255 exactly
    scaled = np.floor((args_grid + math.pi) / (2.0 * math.pi) * 256.0)
    pixels = np.clip(scaled, 0, 255).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def _phase_csv(config, window, w, h, args_grid: np.ndarray) -> str:
    res = window.re_min + (np.arange(w) + 0.5) * (window.re_max - window.re_min) / w
    ims = window.im_max - (np.arange(h) + 0.5) * (window.im_max - window.im_min) / h
    lines = ["re,im,arg"]
    for i in range(h):
        for j in range(w):
            lines.append(f"{_fmt(res[j])},{_fmt(ims[i])},{_fmt(args_grid[i, j])}")
    return "\n".join(lines) + "\n"


def cmd_phase(args) -> int:
    config = load_config(args.config)
    window = _window_from_args(config, args.window)
    window.validate()
    w, h = _parse_grid(args.grid)
    fmt = args.format or "pgm"
    if fmt not in {"pgm", "csv"}:
        raise ConfigError(f"phase format must be pgm or csv, got {fmt!r}")

    grid = _phase_grid(config, window, w, h)
    stem = _stem(args.out, "reslab_phase")
    if fmt == "pgm":
        out_path = stem + ".pgm"
        _write_atomic(out_path, _phase_pgm(grid))
    else:
        out_path = stem + ".csv"
        _write_atomic(out_path, _phase_csv(config, window, w, h, grid))
    manifest = _manifest_for(args, args.config, _options_dict(args))
    manifest.outputs.append(out_path)
    manifest.write(stem + ".manifest.json")
    print(f"wrote {out_path} ({w}x{h})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _per_k_predictions(config: PotentialConfig, window: Window):
    """In-window closed-form roots for N=2 and equal-spacing N=3, else None."""
    try:
        if config.n == 2:
            pred = two_delta_string(
                config, k_range_for_window(config, window.re_min, window.re_max)
            )
            per_k = list(pred.per_k)
        elif config.n == 3:
            l1, l2 = config.lengths
            if abs(l1 - l2) > 1e-12 * l1:
                return None
            plus, minus = three_delta_equal_strings(
                config, k_range_for_window(config, window.re_min, window.re_max)
            )
            per_k = list(plus.per_k) + list(minus.per_k)
        else:
            return None
    except (NoConvergence, ValueError):
        return None
    return [
        p
        for p in per_k
        if window.re_min <= p.z_pred.real <= window.re_max
        and window.im_min <= p.z_pred.imag <= window.im_max
    ]


def _match_one_to_one(roots, preds, tol: float):
    """Greedy nearest matching; fine because separations far exceed tol."""
    if len(roots) != len(preds):
        return False, math.inf
    free = set(range(len(preds)))
    worst = 0.0
    for r in roots:
        if not free:
            return False, math.inf
        i = min(free, key=lambda i: abs(preds[i] - r))
        free.discard(i)
        worst = max(worst, abs(preds[i] - r))
    return worst <= tol, worst


def cmd_verify(args) -> int:
    config = load_config(args.config)
    window = _window_from_args(config, args.window)
    checks: list[dict] = []

    def check(name: str, ok: bool, detail: str) -> None:
        checks.append({"name": name, "pass": bool(ok), "detail": detail})

    payload, max_gap = _prediction_payload(config, window)
    closed = payload["closed_form"]
    if closed is not None:
        check(
            "predict_consistency",
            max_gap <= AGREEMENT_TOL,
            f"polygon vs closed-form gamma gap {max_gap:.3e}",
        )

    result, candidates, report = _run_solve(config, window, args)
    check(
        "certification",
        not result.uncertified
        and all(r.winding_cert == 1 and r.residual <= 1e-8 for r in result.resonances),
        f"{len(result.uncertified)} uncertified box(es), "
        f"max residual {max((r.residual for r in result.resonances), default=0.0):.3e}",
    )
    check(
        "winding_total",
        result.total_winding == len(result.resonances),
        f"winding {result.total_winding} vs {len(result.resonances)} roots",
    )

    preds = _per_k_predictions(config, window)
    if preds is not None:
        ok, worst = _match_one_to_one(
            [r.z for r in result.resonances], [p.z_pred for p in preds], 1e-8
        )
        check(
            "per_k_match",
            ok,
            f"{len(result.resonances)} roots vs {len(preds)} predictions, "
            f"worst |dz| {worst:.3e}",
        )

    if report is not None:
        bad = [c for c in report.clusters if c.count and c.flagged]
        empty = [c for c in report.clusters if not c.count]
        check(
            "cluster_candidates",
            not bad and not empty,
            f"{len(report.clusters)} candidate(s): "
            f"{len(empty)} without members, {len(bad)} flagged",
        )

    case1_note = None
    if config.n == 3 and closed is not None and closed.get("case_id") == 1:
        gamma = closed["gammas"][0]
        level = -gamma * config.h * math.log(1.0 / config.h)
        case1_note = {
            "theorem_level": level,
            "reported_level": -3e-7,
            "discrepancy": True,
            "note": (
                "single-string level from the rate formula is "
                f"{level:.4e}; a published figure for this configuration "
                "quotes -3e-7, which is inconsistent with that formula"
            ),
        }
        print(
            f"case-1 note: theorem-level Im {level:.4e} vs reported -3.0e-07 "
            "(discrepancy flagged)"
        )

    all_pass = all(c["pass"] for c in checks)
    report_payload = {
        "config": config.as_dict(),
        "window": {
            "re_min": window.re_min,
            "re_max": window.re_max,
            "im_min": window.im_min,
            "im_max": window.im_max,
        },
        "checks": checks,
        "clusters": report.to_dict() if report else None,
        "case1_note": case1_note,
        "all_pass": all_pass,
    }
    stem = _stem(args.out, "reslab_verify")
    out_json = stem + ".json"
    _write_atomic(out_json, json.dumps(report_payload, indent=2, sort_keys=True) + "\n")
    manifest = _manifest_for(args, args.config, _options_dict(args))
    manifest.outputs.append(out_json)
    manifest.write(stem + ".manifest.json")

    for c in checks:
        print(f"[{'PASS' if c['pass'] else 'FAIL'}] {c['name']}: {c['detail']}")
    print(f"wrote {out_json}")
    return EXIT_OK if all_pass else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------
# argument plumbing


def _options_dict(args) -> dict:
    opts = {}
    for key in ("config", "window", "grid", "out", "format", "gamma_tol", "max_depth"):
        if hasattr(args, key):
            opts[key] = getattr(args, key)
    if hasattr(args, "threads"):
        opts["threads"] = _resolve_threads(args.threads)
    return opts


def _add_common(p: argparse.ArgumentParser, *, grid: bool = False, fmt: bool = False):
    p.add_argument("--config", required=True, help="JSON potential config")
    p.add_argument(
        "--window",
        nargs=4,
        type=float,
        metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"),
        help="search window; default Re in [1-3h, 1+3h], Im in [-3h, 0]",
    )
    p.add_argument("--out", help="output path stem (extension added per format)")
    p.add_argument("--gamma-tol", type=float, default=0.05, dest="gamma_tol")
    p.add_argument("--max-depth", type=int, default=40, dest="max_depth")
    p.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads; 0 = auto; falls back to RESLAB_THREADS",
    )
    if grid:
        p.add_argument("--grid", default="600x300", help="WxH sample grid")
    if fmt:
        p.add_argument("--format", choices=["csv", "json", "pgm"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reslab",
        description="Resonances of a semiclassical Schrodinger operator "
        "with point scatterers of h-dependent strength.",
    )
    parser.add_argument("--version", action="version", version=f"reslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="gamma candidates from the exponent polygon")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("solve", help="find and classify resonances in a window")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("phase", help="phase portrait of the cleared determinant")
    _add_common(p, grid=True, fmt=True)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("verify", help="cross-check numerics against predictions")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OverflowGuard as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReslabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
