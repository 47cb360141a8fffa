"""Command line front end: simulate, scan, and normalform subcommands.

Each subcommand reads a strict JSON config (unknown keys are rejected) and
writes its artifacts into --out. Runs are deterministic for a fixed config
and seed; manifests carry the resolved parameters and never a timestamp, so
repeating a run reproduces every output byte for byte.

Exit codes: 0 success, 2 bad configuration, 3 integration failure,
4 resonance failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .errors import ConfigError, IntegrationError, ResonanceError
from .fileio import atomic_write, fmt
from .integrators import EvolutionConfig, SplittingScheme, evolve, write_trajectory_csv
from .models import FilterKind, PdeModel, load_model_json
from .normalform import (
    HomologicalSolution,
    JIndexClass,
    SparsePolynomial,
    homological_solve,
    jclass,
    load_polynomial_json,
    save_polynomial_json,
    verify_conjugacy,
)
from .resonance import min_divisor, resonance_scan, resonant_measure, write_scan_csv
from .state import SpectralState, project, sobolev_norm
from .state import save_state_binary, save_state_csv, load_state_csv

_DEFAULT_OUT = "hamsplit_out"
_DEFAULT_ETA_EXTRA = 0.25  # rounding threshold defaults to epsilon**(order + 1/4)


def _load_config(path: str, allowed: set) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _need(doc: dict, key: str):
    if key not in doc:
        raise ConfigError(f"config is missing required key '{key}'")
    return doc[key]


def _as_float(value, key: str, positive: bool = False) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{key}' must be a number, got {value!r}") from exc
    if not math.isfinite(out):
        raise ConfigError(f"'{key}' must be finite")
    if positive and out <= 0:
        raise ConfigError(f"'{key}' must be positive, got {out}")
    return out


def _as_int(value, key: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"'{key}' must be at least {minimum}, got {value}")
    return value


def _resolve_model(doc: dict, config_path: str) -> tuple:
    """Load the model from an inline descriptor or a path next to the config."""
    source = _need(doc, "model")
    if isinstance(source, str):
        path = source
        if not os.path.isabs(path):
            path = os.path.join(os.path.dirname(os.path.abspath(config_path)), path)
        try:
            model = load_model_json(path)
        except OSError as exc:
            raise ConfigError(f"cannot read model descriptor {source}: {exc}") from exc
        return model, source
    if isinstance(source, dict):
        return load_model_json(source), source
    raise ConfigError("'model' must be an inline object or a path string")


def _parse_mode(raw, dim: int, key: str):
    if dim == 1 and isinstance(raw, int) and not isinstance(raw, bool):
        return raw
    if isinstance(raw, list) and len(raw) == dim:
        comps = tuple(_as_int(c, key) for c in raw)
        return comps[0] if dim == 1 else comps
    raise ConfigError(f"'{key}' entries must be modes with {dim} components, got {raw!r}")


def _parse_scheme(raw) -> SplittingScheme:
    if raw is None:
        return SplittingScheme()
    if isinstance(raw, str):
        raw = {"composition": raw}
    if not isinstance(raw, dict):
        raise ConfigError("'scheme' must be a name or an object")
    unknown = set(raw) - {"composition", "rounding", "mollified"}
    if unknown:
        raise ConfigError(f"unknown scheme keys: {sorted(unknown)}")
    try:
        return SplittingScheme(
            composition=raw.get("composition", "lie"),
            rounding=bool(raw.get("rounding", False)),
            mollified=bool(raw.get("mollified", False)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _profile_state(model: PdeModel, epsilon: float, decay: float, s: float, rng) -> SpectralState:
    """Random-phase profile with geometric decay in the weight, scaled to size epsilon."""
    lattice = model.lattice
    magnitudes = decay ** (lattice.weights - 1.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=lattice.shape)
    state = SpectralState(lattice, magnitudes * np.exp(1j * phases))
    norm = sobolev_norm(state, s)
    state.coeffs *= epsilon / norm
    return state


def _build_initial(doc, model: PdeModel, s: float, eta0: float, rng, config_path: str):
    if not isinstance(doc, dict):
        raise ConfigError("'initial' must be an object")
    kind = doc.get("type")
    if kind == "profile":
        unknown = set(doc) - {"type", "epsilon", "decay"}
        if unknown:
            raise ConfigError(f"unknown initial-data keys: {sorted(unknown)}")
        epsilon = _as_float(_need(doc, "epsilon"), "initial.epsilon", positive=True)
        decay = _as_float(doc.get("decay", 0.7), "initial.decay", positive=True)
        if decay >= 1.0:
            raise ConfigError("'initial.decay' must be below 1")
        state = _profile_state(model, epsilon, decay, s, rng)
        state, zeroed = project(state, eta0, s)
        resolved = {"type": "profile", "epsilon": epsilon, "decay": decay, "eta0": eta0}
        return state, resolved, zeroed
    if kind == "modes":
        unknown = set(doc) - {"type", "values"}
        if unknown:
            raise ConfigError(f"unknown initial-data keys: {sorted(unknown)}")
        values = _need(doc, "values")
        dim = model.lattice.dim
        amplitudes = {}
        for entry in values:
            if not isinstance(entry, list) or len(entry) != dim + 2:
                raise ConfigError(
                    f"initial mode entries need {dim} components plus re and im, got {entry!r}"
                )
            mode = _parse_mode(entry[0] if dim == 1 else entry[:dim], dim, "initial.values")
            amplitudes[mode] = complex(
                _as_float(entry[-2], "initial.values.re"),
                _as_float(entry[-1], "initial.values.im"),
            )
        try:
            state = SpectralState.from_modes(model.lattice, amplitudes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return state, {"type": "modes", "values": values}, 0
    if kind == "state":
        unknown = set(doc) - {"type", "path"}
        if unknown:
            raise ConfigError(f"unknown initial-data keys: {sorted(unknown)}")
        path = _need(doc, "path")
        resolved_path = path
        if not os.path.isabs(resolved_path):
            resolved_path = os.path.join(
                os.path.dirname(os.path.abspath(config_path)), resolved_path
            )
        try:
            state = load_state_csv(resolved_path, model.lattice)
        except OSError as exc:
            raise ConfigError(f"cannot read initial state {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return state, {"type": "state", "path": path}, 0
    raise ConfigError("'initial.type' must be 'profile', 'modes', or 'state'")


def _write_json(path: str, payload: dict) -> None:
    with atomic_write(path) as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _svg_line_chart(xs, ys, title: str, path: str) -> None:
    """Minimal self-contained line chart; no plotting dependency needed."""
    width, height, margin = 640, 360, 50
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    px = margin + (xs - x0) / (x1 - x0) * (width - 2 * margin)
    py = height - margin - (ys - y0) / (y1 - y0) * (height - 2 * margin)
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
    with atomic_write(path) as handle:
        handle.write(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n'
            f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" '
            f'font-family="monospace" font-size="14">{title}</text>\n'
            f'<polyline points="{points}" fill="none" stroke="black" stroke-width="1"/>\n'
            f'<text x="{margin}" y="{height - 10}" font-family="monospace" '
            f'font-size="11">x: {fmt(x0)} .. {fmt(x1)}</text>\n'
            f'<text x="{margin}" y="{margin - 10}" font-family="monospace" '
            f'font-size="11">y: {fmt(y0)} .. {fmt(y1)}</text>\n'
            "</svg>\n"
        )


_SIMULATE_KEYS = {
    "model",
    "h",
    "n_steps",
    "scheme",
    "s",
    "order",
    "eta",
    "split_n",
    "cadence",
    "track_modes",
    "track_action_deviation",
    "initial",
    "plots",
}


def run_simulate(args) -> int:
    doc = _load_config(args.config, _SIMULATE_KEYS)
    model, model_source = _resolve_model(doc, args.config)
    h = _as_float(_need(doc, "h"), "h", positive=True)
    n_steps = _as_int(_need(doc, "n_steps"), "n_steps", minimum=0)
    scheme = _parse_scheme(doc.get("scheme"))
    if scheme.mollified and model.filter_kind is FilterKind.NONE:
        raise ConfigError("mollified composition needs a model with a filter")
    s = _as_float(doc.get("s", 1.0), "s")
    order = _as_int(doc.get("order", 3), "order", minimum=1)
    initial_doc = _need(doc, "initial")
    epsilon = None
    if isinstance(initial_doc, dict) and initial_doc.get("type") == "profile":
        epsilon = _as_float(_need(initial_doc, "epsilon"), "initial.epsilon", positive=True)
    if "eta" in doc:
        eta = _as_float(doc["eta"], "eta")
        if eta < 0:
            raise ConfigError("'eta' must be nonnegative")
    elif scheme.rounding or epsilon is not None:
        if epsilon is None:
            raise ConfigError("rounding needs an explicit 'eta' unless the initial data sets a size")
        eta = epsilon ** (order + _DEFAULT_ETA_EXTRA)
    else:
        eta = 0.0
    split_n = _as_float(doc.get("split_n", 1.0), "split_n")
    if split_n < 1:
        raise ConfigError("'split_n' must be at least 1")
    cadence = doc.get("cadence", max(1, n_steps // 1000))
    cadence = _as_int(cadence, "cadence", minimum=1)
    tracked = tuple(
        _parse_mode(raw, model.lattice.dim, "track_modes") for raw in doc.get("track_modes", [])
    )
    track_dev = bool(doc.get("track_action_deviation", False))
    plots = bool(doc.get("plots", False))

    rng = np.random.default_rng(args.seed)
    state0, initial_resolved, prep_zeroed = _build_initial(
        initial_doc, model, s, eta, rng, args.config
    )
    norm_s0 = sobolev_norm(state0, s)
    norm_2s0 = sobolev_norm(state0, 2.0 * s)

    config = EvolutionConfig(
        h=h,
        n_steps=n_steps,
        scheme=scheme,
        eta=eta if scheme.rounding else 0.0,
        s=s,
        split_n=split_n,
        cadence=cadence,
        tracked=tracked,
        track_action_deviation=track_dev,
    )
    record = evolve(model, state0, config)

    os.makedirs(args.out, exist_ok=True)
    trajectory_path = os.path.join(args.out, "trajectory.csv")
    write_trajectory_csv(record, trajectory_path)
    save_state_csv(record.final_state, os.path.join(args.out, "final_state.csv"))
    save_state_binary(record.final_state, os.path.join(args.out, "final_state.bin"))
    outputs = ["trajectory.csv", "final_state.csv", "final_state.bin", "manifest.json"]
    if plots:
        steps = [sample.step for sample in record.samples]
        _svg_line_chart(
            steps,
            [sample.norm_s for sample in record.samples],
            f"norm (s={fmt(s)}) per step",
            os.path.join(args.out, "norm_s.svg"),
        )
        outputs.append("norm_s.svg")
        if track_dev:
            _svg_line_chart(
                steps,
                [sample.action_dev for sample in record.samples],
                "action deviation per step",
                os.path.join(args.out, "action_dev.svg"),
            )
            outputs.append("action_dev.svg")

    final = record.samples[-1]
    manifest = {
        "command": "simulate",
        "seed": args.seed,
        "model": model_source,
        "resolved": {
            "h": h,
            "n_steps": n_steps,
            "scheme": {
                "composition": scheme.composition,
                "rounding": scheme.rounding,
                "mollified": scheme.mollified,
            },
            "s": s,
            "order": order,
            "eta": eta,
            "split_n": split_n,
            "cadence": cadence,
            "track_modes": [list(m) if isinstance(m, tuple) else m for m in tracked],
            "track_action_deviation": track_dev,
            "initial": initial_resolved,
        },
        "initial_norm_s": norm_s0,
        "initial_norm_2s": norm_2s0,
        "initial_zeroed": prep_zeroed,
        "final_norm_s": final.norm_s,
        "final_h0_energy": final.h0_energy,
        "total_zeroed": record.total_zeroed,
        "outputs": sorted(outputs),
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    print(f"simulate: {n_steps} steps of h={fmt(h)} ({scheme.composition}"
          f"{', rounded' if scheme.rounding else ''})")
    print(f"  initial norm_s={fmt(norm_s0)}  final norm_s={fmt(final.norm_s)}")
    print(f"  coefficients zeroed: {record.total_zeroed}")
    print(f"  wrote {args.out}/trajectory.csv and manifest")
    return 0


_SCAN_KEYS = {
    "model",
    "r",
    "ncap",
    "gamma_star",
    "alpha_star",
    "h_grid",
    "measure",
    "report_h",
}


def run_scan(args) -> int:
    doc = _load_config(args.config, _SCAN_KEYS)
    model, model_source = _resolve_model(doc, args.config)
    r = _as_int(doc.get("r", 3), "r", minimum=2)
    ncap = _as_float(_need(doc, "ncap"), "ncap", positive=True)
    gamma_star = _as_float(_need(doc, "gamma_star"), "gamma_star")
    alpha_star = _as_float(_need(doc, "alpha_star"), "alpha_star")
    if gamma_star < 0:
        raise ConfigError("'gamma_star' must be nonnegative")
    grid = _need(doc, "h_grid")
    if not isinstance(grid, dict):
        raise ConfigError("'h_grid' must be an object")
    if "values" in grid:
        unknown = set(grid) - {"values"}
        if unknown:
            raise ConfigError(f"unknown h_grid keys: {sorted(unknown)}")
        hs = [
            _as_float(value, "h_grid.values", positive=True) for value in grid["values"]
        ]
        if not hs:
            raise ConfigError("'h_grid.values' must not be empty")
    else:
        unknown = set(grid) - {"start", "stop", "count"}
        if unknown:
            raise ConfigError(f"unknown h_grid keys: {sorted(unknown)}")
        start = _as_float(_need(grid, "start"), "h_grid.start", positive=True)
        stop = _as_float(_need(grid, "stop"), "h_grid.stop", positive=True)
        count = _as_int(_need(grid, "count"), "h_grid.count", minimum=1)
        if stop < start:
            raise ConfigError("'h_grid.stop' must not be below 'h_grid.start'")
        hs = np.linspace(start, stop, count).tolist()

    scan = resonance_scan(model, hs, r, ncap, gamma_star, alpha_star)
    os.makedirs(args.out, exist_ok=True)
    write_scan_csv(scan, os.path.join(args.out, "scan.csv"))

    flagged = sum(1 for row in scan.rows if not row.passed)
    worst = scan.worst
    summary = {
        "command": "scan",
        "model": model_source,
        "r": r,
        "ncap": ncap,
        "gamma_star": gamma_star,
        "alpha_star": alpha_star,
        "rows": len(scan.rows),
        "flagged": flagged,
        "flagged_fraction": scan.flagged_fraction,
        "worst": None
        if worst is None
        else {
            "h": worst.h,
            "min_divisor": worst.min_divisor,
            "threshold": worst.threshold,
            "witness": worst.witness.label() if worst.witness else None,
        },
        "structural": [j.label() for j in scan.structural],
    }
    if "report_h" in doc:
        report = min_divisor(
            model,
            _as_float(doc["report_h"], "report_h", positive=True),
            r,
            ncap,
            gamma_star,
            alpha_star,
        )
        summary["report"] = {
            "h": report.h,
            "min_divisor": report.value,
            "omega": report.omega,
            "witness": report.witness.label() if report.witness else None,
            "threshold": report.threshold,
            "passed": report.passed,
            "enumerated": report.enumerated,
        }
    if "measure" in doc:
        mdoc = doc["measure"]
        if not isinstance(mdoc, dict) or set(mdoc) - {"h0", "count"}:
            raise ConfigError("'measure' needs exactly the keys h0 and count")
        measure = resonant_measure(
            model,
            _as_float(_need(mdoc, "h0"), "measure.h0", positive=True),
            _as_int(_need(mdoc, "count"), "measure.count", minimum=1),
            r,
            ncap,
            gamma_star,
            alpha_star,
        )
        summary["measure"] = {
            "h0": measure.h0,
            "grid_count": measure.grid_count,
            "flagged": measure.flagged,
            "fraction": measure.fraction,
        }
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print(f"scan: {flagged}/{len(scan.rows)} step sizes flagged "
          f"(gamma*={fmt(gamma_star)}, alpha*={fmt(alpha_star)})")
    if scan.structural:
        print(f"  structural resonances: {len(scan.structural)}")
    print(f"  wrote {args.out}/scan.csv and summary")
    return 0


_NORMALFORM_KEYS = {"model", "h", "n", "divisor_floor"}


def run_normalform(args) -> int:
    doc = _load_config(args.config, _NORMALFORM_KEYS)
    model, model_source = _resolve_model(doc, args.config)
    h = _as_float(_need(doc, "h"), "h", positive=True)
    n = _as_float(_need(doc, "n"), "n", positive=True)
    floor = _as_float(doc.get("divisor_floor", 1e-12), "divisor_floor", positive=True)
    try:
        poly = load_polynomial_json(args.poly)
    except OSError as exc:
        raise ConfigError(f"cannot read polynomial {args.poly}: {exc}") from exc
    if poly.terms:
        try:
            solution = homological_solve(poly, model, h, n, divisor_floor=floor)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        # an empty perturbation splits trivially
        solution = HomologicalSolution(
            chi=SparsePolynomial(poly.dim),
            zed=SparsePolynomial(poly.dim),
            h=h,
            n=n,
            degree=0,
            divisor_floor=floor,
        )
    residual = verify_conjugacy(solution, poly, model)
    counts = {cls.value: 0 for cls in JIndexClass}
    for key in poly.terms:
        counts[jclass(key, n, poly.degree).value] += 1

    os.makedirs(args.out, exist_ok=True)
    save_polynomial_json(solution.chi, os.path.join(args.out, "chi.json"))
    save_polynomial_json(solution.zed, os.path.join(args.out, "zed.json"))
    summary = {
        "command": "normalform",
        "model": model_source,
        "h": h,
        "n": n,
        "divisor_floor": floor,
        "degree": solution.degree,
        "terms": {
            "total": len(poly),
            "chi": len(solution.chi),
            "zed": len(solution.zed),
            **counts,
        },
        "residual": residual,
        "chi_reality_defect": solution.chi.reality_defect(),
        "zed_reality_defect": solution.zed.reality_defect(),
    }
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print(f"normalform: degree {solution.degree}, {len(poly)} terms "
          f"-> chi {len(solution.chi)}, zed {len(solution.zed)}")
    print(f"  conjugacy residual {residual:.3e}")
    print(f"  wrote {args.out}/chi.json, zed.json, summary")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamsplit",
        description="Splitting integrators with rounding and small-divisor diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a splitting integration")
    sim.add_argument("--config", required=True, help="simulation config (JSON)")
    sim.add_argument("--out", default=_DEFAULT_OUT, help="output directory")
    sim.add_argument("--seed", type=int, default=0, help="seed for random initial phases")
    sim.set_defaults(func=run_simulate)

    scan = sub.add_parser("scan", help="small-divisor scan over step sizes")
    scan.add_argument("--config", required=True, help="scan config (JSON)")
    scan.add_argument("--out", default=_DEFAULT_OUT, help="output directory")
    scan.add_argument("--seed", type=int, default=0,
                      help="accepted for interface uniformity; scans draw nothing random")
    scan.set_defaults(func=run_scan)

    nf = sub.add_parser("normalform", help="solve the homological equation")
    nf.add_argument("--config", required=True, help="normal-form config (JSON)")
    nf.add_argument("--poly", required=True, help="perturbation polynomial (JSON)")
    nf.add_argument("--out", default=_DEFAULT_OUT, help="output directory")
    nf.add_argument("--seed", type=int, default=0,
                    help="accepted for interface uniformity; solves draw nothing random")
    nf.set_defaults(func=run_normalform)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IntegrationError as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        return 3
    except ResonanceError as exc:
        print(f"resonance error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
