"""Command-line front end: ``solvlin classify|simulate|steer|verify|plot``.

Option precedence is command-line flag, then ``--config`` JSON file, then
built-in default.  Exit codes: 0 success, 1 verification found violations,
2 invalid input.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any

import click
import numpy as np

from . import kernels
from .classify import classification_report, classify
from .core import GroupPoint, InvalidSystemError, SystemParams, load_system
from .flows import PiecewiseControl, flow_piecewise, write_trajectory_csv
from .reach import DEFAULT_VIEWPORT, steer, verify_control_set
from .reach.verify import _random_controls, _rng, _sample_member
from .svg import render_svg

DEFAULTS: dict[str, Any] = {
    "horizon": 5.0,
    "eps": 1e-2,
    "budget": 2000,
    "seed": 0,
    "viewport": list(DEFAULT_VIEWPORT),
    "substeps": 16,
    "h": 1e-3,
    "pairs": 10,
    "samples": 1000,
    "lines": 5,
    "trajectories": 0,
}


class InputError(click.ClickException):
    exit_code = 2


def _floats(text: str, n: int, name: str) -> list[float]:
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise InputError(f"{name} must be {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise InputError(f"{name} must be {n} comma-separated finite numbers, got {text!r}")
    return vals


def _resolve(ctx_opts: dict[str, Any], config: str | None) -> dict[str, Any]:
    cfg: dict[str, Any] = {}
    if config:
        try:
            cfg = json.loads(Path(config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config file {config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise InputError("config file must hold a JSON object")
    out = dict(DEFAULTS)
    out.update({k: v for k, v in cfg.items()})
    out.update({k: v for k, v in ctx_opts.items() if v is not None})
    return out


def _system(opts: dict[str, Any]) -> SystemParams:
    src = opts.get("system")
    if src is None:
        raise InputError("no system given (use --system PATH|JSON or a config file)")
    try:
        if isinstance(src, dict):
            params = SystemParams.from_dict(src)
        else:
            params = load_system(src)
        if opts.get("omega") is not None:
            om = opts["omega"]
            lo, hi = _floats(om, 2, "--omega") if isinstance(om, str) else map(float, om)
            params = SystemParams(params.a, params.b, params.alpha, params.beta, lo, hi)
    except InvalidSystemError as exc:
        raise InputError(f"invalid system: {exc}") from None
    return params


def _viewport(opts) -> list[float]:
    vp = opts["viewport"]
    vp = _floats(vp, 4, "--viewport") if isinstance(vp, str) else [float(v) for v in vp]
    if not (0 < vp[0] < vp[1] and vp[2] < vp[3]):
        raise InputError("viewport must satisfy 0 < x0 < x1 and y0 < y1")
    return vp


def _point(text, name: str) -> GroupPoint:
    x, y = _floats(text, 2, name) if isinstance(text, str) else map(float, text)
    try:
        return GroupPoint(x, y)
    except ValueError as exc:
        raise InputError(f"{name}: {exc}") from None


def _positive(opts, *names):
    for n in names:
        if not float(opts[n]) > 0:
            raise InputError(f"--{n} must be positive, got {opts[n]!r}")


def _clean(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps(doc: dict[str, Any]) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        click.echo(text, nl=False)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from None


def _read_control(path: str) -> PiecewiseControl:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read control file {path}: {exc}") from None
    rows: list[tuple[float, float]] = []
    if text.lstrip().startswith("["):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed control JSON: {exc}") from None
        items = list(enumerate(raw, start=1))
    else:
        items = [
            (i, r) for i, r in enumerate(csv.reader(io.StringIO(text)), start=1)
            if r and not r[0].strip().startswith("#")
        ]
        # optional header
        if items and items[0][1][0].strip().lower() == "dt":
            items = items[1:]
    for i, r in items:
        try:
            dt, u = (float(v) for v in r)
        except (TypeError, ValueError):
            raise InputError(f"control row {i}: expected two numbers 'dt,u', got {r!r}") from None
        if not (dt > 0 and math.isfinite(dt)):
            raise InputError(f"control row {i}: dwell time must be positive, got {dt!r}")
        rows.append((dt, u))
    return PiecewiseControl(tuple(rows))


def _common(f):
    opts = [
        click.option("--system", "system", help="System JSON file or inline JSON object."),
        click.option("--omega", help="Override the control range: lo,hi."),
        click.option("--config", type=click.Path(), help="JSON file of option defaults."),
        click.option("--out", help="Output path (default: standard output)."),
        click.option("--seed", type=int),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@click.group()
def main():
    """Control sets of linear control systems on the two-dimensional solvable Lie group."""


@main.command("classify")
@_common
def cmd_classify(config, **kw):
    """Classify the control set and emit a JSON report."""
    opts = _resolve(kw, config)
    params = _system(opts)
    _emit(dumps(classification_report(params)), opts.get("out"))


@main.command("simulate")
@_common
@click.option("--point", required=False, help="Initial point x,y.")
@click.option("--control", "control_file", help="CSV (dt,u rows) or JSON list of [dt, u].")
@click.option("--substeps", type=int)
@click.option("--audit/--no-audit", default=None, help="Add RK4 columns x_rk4,y_rk4.")
@click.option("--h", type=float, help="RK4 step for --audit.")
def cmd_simulate(config, **kw):
    """Simulate a piecewise-constant control and emit a CSV trajectory."""
    opts = _resolve(kw, config)
    params = _system(opts)
    if opts.get("point") is None:
        raise InputError("--point is required")
    p = _point(opts["point"], "--point")
    ctrl = _read_control(opts["control_file"]) if opts.get("control_file") else PiecewiseControl()
    for i, (_, u) in enumerate(ctrl, start=1):
        if not params.omega_lo <= u <= params.omega_hi:
            raise InputError(f"control row {i}: u = {u!r} outside Omega = [{params.omega_lo}, {params.omega_hi}]")
    substeps = int(opts["substeps"])
    if substeps < 1:
        raise InputError("--substeps must be >= 1")
    traj = flow_piecewise(params, p, ctrl, substeps=substeps)
    audit = None
    if opts.get("audit"):
        _positive(opts, "h")
        audit = _rk4_at_samples(params, p, ctrl, substeps, float(opts["h"]))
    buf = io.StringIO()
    write_trajectory_csv(traj, buf, audit)
    _emit(buf.getvalue(), opts.get("out"))


def _rk4_at_samples(params, p, ctrl, substeps, h):
    """RK4 states at the same sample times as :func:`flow_piecewise`."""
    if not len(ctrl):
        return np.array([p.x]), np.array([p.y])
    fine = PiecewiseControl(tuple((dt / substeps, u) for dt, u in ctrl for _ in range(substeps)))
    _, xs, ys, _ = kernels.rk4_piecewise(
        params.a, params.b, params.alpha, params.beta, p.x, p.y, fine.dts, fine.levels, h
    )
    counts = np.maximum(1, np.ceil(fine.dts / h - 1e-9).astype(np.int64))
    idx = np.concatenate(([0], np.cumsum(counts)))
    return xs[idx], ys[idx]


@main.command("steer")
@_common
@click.option("--point", help="Start point x,y.")
@click.option("--target", help="Target point x,y.")
@click.option("--eps", type=float)
@click.option("--budget", type=int)
def cmd_steer(config, **kw):
    """Search for a control steering --point to within --eps of --target."""
    opts = _resolve(kw, config)
    params = _system(opts)
    _positive(opts, "eps", "budget")
    if opts.get("point") is None or opts.get("target") is None:
        raise InputError("--point and --target are required")
    p, q = _point(opts["point"], "--point"), _point(opts["target"], "--target")
    res = steer(params, p, q, eps=float(opts["eps"]), budget=int(opts["budget"]), seed=int(opts["seed"]))
    doc = res.to_dict()
    doc["system"] = params.to_dict()
    doc["settings"] = {
        "point": [p.x, p.y], "target": [q.x, q.y], "eps": float(opts["eps"]),
        "budget": int(opts["budget"]), "seed": int(opts["seed"]),
    }
    _emit(dumps(doc), opts.get("out"))


@main.command("verify")
@_common
@click.option("--pairs", type=int, help="Number of point pairs to steer between.")
@click.option("--samples", type=int, help="Invariance samples.")
@click.option("--lines", type=int, help="Members sampled for families of control sets.")
@click.option("--eps", type=float)
@click.option("--budget", type=int)
@click.option("--horizon", type=float)
@click.option("--viewport", help="x0,x1,y0,y1")
def cmd_verify(config, **kw):
    """Empirically verify controllability and invariance of the classified set."""
    opts = _resolve(kw, config)
    params = _system(opts)
    _positive(opts, "eps", "budget", "horizon", "lines")
    vp = _viewport(opts)
    try:
        rep = verify_control_set(
            params, classify(params), pairs=int(opts["pairs"]), eps=float(opts["eps"]),
            seed=int(opts["seed"]), invariance_samples=int(opts["samples"]),
            budget=int(opts["budget"]), viewport=vp, lines=int(opts["lines"]),
            horizon=float(opts["horizon"]),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    doc = rep.to_dict()
    doc["system"] = params.to_dict()
    doc["case"] = classify(params).case
    _emit(dumps(doc), opts.get("out"))
    if not rep.clean:
        sys.exit(1)


@main.command("plot")
@_common
@click.option("--viewport", help="x0,x1,y0,y1")
@click.option("--trajectories", type=int, help="Overlay this many sampled trajectories.")
@click.option("--horizon", type=float)
def cmd_plot(config, **kw):
    """Draw the control set (clipped to the viewport) as SVG."""
    opts = _resolve(kw, config)
    params = _system(opts)
    _positive(opts, "horizon")
    vp = _viewport(opts)
    desc = classify(params)
    trajs = []
    n = int(opts["trajectories"])
    seed = int(opts["seed"])
    for i in range(n):
        rng = _rng(seed, 7, i)
        try:
            p = _sample_member(desc, rng, vp, None, 0.05) if not hasattr(desc, "endpoints") else \
                _sample_member(desc, rng, vp, float(rng.uniform(vp[0], vp[1])), 0.05)
        except ValueError:
            p = GroupPoint(float(rng.uniform(vp[0], vp[1])), float(rng.uniform(vp[2], vp[3])))
        dts, us = _random_controls(rng, params.omega, float(opts["horizon"]), 1)
        live = dts[0] > 0
        traj = flow_piecewise(params, p, PiecewiseControl(tuple(zip(dts[0][live], us[0][live]))), 8)
        trajs.append((traj.x, traj.y))
    title = "case %d: %s" % (desc.case, type(desc).__name__)
    _emit(render_svg(desc, vp, trajs, title), opts.get("out"))


if __name__ == "__main__":  # pragma: no cover
    main()
