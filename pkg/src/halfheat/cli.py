"""Command-line front end.

Commands: basis-check | synthesize | simulate | counterexample | report.
Every command is deterministic and seedless; options resolve with precedence
command-line flag > config file > built-in default, and all numeric output is
printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .hermite import basis_box_halfwidth, gauss_legendre_rule, _psi_value, _psi_hat_value
from .spectral import (
    GridSpec,
    field_section,
    fourier_forward_1d,
    freq_coords_1d,
    grid_coords_1d,
    write_field,
)
from .simulation import (
    BUILTIN_CASE,
    ExperimentConfig,
    counterexample_lower_bound,
    counterexample_norms,
    run_experiment_full,
    unbounded_response_pointwise,
)
from .synthesis import (
    ControlParams,
    closed_form_coefficients,
    error_budget,
    synthesize,
)

SECTION_X2 = -3.0
SECTION_X1 = 2.2
RATIO_TARGET = 2.0 ** 0.25


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _say(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message)


def _load_config(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _resolve(args, cfg: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in cfg:
        return cfg[key]
    return default


def _resolve_grid(args, cfg: dict) -> GridSpec:
    n = int(_resolve(args, cfg, "grid_n", 512))
    hw = float(_resolve(args, cfg, "grid_halfwidth", 40.0))
    return GridSpec(hw, hw, n, n)


def _resolve_params(args, cfg: dict) -> ControlParams:
    T = float(_resolve(args, cfg, "T", 2.0))
    return ControlParams(
        T=T,
        Tstar=float(_resolve(args, cfg, "Tstar", 3.0 * T)),
        N=int(_resolve(args, cfg, "N", 3)),
        M=int(_resolve(args, cfg, "M", 3)),
        l=int(_resolve(args, cfg, "l", 10)),
    )


def _out_dir(args, cfg: dict, default: str) -> Path:
    out = Path(_resolve(args, cfg, "out", default))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# basis-check
# ---------------------------------------------------------------------------

def cmd_basis_check(args) -> int:
    cfg = _load_config(args.config)
    max_order = int(_resolve(args, cfg, "max_order", 12))
    alphas = _resolve(args, cfg, "alphas", [2.0, 6.0])
    if isinstance(alphas, str):
        alphas = [float(a) for a in alphas.split(",")]
    defect = float(_resolve(args, cfg, "defect", 0.0))
    scale = 1.0 + defect

    results = {}

    worst_orth = 0.0
    for alpha in alphas:
        rule = gauss_legendre_rule(basis_box_halfwidth(alpha))
        table = np.stack(
            [scale * _psi_value(alpha, n, rule.nodes) for n in range(max_order + 1)]
        )
        gram = table @ (rule.weights[:, None] * table.T)
        worst_orth = max(worst_orth, float(np.max(np.abs(gram - np.eye(max_order + 1)))))
    results["orthonormality"] = {
        "max_deviation": worst_orth,
        "tolerance": 1e-8,
        "passed": worst_orth < 1e-8,
    }

    n_grid, hw = 4096, 40.0
    x = grid_coords_1d(hw, n_grid)
    sig = freq_coords_1d(hw, n_grid)
    worst_ft = 0.0
    for alpha in alphas:
        for n in range(max_order + 1):
            sampled = scale * _psi_value(alpha, n, x)
            numeric = fourier_forward_1d(sampled, hw)
            closed = _psi_hat_value(alpha, n, sig)
            worst_ft = max(worst_ft, float(np.max(np.abs(numeric - closed))))
    results["transform-identity"] = {
        "max_deviation": worst_ft,
        "tolerance": 1e-6,
        "passed": worst_ft < 1e-6,
    }

    ok = all(r["passed"] for r in results.values())
    for name, r in results.items():
        _say(
            args,
            f"{'PASS' if r['passed'] else 'FAIL'} {name}: max deviation "
            f"{fmt(r['max_deviation'])} (tolerance {fmt(r['tolerance'])})",
        )
    if args.out is not None or "out" in cfg:
        out = _out_dir(args, cfg, "basis_check_out")
        _write_json(out / "basis_check.json", results)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# synthesize
# ---------------------------------------------------------------------------

def _control_sample_grid(control) -> "tuple[np.ndarray, np.ndarray]":
    pr = control.params
    x2 = np.linspace(-10.0, 10.0, 161)
    xi_parts = []
    for j in range(int(round(control.support_end * pr.l))):
        a, b = j / pr.l, (j + 1) / pr.l
        xi_parts.append(np.linspace(a + (b - a) * 1e-6, b - (b - a) * 1e-6, 9))
    tail_end = min(pr.T, 1.25 * control.support_end)
    if tail_end > control.support_end:
        xi_parts.append(np.linspace(control.support_end * (1 + 1e-9), tail_end, 5))
    return x2, np.concatenate(xi_parts)


def _write_control_samples(control, path: Path) -> None:
    x2, xis = _control_sample_grid(control)
    rows = ["x2,xi,u"]
    for xi in xis:
        u = np.asarray(control.eval(x2, float(xi)))
        for b, val in zip(x2, u):
            rows.append(f"{b:.17g},{xi:.17g},{val:.17g}")
    path.write_text("\n".join(rows) + "\n")


def _build_synthesis(args, cfg: dict):
    params = _resolve_params(args, cfg)
    grid = _resolve_grid(args, cfg)
    config = ExperimentConfig(
        params=params,
        grid=grid,
        initial=str(_resolve(args, cfg, "initial", BUILTIN_CASE)),
        target=str(_resolve(args, cfg, "target", BUILTIN_CASE)),
        trace_epsilons=cfg.get("trace_epsilons"),
        time_probes=cfg.get("time_probes"),
    )
    return params, grid, config


def cmd_synthesize(args) -> int:
    cfg = _load_config(args.config)
    try:
        params, grid, config = _build_synthesis(args, cfg)
        budget = error_budget(params)
    except ValueError as err:
        print(f"parameter error: {err}", file=sys.stderr)
        return 2
    out = _out_dir(args, cfg, "synthesis_out")

    if config.builtin_mode:
        coeffs = closed_form_coefficients(params)
    else:
        # File-based targets need the full pipeline to form the residual.
        _report, art = run_experiment_full(config)
        coeffs = art.coefficients
    control = synthesize(params, coeffs)

    from .synthesis import admissibility_profile

    adm = admissibility_profile(control, 4 * (params.N + 1) * params.l, grid.x2())

    control.save(out / "control.json")
    _write_control_samples(control, out / "control_samples.csv")
    _write_json(
        out / "synthesis_report.json",
        {
            "params": params.to_dict(),
            "budget": budget.to_dict(),
            "admissibility": {"sup_abs": adm.sup_abs, "sup_l2": adm.sup_l2},
            "coefficient_provenance": str(coeffs.provenance.flat[0]),
            "g_pm": coeffs.g_pm.tolist(),
        },
    )
    if _resolve(args, cfg, "plot_script", False):
        _emit_plot_script_control(out)
    _say(args, f"budget total {fmt(budget.total)}")
    _say(args, f"control sup {fmt(adm.sup_abs)}, sup-profile L2 norm {fmt(adm.sup_l2)}")
    _say(args, f"wrote {out / 'control.json'}")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    try:
        params, grid, config = _build_synthesis(args, cfg)
    except ValueError as err:
        print(f"parameter error: {err}", file=sys.stderr)
        return 2
    out = _out_dir(args, cfg, "simulate_out")

    report, art = run_experiment_full(config)
    _write_json(out / "report.json", report.to_dict())
    write_field(art.difference, out / "difference_field.csv")
    write_field(art.end_state, out / "end_state.csv")
    art.control.save(out / "control.json")
    _write_control_samples(art.control, out / "control_samples.csv")

    for name, kwargs in (
        ("section_vertical.csv", {"x2": SECTION_X2}),
        ("section_horizontal.csv", {"x1": SECTION_X1}),
    ):
        coords, values = field_section(art.difference, **kwargs)
        label = "x1" if "x2" in kwargs else "x2"
        rows = [f"{label},value"] + [
            f"{c:.17g},{v:.17g}" for c, v in zip(coords, values)
        ]
        (out / name).write_text("\n".join(rows) + "\n")

    if _resolve(args, cfg, "plot_script", False):
        _emit_plot_script_fields(out)

    _say(args, f"measured error {fmt(report.measured_error)}")
    if report.budget is not None:
        _say(args, f"budget total {fmt(report.budget.total)}")
    for check in report.bound_checks:
        _say(
            args,
            f"{'PASS' if check.passed else 'FAIL'} {check.name}: "
            f"{fmt(check.lhs)} <= {fmt(check.rhs)}",
        )
    for probe in report.trace_errors:
        _say(
            args,
            f"trace error t={fmt(probe.t)} eps={fmt(probe.epsilon)}: {fmt(probe.error)}",
        )
    _say(args, f"wrote {out / 'report.json'}")

    bounds_ok = all(c.passed for c in report.bound_checks)
    return 0 if (report.within_budget and bounds_ok) else 1


# ---------------------------------------------------------------------------
# counterexample
# ---------------------------------------------------------------------------

def cmd_counterexample(args) -> int:
    cfg = _load_config(args.config)
    T = float(_resolve(args, cfg, "T", 2.0))
    levels = int(_resolve(args, cfg, "levels", 6))
    out = _out_dir(args, cfg, "counterexample_out")

    table = counterexample_norms(T, levels)
    rows = ["level,inner_radius,running_norm,annulus_increment,increment_ratio"]
    increments = []
    prev_sq = 0.0
    for k, (radius, norm) in enumerate(table, start=1):
        inc = math.sqrt(norm * norm - prev_sq)
        prev_sq = norm * norm
        ratio = inc / increments[-1] if increments else float("nan")
        increments.append(inc)
        rows.append(
            f"{k},{radius:.17g},{norm:.17g},{inc:.17g},{ratio:.17g}"
        )
    (out / "counterexample.csv").write_text("\n".join(rows) + "\n")

    spots = []
    for r in (1e-2, 1e-3):
        x1 = x2 = r / math.sqrt(2.0)
        measured = unbounded_response_pointwise(x1, x2, T)
        bound = counterexample_lower_bound(x1, x2)
        spots.append(
            {
                "radius": r,
                "x1": x1,
                "x2": x2,
                "response": measured,
                "lower_bound": bound,
                "exceeds": abs(measured) >= bound,
            }
        )
    _write_json(out / "counterexample_spots.json", {"T": T, "spots": spots})

    norms = [n for _, n in table]
    increasing = all(b > a for a, b in zip(norms, norms[1:])) and norms[0] > 0
    ratios = [b / a for a, b in zip(increments, increments[1:])]
    window = all(0.9 * RATIO_TARGET <= r <= 1.1 * RATIO_TARGET for r in ratios)
    spots_ok = all(s["exceeds"] for s in spots)

    for row in rows[1:]:
        _say(args, row)
    for s in spots:
        _say(
            args,
            f"spot |x|={fmt(s['radius'])}: response {fmt(s['response'])} "
            f">= bound {fmt(s['lower_bound'])}: {s['exceeds']}",
        )
    _say(args, f"wrote {out / 'counterexample.csv'}")
    return 0 if (increasing and window and spots_ok) else 1


# ---------------------------------------------------------------------------
# report (figure rendering)
# ---------------------------------------------------------------------------

def _load_csv(path: Path):
    return np.loadtxt(path, delimiter=",", skiprows=1)


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = _load_config(args.config)
    out = Path(_resolve(args, cfg, "out", run_dir))
    out.mkdir(parents=True, exist_ok=True)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rendered = []

    diff_csv = run_dir / "difference_field.csv"
    if diff_csv.exists():
        manifest = json.loads(diff_csv.with_suffix(".json").read_text())
        g = manifest["grid"]
        data = _load_csv(diff_csv)[:, 2].reshape(g["n1"], g["n2"])
        grid = GridSpec.from_dict(g)
        x1, x2 = grid.x1(), grid.x2()
        keep1 = np.abs(x1) <= 10.0
        keep2 = np.abs(x2) <= 10.0
        fig, ax = plt.subplots(figsize=(6, 5))
        mesh = ax.pcolormesh(
            x1[keep1], x2[keep2], data[np.ix_(keep1, keep2)].T, shading="nearest"
        )
        fig.colorbar(mesh, ax=ax, label="difference")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_title("target minus assembled end state")
        fig.tight_layout()
        fig.savefig(out / "difference_field.png", dpi=150)
        plt.close(fig)
        rendered.append("difference_field.png")

    sections = [
        ("section_vertical.csv", f"x2 = {SECTION_X2:g}"),
        ("section_horizontal.csv", f"x1 = {SECTION_X1:g}"),
    ]
    present = [(p, label) for p, label in sections if (run_dir / p).exists()]
    if present:
        fig, axes = plt.subplots(1, len(present), figsize=(6 * len(present), 4))
        axes = np.atleast_1d(axes)
        for ax, (name, label) in zip(axes, present):
            data = _load_csv(run_dir / name)
            keep = np.abs(data[:, 0]) <= 10.0
            ax.plot(data[keep, 0], data[keep, 1])
            ax.set_title(f"difference section at {label}")
            ax.set_xlabel(name.split("_")[1].split(".")[0])
            ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / "sections.png", dpi=150)
        plt.close(fig)
        rendered.append("sections.png")

    ctrl_csv = run_dir / "control_samples.csv"
    if ctrl_csv.exists():
        data = _load_csv(ctrl_csv)
        x2_vals = np.unique(data[:, 0])
        xi_vals = np.unique(data[:, 1])
        u = data[:, 2].reshape(xi_vals.size, x2_vals.size)
        fig, ax = plt.subplots(figsize=(6, 5))
        mesh = ax.pcolormesh(xi_vals, x2_vals, u.T, shading="nearest")
        fig.colorbar(mesh, ax=ax, label="u")
        ax.set_xlabel("xi")
        ax.set_ylabel("x2")
        ax.set_title("synthesized boundary control")
        fig.tight_layout()
        fig.savefig(out / "control.png", dpi=150)
        plt.close(fig)
        rendered.append("control.png")

    cx_csv = run_dir / "counterexample.csv"
    if cx_csv.exists():
        data = _load_csv(cx_csv)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(data[:, 0], data[:, 2], marker="o")
        ax.set_xlabel("refinement level")
        ax.set_ylabel("truncated norm")
        ax.set_title("lower-bound norm growth under refinement")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / "counterexample.png", dpi=150)
        plt.close(fig)
        rendered.append("counterexample.png")

    report_json = run_dir / "report.json"
    if report_json.exists():
        payload = json.loads(report_json.read_text())
        lines = [f"measured_error: {fmt(payload['measured_error'])}"]
        if payload.get("budget"):
            lines.append(f"budget_total: {fmt(payload['budget']['total'])}")
            lines.append(f"within_budget: {payload['within_budget']}")
        for check in payload.get("bound_checks", []):
            lines.append(
                f"{'PASS' if check['passed'] else 'FAIL'} {check['name']}: "
                f"{fmt(check['lhs'])} <= {fmt(check['rhs'])}"
            )
        (out / "summary.txt").write_text("\n".join(lines) + "\n")
        rendered.append("summary.txt")

    for name in rendered:
        _say(args, f"wrote {out / name}")
    if not rendered:
        print(f"no renderable outputs found in {run_dir}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Emitted plot scripts (standalone, reference the CSVs)
# ---------------------------------------------------------------------------

_FIELD_PLOT_SCRIPT = '''"""Plot the exported difference field and its sections."""
import json
import numpy as np
import matplotlib.pyplot as plt

data = np.loadtxt("difference_field.csv", delimiter=",", skiprows=1)
grid = json.load(open("difference_field.json"))["grid"]
values = data[:, 2].reshape(grid["n1"], grid["n2"])
x1 = np.unique(data[:, 0])
x2 = np.unique(data[:, 1])
fig, ax = plt.subplots()
mesh = ax.pcolormesh(x1, x2, values.T, shading="nearest")
fig.colorbar(mesh, ax=ax)
ax.set_xlabel("x1"); ax.set_ylabel("x2")
fig.savefig("difference_field_script.png", dpi=150)

for name in ("section_vertical.csv", "section_horizontal.csv"):
    s = np.loadtxt(name, delimiter=",", skiprows=1)
    fig, ax = plt.subplots()
    ax.plot(s[:, 0], s[:, 1])
    ax.set_title(name)
    fig.savefig(name.replace(".csv", "_script.png"), dpi=150)
'''

_CONTROL_PLOT_SCRIPT = '''"""Plot the exported control samples."""
import numpy as np
import matplotlib.pyplot as plt

data = np.loadtxt("control_samples.csv", delimiter=",", skiprows=1)
x2 = np.unique(data[:, 0]); xi = np.unique(data[:, 1])
u = data[:, 2].reshape(xi.size, x2.size)
fig, ax = plt.subplots()
mesh = ax.pcolormesh(xi, x2, u.T, shading="nearest")
fig.colorbar(mesh, ax=ax)
ax.set_xlabel("xi"); ax.set_ylabel("x2")
fig.savefig("control_script.png", dpi=150)
'''


def _emit_plot_script_fields(out: Path) -> None:
    (out / "plot_difference.py").write_text(_FIELD_PLOT_SCRIPT)
    (out / "plot_control.py").write_text(_CONTROL_PLOT_SCRIPT)


def _emit_plot_script_control(out: Path) -> None:
    (out / "plot_control.py").write_text(_CONTROL_PLOT_SCRIPT)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument("--out", help="output directory", default=None)
    parser.add_argument("--grid-n", dest="grid_n", type=int, default=None)
    parser.add_argument(
        "--grid-halfwidth", dest="grid_halfwidth", type=float, default=None
    )
    parser.add_argument("--quiet", action="store_true")


def _add_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--T", type=float, default=None, help="control horizon")
    parser.add_argument("--Tstar", type=float, default=None, help="auxiliary scale (> T)")
    parser.add_argument("--N", type=int, default=None, help="x1 truncation order")
    parser.add_argument("--M", type=int, default=None, help="x2 truncation order")
    parser.add_argument("--l", type=int, default=None, help="pulse resolution")
    parser.add_argument("--initial", default=None, help=f"'{BUILTIN_CASE}' or field CSV path")
    parser.add_argument("--target", default=None, help=f"'{BUILTIN_CASE}' or field CSV path")
    parser.add_argument(
        "--plot-script",
        dest="plot_script",
        action="store_const",
        const=True,
        default=None,
        help="emit standalone plot scripts next to the CSVs",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halfheat",
        description="Boundary-control synthesis and verification for the "
        "half-plane heat equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis-check", help="orthonormality and transform identities")
    _add_common(p)
    p.add_argument("--max-order", dest="max_order", type=int, default=None)
    p.add_argument("--alphas", default=None, help="comma-separated scales")
    p.add_argument(
        "--defect",
        type=float,
        default=None,
        help="inject a relative normalization defect (negative control)",
    )
    p.set_defaults(func=cmd_basis_check)

    p = sub.add_parser("synthesize", help="build the control and its error budget")
    _add_common(p)
    _add_params(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="assemble the end state and verify bounds")
    _add_common(p)
    _add_params(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("counterexample", help="divergence table for an unbounded control")
    _add_common(p)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("report", help="render figures from a run directory")
    _add_common(p)
    p.add_argument("run_dir", help="directory produced by simulate/synthesize/counterexample")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
