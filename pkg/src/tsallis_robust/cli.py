"""Batch front door: ``tsallis-robust run --config <path> --outdir <path> [--seed <u64>]``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bsde import invert_transform, solve_transformed
from .config import KEYS, ScenarioConfig, key_reference, parse_config, with_seed
from .errors import ConfigError, ConvergenceError, DomainError, EquivalenceError, ParameterError
from .instances import random_instance
from .lattice import (
    AdaptedProcess,
    LatticeModel,
    Strategy,
    branch_word,
    build_lattice,
    two_branch_integrand,
)
from .measures import density_from_eta, deterministic_eta_gap, tsallis_entropy
from .optimal import (
    max_principle_residuals,
    no_consumption_example,
    shoot_for_budget,
    solve_fb_system,
)
from .qcalc import QParams, exp_q
from .robust import default_eta_grid, evaluate_objective, inner_closed_form, inner_dp_grid
from .utility import UtilitySpec

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE = 0, 1, 2

ATTAIN_TOL = 1e-9
GRID_TOL = 1e-4
SCHEME_TOL = 5e-3
HALVING_FACTOR = 0.7
RESIDUAL_TOL = 1e-6
PERTURBED_FLOOR = 1e-2
EXAMPLE_XI_TOL = 1e-6
EXAMPLE_VALUE_TOL = 1e-8
EXACT_TOL = 1e-12
N_PERTURB = 50


def fmt(x: float) -> str:
    return "%.17g" % x


@dataclass
class Row:
    quantity: str
    value: float
    tolerance: float | None = None
    # "le": pass when value <= tolerance; "ge": pass when value >= tolerance
    sense: str = "le"

    @property
    def status(self) -> str:
        if self.tolerance is None:
            return "INFO"
        ok = self.value <= self.tolerance if self.sense == "le" else self.value >= self.tolerance
        return "PASS" if ok else "FAIL"

    def line(self) -> str:
        tol = "" if self.tolerance is None else fmt(self.tolerance)
        return f"{self.quantity},{fmt(self.value)},{tol},{self.status}"


def _write_csv(path: Path, header: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")


def _setup(cfg: ScenarioConfig, N: int | None = None):
    model = build_lattice(cfg.T, cfg.N if N is None else N, cfg.sigma, cfg.b)
    return model, QParams(cfg.q, cfg.gamma, experimental=cfg.experimental)


def _fb_kwargs(cfg: ScenarioConfig) -> dict:
    return dict(tol=cfg.tol, max_iter=cfg.max_iter, density=cfg.adjoint_density)


def _bsde_value(model: LatticeModel, zeta, U, p: QParams) -> float:
    sol = solve_transformed(model, exp_q(-p.gamma * zeta, p), U, p, "implicit")
    return invert_transform(sol, p).Y0


def _perturb(model: LatticeModel, eta: AdaptedProcess, rng, scale: float = 0.05) -> AdaptedProcess:
    bound = 0.95 / model.sqrt_dt
    return AdaptedProcess(
        [np.clip(e + rng.uniform(-scale, scale, e.shape) / model.sqrt_dt, -bound, bound) for e in eta]
    )


def run_inner(cfg, rng, outdir):
    model, p = _setup(cfg)
    inst = random_instance(rng)
    zeta, U = inst.zeta(model), inst.U(model)
    inner = inner_closed_form(model, zeta, U, p)
    attained = evaluate_objective(model, zeta, U, p, density_from_eta(model, inner.eta))
    excess = min(
        evaluate_objective(model, zeta, U, p, density_from_eta(model, _perturb(model, inner.eta, rng)))
        - inner.Y0
        for _ in range(N_PERTURB)
    )
    rows = [
        Row("Y0", inner.Y0),
        Row("attainment_residual", abs(attained - inner.Y0), ATTAIN_TOL),
        Row("perturbed_min_excess", excess, -ATTAIN_TOL, "ge"),
        Row("bsde_gap", abs(_bsde_value(model, zeta, U, p) - inner.Y0), SCHEME_TOL),
    ]
    lines = []
    for k in range(model.N + 1):
        Y = inner.value[k]
        Z = two_branch_integrand(inner.value[k + 1], model.sqrt_dt) if k < model.N else None
        for i in range(Y.size):
            z = fmt(Z[i]) if Z is not None else ""
            e = fmt(inner.eta[k][i]) if k < model.N else ""
            lines.append(f"{k},{branch_word(k, i) or 'root'},{fmt(Y[i])},{z},{e}")
    _write_csv(outdir / "value_process.csv", "step,branch,Y,Z,eta_star", lines)
    return rows


def run_oracle_compare(cfg, rng, outdir):
    model, p = _setup(cfg)
    grid = default_eta_grid(model, cfg.grid_size, cfg.grid_span)
    rows = []
    for i in range(cfg.instances):
        inst = random_instance(rng)
        zeta, U = inst.zeta(model), inst.U(model)
        closed = inner_closed_form(model, zeta, U, p).Y0
        rows.append(Row(f"grid_gap_{i}", abs(inner_dp_grid(model, zeta, U, p, grid).Y0 - closed), GRID_TOL))
        rows.append(Row(f"bsde_gap_{i}", abs(_bsde_value(model, zeta, U, p) - closed), SCHEME_TOL))
    return rows


def run_entropy(cfg, rng, outdir):
    _, p = _setup(cfg)
    rows = []
    zero_model = build_lattice(cfg.T, cfg.N, cfg.sigma, cfg.b)
    flat = density_from_eta(zero_model, AdaptedProcess.constant(cfg.N, 0.0, integrand=True))
    rows.append(Row("entropy_at_zero_drift", abs(tsallis_entropy(zero_model, flat, p)), EXACT_TOL))
    one = build_lattice(1.0, 1, cfg.sigma, 0.0)
    two_state = tsallis_entropy(one, density_from_eta(one, AdaptedProcess([[0.2]])), QParams(2.0, 1.0))
    rows.append(Row("two_state_q2_error", abs(two_state - 0.04), EXACT_TOL))
    lines = []
    prev = None
    for j in range(cfg.levels):
        n = cfg.N * 2**j
        ent, gap = deterministic_eta_gap(cfg.T, np.full(n, cfg.eta), p)
        rows.append(Row(f"gap_N{n}", gap))
        lines.append(f"{n},{fmt(ent)},{fmt(gap)}")
        if prev is not None:
            # an identically vanishing gap is trivially halved
            ratio = abs(gap) / abs(prev) if abs(prev) > 1e-14 else 0.0
            rows.append(Row(f"gap_ratio_N{n}", ratio, HALVING_FACTOR))
        prev = gap
    _write_csv(outdir / "convergence.csv", "N,value,gap", lines)
    return rows


def run_max_principle(cfg, rng, outdir):
    model, p = _setup(cfg)
    uspec = UtilitySpec(cfg.p0)
    fb = solve_fb_system(model, p, uspec, cfg.v, **_fb_kwargs(cfg))
    res = max_principle_residuals(model, p, uspec, fb.strategy, cfg.v, cfg.adjoint_density, fb.solution)
    bumped = Strategy(fb.strategy.c.map(lambda c: 1.1 * c), fb.strategy.xi)
    res_b = max_principle_residuals(model, p, uspec, bumped, cfg.v, cfg.adjoint_density)
    return [
        Row("iterations", fb.iterations),
        Row("Ybar0", fb.solution.Y0),
        Row("terminal_residual", res.terminal_max, RESIDUAL_TOL),
        Row("consumption_residual", res.consumption_max, RESIDUAL_TOL),
        Row("adjoint_form_gap", res.form_gap, RESIDUAL_TOL),
        Row("perturbed_consumption_residual", res_b.consumption_max, PERTURBED_FLOOR, "ge"),
    ]


def run_optimize(cfg, rng, outdir):
    model, p = _setup(cfg)
    rep = shoot_for_budget(
        model, p, UtilitySpec(cfg.p0), cfg.x, budget_rtol=cfg.budget_rtol, **_fb_kwargs(cfg)
    )
    return [
        Row("v_star", rep.v_star),
        Row("X0", rep.X0),
        Row("budget_error", abs(rep.X0 - cfg.x), cfg.budget_rtol * cfg.x),
        Row("V", rep.Y0),
        Row("Ybar0", rep.Ybar0),
        Row("residual_max", rep.residuals.max, RESIDUAL_TOL),
        Row("evaluations", rep.evaluations),
    ]


def run_example_nc(cfg, rng, outdir):
    model, p = _setup(cfg)
    rep = no_consumption_example(model, p, UtilitySpec(cfg.p0), cfg.x, **_fb_kwargs(cfg))
    return [
        Row("v_star", rep.v_star),
        Row("y", rep.y),
        Row("xi_discrepancy", rep.max_discrepancy, EXAMPLE_XI_TOL),
        Row("V", rep.V_fb),
        Row("value_gap", abs(rep.V_fb - rep.V_formula), EXAMPLE_VALUE_TOL),
    ]


def run_convergence(cfg, rng, outdir):
    _, p = _setup(cfg)
    inst = random_instance(rng)
    rows, lines = [], []
    prev = None
    for j in range(cfg.levels):
        model = build_lattice(cfg.T, cfg.N * 2**j, cfg.sigma, cfg.b)
        zeta, U = inst.zeta(model), inst.U(model)
        value = _bsde_value(model, zeta, U, p)
        gap = abs(value - inner_closed_form(model, zeta, U, p).Y0)
        lines.append(f"{model.N},{fmt(value)},{fmt(gap)}")
        rows.append(Row(f"gap_N{model.N}", gap, SCHEME_TOL))
        if prev is not None:
            rows.append(Row(f"gap_ratio_N{model.N}", gap / prev if prev > 0 else 0.0, HALVING_FACTOR))
        prev = gap
    _write_csv(outdir / "convergence.csv", "N,value,gap", lines)
    return rows


RUNNERS = {
    "inner": run_inner,
    "oracle-compare": run_oracle_compare,
    "entropy": run_entropy,
    "max-principle": run_max_principle,
    "optimize": run_optimize,
    "example-nc": run_example_nc,
    "convergence": run_convergence,
}


def run(cfg: ScenarioConfig, outdir: str | Path) -> list[Row]:
    """Run one scenario, write ``result.csv`` (and detail files) and return its rows."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    rows = RUNNERS[cfg.mode](cfg, rng, out)
    _write_csv(out / "result.csv", "quantity,value,tolerance,status", [r.line() for r in rows])
    return rows


def _u64(text: str) -> int:
    val = int(text, 10)
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsallis-robust",
        description="Robust consumption-investment under Tsallis entropy on binomial lattices.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="config keys (key = value, one per line, '#' comments):\n" + key_reference(),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser(
        "run",
        help="run one scenario",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="config keys (key = value, one per line, '#' comments):\n"
        + key_reference()
        + "\n\nexit codes: 0 success, 1 validation failure, 2 non-convergence",
    )
    r.add_argument("--config", required=True, help="scenario file")
    r.add_argument("--outdir", required=True, help="directory for CSV output")
    r.add_argument("--seed", type=_u64, default=None, help="overrides the config seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = with_seed(cfg, args.seed)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        rows = run(cfg, args.outdir)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ParameterError, DomainError, EquivalenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    failed = [r.quantity for r in rows if r.status == "FAIL"]
    if failed:
        print("checks failed: " + ", ".join(failed), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
