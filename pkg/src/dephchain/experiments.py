"""Experiment pipelines behind the CLI: one function per experiment kind.

Each pipeline runs the physics, performs the invariant checks, and returns a
:class:`RunResult` whose payload :func:`emit_plot_data` turns into plot-ready
CSV files plus a JSON summary. No plotting happens here; files carry the data
for one figure panel each.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import entangle, fastpath, fock, lindblad, oracle
from .config import ExperimentConfig, InitialState, config_to_dict
from .lindblad import (
    DensityMatrix,
    Liouvillian,
    SteadyStateNotConverged,
    Trajectory,
    dephasing_liouvillian,
    evolve,
    steady_state_by_integration,
    vectorize,
)
from .model import LatticeSpec, bare_mode_parity

CHARGE_DRIFT_TOL = 1e-8


@dataclass
class RunResult:
    """Everything a run produced: tabular payloads keyed by output file stem,
    a summary dictionary, and the overall invariant verdict."""

    kind: str
    summary: dict
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    json_payloads: dict[str, dict] = field(default_factory=dict)
    invariants_ok: bool = True


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def emit_plot_data(result: RunResult, out_dir: str | Path) -> list[Path]:
    """Write one CSV per table, any JSON payloads, and the run summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for stem, (header, rows) in result.tables.items():
        path = out / f"{stem}.csv"
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        written.append(path)
    for stem, payload in result.json_payloads.items():
        path = out / f"{stem}.json"
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
        written.append(path)
    summary = dict(result.summary)
    summary["invariants_ok"] = result.invariants_ok
    summary["outputs"] = [p.name for p in written]
    path = out / "summary.json"
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    written.append(path)
    return written


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _density_payload(rho: np.ndarray) -> dict:
    flat = [[float(z.real), float(z.imag)] for z in rho.flatten()]
    return {"dim": int(rho.shape[0]), "layout": "row-major complex pairs", "data": flat}


def build_initial_state(spec: LatticeSpec, descriptor: InitialState
                        ) -> tuple[fock.ManyBodyBasis, np.ndarray]:
    """Resolve a state descriptor into (sector basis, state vector)."""
    n_particles = descriptor.n_particles()
    basis = fock.ManyBodyBasis(spec.n_sites, n_particles)
    if descriptor.type == "fock":
        return basis, fock.fock_state(basis, descriptor.bitstring)
    if descriptor.type == "slater":
        return basis, fock.slater_state(basis, descriptor.modes)
    parity = bare_mode_parity(spec.n_sites, spec.tunneling)
    ground_mode = int(np.argmin(parity.energies)) + 1
    return basis, fock.slater_state(basis, [ground_mode], orbitals=parity.modes)


def _parse_observables(names, basis: fock.ManyBodyBasis, spec: LatticeSpec):
    operators = {}
    for name in names:
        if name.startswith("corr:"):
            i, j = (int(p) for p in name[5:].split(","))
            operators[name] = fock.bilinear_operator(basis, i, j)
        elif name.startswith("occ:"):
            operators[name] = fock.number_operator(basis, int(name[4:]))
        elif name == "charge":
            operators[name] = fock.charge_operator(basis)
        elif name == "number":
            operators[name] = fock.total_number_operator(basis)
        elif name == "purity":
            operators[name] = None
        else:
            raise ValueError(f"unknown observable {name!r}")
    return operators


def _series(trajectory: Trajectory, operators) -> dict[str, np.ndarray]:
    series = {}
    for name, op in operators.items():
        if name == "purity":
            series[name] = np.array(
                [np.real(np.trace(r @ r)) for r in trajectory.states]
            ).astype(complex)
        else:
            series[name] = trajectory.expectations(op)
    return series


def _conservation_checks(trajectory: Trajectory, basis: fock.ManyBodyBasis) -> dict:
    charge = trajectory.expectations(fock.charge_operator(basis))
    number = trajectory.expectations(fock.total_number_operator(basis))
    checks = {
        "charge_drift": float(np.abs(charge - charge[0]).max()),
        "number_drift": float(np.abs(number - number[0]).max()),
    }
    if basis.size <= 128:
        even = np.array(
            [fock.parity_sector_weights(r, basis)[0] for r in trajectory.states]
        )
        checks["parity_even_drift"] = float(np.abs(even - even[0]).max())
    checks.update({k: float(v) for k, v in trajectory.diagnostics.items()})
    return checks


def _checks_pass(checks: dict) -> bool:
    ok = checks.get("max_trace_dev", 0.0) < 1e-9
    ok &= checks.get("max_herm_dev", 0.0) < 1e-9
    ok &= checks.get("min_eigenvalue", 0.0) > -1e-8
    ok &= checks.get("charge_drift", 0.0) < CHARGE_DRIFT_TOL
    ok &= checks.get("number_drift", 0.0) < CHARGE_DRIFT_TOL
    ok &= checks.get("parity_even_drift", 0.0) < CHARGE_DRIFT_TOL
    return bool(ok)


def _timeseries_table(times, series) -> tuple[list[str], list[list]]:
    header = ["t"]
    for name in series:
        header += [f"{name}_re", f"{name}_im"]
    rows = []
    for k, t in enumerate(times):
        row = [t]
        for values in series.values():
            row += [values[k].real, values[k].imag]
        rows.append(row)
    return header, rows


def run_evolve(config: ExperimentConfig) -> RunResult:
    spec = config.lattice
    basis, psi = build_initial_state(spec, config.initial_state)
    liouvillian = dephasing_liouvillian(spec, basis)
    times = config.time_grid.values()
    method = "expm" if liouvillian.superdim <= lindblad.DENSE_EXPM_LIMIT else "adaptive"
    trajectory = evolve(DensityMatrix.from_pure(psi, basis), liouvillian, times,
                        method=method)
    operators = _parse_observables(config.observables, basis, spec)
    series = _series(trajectory, operators)
    checks = _conservation_checks(trajectory, basis)
    result = RunResult(
        kind="evolve",
        summary={
            "config": config_to_dict(config),
            "checks": checks,
            "method": trajectory.method,
            "final_time": float(times[-1]),
        },
        invariants_ok=_checks_pass(checks),
    )
    result.tables["timeseries"] = _timeseries_table(times, series)
    return result


def run_steady(config: ExperimentConfig) -> RunResult:
    spec = config.lattice
    basis, psi = build_initial_state(spec, config.initial_state)
    liouvillian = dephasing_liouvillian(spec, basis)
    steady = steady_state_by_integration(
        DensityMatrix.from_pure(psi, basis), liouvillian,
        convergence_tol=config.convergence_tol,
    )
    rho = steady.state.matrix
    steady.state.validate()
    x_state, off = entangle.is_x_state(rho, tol=1e-7)
    checks = {
        "residual": steady.residual,
        "max_off_x_pattern": off,
        **{k: float(v) for k, v in lindblad.invariant_deviations(rho).items()},
    }
    diagonal = {f"rho_{i+1}{i+1}": float(rho[i, i].real) for i in range(basis.size)} \
        if basis.n_particles == 1 else {}
    result = RunResult(
        kind="steady",
        summary={
            "config": config_to_dict(config),
            "checks": checks,
            "elapsed_time": steady.elapsed,
            "is_x_state": bool(x_state),
            **diagonal,
        },
        invariants_ok=checks["trace"] < 1e-9 and checks["min_eigenvalue"] > -1e-8,
    )
    result.json_payloads["density_matrix"] = _density_payload(rho)
    return result


def run_correlation_map(config: ExperimentConfig) -> RunResult:
    spec = config.lattice
    if spec.interaction != 0.0:
        raise ValueError("correlation-map requires a quadratic model (interaction = 0)")
    n = spec.n_sites
    parity = bare_mode_parity(n, spec.tunneling)
    descriptor = config.initial_state
    n_particles = descriptor.n_particles()
    if descriptor.type == "fock":
        occupations = np.array([float(b) for b in descriptor.bitstring])
        c0 = np.diag(occupations).astype(complex)
    else:
        modes = [int(np.argmin(parity.energies)) + 1] if descriptor.type == "ground" \
            else list(descriptor.modes)
        chosen = parity.modes[:, [m - 1 for m in modes]]
        c0 = (chosen @ chosen.T).astype(complex)
    c_steady, elapsed = fastpath.steady_correlation(spec, c0, tol=1e-10)
    reference = n_particles * oracle.analytic_steady_state(n)
    checks = {
        "trace_drift": float(abs(np.trace(c_steady).real - n_particles)),
        "max_dev_from_analytic": float(np.abs(c_steady - reference).max()),
    }
    header = ["i", "j", "re", "im"]
    rows = [[i + 1, j + 1, c_steady[i, j].real, c_steady[i, j].imag]
            for i in range(n) for j in range(n)]
    result = RunResult(
        kind="correlation-map",
        summary={
            "config": config_to_dict(config),
            "checks": checks,
            "elapsed_time": elapsed,
        },
        invariants_ok=checks["trace_drift"] < 1e-8,
    )
    result.tables["correlation_map"] = (header, rows)
    return result


def run_concurrence_scan(config: ExperimentConfig) -> RunResult:
    scan = config.scan
    gamma = config.lattice.dephasing_gamma
    rows = []
    checks: dict = {"max_sector_residual": 0.0}
    conjecture_dev = 0.0
    monotone = True
    for n in scan.sizes:
        previous = None
        for filling in scan.fillings:
            if filling > (n + 1) // 2:
                continue
            spec = LatticeSpec(n_sites=n, dephasing_gamma=gamma)
            basis = fock.ManyBodyBasis(n, filling)
            if scan.dynamical:
                psi = fock.even_mode_slater(basis)
                liouvillian = dephasing_liouvillian(spec, basis)
                steady = steady_state_by_integration(
                    DensityMatrix.from_pure(psi, basis), liouvillian,
                    convergence_tol=config.convergence_tol,
                )
                rho = steady.state.matrix
                residual = steady.residual
            else:
                state = oracle.even_sector_steady_state(n, filling)
                rho = state.matrix
                liouvillian = dephasing_liouvillian(spec, basis)
                residual = liouvillian.residual(rho)
            checks["max_sector_residual"] = max(checks["max_sector_residual"], residual)
            values = []
            for i in range(1, (n - 1) // 2 + 1):
                rdm = entangle.reduce_to_pair(rho, basis, i, n + 1 - i)
                value = entangle.concurrence(rdm)
                rows.append([n, filling, i, value])
                values.append(value)
            mean = float(np.mean(values))
            conjecture_dev = max(conjecture_dev, abs(mean - 2.0 * filling / (n + 1)))
            if previous is not None and mean < previous - 1e-12:
                monotone = False
            previous = mean
    checks["max_dev_from_2N_over_Np1"] = conjecture_dev
    checks["monotone_in_filling"] = monotone
    result = RunResult(
        kind="concurrence-scan",
        summary={"config": config_to_dict(config), "checks": checks},
        invariants_ok=checks["max_sector_residual"] < 1e-8 and monotone,
    )
    result.tables["concurrence"] = (["n_sites", "n_particles", "site", "concurrence"], rows)
    return result


def _local_maxima(times: np.ndarray, values: np.ndarray, after: float = 0.0):
    peaks = []
    for k in range(1, len(values) - 1):
        if times[k] < after:
            continue
        if values[k] >= values[k - 1] and values[k] >= values[k + 1]:
            peaks.append((float(times[k]), float(values[k])))
    return peaks


def run_fock_quench(config: ExperimentConfig) -> RunResult:
    spec = config.lattice
    quench = config.quench
    basis, psi = build_initial_state(spec, config.initial_state)
    n = spec.n_sites
    end_to_end = fock.bilinear_operator(basis, 1, n)
    liouvillian = dephasing_liouvillian(spec, basis)
    method = "expm" if liouvillian.superdim <= lindblad.DENSE_EXPM_LIMIT else "adaptive"

    times = config.time_grid.values()
    bare = evolve(DensityMatrix.from_pure(psi, basis), liouvillian, times, method=method)
    corr = bare.expectations(end_to_end)
    abs_corr = np.abs(corr)
    residuals = np.array([liouvillian.residual(r) for r in bare.states])

    if quench.time == "auto":
        peaks = _local_maxima(times, abs_corr, after=quench.transient)
        if not peaks:
            raise RuntimeError("no post-transient correlation maximum found for 'auto'")
        t_quench = peaks[0][0]
    else:
        t_quench = float(quench.time)
    pre_peaks = _local_maxima(times, abs_corr, after=quench.transient)
    pre_peaks = [p for p in pre_peaks if p[0] <= t_quench + 1e-9]
    pre_local_max = pre_peaks[-1][1] if pre_peaks else float(abs_corr[times <= t_quench].max())

    rho_at_quench = evolve(DensityMatrix.from_pure(psi, basis), liouvillian,
                           [t_quench], method=method).final()
    trap_spec = dataclasses.replace(spec, trap_amplitude=quench.trap_amplitude)
    trapped = dephasing_liouvillian(trap_spec, basis, include_trap=True)
    step = times[1] - times[0] if len(times) > 1 else quench.window / 400
    post_times = np.arange(0.0, quench.window + step / 2, step)
    post = evolve(rho_at_quench, trapped, post_times, method=method)
    post_corr = post.expectations(end_to_end)

    header = ["t", "corr_re", "corr_im", "corr_abs", "residual", "post_quench"]
    rows = [[t, corr[k].real, corr[k].imag, abs_corr[k], residuals[k], 0]
            for k, t in enumerate(times) if t <= t_quench]
    rows += [[t_quench + t, post_corr[k].real, post_corr[k].imag, abs(post_corr[k]),
              trapped.residual(post.states[k]), 1]
             for k, t in enumerate(post_times)]

    window_mask = times >= min(quench.transient, times[-1])
    post_mean = float(np.abs(post_corr).mean())
    retention = post_mean / pre_local_max if pre_local_max > 0 else 0.0
    charge_series = np.concatenate([
        bare.expectations(fock.charge_operator(basis)).real,
        post.expectations(fock.charge_operator(basis)).real,
    ])
    checks = {
        "min_residual_after_transient": float(residuals[window_mask].min()),
        "pre_quench_local_max": pre_local_max,
        "post_window_mean": post_mean,
        "retention_ratio": float(retention),
        "charge_drift": float(np.abs(charge_series - charge_series[0]).max()),
        **{k: float(v) for k, v in bare.diagnostics.items()},
    }
    result = RunResult(
        kind="fock-quench",
        summary={
            "config": config_to_dict(config),
            "checks": checks,
            "quench_time": t_quench,
        },
        invariants_ok=checks["charge_drift"] < CHARGE_DRIFT_TOL
        and checks.get("max_trace_dev", 0.0) < 1e-9,
    )
    result.tables["fock_quench"] = (header, rows)
    return result


def run_robustness_aa(config: ExperimentConfig) -> RunResult:
    scan = config.scan
    base = config.lattice
    n = base.n_sites
    basis, psi = build_initial_state(base, config.initial_state)
    rho0 = DensityMatrix.from_pure(psi, basis)
    sample_times = np.asarray(scan.times, dtype=float)
    rows = []
    for amplitude in scan.grid():
        spec = dataclasses.replace(base, aa_amplitude=float(amplitude))
        liouvillian = dephasing_liouvillian(spec, basis)
        trajectory = evolve(rho0, liouvillian, sample_times, method="expm")
        for t, rho in zip(sample_times, trajectory.states):
            rdm = entangle.reduce_to_pair(rho, basis, 1, n)
            rows.append([float(amplitude), float(t), entangle.concurrence(rdm)])
    unperturbed = {t: c for a, t, c in rows if a == 0.0}
    checks = {
        "value_at_zero_amplitude": unperturbed,
        "n_grid_points": len(scan.grid()),
    }
    result = RunResult(
        kind="robustness-aa",
        summary={"config": config_to_dict(config), "checks": checks},
        invariants_ok=True,
    )
    result.tables["robustness_aa"] = (["aa_amplitude", "t", "concurrence_1N"], rows)
    return result


def run_robustness_int(config: ExperimentConfig) -> RunResult:
    scan = config.scan
    base = config.lattice
    n = base.n_sites
    basis, psi = build_initial_state(base, config.initial_state)
    rho0 = DensityMatrix.from_pure(psi, basis)
    t_sample = float(scan.times[0])
    end_to_end = fock.bilinear_operator(basis, 1, n)
    rows = []
    for strength in scan.grid():
        spec = dataclasses.replace(base, interaction=float(strength))
        liouvillian = dephasing_liouvillian(spec, basis)
        method = "expm" if liouvillian.superdim <= lindblad.DENSE_EXPM_LIMIT else "adaptive"
        trajectory = evolve(rho0, liouvillian, [t_sample], method=method)
        rho = trajectory.final()
        rdm = entangle.reduce_to_pair(rho, basis, 1, n)
        corr = trajectory.expectations(end_to_end)[-1]
        rows.append([float(strength), entangle.concurrence(rdm), corr.real, corr.imag])
    strengths = np.array([r[0] for r in rows])
    values = np.array([r[1] for r in rows])
    design = np.vstack([strengths, np.ones_like(strengths)]).T
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    predicted = design @ coef
    total = float(((values - values.mean()) ** 2).sum())
    r_squared = 1.0 - float(((values - predicted) ** 2).sum()) / total if total > 0 else 1.0
    checks = {
        "linear_fit_slope": float(coef[0]),
        "linear_fit_intercept": float(coef[1]),
        "linear_fit_r_squared": r_squared,
        "sample_time": t_sample,
    }
    result = RunResult(
        kind="robustness-int",
        summary={"config": config_to_dict(config), "checks": checks},
        invariants_ok=True,
    )
    result.tables["robustness_int"] = (
        ["interaction", "concurrence_1N", "corr_re", "corr_im"], rows
    )
    return result


_RUNNERS = {
    "evolve": run_evolve,
    "steady": run_steady,
    "correlation-map": run_correlation_map,
    "concurrence-scan": run_concurrence_scan,
    "fock-quench": run_fock_quench,
    "robustness-aa": run_robustness_aa,
    "robustness-int": run_robustness_int,
}


def run(config: ExperimentConfig, out_dir: str | Path | None = None) -> RunResult:
    """Execute one experiment; write outputs when ``out_dir`` is given.

    Non-convergence from the steady-state solver propagates verbatim as
    :class:`dephchain.lindblad.SteadyStateNotConverged`.
    """
    result = _RUNNERS[config.kind](config)
    if out_dir is not None:
        emit_plot_data(result, out_dir)
    return result
