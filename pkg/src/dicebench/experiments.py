"""Sweep runner, theorem verification suites and figure-data export."""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np
from scipy.special import expit

from .descent import DEFAULT_RECORD, DescentConfig, DescentTrace, run_descent, soft_dice_gradient
from .errors import DiceBenchError, SourceNotFound
from .grid import (
    Grid,
    HardSegmentation,
    LogitField,
    MarginalMap,
    average_masks,
    l1_distance,
    l1_norm,
    parse_dims,
    read_grid,
    threshold,
    write_grid,
)
from .metrics import dice
from .optimal import (
    MAX_ATTAINER,
    MAX_VOLUME,
    MIN_ATTAINER,
    MIN_VOLUME,
    OptimalDiceSolution,
    bitmask_of,
    brute_force_optimal,
    construct_extremal,
    optimal_segmentation,
    solve_optimal_dice,
    volume_bounds_check,
)
from .synth import SynthConfig, make_synthetic

log = logging.getLogger(__name__)

CALIBRATION_THRESHOLDS = (0.1, 0.3, 0.5, 0.7, 0.9)
TABLE1_RHOS = tuple(round(0.01 * k, 2) for k in range(1, 10))


def derive_seed(*words: int) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1, np.uint64)[0])


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# ---------------------------------------------------------------- sweep spec


@dataclass(frozen=True)
class CaseSpec:
    name: str
    synth: SynthConfig | None = None
    path: str | None = None
    masks: tuple[str, ...] = ()

    def load(self, sample: int, base_seed: int) -> tuple[MarginalMap, int | None]:
        if self.synth is not None:
            seed = derive_seed(base_seed, sample, 0)
            cfg = SynthConfig(
                dims=self.synth.dims,
                radius=self.synth.radius,
                rho=self.synth.rho,
                deform_amplitude=self.synth.deform_amplitude,
                deform_correlation=self.synth.deform_correlation,
                seed=seed,
            )
            return make_synthetic(cfg), seed
        if self.path is not None:
            return _read_source(self.path, MarginalMap), None
        if self.masks:
            return average_masks([_read_source(p, HardSegmentation) for p in self.masks]), None
        raise SourceNotFound(f"case {self.name!r} has no source")


def _read_source(path, role):
    if not Path(path).exists():
        raise SourceNotFound(f"no such grid file: {path}")
    return read_grid(path, role)


@dataclass
class SweepSpec:
    cases: list[CaseSpec]
    samples: int = 20
    descent: DescentConfig = field(default_factory=DescentConfig)
    output_dir: str = "sweep_out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        names = [c.name for c in self.cases]
        if len(set(names)) != len(names):
            raise ValueError(f"case names must be unique: {names}")


CONFIG_KEYS = """\
output_dir      directory for report.csv, runs.csv and traces/   (default sweep_out)
samples         runs per case, each with its own seeds          (default 20)
seed            base seed from which all run seeds are derived  (default 0)
iterations      gradient steps l = 1..iterations                (default 200)
record          comma list of recorded iterations               (default 1,10,20,100,200)
gamma_factor    learning rate factor, gamma = factor * N         (default 10)
workers         process count; DICEBENCH_WORKERS overrides      (default 1)
synth.rhos      comma list of blur widths, one case per value (named S_rho=<value>)
synth.dims      synthetic grid extents, e.g. 200x200            (default 200x200)
synth.radius    disc radius                                     (default 0.2)
synth.amplitude warp RMS amplitude                              (default 0.05)
synth.correlation warp smoothing width                          (default 0.1)
file.<name>     case <name> read from a marginal grid file
masks.<name>    case <name> formed by averaging comma-listed mask files
"""


def parse_sweep_config(text: str, base_dir: Path | str = ".") -> SweepSpec:
    """Parse the flat ``key = value`` sweep config (see ``CONFIG_KEYS``)."""
    base_dir = Path(base_dir)
    kv: dict[str, str] = {}
    order: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        kv[key] = value
        order.append(key)

    def resolve(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base_dir / q)

    known = {
        "output_dir", "samples", "seed", "iterations", "record", "gamma_factor", "workers",
        "synth.rhos", "synth.dims", "synth.radius", "synth.amplitude", "synth.correlation",
    }
    cases: list[CaseSpec] = []
    if "synth.rhos" in kv:
        dims = parse_dims(kv.get("synth.dims", "200x200"))
        for rho in (float(r) for r in kv["synth.rhos"].split(",")):
            cfg = SynthConfig(
                dims=dims,
                radius=float(kv.get("synth.radius", 0.2)),
                rho=rho,
                deform_amplitude=float(kv.get("synth.amplitude", 0.05)),
                deform_correlation=float(kv.get("synth.correlation", 0.1)),
            )
            cases.append(CaseSpec(f"S_rho={rho:g}", synth=cfg))
    for key in order:
        if key.startswith("file."):
            cases.append(CaseSpec(key[5:], path=resolve(kv[key])))
        elif key.startswith("masks."):
            cases.append(CaseSpec(key[6:], masks=tuple(resolve(p.strip()) for p in kv[key].split(","))))
        elif key not in known:
            raise ValueError(f"unknown config key {key!r}")
    if not cases:
        raise ValueError("config defines no cases")

    iterations = int(kv.get("iterations", 200))
    record = tuple(int(r) for r in kv["record"].split(",")) if "record" in kv else DEFAULT_RECORD
    descent = DescentConfig(
        learning_rate_factor=float(kv.get("gamma_factor", 10.0)),
        iterations=iterations,
        record_at=record,
    )
    return SweepSpec(
        cases=cases,
        samples=int(kv.get("samples", 20)),
        descent=descent,
        output_dir=resolve(kv.get("output_dir", "sweep_out")),
        seed=int(kv.get("seed", 0)),
        workers=int(kv.get("workers", 1)),
    )


# ---------------------------------------------------------------- single run


def nearest_optimizer(c: MarginalMap, sol: OptimalDiceSolution, m: MarginalMap) -> MarginalMap:
    """Closest soft optimizer to ``c``: 0 below tau, 1 above, ties left as they are."""
    tol = sol.tie_tol
    out = np.where(m.cells > sol.tau + tol, 1.0, np.where(m.cells < sol.tau - tol, 0.0, c.cells))
    if sol.degenerate:
        out = c.cells.copy()
    return MarginalMap(m.dims, out)


def calibration_gap(m: MarginalMap, c: MarginalMap, sup_dice: float, thresholds=CALIBRATION_THRESHOLDS) -> float:
    return max(abs(dice(m, threshold(c, a)) - sup_dice) for a in thresholds)


@dataclass
class RunResult:
    case: str
    sample: int
    synth_seed: int | None
    descent_seed: int
    sup_dice: float
    tau: float
    vol_min: float
    vol_max: float
    ce_volume: float
    calibration_gap: float
    optimizer_distance: float
    trace: DescentTrace


def run_case_sample(m: MarginalMap, cfg: DescentConfig, case: str = "", sample: int = 0, synth_seed=None,
                    snapshot: bool = False) -> RunResult:
    sol = solve_optimal_dice(m)
    s_star = optimal_segmentation(sol, m, MAX_VOLUME)
    trace = run_descent(m, cfg, s_star, snapshot=snapshot)
    c = MarginalMap(m.dims, expit(trace.final_logits.cells))
    return RunResult(
        case=case,
        sample=sample,
        synth_seed=synth_seed,
        descent_seed=cfg.seed,
        sup_dice=sol.sup_dice,
        tau=sol.tau,
        vol_min=l1_norm(optimal_segmentation(sol, m, MIN_VOLUME)),
        vol_max=l1_norm(s_star),
        ce_volume=l1_norm(threshold(m, 0.5)),
        calibration_gap=calibration_gap(m, c, sol.sup_dice),
        optimizer_distance=l1_distance(c, nearest_optimizer(c, sol, m)),
        trace=trace,
    )


def _sweep_job(job):
    case, sample, base_seed, cfg = job
    m, synth_seed = case.load(sample, base_seed)
    run_cfg = DescentConfig(cfg.learning_rate_factor, cfg.iterations, cfg.record_at, derive_seed(base_seed, sample, 1))
    return run_case_sample(m, run_cfg, case.name, sample, synth_seed)


# ---------------------------------------------------------------- sweep


@dataclass
class CaseRow:
    case: str
    samples: int
    e0: dict[int, float]
    e1: dict[int, float]
    sup_dice: float
    tau: float
    vol_min: float
    vol_max: float
    ce_volume: float
    max_calibration_gap: float
    max_optimizer_distance: float
    status: str = "ok"


@dataclass
class SweepReport:
    rows: list[CaseRow]
    runs: list[RunResult]
    record_at: tuple[int, ...]

    def row(self, case: str) -> CaseRow:
        return next(r for r in self.rows if r.case == case)


def report_columns(record_at) -> list[str]:
    cols = ["case", "samples"]
    for l in record_at:
        cols += [f"e0_{l}", f"e1_{l}"]
    return cols + ["sup_dice", "tau", "vol_min", "vol_max", "ce_volume",
                   "max_calibration_gap", "max_optimizer_distance", "status"]


def run_columns(record_at) -> list[str]:
    cols = ["case", "sample", "synth_seed", "descent_seed", "sup_dice", "tau", "vol_min", "vol_max",
            "ce_volume", "calibration_gap", "optimizer_distance"]
    for l in record_at:
        cols += [f"e0_{l}", f"e1_{l}"]
    return cols


TRACE_COLUMNS = ["iteration", "soft_dice", "e0", "e1"]


def worker_count(default: int = 1) -> int:
    env = os.environ.get("DICEBENCH_WORKERS")
    return max(1, int(env)) if env else max(1, default)


def run_sweep(spec: SweepSpec, write: bool = True) -> SweepReport:
    jobs = [(case, k, spec.seed, spec.descent) for case in spec.cases for k in range(spec.samples)]
    workers = worker_count(spec.workers)
    results: dict[tuple[str, int], RunResult | Exception] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {(j[0].name, j[1]): pool.submit(_sweep_job, j) for j in jobs}
            for key, fut in futures.items():
                try:
                    results[key] = fut.result()
                except (DiceBenchError, ValueError, OSError) as exc:
                    results[key] = exc
    else:
        for j in jobs:
            try:
                results[(j[0].name, j[1])] = _sweep_job(j)
            except (DiceBenchError, ValueError, OSError) as exc:
                results[(j[0].name, j[1])] = exc

    record = spec.descent.record_at
    rows, runs = [], []
    for case in spec.cases:
        case_runs = [results[(case.name, k)] for k in range(spec.samples)]
        failed = [r for r in case_runs if isinstance(r, Exception)]
        if failed:
            log.warning("case %s failed: %s", case.name, failed[0])
            rows.append(_failed_row(case.name, spec.samples, record, failed[0]))
            continue
        runs.extend(case_runs)
        rows.append(_aggregate(case.name, case_runs, record))
    report = SweepReport(rows, runs, record)
    if write:
        write_sweep(report, spec.output_dir)
    return report


def _mean(xs) -> float:
    return float(np.mean(np.asarray(xs, dtype=np.float64)))


def _aggregate(name: str, runs: list[RunResult], record) -> CaseRow:
    e0 = {l: _mean([r.trace.errors[i].e0 for r in runs]) for i, l in enumerate(record)}
    e1 = {l: _mean([r.trace.errors[i].e1 for r in runs]) for i, l in enumerate(record)}
    return CaseRow(
        case=name,
        samples=len(runs),
        e0=e0,
        e1=e1,
        sup_dice=_mean([r.sup_dice for r in runs]),
        tau=_mean([r.tau for r in runs]),
        vol_min=_mean([r.vol_min for r in runs]),
        vol_max=_mean([r.vol_max for r in runs]),
        ce_volume=_mean([r.ce_volume for r in runs]),
        max_calibration_gap=max(r.calibration_gap for r in runs),
        max_optimizer_distance=max(r.optimizer_distance for r in runs),
    )


def _failed_row(name, samples, record, exc) -> CaseRow:
    nan = float("nan")
    return CaseRow(name, samples, {l: nan for l in record}, {l: nan for l in record},
                   nan, nan, nan, nan, nan, nan, nan, status=f"error: {type(exc).__name__}: {exc}")


def _row_values(row: CaseRow, record) -> list:
    if row.status != "ok":
        return [row.case, row.samples] + [""] * (2 * len(record) + 7) + [row.status]
    vals = [row.case, row.samples]
    for l in record:
        vals += [row.e0[l], row.e1[l]]
    return vals + [row.sup_dice, row.tau, row.vol_min, row.vol_max, row.ce_volume,
                   row.max_calibration_gap, row.max_optimizer_distance, row.status]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if v is not None else "" for v in r])
    return buf.getvalue()


def trace_csv(trace: DescentTrace) -> str:
    rows = [(e.iteration, loss, e.e0, e.e1) for e, loss in zip(trace.errors, trace.losses)]
    return _csv_text(TRACE_COLUMNS, rows)


def write_sweep(report: SweepReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = report.record_at
    (out / "report.csv").write_text(_csv_text(report_columns(record), [_row_values(r, record) for r in report.rows]))
    run_rows = []
    for r in report.runs:
        vals = [r.case, r.sample, r.synth_seed, r.descent_seed, r.sup_dice, r.tau, r.vol_min, r.vol_max,
                r.ce_volume, r.calibration_gap, r.optimizer_distance]
        for e in r.trace.errors:
            vals += [e.e0, e.e1]
        run_rows.append(vals)
        tdir = out / "traces" / r.case
        tdir.mkdir(parents=True, exist_ok=True)
        (tdir / f"sample_{r.sample:04d}.csv").write_text(trace_csv(r.trace))
    (out / "runs.csv").write_text(_csv_text(run_columns(record), run_rows))


def table1_spec(samples: int = 20, dims=(200, 200), output_dir="sweep_out", seed: int = 0, workers: int = 1) -> SweepSpec:
    cases = [CaseSpec(f"S_rho={rho:g}", synth=SynthConfig(dims=dims, rho=rho)) for rho in TABLE1_RHOS]
    return SweepSpec(cases, samples=samples, output_dir=str(output_dir), seed=seed, workers=workers)


# ---------------------------------------------------------------- verification


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    margin: float
    detail: str = ""


def random_marginal(rng: np.random.Generator, n: int) -> MarginalMap:
    """Continuous, rater-quantized (k/5) or zero-inflated random marginal on n cells."""
    kind = rng.integers(3)
    if kind == 0:
        x = rng.random(n)
    elif kind == 1:
        x = rng.integers(0, 6, n) / 5.0
    else:
        x = rng.random(n) * (rng.random(n) < 0.5)
    return MarginalMap((n,), x)


def oracle_suite(trials: int, rng: np.random.Generator, n_range=(4, 16)) -> list[Check]:
    worst_gap = 0.0
    char_ok = modes_ok = True
    for _ in range(trials):
        m = random_marginal(rng, int(rng.integers(n_range[0], n_range[1] + 1)))
        sol = solve_optimal_dice(m)
        bf = brute_force_optimal(m)
        worst_gap = max(worst_gap, abs(bf.sup_dice - sol.sup_dice))
        attained = set(bf.optimizers)
        for mode in (MIN_VOLUME, MAX_VOLUME):
            modes_ok &= bitmask_of(optimal_segmentation(sol, m, mode)) in attained
        if not sol.degenerate:
            for mask in bf.optimizers:
                bits = (mask >> np.arange(m.n)) & 1
                char_ok &= not np.any(bits[m.cells < sol.tau - 1e-12] == 1)
                char_ok &= not np.any(bits[m.cells > sol.tau + 1e-12] == 0)
    return [
        Check("oracle", "sup_dice matches brute force", worst_gap <= 1e-12, worst_gap, f"{trials} marginals"),
        Check("oracle", "optimizers obey tau characterization", bool(char_ok), 0.0),
        Check("oracle", "min/max threshold optimizers attain the max", bool(modes_ok), 0.0),
    ]


def sharpness_suite(dims, vs=None) -> list[Check]:
    vs = vs if vs is not None else [round(0.1 * k, 1) for k in range(1, 11)]
    n = int(np.prod(dims))
    checks = []
    for v in vs:
        m0, _ = construct_extremal(v, MIN_ATTAINER, dims)
        sol0 = solve_optimal_dice(m0)
        vol_min = l1_norm(optimal_segmentation(sol0, m0, MIN_VOLUME))
        want = max(1, np.floor(v * v * n + 0.5)) / n
        checks.append(Check("sharpness", f"min attainer v={v:g}", vol_min == want, abs(vol_min - want),
                            f"vol_min={vol_min!r} target={want!r}"))
        m1, _ = construct_extremal(v, MAX_ATTAINER, dims)
        sol1 = solve_optimal_dice(m1)
        vol_max = l1_norm(optimal_segmentation(sol1, m1, MAX_VOLUME))
        checks.append(Check("sharpness", f"max attainer v={v:g}", vol_max == 1.0, abs(vol_max - 1.0)))
    return checks


def volume_suite(dims, trials: int, rng: np.random.Generator) -> list[Check]:
    n = int(np.prod(dims))
    worst_bound = worst_order = np.inf
    for _ in range(trials):
        rep = volume_bounds_check(MarginalMap(tuple(dims), _smooth_random(rng, dims)) if len(dims) == 2
                                  else random_marginal(rng, n))
        worst_bound = min(worst_bound, rep.vol_min - rep.lower_bound, 1.0 - rep.vol_max)
        worst_order = min(worst_order, rep.vol_min - rep.ce_volume)
    const = volume_bounds_check(MarginalMap.full(dims, 0.3))
    return [
        Check("volume", "optimizer volumes within [|m|^2 - 1/N, 1]", worst_bound >= 0, float(worst_bound)),
        Check("volume", "1/2-threshold volume <= min optimizer volume", worst_order >= 0, float(worst_order)),
        Check("volume", "constant 0.3 shows strict gap 0 vs 1",
              const.ce_volume == 0.0 and const.vol_min == 1.0, const.vol_min - const.ce_volume),
    ]


def _smooth_random(rng: np.random.Generator, dims) -> np.ndarray:
    # mixture of flat noise and a bump so that the optimizer is non-trivial
    yy, xx = np.meshgrid(*[np.linspace(0, 1, d) for d in dims], indexing="ij")
    cy, cx, w = rng.random(3) * [1, 1, 0.3] + [0, 0, 0.05]
    bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * w * w))
    return np.clip(0.9 * bump * rng.random() + 0.3 * rng.random(tuple(dims)), 0, 1).ravel()


def gradient_suite(pairs: int, rng: np.random.Generator, h: float = 1e-6) -> list[Check]:
    worst = 0.0
    for _ in range(pairs):
        m, f = random_gradient_case(rng)
        worst = max(worst, gradient_rel_error(m, f, h))
    return [Check("gradient", "analytic vs central differences", worst <= 1e-5, worst, f"{pairs} pairs")]


def random_gradient_case(rng: np.random.Generator, max_n: int = 64) -> tuple[MarginalMap, LogitField]:
    n = int(rng.integers(1, max_n + 1))
    return MarginalMap((n,), rng.random(n)), LogitField((n,), rng.normal(0.0, 2.0, n))


def finite_difference_gradient(m: MarginalMap, f: LogitField, h: float = 1e-6, dps: int = 40) -> np.ndarray:
    """Central differences of the soft Dice overlap, evaluated in ``dps``-digit arithmetic.

    Float64 evaluation would bury the O(h) difference under ~eps/h rounding.
    """
    with mpmath.workdps(dps):
        mm = [mpmath.mpf(float(v)) for v in m.cells]
        sig = [1 / (1 + mpmath.exp(-mpmath.mpf(float(v)))) for v in f.cells]
        m_sum = mpmath.fsum(mm)

        def objective(sig_vec):
            return 2 * mpmath.fsum(a * b for a, b in zip(sig_vec, mm)) / (mpmath.fsum(sig_vec) + m_sum)

        out = np.empty(f.n)
        hh = mpmath.mpf(h)
        for i in range(f.n):
            x = mpmath.mpf(float(f.cells[i]))
            plus, minus = list(sig), list(sig)
            plus[i] = 1 / (1 + mpmath.exp(-(x + hh)))
            minus[i] = 1 / (1 + mpmath.exp(-(x - hh)))
            out[i] = float((objective(plus) - objective(minus)) / (2 * hh))
    return out


def gradient_rel_error(m: MarginalMap, f: LogitField, h: float = 1e-6) -> float:
    """Max over cells of |analytic - FD| / |FD| (floored at 1e-300 for exact zeros)."""
    g = soft_dice_gradient(m, f).cells
    fd = finite_difference_gradient(m, f, h)
    scale = np.maximum(np.abs(fd), 1e-300)
    return float(np.max(np.abs(g - fd) / scale))


def layer_cake_error(c: Grid, k: int) -> float:
    levels = (np.arange(1, k + 1) - 0.5) / k
    acc = np.zeros(c.n)
    for a in levels:
        acc += threshold(c, a).cells
    return float(np.max(np.abs(acc / k - c.cells)))


def layer_cake_suite(rng: np.random.Generator, dims=(64, 64), ks=(10, 100, 1000)) -> list[Check]:
    c = MarginalMap(tuple(dims), rng.random(int(np.prod(dims))))
    out = []
    for k in ks:
        err = layer_cake_error(c, k)
        bound = 1.0 / (2 * k) + 1e-12
        out.append(Check("layer_cake", f"K={k}", err <= bound, bound - err))
    return out


def calibration_suite(dims, seed: int, rho: float = 0.05, cfg: DescentConfig | None = None) -> list[Check]:
    cfg = cfg or DescentConfig(seed=derive_seed(seed, 1))
    m = make_synthetic(SynthConfig(dims=tuple(dims), rho=rho, seed=derive_seed(seed, 0)))
    run = run_case_sample(m, cfg, f"rho={rho:g}")
    return [
        Check("calibration", f"thresholded iterate attains sup Dice (rho={rho:g})",
              run.calibration_gap <= 1e-3, 1e-3 - run.calibration_gap, f"gap={run.calibration_gap:.3g}"),
        Check("calibration", f"iterate near soft optimizer set (rho={rho:g})",
              run.optimizer_distance <= 5e-3, 5e-3 - run.optimizer_distance, f"dist={run.optimizer_distance:.3g}"),
    ]


def verify_theorems(dims=(100, 100), trials: int = 200, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(derive_seed(seed, 7))
    dims = tuple(dims)
    checks = []
    checks += oracle_suite(trials, rng)
    checks += sharpness_suite(dims)
    checks += volume_suite(dims, max(1, min(trials, 20)), rng)
    checks += gradient_suite(50, rng)
    checks += layer_cake_suite(rng)
    checks += calibration_suite(dims, seed)
    return checks


def checks_csv(checks: list[Check]) -> str:
    return _csv_text(["suite", "check", "passed", "margin", "detail"],
                     [(c.suite, c.name, c.passed, c.margin, c.detail) for c in checks])


# ---------------------------------------------------------------- figure data


def emit_figure_data(m: MarginalMap, trace: DescentTrace, s_star: HardSegmentation, out_dir, case: str = "case") -> list[Path]:
    """Write the marginal, one soft iterate per recorded l, the optimum and the curves.

    Grids go to ``out_dir/case`` in DGRD format; nothing is plotted.
    """
    if not trace.snapshots:
        raise ValueError("trace has no snapshots; rerun with snapshot=True")
    out = Path(out_dir) / case
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "marginal.dgrd"]
    write_grid(m, written[0])
    for l in sorted(trace.snapshots):
        p = out / f"iterate_{l:04d}.dgrd"
        write_grid(trace.snapshots[l], p)
        written.append(p)
    p = out / "optimal.dgrd"
    write_grid(s_star, p)
    written.append(p)
    (out / "curves.csv").write_text(trace_csv(trace))
    return written
