"""Noise-grid sweeps: per-cell optimization, advantage regions, boundary.

Each grid cell gets an optimized GKP record, an optimized number-phase
record, and a trivial-qubit baseline.  The fidelity difference map is
contoured with marching squares (linear interpolation along edges,
saddles resolved by the cell average) to locate the zero-advantage
boundary in the (gamma_t, kappa_t) plane.

Cells are persisted to an append-only line-delimited checkpoint as they
complete, keyed by a hash of the effective configuration; rerunning
with the same inputs resumes and reproduces the uninterrupted output
byte for byte.  Flagged evaluations stay in the published difference
map but are excluded from strict regions and from the boundary.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import threading
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .channel import NoisePoint
from .codes import FAMILY_GKP, FAMILY_NP, FAMILY_TRIVIAL
from .errors import CheckpointError, InvalidArgumentError
from .optimizer import (
    DESK_DIM_CAP,
    OptimizationRecord,
    SearchSpace,
    default_space,
    optimize_code,
)
from .qec import FidelityResult, QecDiagnostics, baseline_fidelity

SCHEMA_VERSION = "1"
LABEL_GKP = "GKP-strict"
LABEL_NP = "NP-strict"
LABEL_UNDECIDED = "undecided"
FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class NoiseGrid:
    """Sorted loss and dephasing strengths plus a tag naming the recipe."""

    gamma_values: tuple[float, ...]
    kappa_values: tuple[float, ...]
    spec_tag: str

    def __post_init__(self) -> None:
        for name, values in (("gamma_values", self.gamma_values), ("kappa_values", self.kappa_values)):
            arr = tuple(float(v) for v in values)
            if len(arr) == 0:
                raise InvalidArgumentError(f"{name} must not be empty")
            if any(not math.isfinite(v) or v < 0.0 for v in arr):
                raise InvalidArgumentError(f"{name} must be finite and non-negative")
            if any(b <= a for a, b in zip(arr, arr[1:])):
                raise InvalidArgumentError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.gamma_values), len(self.kappa_values))

    def cells(self) -> list[tuple[int, int]]:
        return list(itertools.product(range(len(self.gamma_values)), range(len(self.kappa_values))))


def paper_grid() -> NoiseGrid:
    """Full 29 x 22 grid: gamma_t stepped by 0.005, kappa_t stepped by
    1e-4 up to 1.2e-3 and by 6e-4 beyond, all built in integer
    arithmetic so the values are exact."""
    gammas = tuple((10 + 5 * i) / 1000.0 for i in range(29))
    kappas = tuple(j / 10000.0 for j in range(1, 13)) + tuple(6 * m / 10000.0 for m in range(3, 13))
    return NoiseGrid(gamma_values=gammas, kappa_values=kappas, spec_tag="paper")


def desk_grid(scale: str) -> NoiseGrid:
    """Downscaled grids: smoke = 3x3 corners and center, small = 6x5
    geometric coverage of the same ranges, full = paper_grid()."""
    if scale == "smoke":
        return NoiseGrid(
            gamma_values=(0.01, 0.08, 0.15),
            kappa_values=(1e-4, 8e-4, 7.2e-3),
            spec_tag="smoke",
        )
    if scale == "small":
        gammas = tuple(float(v) for v in np.geomspace(0.01, 0.15, 6))
        kappas = tuple(float(v) for v in np.geomspace(1e-4, 7.2e-3, 5))
        return NoiseGrid(gamma_values=gammas, kappa_values=kappas, spec_tag="small")
    if scale == "full":
        return paper_grid()
    raise InvalidArgumentError(f"unknown grid preset {scale!r}; expected smoke, small or full")


@dataclass(frozen=True)
class SweepBudget:
    """Per-family optimizer sizing for one sweep cell."""

    popsize: int = 20
    generations: int = 14
    restarts: int = 1

    def __post_init__(self) -> None:
        if self.popsize < 4 or self.generations < 1 or self.restarts < 1:
            raise InvalidArgumentError(f"degenerate sweep budget {self}")

    @property
    def evaluations(self) -> int:
        return self.popsize * self.generations


@dataclass(frozen=True)
class FamilyShape:
    family: str
    loss_violations: int
    loss_checks: int
    deph_violations: int
    deph_checks: int

    @property
    def loss_violation_fraction(self) -> float:
        return self.loss_violations / self.loss_checks if self.loss_checks else 0.0

    @property
    def deph_violation_fraction(self) -> float:
        return self.deph_violations / self.deph_checks if self.deph_checks else 0.0


@dataclass(frozen=True)
class ShapeReport:
    entries: tuple[FamilyShape, ...]

    def for_family(self, family: str) -> FamilyShape:
        for entry in self.entries:
            if entry.family == family:
                return entry
        raise InvalidArgumentError(f"no shape entry for family {family!r}")


@dataclass(frozen=True)
class SweepResult:
    grid: NoiseGrid
    gkp: list[list[OptimizationRecord]]
    np: list[list[OptimizationRecord]]
    baseline: list[list[FidelityResult]]
    delta_f: "np.ndarray"
    regions: list[list[str]]
    boundary: list[list[tuple[float, float]]]
    flagged: "np.ndarray"
    shape: ShapeReport | None
    config_hash: str
    baseline_violations: tuple[tuple[int, int, str], ...]


def strict_regions(gkp_f, np_f) -> list[list[str]]:
    """Label cells where one family's fidelity lower bound beats the
    other's upper bound (1 + f_tilde) / 2; everything else is undecided."""
    a = np.asarray(gkp_f, dtype=float)
    b = np.asarray(np_f, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise InvalidArgumentError(f"matrices must share a 2-d shape, got {a.shape} and {b.shape}")
    for name, m in (("gkp_f", a), ("np_f", b)):
        if not np.all((m >= 0.0) & (m <= 1.0)):
            raise InvalidArgumentError(f"{name} entries must lie in [0, 1]")
    gkp_wins = a > (1.0 + b) / 2.0
    np_wins = b > (1.0 + a) / 2.0
    if np.any(gkp_wins & np_wins):
        raise InvalidArgumentError("strict advantage labels overlap; inputs are inconsistent")
    labels = []
    for i in range(a.shape[0]):
        row = []
        for j in range(a.shape[1]):
            if gkp_wins[i, j]:
                row.append(LABEL_GKP)
            elif np_wins[i, j]:
                row.append(LABEL_NP)
            else:
                row.append(LABEL_UNDECIDED)
        labels.append(row)
    return labels


def _edge_point(x0: float, y0: float, v0: float, x1: float, y1: float, v1: float) -> tuple[float, float]:
    # canonical endpoint order: the two cells sharing this edge must
    # produce the crossing point bit for bit identically or chaining
    # breaks at the shared vertex
    if (x1, y1) < (x0, y0):
        x0, y0, v0, x1, y1, v1 = x1, y1, v1, x0, y0, v0
    t = v0 / (v0 - v1)
    return (x0 + t * (x1 - x0), y0 + t * (y1 - y0))


def extract_boundary(delta_f, grid: NoiseGrid) -> list[list[tuple[float, float]]]:
    """Marching-squares zero contour of the fidelity difference.

    Sign changes along cell edges are located by linear interpolation;
    ambiguous saddle cells are split according to the sign of the cell
    average.  Cells touching a non-finite entry are skipped.  Segments
    sharing interpolated vertices are chained into ordered polylines.
    """
    v = np.asarray(delta_f, dtype=float)
    xs = grid.gamma_values
    ys = grid.kappa_values
    if v.shape != grid.shape:
        raise InvalidArgumentError(f"delta_f shape {v.shape} does not match grid {grid.shape}")
    segments: list[tuple[tuple[float, float], tuple[float, float]]] = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            a, b = v[i, j], v[i + 1, j]
            c, d = v[i + 1, j + 1], v[i, j + 1]
            corners = (a, b, c, d)
            if not all(math.isfinite(val) for val in corners):
                continue
            sa, sb, sc, sd = (val > 0.0 for val in corners)
            if sa == sb == sc == sd:
                continue
            p_ab = _edge_point(xs[i], ys[j], a, xs[i + 1], ys[j], b) if sa != sb else None
            p_bc = _edge_point(xs[i + 1], ys[j], b, xs[i + 1], ys[j + 1], c) if sb != sc else None
            p_cd = _edge_point(xs[i + 1], ys[j + 1], c, xs[i], ys[j + 1], d) if sc != sd else None
            p_da = _edge_point(xs[i], ys[j + 1], d, xs[i], ys[j], a) if sd != sa else None
            crossings = [p for p in (p_ab, p_bc, p_cd, p_da) if p is not None]
            if len(crossings) == 2:
                segments.append((crossings[0], crossings[1]))
            elif len(crossings) == 4:
                # saddle: the cell-average sign decides which corners the
                # two contour arcs cut off
                avg = (a + b + c + d) / 4.0
                if (avg > 0.0) == sa:
                    segments.append((p_ab, p_bc))
                    segments.append((p_cd, p_da))
                else:
                    segments.append((p_ab, p_da))
                    segments.append((p_bc, p_cd))
    return _chain_segments(segments)


def _chain_segments(
    segments: list[tuple[tuple[float, float], tuple[float, float]]],
) -> list[list[tuple[float, float]]]:
    adjacency: dict[tuple[float, float], list[int]] = defaultdict(list)
    for idx, (p, q) in enumerate(segments):
        adjacency[p].append(idx)
        adjacency[q].append(idx)
    used: set[int] = set()
    polylines: list[list[tuple[float, float]]] = []

    def walk(start: tuple[float, float], first: int) -> list[tuple[float, float]]:
        chain = [start]
        current = start
        idx = first
        while True:
            used.add(idx)
            p, q = segments[idx]
            current = q if p == current else p
            chain.append(current)
            pending = [s for s in adjacency[current] if s not in used]
            if not pending:
                return chain
            idx = pending[0]

    for idx, (p, q) in enumerate(segments):  # open chains start at degree-1 vertices
        if idx in used:
            continue
        if len(adjacency[p]) == 1:
            polylines.append(walk(p, idx))
        elif len(adjacency[q]) == 1:
            polylines.append(walk(q, idx))
    for idx, (p, _q) in enumerate(segments):  # what remains are closed loops
        if idx not in used:
            polylines.append(walk(p, idx))
    return polylines


def _second_differences(xs: tuple[float, ...], values: np.ndarray) -> list[float]:
    out = []
    for k in range(1, len(xs) - 1):
        if not all(math.isfinite(values[k + d]) for d in (-1, 0, 1)):
            continue
        left = (values[k] - values[k - 1]) / (xs[k] - xs[k - 1])
        right = (values[k + 1] - values[k]) / (xs[k + 1] - xs[k])
        out.append(2.0 * (right - left) / (xs[k + 1] - xs[k - 1]))
    return out


def shape_diagnostics(result: SweepResult) -> ShapeReport:
    """Curvature sign counts: fidelity should bend downward along the
    loss axis and upward along the dephasing axis.

    Uses divided differences so non-uniform grids are handled; flagged
    cells drop out of the triples they touch.
    """
    grid = result.grid
    if len(grid.gamma_values) < 3 or len(grid.kappa_values) < 3:
        raise InvalidArgumentError("shape diagnostics need at least 3 points per axis")
    slack = 1e-12
    entries = []
    for family, records in ((FAMILY_GKP, result.gkp), (FAMILY_NP, result.np)):
        f = np.array(
            [
                [
                    math.nan if records[i][j].best_fidelity.flagged else records[i][j].best_fidelity.f_tilde
                    for j in range(len(grid.kappa_values))
                ]
                for i in range(len(grid.gamma_values))
            ]
        )
        loss_viol = loss_checks = deph_viol = deph_checks = 0
        for j in range(f.shape[1]):
            for d2 in _second_differences(grid.gamma_values, f[:, j]):
                loss_checks += 1
                if d2 > slack:  # concave along loss means d2 <= 0
                    loss_viol += 1
        for i in range(f.shape[0]):
            for d2 in _second_differences(grid.kappa_values, f[i, :]):
                deph_checks += 1
                if d2 < -slack:  # convex along dephasing means d2 >= 0
                    deph_viol += 1
        entries.append(
            FamilyShape(
                family=family,
                loss_violations=loss_viol,
                loss_checks=loss_checks,
                deph_violations=deph_viol,
                deph_checks=deph_checks,
            )
        )
    return ShapeReport(entries=tuple(entries))


def _space_payload(space: SearchSpace) -> dict:
    return {
        "names": list(space.names),
        "lower": [float(v) for v in space.lower],
        "upper": [float(v) for v in space.upper],
        "discrete": [[name, list(values)] for name, values in space.discrete],
    }


def config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _diagnostics_payload(diag: QecDiagnostics) -> dict:
    return {
        "eps_trunc": diag.eps_trunc,
        "tail_mass": diag.tail_mass,
        "herm_defect": diag.herm_defect,
        "trace_defect": diag.trace_defect,
        "clamp_mass": diag.clamp_mass,
        "n_kraus": diag.n_kraus,
        "dim": diag.dim,
        "budget": diag.budget,
        "flagged": diag.flagged,
    }


def _payload_diagnostics(data: dict) -> QecDiagnostics:
    return QecDiagnostics(
        eps_trunc=float(data["eps_trunc"]),
        tail_mass=float(data["tail_mass"]),
        herm_defect=float(data["herm_defect"]),
        trace_defect=float(data["trace_defect"]),
        clamp_mass=float(data["clamp_mass"]),
        n_kraus=int(data["n_kraus"]),
        dim=int(data["dim"]),
        budget=float(data["budget"]),
        flagged=bool(data["flagged"]),
    )


def _fidelity_payload(result: FidelityResult) -> dict:
    return {
        "f_tilde": result.f_tilde,
        "f_lower": result.f_lower,
        "f_upper": result.f_upper,
        "diagnostics": _diagnostics_payload(result.diagnostics),
    }


def _payload_fidelity(data: dict) -> FidelityResult:
    return FidelityResult(
        f_tilde=float(data["f_tilde"]),
        f_lower=float(data["f_lower"]),
        f_upper=float(data["f_upper"]),
        diagnostics=_payload_diagnostics(data["diagnostics"]),
    )


def _record_payload(record: OptimizationRecord) -> dict:
    return {
        "family": record.family,
        "best_params": {k: float(v) for k, v in record.best_params.items()},
        "fidelity": _fidelity_payload(record.best_fidelity),
        "evaluations": record.evaluations,
        "per_restart": [
            [[[name, int(value)] for name, value in assignment], restart, best]
            for assignment, restart, best in record.per_restart
        ],
        "seed": record.seed,
        "eps_tol": record.eps_tol,
        "eps_kraus": record.eps_kraus,
    }


def _payload_record(data: dict, noise: NoisePoint) -> OptimizationRecord:
    per_restart = tuple(
        (
            tuple((str(name), int(value)) for name, value in assignment),
            int(restart),
            float(best),
        )
        for assignment, restart, best in data["per_restart"]
    )
    return OptimizationRecord(
        noise=noise,
        family=str(data["family"]),
        best_params={str(k): float(v) for k, v in data["best_params"].items()},
        best_fidelity=_payload_fidelity(data["fidelity"]),
        evaluations=int(data["evaluations"]),
        per_restart=per_restart,
        trace=(),
        seed=int(data["seed"]),
        eps_tol=float(data["eps_tol"]),
        eps_kraus=float(data["eps_kraus"]),
    )


def _cell_seed(seeds: int, i: int, j: int, family_index: int) -> int:
    return int(np.random.SeedSequence(entropy=int(seeds), spawn_key=(i, j, family_index)).generate_state(1)[0])


def _read_checkpoint(
    path: Path, expected_hash: str, shape: tuple[int, int]
) -> tuple[dict[tuple[int, int], dict], bool]:
    """Parse committed checkpoint lines; returns (cells, header seen).

    Only newline-terminated lines count as committed: a trailing partial
    line is an interrupted append and is ignored (the writer truncates
    it before continuing).  Anything else that fails to parse is treated
    as corruption.
    """
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    lines = content.split("\n")[:-1]  # drop the empty tail or the uncommitted partial line
    if not lines:
        return {}, False
    completed: dict[tuple[int, int], dict] = {}
    for lineno, line in enumerate(lines, start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CheckpointError(
                f"checkpoint {path} line {lineno} is not valid JSON; move the file away "
                f"or delete it to start fresh"
            ) from exc
        if lineno == 1:
            if obj.get("kind") != "header" or obj.get("schema_version") != SCHEMA_VERSION:
                raise CheckpointError(
                    f"checkpoint {path} lacks a valid header; move the file away or delete it"
                )
            if obj.get("config_hash") != expected_hash:
                raise CheckpointError(
                    f"checkpoint {path} was written with a different configuration "
                    f"(hash {obj.get('config_hash')!r} vs {expected_hash!r}); rerun with the "
                    f"original settings or move the file away"
                )
            continue
        if obj.get("kind") != "cell":
            raise CheckpointError(f"checkpoint {path} line {lineno} has unknown kind {obj.get('kind')!r}")
        i, j = int(obj["i"]), int(obj["j"])
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise CheckpointError(f"checkpoint {path} line {lineno} indexes cell ({i}, {j}) outside the grid")
        completed[(i, j)] = obj
    return completed, True


def run_sweep(
    grid: NoiseGrid,
    budgets: SweepBudget | dict[str, SweepBudget] | None = None,
    seeds: int = 0,
    resume: str | Path | None = None,
    *,
    workers: int = 1,
    gkp_space: SearchSpace | None = None,
    np_space: SearchSpace | None = None,
    paper_scale: bool = False,
    max_dim: int | None = DESK_DIM_CAP,
    baseline_dim: int = 4,
) -> SweepResult:
    """Optimize both families and the baseline on every grid cell.

    Completed cells stream to the checkpoint as soon as they finish; a
    rerun with identical settings resumes from it.  All records pass
    through the checkpoint serialization even when no file is given, so
    fresh and resumed runs produce identical results.
    """
    if budgets is None:
        budgets = SweepBudget()
    if isinstance(budgets, SweepBudget):
        budgets = {FAMILY_GKP: budgets, FAMILY_NP: budgets}
    if gkp_space is None:
        gkp_space = default_space(FAMILY_GKP, paper_scale=paper_scale)
    if np_space is None:
        np_space = default_space(FAMILY_NP, paper_scale=paper_scale)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "grid": {
            "gamma_values": list(grid.gamma_values),
            "kappa_values": list(grid.kappa_values),
            "spec_tag": grid.spec_tag,
        },
        "budgets": {
            family: {"popsize": b.popsize, "generations": b.generations, "restarts": b.restarts}
            for family, b in sorted(budgets.items())
        },
        "seeds": int(seeds),
        "gkp_space": _space_payload(gkp_space),
        "np_space": _space_payload(np_space),
        "paper_scale": bool(paper_scale),
        "max_dim": max_dim,
        "baseline_dim": int(baseline_dim),
    }
    digest = config_hash(payload)

    completed: dict[tuple[int, int], dict] = {}
    handle = None
    lock = threading.Lock()
    if resume is not None:
        path = Path(resume)
        has_header = False
        if path.exists():
            completed, has_header = _read_checkpoint(path, digest, grid.shape)
            committed = path.read_text(encoding="utf-8").rfind("\n") + 1
            if path.stat().st_size > committed:  # drop an interrupted partial append
                with path.open("r+", encoding="utf-8") as fh:
                    fh.truncate(committed)
        try:
            handle = path.open("a", encoding="utf-8")
        except OSError as exc:
            raise CheckpointError(f"checkpoint location {path} is not writable: {exc}") from exc
        if not has_header:
            header = {"kind": "header", "schema_version": SCHEMA_VERSION, "config_hash": digest}
            handle.write(json.dumps(header, sort_keys=True) + "\n")
            handle.flush()

    def run_cell(cell: tuple[int, int]) -> tuple[tuple[int, int], dict]:
        i, j = cell
        noise = NoisePoint(grid.gamma_values[i], grid.kappa_values[j])
        gkp_budget = budgets[FAMILY_GKP]
        np_budget = budgets[FAMILY_NP]
        gkp_rec = optimize_code(
            FAMILY_GKP,
            noise,
            space=gkp_space,
            budget=gkp_budget.evaluations,
            seed=_cell_seed(seeds, i, j, 0),
            restarts=gkp_budget.restarts,
            popsize=gkp_budget.popsize,
            max_dim=max_dim,
        )
        np_rec = optimize_code(
            FAMILY_NP,
            noise,
            space=np_space,
            budget=np_budget.evaluations,
            seed=_cell_seed(seeds, i, j, 1),
            restarts=np_budget.restarts,
            popsize=np_budget.popsize,
            max_dim=max_dim,
        )
        base = baseline_fidelity(noise, dim=baseline_dim)
        obj = {
            "kind": "cell",
            "i": i,
            "j": j,
            "gamma_t": grid.gamma_values[i],
            "kappa_t": grid.kappa_values[j],
            "gkp": _record_payload(gkp_rec),
            "np": _record_payload(np_rec),
            "baseline": _fidelity_payload(base),
        }
        return cell, obj

    pending = [cell for cell in grid.cells() if cell not in completed]
    if workers > 1 and pending:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for cell, obj in pool.map(run_cell, pending):
                with lock:
                    completed[cell] = obj
                    if handle is not None:
                        handle.write(json.dumps(obj, sort_keys=True) + "\n")
                        handle.flush()
    else:
        for cell in pending:
            cell, obj = run_cell(cell)
            completed[cell] = obj
            if handle is not None:
                handle.write(json.dumps(obj, sort_keys=True) + "\n")
                handle.flush()
    if handle is not None:
        handle.close()

    n_g, n_k = grid.shape
    gkp_records: list[list[OptimizationRecord]] = []
    np_records: list[list[OptimizationRecord]] = []
    baselines: list[list[FidelityResult]] = []
    for i in range(n_g):
        gkp_row, np_row, base_row = [], [], []
        for j in range(n_k):
            obj = completed[(i, j)]
            noise = NoisePoint(grid.gamma_values[i], grid.kappa_values[j])
            gkp_row.append(_payload_record(obj["gkp"], noise))
            np_row.append(_payload_record(obj["np"], noise))
            base_row.append(_payload_fidelity(obj["baseline"]))
        gkp_records.append(gkp_row)
        np_records.append(np_row)
        baselines.append(base_row)

    gkp_f = np.array([[rec.best_fidelity.f_tilde for rec in row] for row in gkp_records])
    np_f = np.array([[rec.best_fidelity.f_tilde for rec in row] for row in np_records])
    flagged = np.array(
        [
            [
                gkp_records[i][j].best_fidelity.flagged or np_records[i][j].best_fidelity.flagged
                for j in range(n_k)
            ]
            for i in range(n_g)
        ]
    )
    delta_f = gkp_f - np_f
    regions = strict_regions(gkp_f, np_f)
    for i in range(n_g):
        for j in range(n_k):
            if flagged[i, j]:
                regions[i][j] = LABEL_UNDECIDED
    masked = delta_f.copy()
    masked[flagged] = np.nan
    boundary = extract_boundary(masked, grid)

    violations = []
    for i in range(n_g):
        for j in range(n_k):
            base_f = baselines[i][j].f_tilde
            if gkp_f[i, j] < base_f:
                violations.append((i, j, FAMILY_GKP))
            if np_f[i, j] < base_f:
                violations.append((i, j, FAMILY_NP))

    result = SweepResult(
        grid=grid,
        gkp=gkp_records,
        np=np_records,
        baseline=baselines,
        delta_f=delta_f,
        regions=regions,
        boundary=boundary,
        flagged=flagged,
        shape=None,  # filled below once the rest of the result exists
        config_hash=digest,
        baseline_violations=tuple(violations),
    )
    if n_g >= 3 and n_k >= 3:
        result = replace(result, shape=shape_diagnostics(result))
    return result


def _fmt(value: float) -> str:
    return FLOAT_FMT % value


_PARAM_COLUMNS = ("alpha", "beta_real", "delta", "f", "s", "r", "n")
CELLS_HEADER = (
    "gamma_t,kappa_t,family,f_tilde,f_lower,f_upper,"
    + ",".join(_PARAM_COLUMNS)
    + ",eps_trunc,tail_mass,n_kraus,dim,flagged"
)


def _cells_row(
    gamma_t: float,
    kappa_t: float,
    family: str,
    fid: FidelityResult,
    params: dict[str, float],
) -> str:
    diag = fid.diagnostics
    cols = [
        _fmt(gamma_t),
        _fmt(kappa_t),
        family,
        _fmt(fid.f_tilde),
        _fmt(fid.f_lower),
        _fmt(fid.f_upper),
    ]
    cols.extend(_fmt(params[name]) if name in params else "" for name in _PARAM_COLUMNS)
    cols.extend(
        [
            _fmt(diag.eps_trunc),
            _fmt(diag.tail_mass),
            str(diag.n_kraus),
            str(diag.dim),
            "true" if diag.flagged else "false",
        ]
    )
    return ",".join(cols)


def write_cells_csv(path: str | Path, result: SweepResult) -> None:
    lines = [CELLS_HEADER]
    for i, gamma_t in enumerate(result.grid.gamma_values):
        for j, kappa_t in enumerate(result.grid.kappa_values):
            gkp_rec = result.gkp[i][j]
            np_rec = result.np[i][j]
            lines.append(_cells_row(gamma_t, kappa_t, FAMILY_GKP, gkp_rec.best_fidelity, gkp_rec.best_params))
            lines.append(_cells_row(gamma_t, kappa_t, FAMILY_NP, np_rec.best_fidelity, np_rec.best_params))
            lines.append(_cells_row(gamma_t, kappa_t, FAMILY_TRIVIAL, result.baseline[i][j], {}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_boundary_csv(path: str | Path, boundary: list[list[tuple[float, float]]]) -> None:
    lines = ["polyline_id,vertex_order,gamma_t,kappa_t"]
    for pid, polyline in enumerate(boundary):
        for order, (gamma_t, kappa_t) in enumerate(polyline):
            lines.append(f"{pid},{order},{_fmt(gamma_t)},{_fmt(kappa_t)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_regions_csv(path: str | Path, result: SweepResult) -> None:
    lines = ["gamma_t,kappa_t,label"]
    for i, gamma_t in enumerate(result.grid.gamma_values):
        for j, kappa_t in enumerate(result.grid.kappa_values):
            lines.append(f"{_fmt(gamma_t)},{_fmt(kappa_t)},{result.regions[i][j]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_sweep_outputs(outdir: str | Path, result: SweepResult) -> dict[str, Path]:
    """Emit the three delimited outputs; returns their paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "cells": out / "cells.csv",
        "boundary": out / "boundary.csv",
        "regions": out / "regions.csv",
    }
    write_cells_csv(paths["cells"], result)
    write_boundary_csv(paths["boundary"], result.boundary)
    write_regions_csv(paths["regions"], result)
    return paths
