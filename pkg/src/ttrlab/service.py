"""JSON-facing layer: specification documents, report documents, handlers.

A specification describes one reversibility problem: the dimensions, the
dynamics (either a joint unitary or a joint Hamiltonian, the latter given
in total or split into system, ancilla and interaction parts), the forward
ancilla, the prior, and optionally a candidate reverse ancilla plus
tolerance overrides.  Handlers turn a specification into core objects, run
the requested check and return a report that echoes the specification and
every resolved tolerance, so a report can be reproduced from its own
content.

Matrices travel as row-major lists of [real, imag] pairs.  Reports and CSV
tables render floats through repr, which round-trips exactly: repeated
runs with the same inputs produce byte-identical output.
"""

from __future__ import annotations

import json
import time
from collections.abc import Callable, Sequence
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .approx import (
    SECOND_ORDER_MODES,
    HamiltonianDilation,
    approx_check,
    is_steady,
)
from .collision import CollisionSpec, SequentialRun, sequential_csv, sequential_reverse, total_gap_slope
from .examples import NamedExample, make_cx, make_thermal, make_unital, make_xx, partial_swap
from .linalg import RankDeficiencyError, require_density, require_full_rank
from .policy import DEFAULT_POLICY, NumericPolicy
from .reversal import (
    Dilation,
    TTRInstance,
    bayes_residual,
    choi_gap,
    exact_ttr_residual,
    feasible_xi_prime,
    product_preservation_check,
)
from .serialize import matrix_to_pairs, pairs_to_matrix

EXIT_FEASIBLE = 0
EXIT_INFEASIBLE = 1
EXIT_UNDETERMINED = 2
EXIT_RANK_LOSS = 3
EXIT_USAGE = 64

POLICY_FILE_ENV = "TTRLAB_POLICY_FILE"

_POLICY_FIELDS = ("rank_tol", "cptp_tol", "equality_tol", "degeneracy_gap")

Pairs = list[list[list[float]]]


class SpecError(ValueError):
    """The input document cannot be turned into core objects."""


class UsageError(ValueError):
    """The requested options do not fit the spec kind or each other."""


class PolicyOverrides(BaseModel):
    """Partial tolerance settings; unset fields keep their defaults."""

    model_config = ConfigDict(extra="forbid")

    rank_tol: float | None = Field(default=None, gt=0)
    cptp_tol: float | None = Field(default=None, gt=0)
    equality_tol: float | None = Field(default=None, gt=0)
    degeneracy_gap: float | None = Field(default=None, gt=0)


class SpecFile(BaseModel):
    """One reversibility problem, ready to serialize.

    Exactly one family of dynamics must be present: a joint unitary, or a
    joint Hamiltonian (total, split parts, or both; when both are given
    they must agree).  Collision checks additionally need the interaction
    part split out.
    """

    model_config = ConfigDict(extra="forbid")

    dim_s: int = Field(ge=1)
    dim_e: int = Field(ge=1)
    unitary: Pairs | None = None
    hamiltonian: Pairs | None = None
    h_s: Pairs | None = None
    h_e: Pairs | None = None
    h_i: Pairs | None = None
    g: float = 1.0
    collision_rate: float | None = Field(default=None, ge=0)
    xi: Pairs
    gamma: Pairs
    xi_prime: Pairs | None = None
    policy: PolicyOverrides | None = None

    @field_validator(
        "unitary", "hamiltonian", "h_s", "h_e", "h_i", "xi", "gamma", "xi_prime", mode="before"
    )
    @classmethod
    def _canonical_pairs(cls, value: object, info: Any) -> Pairs | None:
        if value is None:
            return None
        return matrix_to_pairs(pairs_to_matrix(value, info.field_name))

    @model_validator(mode="after")
    def _check_structure(self) -> SpecFile:
        has_unitary = self.unitary is not None
        has_hamiltonian = any(
            getattr(self, name) is not None for name in ("hamiltonian", "h_s", "h_e", "h_i")
        )
        if has_unitary == has_hamiltonian:
            raise ValueError(
                "spec must provide exactly one of a joint unitary or a joint Hamiltonian"
            )
        d = self.dim_s * self.dim_e
        expected = {
            "unitary": (d, d),
            "hamiltonian": (d, d),
            "h_s": (self.dim_s, self.dim_s),
            "h_e": (self.dim_e, self.dim_e),
            "h_i": (d, d),
            "xi": (self.dim_e, self.dim_e),
            "gamma": (self.dim_s, self.dim_s),
            "xi_prime": (self.dim_e, self.dim_e),
        }
        for name, shape in expected.items():
            pairs = getattr(self, name)
            if pairs is None:
                continue
            got = (len(pairs), len(pairs[0]))
            if got != shape:
                raise ValueError(
                    f"{name} has shape {got}, expected {shape} for"
                    f" dim_s={self.dim_s}, dim_e={self.dim_e}"
                )
        if self.hamiltonian is not None and any(
            getattr(self, name) is not None for name in ("h_s", "h_e", "h_i")
        ):
            total = pairs_to_matrix(self.hamiltonian, "hamiltonian")
            defect = float(np.linalg.norm(total - self._assembled_hamiltonian()))
            if defect > 1e-9 * max(1.0, float(np.linalg.norm(total))):
                raise ValueError(
                    f"joint Hamiltonian disagrees with its split parts (defect {defect:.3e})"
                )
        return self

    def matrix(self, name: str) -> np.ndarray | None:
        pairs = getattr(self, name)
        return None if pairs is None else pairs_to_matrix(pairs, name)

    def _assembled_hamiltonian(self) -> np.ndarray:
        d = self.dim_s * self.dim_e
        h = np.zeros((d, d), dtype=complex)
        if self.h_s is not None:
            h += np.kron(pairs_to_matrix(self.h_s, "h_s"), np.eye(self.dim_e))
        if self.h_e is not None:
            h += np.kron(np.eye(self.dim_s), pairs_to_matrix(self.h_e, "h_e"))
        if self.h_i is not None:
            h += pairs_to_matrix(self.h_i, "h_i")
        return h

    def joint_hamiltonian(self) -> np.ndarray:
        if self.hamiltonian is not None:
            return pairs_to_matrix(self.hamiltonian, "hamiltonian")
        return self._assembled_hamiltonian()


class SlopeFitModel(BaseModel):
    exponent: float
    r_squared: float | None = None
    points_used: int


class GridPointModel(BaseModel):
    dt: float
    mismatch: float


class SequentialRunModel(BaseModel):
    """Numeric content of a stepwise reversal run."""

    total_time: float
    steps: int
    dt: float
    per_step_gaps: list[float]
    cumulative_gaps: list[float]
    min_eig_priors: list[float]
    total_gap: float
    xi_primes: list[Pairs]
    prior_trajectory: list[Pairs]


class SweepCellModel(BaseModel):
    steps: int
    total_gap: float


class ReportFile(BaseModel):
    """Self-contained outcome of one command.

    The spec echo plus the options echo reproduce the run; the policy echo
    records every resolved tolerance.
    """

    model_config = ConfigDict(extra="forbid")

    version: str
    command: str
    options: dict[str, Any]
    spec: SpecFile
    policy: dict[str, float]
    verdicts: dict[str, bool | str]
    residuals: dict[str, float]
    witness_xi_prime: Pairs | None = None
    mismatch_grid: list[GridPointModel] | None = None
    sequential_run: SequentialRunModel | None = None
    sequential_sweep: list[SweepCellModel] | None = None
    slope_fits: dict[str, SlopeFitModel] | None = None
    wall_time_seconds: float | None = None
    exit_code: int


def _loc_path(loc: Sequence[object]) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out or "spec"


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = _loc_path(err["loc"])
        msg = str(err["msg"]).removeprefix("Value error, ")
        lines.append(msg if msg.startswith(path) else f"{path}: {msg}")
    return "; ".join(lines)


def parse_spec(data: object) -> SpecFile:
    """Validate a decoded JSON document against the spec schema."""
    try:
        return SpecFile.model_validate(data)
    except ValidationError as exc:
        raise SpecError(_format_validation_error(exc)) from exc


def load_spec(path: str | Path) -> SpecFile:
    """Read and validate a spec document; syntax errors carry line and column."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_spec(data)


def load_policy_file(path: str | Path) -> PolicyOverrides:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read policy file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return PolicyOverrides.model_validate(data)
    except ValidationError as exc:
        raise SpecError(f"policy file {path}: {_format_validation_error(exc)}") from exc


def merge_policy(spec: SpecFile, base: PolicyOverrides | None) -> SpecFile:
    """Fold file-level defaults under the spec's own overrides."""
    if base is None:
        return spec
    merged = base.model_dump(exclude_none=True)
    if spec.policy is not None:
        merged.update(spec.policy.model_dump(exclude_none=True))
    return spec.model_copy(update={"policy": PolicyOverrides(**merged)})


def resolve_policy(spec: SpecFile) -> NumericPolicy:
    values = {name: getattr(DEFAULT_POLICY, name) for name in _POLICY_FIELDS}
    if spec.policy is not None:
        values.update(spec.policy.model_dump(exclude_none=True))
    return NumericPolicy(**values)


def _policy_echo(policy: NumericPolicy) -> dict[str, float]:
    return {name: float(getattr(policy, name)) for name in _POLICY_FIELDS}


def build_instance(
    spec: SpecFile, policy: NumericPolicy, dt: float | None = None
) -> TTRInstance:
    """Concrete instance for a spec; Hamiltonian specs need a duration dt."""
    if spec.unitary is not None and dt is not None:
        raise UsageError("dt applies only to Hamiltonian specs")
    if spec.unitary is None and dt is None:
        raise UsageError("a Hamiltonian spec needs dt to define the collision unitary")
    if dt is not None and dt <= 0:
        raise UsageError("dt must be positive")
    try:
        if spec.unitary is not None:
            dilation = Dilation(
                spec.dim_s, spec.dim_e, spec.matrix("unitary"), spec.matrix("xi"), policy
            )
        else:
            hd = HamiltonianDilation(
                spec.dim_s, spec.dim_e, spec.joint_hamiltonian(), spec.matrix("xi"), spec.g, policy
            )
            dilation = hd.dilation(dt)
        return TTRInstance(dilation, spec.matrix("gamma"), spec.matrix("xi_prime"), policy)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def build_hamiltonian_dilation(spec: SpecFile, policy: NumericPolicy) -> HamiltonianDilation:
    if spec.unitary is not None:
        raise UsageError("this check needs a Hamiltonian spec, not a unitary one")
    try:
        return HamiltonianDilation(
            spec.dim_s, spec.dim_e, spec.joint_hamiltonian(), spec.matrix("xi"), spec.g, policy
        )
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def build_collision_spec(spec: SpecFile, policy: NumericPolicy) -> CollisionSpec:
    if spec.unitary is not None:
        raise UsageError("collision checks need a Hamiltonian spec, not a unitary one")
    if spec.h_i is None:
        raise UsageError("collision checks need the interaction Hamiltonian h_i split out")
    h_s = spec.matrix("h_s")
    h_e = spec.matrix("h_e")
    kwargs: dict[str, float] = {}
    if spec.collision_rate is not None:
        kwargs["collision_rate"] = spec.collision_rate
    try:
        return CollisionSpec(
            dim_s=spec.dim_s,
            dim_e=spec.dim_e,
            h_s=np.zeros((spec.dim_s, spec.dim_s)) if h_s is None else h_s,
            h_e=np.zeros((spec.dim_e, spec.dim_e)) if h_e is None else h_e,
            h_i=spec.matrix("h_i"),
            xi=spec.matrix("xi"),
            g=spec.g,
            policy=policy,
            **kwargs,
        )
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def run_check_exact(
    spec: SpecFile,
    *,
    dt: float | None = None,
    tol: float | None = None,
    timing: bool = False,
) -> ReportFile:
    """Exact reversibility of one dilation, with or without a candidate ancilla.

    With a candidate the verdict follows its recovery gap; without one the
    affine feasibility search runs and a feasible verdict ships the witness
    it certified.
    """
    start = time.perf_counter()
    policy = resolve_policy(spec)
    gate = policy.equality_tol if tol is None else float(tol)
    if gate <= 0:
        raise UsageError("tol must be positive")
    inst = build_instance(spec, policy, dt)

    verdicts: dict[str, bool | str] = {}
    residuals: dict[str, float] = {}
    witness: Pairs | None = None

    product = product_preservation_check(inst.dilation, inst.gamma, policy)
    verdicts["product_preservation"] = bool(product.preserved)
    residuals["product_defect"] = float(product.defect)

    if inst.xi_prime is not None:
        residuals["spectral_residual"] = float(exact_ttr_residual(inst))
        gap = float(choi_gap(inst))
        residuals["choi_gap"] = gap
        residuals["bayes_residual"] = float(bayes_residual(inst))
        feasible = gap <= gate
        verdicts["ttr"] = bool(feasible)
        verdicts["verdict"] = "feasible" if feasible else "infeasible"
        witness = matrix_to_pairs(inst.xi_prime)
        exit_code = EXIT_FEASIBLE if feasible else EXIT_INFEASIBLE
    else:
        found = feasible_xi_prime(inst.dilation, inst.gamma, policy)
        verdicts["verdict"] = found.verdict
        verdicts["degenerate_spectra"] = bool(found.degenerate_spectra)
        residuals["lstsq_residual"] = float(found.lstsq_residual)
        residuals["witness_min_eigenvalue"] = float(found.min_eigenvalue)
        if found.spectral_residual is not None:
            residuals["spectral_residual"] = float(found.spectral_residual)
        if found.choi_gap is not None:
            residuals["choi_gap"] = float(found.choi_gap)
        if found.verdict == "feasible":
            witness = matrix_to_pairs(found.witness_xi_prime)
            residuals["bayes_residual"] = float(
                bayes_residual(inst.with_xi_prime(found.witness_xi_prime))
            )
            verdicts["ttr"] = True
            exit_code = EXIT_FEASIBLE
        elif found.verdict == "infeasible":
            verdicts["ttr"] = False
            exit_code = EXIT_INFEASIBLE
        else:
            verdicts["ttr"] = "undetermined"
            exit_code = EXIT_UNDETERMINED

    options: dict[str, Any] = {"tol": float(gate)}
    if dt is not None:
        options["dt"] = float(dt)
    return ReportFile(
        version=__version__,
        command="check-exact",
        options=options,
        spec=spec,
        policy=_policy_echo(policy),
        verdicts=verdicts,
        residuals=residuals,
        witness_xi_prime=witness,
        wall_time_seconds=time.perf_counter() - start if timing else None,
        exit_code=exit_code,
    )


def run_approx(
    spec: SpecFile,
    *,
    order: int = 2,
    dt_min: float = 1e-3,
    dt_max: float = 1e-1,
    points: int = 12,
    mode: str = "general",
    timing: bool = False,
) -> tuple[ReportFile, str]:
    """Order-matching residuals plus the measured mismatch decay on a dt grid.

    Returns the report and a two-column CSV of the grid.  A steady prior
    leaves the mismatch at the numerical floor, reported as such instead of
    a slope.
    """
    start = time.perf_counter()
    if order not in (1, 2):
        raise UsageError("order must be 1 or 2")
    if points < 6:
        raise UsageError(f"scaling fit needs at least 6 grid points, got {points}")
    if not 0 < dt_min < dt_max:
        raise UsageError("need 0 < dt-min < dt-max")
    if mode not in SECOND_ORDER_MODES:
        raise UsageError(f"mode must be one of {', '.join(SECOND_ORDER_MODES)}")
    policy = resolve_policy(spec)
    hd = build_hamiltonian_dilation(spec, policy)
    try:
        gamma = require_density(spec.matrix("gamma"), policy, "prior")
        require_full_rank(gamma, policy, "prior")
        xi_prime = spec.matrix("xi_prime")
        # absent candidate: try to undo the collision with the unchanged ancilla
        xi_prime = hd.xi if xi_prime is None else require_density(xi_prime, policy, "reverse ancilla")
    except ValueError as exc:
        raise SpecError(str(exc)) from exc

    grid = tuple(float(t) for t in np.logspace(np.log10(dt_min), np.log10(dt_max), points))
    try:
        outcome = approx_check(hd, gamma, xi_prime, order, mode, grid)
    except RankDeficiencyError:
        raise
    except ValueError as exc:
        # mode preconditions (steady prior, commuting prior, flat prior)
        raise UsageError(str(exc)) from exc

    verdicts: dict[str, bool | str] = {"steady_prior": bool(is_steady(hd, gamma))}
    residuals = {name: float(value) for name, value in outcome.residual_terms}
    verdicts["order_matched"] = bool(outcome.max_residual <= policy.equality_tol)
    slope_fits: dict[str, SlopeFitModel] | None = None
    if outcome.slope_fit is None:
        verdicts["mismatch_scaling"] = "floor"
    else:
        verdicts["mismatch_scaling"] = "fitted"
        slope_fits = {
            "mismatch": SlopeFitModel(
                exponent=outcome.slope_fit.exponent,
                r_squared=outcome.slope_fit.r_squared,
                points_used=outcome.slope_fit.points_used,
            )
        }

    csv = "dt,mismatch\n" + "".join(
        f"{t!r},{m!r}\n" for t, m in zip(outcome.dt_grid, outcome.mismatches)
    )
    report = ReportFile(
        version=__version__,
        command="approx",
        options={
            "order": order,
            "dt_min": float(dt_min),
            "dt_max": float(dt_max),
            "points": points,
            "mode": mode,
        },
        spec=spec,
        policy=_policy_echo(policy),
        verdicts=verdicts,
        residuals=residuals,
        mismatch_grid=[
            GridPointModel(dt=t, mismatch=float(m))
            for t, m in zip(outcome.dt_grid, outcome.mismatches)
        ],
        slope_fits=slope_fits,
        wall_time_seconds=time.perf_counter() - start if timing else None,
        exit_code=EXIT_FEASIBLE if verdicts["order_matched"] else EXIT_INFEASIBLE,
    )
    return report, csv


def _run_model(run: SequentialRun) -> SequentialRunModel:
    return SequentialRunModel(
        total_time=float(run.total_time),
        steps=int(run.steps),
        dt=float(run.dt),
        per_step_gaps=[float(g) for g in run.per_step_gaps],
        cumulative_gaps=[float(g) for g in run.cumulative_gaps],
        min_eig_priors=[float(m) for m in run.min_eig_priors],
        total_gap=float(run.total_gap),
        xi_primes=[matrix_to_pairs(x) for x in run.xi_primes],
        prior_trajectory=[matrix_to_pairs(g) for g in run.prior_trajectory],
    )


def run_collision(
    spec: SpecFile,
    *,
    total_time: float = 1.0,
    step_counts: Sequence[int] = (1,),
    xi_policy: str = "constant",
    seed: int = 0,
    timing: bool = False,
) -> tuple[ReportFile, str]:
    """Stepwise reversal of a repeated collision; one run or a step-count sweep.

    A single count serializes the full run with a per-step CSV; a list of
    counts sweeps them in the given order and fits the decay of the total
    gap against the step count.  The seed is echoed for reproducibility
    bookkeeping; fixed-spacing runs do not consume randomness.
    """
    start = time.perf_counter()
    if xi_policy not in ("constant", "solve"):
        raise UsageError("xi-policy must be constant or solve")
    if total_time <= 0:
        raise UsageError("total time must be positive")
    counts = [int(n) for n in step_counts]
    if not counts or any(n < 1 for n in counts):
        raise UsageError("step counts must be positive integers")
    policy = resolve_policy(spec)
    cspec = build_collision_spec(spec, policy)
    try:
        gamma = require_density(spec.matrix("gamma"), policy, "prior")
        require_full_rank(gamma, policy, "prior")
    except ValueError as exc:
        raise SpecError(str(exc)) from exc

    verdicts: dict[str, bool | str] = {}
    residuals: dict[str, float] = {}
    slope_fits: dict[str, SlopeFitModel] | None = None
    run_model: SequentialRunModel | None = None
    sweep: list[SweepCellModel] | None = None

    if len(counts) == 1:
        run = sequential_reverse(cspec, gamma, xi_policy, total_time, counts[0])
        csv = sequential_csv(run)
        run_model = _run_model(run)
        residuals["total_gap"] = float(run.total_gap)
        residuals["max_per_step_gap"] = float(max(run.per_step_gaps))
        residuals["min_prior_eigenvalue"] = float(min(run.min_eig_priors))
        feasible = run.total_gap <= policy.equality_tol
    else:
        # cells run in the order given; rows keep that order
        cells = []
        for n in counts:
            run = sequential_reverse(cspec, gamma, xi_policy, total_time, n)
            cells.append((n, float(run.total_gap)))
        sweep = [SweepCellModel(steps=n, total_gap=g) for n, g in cells]
        csv = "steps,total_gap\n" + "".join(f"{n},{g!r}\n" for n, g in cells)
        for n, g in cells:
            residuals[f"total_gap_steps_{n}"] = g
        try:
            slope = total_gap_slope([n for n, _ in cells], [g for _, g in cells])
        except ValueError:
            verdicts["gap_scaling"] = "floor"
        else:
            verdicts["gap_scaling"] = "fitted"
            used = sum(1 for _, g in cells if g > 1e-13)
            slope_fits = {
                "step_sweep": SlopeFitModel(exponent=float(slope), points_used=used)
            }
        finest = max(cells, key=lambda cell: cell[0])
        feasible = finest[1] <= policy.equality_tol

    verdicts["ttr_sequence"] = bool(feasible)
    report = ReportFile(
        version=__version__,
        command="collision",
        options={
            "total_time": float(total_time),
            "steps": counts,
            "xi_policy": xi_policy,
            "seed": int(seed),
        },
        spec=spec,
        policy=_policy_echo(policy),
        verdicts=verdicts,
        residuals=residuals,
        sequential_run=run_model,
        sequential_sweep=sweep,
        slope_fits=slope_fits,
        wall_time_seconds=time.perf_counter() - start if timing else None,
        exit_code=EXIT_FEASIBLE if feasible else EXIT_INFEASIBLE,
    )
    return report, csv


_EXAMPLES: dict[str, Callable[[], NamedExample]] = {
    "unital": lambda: make_unital(2, partial_swap(0.8), np.eye(2) / 2),
    "controlled_x": lambda: make_cx(0.3, 0.7),
    "exchange_xx": lambda: make_xx(
        0.7,
        np.array([[0.8, 0.15], [0.15, 0.2]]),
        np.array([[0.5, 0.2], [0.2, 0.5]]),
    ),
    "thermal": lambda: make_thermal(
        1.0, np.diag([0.5, -0.5]), np.diag([0.5, -0.5]), partial_swap(0.7)
    ),
}


def example_names() -> tuple[str, ...]:
    return tuple(sorted(_EXAMPLES))


def example_spec(name: str) -> SpecFile:
    """Canonical spec document for a named closed-form example."""
    try:
        builder = _EXAMPLES[name]
    except KeyError:
        raise UsageError(
            f"unknown example {name!r}; choose from {', '.join(example_names())}"
        ) from None
    example = builder()
    inst = example.instance
    d = inst.dilation
    return SpecFile(
        dim_s=d.dim_s,
        dim_e=d.dim_e,
        unitary=matrix_to_pairs(d.unitary),
        xi=matrix_to_pairs(d.xi),
        gamma=matrix_to_pairs(inst.gamma),
        xi_prime=None if inst.xi_prime is None else matrix_to_pairs(inst.xi_prime),
    )


def report_json(report: ReportFile) -> str:
    """Canonical byte-stable rendering: sorted keys, two-space indent."""
    payload = report.model_dump(mode="json", exclude_none=True)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def spec_json(spec: SpecFile) -> str:
    payload = spec.model_dump(mode="json", exclude_none=True)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


class CheckExactRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: SpecFile
    dt: float | None = None
    tol: float | None = None
    timing: bool = False


class ApproxRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: SpecFile
    order: int = 2
    dt_min: float = 1e-3
    dt_max: float = 1e-1
    points: int = 12
    mode: str = "general"
    timing: bool = False


class CollisionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: SpecFile
    total_time: float = 1.0
    steps: list[int] = Field(default_factory=lambda: [1])
    xi_policy: str = "constant"
    seed: int = 0
    timing: bool = False


class RunResponse(BaseModel):
    report: ReportFile
    csv: str | None = None


@contextmanager
def _http_errors():
    from fastapi import HTTPException

    try:
        yield
    except UsageError as exc:
        raise HTTPException(422, {"kind": "usage", "message": str(exc)}) from exc
    except SpecError as exc:
        raise HTTPException(422, {"kind": "spec", "message": str(exc)}) from exc
    except RankDeficiencyError as exc:
        raise HTTPException(422, {"kind": "rank_loss", "message": str(exc)}) from exc


def create_app():
    """Web front end over the handlers; imported on demand to keep CLI startup light."""
    from fastapi import FastAPI

    app = FastAPI(title="ttrlab", version=__version__)

    @app.post("/check-exact", response_model=RunResponse, response_model_exclude_none=True)
    def check_exact(req: CheckExactRequest) -> RunResponse:
        with _http_errors():
            report = run_check_exact(req.spec, dt=req.dt, tol=req.tol, timing=req.timing)
        return RunResponse(report=report)

    @app.post("/approx", response_model=RunResponse, response_model_exclude_none=True)
    def approx(req: ApproxRequest) -> RunResponse:
        with _http_errors():
            report, csv = run_approx(
                req.spec,
                order=req.order,
                dt_min=req.dt_min,
                dt_max=req.dt_max,
                points=req.points,
                mode=req.mode,
                timing=req.timing,
            )
        return RunResponse(report=report, csv=csv)

    @app.post("/collision", response_model=RunResponse, response_model_exclude_none=True)
    def collision(req: CollisionRequest) -> RunResponse:
        with _http_errors():
            report, csv = run_collision(
                req.spec,
                total_time=req.total_time,
                step_counts=req.steps,
                xi_policy=req.xi_policy,
                seed=req.seed,
                timing=req.timing,
            )
        return RunResponse(report=report, csv=csv)

    @app.get("/examples")
    def examples() -> dict[str, list[str]]:
        return {"names": list(example_names())}

    @app.get("/examples/{name}", response_model=SpecFile, response_model_exclude_none=True)
    def example(name: str) -> SpecFile:
        with _http_errors():
            return example_spec(name)

    return app
