"""Convergence studies: one solver run per refinement level, errors and observed orders."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .fem import build_space, ritz_project
from .gronwall import GronwallParams, domination_ratio
from .problems import PROBLEMS, get_problem
from .stepper import Scheme, run

__all__ = [
    "ConfigError",
    "StudyError",
    "StudyConfig",
    "ReportRow",
    "ConvergenceReport",
    "coupled_m_tau",
    "observed_orders",
    "run_study",
    "load_config",
    "SCHEMA_VERSION",
    "GronwallVerifyReport",
    "gronwall_verify",
]

SCHEMA_VERSION = "1"
MODES = ("temporal", "spatial", "coupled")
COUPLINGS = ("linear", "three_halves")
# divisions caps for coupled studies in 3D, keyed by degree
COUPLED_3D_CAP = {1: 40, 2: 14}


class ConfigError(ValueError):
    """Invalid study or verification configuration."""


class StudyError(RuntimeError):
    def __init__(self, level: int, param: int, cause: BaseException):
        super().__init__(f"level {level} (param={param}) failed: {cause}")
        self.level = level
        self.param = param


@dataclass(frozen=True)
class StudyConfig:
    """Refinement study description.

    ``levels`` are mesh divisions for spatial and coupled studies and delay
    steps ``m_tau`` (``dt = tau / m_tau``) for temporal ones. Temporal studies
    hold ``divisions`` fixed, spatial studies hold ``m_tau`` fixed.
    """

    problem: str = "mackey_glass_2d"
    alpha: float = 0.4
    degree: int = 1
    mode: str = "spatial"
    levels: tuple[int, ...] = (5, 10, 20, 40)
    divisions: int = 40
    m_tau: int = 10
    coupling: Optional[str] = None
    tol: float = 1e-12
    out: Optional[str] = None
    error_reference: str = "exact"
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        self.validate()

    @property
    def coupling_rule(self) -> str:
        if self.coupling is not None:
            return self.coupling
        return "linear" if self.degree == 1 else "three_halves"

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.degree not in (1, 2):
            raise ConfigError(f"degree must be 1 or 2, got {self.degree}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.levels:
            raise ConfigError("at least one refinement level is required")
        if any(v < 1 for v in self.levels):
            raise ConfigError("refinement levels must be positive integers")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError(f"refinement levels must be strictly increasing, got {list(self.levels)}")
        if self.divisions < 1 or self.m_tau < 1:
            raise ConfigError("divisions and m_tau must be positive")
        if self.coupling is not None and self.coupling not in COUPLINGS:
            raise ConfigError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if self.error_reference not in ("exact", "ritz"):
            raise ConfigError("error_reference must be 'exact' or 'ritz'")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.mode == "coupled" and PROBLEMS[self.problem]().dim == 3:
            cap = COUPLED_3D_CAP[self.degree]
            if max(self.levels) > cap:
                raise ConfigError(f"coupled 3D P{self.degree} studies are capped at {cap} divisions")

    def plan(self) -> list[tuple[int, int, int]]:
        """``(param, divisions, m_tau)`` for every level."""
        problem = get_problem(self.problem, self.alpha)
        out = []
        for p in self.levels:
            if self.mode == "temporal":
                out.append((p, self.divisions, p))
            elif self.mode == "spatial":
                out.append((p, p, self.m_tau))
            else:
                out.append((p, p, coupled_m_tau(p, self.coupling_rule, problem.tau, problem.T)))
        return out


def coupled_m_tau(divisions: int, rule: str, tau: float, T: float) -> int:
    """Delay steps whose step count ``N = m_tau T / tau`` is closest to the coupling target.

    ``linear`` targets ``N = divisions`` and ``three_halves`` targets
    ``N = divisions^(3/2)``; ``m_tau`` is at least 1.
    """
    target = divisions if rule == "linear" else divisions**1.5
    return max(1, int(round(target * tau / T)))


def _parse_value(key: str, raw: str):
    kinds = {f.name: f.type for f in fields(StudyConfig)}
    if key not in kinds:
        raise ConfigError(f"unknown config key {key!r}")
    raw = raw.strip()
    if key == "levels":
        try:
            return tuple(int(v) for v in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"levels must be integers, got {raw!r}") from None
    if key in ("alpha", "tol"):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from None
    if key in ("degree", "divisions", "m_tau", "jobs"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
    if key in ("coupling", "out") and raw.lower() in ("", "none"):
        return None
    return raw


def load_config(path: Optional[str | Path] = None, **overrides) -> StudyConfig:
    """Read a flat ``key = value`` file (``#`` comments) and apply overrides."""
    values: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            values[key] = _parse_value(key, raw)
    for key, val in overrides.items():
        if val is None:
            continue
        values[key] = _parse_value(key, val) if isinstance(val, str) else val
    try:
        return StudyConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def observed_orders(params, errors) -> list[Optional[float]]:
    """``log(e_i / e_{i+1}) / log(p_{i+1} / p_i)``; the first entry is ``None``."""
    out: list[Optional[float]] = [None]
    for (p0, e0), (p1, e1) in zip(zip(params, errors), zip(params[1:], errors[1:])):
        if e0 > 0 and e1 > 0:
            out.append(math.log(e0 / e1) / math.log(p1 / p0))
        else:
            out.append(None)
    return out


def _sig_error(v: float) -> str:
    return f"{v:.4e}"


def _sig_order(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.5g}"


@dataclass
class ReportRow:
    level: int
    param: int
    error: float
    order: Optional[float]


@dataclass
class ConvergenceReport:
    rows: list[ReportRow]
    metadata: dict = field(default_factory=dict)

    @property
    def errors(self) -> list[float]:
        return [r.error for r in self.rows]

    @property
    def orders(self) -> list[Optional[float]]:
        return [r.order for r in self.rows]

    @property
    def finest_order(self) -> Optional[float]:
        return self.rows[-1].order if self.rows else None

    def rounded(self) -> "ConvergenceReport":
        """Copy with values rounded exactly as they are written to CSV."""
        rows = [
            ReportRow(r.level, r.param, float(_sig_error(r.error)),
                      None if r.order is None else float(_sig_order(r.order)))
            for r in self.rows
        ]
        return ConvergenceReport(rows, dict(self.metadata))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "param", "error", "order"])
            for r in self.rows:
                w.writerow([r.level, r.param, _sig_error(r.error), _sig_order(r.order)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "ConvergenceReport":
        with open(path, newline="") as fh:
            rows = [
                ReportRow(int(d["level"]), int(d["param"]), float(d["error"]),
                          float(d["order"]) if d["order"] else None)
                for d in csv.DictReader(fh)
            ]
        return cls(rows)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "metadata": self.metadata, "rows": [asdict(r) for r in self.rows]}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def from_json(cls, path: str | Path) -> "ConvergenceReport":
        data = json.loads(Path(path).read_text())
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {data.get('schema_version')!r}")
        return cls([ReportRow(**r) for r in data["rows"]], data.get("metadata", {}))

    def format_table(self) -> str:
        lines = [f"{'level':>5} {'param':>6} {'error':>12} {'order':>8}"]
        for r in self.rows:
            lines.append(f"{r.level:>5} {r.param:>6} {_sig_error(r.error):>12} {_sig_order(r.order) or '*':>8}")
        return "\n".join(lines)


def _run_level(config: StudyConfig, divisions: int, m_tau: int) -> dict:
    problem = get_problem(config.problem, config.alpha)
    space = build_space((problem.dim, divisions), config.degree)
    scheme = Scheme(problem, space, m_tau, rel_tol=config.tol)
    result = run(problem, space, m_tau, scheme=scheme)
    error = result.error
    if config.error_reference == "ritz":
        R = ritz_project(space, scheme.stiffness, lambda x: problem.exact_grad(x, problem.T), config.tol)
        d = result.U - R
        error = math.sqrt(float(d @ (scheme.mass @ d)))
    return {
        "error": error,
        "steps": result.steps,
        "dt": result.dt,
        "dofs": space.num_free,
        "seconds": result.seconds,
    }


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Run every level, compute observed orders and write CSV/JSON when ``out`` is set."""
    plan = config.plan()
    t0 = time.perf_counter()
    results: list[Optional[dict]] = [None] * len(plan)
    if config.jobs > 1 and len(plan) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(_run_level, config, d, m) for _, d, m in plan]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    raise StudyError(i, plan[i][0], exc) from exc
    else:
        for i, (p, d, m) in enumerate(plan):
            try:
                results[i] = _run_level(config, d, m)
            except Exception as exc:
                raise StudyError(i, p, exc) from exc

    params = [p for p, _, _ in plan]
    errors = [r["error"] for r in results]
    orders = observed_orders(params, errors)
    rows = [ReportRow(i, p, e, o) for i, (p, e, o) in enumerate(zip(params, errors, orders))]
    meta = {
        "problem": config.problem,
        "alpha": config.alpha,
        "degree": config.degree,
        "mode": config.mode,
        "coupling": config.coupling_rule if config.mode == "coupled" else None,
        "error_reference": config.error_reference,
        "levels": [
            {"param": p, "divisions": d, "m_tau": m, **res}
            for (p, d, m), res in zip(plan, results)
        ],
        "seconds": time.perf_counter() - t0,
    }
    report = ConvergenceReport(rows, meta)
    if config.out:
        base = Path(config.out)
        if base.suffix in (".csv", ".json"):
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        report.to_csv(base.with_suffix(".csv"))
        report.to_json(base.with_suffix(".json"))
    return report



@dataclass
class GronwallVerifyReport:
    alpha: float
    dt: float
    dt_star: float
    m: int
    n: int
    trials: int
    max_ratio: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= 1.0 + 1e-9


def gronwall_verify(
    alpha: float,
    dt: Optional[float],
    lambdas,
    m: int,
    n: int,
    trials: int,
    seed: int = 0,
    f_scale: float = 1.0,
) -> GronwallVerifyReport:
    """Compare the extremal recursion with the bound over random non-negative data.

    ``dt=None`` selects ``dt_star / 2`` (or 0.01 when ``lambda_1 = 0``). A step
    larger than ``dt_star`` is a :class:`ConfigError` naming ``dt_star``.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if m < 1 or n < 1 or trials < 1:
        raise ConfigError("m, n and trials must be positive integers")
    try:
        probe = GronwallParams(alpha, 1.0, tuple(lambdas), m)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dt_star = probe.dt_star
    if dt is None:
        dt = dt_star / 2 if math.isfinite(dt_star) else 0.01
    if not dt > 0:
        raise ConfigError("dt must be positive")
    if dt > dt_star:
        raise ConfigError(f"dt={dt:g} violates the step restriction dt <= dt*={dt_star:.6g}")
    params = GronwallParams(alpha, dt, tuple(lambdas), m)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        initial = rng.uniform(0.0, 1.0, m + 1)
        f = f_scale * rng.uniform(0.0, 1.0, n)
        worst = max(worst, domination_ratio(params, initial, f))
    return GronwallVerifyReport(alpha, dt, dt_star, m, n, trials, worst)
