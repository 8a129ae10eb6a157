"""Manufactured solutions, convergence studies and report emission."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .dofs import interpolate
from .mesh import FAMILIES, generate_mesh
from .norms import coercivity_bracket, consistency_functional, dual_norm, energy_norm
from .scheme import LOAD_VARIANTS, Discretization, SolverError, assemble, solve

log = logging.getLogger(__name__)

CSV_COLUMNS = ("family", "n", "h", "k", "energy_error", "eoc_energy", "dual_Eh", "eoc_Eh",
               "dual_frakEh", "eoc_frakEh")

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    u: Field
    grad: Field  # returns (npoints, 2)
    laplacian: Field
    degree: Optional[int] = None  # polynomial degree, None for smooth non-polynomial data

    def f(self, p: np.ndarray) -> np.ndarray:
        return -self.laplacian(p)

    @property
    def regularity(self) -> str:
        return "smooth" if self.degree is None else f"degree {self.degree}"


def _sinsin() -> ManufacturedCase:
    pi = np.pi
    return ManufacturedCase(
        "sinsin",
        lambda p: np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1]),
        lambda p: pi * np.column_stack([np.cos(pi * p[:, 0]) * np.sin(pi * p[:, 1]),
                                        np.sin(pi * p[:, 0]) * np.cos(pi * p[:, 1])]),
        lambda p: -2 * pi**2 * np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1]),
    )


def _bubble() -> ManufacturedCase:
    def u(p):
        x, y = p[:, 0], p[:, 1]
        return x * (1 - x) * y * (1 - y)

    def grad(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([(1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)])

    def lap(p):
        x, y = p[:, 0], p[:, 1]
        return -2 * y * (1 - y) - 2 * x * (1 - x)

    return ManufacturedCase("bubble", u, grad, lap, degree=4)


def _cubic() -> ManufacturedCase:
    return ManufacturedCase(
        "cubic",
        lambda p: p[:, 0] ** 2 * p[:, 1] - p[:, 1],
        lambda p: np.column_stack([2 * p[:, 0] * p[:, 1], p[:, 0] ** 2 - 1]),
        lambda p: 2 * p[:, 1],
        degree=3,
    )


def monomial_case(a: int, b: int) -> ManufacturedCase:
    """u = x^a y^b with its closed-form derivatives."""
    def pw(z, e):
        return z**e if e >= 0 else np.zeros_like(z)

    def u(p):
        return pw(p[:, 0], a) * pw(p[:, 1], b)

    def grad(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([a * pw(x, a - 1) * pw(y, b), b * pw(x, a) * pw(y, b - 1)])

    def lap(p):
        x, y = p[:, 0], p[:, 1]
        return a * (a - 1) * pw(x, a - 2) * pw(y, b) + b * (b - 1) * pw(x, a) * pw(y, b - 2)

    return ManufacturedCase(f"monomial:{a},{b}", u, grad, lap, degree=a + b)


_REGISTRY: Dict[str, Callable[[], ManufacturedCase]] = {
    "sinsin": _sinsin,
    "bubble": _bubble,
    "cubic": _cubic,
}


def case_names() -> List[str]:
    return sorted(_REGISTRY) + ["monomial:A,B"]


def get_case(name: str) -> ManufacturedCase:
    m = re.fullmatch(r"monomial:(\d+),(\d+)", name)
    if m:
        return monomial_case(int(m.group(1)), int(m.group(2)))
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown case {name!r}; known: {', '.join(case_names())}") from None


def named_function(name: str, role: str = "u") -> Optional[Field]:
    """``zero`` or a registered case; ``role`` picks its solution ``u`` or load ``f``."""
    if name in ("zero", "0"):
        return None
    case = get_case(name)
    return case.u if role == "u" else case.f


# ---------------------------------------------------------------- studies


@dataclass
class StudyRow:
    family: str
    n: int
    h: float
    k: int
    energy_error: float
    dual_Eh: float
    dual_frakEh: float
    alpha: float  # smallest local coercivity ratio on the same mesh
    eoc_energy: Optional[float] = None
    eoc_Eh: Optional[float] = None
    eoc_frakEh: Optional[float] = None


@dataclass
class ConvergenceReport:
    case: str
    load: str
    rows: List[StudyRow] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def final_eoc(self, name: str = "energy") -> Optional[float]:
        return getattr(self.rows[-1], f"eoc_{name}") if self.rows else None


def eoc(errors: Sequence[float], hs: Sequence[float]) -> List[Optional[float]]:
    """log(e_i / e_{i+1}) / log(h_i / h_{i+1}), None for the first entry."""
    out: List[Optional[float]] = [None]
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 <= 0 or e1 <= 0:
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(hs[i - 1] / hs[i]))
    return out


def fill_eoc(report: ConvergenceReport) -> ConvergenceReport:
    hs = [r.h for r in report.rows]
    for name, col in (("energy", "energy_error"), ("Eh", "dual_Eh"), ("frakEh", "dual_frakEh")):
        for r, v in zip(report.rows, eoc([getattr(r, col) for r in report.rows], hs)):
            setattr(r, f"eoc_{name}", v)
    return report


def study_level(case: ManufacturedCase, family: str, n: int, k: int, load: str = "projected",
                seed: int = 0, threads: int = 1) -> StudyRow:
    mesh = generate_mesh(family, n, seed)
    disc = Discretization(mesh, k, threads=threads)
    system = assemble(disc, case.f, case.u, load)
    uh = solve(system)
    err = energy_norm(disc, uh - interpolate(disc.space, case.u))
    Eh = consistency_functional(disc, "E_h", case.u, f=case.f, load=load)
    frak = consistency_functional(disc, "frak_E_h", case.u, laplacian=case.laplacian)
    alpha, _ = coercivity_bracket(disc)
    return StudyRow(family, n, float(mesh.h), k, err, dual_norm(disc, Eh), dual_norm(disc, frak), alpha)


def run_study(case, family: str, k: int, levels: Sequence[int], load: str = "projected",
              seed: int = 0, threads: int = 1) -> ConvergenceReport:
    case = get_case(case) if isinstance(case, str) else case
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if load not in LOAD_VARIANTS:
        raise ValueError(f"unknown load variant {load!r}")
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    report = ConvergenceReport(case.name, load)
    for n in levels:
        try:
            row = study_level(case, family, n, k, load, seed, threads)
        except SolverError as exc:
            raise SolverError(f"{family} n={n} k={k}: {exc}") from exc
        log.info("%s n=%d k=%d energy=%.3e", family, n, k, row.energy_error)
        report.rows.append(row)
    report.rows.sort(key=lambda r: -r.h)
    return fill_eoc(report)


@dataclass
class StudyConfig:
    case: str = "sinsin"
    family: str = "cartesian"
    k: int = 1
    levels: List[int] = field(default_factory=lambda: [4, 8, 16, 32])
    seed: int = 0
    loadVariant: str = "projected"
    threads: int = 1
    orderedAccumulation: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def run(self) -> ConvergenceReport:
        # assembly always accumulates in element order, so the flag only documents intent
        return run_study(self.case, self.family, self.k, self.levels, self.loadVariant, self.seed, self.threads)


# ---------------------------------------------------------------- reports


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % v


def emit_report(report: ConvergenceReport, fmt: str = "csv") -> bytes:
    """Bit-stable CSV (documented columns) or JSON (all row fields)."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue().encode()
    if fmt == "json":
        doc = {"case": report.case, "load": report.load, "rows": [asdict(r) for r in report.rows]}
        return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()
    raise ValueError(f"unknown report format {fmt!r}")
