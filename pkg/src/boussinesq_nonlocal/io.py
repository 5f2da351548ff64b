"""TOML problem files, registries for data and kernels, and output writers.

Every writer refuses non-finite numbers: a NaN or Inf never reaches disk.
"""

from __future__ import annotations

import csv
import json
import math
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoussinesqError
from .grid import SpectralField, SpectralGrid, make_grid
from .linear import LinearProblem, LinearSolution, SeparableSource
from .nonlinear import NonlinearControls, NonlinearProblem, NonlinearRun, parse_nonlinearity
from .nonlocal_conditions import NonlocalKernel
from .norms import NormSuite
from .symbols import OperatorSymbol, preset_symbol

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAGIC = b"BQF1"


class NonFiniteOutputError(BoussinesqError):
    """Refusal to write NaN or Inf."""


class ConfigError(BoussinesqError, ValueError):
    """Malformed problem, symbol or kernel file."""


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


# symbols


def _operator_from_table(table: dict, n: int, convention: str) -> OperatorSymbol:
    terms = {}
    for t in table.get("term", []):
        alpha = tuple(int(a) for a in t["alpha"])
        if len(alpha) != n:
            raise ConfigError(f"multi-index {alpha} does not match n={n}")
        terms[alpha] = terms.get(alpha, 0) + complex(t.get("re", 0.0), t.get("im", 0.0))
    return OperatorSymbol(n, terms, table.get("convention", convention))


def symbols_from_dict(doc: dict):
    """``(L0, L1, L2)`` from a symbol document: a preset name or three term tables."""
    if "preset" in doc:
        return preset_symbol(doc["preset"], doc.get("coefficients"))
    try:
        n = int(doc["n"])
    except KeyError:
        raise ConfigError("symbol file needs 'n' or 'preset'") from None
    convention = doc.get("convention", "fourier")
    try:
        return tuple(_operator_from_table(doc[k], n, convention) for k in ("L0", "L1", "L2"))
    except KeyError as exc:
        raise ConfigError(f"symbol file lacks table {exc}") from None


def load_symbols(path):
    return symbols_from_dict(load_toml(path))


# kernels


KERNEL_REGISTRY = {
    "constant": lambda c=0.1: (lambda s: c + 0.0 * s),
    "linear": lambda a=0.0, b=0.1: (lambda s: a + b * s),
    "gaussian-bump": lambda amplitude=0.1, center=0.5, width=0.1: (
        lambda s: amplitude * np.exp(-((s - center) ** 2) / (2.0 * width**2))),
}


def kernel_from_dict(doc: dict, horizon: float) -> NonlocalKernel:
    kind = doc.get("type", "density")
    if kind == "zero":
        return NonlocalKernel.zero(horizon)
    if kind == "atoms":
        return NonlocalKernel.atoms(horizon, doc["locations"], doc["weights"])
    if kind != "density":
        raise ConfigError(f"unknown kernel type {kind!r}")
    nq = int(doc.get("nq", 129))
    if "samples" in doc:
        return NonlocalKernel.density(horizon, doc["samples"])
    name = doc.get("name")
    if name not in KERNEL_REGISTRY:
        raise ConfigError(f"unknown kernel {name!r}; choose from {sorted(KERNEL_REGISTRY)}")
    return NonlocalKernel.from_function(horizon, KERNEL_REGISTRY[name](**doc.get("params", {})), nq)


def kernels_from_dict(doc: dict):
    try:
        horizon = float(doc["horizon"])
    except KeyError:
        raise ConfigError("kernel file needs 'horizon'") from None
    return tuple(kernel_from_dict(doc.get(k, {"type": "zero"}), horizon) for k in ("alpha", "beta"))


def load_kernels(path):
    return kernels_from_dict(load_toml(path))


# initial data and sources


def _gaussian(grid: SpectralGrid, amplitude=1.0, center=0.0, width=1.0):
    c = np.broadcast_to(np.asarray(center, dtype=float), (grid.n,))
    r2 = sum((x - ci) ** 2 for x, ci in zip(grid.mesh, c))
    return amplitude * np.exp(-r2 / (2.0 * width**2))


def _cosine(grid: SpectralGrid, k=1, amplitude=1.0):
    k = np.broadcast_to(np.asarray(k, dtype=float), (grid.n,))
    return amplitude * np.cos(sum(ki * x for ki, x in zip(k, grid.mesh)))


def field_from_dict(doc: dict | None, grid: SpectralGrid, base: Path | None = None) -> SpectralField:
    if not doc:
        return grid.zeros()
    kind = doc.get("type", "zero")
    params = {k: v for k, v in doc.items() if k != "type"}
    if kind == "zero":
        return grid.zeros()
    if kind == "gaussian":
        return grid.field(_gaussian(grid, **params))
    if kind == "cosine":
        return grid.field(_cosine(grid, **params))
    if kind == "samples":
        if "file" in params:
            path = Path(params["file"])
            vals = np.load(base / path if base and not path.is_absolute() else path)
        else:
            vals = np.asarray(params["values"], dtype=float)
        return grid.field(vals)
    raise ConfigError(f"unknown initial-data type {kind!r}")


TEMPORAL_REGISTRY = {
    "constant": lambda value=1.0: (lambda t: value + 0.0 * t),
    "cos": lambda omega=1.0: (lambda t: np.cos(omega * t)),
    "sin": lambda omega=1.0: (lambda t: np.sin(omega * t)),
    "exp": lambda rate=-1.0: (lambda t: np.exp(rate * t)),
    "polynomial": lambda coefficients=(1.0,): (lambda t: np.polyval(list(coefficients)[::-1], t)),
}


def source_from_dict(doc: dict | None, grid: SpectralGrid, base: Path | None = None):
    """``None`` or a :class:`SeparableSource` ``a(x) b(t)``."""
    if not doc or doc.get("type", "zero") == "zero":
        return None
    if doc["type"] != "separable":
        raise ConfigError(f"unknown source type {doc['type']!r}")
    spatial = field_from_dict(doc["spatial"], grid, base)
    temporal = dict(doc.get("temporal", {"type": "constant"}))
    name = temporal.pop("type", "constant")
    if name not in TEMPORAL_REGISTRY:
        raise ConfigError(f"unknown temporal profile {name!r}")
    return SeparableSource(grid, spatial, TEMPORAL_REGISTRY[name](**temporal))


# problems


@dataclass
class ProblemSpec:
    grid: SpectralGrid
    symbols: tuple
    alpha: NonlocalKernel
    beta: NonlocalKernel
    phi: SpectralField
    psi: SpectralField
    source: object
    times: tuple
    s: float = 2.0
    p: float = 2.0
    force: bool = False
    nonlinearity: str | None = None
    controls: dict = field(default_factory=dict)

    def linear(self) -> LinearProblem:
        return LinearProblem(*self.symbols, self.alpha, self.beta, self.phi, self.psi, self.source,
                             self.times, self.s, self.p, self.force)

    def nonlinear(self) -> NonlinearProblem:
        if self.nonlinearity is None:
            raise ConfigError("problem file has no 'nonlinearity'")
        return NonlinearProblem(*self.symbols, self.alpha, self.beta, self.phi, self.psi,
                                parse_nonlinearity(self.nonlinearity), self.s, self.p, self.force)

    def nonlinear_controls(self) -> NonlinearControls:
        try:
            return NonlinearControls(**self.controls)
        except TypeError as exc:
            raise ConfigError(f"bad control override: {exc}") from None


def _section(doc: dict, key: str, base: Path | None, loader):
    value = doc.get(key)
    if isinstance(value, str):
        path = Path(value)
        return loader(base / path if base and not path.is_absolute() else path)
    if isinstance(value, dict):
        return value
    raise ConfigError(f"problem file needs '{key}' as a path or inline table")


def problem_from_dict(doc: dict, base: Path | None = None) -> ProblemSpec:
    g = doc.get("grid", {})
    symbols = symbols_from_dict(_section(doc, "symbols", base, load_toml))
    n = symbols[0].n
    if "n" in g and int(g["n"]) != n:
        raise ConfigError(f"grid dimension {g['n']} differs from symbol dimension {n}")
    grid = make_grid(n, g.get("points", 64), g.get("half_width", np.pi))
    alpha, beta = kernels_from_dict(_section(doc, "kernels", base, load_toml))
    times = tuple(float(t) for t in doc.get("times", [0.0, alpha.horizon]))
    return ProblemSpec(
        grid, symbols, alpha, beta,
        field_from_dict(doc.get("phi"), grid, base), field_from_dict(doc.get("psi"), grid, base),
        source_from_dict(doc.get("source"), grid, base), times,
        float(doc.get("s", 2.0)), float(doc.get("p", 2.0)), bool(doc.get("force", False)),
        doc.get("nonlinearity"), dict(doc.get("controls", {})),
    )


def load_problem(path) -> ProblemSpec:
    path = Path(path)
    return problem_from_dict(load_toml(path), path.parent)


# writers


def _require_finite(values, what: str):
    arr = np.asarray(values)
    if arr.dtype.kind in "fc" and not np.all(np.isfinite(arr)):
        raise NonFiniteOutputError(f"refusing to write non-finite values to {what}")


def write_bqf(path, values: np.ndarray | SpectralField, grid: SpectralGrid | None = None):
    """Binary snapshot: ``BQF1``, u8 dimension, u32 points per axis, f64 LE re/im pairs."""
    if isinstance(values, SpectralField):
        grid, values = values.grid, values.values
    values = np.asarray(values, dtype=complex)
    _require_finite(values, str(path))
    shape = grid.shape if grid is not None else values.shape
    header = MAGIC + struct.pack("<B", len(shape)) + struct.pack(f"<{len(shape)}I", *shape)
    body = np.empty(values.size * 2, dtype="<f8")
    flat = values.reshape(-1)
    body[0::2] = flat.real
    body[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())


def read_bqf(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ConfigError(f"{path} is not a BQF1 snapshot")
    n = data[4]
    shape = struct.unpack(f"<{n}I", data[5:5 + 4 * n])
    body = np.frombuffer(data[5 + 4 * n:], dtype="<f8")
    if body.size != 2 * int(np.prod(shape)):
        raise ConfigError(f"{path}: payload size does not match header")
    return (body[0::2] + 1j * body[1::2]).reshape(shape)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return ""  # missing value, never a literal NaN
        if math.isinf(v):
            raise NonFiniteOutputError("refusing to write an infinite value")
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def norm_rows(times, us, uts, grid: SpectralGrid, s: float, p: float):
    norms = NormSuite(grid, s, p)
    for t, u, ut in zip(times, us, uts):
        u = u.values if isinstance(u, SpectralField) else u
        ut = ut.values if isinstance(ut, SpectralField) else ut
        _require_finite(u, "norms.csv")
        _require_finite(ut, "norms.csv")
        yield (t, norms.linf(u), norms.lp(u), norms.ysp(u), norms.linf(ut), norms.lp(ut), norms.ysp(ut))


NORM_HEADER = ("t", "linf_u", "lp_u", "ysp_u", "linf_ut", "lp_ut", "ysp_ut")


def write_snapshots(out: Path, times, us, uts, grid: SpectralGrid):
    rows = []
    for i, (t, u, ut) in enumerate(zip(times, us, uts)):
        name_u, name_ut = f"u_{i:04d}.bqf", f"ut_{i:04d}.bqf"
        write_bqf(out / name_u, u, grid)
        write_bqf(out / name_ut, ut, grid)
        rows.append((i, t, name_u, name_ut))
    write_csv(out / "snapshots.csv", ("index", "t", "u_file", "ut_file"), rows)


def write_linear_outputs(out, sol: LinearSolution, s: float, p: float):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshots(out, sol.times, sol.u, sol.ut, sol.grid)
    write_csv(out / "norms.csv", NORM_HEADER, norm_rows(sol.times, sol.u, sol.ut, sol.grid, s, p))
    d = sol.diagnostics
    write_csv(out / "diagnostics.csv", ("quantity", "value"), [
        ("residual_u", d.get("residual_u")),
        ("residual_ut", d.get("residual_ut")),
        ("min_abs_determinant", d["min_det"]),
        ("system_residual", d["system_residual"]),
        ("oscillatory", d["oscillatory"]),
    ])


def write_nonlinear_outputs(out, run: NonlinearRun, snapshot_times, s: float, p: float):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    grid = run.grid
    if len(run.times):
        idx = sorted({int(np.argmin(np.abs(run.times - t))) for t in snapshot_times if t <= run.times[-1] + 1e-12})
        write_snapshots(out, run.times[idx], run.u[idx], run.ut[idx], grid)
    write_csv(out / "norms.csv", NORM_HEADER, norm_rows(run.times, run.u, run.ut, grid, s, p))
    write_csv(out / "run.csv", ("window", "t_start", "T_w", "iterations", "final_ratio", "monitor", "shrinks", "ball_ok"),
              [(w.index, w.t_start, w.length, w.iterations, w.final_ratio, w.monitor, w.shrinks, w.ball_ok)
               for w in run.windows])
    record = {
        "termination": run.termination,
        "blowup_time": run.blowup_time,
        "windows": run.windows_completed,
        "t_final": float(run.times[-1]) if len(run.times) else 0.0,
        "message": run.message,
    }
    with open(out / "termination.json", "w") as fh:
        json.dump(record, fh, indent=2, allow_nan=False)
