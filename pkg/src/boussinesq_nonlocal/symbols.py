"""Constant-coefficient operators and their frequency polynomials.

An operator ``L = sum_alpha a_alpha D^alpha`` is stored as a table from
multi-indices to complex coefficients. Under the ``fourier`` convention
(default) ``D^alpha`` maps to ``(i xi)^alpha``, so ``-Laplacian`` evaluates
to ``|xi|^2``. The ``plain`` convention evaluates ``sum a_alpha xi^alpha``
literally.

The effective symbols of ``u_tt + L0 u_tt + L1 u = L2 f`` are

    Q(xi) = L1(xi) / (1 + L0(xi)),   L(xi) = L2(xi) / (1 + L0(xi)).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import SymbolSingularityError
from .grid import SpectralGrid

CONVENTIONS = ("fourier", "plain")


@dataclass(frozen=True)
class OperatorSymbol:
    n: int
    terms: dict = field(default_factory=dict)
    convention: str = "fourier"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        clean = {}
        for alpha, a in self.terms.items():
            alpha = tuple(int(k) for k in alpha)
            if len(alpha) != self.n or min(alpha, default=0) < 0:
                raise ValueError(f"multi-index {alpha} does not fit dimension {self.n}")
            a = complex(a)
            if a != 0:
                clean[alpha] = clean.get(alpha, 0) + a
        object.__setattr__(self, "terms", clean)

    def __hash__(self):
        return hash((self.n, tuple(sorted(self.terms.items(), key=lambda kv: kv[0])), self.convention))

    @property
    def order(self) -> int:
        return max((sum(alpha) for alpha in self.terms), default=0)

    def evaluate(self, *xi) -> np.ndarray:
        """Evaluate on frequency components ``xi_1, ..., xi_n`` (arrays broadcast)."""
        if len(xi) != self.n:
            raise ValueError(f"expected {self.n} frequency components, got {len(xi)}")
        xi = [np.asarray(k, dtype=float) for k in xi]
        out = np.zeros(np.broadcast(*xi).shape, dtype=complex)
        for alpha, a in self.terms.items():
            mono = a * (1j ** sum(alpha) if self.convention == "fourier" else 1.0)
            term = np.full(out.shape, mono, dtype=complex)
            for k, power in zip(xi, alpha):
                if power:
                    term = term * k**power
            out = out + term
        return out

    def on_grid(self, grid: SpectralGrid) -> np.ndarray:
        return self.evaluate(*grid.xi)

    def scaled(self, c) -> "OperatorSymbol":
        return OperatorSymbol(self.n, {a: c * v for a, v in self.terms.items()}, self.convention)


def eval_symbol(sym: OperatorSymbol, xi) -> complex:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (sym.n,):
        raise ValueError(f"frequency vector of length {xi.size} for an n={sym.n} symbol")
    return complex(sym.evaluate(*xi))


def laplacian(n: int, c: complex = 1.0) -> OperatorSymbol:
    """``c * Laplacian`` in ``n`` dimensions."""
    terms = {}
    for d in range(n):
        alpha = [0] * n
        alpha[d] = 2
        terms[tuple(alpha)] = c
    return OperatorSymbol(n, terms)


def compute_QL(L0, L1, L2, xi, eps_den: float = 1e-12):
    """Return ``(Q, L)`` at one frequency vector."""
    l0, l1, l2 = (eval_symbol(s, xi) for s in (L0, L1, L2))
    den = 1.0 + l0
    if abs(den) <= eps_den * (1.0 + abs(l0)):
        raise SymbolSingularityError(f"1 + L0(xi) vanishes at xi={list(np.atleast_1d(xi))}", xi=xi)
    return l1 / den, l2 / den


def grid_QL(L0, L1, L2, grid: SpectralGrid):
    """Q and L over the whole grid; raises on any vanishing denominator."""
    l0 = L0.on_grid(grid)
    den = 1.0 + l0
    tol = 1e-12 * (1.0 + np.max(np.abs(l0)))
    bad = np.abs(den) <= tol
    if bad.any():
        idx = np.unravel_index(np.argmax(bad), bad.shape)
        xi = grid.frequency_vector(idx)
        raise SymbolSingularityError(f"1 + L0(xi) vanishes at xi={xi.tolist()}", xi=xi)
    return L1.on_grid(grid) / den, L2.on_grid(grid) / den


@dataclass
class SymbolReport:
    admissible: bool
    worst_xi: np.ndarray
    M1_est: float
    M2_est: float
    zero_hits: list
    # |Q^{-1/2}| growth fit, the alternative reading of the first bound
    M1_inverse_est: float = np.inf
    exempt_zero_mode: bool = False
    growth_exponent: float = 0.0

    def as_dict(self) -> dict:
        return {
            "admissible": self.admissible,
            "worst_xi": [float(v) for v in self.worst_xi],
            "M1_est": self.M1_est,
            "M2_est": self.M2_est,
            "M1_inverse_est": self.M1_inverse_est,
            "zero_hits": [dict(kind=k, xi=[float(v) for v in x]) for k, x in self.zero_hits],
            "exempt_zero_mode": self.exempt_zero_mode,
            "growth_exponent": self.growth_exponent,
        }


def check_symbol_bounds(L0, L1, L2, s: float, p: float, grid: SpectralGrid) -> SymbolReport:
    """Scan the grid for the symbol admissibility bounds.

    Records the smallest ``M1`` with ``|Q^{1/2}| <= M1 (1+|xi|)^(s-n/p)`` and
    the smallest ``M2`` with ``|L Q^{-1/2}| <= M2 (1+|xi|)^(s-n/p)``, plus every
    grid frequency where ``L1`` or ``1 + L0`` vanishes.

    A zero of ``L1`` at ``xi = 0`` is exempt when ``L2(0)`` vanishes too: that
    mode is then unforced and evolves as ``u0 + t u1``. Every operator built
    from derivatives only (the Laplacian presets) has this zero.
    """
    if not 1 < p < np.inf:
        raise ValueError("p must lie in (1, inf)")
    n = grid.n
    if not s > n / p:
        raise ValueError(f"need s > n/p, got s={s}, n/p={n / p}")
    gamma = s - n / p
    l0, l1, l2 = (sym.on_grid(grid) for sym in (L0, L1, L2))
    den = 1.0 + l0
    eps_den = 1e-12 * (1.0 + max(np.max(np.abs(l0)), np.max(np.abs(l1))))
    den_zero = np.abs(den) <= eps_den
    l1_zero = np.abs(l1) <= eps_den

    zero_index = tuple([0] * n)
    exempt = bool(l1_zero[zero_index] and abs(l2[zero_index]) <= eps_den and not den_zero[zero_index])
    if exempt:
        l1_zero = l1_zero.copy()
        l1_zero[zero_index] = False

    zero_hits = []
    for kind, mask in (("1+L0", den_zero), ("L1", l1_zero)):
        for idx in zip(*np.nonzero(mask)):
            zero_hits.append((kind, grid.frequency_vector(idx)))

    weight = (1.0 + np.sqrt(grid.xi_norm2)) ** gamma
    good = ~(den_zero | l1_zero)
    if exempt:
        good[zero_index] = False
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = np.where(~den_zero, l1 / np.where(den_zero, 1.0, den), np.nan)
        L = np.where(~den_zero, l2 / np.where(den_zero, 1.0, den), np.nan)
        sq = np.sqrt(Q.astype(complex))
        r1 = np.abs(sq) / weight
        r2 = np.abs(L / sq) / weight
        r1_inv = 1.0 / (np.abs(sq) * weight)
    if exempt:
        r1 = r1.copy()
        r1[zero_index] = 0.0  # |Q^{1/2}(0)| = 0
    finite_mask = ~den_zero
    M1 = float(np.max(r1[finite_mask])) if finite_mask.any() else np.inf
    M2 = float(np.max(r2[good])) if good.any() else np.inf
    M1_inv = float(np.max(r1_inv[good])) if good.any() else np.inf

    if zero_hits:
        worst = zero_hits[0][1]
    else:
        ratio = np.where(good, np.maximum(r1, r2), -np.inf)
        worst = grid.frequency_vector(np.unravel_index(np.argmax(ratio), ratio.shape))
    admissible = not zero_hits and np.isfinite(M1) and np.isfinite(M2)
    return SymbolReport(
        admissible=bool(admissible),
        worst_xi=worst,
        M1_est=M1,
        M2_est=M2,
        zero_hits=zero_hits,
        M1_inverse_est=M1_inv,
        exempt_zero_mode=exempt,
        growth_exponent=gamma,
    )


def degree_heuristic(m0: int, m1: int, m2: int, s: float, p: float, n: int) -> bool:
    """Order-based sufficient test: ``m0-m1`` and ``m2-m1`` at most ``2(s-n/p)``."""
    if not 1 < p < np.inf:
        raise ValueError("p must lie in (1, inf)")
    bound = 2.0 * (s - n / p) + 1e-12
    return (m0 - m1) <= bound and (m2 - m1) <= bound


def _full_table(n: int, max_order: int, coefficients: dict | None, default) -> dict:
    """Coefficient table over all |alpha| <= max_order; missing entries from ``default``."""
    table = {}
    for alpha in itertools.product(range(max_order + 1), repeat=n):
        if sum(alpha) <= max_order:
            table[alpha] = default(alpha)
    if coefficients:
        for alpha, a in coefficients.items():
            alpha = tuple(alpha)
            if len(alpha) != n or sum(alpha) > max_order:
                raise ValueError(f"multi-index {alpha} not allowed (n={n}, order <= {max_order})")
            table[alpha] = a
    return table


def _neg_laplacian_entry(alpha):
    return -1.0 if sorted(alpha)[-1] == 2 and sum(alpha) == 2 else 0.0


def _one_minus_laplacian_entry(alpha):
    return 1.0 if sum(alpha) == 0 else _neg_laplacian_entry(alpha)


def _bilaplacian_plus_entry(alpha):
    # 1 - Laplacian + Laplacian^2: strictly positive symbol 1 + |xi|^2 + |xi|^4
    if sum(alpha) == 0:
        return 1.0
    if sum(alpha) == 2 and max(alpha) == 2:
        return -1.0
    if sum(alpha) == 4:
        # |xi|^4 = sum_k xi_k^4 + 2 sum_{j<k} xi_j^2 xi_k^2
        if max(alpha) == 4:
            return 1.0
        if sorted(alpha)[-2:] == [2, 2]:
            return 2.0
    return 0.0


PRESETS = ("classical_boussinesq_1", "classical_boussinesq_2", "classical_boussinesq_3",
           "app1_2d", "app2_3d", "app3_mixed")


def preset_symbol(name: str, coefficients: dict | None = None, convention: str = "fourier"):
    """Return ``(L0, L1, L2)`` for a named scenario.

    ``classical_boussinesq_<n>``: ``L0 = L1 = L2 = -Laplacian``.
    ``app1_2d``: a single order-2 operator in two dimensions used for all three.
    ``app2_3d``: a single order-4 operator in three dimensions used for all three.
    ``app3_mixed``: orders (4, 2, 4) in three dimensions.

    Where coefficients are left free, the defaults are ``-Laplacian`` for
    ``app1_2d`` and the positive symbols ``1 + |xi|^2 + |xi|^4`` (order 4) and
    ``1 + |xi|^2`` (order 2) elsewhere.

    ``coefficients`` overrides entries of the default tables. For the
    single-operator presets it maps multi-index -> coefficient; for
    ``app3_mixed`` it maps ``"L0"``/``"L1"``/``"L2"`` to such maps.
    """
    if name.startswith("classical_boussinesq_"):
        try:
            n = int(name.rsplit("_", 1)[1])
        except ValueError:
            raise ValueError(f"unknown preset {name!r}") from None
        if n not in (1, 2, 3):
            raise ValueError(f"unknown preset {name!r}")
        op = laplacian(n, -1.0)
        op = OperatorSymbol(n, op.terms, convention)
        return op, op, op
    if name == "app1_2d":
        op = OperatorSymbol(2, _full_table(2, 2, coefficients, _neg_laplacian_entry), convention)
        return op, op, op
    if name == "app2_3d":
        op = OperatorSymbol(3, _full_table(3, 4, coefficients, _bilaplacian_plus_entry), convention)
        return op, op, op
    if name == "app3_mixed":
        coefficients = coefficients or {}
        L0 = OperatorSymbol(3, _full_table(3, 4, coefficients.get("L0"), _bilaplacian_plus_entry), convention)
        L1 = OperatorSymbol(3, _full_table(3, 2, coefficients.get("L1"), _one_minus_laplacian_entry), convention)
        L2 = OperatorSymbol(3, _full_table(3, 4, coefficients.get("L2"), _bilaplacian_plus_entry), convention)
        return L0, L1, L2
    raise ValueError(f"unknown preset {name!r}")
