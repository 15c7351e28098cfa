"""Fourier mode weights and their Sum-of-Kronecker-Products decompositions.

The weight tensor ``alpha_M`` is stored as a ``(2M+1, 2M+1, 2M+1)`` array
indexed by ``m + M`` on each axis; ``ravel()`` gives the lexicographic
(axis 0 slowest) vector.  A decomposition approximates it by

    sum_l  w_l  a0_l (x) a1_l (x) a2_l  -  c * delta_0

where ``delta_0`` is the indicator of the zero mode.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from importlib.resources import files
from pathlib import Path

import numpy as np

from .kronengine import matricize

__all__ = [
    "EwaldConfig",
    "NumericalFailure",
    "QuadratureRule",
    "RuleRangeError",
    "SkpDecomposition",
    "SkpTerm",
    "assemble_alpha",
    "bundled_rule_path",
    "load_tabulated_rule",
    "nkpa_svd",
    "optimal_term_lower_bound",
    "quadrature_arguments",
    "rule_max_error",
    "save_tabulated_rule",
    "sinc_rule",
    "sinc_rule_for_eps",
    "skp_from_quadrature",
]


class NumericalFailure(RuntimeError):
    """A dense linear-algebra kernel did not converge."""


class RuleRangeError(ValueError):
    """A quadrature rule does not cover the arguments ``[1, 3 M^2]``."""


@dataclass(frozen=True)
class EwaldConfig:
    xi: float
    M: int

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError(f"Ewald parameter must be positive, got {self.xi}")
        if int(self.M) != self.M or self.M < 0:
            raise ValueError(f"mode bound must be a non-negative integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)


def assemble_alpha(cfg: EwaldConfig) -> np.ndarray:
    """``exp(-pi^2 |m|^2 / xi^2) / |m|^2`` on ``[-M, M]^3``, zero at ``m = 0``."""
    m = cfg.modes
    r2 = m[:, None, None] ** 2 + m[None, :, None] ** 2 + m[None, None, :] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.exp(-(math.pi**2) * r2 / cfg.xi**2) / r2
    a[r2 == 0] = 0.0
    return a


@dataclass(frozen=True)
class SkpTerm:
    weight: float
    profiles: tuple[np.ndarray, np.ndarray, np.ndarray]

    def tensor(self) -> np.ndarray:
        a, b, c = self.profiles
        return self.weight * np.einsum("i,j,k->ijk", a, b, c)


@dataclass(frozen=True)
class SkpDecomposition:
    """Terms plus zero-mode correction ``c``.

    ``error_bound`` is the a-priori bound carried by the construction: the
    Frobenius bound from discarded singular values for ``kind == "svd"``, the
    certified max-norm error of the rule for the quadrature kinds.
    """

    terms: list[SkpTerm]
    correction: float
    kind: str
    M: int
    error_bound: float = 0.0
    rule: "QuadratureRule | None" = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def relative_rank(self) -> float:
        return len(self.terms) / (2 * self.M + 1) ** 2


# -- nearest Kronecker product approximation ------------------------------------------


def _svd(a: np.ndarray):
    try:
        return np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge on a {a.shape} matrix") from exc


def _truncate(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def nkpa_svd(alpha: np.ndarray, tol_outer: float = 1e-8, tol_inner: float | None = None) -> SkpDecomposition:
    """Recursive SVD split of a 3-tensor into rank-one Kronecker terms.

    The tensor is unfolded on axis 0; each kept right singular vector is
    refolded over axes (1, 2) and split again.  Singular values at or below
    ``tol * sigma_max`` are dropped at each level.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 3:
        raise ValueError(f"expected a 3-tensor, got shape {alpha.shape}")
    tol_inner = tol_outer if tol_inner is None else tol_inner
    if tol_inner > tol_outer:
        raise ValueError("inner tolerance must not exceed the outer one")
    if not np.all(np.isfinite(alpha)):
        raise NumericalFailure("input tensor has non-finite entries")
    n0, n1, n2 = alpha.shape
    M = (n0 - 1) // 2

    u, s, vt = _svd(matricize(alpha.ravel(), 0, alpha.shape))
    r0 = _truncate(s, tol_outer)
    bound = math.sqrt(float(np.sum(s[r0:] ** 2)))

    terms = []
    for i in range(r0):
        ui, si, vti = _svd(vt[i].reshape(n1, n2))
        r1 = _truncate(si, tol_inner)
        bound += s[i] * math.sqrt(float(np.sum(si[r1:] ** 2)))
        for j in range(r1):
            terms.append(SkpTerm(float(s[i] * si[j]), (u[:, i].copy(), ui[:, j].copy(), vti[j].copy())))
    return SkpDecomposition(terms=terms, correction=0.0, kind="svd", M=M, error_bound=bound)


# -- quadrature of 1/R = int_0^inf exp(-t R) dt ---------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Exponential-sum rule ``1/R ~ sum_l w_l exp(-lambda_l R)`` on ``[min_arg, max_arg]``.

    ``eps`` is the certified (sinc) or declared (tabulated) max-norm error.
    ``measured_error`` is filled when a rule is checked against a mode bound.
    """

    nodes: np.ndarray
    weights: np.ndarray
    min_arg: float
    max_arg: float
    eps: float
    kind: str = "tabulated"
    h: float | None = None
    n_quad: int | None = None
    measured_error: float | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    def covers(self, M: int) -> bool:
        return self.min_arg <= 1 and self.max_arg >= 3 * M * M

    def evaluate(self, R) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        return np.exp(-np.multiply.outer(R, self.nodes)) @ self.weights


def quadrature_arguments(M: int) -> np.ndarray:
    """Integer arguments ``1 .. 3 M^2`` (a superset of the attained ``|m|^2``)."""
    return np.arange(1, 3 * M * M + 1, dtype=float)


def rule_max_error(rule: QuadratureRule, M: int) -> float:
    R = quadrature_arguments(M)
    if R.size == 0:
        return 0.0
    return float(np.max(np.abs(1.0 / R - rule.evaluate(R))))


def _sinc_nodes(n_quad: int, h: float):
    l = np.arange(-n_quad, n_quad + 1, dtype=float)
    return np.log1p(np.exp(l * h)), h / (1.0 + np.exp(-l * h))


def sinc_rule(n_quad: int, M: int, n_candidates: int = 64) -> QuadratureRule:
    """Cardinal-sine rule with the lifting factor picked by exhaustive search.

    Candidates are ``n_candidates`` log-spaced values in ``[h*/4, 4 h*]``
    around ``h* = pi / sqrt(2 n_quad + 1)``.
    """
    if n_quad < 1:
        raise ValueError("n_quad must be >= 1")
    if M < 1:
        raise ValueError("mode bound must be >= 1")
    R = quadrature_arguments(M)
    inv = 1.0 / R
    h_star = math.pi / math.sqrt(2 * n_quad + 1)
    best = None
    for h in np.geomspace(h_star / 4, 4 * h_star, n_candidates):
        lam, w = _sinc_nodes(n_quad, h)
        err = float(np.max(np.abs(inv - np.exp(-np.multiply.outer(R, lam)) @ w)))
        if best is None or err < best[0]:
            best = (err, float(h), lam, w)
    err, h, lam, w = best
    return QuadratureRule(
        nodes=lam, weights=w, min_arg=1.0, max_arg=float(3 * M * M), eps=err,
        kind="sinc", h=h, n_quad=n_quad,
    )


def sinc_rule_for_eps(eps: float, M: int, n_max: int = 400) -> QuadratureRule:
    """Smallest ``n_quad`` whose best sinc rule reaches ``eps`` on ``[1, 3 M^2]``."""
    for n in range(1, n_max + 1):
        rule = sinc_rule(n, M)
        if rule.eps <= eps:
            return rule
    raise NumericalFailure(f"no sinc rule with n_quad <= {n_max} reaches {eps:g} for M={M}")


def skp_from_quadrature(rule: QuadratureRule, cfg: EwaldConfig) -> SkpDecomposition:
    """Separable profiles ``exp(-(lambda + pi^2/xi^2) m^2)`` with correction ``sum w``."""
    M = cfg.M
    if M >= 1 and not rule.covers(M):
        raise RuleRangeError(
            f"rule valid on [{rule.min_arg:g}, {rule.max_arg:g}] does not cover [1, {3 * M * M}] (M={M})"
        )
    m2 = cfg.modes.astype(float) ** 2
    shift = math.pi**2 / cfg.xi**2
    terms = []
    for lam, w in zip(rule.nodes, rule.weights):
        p = np.exp(-(lam + shift) * m2)
        terms.append(SkpTerm(float(w), (p, p, p)))
    return SkpDecomposition(
        terms=terms, correction=float(np.sum(rule.weights)), kind=rule.kind, M=M,
        error_bound=rule.eps, rule=rule,
    )


# -- tabulated rules -----------------------------------------------------------------
# format: "count", then count lines "node weight", then "min_arg max_arg eps"


def _data_lines(path: Path):
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def load_tabulated_rule(path, M: int | None = None) -> QuadratureRule:
    """Read a rule file; when ``M`` is given the range is enforced and the error measured."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"quadrature table not found: {path}")
    lines = list(_data_lines(path))
    try:
        count = int(lines[0])
        body = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + count]])
        trailer = [float(v) for v in lines[1 + count].split()]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed quadrature table") from exc
    if body.shape != (count, 2) or len(trailer) != 3 or len(lines) != count + 2:
        raise ValueError(f"{path}: malformed quadrature table")
    rule = QuadratureRule(
        nodes=body[:, 0].copy(), weights=body[:, 1].copy(),
        min_arg=trailer[0], max_arg=trailer[1], eps=trailer[2], kind="tabulated",
    )
    if M is not None:
        if not rule.covers(M):
            raise RuleRangeError(
                f"{path}: rule valid on [{rule.min_arg:g}, {rule.max_arg:g}] does not cover [1, {3 * M * M}] (M={M})"
            )
        err = rule_max_error(rule, M)
        rule = replace(rule, measured_error=err)
        if err > rule.eps:
            warnings.warn(
                f"{path}: measured error {err:.3g} exceeds the declared {rule.eps:.3g}",
                RuntimeWarning,
                stacklevel=2,
            )
    return rule


def bundled_rule_path() -> Path:
    """Shipped 27-term rule, certified to 1e-14 on ``R = 1..432`` (``M <= 12``)."""
    return Path(str(files("kpme") / "data" / "expsum27_r432.txt"))


def save_tabulated_rule(path, rule: QuadratureRule) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"{len(rule)}\n")
        for lam, w in zip(rule.nodes, rule.weights):
            fh.write(f"{float(lam)!r} {float(w)!r}\n")
        fh.write(f"{float(rule.min_arg)!r} {float(rule.max_arg)!r} {float(rule.eps)!r}\n")


def optimal_term_lower_bound(eps: float) -> int:
    """Fewest terms an optimal exponential-sum rule needs for precision ``eps``."""
    if not 0 < eps < 16:
        raise ValueError("eps must lie in (0, 16)")
    v = (math.log(eps / 16) / math.pi) ** 2
    # absorb rounding so that eps = 16 exp(-pi k) maps to exactly k^2
    return max(1, math.ceil(v * (1 - 1e-12)))
