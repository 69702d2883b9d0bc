"""Curvature extraction from weights, the fiber twist endomorphism, the
asymptotic kernel diagonal, and Morse-inequality integrals.

A local weight is phi(z) = sum_j lambda_j |z_j|^2 + p(z) with p an analytic
real-valued perturbation vanishing to third order at 0.  Its curvature
endomorphism is the Hermitian matrix of mixed second Wirtinger derivatives
d^2 phi / dz_i dzbar_j, expressed in a frame orthonormal for the base
metric.  The asymptotic diagonal is

    prod_j f(mu_j, t) * exp(t * Theta),   f(mu, t) = mu / (2 pi (1 - e^{-t mu})),

where mu_j are the curvature eigenvalues, f(0, t) = 1/(2 pi t), and Theta
is the twist endomorphism acting on the (0,q) fiber.  Values are densities
against the Hermitian volume element (see README, "Volume conventions").
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import defaults, fiber
from .errors import ArgumentError, DomainError, InvariantViolation

__all__ = [
    "Perturbation",
    "WeightFunction",
    "CurvatureEndomorphism",
    "FiberEndomorphism",
    "CurvatureField",
    "MorseBoundResult",
    "curvature_at",
    "twist_endomorphism",
    "asymptotic_diagonal",
    "heat_factor",
    "morse_index",
    "morse_index_integrals",
    "morse_bound",
    "read_curvature_field",
    "write_curvature_field",
    "cubic_re_perturbation",
    "quartic_abs_perturbation",
]


# ---------------------------------------------------------------------------
# Wirtinger finite differences


def _fd_real_partial(f: Callable, z: np.ndarray, axis: int, h: float) -> float:
    """4th-order central difference of f along one real coordinate axis."""
    n = z.shape[0]
    step = np.zeros(n, dtype=complex)
    step[axis // 2] = h if axis % 2 == 0 else 1j * h
    c = (1.0, -8.0, 8.0, -1.0)
    o = (-2.0, -1.0, 1.0, 2.0)
    return sum(ci * f(z + oi * step) for ci, oi in zip(c, o)) / (12.0 * h)


def _fd_real_hessian(f: Callable, z: np.ndarray, h: float) -> np.ndarray:
    """4th-order real Hessian of f: C^n -> R viewed on R^{2n}."""
    n2 = 2 * z.shape[0]
    H = np.empty((n2, n2))
    c1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    o1 = np.array([-2.0, -1.0, 1.0, 2.0])
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    o2 = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])

    def unit(axis):
        e = np.zeros(z.shape[0], dtype=complex)
        e[axis // 2] = 1.0 if axis % 2 == 0 else 1j
        return e

    for a in range(n2):
        ea = unit(a)
        H[a, a] = sum(ci * f(z + oi * h * ea) for ci, oi in zip(c2, o2)) / h**2
        for b in range(a + 1, n2):
            eb = unit(b)
            val = 0.0
            for ci, oi in zip(c1, o1):
                for cj, oj in zip(c1, o1):
                    val += ci * cj * f(z + oi * h * ea + oj * h * eb)
            H[a, b] = H[b, a] = val / h**2
    return H


def complex_hessian_from_real(H: np.ndarray) -> np.ndarray:
    """d^2/dz_i dzbar_j from the real Hessian on R^{2n} (z_j = x_j + i y_j)."""
    n = H.shape[0] // 2
    out = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            xx = H[2 * i, 2 * j]
            yy = H[2 * i + 1, 2 * j + 1]
            xy = H[2 * i, 2 * j + 1]
            yx = H[2 * i + 1, 2 * j]
            out[i, j] = 0.25 * (xx + yy + 1j * (xy - yx))
    return out


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class Perturbation:
    """Analytic real-valued map C^n -> R with optional exact derivatives.

    ``value`` is mandatory.  ``zbar_gradient`` returns the vector of
    d p / dzbar_j; ``hessian`` the matrix d^2 p / dz_i dzbar_j.  Missing
    derivatives fall back to 4th-order central differences with step
    ``defaults.FD_STEP``.
    """

    value: Callable[[np.ndarray], float]
    zbar_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def value_at(self, z: np.ndarray) -> float:
        return float(self.value(np.asarray(z, dtype=complex)))

    def zbar_gradient_at(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.zbar_gradient is not None:
            return np.asarray(self.zbar_gradient(z), dtype=complex)
        h = defaults.FD_STEP
        n = z.shape[0]
        g = np.empty(n, dtype=complex)
        for j in range(n):
            gx = _fd_real_partial(self.value, z, 2 * j, h)
            gy = _fd_real_partial(self.value, z, 2 * j + 1, h)
            g[j] = 0.5 * (gx + 1j * gy)
        return g

    def hessian_at(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.hessian is not None:
            return np.asarray(self.hessian(z), dtype=complex)
        return complex_hessian_from_real(_fd_real_hessian(self.value, z, defaults.FD_STEP))


@dataclass(frozen=True)
class WeightFunction:
    """Local potential: quadratic eigenvalue part plus analytic perturbation.

    ``chart_radius`` declares the analyticity domain |z| < chart_radius.
    """

    n: int
    lam: tuple
    perturbation: Optional[Perturbation] = None
    chart_radius: float = np.inf

    def __post_init__(self):
        if self.n < 1:
            raise ArgumentError("dimension must be positive")
        lam = tuple(float(v) for v in self.lam)
        if len(lam) != self.n:
            raise InvariantViolation(f"expected {self.n} eigenvalues, got {len(lam)}")
        if not all(np.isfinite(lam)):
            raise InvariantViolation("curvature eigenvalues must be finite")
        object.__setattr__(self, "lam", lam)

    def value(self, z) -> float:
        z = np.asarray(z, dtype=complex)
        v = float(np.dot(self.lam, np.abs(z) ** 2))
        if self.perturbation is not None:
            v += self.perturbation.value_at(z)
        return v

    def zbar_gradient(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        g = np.asarray(self.lam, dtype=complex) * z
        if self.perturbation is not None:
            g = g + self.perturbation.zbar_gradient_at(z)
        return g

    def check_chart(self, z) -> None:
        z = np.asarray(z, dtype=complex)
        if np.linalg.norm(z) >= self.chart_radius:
            raise DomainError(
                f"|z|={np.linalg.norm(z):.3g} outside chart radius {self.chart_radius:.3g}"
            )


def _validated_hermitian(matrix: np.ndarray, tol: float, what: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvariantViolation(f"{what} must be square")
    if not np.all(np.isfinite(matrix)):
        raise DomainError(f"{what} has non-finite entries")
    asym = np.max(np.abs(matrix - matrix.conj().T)) if matrix.size else 0.0
    if asym > tol:
        raise InvariantViolation(f"{what} is not Hermitian: max asymmetry {asym:.3e}")
    out = 0.5 * (matrix + matrix.conj().T)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CurvatureEndomorphism:
    """Hermitian matrix of d^2 phi / dz_i dzbar_j in an orthonormal frame."""

    n: int
    matrix: np.ndarray

    def __post_init__(self):
        m = _validated_hermitian(self.matrix, defaults.HERMITIAN_ABS_TOL, "curvature matrix")
        if m.shape != (self.n, self.n):
            raise InvariantViolation(f"expected {self.n}x{self.n} matrix")
        object.__setattr__(self, "matrix", m)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @staticmethod
    def diagonal(lambdas) -> "CurvatureEndomorphism":
        lam = np.asarray(lambdas, dtype=float)
        return CurvatureEndomorphism(lam.size, np.diag(lam).astype(complex))


@dataclass(frozen=True)
class FiberEndomorphism:
    """Complex matrix on the (0,q) fiber, indexed by increasing multi-indices."""

    n: int
    q: int
    matrix: np.ndarray

    def __post_init__(self):
        if not 0 <= self.q <= self.n:
            raise ArgumentError(f"q={self.q} outside [0, {self.n}]")
        d = fiber.fiber_dim(self.n, self.q)
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (d, d):
            raise InvariantViolation(f"expected {d}x{d} fiber matrix, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def basis(self) -> tuple:
        return fiber.multi_indices(self.n, self.q)

    @property
    def scalar(self) -> complex:
        if self.dim != 1:
            raise ArgumentError("scalar access on a fiber of dimension > 1")
        return complex(self.matrix[0, 0])


# ---------------------------------------------------------------------------
# Operations


def curvature_at(weight: WeightFunction, point) -> CurvatureEndomorphism:
    """Curvature endomorphism diag(lambda) + perturbation Hessian at a point."""
    z = np.asarray(point, dtype=complex)
    if z.shape != (weight.n,):
        raise ArgumentError(f"point must have shape ({weight.n},)")
    weight.check_chart(z)
    m = np.diag(np.asarray(weight.lam, dtype=complex))
    if weight.perturbation is not None:
        h = weight.perturbation.hessian_at(z)
        if not np.all(np.isfinite(h)):
            raise DomainError("perturbation Hessian has non-finite entries")
        m = m + h
    m = _validated_hermitian(m, defaults.HESSIAN_ASYMMETRY_TOL, "curvature matrix")
    return CurvatureEndomorphism(weight.n, m)


def twist_endomorphism(curv: CurvatureEndomorphism, q: int) -> FiberEndomorphism:
    """Curvature acting on the (0,q) fiber: -sum_ij R_ij e^i wedge iota_j.

    For diagonal curvature diag(lambda) the result is diagonal with entry
    -sum_{j in J} lambda_j on the basis form indexed by J.
    """
    n = curv.n
    if not 0 <= q <= n:
        raise ArgumentError(f"q={q} outside [0, {n}]")
    d = fiber.fiber_dim(n, q)
    out = np.zeros((d, d), dtype=complex)
    for i in range(n):
        for j in range(n):
            rij = curv.matrix[i, j]
            if rij != 0:
                out -= rij * fiber.wedge_contract(n, q, i, j)
    return FiberEndomorphism(n, q, out)


def heat_factor(lam: float, t: float) -> float:
    """Scalar factor lambda / (2 pi (1 - e^{-t lambda})) with degenerate branch.

    Below the degeneracy threshold the 4-term Taylor series of
    x / (1 - e^{-x}) at x = t*lambda is used; at lambda = 0 this is 1/(2 pi t).
    """
    if t <= 0:
        raise ArgumentError("t must be positive")
    x = t * lam
    if abs(lam) < defaults.DEGENERACY_THRESHOLD:
        series = 1.0 + x / 2.0 + x**2 / 12.0 - x**4 / 720.0
        return series / (2.0 * np.pi * t)
    return lam / (2.0 * np.pi * (-np.expm1(-x)))


def _expm_hermitian(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.exp(w)) @ v.conj().T


def asymptotic_diagonal(curv: CurvatureEndomorphism, q: int, t: float) -> FiberEndomorphism:
    """Limit diagonal: prod_j f(mu_j, t) times exp(t Theta) on the (0,q) fiber."""
    if t <= 0:
        raise ArgumentError("t must be positive")
    mu = curv.eigenvalues()
    pref = 1.0
    for m in mu:
        pref *= heat_factor(float(m), t)
    theta = twist_endomorphism(curv, q)
    return FiberEndomorphism(curv.n, q, pref * _expm_hermitian(t * theta.matrix))


def morse_index(curv: CurvatureEndomorphism, tol: float = defaults.DEGENERACY_THRESHOLD):
    """Count of eigenvalues < -tol, or None when any eigenvalue lies in [-tol, tol]."""
    if tol <= 0:
        raise ArgumentError("tol must be positive")
    mu = curv.eigenvalues()
    if np.any(np.abs(mu) <= tol):
        return None
    return int(np.sum(mu < -tol))


@dataclass(frozen=True)
class CurvatureField:
    """Curvature sampled on a parameter grid with cell volumes."""

    matrices: tuple
    volumes: np.ndarray
    params: Optional[np.ndarray] = None

    def __post_init__(self):
        vols = np.asarray(self.volumes, dtype=float)
        if len(self.matrices) == 0:
            raise ArgumentError("empty curvature field")
        if vols.shape != (len(self.matrices),):
            raise ArgumentError("one volume per cell required")
        if np.any(vols <= 0):
            raise ArgumentError("cell volumes must be positive")
        vols.setflags(write=False)
        object.__setattr__(self, "volumes", vols)

    @staticmethod
    def constant(curv: CurvatureEndomorphism, total_volume: float, cells: int = 1) -> "CurvatureField":
        """Constant field split into `cells` equal-volume quadrature cells."""
        if cells < 1 or total_volume <= 0:
            raise ArgumentError("need at least one cell of positive volume")
        vols = np.full(cells, total_volume / cells)
        return CurvatureField(tuple([curv] * cells), vols)


@dataclass(frozen=True)
class MorseBoundResult:
    value: float
    degenerate_volume: float


def morse_index_integrals(field: CurvatureField, tol: float = defaults.DEGENERACY_THRESHOLD):
    """Per-index integrals I_j = sum_{index(cell)=j} |det(R/2pi)| vol, plus skipped volume."""
    n = field.matrices[0].n
    integrals = np.zeros(n + 1)
    degenerate = 0.0
    for curv, vol in zip(field.matrices, field.volumes):
        j = morse_index(curv, tol)
        if j is None:
            degenerate += vol
            continue
        density = np.real(np.linalg.det(curv.matrix)) / (2.0 * np.pi) ** n
        integrals[j] += (-1.0) ** j * density * vol
    return integrals, degenerate


def morse_bound(field: CurvatureField, q: int, tol: float = defaults.DEGENERACY_THRESHOLD) -> MorseBoundResult:
    """Signed curvature integral over cells of Morse index <= q.

    Each non-degenerate cell of index j <= q contributes
    (-1)^j det(R/2pi) * vol (the density of the top Chern form over n! in an
    orthonormal frame); degenerate cells are skipped and their total volume
    reported.
    """
    n = field.matrices[0].n
    if not 0 <= q <= n:
        raise ArgumentError(f"q={q} outside [0, {n}]")
    integrals, degenerate = morse_index_integrals(field, tol)
    return MorseBoundResult(float(np.sum(integrals[: q + 1])), degenerate)


# ---------------------------------------------------------------------------
# CSV ingestion of curvature fields
#
# Columns: u1,...,um (parameters), vol, then n^2 pairs re_ij,im_ij in
# row-major order; header mandatory, UTF-8, '.' decimal separator.


def read_curvature_field(path) -> CurvatureField:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().strip()
        if not header:
            raise ArgumentError(f"{path}: missing header row")
        names = header.split(",")
        try:
            vol_col = names.index("vol")
        except ValueError:
            raise ArgumentError(f"{path}: header must contain a 'vol' column") from None
        for m, name in enumerate(names[:vol_col]):
            if name != f"u{m + 1}":
                raise ArgumentError(f"{path}: parameter columns must be u1..um, got {name!r}")
        pairs = names[vol_col + 1 :]
        if len(pairs) % 2 != 0:
            raise ArgumentError(f"{path}: matrix columns must come in re/im pairs")
        n2 = len(pairs) // 2
        n = round(np.sqrt(n2))
        if n * n != n2:
            raise ArgumentError(f"{path}: got {n2} matrix entries, not a square count")
        expected = [f"{p}_{i + 1}{j + 1}" for i in range(n) for j in range(n) for p in ("re", "im")]
        if pairs != expected:
            raise ArgumentError(f"{path}: matrix columns must be {expected}, got {pairs}")
        params, vols, mats = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            values = [float(v) for v in line.split(",")]
            if len(values) != len(names):
                raise ArgumentError(f"{path}:{lineno}: expected {len(names)} fields")
            params.append(values[:vol_col])
            vols.append(values[vol_col])
            flat = values[vol_col + 1 :]
            m = np.array(flat[0::2]) + 1j * np.array(flat[1::2])
            mats.append(CurvatureEndomorphism(n, m.reshape(n, n)))
    return CurvatureField(
        tuple(mats), np.asarray(vols), np.asarray(params) if params and params[0] else None
    )


def write_curvature_field(path, field: CurvatureField) -> None:
    n = field.matrices[0].n
    m = field.params.shape[1] if field.params is not None else 0
    fmt = "{:" + defaults.CSV_FLOAT_FORMAT + "}"
    names = [f"u{i + 1}" for i in range(m)] + ["vol"]
    names += [f"{p}_{i + 1}{j + 1}" for i in range(n) for j in range(n) for p in ("re", "im")]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row, (curv, vol) in enumerate(zip(field.matrices, field.volumes)):
            vals = list(field.params[row]) if field.params is not None else []
            vals.append(vol)
            for i in range(n):
                for j in range(n):
                    vals += [curv.matrix[i, j].real, curv.matrix[i, j].imag]
            fh.write(",".join(fmt.format(v) for v in vals) + "\n")


# ---------------------------------------------------------------------------
# Ready-made perturbations


def cubic_re_perturbation(amplitude: float, n: int = 1) -> Perturbation:
    """p(z) = amplitude * Re(z_1^3), with exact derivatives."""

    def value(z):
        return amplitude * float(np.real(z[0] ** 3))

    def zbar_grad(z):
        g = np.zeros(len(z), dtype=complex)
        g[0] = 1.5 * amplitude * np.conj(z[0]) ** 2
        return g

    def hessian(z):
        return np.zeros((len(z), len(z)), dtype=complex)

    return Perturbation(value, zbar_grad, hessian)


def quartic_abs_perturbation(amplitude: float, n: int = 1) -> Perturbation:
    """p(z) = amplitude * |z_1|^4, with exact derivatives."""

    def value(z):
        return amplitude * float(np.abs(z[0]) ** 4)

    def zbar_grad(z):
        g = np.zeros(len(z), dtype=complex)
        g[0] = 2.0 * amplitude * z[0] ** 2 * np.conj(z[0])
        return g

    def hessian(z):
        h = np.zeros((len(z), len(z)), dtype=complex)
        h[0, 0] = 4.0 * amplitude * np.abs(z[0]) ** 2
        return h

    return Perturbation(value, zbar_grad, hessian)
