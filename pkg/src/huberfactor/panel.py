"""Core data types and linear-algebra plumbing for factor models.

A :class:`Panel` holds an N x T observation matrix (rows are series,
columns are time points).  A :class:`FactorFit` holds loadings L, factors
F, and residuals under the identification convention

    L'L / N = I_r,    F'F / T diagonal with non-increasing entries,

which pins the factorization down to column signs.  ``normalize_fit``
rotates any full-rank (L, F) pair into that convention without changing
the common component L F', and ``sign_align`` resolves the remaining
sign ambiguity against a reference.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegeneracyError, DimensionError, ParameterError

__all__ = [
    "Panel",
    "FactorFit",
    "SignMatrix",
    "EigenPair",
    "second_moment",
    "top_eigen",
    "normalize_fit",
    "sign_align",
]

# Tolerances from the type contracts.
_LOAD_TOL = 1e-8
_FACTOR_OFFDIAG_TOL = 1e-8
_ORTHO_TOL = 1e-10


def _as_float_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class Panel:
    """An N x T panel of observations with series and time labels.

    Parameters
    ----------
    values : ndarray, shape (N, T)
        Observation matrix; row i is series i, column t is time t.
        Every entry must be finite.
    series_ids : list of str
        N labels, one per row.
    time_ids : list of str
        T labels, one per column.
    """

    values: np.ndarray
    series_ids: list[str]
    time_ids: list[str]

    def __post_init__(self):
        arr = _as_float_matrix(self.values, "panel values")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"panel must be at least 1x1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise DataError(
                f"panel contains a non-finite value at series {bad[0]}, time {bad[1]}"
            )
        if len(self.series_ids) != arr.shape[0]:
            raise DimensionError(
                f"{len(self.series_ids)} series_ids for {arr.shape[0]} rows"
            )
        if len(self.time_ids) != arr.shape[1]:
            raise DimensionError(
                f"{len(self.time_ids)} time_ids for {arr.shape[1]} columns"
            )
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "series_ids", [str(s) for s in self.series_ids])
        object.__setattr__(self, "time_ids", [str(t) for t in self.time_ids])

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_values(cls, values) -> "Panel":
        """Wrap a bare matrix, generating labels s1.. and t1.. ."""
        arr = _as_float_matrix(values, "panel values")
        return cls(
            arr,
            [f"s{i}" for i in range(1, arr.shape[0] + 1)],
            [f"t{j}" for j in range(1, arr.shape[1] + 1)],
        )

    @classmethod
    def read_csv(cls, path) -> "Panel":
        """Read a panel from CSV.

        The expected layout is one row per time point: a header
        ``time,<series_id_1>,...,<series_id_N>`` followed by rows holding
        the time label and N decimal values.  Parse failures raise
        :class:`DataError` naming the offending row.
        """
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                try:
                    header = next(reader)
                except StopIteration:
                    raise DataError(f"{path}: empty file") from None
                if len(header) < 2 or header[0] != "time":
                    raise DataError(
                        f"{path}: header must be 'time,<series ids>', got {header[:3]}"
                    )
                series_ids = [h.strip() for h in header[1:]]
                time_ids: list[str] = []
                rows: list[list[float]] = []
                for lineno, row in enumerate(reader, start=2):
                    if not row:
                        continue
                    if len(row) != len(series_ids) + 1:
                        raise DataError(
                            f"{path}: row {lineno} has {len(row)} fields, "
                            f"expected {len(series_ids) + 1}"
                        )
                    time_ids.append(row[0].strip())
                    try:
                        rows.append([float(x) for x in row[1:]])
                    except ValueError as exc:
                        raise DataError(
                            f"{path}: row {lineno}: {exc}"
                        ) from None
        except OSError as exc:
            raise DataError(f"cannot read panel: {exc}") from None
        if not rows:
            raise DataError(f"{path}: no data rows")
        values = np.array(rows, dtype=float).T
        if not np.all(np.isfinite(values)):
            t_bad = int(np.argwhere(~np.isfinite(values))[0][1])
            raise DataError(f"{path}: row {t_bad + 2} contains a non-finite value")
        return cls(values, series_ids, time_ids)

    def write_csv(self, path) -> None:
        """Write the panel in the layout accepted by :meth:`read_csv`."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("time," + ",".join(self.series_ids) + "\n")
            for j, tid in enumerate(self.time_ids):
                vals = ",".join(repr(float(v)) for v in self.values[:, j])
                fh.write(f"{tid},{vals}\n")


@dataclass(frozen=True)
class FactorFit:
    """A fitted factor model in the identified parametrization.

    Construction validates the identification conditions: columns of the
    loading matrix are orthogonal with squared norm N, and F'F / T is
    diagonal with non-increasing entries.  ``residuals`` is Y - L F'.
    ``info`` carries optional estimator diagnostics (method name,
    iteration count, convergence flag, objective trace) and takes no
    part in equality or validation.
    """

    loadings: np.ndarray
    factors: np.ndarray
    residuals: np.ndarray
    rank: int
    info: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        L = _as_float_matrix(self.loadings, "loadings")
        F = _as_float_matrix(self.factors, "factors")
        E = _as_float_matrix(self.residuals, "residuals")
        r = int(self.rank)
        n, t = L.shape[0], F.shape[0]
        if r < 1:
            raise ParameterError(f"rank must be positive, got {r}")
        if L.shape[1] != r or F.shape[1] != r:
            raise DimensionError(
                f"loadings {L.shape} and factors {F.shape} must have {r} columns"
            )
        if E.shape != (n, t):
            raise DimensionError(f"residuals {E.shape} do not match ({n}, {t})")
        if r > min(n, t):
            raise DimensionError(f"rank {r} exceeds min(N, T) = {min(n, t)}")
        gram_l = L.T @ L / n
        if np.max(np.abs(gram_l - np.eye(r))) > _LOAD_TOL:
            raise ParameterError("loadings violate L'L/N = I")
        gram_f = F.T @ F / t
        diag = np.diag(gram_f).copy()
        # Off-diagonal tolerance scales with the diagonal so large-valued
        # panels are not rejected on float noise alone.
        off_tol = _FACTOR_OFFDIAG_TOL * max(1.0, float(diag.max(initial=0.0)))
        off = gram_f - np.diag(diag)
        if np.max(np.abs(off)) > off_tol:
            raise ParameterError("factors violate diagonal F'F/T")
        if np.any(np.diff(diag) > off_tol):
            raise ParameterError("diagonal of F'F/T must be non-increasing")
        object.__setattr__(self, "loadings", L)
        object.__setattr__(self, "factors", F)
        object.__setattr__(self, "residuals", E)
        object.__setattr__(self, "rank", r)

    @property
    def n_series(self) -> int:
        return self.loadings.shape[0]

    @property
    def n_times(self) -> int:
        return self.factors.shape[0]

    def common_component(self) -> np.ndarray:
        """Return L F', the identified object of the model."""
        return self.loadings @ self.factors.T

    def factor_second_moment_diag(self) -> np.ndarray:
        """Diagonal of F'F / T, non-increasing by construction."""
        F = self.factors
        return np.einsum("tj,tj->j", F, F) / F.shape[0]


@dataclass(frozen=True)
class SignMatrix:
    """Diagonal matrix of column signs, each entry +1 or -1."""

    diag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        if d.ndim != 1:
            raise DimensionError("sign diagonal must be 1-d")
        if not np.all(np.abs(d) == 1.0):
            raise ParameterError("sign entries must be exactly +1 or -1")
        object.__setattr__(self, "diag", d)

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        """Flip the columns of ``matrix`` by the stored signs."""
        return np.asarray(matrix, dtype=float) * self.diag


@dataclass(frozen=True)
class EigenPair:
    """Leading eigenvalues (non-increasing) and orthonormal eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vecs = _as_float_matrix(self.vectors, "eigenvectors")
        if vals.ndim != 1 or vecs.shape[1] != vals.shape[0]:
            raise DimensionError("eigenvalues and eigenvectors disagree in count")
        if np.any(np.diff(vals) > 0):
            raise ParameterError("eigenvalues must be non-increasing")
        gram = vecs.T @ vecs
        if np.max(np.abs(gram - np.eye(vals.shape[0]))) > _ORTHO_TOL:
            raise ParameterError("eigenvectors are not orthonormal")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "vectors", vecs)


def second_moment(panel: Panel, center: bool = False) -> np.ndarray:
    """Second-moment matrix (1/T) sum_t Y_t Y_t' of a panel.

    No mean removal by default; ``center=True`` subtracts each series
    mean first.  The result is symmetrized to remove float asymmetry.
    """
    Y = panel.values
    if center:
        Y = Y - Y.mean(axis=1, keepdims=True)
    S = Y @ Y.T / panel.n_times
    return (S + S.T) / 2.0


def _fix_column_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties resolve to the first occurrence, which makes the convention
    deterministic across runs and platforms.
    """
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def top_eigen(M: np.ndarray, r: int) -> EigenPair:
    """Leading ``r`` eigenpairs of a symmetric matrix.

    Eigenvalues come back non-increasing and each eigenvector's sign is
    fixed so its largest-magnitude component is positive.

    Raises
    ------
    ParameterError
        If ``M`` is not symmetric within 1e-10 relative tolerance.
    DimensionError
        If ``r`` exceeds the matrix dimension.
    """
    M = _as_float_matrix(M, "matrix")
    n = M.shape[0]
    if M.shape[1] != n:
        raise DimensionError(f"matrix must be square, got {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > 1e-10 * scale:
        raise ParameterError("matrix is not symmetric")
    r = int(r)
    if r < 1:
        raise ParameterError(f"r must be positive, got {r}")
    if r > n:
        raise DimensionError(f"r = {r} exceeds matrix dimension {n}")
    vals, vecs = np.linalg.eigh((M + M.T) / 2.0)
    order = np.arange(n - 1, n - r - 1, -1)
    return EigenPair(vals[order], _fix_column_signs(vecs[:, order]))


def _symmetric_root_pair(A: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (A^{1/2}, A^{-1/2}) of a symmetric PD matrix via eigh.

    Raises DegeneracyError naming the first deficient eigenvalue index
    when A is numerically rank deficient.
    """
    vals, vecs = np.linalg.eigh((A + A.T) / 2.0)
    top = float(vals[-1]) if vals.size else 0.0
    floor = max(top, 1.0) * 1e-13
    deficient = np.nonzero(vals <= floor)[0]
    if deficient.size:
        # eigh sorts ascending; report in descending (factor) order.
        j = vals.size - 1 - int(deficient[-1])
        raise DegeneracyError(f"{what} is rank deficient at factor {j}")
    root = (vecs * np.sqrt(vals)) @ vecs.T
    inv_root = (vecs / np.sqrt(vals)) @ vecs.T
    return root, inv_root


def normalize_fit(L_raw: np.ndarray, F_raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotate (L, F) into the identified parametrization.

    The common component L F' is preserved exactly: L is first whitened
    by the symmetric inverse square root of L'L/N (F absorbs the square
    root), then both sides rotate by the eigenvectors of F'F/T so it
    becomes diagonal with non-increasing entries.  Column signs follow
    the same convention as :func:`top_eigen`, applied to L.

    ``L_raw`` must have full column rank.  A rank-deficient factor
    matrix is tolerated: the corresponding diagonal entries of F'F/T
    come out (numerically) zero, which is what rank-counting callers
    need on over-specified fits.
    """
    L_raw = _as_float_matrix(L_raw, "loadings")
    F_raw = _as_float_matrix(F_raw, "factors")
    if L_raw.shape[1] != F_raw.shape[1]:
        raise DimensionError(
            f"loadings {L_raw.shape} and factors {F_raw.shape} disagree in rank"
        )
    n = L_raw.shape[0]
    t = F_raw.shape[0]
    root, inv_root = _symmetric_root_pair(L_raw.T @ L_raw / n, "loading matrix")
    L = L_raw @ inv_root
    F = F_raw @ root
    gram_f = F.T @ F / t
    vals, vecs = np.linalg.eigh((gram_f + gram_f.T) / 2.0)
    order = np.arange(vals.size - 1, -1, -1)
    rot = vecs[:, order]
    L = L @ rot
    F = F @ rot
    idx = np.argmax(np.abs(L), axis=0)
    signs = np.where(L[idx, np.arange(L.shape[1])] < 0, -1.0, 1.0)
    return L * signs, F * signs


def sign_align(F_hat: np.ndarray, F_ref: np.ndarray) -> SignMatrix:
    """Signs aligning the columns of ``F_hat`` with ``F_ref``.

    Entry j is the sign of the j-th diagonal element of
    (1/T) F_hat' F_ref, with sign(0) = +1.
    """
    F_hat = _as_float_matrix(F_hat, "F_hat")
    F_ref = _as_float_matrix(F_ref, "F_ref")
    if F_hat.shape != F_ref.shape:
        raise DimensionError(
            f"shape mismatch: {F_hat.shape} vs {F_ref.shape}"
        )
    diag = np.einsum("tj,tj->j", F_hat, F_ref) / F_hat.shape[0]
    return SignMatrix(np.where(diag >= 0, 1.0, -1.0))
