"""Per-pixel linear model fitting.

Each study condition is fit independently: one design matrix and contrast
shared by all pixels, one response vector per pixel. Under the iid working
covariance the GLS estimator reduces to ordinary least squares, so the fit
is a single batched solve across pixels.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegeneratePixelError, DesignError, ValidationError
from .field import FieldStack, Lattice, ScalarField

COVARIANCE_MODELS = ("iid",)


@dataclass(frozen=True)
class DesignSpec:
    """Design matrix (n x p), contrast vector (p) and working covariance model."""

    X: np.ndarray
    L: np.ndarray
    covariance_model: str = "iid"

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        L = np.asarray(self.L, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "L", L)
        if self.covariance_model not in COVARIANCE_MODELS:
            raise DesignError(f"unknown covariance model: {self.covariance_model!r}")
        n, p = X.shape
        if L.shape[0] != p:
            raise DesignError(f"contrast has length {L.shape[0]}, design has {p} columns")
        if not np.any(L != 0.0):
            raise DesignError("contrast vector must not be zero")
        if p > n - 1:
            raise DesignError(f"design needs p <= n-1, got p={p}, n={n}")
        if np.linalg.matrix_rank(X) < p:
            raise DesignError("design matrix is rank deficient")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class GlmFit:
    """Per-pixel fit products for one study condition.

    ``se`` is the contrast standard error sigma_hat * sqrt(L' (X'X)^-1 L);
    ``residuals`` holds the standardized residuals (Y - X beta_hat) / sigma_hat.
    """

    mu_hat: ScalarField
    se: ScalarField
    sigma_hat: ScalarField
    tau_n: float
    residuals: FieldStack
    n: int


def fit(data: FieldStack, design: DesignSpec) -> GlmFit:
    """Fit the per-pixel linear model for one condition.

    Pixels are independent; the whole lattice is solved in one batched
    least-squares pass. Pixels with zero residual variance are rejected
    because they would corrupt boundary estimation downstream.
    """
    if data.n != design.n:
        raise DesignError(f"stack has n={data.n} observations, design has {design.n} rows")
    n, p = design.n, design.p
    lattice = data.lattice
    Y = data.values.reshape(n, -1)

    X = design.X
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ Y)
    resid = Y - X @ beta
    dof = n - p
    sigma2 = np.einsum("ij,ij->j", resid, resid) / dof
    degenerate = np.flatnonzero(sigma2 <= 0.0)
    if degenerate.size:
        raise DegeneratePixelError(degenerate)
    sigma = np.sqrt(sigma2)

    mu = design.L @ beta
    l_xtx_l = float(design.L @ np.linalg.solve(XtX, design.L))
    se = sigma * math.sqrt(l_xtx_l)
    std_resid = resid / sigma

    shape2d = (lattice.height, lattice.width)
    return GlmFit(
        mu_hat=ScalarField(lattice, mu.reshape(shape2d)),
        se=ScalarField(lattice, se.reshape(shape2d)),
        sigma_hat=ScalarField(lattice, sigma.reshape(shape2d)),
        tau_n=1.0 / math.sqrt(n),
        residuals=FieldStack(lattice, std_resid.reshape(n, *shape2d)),
        n=n,
    )


def intercept_only_design(n: int) -> DesignSpec:
    """The n x 1 all-ones design with unit contrast (pixelwise mean model)."""
    return DesignSpec(X=np.ones((n, 1)), L=np.array([1.0]))


def load_design_csv(path) -> np.ndarray:
    """Read a design matrix from CSV, one row per observation."""
    return _load_numeric_csv(path, ndmin=2)


def load_contrast_csv(path) -> np.ndarray:
    """Read a contrast vector from CSV (single row or single column)."""
    return _load_numeric_csv(path, ndmin=1).reshape(-1)


def _load_numeric_csv(path, ndmin):
    path = Path(path)
    try:
        return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=ndmin)
    except OSError as exc:
        raise ValidationError(f"cannot read CSV file {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"non-numeric content in CSV file {path}: {exc}") from exc
