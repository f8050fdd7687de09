"""Correlation, OLS with t-test p-values, and the Student-t tail."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import special

from ..errors import (
    InsufficientDataError,
    InvalidParameterError,
    SingularDesignError,
    UndefinedCorrelationError,
    ValidationError,
)
from ..units import hours_in_month


@dataclass(frozen=True)
class PairedObservations:
    x: tuple[float, ...]
    y: tuple[float, ...]
    x_unit: str = ""
    y_unit: str = ""
    source: str = ""

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        if len(x) != len(y):
            raise ValidationError(f"x and y lengths differ: {len(x)} vs {len(y)}")
        if len(x) < 2:
            raise InsufficientDataError(f"need at least 2 pairs, got {len(x)}")
        if not all(math.isfinite(v) for v in x + y):
            raise ValidationError("observations must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs, **kw) -> "PairedObservations":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), **kw)

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class RegressionFit:
    names: tuple[str, ...]
    coefficients: tuple[float, ...]
    std_errors: tuple[float, ...]
    t_stats: tuple[float, ...]
    p_values: tuple[float, ...]
    df_resid: int
    rss: float
    n: int
    intercept: float | None = None
    intercept_p_value: float | None = None
    pearson_r: float | None = None

    def __getitem__(self, name: str) -> float:
        return self.coefficients[self.names.index(name)]

    def p_value(self, name: str) -> float:
        return self.p_values[self.names.index(name)]

    def conf_int(self, name: str, level: float = 0.95) -> tuple[float, float]:
        i = self.names.index(name)
        q = float(special.stdtrit(self.df_resid, 0.5 + level / 2))
        half = q * self.std_errors[i]
        return (self.coefficients[i] - half, self.coefficients[i] + half)

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "df_resid": self.df_resid,
            "coefficients": dict(zip(self.names, self.coefficients)),
            "std_errors": dict(zip(self.names, self.std_errors)),
            "t_stats": dict(zip(self.names, self.t_stats)),
            "p_values": dict(zip(self.names, self.p_values)),
        }
        if self.intercept is not None:
            out["intercept"] = self.intercept
            out["intercept_p_value"] = self.intercept_p_value
        if self.pearson_r is not None:
            out["pearson_r"] = self.pearson_r
        return out


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) for Student's t with ``df`` degrees of freedom.

    Uses the regularized incomplete beta identity
    ``P(T > t) = I_{df/(df+t^2)}(df/2, 1/2) / 2`` for ``t >= 0``.
    """
    if not df >= 1:
        raise InvalidParameterError(f"df must be >= 1, got {df!r}")
    if math.isnan(t):
        raise InvalidParameterError("t is NaN")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return tail if t >= 0 else 1.0 - tail


def two_sided_p(t: float, df: float) -> float:
    return min(1.0, 2.0 * student_t_sf(abs(t), df))


def pearson_r(obs: PairedObservations) -> float:
    if len(obs) < 3:
        raise InsufficientDataError(f"need at least 3 pairs for a correlation, got {len(obs)}")
    x = np.asarray(obs.x)
    y = np.asarray(obs.y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation is undefined when x or y is constant")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _fit(design: np.ndarray, y: np.ndarray, names: Sequence[str], with_intercept: bool) -> RegressionFit:
    n, k = design.shape
    # column scaling keeps conditioning sane when regressors are ~1e13 bytes
    scale = np.abs(design).max(axis=0)
    scale[scale == 0] = 1.0
    if np.linalg.matrix_rank(design / scale) < k:
        raise SingularDesignError("design matrix is rank deficient (constant or collinear regressors)")
    df = n - k
    if df < 1:
        raise InsufficientDataError(f"{n} observations leave no residual degrees of freedom for {k} terms")
    q, r = np.linalg.qr(design / scale)
    beta_scaled = np.linalg.solve(r, q.T @ y)
    beta = beta_scaled / scale
    resid = y - design @ beta
    rss = float(resid @ resid)
    sigma2 = rss / df
    r_inv = np.linalg.inv(r)
    cov_scaled = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.diag(cov_scaled)) / scale

    tvals, pvals = [], []
    for b, s in zip(beta, se):
        if s == 0:
            t = math.copysign(math.inf, b) if b != 0 else 0.0
        else:
            t = float(b / s)
        tvals.append(t)
        pvals.append(two_sided_p(t, df) if t != 0 else 1.0)

    sl = slice(1, None) if with_intercept else slice(None)
    return RegressionFit(
        names=tuple(names),
        coefficients=tuple(float(v) for v in beta[sl]),
        std_errors=tuple(float(v) for v in se[sl]),
        t_stats=tuple(tvals[sl]),
        p_values=tuple(pvals[sl]),
        df_resid=df,
        rss=rss,
        n=n,
        intercept=float(beta[0]) if with_intercept else None,
        intercept_p_value=pvals[0] if with_intercept else None,
    )


def ols_fit(obs: PairedObservations, with_intercept: bool = True) -> RegressionFit:
    """Simple regression of y on x, optionally through the origin."""
    x = np.asarray(obs.x)
    y = np.asarray(obs.y)
    if with_intercept and len(obs) < 3:
        raise InsufficientDataError("a fit with intercept needs at least 3 pairs")
    if np.all(x == x[0]) and (with_intercept or x[0] == 0):
        raise SingularDesignError("regressor is constant")
    design = np.column_stack([np.ones_like(x), x]) if with_intercept else x[:, None]
    fit = _fit(design, y, ("slope",), with_intercept)
    r = None
    if len(obs) >= 3 and np.ptp(y) > 0:
        r = pearson_r(obs)
    return replace(fit, pearson_r=r)


def ols_fit_two(records, with_intercept: bool = False) -> RegressionFit:
    """Monthly consumption regressed on sealed and stored bytes.

    The response is the month's consumption in Wh. The sealed-bytes
    coefficient is the sealing constant (Wh/byte) directly. Stored bytes
    are multiplied by the calendar month's hour count before fitting, so
    their coefficient is the storage constant in W/byte.
    """
    records = list(records)
    if len(records) < 4:
        raise InsufficientDataError(f"need at least 4 monthly records, got {len(records)}")
    y = np.array([r.kwh * 1000.0 for r in records])
    sealed = np.array([float(r.sealed) for r in records])
    byte_hours = np.array([float(r.stored) * hours_in_month(r.month.year, r.month.month) for r in records])
    cols = [sealed, byte_hours]
    if with_intercept:
        cols.insert(0, np.ones_like(y))
    return _fit(np.column_stack(cols), y, ("a_wh_per_byte", "b_w_per_byte"), with_intercept)
