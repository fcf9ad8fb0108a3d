"""OLS and two-stage least squares with classical or heteroskedasticity-robust errors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import StakeGameError

COV_TYPES = ("nonrobust", "HC0", "HC1")
WEAK_F = 10.0


class EstimationError(StakeGameError, ValueError):
    pass


@dataclass
class RegressionResult:
    names: list[str]
    params: np.ndarray
    bse: np.ndarray
    tvalues: np.ndarray
    pvalues: np.ndarray
    rsquared: float
    nobs: int
    fvalue: float
    f_pvalue: float
    f_df: tuple[int, int]
    stage: str = "OLS"
    cov_type: str = "HC1"
    cov: np.ndarray = field(default=None, repr=False)
    resid: np.ndarray = field(default=None, repr=False)
    weak_instruments: bool | None = None
    dependent: str = "y"

    def coef(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "dependent": self.dependent,
            "cov_type": self.cov_type,
            "nobs": self.nobs,
            "rsquared": self.rsquared,
            "fvalue": self.fvalue,
            "f_pvalue": self.f_pvalue,
            "f_df": list(self.f_df),
            "weak_instruments": self.weak_instruments,
            "coefficients": {
                n: {"coef": float(b), "se": float(s), "t": float(t), "p": float(p)}
                for n, b, s, t, p in zip(self.names, self.params, self.bse, self.tvalues, self.pvalues)
            },
        }

    def summary(self) -> str:
        """Coefficient table with standard errors in parentheses under each estimate."""
        w = max([len(n) for n in self.names] + [14])
        lines = [f"{self.stage}: {self.dependent}", "-" * (w + 16)]
        for n, b, s, p in zip(self.names, self.params, self.bse, self.pvalues):
            star = "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else ""
            lines.append(f"{n:<{w}} {b:>12.4f}{star}")
            lines.append(f"{'':<{w}} {'(' + format(s, '.4f') + ')':>12}")
        lines.append("-" * (w + 16))
        lines.append(f"{'Observations':<{w}} {self.nobs:>12d}")
        lines.append(f"{'R-squared':<{w}} {self.rsquared:>12.4f}")
        lines.append(f"{'F-statistic':<{w}} {self.fvalue:>12.1f}")
        if self.weak_instruments is not None:
            lines.append(f"{'Weak instruments':<{w}} {'yes' if self.weak_instruments else 'no':>12}")
        lines.append(f"{'SE':<{w}} {self.cov_type:>12}")
        return "\n".join(lines)


def collinear_columns(X: np.ndarray, names: list[str], tol: float | None = None) -> list[str]:
    """Columns that add no rank when appended left to right."""
    bad, keep = [], []
    for j in range(X.shape[1]):
        trial = X[:, keep + [j]]
        if np.linalg.matrix_rank(trial, tol=tol) < len(keep) + 1:
            bad.append(names[j])
        else:
            keep.append(j)
    return bad


def _check_rank(X, names):
    n, k = X.shape
    if n <= k:
        raise EstimationError(f"need more observations than regressors ({n} <= {k})")
    if np.linalg.matrix_rank(X) < k:
        raise EstimationError(f"design is rank deficient; collinear columns: {collinear_columns(X, names)}")


def sandwich(bread_inv: np.ndarray, X: np.ndarray, resid: np.ndarray, cov_type: str) -> np.ndarray:
    """Covariance ``B X' diag(u^2) X B`` (with the n/(n-k) factor for HC1)."""
    n, k = X.shape
    if cov_type == "nonrobust":
        s2 = resid @ resid / (n - k)
        return s2 * bread_inv
    meat = (X * resid[:, None] ** 2).T @ X
    cov = bread_inv @ meat @ bread_inv
    if cov_type == "HC1":
        cov *= n / (n - k)
    return cov


def wald_f(params, cov, idx, df_resid):
    """F-statistic for H0: params[idx] = 0."""
    idx = list(idx)
    if not idx:
        return np.nan, np.nan, (0, df_resid)
    b = params[idx]
    V = cov[np.ix_(idx, idx)]
    if not np.any(V):  # perfect fit: any nonzero coefficient is infinitely significant
        F = np.inf if np.any(b) else np.nan
        return F, 0.0 if np.any(b) else np.nan, (len(idx), df_resid)
    F = float(b @ np.linalg.solve(V, b)) / len(idx)
    return F, float(stats.f.sf(F, len(idx), df_resid)), (len(idx), df_resid)


def _finish(names, beta, cov, resid, y, X, stage, cov_type, test_idx, dependent):
    n, k = X.shape
    bse = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / bse
    p = 2 * stats.t.sf(np.abs(t), n - k)
    tss = np.sum((y - y.mean()) ** 2)
    r2 = 1 - (resid @ resid) / tss if tss > 0 else np.nan
    F, fp, df = wald_f(beta, cov, test_idx, n - k)
    return RegressionResult(list(names), beta, bse, t, p, float(r2), n, F, fp, df, stage,
                            cov_type, cov, resid, None, dependent)


def _as_2d(a):
    # C order throughout: BLAS rounding depends on memory layout, and equal
    # designs must give bit-identical estimates
    a = np.ascontiguousarray(a, dtype=float)
    return a.reshape(-1, 1) if a.ndim == 1 else a


def _names(prefix, k, names):
    return list(names) if names is not None else [f"{prefix}{j}" for j in range(k)]


def ols(y, X, robust: bool | str = True, add_constant: bool = True, names=None,
        test: list[str] | None = None, dependent: str = "y") -> RegressionResult:
    """Least squares fit of ``y`` on ``X``.

    ``robust`` selects HC1 (True), classical errors (False) or a named
    covariance type. The reported F tests that every coefficient in ``test``
    is zero; by default all slopes.
    """
    cov_type = _cov_type(robust)
    y = np.asarray(y, dtype=float).ravel()
    X = _as_2d(X)
    names = _names("x", X.shape[1], names)
    if add_constant:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["const"] + names
    _check_rank(X, names)
    bread_inv = np.linalg.inv(X.T @ X)
    beta = bread_inv @ (X.T @ y)
    resid = y - X @ beta
    cov = sandwich(bread_inv, X, resid, cov_type)
    test = [n for n in names if n != "const"] if test is None else test
    return _finish(names, beta, cov, resid, y, X, "OLS", cov_type, [names.index(t) for t in test],
                   dependent)


def _cov_type(robust):
    if robust is True:
        return "HC1"
    if robust is False:
        return "nonrobust"
    if robust not in COV_TYPES:
        raise EstimationError(f"unknown covariance type {robust!r}")
    return robust


def tsls(y, endogenous, exogenous, instruments, robust: bool | str = True,
         add_constant: bool = True, endog_names=None, exog_names=None, instrument_names=None,
         dependent: str = "y", weak_threshold: float = WEAK_F):
    """Two-stage least squares.

    Returns ``(first_stages, second_stage)``: one first-stage result per
    endogenous column, each carrying the F-statistic of the excluded
    instruments and a ``weak_instruments`` flag (F below ``weak_threshold``).
    Second-stage errors use residuals built from the original regressors.
    """
    cov_type = _cov_type(robust)
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    En = _as_2d(endogenous)
    Zx = _as_2d(instruments)
    W = _as_2d(exogenous) if exogenous is not None and np.size(exogenous) else np.empty((n, 0))
    endog_names = _names("endog", En.shape[1], endog_names)
    exog_names = _names("exog", W.shape[1], exog_names)
    instrument_names = _names("z", Zx.shape[1], instrument_names)
    if Zx.shape[1] < En.shape[1]:
        raise EstimationError(
            f"under-identified: {Zx.shape[1]} instruments for {En.shape[1]} endogenous regressors")
    if add_constant:
        W = np.column_stack([np.ones(n), W])
        exog_names = ["const"] + exog_names
    Z = np.column_stack([W, Zx])
    z_names = exog_names + instrument_names
    _check_rank(Z, z_names)

    firsts = []
    fitted = np.empty_like(En)
    zb = np.linalg.inv(Z.T @ Z)
    for j in range(En.shape[1]):
        g = zb @ (Z.T @ En[:, j])
        # a column instrumenting itself is its own projection; keep it bit-exact
        fitted[:, j] = En[:, j] if any(np.array_equal(En[:, j], Zx[:, i]) for i in range(Zx.shape[1])) \
            else Z @ g
        u = En[:, j] - fitted[:, j]
        cov = sandwich(zb, Z, u, cov_type)
        test = list(range(W.shape[1], Z.shape[1]))
        res = _finish(z_names, g, cov, u, En[:, j], Z, "first-stage", cov_type, test, endog_names[j])
        res.weak_instruments = bool(res.fvalue < weak_threshold)
        firsts.append(res)

    X = np.column_stack([W, En])
    Xh = np.column_stack([W, fitted])
    x_names = exog_names + endog_names
    _check_rank(Xh, x_names)
    bread_inv = np.linalg.inv(Xh.T @ Xh)
    beta = bread_inv @ (Xh.T @ y)
    resid = y - X @ beta
    cov = sandwich(bread_inv, Xh, resid, cov_type)
    test = [i for i, nm in enumerate(x_names) if nm != "const"]
    second = _finish(x_names, beta, cov, resid, y, Xh, "2SLS", cov_type, test, dependent)
    second.weak_instruments = any(f.weak_instruments for f in firsts)
    return firsts, second


class OLS(RegressorMixin, BaseEstimator):
    """Least squares estimator with the scikit-learn fit/predict interface."""

    def __init__(self, fit_intercept=True, cov_type="HC1"):
        self.fit_intercept = fit_intercept
        self.cov_type = cov_type

    def fit(self, X, y, feature_names=None):
        X, y = check_X_y(X, y, y_numeric=True)
        self.result_ = ols(y, X, robust=self.cov_type, add_constant=self.fit_intercept,
                           names=feature_names)
        self._store(self.result_.params)
        return self

    def _store(self, params):
        if self.fit_intercept:
            self.intercept_, self.coef_ = float(params[0]), params[1:]
        else:
            self.intercept_, self.coef_ = 0.0, params
        self.n_features_in_ = len(self.coef_)

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X)
        return self.intercept_ + X @ self.coef_


class TwoStageLeastSquares(RegressorMixin, BaseEstimator):
    """2SLS estimator.

    ``fit(X, y, Z)`` takes all second-stage regressors in ``X``; the columns
    listed in ``endog`` are instrumented by the excluded instruments ``Z``.
    The remaining columns of ``X`` instrument themselves.
    """

    def __init__(self, endog=(0,), fit_intercept=True, cov_type="HC1", weak_threshold=WEAK_F):
        self.endog = endog
        self.fit_intercept = fit_intercept
        self.cov_type = cov_type
        self.weak_threshold = weak_threshold

    def fit(self, X, y, Z):
        X, y = check_X_y(X, y, y_numeric=True)
        Z = check_array(Z, ensure_2d=False)
        Z = _as_2d(Z)
        if len(Z) != len(y):
            raise ValueError("Z and y have inconsistent lengths")
        endog = list(self.endog)
        exog = [j for j in range(X.shape[1]) if j not in endog]
        self.first_stages_, self.result_ = tsls(
            y, X[:, endog], X[:, exog], Z, robust=self.cov_type, add_constant=self.fit_intercept,
            endog_names=[f"x{j}" for j in endog], exog_names=[f"x{j}" for j in exog],
            weak_threshold=self.weak_threshold)
        # reorder second-stage params back to X's column order
        b = dict(zip(self.result_.names, self.result_.params))
        coef = np.array([b[f"x{j}"] for j in range(X.shape[1])])
        self.intercept_ = float(b["const"]) if self.fit_intercept else 0.0
        self.coef_ = coef
        self.n_features_in_ = X.shape[1]
        self.weak_instruments_ = self.result_.weak_instruments
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X)
        return self.intercept_ + X @ self.coef_
