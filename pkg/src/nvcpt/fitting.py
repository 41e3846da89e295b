"""Multi-Lorentzian dip fitting by damped least squares.

The model is a flat (optionally sloped) baseline minus a sum of Lorentzian
dips::

    y(x) = baseline + slope*(x - pivot) - sum_k depth_k * h_k**2 / ((x - c_k)**2 + h_k**2)

with ``h_k = fwhm_k / 2``.  Optionally a broad Lorentzian *peak* (the
one-photon excitation profile the dips sit in) is added to the baseline.  The solver is a Levenberg-Marquardt iteration over
the free parameters only.  Widths and depths are optimized as
``fwhm = exp(u)`` and ``depth = v**2`` so they stay positive without box
constraints.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_ITER = 500
RSS_RTOL = 1e-10
GRAD_TOL = 1e-8


class FitError(RuntimeError):
    pass


@dataclass
class LorentzianDip:
    center: float
    fwhm: float
    depth: float

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError(f"fwhm must be > 0, got {self.fwhm}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")


@dataclass
class FitModel:
    """Baseline plus Lorentzian dips, with per-parameter fixed flags.

    Parameter names are ``baseline``, ``slope`` and ``center{k}``,
    ``fwhm{k}``, ``depth{k}`` for dip ``k``.  ``slope`` is only a parameter
    when ``linear_baseline`` is set.  ``profile`` is an optional broad peak
    added to the baseline; its ``depth`` is the peak height and its
    parameters are ``profile_center``, ``profile_fwhm``, ``profile_depth``.
    """

    baseline: float
    dips: list[LorentzianDip] = field(default_factory=list)
    slope: float = 0.0
    pivot: float = 0.0
    linear_baseline: bool = False
    fixed: set[str] = field(default_factory=set)
    profile: LorentzianDip | None = None

    def parameter_names(self) -> list[str]:
        names = ["baseline"]
        if self.linear_baseline:
            names.append("slope")
        if self.profile is not None:
            names += ["profile_center", "profile_fwhm", "profile_depth"]
        for k in range(len(self.dips)):
            names += [f"center{k}", f"fwhm{k}", f"depth{k}"]
        return names

    def free_names(self) -> list[str]:
        return [n for n in self.parameter_names() if n not in self.fixed]

    def _owner(self, name: str):
        attr, k = _split(name)
        return (self.profile if k is None else self.dips[k]), attr

    def get(self, name: str) -> float:
        if name in ("baseline", "slope"):
            return getattr(self, name)
        owner, attr = self._owner(name)
        return getattr(owner, attr)

    def set(self, name: str, value: float) -> None:
        if name in ("baseline", "slope"):
            setattr(self, name, float(value))
        else:
            owner, attr = self._owner(name)
            setattr(owner, attr, float(value))

    def copy(self) -> "FitModel":
        return copy.deepcopy(self)

    def fix(self, *names: str) -> "FitModel":
        self.fixed |= set(names)
        return self


def _split(name: str) -> tuple[str, int | None]:
    """``"fwhm3"`` -> ``("fwhm", 3)``; ``"profile_fwhm"`` -> ``("fwhm", None)``."""
    if name.startswith("profile_"):
        return name[len("profile_"):], None
    for attr in ("center", "fwhm", "depth"):
        if name.startswith(attr):
            return attr, int(name[len(attr):])
    raise KeyError(name)


def lorentzian(x, center, fwhm):
    h2 = (0.5 * fwhm) ** 2
    den = (np.asarray(x, dtype=float) - center) ** 2 + h2
    # a width that underflowed to zero leaves a unit spike exactly at the center
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, h2 / den, 1.0)


def model_eval(model: FitModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.full_like(x, model.baseline)
    if model.linear_baseline:
        y += model.slope * (x - model.pivot)
    if model.profile is not None:
        y += model.profile.depth * lorentzian(x, model.profile.center, model.profile.fwhm)
    for dip in model.dips:
        y -= dip.depth * lorentzian(x, dip.center, dip.fwhm)
    return y


def model_jacobian(model: FitModel, x, names: Sequence[str] | None = None) -> np.ndarray:
    """Analytic partial derivatives, one column per parameter in ``names``."""
    x = np.asarray(x, dtype=float)
    if names is None:
        names = model.parameter_names()
    cols = []
    for name in names:
        if name == "baseline":
            cols.append(np.ones_like(x))
        elif name == "slope":
            cols.append(x - model.pivot)
        else:
            dip, attr = model._owner(name)
            sign = 1.0 if dip is model.profile else -1.0
            h = 0.5 * dip.fwhm
            u = x - dip.center
            den = u**2 + h**2
            if attr == "depth":
                cols.append(sign * h**2 / den)
            elif attr == "center":
                cols.append(sign * dip.depth * 2 * h**2 * u / den**2)
            else:
                cols.append(sign * dip.depth * h * u**2 / den**2)
    return np.column_stack(cols) if cols else np.zeros((len(x), 0))


@dataclass
class FitResult:
    model: FitModel
    rss: float
    stderr: dict[str, float]
    iterations: int
    converged: bool
    message: str = ""
    rss_history: list[float] = field(default_factory=list)

    @property
    def dips(self) -> list[LorentzianDip]:
        return self.model.dips


# internal <-> physical parameter maps

def _kind(name):
    return name if name in ("baseline", "slope") else _split(name)[0]


def _to_internal(name, value):
    if _kind(name) == "fwhm":
        return np.log(value)
    if _kind(name) == "depth":
        return np.sqrt(max(value, 0.0))
    return value


def _to_physical(name, value):
    if _kind(name) == "fwhm":
        return np.exp(value)
    if _kind(name) == "depth":
        return value * value
    return value


def _chain(name, internal):
    if _kind(name) == "fwhm":
        return np.exp(internal)
    if _kind(name) == "depth":
        return 2.0 * internal
    return 1.0


def fit(model0: FitModel, x, y, max_iter: int = MAX_ITER, lam0: float = 1e-3) -> FitResult:
    """Least-squares fit of ``model0``'s free parameters to ``(x, y)``.

    Levenberg-Marquardt with Marquardt diagonal scaling: the damping is
    multiplied by 10 after a rejected step and divided by 10 after an
    accepted one.  Converged means the last accepted step improved the RSS
    by less than 1e-10 relative, or the gradient norm fell below 1e-8.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("data contain NaN or infinite values")
    model = model0.copy()
    names = model.free_names()
    if len(names) >= len(x):
        raise FitError(f"{len(names)} free parameters for {len(x)} points")

    def residual(m):
        return model_eval(m, x) - y

    r = residual(model)
    rss = float(r @ r)
    history = [rss]
    if not names:
        return FitResult(model, rss, _standard_errors(model, x, [], rss), 0, True,
                         "no free parameters", history)

    p = np.array([_to_internal(n, model.get(n)) for n in names])

    # log-widths are kept within [1e-9, 1e3] times the data span so a
    # vanishing dip cannot underflow its width to zero
    span = max(float(np.ptp(x)), 1e-300)
    lo = np.array([np.log(1e-9 * span) if _kind(n) == "fwhm" else -np.inf for n in names])
    hi = np.array([np.log(1e3 * span) if _kind(n) == "fwhm" else np.inf for n in names])
    p = np.clip(p, lo, hi)

    def apply(m, q):
        for n, v in zip(names, q):
            m.set(n, _to_physical(n, v))

    lam = lam0
    converged = False
    message = "maximum iterations reached"
    it = 0
    while it < max_iter:
        it += 1
        chain = np.array([_chain(n, v) for n, v in zip(names, p)])
        J = model_jacobian(model, x, names) * chain
        g = J.T @ r
        if np.linalg.norm(g) < GRAD_TOL:
            converged, message = True, "gradient norm below tolerance"
            break
        A = J.T @ J
        d = np.diag(A).copy()
        floor = 1e-12 * max(d.max(), 1e-300)
        d = np.maximum(d, floor)
        accepted = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = model.copy()
            q = np.clip(p + step, lo, hi)
            apply(trial, q)
            r_new = residual(trial)
            rss_new = float(r_new @ r_new)
            if np.isfinite(rss_new) and rss_new <= rss:
                accepted = True
                improvement = (rss - rss_new) / max(rss, 1e-300)
                model, p, r, rss = trial, q, r_new, rss_new
                history.append(rss)
                lam = max(lam / 10, 1e-15)
                break
            lam *= 10
        if not accepted:
            # no downhill step at any damping: at a numerical minimum or singular
            chain = np.array([_chain(n, v) for n, v in zip(names, p)])
            J = model_jacobian(model, x, names) * chain
            if not np.all(np.isfinite(J)):
                raise FitError("non-finite Jacobian")
            converged = True
            message = "no further decrease possible"
            break
        if improvement < RSS_RTOL:
            converged, message = True, "relative RSS improvement below tolerance"
            break

    stderr = _standard_errors(model, x, names, rss)
    return FitResult(model, rss, stderr, it, converged, message, history)


def _standard_errors(model, x, names, rss) -> dict[str, float]:
    """Asymptotic errors from (J^T J)^-1 scaled by the reduced chi-square."""
    if not names:
        return {n: 0.0 for n in model.parameter_names()}
    J = model_jacobian(model, x, names)
    dof = len(x) - len(names)
    try:
        cov = np.linalg.inv(J.T @ J) * (rss / dof if dof > 0 else np.nan)
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        err = np.full(len(names), np.nan)
    out = {n: 0.0 for n in model.parameter_names()}
    out.update(dict(zip(names, map(float, err))))
    return out


def fit_cpt(x, y, centers: Sequence[float], init_weights: Sequence[float] | None = None,
            init_fwhm: float = 1.0, linear_baseline: bool = False,
            max_iter: int = MAX_ITER, profile: bool = False) -> FitResult:
    """Fit dips at fixed ``centers`` with free baseline, depths and widths.

    Depths start from ``init_weights`` times the data range when given,
    otherwise from the drop of the data below its maximum at each center.
    With ``profile`` a broad Lorentzian peak models the excitation profile;
    it is seeded from a dips-free fit to the data with the dip regions
    (``3 * init_fwhm`` around each center) masked out.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    centers = [float(c) for c in centers]
    order = np.argsort(x)
    top = float(np.max(y)) if centers else float(np.mean(y))
    span = float(np.ptp(y)) if len(y) else 0.0
    dips = []
    for k, c in enumerate(centers):
        if init_weights is not None:
            depth = float(init_weights[k]) * span
        else:
            depth = top - float(np.interp(c, x[order], y[order]))
        dips.append(LorentzianDip(float(c), init_fwhm, max(depth, 1e-6 * max(span, 1e-30))))
    model = FitModel(top, dips, pivot=float(np.mean(x)), linear_baseline=linear_baseline)
    if profile:
        model = _seed_profile(model, x, y, centers, init_fwhm, max_iter)
    model.fix(*[f"center{k}" for k in range(len(dips))])
    return fit(model, x, y, max_iter=max_iter)


def _seed_profile(model: FitModel, x, y, centers, init_fwhm, max_iter) -> FitModel:
    keep = np.ones(len(x), dtype=bool)
    for c in centers:
        keep &= np.abs(x - c) > 3 * init_fwhm
    if keep.sum() < 8:
        keep[:] = True
    xs, ys = x[keep], y[keep]
    span = float(np.ptp(x))
    bg = FitModel(float(ys.min()), [], pivot=model.pivot, linear_baseline=model.linear_baseline,
                  profile=LorentzianDip(float(xs[np.argmax(ys)]), span, max(float(np.ptp(ys)), 1e-30)))
    bg = fit(bg, xs, ys, max_iter=max_iter).model
    seeded = model.copy()
    seeded.baseline, seeded.slope, seeded.profile = bg.baseline, bg.slope, bg.profile
    smooth = model_eval(bg, x)
    for k, c in enumerate(centers):
        drop = float(np.interp(c, x, smooth - y))
        seeded.dips[k].depth = max(drop, seeded.dips[k].depth * 1e-3, 1e-12)
    return seeded
