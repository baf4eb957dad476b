"""Lowest eigenpairs of sparse symmetric pencils ``K x = lam M x``.

The workhorse is a thick-restart block Lanczos iteration on the
shift-inverted operator ``C = (K - sigma M)^{-1} M``, which is self-adjoint
in the ``M`` inner product. Eigenvalues ``lam`` close to ``sigma`` become
dominant eigenvalues ``1 / (lam - sigma)`` of ``C``.

The shifted matrix is factored once with a symmetric (diagonal-pivot) sparse
LU, i.e. an ``L D L^T`` decomposition, whose pivot signs give the Sylvester
inertia: the number of eigenvalues below the shift. That count is used both
to keep the shift below the wanted eigenvalues and to certify afterwards
that none was skipped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as sla

__all__ = [
    "EigenResult",
    "ShiftedFactor",
    "FactorizationError",
    "ConvergenceError",
    "DenseCapError",
    "smallest_eigenpairs",
    "count_below",
    "eigenpairs_in_window",
    "dense_oracle",
    "DENSE_CAP",
]

DENSE_CAP = 2000
_QUICK_RESTARTS = 12


class FactorizationError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    """Iteration cap reached; ``partial`` holds the current Ritz approximations."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DenseCapError(ValueError):
    pass


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    meta: dict = field(default_factory=dict)
    below_threshold: np.ndarray | None = None

    def __len__(self):
        return len(self.values)

    def usable(self) -> np.ndarray:
        """Values not flagged as touching the essential-spectrum threshold."""
        if self.below_threshold is None:
            return self.values
        return self.values[self.below_threshold]


class ShiftedFactor:
    """``L D L^T`` factorization of ``K - sigma M`` with its inertia."""

    def __init__(self, K, M, sigma: float):
        A = (sp.csc_matrix(K) - sigma * sp.csc_matrix(M)).tocsc()
        try:
            lu = sla.splu(
                A,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options=dict(SymmetricMode=True),
            )
        except RuntimeError as exc:  # exactly singular
            raise FactorizationError(str(exc)) from exc
        d = lu.U.diagonal()
        if not np.all(np.isfinite(d)) or np.min(np.abs(d)) == 0.0:
            raise FactorizationError("zero pivot")
        self.sigma = float(sigma)
        self.lu = lu
        self.symmetric = bool(np.array_equal(lu.perm_r, lu.perm_c))
        self.negative = int(np.count_nonzero(d < 0.0)) if self.symmetric else None

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.lu.solve(b)


def count_below(K, M, sigma: float) -> int:
    """Number of eigenvalues of the pencil strictly below ``sigma``."""
    f = ShiftedFactor(K, M, sigma)
    if f.negative is None:
        raise FactorizationError("pivoting broke symmetry; inertia unavailable")
    return f.negative


def _factor_below(K, M, sigma: float, max_tries: int = 40) -> ShiftedFactor:
    """Factor at ``sigma``, moving the shift down until no eigenvalue lies below it."""
    step = 1e-3 * max(1.0, abs(sigma))
    s = sigma
    for _ in range(max_tries):
        try:
            f = ShiftedFactor(K, M, s)
        except FactorizationError:
            f = None
        if f is not None and (f.negative is None or f.negative == 0):
            return f
        s -= step
        step *= 2.0
    raise FactorizationError(f"could not place a shift below the spectrum starting from {sigma}")


def _m_orthonormalize(X, M, rng, basis=None, Mbasis=None):
    """M-orthonormal block spanning ``X`` minus its projection on ``basis``.

    Directions lost to cancellation are replaced by random ones so the block
    keeps its width.
    """
    X = np.array(X, dtype=float, copy=True)
    scale = np.max(np.abs(X), axis=0)
    X /= np.where(scale > 0.0, scale, 1.0)  # guards X^T M X against overflow
    ref = max(float(np.max(np.einsum("ij,ij->j", X, M @ X))), 1e-300)
    done = 0
    for _ in range(6):
        if basis is not None and basis.shape[1]:
            for _ in range(2):
                X -= basis @ (Mbasis.T @ X)
        G = X.T @ (M @ X)
        w, U = np.linalg.eigh(0.5 * (G + G.T))
        keep = w > 1e-10 * ref
        if not np.all(keep):
            X = np.hstack([X @ U[:, keep], rng.standard_normal((X.shape[0], int((~keep).sum())))])
            ref = max(float(np.max(np.einsum("ij,ij->j", X, M @ X))), 1e-300)
            done = 0
            continue
        X = X @ (U / np.sqrt(w))
        ref = 1.0
        done += 1
        if done == 2:
            break
    return X, M @ X


def _ritz_core(fac, M, want, side, tol, block, max_basis, max_restarts, rng):
    """Thick-restart block Lanczos for the extreme eigenvalues of ``C = A^{-1} M``.

    ``side="right"`` targets the largest ``t = 1/(lam - sigma)`` (eigenvalues
    just above the shift), ``side="left"`` the most negative ones (just
    below it). Returns Ritz values, vectors and relative residuals sorted in
    the preferred order, plus iteration statistics.
    """
    n = M.shape[0]
    b = max(1, min(block, n))
    m_max = min(n, max_basis or max(3 * want + 4 * b, 12 * b, 60))
    keep = max(want, min(want + max(b, want // 2), m_max - 2 * b))
    sign = -1.0 if side == "right" else 1.0

    V, MV = _m_orthonormalize(rng.standard_normal((n, b)), M, rng)
    CV = fac.solve(MV)
    n_apply = b
    restarts = 0
    while True:
        while V.shape[1] + b <= m_max:
            Q, MQ = _m_orthonormalize(CV[:, -b:], M, rng, V, MV)
            V = np.hstack([V, Q])
            MV = np.hstack([MV, MQ])
            CV = np.hstack([CV, fac.solve(MQ)])
            n_apply += Q.shape[1]
        # Rayleigh-Ritz in the M inner product: H = V^T M C V
        H = MV.T @ CV
        theta, S = np.linalg.eigh(0.5 * (H + H.T))
        order = np.argsort(sign * theta, kind="stable")
        theta, S = theta[order], S[:, order]
        Y = V @ S
        CY = CV @ S
        R = CY - Y * theta
        rel = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, M @ R), 0.0)) / np.abs(theta)
        if np.all(rel[:want] <= tol):
            break
        restarts += 1
        if restarts > max_restarts:
            raise ConvergenceError(
                f"no convergence after {max_restarts} restarts (worst residual {rel[:want].max():.2e})",
                (theta[:want], Y[:, :want], rel[:want]),
            )
        # keep the leading Ritz vectors; the residuals of all of them span the
        # next block (b-dimensional in exact arithmetic), take its dominant part
        Rp = R[:, :keep]
        G = Rp.T @ (M @ Rp)
        _, U = np.linalg.eigh(0.5 * (G + G.T))
        V, MV, CV = Y[:, :keep], M @ Y[:, :keep], CY[:, :keep]
        Q, MQ = _m_orthonormalize(Rp @ U[:, -b:], M, rng, V, MV)
        V = np.hstack([V, Q])
        MV = np.hstack([MV, MQ])
        CV = np.hstack([CV, fac.solve(MQ)])
        n_apply += Q.shape[1]
    stats = dict(block=b, basis=m_max, restarts=restarts, operator_applications=n_apply)
    return theta, Y, rel, stats


def _normalized(vecs, M):
    return vecs / np.sqrt(np.einsum("ij,ij->j", vecs, M @ vecs))


def smallest_eigenpairs(
    K,
    M,
    k: int,
    tol: float = 1e-10,
    shift: float | None = None,
    *,
    block: int = 4,
    max_basis: int | None = None,
    max_restarts: int = 300,
    seed: int = 20240607,
    threshold: float | None = None,
    verify: bool = True,
) -> EigenResult:
    """The ``k`` algebraically smallest eigenpairs of ``K x = lam M x``.

    Parameters
    ----------
    K, M : sparse symmetric matrices, ``M`` positive definite.
    k : number of eigenpairs.
    tol : convergence tolerance on the relative residual of the
        shift-inverted problem, ``||C x - t x||_M / |t|``.
    shift : spectral shift, to be placed below the wanted eigenvalues
        (moved further down automatically when the inertia shows otherwise).
        Defaults to 0.
    block : Lanczos block size.
    threshold : values ``>= threshold`` are flagged in ``below_threshold``.
    verify : recount eigenvalues below the last gap by inertia and raise if
        the iteration skipped one.

    Returns
    -------
    EigenResult with M-orthonormal vectors (columns).
    """
    K = sp.csr_matrix(K)
    M = sp.csr_matrix(M)
    n = K.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    t0 = time.perf_counter()
    if n <= max(4 * k, 40):
        vals, vecs = dense_oracle(K, M, vectors=True)
        meta = dict(method="dense", shift=None, seed=seed, time=time.perf_counter() - t0)
        return _finish(vals[:k], vecs[:, :k], _residuals(K, M, vals[:k], vecs[:, :k]), meta, threshold)

    fac = _factor_below(K, M, 0.0 if shift is None else float(shift))
    sigma = fac.sigma
    rng = np.random.default_rng(seed)
    quick = max_restarts if k == 1 else min(max_restarts, _QUICK_RESTARTS)
    try:
        theta, Y, rel, stats = _ritz_core(fac, M, k, "right", tol, block, max_basis, quick, rng)
    except ConvergenceError as exc:
        if quick >= max_restarts:
            theta, Y, _ = exc.partial
            lam = sigma + 1.0 / theta
            exc.partial = _finish(lam, Y, _residuals(K, M, lam, Y), dict(method="block-lanczos", shift=sigma), threshold)
            raise
        # clustered spectrum: slice [sigma, cut) where the k-th Ritz value
        # (an upper bound of the k-th eigenvalue) fixes the cut
        theta_p, _, _ = exc.partial
        est = np.sort(sigma + 1.0 / theta_p[theta_p > 0.0])
        if len(est) < k:
            raise
        top = float(est[k - 1])
        nxt = float(est[k]) if len(est) > k else top + 1e-3 * max(1.0, abs(top))
        # keep the slicing shift off the (nearly converged) k-th eigenvalue
        cut = top + max(0.5 * (nxt - top), 1e-7 * max(1.0, abs(top)))
        win = eigenpairs_in_window(K, M, sigma, cut, tol, block=block, max_restarts=max_restarts, seed=seed)
        if len(win.values) < k:
            raise ConvergenceError(f"slice below {cut!r} holds {len(win.values)} < {k} eigenvalues", None)
        meta = dict(win.meta, method="slice", shift_low=sigma, time=time.perf_counter() - t0)
        vals, vecs = win.values[:k], win.vectors[:, :k]
        return _finish(vals, vecs, win.residuals[:k], meta, threshold)
    lam = sigma + 1.0 / theta
    vals = lam[:k]
    vecs = _normalized(Y[:, :k], M)
    meta = dict(method="block-lanczos", shift=sigma, seed=seed, **stats)
    if verify:
        # a cut between the k-th value and the next Ritz value must see exactly k
        top = vals[-1]
        nxt = lam[k] if len(lam) > k and theta[k] > 0 else np.inf
        margin = 1e-9 * max(1.0, abs(top))
        cut = max(0.5 * (top + nxt), top + margin) if np.isfinite(nxt) else top + margin
        try:
            counted = ShiftedFactor(K, M, cut).negative
        except FactorizationError:
            counted = None
        meta["inertia_cut"] = float(cut)
        meta["inertia_count"] = counted
        # a multiple eigenvalue straddling index k legitimately raises the count
        if counted is not None and (counted < k or (counted > k and nxt > cut)):
            raise ConvergenceError(
                f"inertia counts {counted} eigenvalues below {cut:.12g}, iteration found {k}",
                _finish(vals, vecs, _residuals(K, M, vals, vecs), meta, threshold),
            )
    meta["time"] = time.perf_counter() - t0
    return _finish(vals, vecs, _residuals(K, M, vals, vecs), meta, threshold)


def eigenpairs_in_window(
    K,
    M,
    lo: float,
    hi: float,
    tol: float = 1e-10,
    *,
    block: int = 4,
    max_count: int = 32,
    max_restarts: int = 300,
    seed: int = 20240607,
) -> EigenResult:
    """All eigenpairs with ``lo <= lam < hi`` (spectrum slicing).

    The count comes from the inertia at both ends; the pairs from a
    shift-inverted iteration with the shift at ``hi``, where the wanted
    eigenvalues are the most negative ones of the transformed operator. This
    stays efficient when the window sits next to a dense cluster above
    ``hi`` (the accumulation at an essential-spectrum threshold).
    """
    if not lo < hi:
        raise ValueError("empty window")
    K = sp.csr_matrix(K)
    M = sp.csr_matrix(M)
    t0 = time.perf_counter()
    n_lo = count_below(K, M, lo)
    fac = ShiftedFactor(K, M, hi)
    q = fac.negative - n_lo
    meta = dict(method="window", window=(float(lo), float(hi)), count=int(q), index_offset=int(n_lo), seed=seed)
    n = K.shape[0]
    if q == 0:
        return EigenResult(np.empty(0), np.empty((n, 0)), np.empty(0), meta)
    if q > max_count:
        mid = 0.5 * (lo + hi)
        parts = [
            eigenpairs_in_window(K, M, a, c, tol, block=block, max_count=max_count, max_restarts=max_restarts, seed=seed)
            for a, c in ((lo, mid), (mid, hi))
        ]
        vals = np.concatenate([p.values for p in parts])
        vecs = np.hstack([p.vectors for p in parts])
        meta["time"] = time.perf_counter() - t0
        return EigenResult(vals, vecs, np.concatenate([p.residuals for p in parts]), meta)
    rng = np.random.default_rng(seed)
    theta, Y, rel, stats = _ritz_core(fac, M, q, "left", tol, block, None, max_restarts, rng)
    lam = hi + 1.0 / theta[:q]
    if np.any(lam < lo) or np.any(lam >= hi):
        raise ConvergenceError(f"window [{lo}, {hi}) holds {q} eigenvalues but iteration returned {lam}")
    order = np.argsort(lam, kind="stable")
    vals = lam[order]
    vecs = _normalized(Y[:, :q][:, order], M)
    meta.update(stats, shift=float(hi), time=time.perf_counter() - t0)
    return EigenResult(vals, vecs, _residuals(K, M, vals, vecs), meta)


def _residuals(K, M, vals, vecs) -> np.ndarray:
    R = K @ vecs - (M @ vecs) * vals
    mn = np.sqrt(np.einsum("ij,ij->j", vecs, M @ vecs))
    return np.linalg.norm(R, axis=0) / mn


def _finish(vals, vecs, res, meta, threshold) -> EigenResult:
    vals = np.asarray(vals, float)
    flag = None if threshold is None else vals < threshold
    return EigenResult(vals, vecs, np.asarray(res), meta, flag)


def dense_oracle(K, M, vectors: bool = False):
    """Full spectrum by dense Cholesky reduction (dimension <= ``DENSE_CAP``)."""
    K = K.toarray() if sp.issparse(K) else np.atleast_2d(np.asarray(K, float))
    M = M.toarray() if sp.issparse(M) else np.atleast_2d(np.asarray(M, float))
    n = K.shape[0]
    if n > DENSE_CAP:
        raise DenseCapError(f"dense oracle is capped at {DENSE_CAP} unknowns, got {n}")
    L = np.linalg.cholesky(0.5 * (M + M.T))
    Kt = sl.solve_triangular(L, sl.solve_triangular(L, 0.5 * (K + K.T), lower=True).T, lower=True).T
    Kt = 0.5 * (Kt + Kt.T)
    if not vectors:
        return np.linalg.eigvalsh(Kt)
    w, U = np.linalg.eigh(Kt)
    return w, sl.solve_triangular(L.T, U, lower=False)
