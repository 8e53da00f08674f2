"""Dense complex kernels: one-sided Jacobi SVD and Hessenberg + shifted QR eigenvalues."""

from __future__ import annotations

import numpy as np
from numba import njit

JACOBI_TOL = 1e-15
JACOBI_MAX_SWEEPS = 80
QR_SWEEPS_PER_N = 30


class KernelError(RuntimeError):
    pass


@njit(cache=True)
def _jacobi_svd(W, Vt, tol, floor, max_sweeps):
    """One-sided Jacobi on the rows of W = A^T (columns of A, stored contiguously).

    Rotates pairs of columns of A until they are mutually orthogonal.  Columns
    with squared norm below ``floor`` are numerically zero and are left alone.
    On return row p of W is s_p u_p^T and row p of Vt is v_p^T.  Returns the
    number of sweeps used, or -1 if max_sweeps was reached.
    """
    n, m = W.shape
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0j
                for i in range(m):
                    gp = W[p, i]
                    gq = W[q, i]
                    alpha += gp.real * gp.real + gp.imag * gp.imag
                    beta += gq.real * gq.real + gq.imag * gq.imag
                    gamma += gp.conjugate() * gq
                ag = abs(gamma)
                if ag == 0.0 or alpha <= floor or beta <= floor or ag <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                # phase so that the off-diagonal entry becomes real positive
                phc = (gamma / ag).conjugate()
                zeta = (beta - alpha) / (2.0 * ag)
                if zeta >= 0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = c * t
                for i in range(m):
                    gp = W[p, i]
                    gq = W[q, i] * phc
                    W[p, i] = c * gp - sn * gq
                    W[q, i] = sn * gp + c * gq
                for i in range(n):
                    vp = Vt[p, i]
                    vq = Vt[q, i] * phc
                    Vt[p, i] = c * vp - sn * vq
                    Vt[q, i] = sn * vp + c * vq
        if not rotated:
            return sweep + 1
    return -1


def jacobi_svd(A: np.ndarray, compute_uv: bool = False):
    """Singular values (descending) of a complex matrix; optionally (U, s, Vh) with A = U diag(s) Vh."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError("matrix expected")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    W = np.ascontiguousarray(A.T, dtype=np.complex128)
    n, m = W.shape
    Vt = np.eye(n, dtype=np.complex128)
    eps = np.finfo(float).eps
    # rounding in the inner products limits the attainable cosine to about sqrt(m) eps
    tol = max(JACOBI_TOL, np.sqrt(m) * eps)
    floor = (eps * np.sqrt(np.sum(W.real ** 2 + W.imag ** 2))) ** 2
    sweeps = _jacobi_svd(W, Vt, tol, floor, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise KernelError("Jacobi SVD did not converge")
    s = np.sqrt(np.sum(W.real ** 2 + W.imag ** 2, axis=1))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    if not compute_uv:
        return s
    G = W[order].T
    V = Vt[order].T
    U = np.zeros_like(G)
    nz = s > 0
    U[:, nz] = G[:, nz] / s[nz]
    return U, s, V.conj().T


@njit(cache=True)
def _hessenberg(H):
    """Householder reduction to upper Hessenberg form, in place."""
    n = H.shape[0]
    for k in range(n - 2):
        norm2 = 0.0
        for i in range(k + 1, n):
            norm2 += H[i, k].real ** 2 + H[i, k].imag ** 2
        if norm2 == 0.0:
            continue
        x0 = H[k + 1, k]
        ax0 = abs(x0)
        norm = np.sqrt(norm2)
        ph = x0 / ax0 if ax0 > 0 else 1.0 + 0j
        alpha = -ph * norm
        v = np.empty(n - k - 1, dtype=np.complex128)
        for i in range(k + 1, n):
            v[i - k - 1] = H[i, k]
        v[0] -= alpha
        vn2 = 0.0
        for i in range(v.size):
            vn2 += v[i].real ** 2 + v[i].imag ** 2
        if vn2 == 0.0:
            continue
        # H <- (I - 2 v v^H / |v|^2) H (I - 2 v v^H / |v|^2)
        for j in range(k, n):
            acc = 0j
            for i in range(v.size):
                acc += v[i].conjugate() * H[k + 1 + i, j]
            acc *= 2.0 / vn2
            for i in range(v.size):
                H[k + 1 + i, j] -= v[i] * acc
        for i in range(n):
            acc = 0j
            for j in range(v.size):
                acc += H[i, k + 1 + j] * v[j]
            acc *= 2.0 / vn2
            for j in range(v.size):
                H[i, k + 1 + j] -= acc * v[j].conjugate()
        H[k + 1, k] = alpha
        for i in range(k + 2, n):
            H[i, k] = 0j


@njit(cache=True)
def _givens(a, b):
    """(c, s) with c real so that [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]."""
    aa = abs(a)
    ab = abs(b)
    if ab == 0.0:
        return 1.0, 0j
    if aa == 0.0:
        return 0.0, 1.0 + 0j
    r = np.hypot(aa, ab)
    c = aa / r
    s = (a / aa) * b.conjugate() / r
    return c, s


@njit(cache=True)
def _hessenberg_qr(H, max_iter):
    """Eigenvalues of an upper Hessenberg matrix by single-shift implicit QR.

    Eigenvalue-only variant: rotations touch the active window only.  Returns
    (eigenvalues, ok).
    """
    n = H.shape[0]
    eig = np.zeros(n, dtype=np.complex128)
    eps = 2.220446049250313e-16
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0, 0]
            break
        # look for a negligible subdiagonal entry
        lo = hi
        while lo > 0:
            scale = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if scale == 0.0:
                scale = 1.0
            if abs(H[lo, lo - 1]) <= eps * scale:
                H[lo, lo - 1] = 0j
                break
            lo -= 1
        if lo == hi:
            eig[hi] = H[hi, hi]
            hi -= 1
            its = 0
            continue
        total += 1
        if total > max_iter:
            return eig, False
        its += 1
        if its % 10 == 0:
            # exceptional shift
            mu = H[hi, hi] + abs(H[hi, hi - 1].real) + abs(H[hi - 1, hi - 2].real if hi - 2 >= lo else 0.0)
        else:
            # Wilkinson shift from the trailing 2x2 block
            a = H[hi - 1, hi - 1]
            b = H[hi - 1, hi]
            c = H[hi, hi - 1]
            d = H[hi, hi]
            tr2 = 0.5 * (a + d)
            disc = np.sqrt(0.25 * (a - d) * (a - d) + b * c)
            l1 = tr2 + disc
            l2 = tr2 - disc
            mu = l1 if abs(l1 - d) < abs(l2 - d) else l2
        x = H[lo, lo] - mu
        y = H[lo + 1, lo]
        for k in range(lo, hi):
            if k > lo:
                x = H[k, k - 1]
                y = H[k + 1, k - 1]
            c, s = _givens(x, y)
            # rows k, k+1
            jstart = k - 1 if k > lo else lo
            for j in range(jstart, hi + 1):
                h1 = H[k, j]
                h2 = H[k + 1, j]
                H[k, j] = c * h1 + s * h2
                H[k + 1, j] = -s.conjugate() * h1 + c * h2
            if k > lo:
                H[k + 1, k - 1] = 0j
            # columns k, k+1
            iend = k + 2 if k + 2 <= hi else hi
            for i in range(lo, iend + 1):
                h1 = H[i, k]
                h2 = H[i, k + 1]
                H[i, k] = c * h1 + s.conjugate() * h2
                H[i, k + 1] = -s * h1 + c * h2
    return eig, True


def qr_eigenvalues(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix expected")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    n = A.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.complex128)
    H = np.array(A, dtype=np.complex128, order="C")
    _hessenberg(H)
    eig, ok = _hessenberg_qr(H, QR_SWEEPS_PER_N * n)
    if not ok:
        raise KernelError(f"QR iteration did not converge within {QR_SWEEPS_PER_N * n} sweeps")
    return eig
