"""Exact bosonic N-body dynamics for the regularized anyon Hamiltonian.

States live on tensor grids (Grid2D)^N with N in {2, 3}.  The
Hamiltonian is applied matrix-free:

  kinetic        sum_j -Lap_j                      (spectral per particle)
  mixed 2-body   alpha sum_{j!=k} [K_jk.(-i grad_j) + (-i grad_j).K_jk]
  3-body         alpha^2 sum_{j!=k!=l} K_jk . K_jl (multiplication)
  singular       alpha^2 sum_{j!=k} |K_jk|^2       (multiplication)

with alpha = beta/(N-1) and K the perpendicular-gradient kernel sampled
on minimal-image displacements.  The mixed term is the discretely
symmetrized average, which keeps the operator exactly Hermitian.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _fft
from .errors import (BudgetExceededError, GridMismatchError,
                     KrylovBreakdownError)
from .fields import WaveField
from .grid import Grid2D
from .kernels import grad_perp_minimal_image

DEFAULT_DIMENSION_BUDGET = 2**24


@dataclass
class ManyBodyState:
    """Complex tensor over (Grid2D)^N, axes (x1a, x1b, ..., xNa, xNb)."""

    grid: Grid2D
    N: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = (self.grid.n,) * (2 * self.N)
        if self.values.shape != expected:
            raise GridMismatchError(
                f"state shape {self.values.shape} != {expected}"
            )
        self.values = np.ascontiguousarray(self.values, dtype=complex)

    @property
    def weight(self) -> float:
        """Quadrature weight h^(2N) of the discrete inner product."""
        return self.grid.h ** (2 * self.N)

    def norm(self) -> float:
        return float(np.sqrt(self.weight * np.sum(np.abs(self.values) ** 2)))

    def normalize(self) -> "ManyBodyState":
        return ManyBodyState(self.grid, self.N, self.values / self.norm())

    def inner(self, other: "ManyBodyState") -> complex:
        return self.weight * np.vdot(self.values, other.values)

    def swap_defect(self) -> float:
        """Worst relative asymmetry over particle swaps."""
        worst = 0.0
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        for j, k in itertools.combinations(range(self.N), 2):
            swapped = np.swapaxes(
                np.swapaxes(self.values, 2 * j, 2 * k), 2 * j + 1, 2 * k + 1)
            worst = max(worst, float(np.max(np.abs(self.values - swapped))) / scale)
        return worst

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        return self.swap_defect() < tol


def tensor_power(phi: WaveField, N: int) -> ManyBodyState:
    """phi^(x N), normalized."""
    vals = phi.values
    out = vals
    for _ in range(N - 1):
        out = np.tensordot(out, vals, axes=0)
    return ManyBodyState(phi.grid, N, out).normalize()


def _axis_wavenumbers(grid: Grid2D, nparticles: int, zero_nyquist: bool = True):
    """k along each tensor axis, reshaped for broadcasting.

    Gradient applications use the Nyquist-zeroed variant; even-order
    multipliers (kinetic, Sobolev weights) the full one.
    """
    k1 = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
    if zero_nyquist and grid.n % 2 == 0:
        k1 = k1.copy()
        k1[grid.n // 2] = 0.0
    out = []
    for a in range(2 * nparticles):
        shape = [1] * (2 * nparticles)
        shape[a] = grid.n
        out.append(k1.reshape(shape))
    return out


def _pair_component(comp: np.ndarray, j: int, k: int, nparticles: int,
                    n: int) -> np.ndarray:
    """comp[(x_j - x_k) mod n] broadcast over the full tensor axes."""
    a = np.arange(n)

    def ax(particle, second):
        shape = [1] * (2 * nparticles)
        shape[2 * particle + second] = n
        return a.reshape(shape)

    d1 = (ax(j, 0) - ax(k, 0)) % n
    d2 = (ax(j, 1) - ax(k, 1)) % n
    return comp[d1, d2]


class ManyBodyOperator:
    """Matrix-free application of the N-body Hamiltonian."""

    def __init__(self, grid: Grid2D, N: int, beta: float, R: float,
                 terms=("kinetic", "mixed", "threebody", "singular"),
                 budget: int = DEFAULT_DIMENSION_BUDGET):
        if N not in (2, 3):
            raise ValueError(f"N must be 2 or 3, got {N}")
        dim = (grid.n ** 2) ** N
        if dim > budget:
            raise BudgetExceededError(
                f"state dimension {dim} exceeds budget {budget}")
        self.grid = grid
        self.N = N
        self.beta = float(beta)
        self.R = float(R)
        self.alpha = self.beta / (N - 1)
        self.terms = tuple(terms)
        self.kax = _axis_wavenumbers(grid, N, zero_nyquist=True)

        full = (grid.n,) * (2 * N)
        self.k2tot = np.zeros(full) if "kinetic" in terms else None
        if self.k2tot is not None:
            # square of the Nyquist-zeroed gradient: keeps the kinetic
            # term exactly consistent with one-body spectral derivatives
            for a2 in self.kax:
                self.k2tot = self.k2tot + a2 ** 2

        interacting = self.beta != 0.0 and set(terms) & {"mixed", "threebody",
                                                         "singular"}
        self.B = None
        self.vmult = None
        if interacting:
            K = grad_perp_minimal_image(grid, R)
            pair = {}
            for j, k in itertools.permutations(range(N), 2):
                pair[(j, k)] = np.stack([
                    _pair_component(K[0], j, k, N, grid.n),
                    _pair_component(K[1], j, k, N, grid.n),
                ])
            if "mixed" in terms:
                self.B = []
                for j in range(N):
                    b = np.zeros((2,) + full)
                    for k in range(N):
                        if k != j:
                            b += pair[(j, k)]
                    self.B.append(b)
            vmult = np.zeros(full)
            if "singular" in terms:
                k2comp = K[0] ** 2 + K[1] ** 2
                for j, k in itertools.permutations(range(N), 2):
                    vmult += _pair_component(k2comp, j, k, N, grid.n)
            if "threebody" in terms and N >= 3:
                for j, k, l in itertools.permutations(range(N), 3):
                    if k < l:
                        # ordered (k,l) and (l,k) give equal products
                        p1, p2 = pair[(j, k)], pair[(j, l)]
                        vmult += 2.0 * (p1[0] * p2[0] + p1[1] * p2[1])
            self.vmult = self.alpha ** 2 * vmult

    def apply(self, values: np.ndarray) -> np.ndarray:
        F = _fft.fftn(values)
        if self.k2tot is not None:
            acc = self.k2tot * F
        else:
            acc = np.zeros_like(F)
        phys = None
        if self.vmult is not None:
            phys = self.vmult * values
        if self.B is not None:
            a = self.alpha
            if phys is None:
                phys = np.zeros_like(values)
            for j in range(self.N):
                for c in range(2):
                    kjc = self.kax[2 * j + c]
                    grad = _fft.ifftn(1j * kjc * F)
                    phys += (-1j * a) * self.B[j][c] * grad
                    acc += a * kjc * _fft.fftn(self.B[j][c] * values)
        out = _fft.ifftn(acc)
        if phys is not None:
            out += phys
        return out

    def __call__(self, state: ManyBodyState) -> ManyBodyState:
        if state.N != self.N or not state.grid.same_geometry(self.grid):
            raise GridMismatchError("state/operator geometry mismatch")
        return ManyBodyState(self.grid, self.N, self.apply(state.values))

    def expectation(self, state: ManyBodyState) -> float:
        val = state.weight * np.vdot(state.values, self.apply(state.values))
        return float(val.real)


def build_hamiltonian(N: int, grid: Grid2D, beta: float, R: float,
                      budget: int = DEFAULT_DIMENSION_BUDGET,
                      terms=("kinetic", "mixed", "threebody", "singular")
                      ) -> ManyBodyOperator:
    """Matrix-free H_{N,R}; R = 0 is rejected (singular on the grid)."""
    if R <= 0 and beta != 0.0:
        raise ValueError("many-body Hamiltonian requires R > 0: the point "
                         "kernel is singular at coincident grid points")
    return ManyBodyOperator(grid, N, beta, R, terms=terms, budget=budget)


def _lanczos_expm(apply_fn, v0: np.ndarray, dt: float, m: int, tol: float,
                  max_m: int = 120):
    """w ~= exp(-i dt H) v0 for Hermitian matrix-free H; returns (w, err).

    The Krylov space grows until the standard a posteriori residual
    beta_k |[exp(-i dt T_k)]_{k,1}| drops below tol (checked as the
    recurrence proceeds, with full reorthogonalization).
    """
    norm0 = float(np.linalg.norm(v0))
    if norm0 == 0.0:
        return v0.copy(), 0.0
    dim = v0.size
    cap = min(max(max_m, m), dim)
    alloc = min(max(m, 8), cap)
    V = np.empty((alloc + 1, dim), dtype=complex)
    alphas = np.zeros(cap)
    betas = np.zeros(cap)
    V[0] = v0 / norm0

    def solution(k_eff):
        al = alphas[:k_eff]
        be = betas[: max(k_eff - 1, 0)]
        evals, evecs = scipy.linalg.eigh_tridiagonal(al, be)
        coef = evecs @ (np.exp(-1j * dt * evals) * np.conj(evecs[0, :]))
        return coef

    last_err = np.inf
    for k in range(cap):
        if k + 1 >= V.shape[0]:
            V = np.vstack([V, np.empty((min(alloc, cap - k) + 1, dim),
                                       dtype=complex)])
        w = apply_fn(V[k])
        a = float(np.real(np.vdot(V[k], w)))
        alphas[k] = a
        w -= a * V[k]
        if k > 0:
            w -= betas[k - 1] * V[k - 1]
        # full reorthogonalization: cheap at these subspace sizes
        w -= (V[: k + 1].conj() @ w) @ V[: k + 1]
        b = float(np.linalg.norm(w))
        if b < 1e-13 * max(abs(a), 1.0):
            coef = solution(k + 1)  # invariant subspace: exact
            return norm0 * (coef @ V[: k + 1]), 0.0
        betas[k] = b
        V[k + 1] = w / b
        if k + 1 >= min(4, cap):
            coef = solution(k + 1)
            last_err = float(b * abs(coef[-1]))
            if last_err <= tol:
                return norm0 * (coef @ V[: k + 1]), last_err
    coef = solution(cap)
    warnings.warn(f"Lanczos residual {last_err:.2e} above tolerance "
                  f"{tol:.1e} at subspace size {cap}")
    return norm0 * (coef @ V[:cap]), last_err


def propagate(psi0: ManyBodyState, H: ManyBodyOperator, T: float, dt: float,
              sample_every: int = 1, krylov_dim: int = 30, tol: float = 1e-12,
              callback=None):
    """Krylov exponential propagation; returns sampled (t, state, norm) rows.

    Norm drift is recorded, never silently renormalized.
    """
    if not psi0.is_symmetric():
        raise ValueError("initial state must be bosonic-symmetric")
    if abs(psi0.norm() - 1.0) > 1e-8:
        raise ValueError("initial state must be normalized")
    nsteps = int(round(T / dt)) if T > 0 else 0
    shape = psi0.values.shape

    def apply_flat(v):
        return H.apply(v.reshape(shape)).ravel()

    samples = []

    def record(t, vec):
        state = ManyBodyState(psi0.grid, psi0.N, vec.reshape(shape).copy())
        samples.append((t, state, state.norm()))
        if callback is not None:
            callback(t, state)

    vec = psi0.values.ravel().copy()
    record(0.0, vec)
    for k in range(1, nsteps + 1):
        vec, _err = _lanczos_expm(apply_flat, vec, dt, krylov_dim, tol)
        if not np.all(np.isfinite(vec.view(float))):
            raise KrylovBreakdownError(f"non-finite state at t = {k * dt:.6g}")
        if k % sample_every == 0 or k == nsteps:
            record(k * dt, vec)
    return samples


@dataclass
class ReducedDensityMatrix:
    """One-particle density matrix as a plain (n^2, n^2) matrix.

    Stored with the h^2 convention that makes it idempotent-compatible
    with projectors P = h^2 phi phi^dag: eigenvalues are occupation
    fractions and the trace is 1.
    """

    grid: Grid2D
    matrix: np.ndarray = field(repr=False)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return scipy.linalg.eigvalsh(self.matrix)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def rdm1(psi: ManyBodyState) -> ReducedDensityMatrix:
    """Partial trace over particles 2..N with h^2 weights, trace
    normalized to 1."""
    d1 = psi.grid.n ** 2
    M = psi.values.reshape(d1, -1)
    G = psi.weight * (M @ M.conj().T)
    G /= np.trace(G).real
    return ReducedDensityMatrix(grid=psi.grid, matrix=G)


def depletion_and_distance(gamma: ReducedDensityMatrix, phi: WaveField):
    """(E1, R1): condensate depletion and trace distance to |phi><phi|."""
    h2 = phi.grid.h ** 2
    v = phi.values.ravel()
    e1 = 1.0 - float(np.real(h2 * np.vdot(v, gamma.matrix @ v)))
    diff = gamma.matrix - h2 * np.outer(v, v.conj())
    r1 = float(np.sum(np.abs(scipy.linalg.eigvalsh(diff))))
    return e1, r1


class ProjectorAlgebra:
    """Condensate projectors p_j, q_j and counting operators P_k, m(xi)."""

    def __init__(self, N: int, phi: WaveField):
        if N not in (2, 3):
            raise ValueError("N must be 2 or 3")
        self.N = N
        self.grid = phi.grid
        nrm = phi.norm()
        if abs(nrm - 1.0) > 1e-8:
            raise ValueError("phi must be normalized")
        self.phi = phi.values / nrm
        self._phi_flat = self.phi.ravel()
        self.h2 = phi.grid.h ** 2

    def _check(self, psi: ManyBodyState):
        if psi.N != self.N or not psi.grid.same_geometry(self.grid):
            raise GridMismatchError("state/projector geometry mismatch")

    def p(self, j: int, values: np.ndarray) -> np.ndarray:
        """|phi><phi| acting on particle j."""
        n = self.grid.n
        moved = np.moveaxis(values, (2 * j, 2 * j + 1), (0, 1))
        flat = moved.reshape(n * n, -1)
        coef = self.h2 * (self._phi_flat.conj() @ flat)
        out = np.outer(self._phi_flat, coef).reshape(moved.shape)
        return np.moveaxis(out, (0, 1), (2 * j, 2 * j + 1))

    def q(self, j: int, values: np.ndarray) -> np.ndarray:
        return values - self.p(j, values)

    def apply_pattern(self, pattern, values: np.ndarray) -> np.ndarray:
        """Apply prod_j (p or q) given pattern[j] in {'p','q'}."""
        out = values
        for j, which in enumerate(pattern):
            out = self.p(j, out) if which == "p" else self.q(j, out)
        return out

    def P_k(self, k: int, values: np.ndarray) -> np.ndarray:
        """Projector onto exactly k particles outside the condensate."""
        if k < 0 or k > self.N:
            return np.zeros_like(values)
        out = np.zeros_like(values)
        for qset in itertools.combinations(range(self.N), k):
            pattern = ["q" if j in qset else "p" for j in range(self.N)]
            out += self.apply_pattern(pattern, values)
        return out

    def weight_op(self, weights, values: np.ndarray) -> np.ndarray:
        """sum_k weights[k] P_k; weights indexed k = 0..N."""
        out = np.zeros_like(values)
        for k in range(self.N + 1):
            w = weights[k]
            if w != 0.0:
                out += w * self.P_k(k, values)
        return out

    def m_weights(self, xi: float) -> np.ndarray:
        """(k/N)^xi for k = 1..N, zero at k = 0."""
        w = np.zeros(self.N + 1)
        for k in range(1, self.N + 1):
            w[k] = (k / self.N) ** xi
        return w

    def shifted_m_weights(self, xi: float, n: int) -> np.ndarray:
        """tau_{-n} shift of the m(xi) weight: k -> weight(k - n).

        Negative arguments follow the weight formula when it stays
        real-valued (integer xi, e.g. the linear counting weight) and
        are zero otherwise (fractional powers).
        """
        w = np.zeros(self.N + 1)
        for k in range(self.N + 1):
            kk = k - n
            if 1 <= kk <= self.N:
                w[k] = (kk / self.N) ** xi
            elif kk < 0 and float(xi).is_integer():
                w[k] = float(np.sign(kk) ** int(xi)) * (abs(kk) / self.N) ** xi
        return w

    def m_hat(self, xi: float, psi: ManyBodyState) -> ManyBodyState:
        self._check(psi)
        if xi < 0:
            p0 = self.P_k(0, psi.values)
            p0_norm = float(np.sqrt(psi.weight * np.sum(np.abs(p0) ** 2)))
            if p0_norm > 1e-8 * max(psi.norm(), 1e-300):
                raise ValueError(
                    f"m({xi}) is only defined on the range of 1 - P_0; "
                    f"state has P_0 component of norm {p0_norm:.3e}")
        out = self.weight_op(self.m_weights(xi), psi.values)
        return ManyBodyState(self.grid, self.N, out)


def mn_observables(psi: ManyBodyState, phi: WaveField):
    """(E1, M_N, ||grad_1 q_1 psi||) with shared spectral conventions."""
    alg = ProjectorAlgebra(psi.N, phi)
    q1 = alg.q(0, psi.values)
    e1 = float(np.real(psi.weight * np.vdot(psi.values, q1)))
    m_half = alg.weight_op(alg.m_weights(0.5), psi.values)
    mn = float(np.real(psi.weight * np.vdot(psi.values, m_half)))
    kax = _axis_wavenumbers(psi.grid, psi.N)
    F = _fft.fftn(q1)
    g1 = _fft.ifftn(1j * kax[0] * F)
    g2 = _fft.ifftn(1j * kax[1] * F)
    grad_norm = float(np.sqrt(psi.weight * np.sum(np.abs(g1) ** 2
                                                  + np.abs(g2) ** 2)))
    return e1, mn, grad_norm


def product_energy_quadrature(phi: WaveField, N: int, beta: float,
                              R: float) -> float:
    """Direct quadrature of N^{-1} <phi^N, H phi^N> (minimal-image kernels).

    Independent of the tensor machinery: assembles the kinetic, mixed,
    three-body, and singular pair contributions from circular
    convolutions of one-body fields.
    """
    grid = phi.grid
    h2 = grid.h ** 2
    kx, ky = grid.wavenumbers()
    uh = _fft.fft2(phi.values)
    ux = _fft.ifft2(1j * kx * uh)
    uy = _fft.ifft2(1j * ky * uh)
    kinetic = h2 * float(np.sum(np.abs(ux) ** 2 + np.abs(uy) ** 2))
    if beta == 0.0:
        return kinetic
    rho = np.abs(phi.values) ** 2
    j1 = 2.0 * np.imag(np.conj(phi.values) * ux)
    j2 = 2.0 * np.imag(np.conj(phi.values) * uy)
    K = grad_perp_minimal_image(grid, R)
    rho_hat = _fft.fft2(rho)
    a1 = h2 * np.real(_fft.ifft2(_fft.fft2(K[0]) * rho_hat))
    a2 = h2 * np.real(_fft.ifft2(_fft.fft2(K[1]) * rho_hat))
    k2sum = K[0] ** 2 + K[1] ** 2
    s2 = h2 * np.real(_fft.ifft2(_fft.fft2(k2sum) * rho_hat))
    mixed = beta * h2 * float(np.sum(j1 * a1 + j2 * a2))
    three = (beta ** 2 * (N - 2) / (N - 1)) * h2 * float(
        np.sum((a1 ** 2 + a2 ** 2) * rho))
    sing = (beta ** 2 / (N - 1)) * h2 * float(np.sum(s2 * rho))
    return kinetic + mixed + three + sing


def energy_gap_manybody(psi: ManyBodyState, H: ManyBodyOperator,
                        phi: WaveField, kspec) -> float:
    """| N^{-1} <psi, H psi> - E_R^af[phi] |."""
    from .observables import energy_af
    e_n = H.expectation(psi) / H.N
    e_af = energy_af(phi, H.beta, kspec).total
    return abs(e_n - e_af)


MANYBODY_COLUMNS = ("t", "E1", "M_N", "grad_q1_norm", "E_N", "gap",
                    "trace_distance")


def condensate_experiment(phi0: WaveField, N: int, beta: float, R: float,
                          T: float, dt: float, sample_every: int = 1,
                          budget: int = DEFAULT_DIMENSION_BUDGET,
                          krylov_dim: int = 30, tol: float = 1e-12):
    """Propagate phi0^(x N) under H_{N,R} against its mean-field pilot.

    The pilot field is advanced with the integrating-factor stepper at
    the same dt on the same grid.  Returns (rows, final_state) where each
    row is (t, E1, M_N, grad_q1_norm, E_N, gap, trace_distance).
    """
    from .css import CssParams, IntegratingFactorRK4
    from .kernels import kernel_spectrum
    grid = phi0.grid
    params = CssParams(beta=beta, R=R, dt=dt, T=T, sample_every=sample_every)
    kspec = kernel_spectrum(grid, R)
    stepper = IntegratingFactorRK4(grid, params, kspec)
    H = build_hamiltonian(N, grid, beta, R, budget=budget)
    psi0 = tensor_power(phi0, N)

    phis = {0.0: phi0}
    nsteps = int(round(T / dt)) if T > 0 else 0
    uhat = _fft.fft2(phi0.values)
    for k in range(1, nsteps + 1):
        uhat = stepper.step_hat(uhat)
        if k % sample_every == 0 or k == nsteps:
            phis[round(k * dt, 12)] = WaveField(grid, _fft.ifft2(uhat))

    rows = []

    def on_sample(t, state):
        phi_t = phis[round(t, 12)]
        e1, mn, gq = mn_observables(state, phi_t)
        gamma = rdm1(state)
        _e1_rdm, r1 = depletion_and_distance(gamma, phi_t)
        e_n = H.expectation(state) / N
        gap = energy_gap_manybody(state, H, phi_t, kspec)
        rows.append((t, e1, mn, gq, e_n, gap, r1))

    samples = propagate(psi0, H, T, dt, sample_every=sample_every,
                        krylov_dim=krylov_dim, tol=tol, callback=on_sample)
    final_state = samples[-1][1]
    norm_drift = max(abs(norm - 1.0) for _, _, norm in samples)
    return rows, final_state, norm_drift
