"""Minimax problem oracles, sampling regimes and analytic test problems.

A problem exposes the component function F(x, y; xi) through a batched
``evaluate(X, Y, samples)`` call: row ``i`` of the result is
F(X[i], Y[i]; samples[i]).  Every row is one function query.  Samples are
integer indices in the finite-sum regime and opaque draws (rows of an
array) in the online regime.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument, PreconditionViolation, UnsupportedDiagnostic

SIMPLEX = "simplex"


def _rows(a, d):
    a = np.asarray(a, dtype=float)
    return a.reshape(1, d) if a.ndim == 1 else a


class MinimaxProblem:
    """Black-box component oracle for ``min_x max_y f(x, y)``.

    ``eval`` is the scalar component function ``F(x, y, xi)``.  Subclasses
    normally override :meth:`evaluate` with a vectorized version.  ``n`` is
    ``None`` for the online regime; online problems must supply ``draw``,
    a callable ``(rng, size) -> samples``.
    """

    def __init__(
        self,
        d1: int,
        d2: int,
        eval: Optional[Callable] = None,
        *,
        n: Optional[int] = None,
        draw: Optional[Callable] = None,
        lipschitz_l: float = 1.0,
        strong_concavity_mu: float = 1.0,
        variance_sigma: float = 0.0,
        y_constraint: Optional[str] = None,
        true_grad: Optional[Callable] = None,
        y_lipschitz: Optional[float] = None,
    ):
        if d1 < 1 or d2 < 1:
            raise InvalidArgument(f"dimensions must be >= 1, got d1={d1}, d2={d2}")
        if n is not None and n < 1:
            raise InvalidArgument(f"finite-sum size must be >= 1, got {n}")
        if n is None and draw is None and type(self).draw_online is MinimaxProblem.draw_online:
            raise InvalidArgument("online problems need a draw function")
        if strong_concavity_mu <= 0:
            raise InvalidArgument("strong_concavity_mu must be > 0")
        if lipschitz_l < strong_concavity_mu:
            raise InvalidArgument("lipschitz_l must be >= strong_concavity_mu (kappa >= 1)")
        if variance_sigma < 0:
            raise InvalidArgument("variance_sigma must be >= 0")
        if y_constraint not in (None, SIMPLEX):
            raise InvalidArgument(f"unknown y constraint {y_constraint!r}")
        self.d1 = int(d1)
        self.d2 = int(d2)
        self.n = None if n is None else int(n)
        self._eval = eval
        self._draw = draw
        self._true_grad = true_grad
        self.lipschitz_l = float(lipschitz_l)
        self.strong_concavity_mu = float(strong_concavity_mu)
        self.variance_sigma = float(variance_sigma)
        self.y_constraint = y_constraint
        # smoothness of y -> F(x, y; xi) alone; defaults to the joint constant
        self.y_lipschitz = float(lipschitz_l if y_lipschitz is None else y_lipschitz)

    @property
    def regime(self) -> str:
        return "online" if self.n is None else "finite-sum"

    @property
    def kappa(self) -> float:
        return self.lipschitz_l / self.strong_concavity_mu

    def evaluate(self, X, Y, samples) -> np.ndarray:
        X = _rows(X, self.d1)
        Y = _rows(Y, self.d2)
        return np.array([self._eval(X[i], Y[i], samples[i]) for i in range(len(samples))], dtype=float)

    def draw_online(self, rng: np.random.Generator, size: int):
        return self._draw(rng, size)

    def all_samples(self):
        if self.n is None:
            raise InvalidArgument("the online regime has no full sample set")
        return np.arange(self.n)

    @property
    def has_true_grad(self) -> bool:
        return self._true_grad is not None

    def true_grad(self, x, y):
        """Exact (grad_x f, grad_y f) of the averaged objective."""
        if self._true_grad is None:
            raise UnsupportedDiagnostic("problem has no exact gradient")
        return self._true_grad(x, y)

    def component_grad(self, x, y, xi):
        raise UnsupportedDiagnostic("problem has no exact component gradient")

    def phi_and_grad(self, x):
        """Phi(x) = max_y f(x, y) and its gradient, when the problem can compute them."""
        raise UnsupportedDiagnostic("problem cannot evaluate Phi")

    def default_y0(self) -> np.ndarray:
        if self.y_constraint == SIMPLEX:
            return np.full(self.d2, 1.0 / self.d2)
        return np.zeros(self.d2)

    def inner_objective(self, x) -> "Objective":
        """The minimization oracle w -> -F(x, w; xi) used to initialize y."""
        x = np.asarray(x, dtype=float)
        problem = self

        def evaluate(W, samples):
            W = _rows(W, problem.d2)
            return -problem.evaluate(np.broadcast_to(x, (len(W), problem.d1)), W, samples)

        grad = None
        if self.has_true_grad:
            def grad(w):
                return -problem.true_grad(x, w)[1]

        return Objective(
            self.d2,
            evaluate,
            n=self.n,
            draw=None if self.n is not None else self.draw_online,
            true_grad=grad,
        )


class Objective:
    """Single-block component oracle ``P(w; xi)`` for minimization."""

    def __init__(self, d, evaluate, *, n=None, draw=None, true_grad=None):
        if d < 1:
            raise InvalidArgument("dimension must be >= 1")
        if n is None and draw is None:
            raise InvalidArgument("online objectives need a draw function")
        self.d = int(d)
        self.n = None if n is None else int(n)
        self._evaluate = evaluate
        self._draw = draw
        self._true_grad = true_grad

    def evaluate(self, W, samples) -> np.ndarray:
        return np.asarray(self._evaluate(W, samples), dtype=float)

    def draw_online(self, rng, size):
        return self._draw(rng, size)

    def all_samples(self):
        if self.n is None:
            raise InvalidArgument("the online regime has no full sample set")
        return np.arange(self.n)

    @property
    def has_true_grad(self) -> bool:
        return self._true_grad is not None

    def true_grad(self, w):
        if self._true_grad is None:
            raise UnsupportedDiagnostic("objective has no exact gradient")
        return self._true_grad(w)


def sample_batch(problem, size: int, rng: np.random.Generator):
    """Draw ``size`` samples with replacement.

    Finite-sum problems return uniform indices in ``[0, n)``; online problems
    return fresh i.i.d. draws from the problem's own generator.
    """
    if size < 1:
        raise InvalidArgument(f"batch size must be >= 1, got {size}")
    if problem.n is not None:
        return rng.integers(0, problem.n, size=int(size))
    return problem.draw_online(rng, int(size))


def _linear_noise(rng, count, dim, sigma):
    # E||xi||^2 = sigma^2 so the component gradient variance equals sigma^2.
    return rng.standard_normal((count, dim)) * (sigma / np.sqrt(dim))


class QuadraticSaddle(MinimaxProblem):
    """f(x, y) = 1/2 x'Px + a'x + x'By - 1/2 y'Cy + b'y.

    Component xi perturbs the linear terms: F = f + xi_x'x + xi_y'y with
    E[xi] = 0 and E||xi||^2 = sigma^2.  The finite-sum regime
    pre-materializes ``n`` centered perturbations so their average is
    exactly zero.
    """

    def __init__(self, P, B, C, a, b, *, sigma=0.0, n=None, rng=None,
                 lipschitz_l=None, strong_concavity_mu=None):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        d1, d2 = B.shape
        if P.shape != (d1, d1) or C.shape != (d2, d2):
            raise InvalidArgument("P, B, C shapes are inconsistent")
        if not np.allclose(P, P.T) or not np.allclose(C, C.T):
            raise InvalidArgument("P and C must be symmetric")
        self.P, self.B, self.C = P, B, C
        self.a = np.asarray(a, dtype=float).reshape(d1)
        self.b = np.asarray(b, dtype=float).reshape(d2)
        eig_c = np.linalg.eigvalsh(C)
        if strong_concavity_mu is None:
            strong_concavity_mu = eig_c[0]
        if lipschitz_l is None:
            H = np.block([[P, B], [B.T, -C]])
            lipschitz_l = max(np.linalg.norm(H, 2), strong_concavity_mu)
        rng = np.random.default_rng() if rng is None else rng
        self._noise = None
        if n is not None:
            noise = _linear_noise(rng, n, d1 + d2, sigma)
            if sigma > 0:
                noise -= noise.mean(axis=0)
            self._noise = noise
        super().__init__(
            d1, d2, n=n,
            lipschitz_l=lipschitz_l,
            strong_concavity_mu=max(strong_concavity_mu, 1e-300),
            variance_sigma=sigma,
            true_grad=self._grad,
        )

    @classmethod
    def random(cls, d1, d2, kappa, sigma, rng, *, n=None, l=1.0, nonconvex=True):
        """Random instance whose declared constants are valid bounds.

        mu = l/kappa is attained by C exactly, and the full Hessian has
        spectral norm <= l by construction (||P||, ||C|| <= 0.6 l and
        ||B|| <= 0.4 l).  Phi stays strongly convex; with ``nonconvex`` the
        x-block P is indefinite when d1 <= d2.
        """
        if kappa < 1:
            raise InvalidArgument("kappa must be >= 1")
        mu = l / kappa
        c_hi = max(mu, min(0.6 * l, 2.0 * mu))
        b_norm = l - max(c_hi, 0.6 * l)
        Qc = _orthogonal(rng, d2)
        eig_c = np.concatenate([[mu], rng.uniform(mu, c_hi, d2 - 1)]) if d2 > 1 else np.array([mu])
        C = (Qc * eig_c) @ Qc.T
        U = _orthogonal(rng, d1)
        V = _orthogonal(rng, d2)
        k = min(d1, d2)
        B = b_norm * U[:, :k] @ V[:, :k].T
        if nonconvex and d1 <= d2 and b_norm > 0:
            p_lo = -0.5 * b_norm**2 / c_hi
        else:
            p_lo = 0.1 * l
        Qp = _orthogonal(rng, d1)
        P = (Qp * rng.uniform(p_lo, 0.6 * l, d1)) @ Qp.T
        P = 0.5 * (P + P.T)
        C = 0.5 * (C + C.T)
        a = rng.standard_normal(d1) * 0.1
        b = rng.standard_normal(d2) * 0.1
        return cls(P, B, C, a, b, sigma=sigma, n=n, rng=rng,
                   lipschitz_l=l, strong_concavity_mu=mu)

    def draw_online(self, rng, size):
        return _linear_noise(rng, size, self.d1 + self.d2, self.variance_sigma)

    def _noise_rows(self, samples):
        if self.n is not None:
            return self._noise[np.asarray(samples, dtype=int)]
        return np.asarray(samples, dtype=float)

    def f(self, x, y) -> float:
        return float(0.5 * x @ self.P @ x + self.a @ x + x @ self.B @ y
                     - 0.5 * y @ self.C @ y + self.b @ y)

    def evaluate(self, X, Y, samples):
        X = _rows(X, self.d1)
        Y = _rows(Y, self.d2)
        xi = self._noise_rows(samples)
        gx = 0.5 * (X @ self.P) + Y @ self.B.T + self.a + xi[:, :self.d1]
        gy = -0.5 * (Y @ self.C) + self.b + xi[:, self.d1:]
        return np.sum(gx * X, axis=1) + np.sum(gy * Y, axis=1)

    def _grad(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.P @ x + self.a + self.B @ y, self.B.T @ x - self.C @ y + self.b

    def component_grad(self, x, y, xi):
        gx, gy = self._grad(x, y)
        noise = self._noise_rows(np.atleast_1d(xi))[0]
        return gx + noise[:self.d1], gy + noise[self.d1:]

    def y_star(self, x):
        return _spd_solve(self.C, self.B.T @ np.asarray(x, dtype=float) + self.b)

    def phi_and_grad(self, x):
        return quad_phi_and_grad(self, x)

    def x_star(self):
        """Minimizer of Phi (requires P + B C^-1 B' positive definite)."""
        CinvBt = _spd_solve(self.C, self.B.T)
        H = self.P + self.B @ CinvBt
        return -np.linalg.solve(H, self.a + self.B @ _spd_solve(self.C, self.b))

    def phi_hessian(self):
        return self.P + self.B @ _spd_solve(self.C, self.B.T)


def _orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _spd_solve(C, rhs):
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise PreconditionViolation("C must be positive definite") from exc
    z = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, z)


def quad_phi_and_grad(q: QuadraticSaddle, x):
    """Closed-form Phi(x) = f(x, y*(x)) and grad Phi(x) = Px + a + B y*(x)."""
    x = np.asarray(x, dtype=float)
    ys = q.y_star(x)
    return q.f(x, ys), q.P @ x + q.a + q.B @ ys


class QuadraticObjective(Objective):
    """p(w) = 1/2 w'Aw + c'w with components P(w; xi) = p(w) + xi'w."""

    def __init__(self, A, c, *, sigma=0.0, n=None, rng=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        self.A = 0.5 * (A + A.T)
        self.c = np.asarray(c, dtype=float).reshape(len(A))
        self.sigma = float(sigma)
        eig = np.linalg.eigvalsh(self.A)
        self.mu, self.l = float(eig[0]), float(eig[-1])
        d = len(A)
        self._noise = None
        if n is not None:
            rng = np.random.default_rng() if rng is None else rng
            noise = _linear_noise(rng, n, d, sigma)
            if sigma > 0:
                noise -= noise.mean(axis=0)
            self._noise = noise
        super().__init__(d, self._eval_rows, n=n,
                         draw=lambda g, s: _linear_noise(g, s, d, self.sigma),
                         true_grad=lambda w: self.A @ w + self.c)

    @classmethod
    def random(cls, d, kappa, sigma, rng, *, l=1.0, n=None):
        Q = _orthogonal(rng, d)
        eig = np.concatenate([[l / kappa, l], rng.uniform(l / kappa, l, max(d - 2, 0))])[:d]
        return cls((Q * eig) @ Q.T, rng.standard_normal(d), sigma=sigma, n=n, rng=rng)

    def _eval_rows(self, W, samples):
        W = _rows(W, self.d)
        xi = self._noise[np.asarray(samples, dtype=int)] if self.n is not None else np.asarray(samples)
        return np.sum((0.5 * (W @ self.A) + self.c + xi) * W, axis=1)

    def minimizer(self):
        return -np.linalg.solve(self.A, self.c)


def tracking_error(problem: MinimaxProblem, x, y) -> float:
    """||grad_y f(x, y)||^2."""
    if not problem.has_true_grad:
        raise UnsupportedDiagnostic("tracking error needs the exact gradient")
    gy = problem.true_grad(x, y)[1]
    return float(gy @ gy)


def estimation_error(problem: MinimaxProblem, x, y, v, u) -> float:
    """||v - grad_x f||^2 + ||u - grad_y f||^2."""
    if not problem.has_true_grad:
        raise UnsupportedDiagnostic("estimation error needs the exact gradient")
    gx, gy = problem.true_grad(x, y)
    ex = np.asarray(v) - gx
    ey = np.asarray(u) - gy
    return float(ex @ ex + ey @ ey)
