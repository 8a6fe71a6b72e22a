"""Follow-the-approximate-leader for constrained linear forecasters.

The learner keeps a second-order model ``1/2 w'Aw - b'w`` of the loss history
and plays its minimiser over a parameter set (a Euclidean ball or a box).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InvalidArgument, NumericError
from .losses import LossFunction, grad_wrt_weights

_EIG_FLOOR = 1e-12
_ROOT_ITERS = 200


# -- parameter sets ---------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument("ball radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, w, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(np.asarray(w) - self.center)) <= self.radius + tol

    def project(self, w) -> np.ndarray:
        c = np.asarray(self.center)
        d = np.asarray(w, dtype=float) - c
        n = np.linalg.norm(d)
        return c + d * (self.radius / n) if n > self.radius else c + d

    def prediction_range(self, x) -> tuple[float, float]:
        x = np.asarray(x, dtype=float)
        mid = float(np.dot(self.center, x))
        half = self.radius * float(np.linalg.norm(x))
        return mid - half, mid + half

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        d = rng.standard_normal((n, self.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.dim)
        return np.asarray(self.center) + r * d

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or any(l > u for l, u in zip(self.lower, self.upper)):
            raise InvalidArgument("box needs lower <= upper with matching dimension")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w)
        return bool(np.all(w >= np.asarray(self.lower) - tol) and np.all(w <= np.asarray(self.upper) + tol))

    def project(self, w) -> np.ndarray:
        return np.clip(np.asarray(w, dtype=float), self.lower, self.upper)

    def prediction_range(self, x) -> tuple[float, float]:
        x = np.asarray(x, dtype=float)
        a, b = np.multiply(self.lower, x), np.multiply(self.upper, x)
        return float(np.minimum(a, b).sum()), float(np.maximum(a, b).sum())

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, (n, self.dim))

    def to_dict(self) -> dict:
        return {"kind": "box", "lower": list(self.lower), "upper": list(self.upper)}


ParameterSet = Ball | Box


def ball(center, radius: float) -> Ball:
    if np.ndim(center) == 0:
        raise InvalidArgument("ball center must be a vector")
    return Ball(tuple(float(c) for c in center), float(radius))


def box(lower, upper) -> Box:
    return Box(tuple(float(v) for v in lower), tuple(float(v) for v in upper))


def parameter_set_from_dict(d: dict) -> ParameterSet:
    if d["kind"] == "ball":
        return ball(d["center"], d["radius"])
    if d["kind"] == "box":
        return box(d["lower"], d["upper"])
    raise InvalidArgument(f"unknown parameter set {d['kind']!r}")


# -- constrained quadratic --------------------------------------------------

def quadratic_objective(A, b, w) -> float:
    w = np.asarray(w, dtype=float)
    return 0.5 * float(w @ A @ w) - float(b @ w)


def solve_constrained_quadratic(A, b, w_set: ParameterSet) -> np.ndarray:
    """Minimise ``1/2 w'Aw - b'w`` over ``w_set`` for PSD ``A``.

    Ties (singular ``A``) resolve to the minimiser closest to the ball centre,
    i.e. the minimum-norm one for origin-centred balls. Boxes add a vanishing
    ridge, which pulls ties toward the origin, and solve with an active set.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if isinstance(w_set, Ball):
        return _solve_ball(A, b, w_set)
    return _solve_box(A, b, w_set)


def _solve_ball(A, b, w_set: Ball) -> np.ndarray:
    c = np.asarray(w_set.center)
    r = w_set.radius
    bp = b - A @ c
    # Interior fast path for well-conditioned A.
    try:
        L = np.linalg.cholesky(A)
        d = np.diag(L)
        if d.min() > 1e-6 * d.max():
            v = np.linalg.solve(A, bp)
            if np.linalg.norm(v) <= r:
                return c + v
    except np.linalg.LinAlgError:
        pass

    lam, Q = np.linalg.eigh(A)
    tol = _EIG_FLOOR * max(1.0, float(lam.max(initial=0.0)))
    pos = lam > tol
    bt = Q.T @ bp
    lam_c = np.where(pos, lam, 0.0)
    scale = max(1.0, float(np.linalg.norm(bt)))
    if np.linalg.norm(bt[~pos]) <= 1e-12 * scale:
        v0 = Q[:, pos] @ (bt[pos] / lam[pos])
        if np.linalg.norm(v0) <= r:
            return c + v0

    # Boundary solution: find mu > 0 with |bt / (lam + mu)| = r. Newton on
    # 1/|v(mu)| - 1/r (nearly linear in mu), safeguarded by a bisection bracket.
    lo, hi = 0.0, float(np.linalg.norm(bt)) / r
    mu = hi
    for _ in range(_ROOT_ITERS):
        q = bt / (lam_c + mu)
        nq = math.sqrt(float(q @ q))
        if abs(nq - r) <= 1e-14 * r:
            break
        if nq > r:
            lo = mu
        else:
            hi = mu
        slope = float(q @ (q / (lam_c + mu))) / nq ** 3
        nxt = mu - (1.0 / nq - 1.0 / r) / slope if slope > 0 else -1.0
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
            if nxt <= lo or nxt >= hi:
                break
        mu = nxt
    v = Q @ (bt / (lam_c + mu))
    nv = float(np.linalg.norm(v))
    if abs(nv - r) > 1e-8 * r:
        raise NumericError(f"ball multiplier search did not converge: |v|={nv}, r={r}, mu={mu}")
    if nv > r:
        v *= r / nv
    return c + v


def _solve_box(A, b, w_set: Box, max_sweeps: int = 100_000, tol: float = 1e-10) -> np.ndarray:
    lower = np.asarray(w_set.lower)
    upper = np.asarray(w_set.upper)
    ridge = _EIG_FLOOR * max(1.0, float(np.trace(A)))
    Ar = A + ridge * np.eye(len(b))

    def residual(w):
        return np.abs(w - np.clip(w - (Ar @ w - b), lower, upper)).max(initial=0.0)

    w = _box_active_set(Ar, b, lower, upper)
    if w is not None and residual(w) <= tol:
        return w
    # Fallback: projected coordinate descent.
    w = np.clip(np.zeros_like(b), lower, upper)
    diag = np.diag(Ar)
    for _ in range(max_sweeps):
        for i in range(len(b)):
            g = Ar[i] @ w - b[i]
            w[i] = min(max(w[i] - g / diag[i], lower[i]), upper[i])
        resid = residual(w)
        if resid <= tol:
            return w
    raise NumericError(f"box coordinate descent stalled, KKT residual {resid:.3g}")


def _box_active_set(Ar, b, lower, upper, max_iter: int | None = None):
    """Primal active-set method for a strictly convex box QP; ``None`` if it does not settle."""
    n = len(b)
    max_iter = max_iter or 10 * n + 10
    w = np.clip(np.zeros(n), lower, upper)
    fixed = lower == upper
    for _ in range(max_iter):
        free = ~fixed
        z = w.copy()
        if free.any():
            rhs = b[free] - Ar[np.ix_(free, fixed)] @ w[fixed]
            try:
                z[free] = np.linalg.solve(Ar[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                return None
        d = z - w
        if np.all(z >= lower) and np.all(z <= upper):
            w = z
            g = Ar @ w - b
            wrong = fixed & (lower < upper) & (((w <= lower) & (g < 0)) | ((w >= upper) & (g > 0)))
            if not wrong.any():
                return w
            i = int(np.argmax(np.where(wrong, np.abs(g), -1.0)))
            fixed[i] = False
            continue
        # Step until the first bound is hit, then pin the blocking coordinates.
        with np.errstate(divide="ignore", invalid="ignore"):
            to_upper = np.where(d > 0, (upper - w) / d, np.inf)
            to_lower = np.where(d < 0, (lower - w) / d, np.inf)
        steps = np.minimum(to_upper, to_lower)
        steps[fixed] = np.inf
        alpha = float(min(1.0, steps.min()))
        w = np.clip(w + alpha * d, lower, upper)
        hit = free & (steps <= alpha)
        w[hit & (d > 0)] = upper[hit & (d > 0)]
        w[hit & (d < 0)] = lower[hit & (d < 0)]
        fixed |= hit
    return None


# -- learner ----------------------------------------------------------------

def ftal_gamma(eta: float, G: float, D: float) -> float:
    return 0.5 * min(1.0 / (4.0 * G * D), eta)


def ftal_regret_constant(n: int, eta: float, G: float, D: float) -> float:
    return 64.0 * n * (1.0 / eta + G * D)


@dataclass
class FtalState:
    A: np.ndarray
    b: np.ndarray
    w: np.ndarray
    gamma: float
    w_set: ParameterSet
    t: int = 0
    G: float | None = None
    strict_paper_indexing: bool = False

    @property
    def n(self) -> int:
        return len(self.w)

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != self.w.shape:
            raise InvalidArgument(f"feature dimension {x.shape} != {self.w.shape}")
        return float(self.w @ x)

    def update(self, loss: LossFunction, x) -> "FtalState":
        """One learning step, in place."""
        x = np.asarray(x, dtype=float)
        grad = grad_wrt_weights(loss, x, self.w)
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient at round {self.t + 1}")
        if self.G is not None:
            gn = float(np.linalg.norm(grad))
            if gn > self.G * (1 + 1e-9):
                raise ContractViolation(
                    f"round {self.t + 1}: gradient norm {gn:.6g} exceeds G={self.G:.6g}")
        if self.strict_paper_indexing:
            A_prev, b_prev = self.A.copy(), self.b.copy()
        self.A += np.outer(grad, grad)
        self.b += (float(grad @ self.w) - 1.0 / self.gamma) * grad
        if self.strict_paper_indexing:
            self.w = solve_constrained_quadratic(A_prev, b_prev, self.w_set)
        elif grad.any():
            self.w = solve_constrained_quadratic(self.A, self.b, self.w_set)
        self.t += 1
        return self

    def copy(self) -> "FtalState":
        return FtalState(self.A.copy(), self.b.copy(), self.w.copy(), self.gamma, self.w_set,
                         self.t, self.G, self.strict_paper_indexing)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "A": [float(v) for v in self.A.ravel()],
            "b": [float(v) for v in self.b],
            "w": [float(v) for v in self.w],
            "gamma": self.gamma,
            "t": self.t,
            "G": self.G,
            "strict_paper_indexing": self.strict_paper_indexing,
            "w_set": self.w_set.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FtalState":
        n = int(d["n"])
        return cls(np.array(d["A"], dtype=float).reshape(n, n), np.array(d["b"], dtype=float),
                   np.array(d["w"], dtype=float), float(d["gamma"]),
                   parameter_set_from_dict(d["w_set"]), int(d["t"]),
                   None if d.get("G") is None else float(d["G"]),
                   bool(d.get("strict_paper_indexing", False)))


def ftal_init(n: int, w_set: ParameterSet, gamma: float, G: float | None = None,
              strict_paper_indexing: bool = False) -> FtalState:
    if n < 1:
        raise InvalidArgument("dimension must be >= 1")
    if not gamma > 0:
        raise InvalidArgument("gamma must be positive")
    if w_set.dim != n:
        raise InvalidArgument(f"parameter set has dimension {w_set.dim}, expected {n}")
    w0 = np.full(n, 1.0 / n)
    if not w_set.contains(w0, tol=0.0):
        raise InvalidArgument("uniform start (1/n, ..., 1/n) is outside the parameter set")
    return FtalState(np.zeros((n, n)), np.zeros(n), w0, float(gamma), w_set, 0, G,
                     strict_paper_indexing)


def ftal_predict(state: FtalState, x) -> float:
    return state.predict(x)


def ftal_update(state: FtalState, loss: LossFunction, x) -> FtalState:
    """Functional form: returns an updated copy and leaves ``state`` untouched."""
    return state.copy().update(loss, x)
