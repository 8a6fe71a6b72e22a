"""Offline competitors and regret-bound certificates.

Everything here works in hindsight on a finished stream: the best fixed
linear forecaster per segment, the best constant partitioning forecaster over
every induced partition, and the inequalities the online learners must
satisfy against them.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .config import thread_count
from .errors import ContractViolation, InvalidArgument, NumericError
from .ftal import ParameterSet, ftal_regret_constant, solve_constrained_quadratic
from .hpf import CpfModel, RunLog, lhpf_regret_bound
from .losses import SQUARED, derivative, eta_valid_on, max_abs_derivative
from .partition import (DEFAULT_ENUMERATION_CAP, HierarchicalPartition, InducedPartition,
                        count_divisible_supersets, enumerate_induced_partitions)
from .switching import HarmonicRate, SwitchingRun, best_switching_sequence

MARGIN_TOL = -1e-9


@dataclass
class BoundCertificate:
    algorithm_loss: float
    competitor_loss: float
    bound_value: float
    label: str = ""
    p_size: int = 0
    c: int = 0
    checked: int = 1

    @property
    def margin(self) -> float:
        return self.bound_value - (self.algorithm_loss - self.competitor_loss)

    @property
    def satisfied(self) -> bool:
        return self.margin >= MARGIN_TOL


# -- best fixed linear forecaster -------------------------------------------

def _total_loss(stream, w) -> float:
    return math.fsum(r.loss(float(w @ r.x)) for r in stream)


def best_linear_fit(stream: Sequence, w_set: ParameterSet, starts: int = 5,
                    seed: int = 0) -> tuple[np.ndarray, float]:
    """Minimise the stream's total loss over fixed weight vectors in ``w_set``."""
    if not stream:
        raise InvalidArgument("empty stream")
    X = np.array([r.x for r in stream], dtype=float)
    if all(r.loss.kind == SQUARED for r in stream):
        z = np.array([r.loss.target for r in stream])
        w = np.linalg.solve(X.T @ X + 1e-12 * np.eye(X.shape[1]), X.T @ z)
        if not w_set.contains(w, tol=0.0):
            w = solve_constrained_quadratic(2.0 * X.T @ X, 2.0 * X.T @ z, w_set)
        return w, _total_loss(stream, w)
    return _projected_gradient(stream, X, w_set, starts, seed)


def _projected_gradient(stream, X, w_set, starts, seed, tol=1e-8, max_iter=20_000):
    rng = np.random.default_rng(seed)
    inits = [w_set.project(np.zeros(X.shape[1]))] + list(w_set.sample(starts - 1, rng))

    def grad(w):
        d = np.array([derivative(r.loss, float(w @ r.x)) for r in stream])
        return X.T @ d

    best, best_loss, worst_resid = None, math.inf, 0.0
    for w in inits:
        f = _total_loss(stream, w)
        step = 1.0
        resid = math.inf
        for _ in range(max_iter):
            g = grad(w)
            resid = float(np.linalg.norm(w - w_set.project(w - g)))
            if resid <= tol:
                break
            while True:
                cand = w_set.project(w - step * g)
                fc = _total_loss(stream, cand)
                if fc <= f - 1e-4 * float(g @ (w - cand)) or step < 1e-16:
                    break
                step *= 0.5
            w, f = cand, fc
            step = min(step * 2.0, 1e6)
        worst_resid = max(worst_resid, resid)
        if resid <= tol and f < best_loss:
            best, best_loss = w, f
    if best is None:
        raise NumericError(f"projected gradient failed to converge (residual {worst_resid:.3g})")
    return best, best_loss


# -- best constant partitioning forecaster ----------------------------------

@dataclass
class CpfTable:
    rows: list[tuple[InducedPartition, float]]
    segment_fits: dict[int, tuple[np.ndarray, float, int]] = field(default_factory=dict)


def _segment_membership(h: HierarchicalPartition, stream) -> dict[int, list[int]]:
    members: dict[int, list[int]] = {s.id: [] for s in h.segments}
    for t, r in enumerate(stream):
        for sid in h.route(r.route_point):
            members[sid].append(t)
    return members


def best_cpf(h: HierarchicalPartition, stream: Sequence, w_set: ParameterSet,
             cap: int = DEFAULT_ENUMERATION_CAP) -> tuple[CpfModel, float, CpfTable]:
    """Best CPF over every induced partition, with the full per-partition table."""
    parts = enumerate_induced_partitions(h, cap)
    members = _segment_membership(h, stream)

    def fit(idx):
        if idx:
            return best_linear_fit([stream[t] for t in idx], w_set)
        return w_set.project(np.zeros(w_set.dim)), 0.0

    # Segment fits are independent; results are collected in segment order.
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(fit, members.values()))
    fits = {sid: (w, loss, len(idx)) for (sid, idx), (w, loss) in zip(members.items(), results)}
    rows = [(p, math.fsum(fits[s][1] for s in p)) for p in parts]
    p_best, loss_best = min(rows, key=lambda row: row[1])
    model = CpfModel(h, p_best, {s: fits[s][0] for s in p_best})
    return model, loss_best, CpfTable(rows, fits)


# -- regularity -------------------------------------------------------------

@dataclass
class Regularity:
    G: float
    eta: float
    D: float
    worst_round: int


def measure_regularity(stream: Sequence, w_set: ParameterSet) -> Regularity:
    """Gradient bound over all of ``w_set`` and common exp-concavity constant.

    Raises ContractViolation if some round's loss is not ``eta``-exp-concave
    over the predictions reachable from ``w_set``.
    """
    G, worst = 0.0, 0
    for t, r in enumerate(stream):
        lo, hi = w_set.prediction_range(r.x)
        if not eta_valid_on(r.loss, lo, hi):
            raise ContractViolation(
                f"round {t + 1}: loss is not {r.loss.eta}-exp-concave on predictions [{lo:.4g}, {hi:.4g}]")
        g = max_abs_derivative(r.loss, lo, hi) * float(np.linalg.norm(r.x))
        if g > G:
            G, worst = g, t + 1
    eta = min(r.loss.eta for r in stream)
    return Regularity(G, eta, w_set.diameter, worst)


def check_gradient_bound(stream: Sequence, w_set: ParameterSet, G: float) -> None:
    for t, r in enumerate(stream):
        lo, hi = w_set.prediction_range(r.x)
        g = max_abs_derivative(r.loss, lo, hi) * float(np.linalg.norm(r.x))
        if g > G * (1 + 1e-9):
            raise ContractViolation(f"round {t + 1}: gradient norm up to {g:.6g} exceeds G={G:.6g}")


# -- LHPF certificates ------------------------------------------------------

def check_lhpf_bound(run_log: RunLog, h: HierarchicalPartition, stream: Sequence,
                     w_set: ParameterSet, eta: float, G: float, n: int | None = None,
                     mode: str = "global", cap: int = DEFAULT_ENUMERATION_CAP,
                     table: CpfTable | None = None) -> list[BoundCertificate]:
    """One certificate per induced partition.

    ``mode="global"`` uses ``1 + log T`` in every term; ``"per-segment"`` uses
    each segment's own activity count instead, which is stricter.
    """
    if run_log.T != len(stream):
        raise InvalidArgument("run log and stream lengths differ")
    if mode not in ("global", "per-segment"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    check_gradient_bound(stream, w_set, G)
    reg = measure_regularity(stream, w_set)
    if reg.eta < eta * (1 - 1e-12):
        raise ContractViolation(f"stream losses are only {reg.eta}-exp-concave, below eta={eta}")
    n = w_set.dim if n is None else n
    D = w_set.diameter
    T = run_log.T
    if table is None:
        table = best_cpf(h, stream, w_set, cap)[2]
    A = ftal_regret_constant(n, eta, G, D)
    B = 1.0 / eta
    alg = run_log.total_loss
    certs = []
    for p, comp in table.rows:
        c = count_divisible_supersets(h, p)
        if mode == "global":
            bound = lhpf_regret_bound(n, eta, G, D, len(p), c, T)
        else:
            bound = _per_segment_bound(h, p, run_log.segment_count, A, B)
        certs.append(BoundCertificate(alg, comp, bound, _label(p), len(p), c))
    return certs


def _log_factor(count: int) -> float:
    return 1.0 + math.log(count) if count > 0 else 0.0


def _per_segment_bound(h, p, counts, A, B) -> float:
    total = math.fsum(A * _log_factor(counts.get(s, 0)) for s in p)
    covered = set()
    for s in p:
        covered.update(a for a in [s] + h.ancestors(s) if h[a].children)
    return total + math.fsum(B * _log_factor(counts.get(s, 0)) for s in covered)


def check_structure_loss(run_log: RunLog, h: HierarchicalPartition, p, eta: float) -> float:
    """Margin of the structure-loss decomposition for partition ``p``.

    HPF total loss must not exceed the summed per-segment losses over ``p``
    plus ``(1/eta)(1 + log n_S)`` for every strict superset ``S`` of a member.
    """
    B = 1.0 / eta
    rhs = math.fsum(run_log.segment_loss.get(s, 0.0) for s in p)
    strict = set()
    for s in p:
        strict.update(h.ancestors(s))
    rhs += math.fsum(B * _log_factor(run_log.segment_count.get(s, 0)) for s in strict)
    return rhs - run_log.total_loss


def _label(p) -> str:
    return "{" + ",".join(str(s) for s in p) + "}"


# -- switching certificates -------------------------------------------------

def check_switching_bound(run: SwitchingRun, mode: str = "auto",
                          max_exhaustive: int = 10**6) -> BoundCertificate:
    """Worst-case margin of the switching bound against competitor sequences.

    ``exhaustive`` checks every sequence exactly. ``dp`` takes the best
    sequence with each switch count and the harmonic-rate bound
    ``(1/eta)[log m + n log(m-1) + (n+1) log T]``; for two experts this is the
    familiar ``(1/eta)[1 + (n+1) log T]`` with ``log 2`` raised to 1.
    """
    L = run.loss_matrix
    T, m = L.shape
    if mode == "auto":
        mode = "exhaustive" if m ** T <= max_exhaustive else "dp"
    if mode == "exhaustive":
        return _switching_exhaustive(run)
    if mode == "dp":
        return _switching_dp(run)
    raise InvalidArgument(f"unknown mode {mode!r}")


def _switching_exhaustive(run: SwitchingRun) -> BoundCertificate:
    L = run.loss_matrix
    T, m = L.shape
    seqs = np.array(list(product(range(m), repeat=T)), dtype=np.int64).reshape(-1, T)
    comp = L[np.arange(T), seqs].sum(axis=1)
    total = np.full(len(seqs), math.log(m))
    if T > 1:
        sw = seqs[:, 1:] != seqs[:, :-1]
        alphas = np.array([run.rate(t) for t in range(1, T)])
        on = math.log(m - 1) - np.log(alphas)
        off = -np.log1p(-alphas)
        total += np.where(sw, on, off).sum(axis=1)
    bounds = total / run.eta
    alg = run.total_loss
    margins = bounds - (alg - comp)
    k = int(np.argmin(margins))
    return BoundCertificate(alg, float(comp[k]), float(bounds[k]),
                            "worst=" + "".join(map(str, seqs[k])), checked=len(seqs))


def _switching_dp(run: SwitchingRun) -> BoundCertificate:
    if not isinstance(run.rate, HarmonicRate):
        raise InvalidArgument("dp mode needs the harmonic rate 1/(t+1)")
    L = run.loss_matrix
    T, m = L.shape
    alg = run.total_loss
    worst = None
    for n in range(T):
        res = best_switching_sequence(L, switches=n)
        if res is None:
            continue
        _, comp = res
        head = 1.0 if m == 2 else math.log(m)
        bound = (head + n * math.log(m - 1) + (n + 1) * math.log(T)) / run.eta
        cert = BoundCertificate(alg, comp, bound, f"switches={n}", checked=n + 1)
        if worst is None or cert.margin < worst.margin:
            worst = cert
    worst.checked = T
    return worst


# -- tabular output ---------------------------------------------------------

CERT_COLUMNS = ("partition", "p_size", "c", "competitor_loss", "algorithm_loss", "bound", "margin",
                "satisfied")


def certificate_table(certs: Sequence[BoundCertificate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CERT_COLUMNS)
    for c in certs:
        w.writerow((c.label, c.p_size, c.c, repr(c.competitor_loss), repr(c.algorithm_loss),
                    repr(c.bound_value), repr(c.margin), int(c.satisfied)))
    return buf.getvalue()
