"""Acceptance suite: one test (or parametrised family) per criterion.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary lists every
criterion with PASS or FAIL.
"""
import math
import time

import numpy as np
import pytest
from scipy.special import logsumexp

from brute import beta_by_enumeration, central_difference
from hpforecast.cli import main
from hpforecast.ftal import ball, ftal_gamma, ftal_init, ftal_regret_constant
from hpforecast.hpf import HpfModel, LearnerConfig, lhpf_regret_bound, run_stream
from hpforecast.losses import grad_wrt_weights, log_loss, squared
from hpforecast.nowcast.motion import PATCH_RADIUS, MotionEstimator
from hpforecast.nowcast.pipeline import NowcastConfig, run_nowcast
from hpforecast.nowcast.synth import SynthConfig, synthesize_rasters
from hpforecast.oracle import best_cpf, best_linear_fit, check_lhpf_bound, check_switching_bound, measure_regularity
from hpforecast.partition import build_quadtree, count_divisible_supersets, single_segment
from hpforecast.streams import expert_stream, linear_stream, piecewise_quadrant_stream
from hpforecast.switching import HarmonicRate, mix_loss, run_switching, switching_bound, switching_init


def switching_instances():
    rng = np.random.default_rng(2024)
    return [rng.uniform(0.0, 1.0, (6, 3)) for _ in range(20)]


@pytest.mark.criterion(1, "switching bound holds for all 729 sequences on 20 instances, < 5 s")
def test_criterion_01_switching_exhaustive(record_property):
    start = time.perf_counter()
    worst = math.inf
    for L in switching_instances():
        cert = check_switching_bound(run_switching(L, 1.0, HarmonicRate()), "exhaustive")
        assert cert.checked == 729
        worst = min(worst, cert.margin)
    elapsed = time.perf_counter() - start
    record_property("detail", f"min margin {worst:.4g}, {elapsed:.2f} s")
    assert worst >= -1e-9
    assert elapsed < 5.0


@pytest.mark.criterion(2, "weights equal prior-weighted sums over sequences (rel 1e-12)")
def test_criterion_02_beta_expectation():
    worst = 0.0
    for L in switching_instances():
        st = switching_init(3, 1.0)
        for t in range(1, 7):
            st.update(L[t - 1])
            want = beta_by_enumeration(L, 1.0, t, 3, HarmonicRate())
            worst = max(worst, float(np.max(np.abs(st.beta - want) / want)))
    assert worst <= 1e-12


@pytest.mark.criterion(3, "total-weight and monotonicity invariants every round, T = 10^4")
@pytest.mark.parametrize("charge", ["mix", "combined"])
def test_criterion_03_weight_invariants(charge):
    T, m, eta = 10_000, 3, 1.0
    preds, targets = expert_stream(T, m, seed=11)
    fns = [squared(z, 0.0, 0.7) for z in targets]
    L = (preds - targets[:, None]) ** 2
    st = switching_init(m, eta)
    alg = 0.0
    log_potential = st.log_total()
    for t in range(T):
        prev = st.log_beta.copy()
        alg += mix_loss(st, L[t]) if charge == "mix" else fns[t](st.combine(preds[t]))
        st.update(L[t])
        expected = logsumexp(prev - eta * L[t])
        assert abs(math.expm1(st.log_total() - expected)) <= 1e-12
        nxt = st.log_total() + eta * alg
        assert math.expm1(nxt - log_potential) <= 1e-12
        log_potential = nxt


@pytest.mark.criterion(4, "FTAL regret within 64n(1/eta + GD)(1 + log T), n = 4, T = 5000, 10 seeds, < 30 s")
def test_criterion_04_ftal_regret(record_property):
    n, T = 4, 5000
    w_set = ball(np.zeros(n), 1.0)
    start = time.perf_counter()
    ratios = []
    for seed in range(10):
        stream, _ = linear_stream(T, n, seed=seed, noise=0.05)
        reg = measure_regularity(stream, w_set)
        st = ftal_init(n, w_set, ftal_gamma(reg.eta, reg.G, reg.D), G=reg.G)
        alg = 0.0
        for r in stream:
            alg += r.loss(st.predict(r.x))
            st.update(r.loss, r.x)
        _, best = best_linear_fit(stream, w_set)
        bound = ftal_regret_constant(n, reg.eta, reg.G, reg.D) * (1 + math.log(T))
        assert alg - best <= bound
        ratios.append((alg - best) / bound)
    elapsed = time.perf_counter() - start
    record_property("detail", f"max regret/bound {max(ratios):.3g}, {elapsed:.1f} s")
    assert elapsed < 30.0


def _lhpf_run(h, stream, n, w_set):
    reg = measure_regularity(stream, w_set)
    lc = LearnerConfig(n, w_set, ftal_gamma(reg.eta, reg.G, reg.D), reg.eta, reg.G)
    return run_stream(HpfModel(h, lc), stream), reg


@pytest.mark.criterion(5, "LHPF certificates for every induced partition; noiseless slack within 10%")
@pytest.mark.parametrize("levels", [2, 3])
def test_criterion_05_lhpf_end_to_end(levels, record_property):
    n, T = 4, 2000
    w_set = ball(np.zeros(n), 1.0)
    h = build_quadtree(64, 64, levels)
    worst_slack = 0.0
    for seed in range(10):
        for noise in (0.05, 0.0):
            stream, _ = piecewise_quadrant_stream(h, T, n, seed=seed, noise=noise)
            log, reg = _lhpf_run(h, stream, n, w_set)
            _, best_loss, table = best_cpf(h, stream, w_set)
            certs = check_lhpf_bound(log, h, stream, w_set, reg.eta, reg.G, table=table)
            assert len(certs) == len(table.rows)
            assert all(c.satisfied for c in certs), [c.margin for c in certs if not c.satisfied]
            if noise == 0.0:
                best = min(certs, key=lambda c: c.competitor_loss)
                slack = (log.total_loss - best_loss) / best.bound_value
                worst_slack = max(worst_slack, slack)
                assert slack <= 0.10
    record_property("detail", f"worst noiseless slack {worst_slack:.3g} of bound")


@pytest.mark.criterion(6, "single-segment HPF equals standalone FTAL to 1e-12, T = 1000")
def test_criterion_06_degenerate_hierarchy():
    n = 4
    stream, _ = linear_stream(1000, n, seed=3)
    w_set = ball(np.zeros(n), 1.0)
    reg = measure_regularity(stream, w_set)
    gamma = ftal_gamma(reg.eta, reg.G, reg.D)
    model = HpfModel(single_segment(), LearnerConfig(n, w_set, gamma, reg.eta, reg.G))
    ref = ftal_init(n, w_set, gamma, reg.G)
    for r in stream:
        y_ref = ref.predict(r.x)
        rec = model.update(r.x, r.loss)
        ref.update(r.loss, r.x)
        assert abs(rec.prediction - y_ref) <= 1e-12
        st = model.indivisible_states[0]
        assert np.max(np.abs(st.w - ref.w)) <= 1e-12
        assert np.max(np.abs(st.A - ref.A)) <= 1e-12
        assert np.max(np.abs(st.b - ref.b)) <= 1e-12


@pytest.mark.criterion(7, "off-path segment states bit-identical on an alternating two-quadrant stream")
def test_criterion_07_locality():
    n = 3
    h = build_quadtree(64, 64, 3)
    w_set = ball(np.zeros(n), 1.0)
    model = HpfModel(h, LearnerConfig(n, w_set, 0.05, 0.5))
    rng = np.random.default_rng(0)
    corners = [np.array([5.0, 5.0]), np.array([50.0, 50.0])]
    for t in range(200):
        point = corners[t % 2] + rng.uniform(0, 8, 2)
        before = {s.id: model.segment_digest(s.id) for s in h.segments}
        path = set(h.route(point))
        model.update(rng.uniform(0, 0.5, n), squared(rng.uniform(0, 0.5)), point)
        for s in h.segments:
            if s.id not in path:
                assert model.segment_digest(s.id) == before[s.id]
    untouched = [s.id for s in h.segments if model.ftal_of(s.id).t == 0]
    assert len(untouched) == len(h) - 5


@pytest.mark.criterion(8, "no-switch binary bound telescopes to (1/eta)(log 2 + log T)")
@pytest.mark.parametrize("T", [10, 100, 1000])
def test_criterion_08_telescoping(T):
    for eta in (0.5, 1.0, 3.0):
        got = switching_bound(T, 2, (0,) * T, eta, HarmonicRate())
        want = (math.log(2) + math.log(T)) / eta
        assert abs(got - want) <= 1e-12 * want


@pytest.mark.criterion(9, "motion (4, 0) recovered on >= 95% of interior grid points after 3 frames, < 60 s")
def test_criterion_09_motion_recovery(record_property):
    start = time.perf_counter()
    seq = synthesize_rasters(SynthConfig(width=256, height=256, frames=3, velocity=(4.0, 0.0), blobs=400))
    est = MotionEstimator(256, 256, 8, value_max=max(float(f.max()) for f in seq.frames))
    for prev, cur in zip(seq.frames, seq.frames[1:]):
        est.update(prev, cur)
    grid = est.grid_estimates()
    edge = PATCH_RADIUS + 8
    rows_ok = (est.rows >= edge) & (est.rows < 256 - edge)
    cols_ok = (est.cols >= edge) & (est.cols < 256 - edge)
    interior = grid[np.ix_(rows_ok, cols_ok)].reshape(-1, 2)
    frac = float(np.mean(np.all(interior == (4, 0), axis=1)))
    elapsed = time.perf_counter() - start
    record_property("detail", f"{frac:.1%} of {len(interior)} points, {elapsed:.1f} s")
    assert frac >= 0.95
    assert elapsed < 60.0


@pytest.mark.slow
@pytest.mark.criterion(10, "nowcast beats persistence MSE, CSI(1) within 0.02, horizons 1-3, 3 seeds")
def test_criterion_10_nowcast(record_property):
    cfg = NowcastConfig()
    sums: dict[tuple, float] = {}
    for seed in range(3):
        seq = synthesize_rasters(SynthConfig(width=128, height=128, frames=56, velocity=(2.0, 0.0), seed=seed))
        res = run_nowcast(seq, cfg)
        for row in res.rows:
            for name in ("mse", "csi1"):
                key = (row["horizon_min"], row["model"], name)
                sums[key] = sums.get(key, 0.0) + row[name] / 3
    failures, notes = [], []
    for H in cfg.horizons:
        hm = H * 5.0
        lm, pm = sums[(hm, "lhpf", "mse")], sums[(hm, "persistence", "mse")]
        lc, pc = sums[(hm, "lhpf", "csi1")], sums[(hm, "persistence", "csi1")]
        notes.append(f"H={H}: mse {lm:.3f}/{pm:.3f} csi1 {lc:.3f}/{pc:.3f}")
        if not lm < pm:
            failures.append(f"H={H} mse")
        if not lc >= pc - 0.02:
            failures.append(f"H={H} csi1")
    record_property("detail", "; ".join(notes))
    assert not failures, f"{failures}: " + "; ".join(notes)


@pytest.mark.criterion(11, "loss gradients match central differences (rel 1e-5), 100 draws per kind")
@pytest.mark.parametrize("kind", ["squared", "log-loss"])
def test_criterion_11_gradients(kind):
    rng = np.random.default_rng(99)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        x = rng.uniform(0.1, 1.0, n) * rng.choice([-1, 1], n)
        w = rng.uniform(-1, 1, n)
        if kind == "squared":
            loss = squared(rng.uniform(-1, 1), -5.0, 5.0)
        else:
            loss = log_loss(int(rng.integers(0, 2)), 1e-6)
            w = w + (rng.uniform(0.05, 0.95) - w @ x) * x / (x @ x)
        g = grad_wrt_weights(loss, x, w)
        fd = central_difference(lambda v: loss(v @ x), w, step=1e-6)
        assert np.all(np.abs(g - fd) <= 1e-5 * np.maximum(np.abs(g), 1e-3))


DETERMINISM_CONFIGS = {
    "regret-certify": {"partition": {"kind": "quadtree", "levels": 3}, "stream": {"T": 400}},
    "switching-certify": {"switching": {"m": 3, "T": 6, "instances": 3}},
    "nowcast": {"synth": {"width": 128, "height": 128, "frames": 8},
                "nowcast": {"horizons": [1, 2], "warmup": 3, "eval_stride": 16}},
    "synth-data": {"synth": {"width": 128, "height": 128, "frames": 4, "noise": 0.2}},
}


@pytest.mark.criterion(12, "identical config and seed give byte-identical artifacts in every mode")
@pytest.mark.parametrize("mode", sorted(DETERMINISM_CONFIGS))
def test_criterion_12_determinism(mode, tmp_path, monkeypatch):
    import json
    snapshots = []
    for run in ("first", "second"):
        root = tmp_path / run
        root.mkdir()
        monkeypatch.chdir(root)
        (root / "cfg.json").write_text(json.dumps({"mode": mode, **DETERMINISM_CONFIGS[mode]}))
        assert main(["--config", "cfg.json", "--seed", "7", "--out", "artifacts"]) == 0
        snapshots.append({p.name: p.read_bytes() for p in sorted((root / "artifacts").iterdir())})
    assert snapshots[0] == snapshots[1]
    assert "config.json" in snapshots[0] and len(snapshots[0]) >= 2


def test_lhpf_bound_worked_example():
    assert abs(lhpf_regret_bound(2, 0.5, 1.0, 2.0, 4, 3, 1000) - 16242.53) <= 0.1
    h = build_quadtree(8, 8, 2)
    assert count_divisible_supersets(h, set(h[h.root].children)) == 1
