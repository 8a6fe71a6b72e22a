"""Command-line entry point.

Exit codes: 0 success, 1 certificate violation, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config, with_overrides
from .errors import ContractViolation, InvalidArgument
from .ftal import ball, ftal_gamma
from .hpf import HpfModel, LearnerConfig, RunLog, run_stream
from .nowcast.pipeline import run_nowcast
from .nowcast.rasterio import write_raster
from .nowcast.synth import synthesize_rasters
from .oracle import (BoundCertificate, certificate_table, check_lhpf_bound, check_switching_bound,
                     measure_regularity)
from .partition import build_quadtree, build_random_halfspaces, single_segment
from .streams import linear_stream, piecewise_quadrant_stream
from .switching import run_switching

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2
STREAM_COLUMNS = ("t", "path", "prediction", "loss", "segment_losses")


# -- regret certification ---------------------------------------------------

def build_partition(cfg: ExperimentConfig):
    p = cfg.partition
    if p.kind == "single":
        return single_segment()
    if p.kind == "quadtree":
        return build_quadtree(p.width, p.height, p.levels)
    return build_random_halfspaces(cfg.learner.n, p.depth, p.mu, p.sigma, cfg.seed)


def build_stream(cfg: ExperimentConfig, h):
    if cfg.partition.kind == "quadtree":
        return piecewise_quadrant_stream(h, cfg.stream.T, cfg.learner.n, cfg.seed, cfg.stream.noise)[0]
    return linear_stream(cfg.stream.T, cfg.learner.n, cfg.seed, cfg.stream.noise)[0]


def learner_parameters(cfg: ExperimentConfig, stream) -> tuple:
    w_set = ball(np.zeros(cfg.learner.n), cfg.learner.radius)
    reg = measure_regularity(stream, w_set)
    eta = cfg.learner.eta if cfg.learner.eta is not None else reg.eta
    G = cfg.learner.G if cfg.learner.G is not None else reg.G
    gamma = cfg.learner.gamma if cfg.learner.gamma is not None else ftal_gamma(eta, G, w_set.diameter)
    return w_set, eta, G, gamma


def stream_log_table(records, stream) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STREAM_COLUMNS)
    for rec, r in zip(records, stream):
        path = ";".join(str(e.segment) for e in rec.trace)
        seg = ";".join(repr(r.loss(e.h)) for e in rec.trace)
        w.writerow((rec.t, path, repr(rec.prediction), repr(rec.loss), seg))
    return buf.getvalue()


def run_log_from_table(text: str) -> RunLog:
    """Rebuild a run log from the per-round table, accumulating in the original order."""
    log = RunLog()
    rows = csv.DictReader(io.StringIO(text))
    for row in rows:
        log.predictions.append(float(row["prediction"]))
        log.losses.append(float(row["loss"]))
        for sid, val in zip(row["path"].split(";"), row["segment_losses"].split(";")):
            s = int(sid)
            log.segment_loss[s] = log.segment_loss.get(s, 0.0) + float(val)
            log.segment_count[s] = log.segment_count.get(s, 0) + 1
    return log


def certify_from_log(cfg: ExperimentConfig, log: RunLog) -> list[BoundCertificate]:
    h = build_partition(cfg)
    stream = build_stream(cfg, h)
    w_set, eta, G, _ = learner_parameters(cfg, stream)
    mode = "per-segment" if cfg.learner.per_segment else "global"
    return check_lhpf_bound(log, h, stream, w_set, eta, G, mode=mode)


def replay_certificates(out_dir) -> str:
    """Recompute the certificate table from an output directory's config and round log."""
    out = Path(out_dir)
    cfg = load_config(out / "config.json")
    log = run_log_from_table((out / "stream.csv").read_text())
    return certificate_table(certify_from_log(cfg, log))


def regret_certify(cfg: ExperimentConfig, out: Path) -> int:
    h = build_partition(cfg)
    stream = build_stream(cfg, h)
    w_set, eta, G, gamma = learner_parameters(cfg, stream)
    lc = LearnerConfig(cfg.learner.n, w_set, gamma, eta, G, cfg.strict_paper_indexing,
                       cfg.global_switch_clock)
    model = HpfModel(h, lc)
    records = [model.update(r.x, r.loss, r.point) for r in stream]
    table = stream_log_table(records, stream)
    (out / "stream.csv").write_text(table)
    certs = certify_from_log(cfg, run_log_from_table(table))
    (out / "certificates.csv").write_text(certificate_table(certs))
    return _report(certs)


# -- switching certification ------------------------------------------------

SWITCH_COLUMNS = ("instance", "checked", "worst", "competitor_loss", "algorithm_loss", "bound",
                  "margin", "satisfied")


def switching_certify(cfg: ExperimentConfig, out: Path) -> int:
    s = cfg.switching
    rng = np.random.default_rng(cfg.seed)
    certs = []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWITCH_COLUMNS)
    for i in range(s.instances):
        L = rng.uniform(0.0, 1.0, (s.T, s.m))
        cert = check_switching_bound(run_switching(L, s.eta), s.mode)
        certs.append(cert)
        w.writerow((i, cert.checked, cert.label, repr(cert.competitor_loss), repr(cert.algorithm_loss),
                    repr(cert.bound_value), repr(cert.margin), int(cert.satisfied)))
    (out / "certificates.csv").write_text(buf.getvalue())
    print(f"checked {sum(c.checked for c in certs)} competitor sequences over {s.instances} instance(s)")
    return _report(certs)


def _report(certs) -> int:
    bad = [c for c in certs if not c.satisfied]
    for c in bad:
        print(f"VIOLATION {c.label}: algorithm {c.algorithm_loss!r} competitor {c.competitor_loss!r} "
              f"bound {c.bound_value!r} margin {c.margin!r}", file=sys.stderr)
    print(f"{len(certs) - len(bad)}/{len(certs)} certificates satisfied")
    return EXIT_VIOLATION if bad else EXIT_OK


# -- nowcasting -------------------------------------------------------------

def nowcast(cfg: ExperimentConfig, out: Path) -> int:
    seq = synthesize_rasters(replace(cfg.synth, seed=cfg.seed))
    result = run_nowcast(seq, cfg.nowcast)
    (out / "metrics.csv").write_text(result.metrics_table())
    (out / "curves.csv").write_text(result.curves_table())
    print(result.metrics_table(), end="")
    return EXIT_OK


def synth_data(cfg: ExperimentConfig, out: Path) -> int:
    seq = synthesize_rasters(replace(cfg.synth, seed=cfg.seed))
    write_raster(out / "rasters.bin", seq)
    print(f"wrote {len(seq)} frames of {seq.shape[1]}x{seq.shape[0]}")
    return EXIT_OK


RUNNERS = {
    "regret-certify": regret_certify,
    "switching-certify": switching_certify,
    "nowcast": nowcast,
    "synth-data": synth_data,
}


def run(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps())
    try:
        return RUNNERS[cfg.mode](cfg, out)
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


def parse_args(argv=None) -> argparse.Namespace:
    ap = argparse.ArgumentParser(prog="hpforecast", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON experiment configuration")
    ap.add_argument("--mode", help="regret-certify | switching-certify | nowcast | synth-data")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--strict-paper-indexing", action="store_true", default=None,
                    help="solve each learner step with the statistics from before the current round")
    ap.add_argument("--global-switch-clock", action="store_true", default=None,
                    help="drive segment switching rates by the global round instead of local activity")
    return ap.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = with_overrides(cfg, mode=args.mode, seed=args.seed, out=args.out,
                             strict_paper_indexing=args.strict_paper_indexing,
                             global_switch_clock=args.global_switch_clock)
    except InvalidArgument as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except InvalidArgument as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
