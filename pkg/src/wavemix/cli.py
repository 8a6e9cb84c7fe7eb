"""Command-line entry point: ``wavemix {synth,estimate,mc,analyze,whittle-compare}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io, synth
from .analysis import AnalysisConfig, analyze
from .estimator import DemixConfig, two_step
from .harness import ExperimentConfig, mc_run, parse_class, resolve_mixing
from .series import NumericalError, ValidationError

log = logging.getLogger("wavemix")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
GLOBAL_FLAGS = ("seed", "threads", "out", "config", "verbose")


def _octaves(text):
    if text is None:
        return None
    if "-" in text and "," not in text:
        lo, hi = (int(v) for v in text.split("-"))
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",")]


def _load_config(args) -> dict:
    return io.read_json(args.config) if getattr(args, "config", None) else {}


def _override(cfg: dict, **kw):
    for k, v in kw.items():
        if v is not None:
            cfg[k] = v
    return cfg


def _out_dir(args, default):
    p = Path(args.out or default)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- subcommands -------------------------------------------------------------

def cmd_synth(args):
    cfg = _load_config(args)
    cfg = _override(cfg, classes=args.classes.split(",") if args.classes else None,
                    nu=args.nu, P=args.mixing, seed=args.seed, dt=args.dt)
    classes = [parse_class(c) for c in cfg.get("classes", [])]
    if not classes:
        raise ValidationError("synth needs --classes (e.g. fgn:0.3,fgn:0.9)")
    nu = int(cfg.get("nu", 1024))
    P = resolve_mixing(cfg.get("P", "identity"), len(classes))
    X = synth.synth_hidden(classes, nu, cfg.get("seed"), dt=float(cfg.get("dt", 0.1)),
                           burn_in=float(cfg.get("burn_in", 0.0)))
    Y = synth.mix(P, X)
    out = Path(args.out or "series.csv")
    io.write_csv(out, Y)
    if args.hidden_out:
        io.write_csv(args.hidden_out, X)
    log.info("wrote %s (%d channels x %d samples)", out, Y.n, Y.nu)


def _demix_cfg(cfg, nu):
    kw = dict(n_psi=int(cfg.get("n_psi", 2)), weighting=cfg.get("weighting", "counts"))
    if cfg.get("J1") is None and cfg.get("J2") is None:
        return DemixConfig.default_for(nu, **kw)
    return DemixConfig(int(cfg.get("J1", 1)), int(cfg.get("J2", 6)), **kw)


def cmd_estimate(args):
    cfg = _override(_load_config(args), J1=args.J1, J2=args.J2, octaves=_octaves(args.octaves),
                    hurst_class=args.hurst_class, weighting=args.weighting)
    Y = io.read_csv(args.input)
    dcfg = _demix_cfg(cfg, Y.nu)
    classes = [cfg.get("hurst_class", "FGN")] * Y.n
    t0 = time.perf_counter()
    res = two_step(Y, dcfg, octaves=cfg.get("octaves"), classes=classes,
                   level=float(cfg.get("level", 0.95)))
    elapsed = time.perf_counter() - t0
    out = _out_dir(args, "estimate_out")
    io.write_json(out / "report.json", io.report({**cfg, "input": str(args.input)}, res.to_dict(),
                                                  {"two_step_s": elapsed}))
    io.write_csv(out / "demixed.csv", res.demixed)
    for i, h in enumerate(res.h_hat):
        print(f"channel {i + 1}: d_hat={res.d_hat[i]:.4f} h_hat={h:.4f} +/- {res.ci_halfwidth[i]:.4f}")


def cmd_mc(args):
    cfg = _override(_load_config(args), seed=args.seed, threads=args.threads,
                    replications=args.replications, nu=args.nu, J1=args.J1, J2=args.J2,
                    octaves=_octaves(args.octaves), whittle=True if args.whittle else None,
                    classes=args.classes.split(",") if args.classes else None, P=args.mixing)
    ecfg = ExperimentConfig.from_dict(cfg)
    t0 = time.perf_counter()
    rep = mc_run(ecfg)
    total = time.perf_counter() - t0
    out = _out_dir(args, "mc_out")
    io.write_json(out / "report.json",
                  io.report(ecfg.to_dict(), rep.results_dict(), {**rep.timing, "total_s": total}))
    header = list(rep.rows[0].keys())
    io.write_table(out / "replications.csv", header, [[r[k] for k in header] for r in rep.rows])
    for name, s in rep.params.items():
        if name.startswith("h") or name.startswith("ml_h"):
            print(f"{name}: truth={s.truth:.3f} mean={s.mean:.4f} bias={s.bias:+.4f} "
                  f"sd={s.sd:.4f} rmse={s.rmse:.4f}")


def write_analysis(out: Path, result: dict, cfg: dict):
    for stage in ("original", "demixed"):
        io.write_table(out / f"scaling_{stage}.csv", ["j", "log2_Wii", "channel"],
                       result["scaling"][stage])
        for pair, rows in result["coherence"][stage].items():
            suffix = "" if pair == "1-2" else f"_{pair}"
            io.write_table(out / f"coherence_{stage}{suffix}.csv", ["j", "coherence"], rows)
    io.write_csv(out / "demixed.csv", result["demixed"])
    body = {k: v for k, v in result.items() if k != "demixed"}
    io.write_json(out / "analysis.json", io.report(cfg, body))


def cmd_analyze(args):
    cfg = _load_config(args)
    if args.ranges:
        cfg["octave_ranges"] = [tuple(int(v) for v in r.split("-")) for r in args.ranges.split(",")]
    _override(cfg, hurst_class=args.hurst_class, J1=args.J1, J2=args.J2)
    if args.no_demix:
        cfg["demix"] = False
    acfg = AnalysisConfig.from_dict(cfg)
    Y = io.read_csv(args.input)
    result = analyze(Y, acfg)
    out = _out_dir(args, "analysis_out")
    write_analysis(out, result, {**cfg, "input": str(args.input)})
    for e in result["estimates"]:
        hs = ", ".join(f"{h:.3f}" for h in e["h_hat"])
        print(f"octaves {e['octaves'][0]}-{e['octaves'][1]}: h_hat = ({hs})")
    t = result["equal_h_test"]
    print(f"equal-h test: diff={t['diff']:.4f} threshold={t['threshold']:.4f} reject={t['reject_equal']}")


def cmd_whittle_compare(args):
    from .whittle import whittle_fit

    cfg = _load_config(args)
    if args.input:
        Y = io.read_csv(args.input)
    else:
        classes = [parse_class(c) for c in (args.classes or "fgn:0.3,fgn:0.9").split(",")]
        P = resolve_mixing(args.mixing or "P2", len(classes))
        Y = synth.mix(P, synth.synth_hidden(classes, args.nu or 1024, args.seed))
    dcfg = _demix_cfg(cfg, Y.nu)
    t0 = time.perf_counter()
    res = two_step(Y, dcfg, with_ci=False)
    t_wave = time.perf_counter() - t0
    fit = whittle_fit(Y)
    out = _out_dir(args, "whittle_out")
    results = {"two_step": {"h_hat": res.h_hat, "P_hat": res.P_hat},
               "whittle": fit.to_dict()}
    timing = {"two_step_s": t_wave, "whittle_s": fit.wall_time, "ratio": fit.wall_time / t_wave}
    io.write_json(out / "report.json", io.report({**cfg, "nu": Y.nu}, results, timing))
    print(f"two-step h = {np.round(res.h_hat, 4).tolist()}  ({t_wave:.4f} s)")
    print(f"whittle  h = {[round(fit.h1, 4), round(fit.h2, 4)]}  ({fit.wall_time:.2f} s, "
          f"converged={fit.converged})")
    print(f"time ratio = {timing['ratio']:.0f}")


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS so a flag given before the subcommand is not reset by the subparser
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="RNG seed")
    common.add_argument("--threads", type=int, help="worker threads (mc)")
    common.add_argument("--out", help="output file (synth) or directory")
    common.add_argument("--config", help="JSON config; flags override its keys")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wavemix", parents=[common],
                                description="Mixed fractional process simulation and estimation")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="simulate Y = P X to CSV")
    s.add_argument("--classes", help="comma list, e.g. fbm:0.2,fgn:0.7,fou:1.0:0.7,farima:0.3")
    s.add_argument("--nu", type=int)
    s.add_argument("--mixing", help="P2, P4, identity or JSON via --config")
    s.add_argument("--dt", type=float)
    s.add_argument("--hidden-out", help="also write the hidden series here")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("estimate", parents=[common], help="two-step estimate from a CSV")
    e.add_argument("input")
    e.add_argument("--J1", type=int)
    e.add_argument("--J2", type=int)
    e.add_argument("--octaves", help="regression octaves, e.g. 3-6 or 3,4,5")
    e.add_argument("--hurst-class", dest="hurst_class", help="FGN (default) or FBM")
    e.add_argument("--weighting", choices=["ols", "counts"])
    e.set_defaults(func=cmd_estimate)

    m = sub.add_parser("mc", parents=[common], help="Monte Carlo experiment")
    m.add_argument("--replications", type=int)
    m.add_argument("--nu", type=int)
    m.add_argument("--J1", type=int)
    m.add_argument("--J2", type=int)
    m.add_argument("--octaves")
    m.add_argument("--classes")
    m.add_argument("--mixing")
    m.add_argument("--whittle", action="store_true", help="also fit the Whittle baseline")
    m.set_defaults(func=cmd_mc)

    a = sub.add_parser("analyze", parents=[common], help="data-analysis pipeline on a CSV")
    a.add_argument("input")
    a.add_argument("--ranges", help="octave ranges, e.g. 3-7,3-9")
    a.add_argument("--hurst-class", dest="hurst_class")
    a.add_argument("--J1", type=int)
    a.add_argument("--J2", type=int)
    a.add_argument("--no-demix", action="store_true", help="skip demixing (P = I)")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("whittle-compare", parents=[common], help="two-step vs Whittle ML")
    w.add_argument("input", nargs="?")
    w.add_argument("--nu", type=int)
    w.add_argument("--classes")
    w.add_argument("--mixing")
    w.set_defaults(func=cmd_whittle_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in GLOBAL_FLAGS:
        if not hasattr(args, name):
            setattr(args, name, False if name == "verbose" else None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
