"""Command-line entry point ``isocrit``.

Every subcommand accepts ``--config PATH``: a flat ``key = value`` file
whose keys are flag names (``mc-samples`` or ``mc_samples``).  Switches
take ``true``/``false`` under their destination name (``constants = false``).
Flags given on the command line win over the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import harness, kacrice, rng as rngmod
from .amplitude import Amplitude
from .spectral import kernel_tables, spectral_moments


SWEEP_MIN_REPS = 500


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{n}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _convert(action, text):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{action.dest}: expected a boolean, got {text!r}")
        return text.lower() in ("true", "1", "yes")
    return action.type(text) if action.type else text


def _common(p, seed=True):
    p.add_argument("--config", help="flat key = value file with defaults for these flags")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--amplitude", type=Amplitude.parse, default=Amplitude())
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)


def _quad(p):
    p.add_argument("--r-min", type=float, default=None)
    p.add_argument("--r-max", type=float, default=10.0)
    p.add_argument("--nodes", type=int, default=65)
    p.add_argument("--mc-samples", type=int, default=200000)


def _sweep_flags(p):
    p.add_argument("--scales", type=_floats, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--f", dest="f", choices=("box", "bump"), default="box")
    p.add_argument("--waves", type=int, default=4096)
    p.add_argument("--out", help="rows CSV (scale,rep,count,weighted)")
    p.add_argument("--summary", help="summary JSON")
    p.add_argument("--no-constants", dest="constants", action="store_false",
                   help="skip the C_m / Z_m computation in the summary")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isocrit", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="spectral moments and the one-point constant C_m")
    _common(p)
    p.add_argument("--mc-samples", type=int, default=10 ** 6)
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("kernel", help="kernel derivatives at separations t e_1")
    _common(p, seed=False)
    p.add_argument("--t", type=_floats, required=True)

    p = sub.add_parser("two-point", help="rho_hat, rho_tilde and Delta on log-spaced separations")
    _common(p)
    _quad(p)
    p.add_argument("--out")

    p = sub.add_parser("zconst", help="Z_m and V_m = Z_m + C_m")
    _common(p)
    _quad(p)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="critical-point census of random realizations")
    _common(p)
    p.add_argument("--box", type=float, required=True)
    p.add_argument("--waves", type=int, default=4096)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="variance sweep over scales R")
    _common(p)
    _sweep_flags(p)

    p = sub.add_parser("lln", help="law-of-large-numbers trajectory over scales N")
    _common(p)
    _sweep_flags(p)
    return ap


def parse_args(argv=None) -> argparse.Namespace:
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    # the config file must be applied before argparse checks required flags
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    config = pre.parse_known_args(argv)[0].config
    choices = ap._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if config and command:
        try:
            conf = read_config(config)
        except (OSError, ValueError) as exc:
            ap.error(str(exc))
        sub = choices[command]
        known = {a.dest: a for a in sub._actions}
        unknown = set(conf) - set(known)
        if unknown:
            ap.error(f"unknown config keys: {sorted(unknown)}")
        # file values become defaults so explicit flags still win
        try:
            sub.set_defaults(**{k: _convert(known[k], v) for k, v in conf.items()})
        except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            ap.error(f"bad value in {config}: {exc}")
        for a in sub._actions:
            if a.dest in conf:
                a.required = False
    return ap.parse_args(argv)


def _open_out(path):
    if path:
        harness.validate_paths(path)
        return open(path, "w", newline="")
    return sys.stdout


def cmd_constants(args):
    mom = spectral_moments(args.amplitude, args.dim)
    one = kacrice.one_point_constant(args.amplitude, args.dim, args.mc_samples, args.seed, args.workers)
    rec = {"m": args.dim, "amplitude": str(args.amplitude), "s_m": mom.s, "d_m": mom.d,
           "h_m": mom.h, "abs_det": one.abs_det, "abs_det_se": one.abs_det_se,
           "c_m": one.c_m, "c_m_se": one.stderr}
    if args.format == "json":
        print(json.dumps(rec, indent=2))
    else:
        w = csv.writer(sys.stdout)
        w.writerow(list(rec))
        w.writerow([repr(v) if isinstance(v, float) else v for v in rec.values()])


def cmd_kernel(args):
    w = csv.writer(sys.stdout)
    w.writerow(["t", "gamma", "value"])
    for tab in kernel_tables(args.amplitude, args.dim, args.t):
        for gamma, val in tab.entries.items():
            w.writerow([repr(tab.t), ":".join(map(str, gamma)), repr(val)])
        w.writerow([repr(tab.t), "T", repr(tab.decay)])


def _quad_opts(args):
    return kacrice.QuadOptions(args.r_min, args.r_max, args.nodes)


def cmd_two_point(args):
    q = _quad_opts(args)
    r_min = q.r_min if q.r_min is not None else kacrice.default_r_min(args.amplitude, args.dim)
    rs = np.geomspace(r_min, q.r_max, q.nodes)
    fh = _open_out(args.out)
    prof = kacrice.two_point_profile(args.amplitude, args.dim, rs, args.mc_samples, args.seed,
                                     workers=args.workers)
    w = csv.writer(fh)
    w.writerow(["r", "rho_hat", "rho_hat_se", "rho_tilde", "delta", "delta_se", "T"])
    for i, r in enumerate(prof.r):
        w.writerow([repr(float(x)) for x in (r, prof.rho_hat[i], prof.rho_hat_se[i], prof.rho_tilde,
                                             prof.delta[i], prof.delta_se[i], prof.T[i])])
    if fh is not sys.stdout:
        fh.close()


def cmd_zconst(args):
    fh = _open_out(args.out)
    vc = kacrice.z_constant(args.amplitude, args.dim, _quad_opts(args), args.mc_samples, args.seed,
                            args.workers)
    rec = {"m": args.dim, "amplitude": str(args.amplitude), "c_m": vc.c_m, "c_m_se": vc.c_m_se,
           "z_m": vc.z_m, "z_m_err": float(vc.z_m_err), "v_m": vc.v_m,
           "v_m_err": float(vc.v_m_err), "r_min": vc.r_min, "r_max": vc.r_max, "nodes": vc.nodes}
    json.dump(rec, fh, indent=2)
    fh.write("\n")
    if fh is not sys.stdout:
        fh.close()


def cmd_simulate(args):
    harness.validate_paths(args.out)
    censuses = harness.simulate(args.amplitude, args.dim, args.box, args.waves, args.reps,
                                args.seed, args.out, args.workers)
    if not args.out:
        w = csv.writer(sys.stdout)
        w.writerow(harness.census_header(args.dim))
        for rep, c in enumerate(censuses):
            w.writerows(harness.census_rows(rep, c))


def _cmd_sweep(args, runner):
    cfg = harness.ExperimentConfig(
        dim=args.dim, amplitude=args.amplitude, f_kind=args.f, scales=args.scales, reps=args.reps,
        n_waves=args.waves, seed=args.seed, workers=args.workers, rows_path=args.out,
        summary_path=args.summary, constants=args.constants)
    res = runner(cfg)
    if not args.summary:
        print(json.dumps(harness.summary_dict(res), indent=2))


def _variance_sweep(cfg):
    # the library insists on 500 reps; from the command line small runs are allowed but flagged
    if cfg.reps < SWEEP_MIN_REPS:
        logging.getLogger("isocrit").warning(
            "sweep with %d reps per scale: variance estimates are unreliable below %d",
            cfg.reps, SWEEP_MIN_REPS)
    return harness.run_variance_sweep(cfg, min_reps=2)


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "constants": cmd_constants,
        "kernel": cmd_kernel,
        "two-point": cmd_two_point,
        "zconst": cmd_zconst,
        "simulate": cmd_simulate,
        "sweep": lambda a: _cmd_sweep(a, _variance_sweep),
        "lln": lambda a: _cmd_sweep(a, harness.run_lln),
    }
    try:
        handlers[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"isocrit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
