"""``pinlat`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(with a JSON error record on stderr).
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import condition_b as cb
from . import dynamics as dyn
from . import profile as prof
from . import spectral as spc
from .errors import ConfigError, NumericalError, PinlatError
from .nonlinearity import family_from_config, validate

COMMANDS = (
    "validate",
    "standing-wave",
    "pinning-interval",
    "spectral",
    "condition-b",
    "reduced-map",
    "simulate",
    "estimate-a-plus",
    "sweep-theta",
    "probe-epsilon",
    "full-report",
)

DEFAULT_CONFIG = {
    "family": {"kind": "cubic"},
    "N": 200,
    "output_dir": "pinlat-out",
    "threads": 1,
    "tolerances": {
        "newton": 1e-12,
        "fold_arclength": 1e-11,
        "flow": 1e-10,
        "tol_B": 1e-6,
        "fold_gate": 1e-6,
        "a_plus": 1e-3,
    },
    "validate": {"n_u": 64, "n_a": 64},
    "continuation": {"ds": 0.02, "a_start": None},
    "standing_wave": {"a": 0.0, "init": "offsite"},
    "spectral": {"a": None, "init": "offsite"},
    "reduced_map": {"B": 1.0, "eta0": 1e-3, "omega0": None, "steps": 10000, "window_start": 100},
    "simulate": {"a": 0.0, "direction": "0/1", "W": 60, "t_end": 2000.0, "dt": None},
    "estimate_a_plus": {"direction": "0/1", "bracket": [0.0, 0.02], "W": 60, "t_end": 2000.0},
    "sweep_theta": {"directions": ["0/1", "1/8", "1/4", "1/2"], "bracket": [0.0, 0.02], "W": 60, "t_end": 2000.0},
    "probe_epsilon": {"mode": "c_eq_eps", "eps": [0.2, 0.1, 0.05], "t_end": 600.0, "xtol": 1e-5},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--output-dir")
    common.add_argument("--quiet", action="store_true")
    common.add_argument("--threads", type=int)
    common.add_argument("--N", type=int)
    common.add_argument("--a", type=float, help="detuning for single-point commands")
    common.add_argument("--direction", help="rational slope s/q, e.g. 1/4")
    common.add_argument("--bracket", type=float, nargs=2, metavar=("A_LO", "A_HI"))
    common.add_argument("--tol", type=float, help="a_+ bisection width")
    common.add_argument("--t-end", type=float)
    common.add_argument("--B", type=float)
    common.add_argument("--eta0", type=float)
    common.add_argument("--omega0", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--eps", type=float, nargs="+")
    common.add_argument("--mode", choices=["c_eq_eps", "c_eq_eps_sq"])

    parser = _Parser(prog="pinlat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pinlat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "family":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if args.config:
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, user)
    if args.output_dir is not None:
        cfg["output_dir"] = args.output_dir
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.N is not None:
        cfg["N"] = args.N
    if args.tol is not None:
        cfg["tolerances"]["a_plus"] = args.tol
    block = {
        "standing-wave": "standing_wave",
        "spectral": "spectral",
        "simulate": "simulate",
        "estimate-a-plus": "estimate_a_plus",
        "sweep-theta": "sweep_theta",
        "reduced-map": "reduced_map",
        "probe-epsilon": "probe_epsilon",
    }.get(args.command)
    if block:
        b = cfg[block]
        for flag, key in (("a", "a"), ("direction", "direction"), ("t_end", "t_end"), ("B", "B"),
                          ("eta0", "eta0"), ("omega0", "omega0"), ("steps", "steps"), ("eps", "eps"),
                          ("mode", "mode")):
            val = getattr(args, flag)
            if val is not None and key in b:
                b[key] = val
        if args.bracket is not None and "bracket" in b:
            b["bracket"] = list(args.bracket)
    _check_config(cfg)
    return cfg


def _check_config(cfg: dict):
    if not isinstance(cfg["N"], int) or cfg["N"] < 20:
        raise ConfigError("N must be an integer >= 20")
    for name, tol in cfg["tolerances"].items():
        if not (isinstance(tol, (int, float)) and tol > 0):
            raise ConfigError(f"tolerance {name!r} must be positive")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        raise ConfigError("threads must be a positive integer")


def _direction(text) -> dyn.Direction:
    try:
        return dyn.Direction.from_slope(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad direction {text!r}: {exc}") from None


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Run:
    def __init__(self, cfg: dict, quiet: bool):
        self.cfg = cfg
        self.quiet = quiet
        self.out = Path(cfg["output_dir"])
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output_dir not writable: {exc}") from None
        if not os.access(self.out, os.W_OK):
            raise ConfigError(f"output_dir {self.out} is not writable")
        self.f = family_from_config(cfg["family"])
        self.N = cfg["N"]
        self.tol = cfg["tolerances"]
        self._folds = {}

    def say(self, msg: str):
        if not self.quiet:
            print(msg)

    def write_json(self, name: str, payload: dict):
        doc = {"version": f"pinlat {__version__}", "config": self.cfg, "result": payload}
        (self.out / name).write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")

    def write_text(self, name: str, text: str):
        (self.out / name).write_text(text)

    def fold(self, side: str) -> prof.FoldResult:
        if side not in self._folds:
            c = self.cfg["continuation"]
            self._folds[side] = prof.extreme_fold(self.f, side, self.N, c["ds"], c["a_start"])
        return self._folds[side]

    # commands ----------------------------------------------------------------

    def validate(self) -> int:
        v = self.cfg["validate"]
        rep = validate(self.f, v["n_u"], v["n_a"])
        self.write_json("validate.json", rep.to_dict())
        self.say(f"validate: {'valid' if rep.valid else 'INVALID'} normal family ({len(rep.violations)} violations)")
        return 0 if rep.valid else 1

    def standing_wave(self) -> int:
        b = self.cfg["standing_wave"]
        p = prof.solve_standing_wave(self.f, b["a"], b["init"], self.N, self.tol["newton"])
        self.write_text("standing_wave.csv", p.to_csv())
        self.write_json("standing_wave.json", {**p.to_dict(), "strictly_monotone": p.is_strictly_monotone()})
        self.say(f"standing-wave: a={p.a:g} residual={p.residual_norm:.2e} iterations={p.iterations}")
        return 0

    def pinning_interval(self) -> dict:
        lo, hi = self.fold("lower"), self.fold("upper")
        pi = prof.PinningInterval(lo.a_fold, hi.a_fold, self.N, self.tol["fold_arclength"])
        self.write_text("fold_upper.csv", hi.profile_at_fold.to_csv())
        self.write_text("fold_lower.csv", lo.profile_at_fold.to_csv())
        payload = {"interval": pi.to_dict(), "upper": hi.to_dict(), "lower": lo.to_dict()}
        self.write_json("pinning_interval.json", payload)
        self.say(f"pinning-interval: [{pi.a_minus:.10f}, {pi.a_plus:.10f}]")
        return payload

    def _kernel(self):
        b = self.cfg["spectral"]
        if b["a"] is None:
            p = self.fold("upper").profile_at_fold
        else:
            p = prof.solve_standing_wave(self.f, b["a"], b["init"], self.N, self.tol["newton"])
        lin = spc.assemble(p, self.f)
        return p, lin, spc.kernel_vector(lin)

    def spectral(self) -> dict:
        p, lin, kv = self._kernel()
        mu = {}
        for side in (1, -1):
            try:
                mu[str(side)] = spc.decay_rate(self.f, p.a, kv.lambda0, side)
            except NumericalError as exc:
                mu[str(side)] = str(exc)
        payload = {
            "a": p.a,
            **kv.to_dict(),
            "predicted_decay": mu,
            "positive_spectrum_check": spc.positive_spectrum_check(lin),
        }
        self.write_text("kernel_vector.csv", kv.to_csv())
        self.write_json("spectral.json", payload)
        self.say(f"spectral: a={p.a:.10f} lambda0={kv.lambda0:.3e} tail ratio={kv.decay_ratio_estimate:.6f}")
        return payload

    def condition_b(self) -> dict:
        fold = self.fold("upper")
        p = fold.profile_at_fold
        kv = spc.kernel_vector(spc.assemble(p, self.f))
        rep = cb.compute_B(p, kv, self.f, self.tol["tol_B"], self.tol["fold_gate"])
        self.write_text("fold_profile.csv", p.to_csv())
        self.write_text("kernel_vector.csv", kv.to_csv())
        self.write_json("condition_b.json", rep.to_dict())
        self.say(f"condition-b: B={rep.B:.10g} verdict={rep.verdict.value}")
        return rep.to_dict()

    def reduced_map(self) -> int:
        b = self.cfg["reduced_map"]
        omega0 = b["omega0"]
        if omega0 is None:
            omega0 = cb.stable_orbit_seed(b["B"], b["eta0"])
        orbit = cb.reduced_map_iterate(b["B"], b["eta0"], omega0, b["steps"])
        ok = cb.prop52_ordering_check(orbit, b["B"], b["window_start"]) if b["B"] != 0 else False
        self.write_text("reduced_orbit.csv", orbit.to_csv())
        self.write_json(
            "reduced_map.json",
            {"B": b["B"], "eta0": b["eta0"], "omega0": omega0, "length": len(orbit.eta),
             "truncated": orbit.truncated, "ordering_check": ok},
        )
        self.say(f"reduced-map: {len(orbit.eta)} points, ordering check {'passed' if ok else 'failed'}")
        return 0

    def _measure_kw(self, b):
        return {"W": b["W"], "t_end": b["t_end"]}

    def simulate(self) -> int:
        b = self.cfg["simulate"]
        m = dyn.measure_speed(self.f, b["a"], _direction(b["direction"]), b["W"], b["t_end"], b["dt"])
        self.write_text("trajectory.csv", m.trajectory_csv())
        self.write_json("simulate.json", m.to_dict())
        self.say(f"simulate: direction {m.direction} a={m.a:g} c={m.c_est:.6g} pinned={m.pinned}")
        return 0

    def estimate_a_plus(self) -> int:
        b = self.cfg["estimate_a_plus"]
        est = dyn.estimate_a_plus(self.f, _direction(b["direction"]), tuple(b["bracket"]),
                                  self.tol["a_plus"], **self._measure_kw(b))
        self.write_json("estimate_a_plus.json", {"direction": str(est.direction), "theta": est.direction.theta,
                                                 "a_plus_est": est.value, "tol": est.tol, "brackets": est.brackets})
        self.say(f"estimate-a-plus: direction {est.direction} a_+ ~ {est.value:.6f}")
        return 0

    def sweep_theta(self) -> list:
        b = self.cfg["sweep_theta"]
        dirs = [_direction(d) for d in b["directions"]]
        rows = dyn.sweep_theta(self.f, dirs, tuple(b["bracket"]), self.tol["a_plus"], self.cfg["threads"],
                               **self._measure_kw(b))
        self.write_text("sweep_theta.csv", dyn.sweep_to_csv(rows, self.tol["a_plus"]))
        table = [{"direction": str(d), "theta": th, "a_plus_est": est} for d, th, est in rows]
        self.write_json("sweep_theta.json", {"rows": table, "tol": self.tol["a_plus"]})
        self.say("sweep-theta: " + ", ".join(f"{r['direction']}: {r['a_plus_est']:.5f}" for r in table))
        return table

    def probe_epsilon(self) -> int:
        b = self.cfg["probe_epsilon"]
        a_plus = self.fold("upper").a_fold
        rec = dyn.epsilon_regime_probe(self.f, b["eps"], b["mode"], a_plus_ref=a_plus, a_floor=a_plus - 1e-3,
                                       xtol=b["xtol"], t_end=b["t_end"])
        self.write_json("probe_epsilon.json", rec)
        self.say("probe-epsilon: " + ", ".join(f"eps={r['eps']:g}: a={r['a_eps']:.5f}" for r in rec["rows"]))
        return 0

    def full_report(self) -> int:
        status = self.validate()
        if status:
            return status
        interval = self.pinning_interval()
        spectral = self.spectral_at_fold()
        brep = self.condition_b()
        sweep = self.sweep_theta()
        verdict = {"ConditionBHolds": "yes", "Fails": "no"}.get(brep["verdict"], "inconclusive")
        self.write_json(
            "full_report.json",
            {
                "crystallographic_pinning_predicted_theta0": verdict,
                "pinning_interval": interval["interval"],
                "spectral_at_fold": spectral,
                "condition_b": brep,
                "sweep_theta": sweep,
            },
        )
        self.say(f"full-report: crystallographic pinning predicted at theta=0: {verdict}")
        return 0

    def spectral_at_fold(self) -> dict:
        saved = self.cfg["spectral"]["a"]
        self.cfg["spectral"]["a"] = None
        try:
            return self.spectral()
        finally:
            self.cfg["spectral"]["a"] = saved


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        r = Run(cfg, args.quiet)
        handler = getattr(r, args.command.replace("-", "_"))
        result = handler()
        return result if isinstance(result, int) else 0
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ConfigError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except PinlatError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
