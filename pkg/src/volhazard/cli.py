"""Command-line interface: ``volhazard <command> <config> [options]``.

Exit status is 0 on success, 1 for invalid input or usage, 2 when a numerical
step fails (no admissible contract, unbounded agent response, ...).
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import config as cfgmod
from . import mcsim, report
from .firstbest import first_best_volatility
from .model import validate
from .principal import (ExistenceCase, OptimizationError, Restriction,
                        attain_first_best_contractible, attain_first_best_zero_cost,
                        check_existence, optimize, resolved_rate)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _vec(x) -> str:
    return "(" + ", ".join(f"{v:.10g}" for v in np.atleast_1d(x)) + ")"


def _write_kv_csv(path, record: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(record.keys())
        w.writerow(v if isinstance(v, str) else f"{v:.17g}" for v in record.values())


def _vector_fields(prefix, values) -> dict:
    return {f"{prefix}{i + 1}": float(v) for i, v in enumerate(values)}


def _controls_fields(c) -> dict:
    return {"cash": c.cash, "zX": c.zX, "gammaX": c.gammaX, "z1": c.z1, "gamma1": c.gamma1}


# --------------------------------------------------------------------------
# commands

def cmd_validate(mc, args):
    print("OK")
    return EXIT_OK


def cmd_first_best(mc, args):
    fb = first_best_volatility(mc.market, mc.cost, mc.preferences)
    print(f"first-best volatility v_fb = {_vec(fb.v_fb)}")
    print(f"certainty-equivalent rate  = {fb.f_rate:.12g}")
    print(f"sharing rule: xi = {fb.contract_slope:.6g} X_T + {fb.cost_share:.6g} K_T "
          f"+ {fb.cash_constant:.6g}")
    if args.csv:
        _write_kv_csv(args.csv, {**_vector_fields("v_fb", fb.v_fb), "f_rate": fb.f_rate,
                                 "contract_slope": fb.contract_slope,
                                 "cost_share": fb.cost_share,
                                 "cash_constant": fb.cash_constant})
    return EXIT_OK


def cmd_second_best(mc, args):
    restriction = Restriction.GAMMA_ZERO if args.gamma_zero else Restriction.FULL
    sol = optimize(mc.market, mc.cost, mc.preferences, restriction)
    fb = first_best_volatility(mc.market, mc.cost, mc.preferences).f_rate
    c = sol.controls
    print(f"restriction      = {restriction.value}")
    print(f"second-best rate = {sol.rate:.12g}")
    print(f"first-best rate  = {fb:.12g}  (gap {fb - sol.rate:.3g})")
    print(f"controls: zX = {c.zX:.10g}, gammaX = {c.gammaX:.10g}"
          + (f", z1 = {c.z1:.10g}, gamma1 = {c.gamma1:.10g}" if mc.market.d0 else ""))
    print(f"agent volatility v* = {_vec(sol.v_star)}"
          + ("  [indifference boundary]" if sol.boundary else ""))
    print(f"QV sensitivity Y^X = {sol.qv_sensitivity:.10g}")
    if args.save_contract:
        with open(args.save_contract, "w") as fh:
            fh.write(cfgmod.dump_contract(c))
    if args.csv:
        _write_kv_csv(args.csv, {"restriction": restriction.value, "rate": sol.rate,
                                 "fb_rate": fb, **_controls_fields(c),
                                 **_vector_fields("v", sol.v_star),
                                 "qv_sensitivity": sol.qv_sensitivity,
                                 "boundary": str(sol.boundary)})
    return EXIT_OK


def cmd_attain_fb(mc, args):
    if mc.cost.zero_cost:
        controls, how = attain_first_best_zero_cost(mc.market, mc.preferences), "zero-cost"
    elif mc.market.d0 == 1:
        controls = attain_first_best_contractible(mc.market, mc.cost, mc.preferences)
        how = "contractible factor"
    else:
        print("attain-fb needs a contractible factor (d0 = 1) or zero_cost = true",
              file=sys.stderr)
        return EXIT_INPUT
    rate, v = resolved_rate(controls, mc.market, mc.cost, mc.preferences)
    fb = first_best_volatility(mc.market, mc.cost, mc.preferences).f_rate
    print(f"construction: {how}")
    print(f"controls: zX = {controls.zX:.10g}, gammaX = {controls.gammaX:.10g}, "
          f"z1 = {controls.z1:.10g}, gamma1 = {controls.gamma1:.10g}")
    print(f"induced volatility = {_vec(v)}")
    print(f"principal rate = {rate:.12g}, first-best rate = {fb:.12g} "
          f"(gap {fb - rate:.3g})")
    if args.csv:
        _write_kv_csv(args.csv, {**_controls_fields(controls), "rate": rate,
                                 "fb_rate": fb, **_vector_fields("v", v)})
    return EXIT_OK


def cmd_check_existence(mc, args):
    rep = check_existence(mc.market, mc.cost, mc.preferences)
    print(f"case = {rep.case.value}")
    print(f"minimal-beta index set = {tuple(i + 1 for i in rep.index_set)}")
    if rep.case in (ExistenceCase.HOLDS, ExistenceCase.FAILS):
        print(f"eta = {rep.eta:.10g}")
        print(f"boundary value (lhs) = {rep.lhs:.12g}")
        print(f"value at (Z, Gamma) = (1, -R_A) (rhs) = {rep.rhs:.12g}")
    if rep.note:
        print(f"note: {rep.note}")
    if args.csv:
        _write_kv_csv(args.csv, {"case": rep.case.value, "lhs": rep.lhs, "rhs": rep.rhs,
                                 "eta": rep.eta})
    return EXIT_OK


def cmd_simulate(mc, args):
    controls = cfgmod.load_contract(args.contract).for_market(mc.market)
    sim = mcsim.SimulationConfig(mc.T, mc.n_steps, mc.n_paths, mc.seed)
    v_star = mcsim.optimal_strategy(controls, mc.market, mc.cost, mc.preferences)
    prefs = mc.preferences
    strategy = v_star
    if args.deviate is not None:
        dev = np.array([float(x) for x in args.deviate.split(",")])
        if dev.shape != v_star.shape:
            raise UsageError(f"--deviate needs {mc.market.d} comma-separated numbers")
        strategy = v_star + dev
    ens = mcsim.simulate(sim, mc.market, strategy, controls, mc.cost, prefs,
                         antithetic=args.antithetic, qv_estimator=args.qv)
    am, ase = mcsim.agent_utility(ens, prefs)
    pm, pse = mcsim.principal_utility(ens, prefs)
    ace, ace_se = mcsim.certainty_equivalent(am, ase, prefs.R_A)
    pce, pce_se = mcsim.certainty_equivalent(pm, pse, prefs.R_P)
    rate = resolved_rate(controls, mc.market, mc.cost, prefs)[0]
    print(f"paths = {len(ens)}, steps = {mc.n_steps}, T = {mc.T:g}, seed = {mc.seed}")
    print(f"strategy = {_vec(strategy)}" + ("" if args.deviate is None
                                            else f"  (v* = {_vec(v_star)})"))
    print(f"agent utility     = {am:.8g} +/- {ase:.3g}  (CE {ace:.8g} +/- {ace_se:.3g}, "
          f"target {controls.cash:.8g} at v*)")
    print(f"principal utility = {pm:.8g} +/- {pse:.3g}  (CE {pce:.8g} +/- {pce_se:.3g}, "
          f"analytic at v* {mc.T * rate - controls.cash:.8g})")
    if args.deviate is not None:
        rows = mcsim.ic_probe(sim, mc.market, controls, mc.cost, prefs, [strategy], v_star)
        if len(rows) > 1:
            r = rows[1]
            print(f"deviation minus v* (same shocks) = {r.diff:.6g} +/- {r.diff_stderr:.3g}")
    if args.csv:
        ens.to_csv(args.csv)
    return EXIT_OK


def cmd_sweep(mc, args):
    base = report.BaseParams(mc.preferences, mc.market, mc.cost)
    spec = report.SweepSpec(base, args.lo, args.hi, args.n, args.param)
    rows = report.sweep(spec)
    print(f"{'alpha2':>8} {'fb':>10} {'sb':>10} {'sb_gz':>10} {'loss%':>8} "
          f"{'loss_gz%':>8} {'Y^X':>10}  flag")
    for r in rows:
        print(f"{r.alpha2:8.4g} {r.fb_rate:10.6g} {r.sb_rate:10.6g} {r.sb_rate_gamma0:10.6g} "
              f"{r.pct_loss_fb:8.4g} {r.pct_loss_gamma0:8.4g} {r.qv_sensitivity:10.4g}  {r.flag}")
    if args.csv:
        report.write_rows(rows, args.csv)
    return EXIT_NUMERIC if any(r.flag.startswith("optimizer_failed") for r in rows) else EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "check a config file"),
    "first-best": (cmd_first_best, "first-best volatility and sharing rule"),
    "second-best": (cmd_second_best, "optimal contract under moral hazard"),
    "attain-fb": (cmd_attain_fb, "explicit contract reaching the first best"),
    "check-existence": (cmd_check_existence, "sufficient conditions for an optimal contract"),
    "simulate": (cmd_simulate, "Monte Carlo check of a contract"),
    "sweep": (cmd_sweep, "alpha_2 sweep for the loss/QV-sensitivity figures"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volhazard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("config", help="model config (TOML)")
        if name != "validate":
            p.add_argument("--csv", metavar="PATH", help="also write results as CSV")
        if name == "second-best":
            p.add_argument("--gamma-zero", action="store_true",
                           help="only contracts that ignore quadratic variation")
            p.add_argument("--save-contract", metavar="PATH",
                           help="write the optimal controls as a contract file")
        elif name == "simulate":
            p.add_argument("--contract", required=True, metavar="PATH")
            p.add_argument("--deviate", metavar="DX,DY,...",
                           help="simulate v* plus this offset instead of v*")
            p.add_argument("--antithetic", action="store_true")
            p.add_argument("--qv", choices=("analytic", "realized"), default="analytic")
        elif name == "sweep":
            p.add_argument("--param", choices=("alpha2",), default="alpha2")
            p.add_argument("--lo", type=float, default=-2.0)
            p.add_argument("--hi", type=float, default=6.0)
            p.add_argument("--n", type=int, default=81)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:   # --help
        return int(exc.code or 0)

    try:
        mc = cfgmod.load_model(args.config)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report_ = validate(mc.preferences, mc.market, mc.cost)
    if not report_.ok:
        for msg in report_:
            print(f"invalid: {msg}", file=sys.stderr)
        return EXIT_INPUT

    handler = COMMANDS[args.command][0]
    try:
        return handler(mc, args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        if isinstance(exc, mcsim.InadmissibleContract):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OptimizationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
