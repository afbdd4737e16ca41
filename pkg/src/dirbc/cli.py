"""dirbc command line: run, bounds, bruteforce, hiding, audit.

Data goes to stdout as CSV, the human summary to stderr.  Exit status is 0
on success, 1 for usage or input errors and 2 for faults or failed checks.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import __version__, adversary, bitmath
from .bitmath import BitString
from .config import ConfigFileError, build_scenario, load_config
from .devices import ProgramError
from .geometry import LayoutError
from .harness import (
    BUILTIN_NAMES,
    audit_no_signalling,
    builtin_scenario,
    estimate_hiding_advantage,
    malicious_programs,
    run_scenario,
    sample_commit_views,
    sample_dual_views,
)
from .network import CausalityFault, Transcript
from .protocols import ConfigError, ProtocolConfig
from .seeding import fresh_seed

EXIT_OK, EXIT_USAGE, EXIT_FAULT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_int_list(text: str) -> list[int]:
    """'1-6' or '8,10,12' or '1,4-6'."""
    out = []
    try:
        for part in text.split(","):
            lo, sep, hi = part.strip().partition("-")
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    except ValueError:
        raise UsageError(f"not an integer list: {text!r}") from None
    if not out:
        raise UsageError("empty integer list")
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"not a number list: {text!r}") from None


def _writer(fields):
    w = csv.DictWriter(sys.stdout, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    return w


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# --- commands ----------------------------------------------------------------


def cmd_run(args) -> int:
    overrides = {"n": args.n, "xi": args.xi, "c": args.c, "delta": args.delta, "variant": args.variant}
    overrides["repeat"] = args.repeat
    seed_given = args.seed is not None
    overrides["seed"] = args.seed if seed_given else None
    if args.config:
        data = load_config(args.config)
    elif args.scenario:
        data = {"scenario": {"base": args.scenario}}
    else:
        raise UsageError("run needs --scenario or --config")
    if not seed_given and "seed" not in data.get("scenario", {}):
        overrides["seed"] = fresh_seed()
    scenario = build_scenario(data, overrides)
    start = time.perf_counter()
    result = run_scenario(scenario, jobs=args.jobs, keep_transcripts=bool(args.transcripts) or args.audit)
    elapsed = time.perf_counter() - start

    w = _writer(["trial", "seed", "b", "status0", "stat0", "status1", "stat1"])
    for t in result.trials:
        row = {"trial": t.index, "seed": t.seed, "b": "" if t.b is None else t.b}
        for i in (0, 1):
            e = t.verdict[i]
            row[f"status{i}"] = e.status.value
            row[f"stat{i}"] = "" if e.statistic is None else e.statistic
        w.writerow(row)

    if args.transcripts:
        out = Path(args.transcripts)
        out.mkdir(parents=True, exist_ok=True)
        for t in result.trials:
            for j, tr in enumerate(t.transcripts):
                (out / f"trial{t.index:05d}_{j}.txt").write_text(tr.to_text())

    _say(f"scenario {scenario.name}  seed={scenario.seed}  trials={scenario.repeat}  ({elapsed:.2f} s)")
    for key, val in result.summary.items():
        _say(f"  {key}: {val}")
    status = EXIT_OK
    if args.audit:
        violations = audit_no_signalling(result.transcripts)
        _say(f"  audit: {'pass' if not violations else f'{len(violations)} violation(s)'}")
        for v in violations[:20]:
            _say(f"    {v}")
        status = EXIT_FAULT if violations else EXIT_OK
    if args.report:
        report = {
            "version": __version__,
            "scenario": scenario.name,
            "seed": scenario.seed,
            "config": {
                "variant": scenario.config.variant.value,
                "n": scenario.config.n,
                "xi": scenario.config.xi,
                "c": scenario.config.c_param,
                "delta": scenario.config.delta,
                "dual": scenario.config.dual,
                "layout": scenario.config.layout.to_dict(),
            },
            "trial_seeds": [t.seed for t in result.trials],
            "verdicts": [[e.status.value for e in t.verdict.entries] for t in result.trials],
            "summary": result.summary,
        }
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    return status


def cmd_bounds(args) -> int:
    ns = parse_int_list(args.n)
    xis = parse_float_list(args.xi)
    for xi in xis:
        try:
            bitmath.check_xi(xi)
        except ValueError as exc:
            raise UsageError(f"{exc} (the tolerance must leave the honest mismatch rate below 1/4)") from None
    w = _writer(["N", "xi", "r_over_N", "H", "epsilon"])
    for xi in xis:
        for n in ns:
            b = bitmath.epsilon_bound(n, xi)
            w.writerow({"N": n, "xi": xi, "r_over_N": b.radius_fraction, "H": b.entropy, "epsilon": b.epsilon})
    return EXIT_OK


def cmd_bruteforce(args) -> int:
    ns = parse_int_list(args.n)
    variant = args.variant.upper()
    w = _writer(list(adversary.CSV_FIELDS) + ["gap"])
    failed = []
    for n in ns:
        start = time.perf_counter()
        if variant == "CHSH1":
            l0 = BitString.from_str(args.l0) if args.l0 else None
            eps, _ = adversary.brute_force_epsilon_chsh(n, args.xi, l0)
            bound, param = bitmath.epsilon_bound(n, args.xi).epsilon, args.xi
        elif variant == "CHSH3":
            eps, comp = adversary.chsh3_game_values(n, args.xi)
            if abs(eps - comp) > 1e-12:
                failed.append(f"N={n}: independent-strings optimum {eps} differs from complementary {comp}")
            bound, param = bitmath.epsilon_bound(n, args.xi).epsilon, args.xi
        elif variant == "NS-LP":
            l0 = BitString.from_str(args.l0) if args.l0 else None
            eps = adversary.evaluate_nosignalling_lp(n, args.xi, l0)
            bound, param = bitmath.epsilon_bound(n, args.xi).epsilon, args.xi
        elif variant == "RCCBC":
            eps, _ = adversary.brute_force_epsilon_rccbc(n, args.c)
            bound, param = None, args.c
        else:
            raise UsageError(f"unknown variant {args.variant!r}; choose CHSH1, CHSH3, NS-LP or RCCBC")
        ms = (time.perf_counter() - start) * 1e3
        row = adversary.oracle_row(variant, n, param, eps, bound, ms)
        row["gap"] = "" if bound is None else bound - eps
        w.writerow(row)
        if bound is not None and eps > bound:
            failed.append(f"N={n}: epsilon*={eps} exceeds bound {bound}")
    for msg in failed:
        _say(f"check failed: {msg}")
    return EXIT_FAULT if failed else EXIT_OK


def cmd_hiding(args) -> int:
    seed = args.seed if args.seed is not None else fresh_seed()
    l0 = BitString.zeros(args.n)
    config = ProtocolConfig(args.variant, args.n, xi=args.xi, l0=l0 if args.variant.upper() == "CHSH1" else None)
    per_label = max(2, args.samples // 2)
    programs = {"honest": None, **malicious_programs()}
    names = [args.program] if args.program else list(programs)
    if args.dual:
        names = ["dual"]
    w = _writer(["program", "variant", "N", "samples", "bins", "tv_plugin", "tv_null", "tv", "advantage", "stderr"])
    worst = 0.0
    for name in names:
        if name == "dual":
            views, labels = sample_dual_views(config, per_label, seed=seed)
        else:
            if name not in programs:
                raise UsageError(f"unknown program {name!r}; choose from {', '.join(programs)}")
            views, labels = sample_commit_views(config, per_label, programs[name], seed=seed)
        est = estimate_hiding_advantage(views, labels, seed=seed)
        worst = max(worst, est.advantage)
        w.writerow(
            {
                "program": name,
                "variant": config.variant.value,
                "N": config.n,
                "samples": sum(est.samples),
                "bins": est.bins,
                "tv_plugin": est.tv_plugin,
                "tv_null": est.tv_null,
                "tv": est.tv,
                "advantage": est.advantage,
                "stderr": est.stderr,
            }
        )
    _say(f"hiding: seed={seed}  worst advantage {worst:.4f} (limit {args.limit})")
    return EXIT_OK if worst <= args.limit else EXIT_FAULT


def cmd_audit(args) -> int:
    transcripts = []
    for path in args.files:
        try:
            transcripts.append(Transcript.from_text(Path(path).read_text()))
        except OSError as exc:
            raise UsageError(f"{path}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(f"{path}: {exc}") from None
    names = args.scenario or ([] if args.files else list(BUILTIN_NAMES))
    seed = args.seed if args.seed is not None else 0
    for name in names:
        try:
            sc = builtin_scenario(name, seed=seed, repeat=args.repeat)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        transcripts.extend(run_scenario(sc).transcripts)
    violations = audit_no_signalling(transcripts)
    w = _writer(["transcript", "event", "reason"])
    for v in violations:
        w.writerow({"transcript": v.transcript, "event": v.event, "reason": v.reason})
    _say(f"audit: {len(transcripts)} transcript(s), {'pass' if not violations else f'{len(violations)} violation(s)'}")
    return EXIT_FAULT if violations else EXIT_OK


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dirbc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dirbc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario and print per-trial verdicts")
    r.add_argument("--scenario", choices=BUILTIN_NAMES)
    r.add_argument("--config", help="TOML scenario file; flags override its values")
    r.add_argument("--variant")
    r.add_argument("--n", type=int)
    r.add_argument("--xi", type=float)
    r.add_argument("--c", type=float)
    r.add_argument("--delta", type=float)
    r.add_argument("--repeat", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--transcripts", help="directory for per-trial transcript files")
    r.add_argument("--report", help="write a JSON run report here")
    r.add_argument("--audit", action="store_true", help="audit transcripts; exit 2 on violations")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="analytic epsilon bounds as CSV")
    b.add_argument("--n", default="1-10")
    b.add_argument("--xi", default="0.02,0.05,0.1")
    b.set_defaults(func=cmd_bounds)

    f = sub.add_parser("bruteforce", help="exact optimal cheating by enumeration")
    f.add_argument("--variant", default="CHSH1", help="CHSH1, CHSH3, NS-LP or RCCBC")
    f.add_argument("--n", default="1-6")
    f.add_argument("--xi", type=float, default=0.05)
    f.add_argument("--c", type=float, default=0.5)
    f.add_argument("--l0", help="pre-agreed L0 bits (CHSH1, NS-LP); default all zeros")
    f.set_defaults(func=cmd_bruteforce)

    h = sub.add_parser("hiding", help="estimate B_c's best-guess advantage on b")
    h.add_argument("--program", help="honest or a malicious committer program; default all")
    h.add_argument("--dual", action="store_true", help="compare commit against decline in dual runs")
    h.add_argument("--variant", default="CHSH1")
    h.add_argument("--n", type=int, default=2)
    h.add_argument("--xi", type=float, default=0.05)
    h.add_argument("--samples", type=int, default=10_000)
    h.add_argument("--seed", type=int)
    h.add_argument("--limit", type=float, default=0.02)
    h.set_defaults(func=cmd_hiding)

    a = sub.add_parser("audit", help="causality audit of transcript files or builtin scenarios")
    a.add_argument("files", nargs="*")
    a.add_argument("--scenario", action="append", choices=BUILTIN_NAMES)
    a.add_argument("--repeat", type=int, default=2)
    a.add_argument("--seed", type=int)
    a.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigFileError, ConfigError, LayoutError, ProgramError, adversary.OracleRangeError) as exc:
        _say(f"dirbc: error: {exc}")
        return EXIT_USAGE
    except (CausalityFault, AssertionError, RuntimeError) as exc:
        _say(f"dirbc: fault: {exc}")
        return EXIT_FAULT
    except ValueError as exc:
        _say(f"dirbc: error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
