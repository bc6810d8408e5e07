"""Command-line interface: ``mvl verify|explore|movers|effects|corpus``.

Exit codes: 0 success, 1 verification failure (or unsafe / not equivalent /
invalid), 2 usage, input or internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .checker import Checker, Report
from .effects import Y
from .explorer import compare_schedulers, explore, format_trace
from .movers import check_validity
from .parser import ParseError, parse
from .state import BudgetExceeded
from .syntax import Program
from .values import Values
from .wellformed import well_formed

CORPUS_DIR = Path(__file__).parent / "corpus"


class InputError(Exception):
    pass


def resolve(path: str) -> Path:
    """A path as given, falling back to the bundled corpus for ``corpus/NAME``."""
    p = Path(path)
    if p.exists():
        return p
    alt = CORPUS_DIR / p.name
    if p.parts[:1] == ("corpus",) and alt.exists():
        return alt
    raise InputError(f"no such file: {path}")


def load(path: str, args) -> Program:
    p = resolve(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    try:
        prog = parse(text, str(path))
    except ParseError as e:
        raise InputError(str(e)) from e
    overrides = {}
    if getattr(args, "bits", None) is not None:
        overrides["bits"] = args.bits
    if getattr(args, "listdepth", None) is not None:
        overrides["listdepth"] = args.listdepth
    if overrides:
        prog = dataclasses.replace(prog, **overrides)
    diags = well_formed(prog)
    if diags:
        raise InputError("\n".join(f"error: {d}" for d in diags))
    return prog


def values_for(prog: Program) -> Values:
    return Values(prog.bits, prog.listdepth, prog.ntids)


# ---------------------------------------------------------------------------
# Commands.  Each returns (exit code, json-able result, text).
# ---------------------------------------------------------------------------


def _result(path, verdict, failures=(), effects=(), stats=None) -> dict:
    return {
        "version": __version__,
        "program": str(path),
        "verdict": verdict,
        "failures": list(failures),
        "effects": list(effects),
        "stats": stats or {},
    }


def _fn_summary(report: Report) -> list[str]:
    lines = []
    for where, eff in report.fn_effects.items():
        margin = " ".join(e.name for e in report.effects_of(where))
        status = "ok" if report.verdicts.get(where, True) else "FAILED"
        lines.append(f"  {where}: effect {eff.name} [{margin}] {status}")
    return lines


def cmd_verify(path: str, args) -> tuple[int, dict, str]:
    prog = load(path, args)
    report = Checker(prog, values_for(prog), args.budget, args.totality).check_program()
    res = _result(path, report.verdict, [f.to_dict() for f in report.failures],
                  [n.to_dict() for n in report.effects], report.stats)
    lines = [f"{path}: {report.verdict}"] + _fn_summary(report)
    lines += [str(f) for f in report.failures]
    return (0 if report.verified else 1), res, "\n".join(lines)


def cmd_explore(path: str, args) -> tuple[int, dict, str]:
    prog = load(path, args)
    vals = values_for(prog)
    if args.compare:
        cmp = compare_schedulers(prog, args.budget, vals)
        verdict = "equivalent" if cmp.equivalent else "different"
        stats = {"preemptive": cmp.preemptive.stats(), "nonpreemptive": cmp.nonpreemptive.stats()}
        diffs = cmp.differences()
        lines = [f"{path}: {verdict}"]
        for r in (cmp.preemptive, cmp.nonpreemptive):
            lines.append(f"  {r.scheduler}: {r.states} states, {len(r.terminals)} terminal stores, "
                         f"wrong {'reachable' if r.wrong else 'unreachable'}")
        lines += [f"  difference: {d}" for d in diffs]
        failures = [{"rule": "scheduler-equivalence", "message": d} for d in diffs]
        return (0 if cmp.equivalent else 1), _result(path, verdict, failures, (), stats), "\n".join(lines)
    r = explore(prog, args.scheduler, args.budget, vals)
    verdict = "unsafe" if r.wrong else "safe"
    lines = [f"{path}: {verdict} ({args.scheduler})",
             f"  states {r.states}, transitions {r.transitions}, terminal stores {len(r.terminals)}, "
             f"deadlocks {len(r.deadlocks)}"]
    failures = []
    if r.wrong:
        trace = format_trace(r.wrong_trace, vals)
        lines += ["  wrong is reachable; witness trace (tid | rule | span | store change):"]
        lines += ["    " + t for t in trace.splitlines()]
        failures.append({"rule": "wrong-reachable", "message": "wrong is reachable", "trace": trace.splitlines()})
    if r.deadlocks:
        lines.append("  note: deadlock reachable (not a safety violation)")
    return (1 if r.wrong else 0), _result(path, verdict, failures, (), r.stats()), "\n".join(lines)


def cmd_movers(path: str, args) -> tuple[int, dict, str]:
    prog = load(path, args)
    vs = check_validity(prog, values_for(prog), args.budget)
    verdict = "valid" if not vs else "invalid"
    lines = [f"{path}: mover specification {verdict}"] + ["  " + v.message() for v in vs]
    failures = [{"rule": f"validity ({v.condition})", "message": v.message()} for v in vs]
    return (0 if not vs else 1), _result(path, verdict, failures, (), {"violations": len(vs)}), "\n".join(lines)


def _group(entries: list[str]) -> list[str]:
    if not entries:
        return []
    if len(entries) == 1:
        return ["  [  " + entries[0]]
    return ["  /  " + entries[0]] + ["  |  " + e for e in entries[1:-1]] + ["  \\  " + entries[-1]]


def cmd_effects(path: str, args) -> tuple[int, dict, str]:
    prog = load(path, args)
    report = Checker(prog, values_for(prog), args.budget, args.totality).check_program(validity=False)
    lines = [f"{path}: per-statement effects (groups are reducible sequences, split at yields)"]
    order = list(report.fn_effects)
    for where in order:
        notes = [n for n in report.effects if n.where == where]
        lines.append(f"{where}:")
        group: list[str] = []
        for n in notes:
            if n.effect == Y:
                lines += _group(group)
                lines.append(f"     {n.span.line:4d}  Y  {n.text}")
                group = []
                continue
            extra = ""
            if n.branches:
                extra = "   (" + "; ".join(f"{lab}: {e.name}" for lab, e in n.branches) + ")"
            group.append(f"{n.span.line:4d}  {n.effect.name:2s} {n.text}{extra}")
        lines += _group(group)
        lines.append(f"  overall: {report.fn_effects[where].name}")
    res = _result(path, report.verdict, [f.to_dict() for f in report.failures],
                  [n.to_dict() for n in report.effects], report.stats)
    return 0, res, "\n".join(lines)


# ---------------------------------------------------------------------------
# Corpus runner
# ---------------------------------------------------------------------------


def read_expect(path: Path) -> list[tuple[str, str]]:
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(":")
        out.append((key.strip(), value.strip()))
    return out


def check_expectations(mvl: Path, budget: Optional[int] = None) -> list[str]:
    """Mismatches between a corpus program and its sibling ``.expect`` file."""
    args = argparse.Namespace(bits=None, listdepth=None, budget=budget, totality="global",
                              scheduler="preemptive", compare=False)
    exp = read_expect(mvl.with_suffix(".expect"))
    problems = []
    cache: dict[str, tuple[int, dict, str]] = {}

    def run(kind):
        if kind not in cache:
            if kind == "verify":
                cache[kind] = cmd_verify(str(mvl), args)
            elif kind == "movers":
                cache[kind] = cmd_movers(str(mvl), args)
            elif kind == "explore":
                cache[kind] = cmd_explore(str(mvl), args)
            elif kind == "compare":
                cache[kind] = cmd_explore(str(mvl), argparse.Namespace(**{**vars(args), "compare": True}))
        return cache[kind]

    for key, value in exp:
        if key in ("verify", "movers", "explore", "compare"):
            _, res, _ = run(key)
            if res["verdict"] != value:
                problems.append(f"{key}: expected {value}, got {res['verdict']}")
        elif key == "rule":
            rules = [f["rule"] for f in run("verify")[1]["failures"]]
            if value not in rules:
                problems.append(f"rule: {value} not among {rules}")
        elif key == "contains":
            text = run("verify")[2]
            if value not in text:
                problems.append(f"contains: {value!r} missing from report")
        elif key.startswith("effects "):
            where = key.split(" ", 1)[1]
            notes = [e for e in run("verify")[1]["effects"] if e["where"] == where]
            got = " ".join(e["effect"] for e in notes)
            if got != value:
                problems.append(f"{key}: expected {value}, got {got}")
        elif key.startswith("effect "):
            where = key.split(" ", 1)[1]
            got = next((line.split("effect ")[1].split()[0] for line in run("verify")[2].splitlines()
                        if line.strip().startswith(f"{where}:")), None)
            if got != value:
                problems.append(f"{key}: expected {value}, got {got}")
        else:
            problems.append(f"unknown expectation key {key!r}")
    return problems


def cmd_corpus(args) -> int:
    directory = Path(args.dir) if args.dir else CORPUS_DIR
    failed = 0
    for mvl in sorted(directory.glob("*.mvl")):
        if not mvl.with_suffix(".expect").exists():
            continue
        problems = check_expectations(mvl, args.budget)
        print(f"{'PASS' if not problems else 'FAIL'} {mvl.name}")
        for p in problems:
            print(f"    {p}")
        failed += bool(problems)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


COMMANDS = {"verify": cmd_verify, "explore": cmd_explore, "movers": cmd_movers, "effects": cmd_effects}


def _range(lo: int, hi: int, what: str):
    def conv(text: str) -> int:
        v = int(text)
        if not lo <= v <= hi:
            raise argparse.ArgumentTypeError(f"{what} must be in {lo}..{hi}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvl", description="Mover logic verifier and interleaving explorer.")
    ap.add_argument("--version", action="version", version=f"mvl {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("verify", "check a program with the mover logic proof rules"),
        ("explore", "exhaustively execute a program"),
        ("movers", "check validity of the mover specification"),
        ("effects", "print per-statement effects"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("paths", nargs="+")
        sp.add_argument("--bits", type=_range(2, 8, "bits"))
        sp.add_argument("--listdepth", type=_range(1, 4, "listdepth"))
        sp.add_argument("--budget", type=int, help="element budget (default: $MVL_BUDGET or 2^24)")
        sp.add_argument("--scheduler", choices=("preemptive", "nonpreemptive"), default="preemptive")
        sp.add_argument("--compare", action="store_true", help="compare both schedulers")
        sp.add_argument("--totality", choices=("global", "reachable"), default="global")
        sp.add_argument("--format", choices=("text", "json"), default="text")
    cp = sub.add_parser("corpus", help="run the corpus against its expectation files")
    cp.add_argument("--dir")
    cp.add_argument("--budget", type=int)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    if args.command == "corpus":
        return cmd_corpus(args)
    fn = COMMANDS[args.command]
    code = 0
    results = []
    for path in args.paths:
        try:
            rc, res, text = fn(path, args)
        except InputError as e:
            rc, res, text = 2, _result(path, "error", [{"rule": "input", "message": str(e)}]), f"{path}: {e}"
        except BudgetExceeded as e:
            rc, res, text = 2, _result(path, "error", [{"rule": "budget", "message": str(e)}]), f"{path}: {e}"
        code = max(code, rc)
        results.append(res)
        if args.format == "text":
            print(text)
    if args.format == "json":
        out = results[0] if len(results) == 1 else results
        print(json.dumps(out, indent=2, ensure_ascii=False))
    return code


if __name__ == "__main__":
    sys.exit(main())
