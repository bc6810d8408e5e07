from pathlib import Path

import numpy as np
import pytest

from moverlogic.checker import Checker, check_program, reachable_calls, write_set
from moverlogic.effects import B, E, L, N, R, Y
from moverlogic.explorer import explore
from moverlogic.parser import parse, parse_file
from moverlogic.state import Rel1, postof, reach
from moverlogic.syntax import If, While, Yield, walk

CORPUS = Path(__file__).parent.parent / "src" / "moverlogic" / "corpus"


def corpus(name):
    return parse_file(CORPUS / f"{name}.mvl")


@pytest.fixture(scope="module")
def counter_report():
    return check_program(corpus("counter"))


def test_add_effects(counter_report):
    assert counter_report.verified
    assert counter_report.effects_of("function add") == [R, B, B, B, L, B]
    assert counter_report.fn_effects["function add"] == N
    assert counter_report.fn_effects["function client"] == R


def test_add_notes_have_spans(counter_report):
    notes = [n for n in counter_report.effects if n.where == "function add"]
    assert [n.span.line for n in notes] == sorted(n.span.line for n in notes)
    assert notes[0].text == "acquire(m);"
    assert notes[0].to_dict()["effect"] == "R"


def test_spin_loop_is_right_mover():
    rep = check_program(corpus("spinlock"))
    assert rep.verified
    assert rep.fn_effects["function spin_lock"] == R
    assert rep.fn_effects["function spin_unlock"] == L
    loop = [n for n in rep.effects if n.where == "function spin_lock" and n.text.startswith("while")]
    assert loop and loop[0].effect == R
    assert [e for _, e in loop[0].branches] == [B, R]


def test_cas_branches_in_queue():
    rep = check_program(corpus("queue"))
    assert rep.verified
    conds = [n for n in rep.effects if n.where == "function dequeue" and n.branches]
    labels = dict(conds[0].branches)
    assert set(labels.values()) == {B, N}


def test_footnote_left_mover_termination():
    rep = check_program(corpus("footnote"))
    assert not rep.verified
    f = next(f for f in rep.failures if f.rule == "M-while")
    assert "left-mover termination" in f.message
    assert f.span.line == 14


@pytest.mark.parametrize("name,rule,fragment", [
    ("counter_noacquire", "M-action", "effect E at write to x"),
    ("counter_add1", "M-yield", "guarantee"),
    ("counter_weakguar", "M-state", "rely of thread"),
    ("counter_noyield", "M-seq", "a yield is required here"),
    ("bad_spec_racy_bothmover", "validity (1)", "validity condition (1)"),
])
def test_failing_programs(name, rule, fragment):
    rep = check_program(corpus(name))
    assert rep.verdict == "failed"
    hits = [f for f in rep.failures if f.rule == rule]
    assert hits and any(fragment in f.message for f in hits), [str(f) for f in rep.failures]


@pytest.mark.parametrize("name", ["counter", "counter_broken", "spinlock", "queue", "stack", "writeprot",
                                  "single", "recursive"])
def test_verified_programs(name):
    rep = check_program(corpus(name))
    assert rep.verified, [str(f) for f in rep.failures]


def test_atomic_function_postcondition_failure():
    p = parse("""
bits 3;
int x both-mover;
atomic requires true ensures x == old(x) + 1
inc() { x = x + 2; }
init {} relies true; guarantees true;
thread { yield; inc(); yield; }
""")
    rep = Checker(p).check_program(validity=False)
    assert [f.rule for f in rep.failures] == ["M-def-atomic"]
    assert "postcondition" in rep.failures[0].message
    assert rep.failures[0].witness


def test_atomic_effect_must_be_below_declared():
    p = parse("""
bits 2;
int x non-mover;
atomic right-mover requires true ensures true
w() { x = 1; }
init {} relies true; guarantees true;
thread { yield; w(); yield; }
""")
    rep = Checker(p).check_program(validity=False)
    assert any("not below the declared effect" in f.message for f in rep.failures)


def test_atomic_recursion_is_rejected():
    p = parse("""
bits 2;
int x;
atomic requires true ensures true
f() { g(); }
atomic requires true ensures true
g() { f(); }
init {} relies true; guarantees true;
thread { yield; }
""")
    assert reachable_calls(p, "f") == {"f", "g"}
    rep = Checker(p).check_program(validity=False)
    assert [f.rule for f in rep.failures].count("M-def-atomic") == 2


def test_non_atomic_must_end_in_yield():
    p = parse("""
bits 2;
int x non-mover;
relies true guarantees true requires true ensures true
f() { yield; x = 1; }
init {} relies true; guarantees true;
thread { yield; f(); }
""")
    rep = Checker(p).check_program(validity=False)
    assert any(f.rule == "M-def-non-atomic" and "must end in a yield" in f.message for f in rep.failures)


def test_non_atomic_call_precondition():
    p = parse("""
bits 2;
int x both-mover;
relies true guarantees true requires x == 1 ensures true
f() { yield; }
init {} relies true; guarantees true;
thread { yield; f(); }
""")
    rep = Checker(p).check_program(validity=False)
    hits = [f for f in rep.failures if f.rule == "M-call-non-atomic"]
    assert hits and "Two(S)" in hits[0].message


def test_non_atomic_call_rely_and_guarantee():
    p = parse("""
bits 2;
int x both-mover;
relies x == old(x) guarantees true requires true ensures true
f() { yield; }
init {} relies true; guarantees x == old(x);
thread { yield; f(); }
""")
    rep = Checker(p).check_program(validity=False)
    msgs = [f.message for f in rep.failures if f.rule == "M-call-non-atomic"]
    assert any("caller rely" in m for m in msgs)
    assert any("guarantee of f" in m for m in msgs)


def test_non_atomic_call_from_atomic_context():
    p = parse("""
bits 2;
int x both-mover;
relies true guarantees true requires true ensures true
f() { yield; }
atomic requires true ensures true
g() { f(); }
init {} relies true; guarantees true;
thread { yield; g(); }
""")
    rep = Checker(p).check_program(validity=False)
    assert any("atomic context" in f.message for f in rep.failures)


def test_write_set_follows_calls():
    p = corpus("spinlock")
    assert write_set(p, p.fn("add")) == {"l", "u", "x"}
    assert write_set(p, p.fn("spin_unlock")) == {"l"}


def test_recursion_checked_modularly():
    rep = check_program(corpus("recursive"))
    assert rep.fn_effects["function loop"] == R
    calls = [n for n in rep.effects if n.where == "function loop" and n.kind == "call"]
    assert {n.effect for n in calls} == {N, R}


def test_thread_must_start_with_yield():
    p = parse("bits 2; int x; init {} relies true; guarantees true; thread { x = 1; yield; }")
    rep = check_program(p, validity=False)
    assert any("must start with yield" in f.message for f in rep.failures)


def test_guarantee_must_be_reflexive():
    p = parse("bits 2; int x; init {} relies true; guarantees x != old(x); thread { yield; }")
    rep = check_program(p, validity=False)
    assert any("I ⇒ G" in f.message for f in rep.failures)


def test_deterministic_reports():
    a = check_program(corpus("counter_noacquire"))
    b = check_program(corpus("counter_noacquire"))
    assert [f.to_dict() for f in a.failures] == [f.to_dict() for f in b.failures]
    assert [n.to_dict() for n in a.effects] == [n.to_dict() for n in b.effects]


def contains_yield(s):
    return any(isinstance(c, Yield) for c in walk(s))


@pytest.mark.parametrize("name", ["counter", "queue", "stack", "footnote", "racy_assert", "recursive"])
def test_yield_free_statements_never_get_y(name):
    p = corpus(name)
    rep = check_program(p, validity=False)
    by_span = {}
    for _, body in p.bodies():
        for s in walk(body):
            by_span[(s.span.line, s.span.col)] = s
    for n in rep.effects:
        s = by_span.get((n.span.line, n.span.col))
        if s is not None and not contains_yield(s) and not isinstance(s, (If, While)):
            assert n.effect != Y, n


# -- soundness against exhaustive exploration --------------------------------


@pytest.mark.parametrize("name", ["counter", "counter_broken", "spinlock", "queue", "writeprot", "single",
                                  "recursive"])
def test_terminal_stores_within_thread_posts(name):
    p = corpus(name)
    chk = Checker(p)
    rep = chk.check_program(validity=False)
    assert rep.verified
    res = explore(p)
    assert res.safe
    space = chk.space
    for tid in p.tids:
        post = postof(rep.posts[f"thread {tid}"])
        # other threads may still run after this one ends; close under the rely
        post = reach(post, chk.rely_of(p.relies))
        for store in res.terminals:
            full = dict(zip(res.names, store))
            view = {v.name: full[v.name] for v in p.globals}
            view.update({v.name: full[f"{v.name}@{tid}"] for v in p.locals})
            assert post.mask[tid - 1, space.encode(view)], (name, tid, view)


def test_empty_guarantee_is_rejected():
    p = parse("""
bits 2;
int x both-mover;
relies true guarantees false requires true ensures true
f() { yield; }
init {} relies true; guarantees true;
thread { yield; f(); }
""")
    rep = check_program(p, validity=False)
    assert any("guarantee G is empty" in f.message for f in rep.failures)


def test_report_helpers(counter_report):
    assert counter_report.rules() == []
    assert counter_report.stats["view_space"] == 16 * 3 * 16 * 16
    assert set(counter_report.verdicts) == {"function add", "function client", "thread 1", "thread 2"}
    assert isinstance(counter_report.posts["thread 1"].space.size, int)
    assert np.all(Rel1.full(counter_report.posts["thread 1"].space, 2).mask)
    assert E not in counter_report.effects_of("function client")


WITNESS_CASES = [
    "bits 2; int x; init {} relies true; guarantees true; thread { x = 1; yield; }",
    "bits 2; int x; init {} relies true; guarantees x != old(x); thread { yield; }",
    "bits 2; int x; atomic requires true ensures true f() { g(); } atomic requires true ensures true g() { f(); }"
    " init {} relies true; guarantees true; thread { yield; }",
    "bits 2; int x non-mover; relies true guarantees true requires true ensures true f() { yield; x = 1; }"
    " init {} relies true; guarantees true; thread { yield; f(); }",
    "bits 2; int x both-mover; relies true guarantees false requires true ensures true f() { yield; }"
    " init {} relies true; guarantees true; thread { yield; f(); }",
    "bits 2; int x both-mover; relies true guarantees true requires true ensures true f() { yield; }"
    " atomic requires true ensures true g() { f(); } init {} relies true; guarantees true; thread { yield; g(); }",
    "bits 2; int x non-mover; atomic right-mover requires true ensures true w() { x = 1; }"
    " init {} relies true; guarantees true; thread { yield; w(); yield; }",
]


@pytest.mark.parametrize("src", [pytest.param(c, id=f"case{i}") for i, c in enumerate(WITNESS_CASES)]
                         + ["counter_noacquire", "counter_add1", "counter_weakguar", "counter_noyield", "footnote",
                            "racy_assert", "bad_spec_racy_bothmover"])
def test_every_failure_has_a_witness(src):
    p = corpus(src) if " " not in src else parse(src)
    rep = check_program(p)
    assert rep.failures
    for f in rep.failures:
        assert f.witness, str(f)
        assert "witness" in str(f)
