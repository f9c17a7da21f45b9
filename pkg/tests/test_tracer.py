import json
import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import seeded_set
from sumproduct import ElementSet, parse_set_literal, ratio_of_differences
from sumproduct.tracer import (
    CASES,
    RECIPES,
    ConsistencyError,
    DegenerateInstance,
    HypothesisError,
    InequalityRecord,
    TraceConfig,
    TraceReport,
    case_dispatch,
    find_quadruple,
    run_trace,
    run_traces,
    verify_ledger,
)

GOLDEN = Path(__file__).parent / "golden"
SUBGROUP = parse_set_literal("p=103:{1,46,56}")


def S(p, items):
    return ElementSet.from_iterable(p, items)


# --- case dispatch --------------------------------------------------------------


def test_dispatch_case_i1_takes_smallest_r():
    p = 31
    tag = case_dispatch(S(p, [2, 5, 9]), S(p, [5, 6]), 3, p)
    assert (tag.tag, tag.r) == ("i.1", 2)


def test_dispatch_case_i2():
    p = 31
    tag = case_dispatch(S(p, [5]), S(p, [3, 5, 7]), 3, p)
    assert (tag.tag, tag.r) == ("i.2", 3)


def test_dispatch_case_ii_threshold():
    p = 31
    R = S(p, [1, 2, 3])
    assert case_dispatch(R, R, 3, p, tau=3).tag == "ii"  # 3 * 3 >= 9
    assert case_dispatch(R, R, 4, p, tau=3).tag == "iii"  # 9 < 16


def test_dispatch_case_iii_skips_minus_one():
    p = 7
    R = S(p, [1, 2, 6])  # 6 = -1 and 6 + 1 = 0 must not qualify
    tag = case_dispatch(R, R, 5, p, tau=1)
    assert (tag.tag, tag.r) == ("iii", 2)
    full_but_minus_one = S(p, [6])
    with pytest.raises(ConsistencyError):
        case_dispatch(full_but_minus_one, full_but_minus_one, 5, p, tau=1)


def test_dispatch_degenerate():
    with pytest.raises(DegenerateInstance):
        case_dispatch(ElementSet.empty(7), ElementSet.empty(7), 1, 7)


@given(st.sampled_from([11, 13, 17]), st.sets(st.integers(0, 10), min_size=2, max_size=6), st.data())
def test_find_quadruple(p, items, data):
    T = S(p, items)
    R = ratio_of_differences(T, T)
    r = data.draw(st.sampled_from(R.tolist()))
    u, v, s, t = find_quadruple(T, r)
    assert u != v and s != t and all(x in T for x in (u, v, s, t))
    assert (u - v - r * (s - t)) % p == 0
    brute = min(
        (a, b, c, d) for a in T for b in T for c in T for d in T
        if a != b and c != d and (a - b - r * (c - d)) % p == 0
    )
    assert (u, v, s, t) == brute


# --- full traces ------------------------------------------------------------------


def trace_ok(rep):
    assert rep.case_taken in CASES
    assert rep.ledger[-1].paper_label == "fin2"
    assert verify_ledger(rep) == []
    text = rep.to_json()
    assert verify_ledger(text) == []
    assert TraceReport.from_json(text).to_json() == text


@pytest.mark.parametrize("seed", range(12))
def test_random_traces_verify(seed):
    rng = random.Random(seed)
    A = seeded_set(seed, 1009, rng.randint(4, 25))
    trace_ok(run_trace(A))


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.integers(4, 14))
def test_traces_verify_property(seed, n):
    A = seeded_set(seed, 211, n)
    try:
        rep = run_trace(A)
    except DegenerateInstance:
        return
    trace_ok(rep)


def test_exact_records_hold():
    rep = run_trace(seeded_set(7, 1009, 20))
    for rec in rep.ledger:
        assert rec.recipe in RECIPES
        if rec.exact:
            assert rec.holds() and rec.satisfied_at == 1
        assert rec.implied_constant == rec.lhs / rec.rhs


def test_subgroup_symmetry_case_ii():
    rep = run_trace(SUBGROUP)
    assert rep.case_taken == "ii"
    assert rep.header["focus_constants"] == {"c1": 1, "c2": 1, "c3": 1}
    trace_ok(rep)


def test_subgroup_case_iii_at_low_tau():
    rep = run_trace(SUBGROUP, TraceConfig(tau=Fraction(1)))
    assert rep.case_taken == "iii"
    assert rep.case.pivot_slope in rep.ctx.sets["B_tilde"]
    assert {"bchain3", "nda"} <= {r.paper_label for r in rep.ledger}
    trace_ok(rep)


def test_ratio_mode():
    A = seeded_set(3, 1009, 20)
    rep = run_trace(A, TraceConfig(mode="ratio"))
    assert "K_ratio" in rep.header
    labels = {r.label for r in rep.ledger}
    assert "remark_support" in labels and "beg" not in labels
    trace_ok(rep)


def test_hypothesis_violations():
    with pytest.raises(HypothesisError):
        run_trace(S(101, [0, 1, 2]))
    with pytest.raises(HypothesisError):
        run_trace(S(7, [1, 2, 4]))


def test_degenerate_inputs():
    with pytest.raises(DegenerateInstance):
        run_trace(S(101, [1, 2]))
    # small generic sets: the only line with >= |A|/K points is the diagonal
    with pytest.raises(DegenerateInstance):
        run_trace(seeded_set(0, 1009, 6), TraceConfig(mode="ratio"))


def test_config_round_trip():
    cfg = TraceConfig(mode="ratio", tau=Fraction(3, 2), cover_eps=Fraction(1, 50))
    assert TraceConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError):
        TraceConfig(refine_eps=Fraction(1))
    with pytest.raises(ValueError):
        TraceConfig(mode="sum")


def test_record_round_trip():
    rec = InequalityRecord("x", "beg", "ge", Fraction(7, 3), Fraction(2), True, "beg", {"a": 1})
    assert InequalityRecord.from_dict(json.loads(json.dumps(rec.to_dict()))) == rec
    assert rec.implied_constant == Fraction(7, 6)


def test_workers_do_not_change_bytes():
    sets = [seeded_set(s, 1009, 6 + s) for s in range(6)]
    one = run_traces(sets, workers=1)
    two = run_traces(sets, workers=2)
    assert one == two
    assert one == run_traces(sets, workers=1)


# --- fault injection --------------------------------------------------------------


@pytest.mark.parametrize("seed", [0, 5, 9])
def test_tampered_rhs_is_named(seed):
    d = json.loads(run_trace(seeded_set(seed, 1009, 18)).to_json())
    rng = random.Random(seed)
    idx = rng.randrange(len(d["ledger"]) - 1)
    rec = d["ledger"][idx]
    rec["rhs"] = str(Fraction(rec["rhs"]) + Fraction(1, 7))
    problems = verify_ledger(d)
    assert len(problems) == 1
    assert problems[0].startswith(rec["label"] + ":")


def test_tampered_set_is_caught():
    d = json.loads(run_trace(seeded_set(2, 1009, 15)).to_json())
    d["sets"]["A"] = d["sets"]["A"][:-1]
    assert verify_ledger(d)


def test_structural_faults():
    d = json.loads(run_trace(seeded_set(4, 1009, 15)).to_json())
    moved = json.loads(json.dumps(d))
    moved["ledger"].append(moved["ledger"].pop(0))
    assert any(m.startswith("ledger:") for m in verify_ledger(moved))
    dup = json.loads(json.dumps(d))
    dup["ledger"].insert(1, dup["ledger"][0])
    assert any("duplicate" in m for m in verify_ledger(dup))
    bad_r = json.loads(json.dumps(d))
    bad_r["case"]["r"] = (bad_r["case"]["r"] % 1008) + 1
    assert any(m.startswith("case:") for m in verify_ledger(bad_r))


def test_golden_case_iii_replays():
    (path,) = sorted(GOLDEN.glob("case_iii_*.json"))
    text = path.read_text()
    d = json.loads(text)
    cfg = TraceConfig.from_dict(d["header"]["config"])
    rep = run_trace(parse_set_literal(d["header"]["input"]), cfg)
    assert rep.to_json() == text
