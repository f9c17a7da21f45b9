"""Run the sum-product case analysis on a concrete set and keep an exact ledger.

Every displayed inequality of the argument becomes an ``InequalityRecord``
with exact integer/rational sides.  Each record names a *recipe*: a small
function that recomputes both sides from the sets and scalars stored in the
report, so a serialized report can be re-verified without trusting the run
that produced it.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .energy import (
    DyadicGroup,
    dyadic_decompose,
    line_statistics,
    log_bound,
    mult_energy,
    point_set,
    popular_lines_mode,
    select_popular_group,
)
from .fpcore import (
    DomainError,
    ElementSet,
    Prime,
    dilate,
    format_set_literal,
    mod_inverse,
    parse_set_literal,
    product_set,
    ratio_of_differences,
    ratio_set_simple,
    signed_sumset,
    sumset,
    translate,
)
from .lemma_engine import (
    FocusConfig,
    FocusError,
    E_r_count,
    focus_lemma,
    focus_sums,
    greedy_cover,
    pr_refine,
    quadruple_refine,
    size_floor,
)

__all__ = [
    "TraceConfig",
    "InequalityRecord",
    "CaseTag",
    "TraceReport",
    "HypothesisError",
    "DegenerateInstance",
    "ConsistencyError",
    "case_dispatch",
    "find_quadruple",
    "run_trace",
    "run_traces",
    "verify_ledger",
]

CASES = ("i.1", "i.2", "ii", "iii")
FOCUS_RETRIES = 8


class HypothesisError(DomainError):
    """Input violates 0 not in A or |A|^2 < p."""


class DegenerateInstance(RuntimeError):
    """No dyadic group yields a focus configuration with a ratio set to work with."""


class ConsistencyError(RuntimeError):
    """A step that cannot fail under the standing hypothesis did fail."""


@dataclass(frozen=True)
class TraceConfig:
    mode: str = "product"  # "product": hypothesis on |A.A|; "ratio": on |A:A|
    refine_eps: Fraction = Fraction(1, 10)
    cover_eps: Fraction = Fraction(1, 100)
    pr_eps: Fraction = Fraction(1, 100)
    proportion: Fraction = Fraction(1, 2)
    tau: Fraction = Fraction(4)
    focus: FocusConfig = FocusConfig()

    def __post_init__(self):
        if self.mode not in ("product", "ratio"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for name in ("refine_eps", "cover_eps", "pr_eps", "proportion"):
            v = Fraction(getattr(self, name))
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "tau", Fraction(self.tau))
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "refine_eps": str(self.refine_eps),
            "cover_eps": str(self.cover_eps),
            "pr_eps": str(self.pr_eps),
            "proportion": str(self.proportion),
            "tau": str(self.tau),
            "focus": self.focus.to_dict(),
            "N_convention": "N_lo in lower-bound records, N_hi in upper-bound records",
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceConfig":
        f = d["focus"]
        focus = FocusConfig(
            Fraction(f["row"]), Fraction(f["column"]), Fraction(f["line"]),
            Fraction(f["floor"]), int(f["max_rounds"]),
        )
        return cls(
            d["mode"], Fraction(d["refine_eps"]), Fraction(d["cover_eps"]),
            Fraction(d["pr_eps"]), Fraction(d["proportion"]), Fraction(d["tau"]), focus,
        )


# --------------------------------------------------------------------------
# records and recipes
# --------------------------------------------------------------------------

RELATIONS = ("le", "ge", "eq")


@dataclass(frozen=True)
class InequalityRecord:
    """One ledger line: lhs (relation) rhs.

    ``exact`` records claim the relation with constant 1; the others stand
    for a hidden-constant claim and ``implied_constant = lhs/rhs`` is the
    constant this instance needs.
    """

    label: str
    paper_label: str
    relation: str
    lhs: Fraction
    rhs: Fraction
    exact: bool
    recipe: str
    args: dict = field(default_factory=dict)

    @property
    def implied_constant(self) -> Fraction:
        return self.lhs / self.rhs

    @property
    def satisfied_at(self) -> Fraction:
        return Fraction(1) if self.exact else self.implied_constant

    def holds(self) -> bool:
        if self.relation == "le":
            return self.lhs <= self.rhs
        if self.relation == "ge":
            return self.lhs >= self.rhs
        return self.lhs == self.rhs

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "paper_label": self.paper_label,
            "relation": self.relation,
            "lhs": _fr(self.lhs),
            "rhs": _fr(self.rhs),
            "exact": self.exact,
            "implied_constant": _fr(self.implied_constant),
            "satisfied_at": _fr(self.satisfied_at),
            "recipe": self.recipe,
            "args": self.args,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InequalityRecord":
        return cls(
            d["label"], d["paper_label"], d["relation"], Fraction(d["lhs"]),
            Fraction(d["rhs"]), bool(d["exact"]), d["recipe"], dict(d["args"]),
        )


def _fr(x) -> str | int:
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


class Context:
    """Named sets and scalars a report carries; recipes read only from here."""

    def __init__(self, p: int, sets: dict | None = None, scalars: dict | None = None):
        self.p = Prime(p)
        self.sets: dict[str, ElementSet] = dict(sets or {})
        self.scalars: dict[str, Any] = dict(scalars or {})
        self._memo: dict = {}

    def __getitem__(self, name: str) -> ElementSet:
        return self.sets[name]

    def put(self, name: str, S: ElementSet) -> ElementSet:
        self.sets[name] = S
        return S

    def memo(self, key, fn: Callable):
        if key not in self._memo:
            self._memo[key] = fn()
        return self._memo[key]

    def frac(self, name: str) -> Fraction:
        return Fraction(self.scalars[name])

    # derived quantities, recomputed from the stored sets ------------------

    @property
    def size(self) -> int:
        return len(self["A_s"])

    def group(self) -> DyadicGroup:
        def build():
            A_s = self["A_s"]
            if self.scalars["mode"] == "ratio":
                g, _ = popular_lines_mode(A_s, self.frac("K"))
                return g
            groups = dyadic_decompose(line_statistics(A_s))
            return next(g for g in groups if g.j == self.scalars["group_j"])

        return self.memo("group", build)

    def energy(self) -> int:
        return self.memo("energy", lambda: mult_energy(self["A_s"]))

    def line(self, xi: int) -> ElementSet:
        """Abscissae A_xi of A_s x A_s on the line of slope xi."""
        A_s = self["A_s"]
        return self.memo(("line", xi), lambda: A_s.intersection(dilate(A_s, mod_inverse(xi, self.p))))

    def points(self):
        from .energy import PointSet

        return self.memo(
            "P_star", lambda: PointSet(self.p, tuple(tuple(pt) for pt in self.scalars["P_star"]))
        )

    def s4(self) -> ElementSet:
        A_s = self["A_s"]
        return self.memo("S4", lambda: signed_sumset([(1, A_s), (-1, A_s), (1, A_s), (-1, A_s)]))

    def covered_by(self, slope: int, translates) -> ElementSet:
        """Union of translates of slope * A_slope."""
        base = dilate(self.line(slope), slope)
        out = ElementSet.empty(self.p)
        for t in translates:
            out = out.union(translate(base, t))
        return out


RECIPES: dict[str, Callable] = {}


def recipe(name: str):
    def deco(fn):
        RECIPES[name] = fn
        return fn

    return deco


def _F(x) -> Fraction:
    return Fraction(x)


@recipe("hyp")
def _r_hyp(ctx, op):
    A = ctx["A"]
    S = {"sum": sumset, "prod": product_set, "ratio": ratio_set_simple}[op](A, A)
    return len(S), ctx.frac("K") * len(A)


@recipe("refine_bound")
def _r_refine_bound(ctx):
    A, Aw = ctx["A"], ctx["A_w"]
    return len(signed_sumset([(1, Aw), (1, A), (1, A), (1, A)])), ctx.frac("K") ** 3 * len(A)


@recipe("refine_floor")
def _r_refine_floor(ctx):
    return len(ctx["A_w"]), (1 - ctx.frac("refine_eps")) * len(ctx["A"])


@recipe("subset")
def _r_subset(ctx, sub, sup):
    return len(ctx[sub].union(ctx[sup])), len(ctx[sup])


@recipe("refined_sum")
def _r_refined_sum(ctx):
    Aw = ctx["A_w"]
    return len(sumset(Aw, Aw)), ctx.frac("K") * len(ctx["A"])


@recipe("rescale")
def _r_rescale(ctx):
    lam = ctx.scalars["scale"]
    same = dilate(ctx["A_w"], lam).union(ctx["A_s"])
    return len(same) * (lam * ctx.scalars["x_tilde"] % ctx.p), len(ctx["A_s"])


@recipe("beg")
def _r_beg(ctx):
    A = ctx["A_s"]
    return ctx.energy(), Fraction(len(A) ** 4, len(product_set(A, A)))


@recipe("beg_K")
def _r_beg_K(ctx):
    return ctx.energy(), Fraction(ctx.size**3) / ctx.frac("K")


@recipe("dy")
def _r_dy(ctx, side):
    g = ctx.group()
    n = g.N_lo if side == "lo" else g.N_hi
    return g.M, g.L * n * n


@recipe("lbn")
def _r_lbn(ctx, which):
    g = ctx.group()
    return (g.L if which == "L" else g.N_hi), Fraction(g.M, ctx.size**2)


@recipe("ptset")
def _r_ptset(ctx, side):
    g = ctx.group()
    n = g.N_lo if side == "lo" else g.N_hi
    return len(point_set(line_statistics(ctx["A_s"]), g.slopes)), g.L * n


@recipe("choiceofm")
def _r_choiceofm(ctx):
    return ctx.group().M, Fraction(ctx.energy(), log_bound(ctx.size))


@recipe("remark_support")
def _r_remark_support(ctx):
    return ctx.group().points, ctx.size**2


@recipe("remark_N")
def _r_remark_N(ctx):
    return ctx.group().N_lo * ctx.frac("K"), ctx.size


@recipe("refined_points")
def _r_refined_points(ctx):
    P = point_set(line_statistics(ctx["A_s"]), ctx.group().slopes)
    star = ctx.points()
    return len(set(star.points) | set(P.points)), len(P)


def _star_fibers(ctx):
    def build():
        by_x, by_y, on_line = {}, {}, {}
        p = ctx.p
        for x, y in ctx.points().points:
            by_x.setdefault(x, []).append(y)
            by_y.setdefault(y, []).append(x)
            on_line.setdefault(y * pow(x, -1, p) % p, []).append(x)
        mk = lambda d: {k: ElementSet.from_iterable(p, v) for k, v in d.items()}
        return mk(by_x), mk(by_y), mk(on_line)

    return ctx.memo("star_fibers", build)


@recipe("fiber_match")
def _r_fiber_match(ctx, name, axis, key):
    by_x, by_y, _ = _star_fibers(ctx)
    fib = (by_x if axis == "x" else by_y)[ctx.scalars[key]]
    S = ctx[name]
    return len(S.intersection(fib)), len(S.union(fib))


@recipe("focus_popular")
def _r_focus_popular(ctx):
    g = ctx.group()
    return min(len(ctx["B"]), len(ctx["C"])), Fraction(g.L * g.N_lo, ctx.size)


@recipe("onebug")
def _r_onebug(ctx):
    g = ctx.group()
    return len(ctx["B_tilde"]), Fraction(g.L * g.M, ctx.size**3)


@recipe("cl")
def _r_cl(ctx):
    g = ctx.group()
    _, _, on_line = _star_fibers(ctx)
    C = ctx["C"]
    least = min(len(on_line[z].intersection(C)) for z in ctx["B_tilde"])
    return least, Fraction(g.L * g.M * g.N_lo, ctx.size**4)


def _sums(ctx):
    return ctx.memo("focus_sums", lambda: focus_sums(ctx.points()))


@recipe("sbd")
def _r_sbd(ctx):
    g = ctx.group()
    _, _, S = _sums(ctx)
    return int(S.sum()), Fraction(g.L * g.M * g.N_lo, ctx.size)


@recipe("sbd1")
def _r_sbd1(ctx):
    g = ctx.group()
    xs, ys, S = _sums(ctx)
    val = int(S[xs.index(1), ys.index(ctx.scalars["y_tilde_s"])])
    return val, Fraction(g.L * g.M * g.N_lo, ctx.size**3)


@recipe("slopes_in_group")
def _r_slopes_in_group(ctx, name):
    xi = ElementSet.from_iterable(ctx.p, ctx.group().slopes)
    return len(ctx[name].union(xi)), len(xi)


@recipe("E_r_trivial")
def _r_E_r_trivial(ctx, name):
    S = ctx[name]
    return E_r_count(S, ctx.scalars["r"]), len(S) ** 2


@recipe("pivot_exact")
def _r_pivot_exact(ctx, name):
    S = ctx[name]
    return len(sumset(S, dilate(S, ctx.scalars["r"]))), len(S) ** 2


@recipe("pivot_vs")
def _r_pivot_vs(ctx, name, base):
    S = ctx[name]
    return len(sumset(S, dilate(S, ctx.scalars["r"]))), len(ctx[base]) ** 2


@recipe("proportion")
def _r_proportion(ctx, sub, sup):
    return len(ctx[sub]), ctx.frac("proportion") * len(ctx[sup])


def _dil(ctx, coef, name):
    return dilate(ctx[name], coef)


def _quad_coefs(ctx):
    q = ctx.scalars["slopes"]
    return q["p"], q["q"], q["s"], q["t"]


@recipe("vot")
def _r_vot(ctx, name):
    S = ctx[name]
    a, b, c, d = _quad_coefs(ctx)
    big = signed_sumset([(1, _dil(ctx, a, name)), (-1, _dil(ctx, b, name)),
                         (1, _dil(ctx, c, name)), (-1, _dil(ctx, d, name))])
    return len(sumset(S, dilate(S, ctx.scalars["r"]))), len(big)


@recipe("inv")
def _r_inv(ctx):
    a, b, c, d = _quad_coefs(ctx)
    p = ctx.p
    return (a - b) * mod_inverse(c - d, p) % p, ctx.scalars["r"]


def _cover_entry(ctx, key):
    return ctx.scalars["covers"][key]


@recipe("cov")
def _r_cov(ctx, key):
    e = _cover_entry(ctx, key)
    X = dilate(ctx[e["set"]], e["slope"])
    A_xi = ctx.line(e["slope"])
    return len(e["translates"]), Fraction(len(sumset(X, dilate(A_xi, e["slope"]))), len(A_xi))


@recipe("cov_K")
def _r_cov_K(ctx, key):
    e = _cover_entry(ctx, key)
    return len(e["translates"]), ctx.frac("K") * ctx.size / ctx.group().N_hi


@recipe("cov_sound")
def _r_cov_sound(ctx, key, sub):
    e = _cover_entry(ctx, key)
    U = ctx.covered_by(e["slope"], e["translates"])
    return len(dilate(ctx[sub], e["slope"]).union(U)), len(U)


@recipe("cover_product")
def _r_cover_product(ctx, name):
    a, b, c, d = _quad_coefs(ctx)
    big = signed_sumset([(1, _dil(ctx, a, name)), (-1, _dil(ctx, b, name)),
                         (1, _dil(ctx, c, name)), (-1, _dil(ctx, d, name))])
    counts = 1
    for k in ("p", "q", "s", "t"):
        counts *= len(_cover_entry(ctx, k)["translates"])
    return len(big), counts * len(ctx.s4())


@recipe("fin_chain")
def _r_fin_chain(ctx, name, bound):
    g = ctx.group()
    lhs = g.N_lo**4 * len(ctx[name]) ** 2
    K, n = ctx.frac("K"), ctx.size
    rhs = K**4 * n**4 * len(ctx.s4()) if bound == "S4" else K**7 * n**5
    return lhs, rhs


@recipe("s4_bound")
def _r_s4_bound(ctx):
    return len(ctx.s4()), ctx.frac("K") ** 3 * ctx.size


@recipe("ph")
def _r_ph(ctx, form):
    C = ctx["C"]
    R = ctx["R"]
    total = sum(E_r_count(C, r) for r in R)
    c = len(C)
    extra = (c * c - c) ** 2 if form == "exact" else c**4
    return total, len(R) * c * c + extra


@recipe("E_r_small")
def _r_E_r_small(ctx):
    C = ctx["C"]
    return E_r_count(C, ctx.scalars["r"]), len(C) ** 2


@recipe("cauchy_schwarz")
def _r_cauchy_schwarz(ctx, name):
    S = ctx[name]
    r = ctx.scalars["r"]
    return len(sumset(S, dilate(S, r))), Fraction(len(S) ** 4, E_r_count(S, r))


# case iii -----------------------------------------------------------------


def _r1(ctx):
    return (ctx.scalars["r"] + 1) % ctx.p


@recipe("bchain3_injective")
def _r_b3_inj(ctx):
    C1, D1 = ctx["C_prime"], ctx["Cp_prime"]
    return len(sumset(C1, dilate(D1, _r1(ctx)))), len(C1) * len(D1)


@recipe("bchain3")
def _r_b3(ctx):
    g = ctx.group()
    n = ctx.size
    return (len(sumset(ctx["C_prime"], dilate(ctx["Cp_prime"], _r1(ctx)))),
            Fraction(g.L * g.N_lo, n) * Fraction(g.L * g.M * g.N_lo, n**4))


@recipe("line_contained")
def _r_line_contained(ctx, name):
    X = dilate(ctx[name], ctx.scalars["pivot_slope"])
    return len(X.union(ctx["A_s"])), len(ctx["A_s"])


@recipe("pr_floor")
def _r_pr_floor(ctx):
    return len(ctx["C_second"]), (1 - ctx.frac("pr_eps")) * len(ctx["C_prime"])


def _pr_big(ctx):
    D1 = ctx["Cp_prime"]
    return signed_sumset([(1, ctx["C_second"]), (1, D1), (1, dilate(D1, ctx.scalars["r"]))])


@recipe("nda_containment")
def _r_nda_containment(ctx):
    return len(sumset(ctx["C_second"], dilate(ctx["Cp_prime"], _r1(ctx)))), len(_pr_big(ctx))


@recipe("nda_pr")
def _r_nda_pr(ctx):
    C1, D1 = ctx["C_prime"], ctx["Cp_prime"]
    r = ctx.scalars["r"]
    return len(_pr_big(ctx)), Fraction(len(sumset(C1, D1)) * len(sumset(C1, dilate(D1, r))), len(C1))


@recipe("nda_sum")
def _r_nda_sum(ctx):
    C1, D1 = ctx["C_prime"], ctx["Cp_prime"]
    return Fraction(len(sumset(C1, D1)), len(C1)), ctx.frac("K") * ctx.size / len(ctx["C"])


@recipe("nda_dilate")
def _r_nda_dilate(ctx):
    a, b, c, d = _quad_coefs(ctx)
    C1, D1 = ctx["C_prime"], ctx["Cp_prime"]
    lhs = len(sumset(C1, dilate(D1, ctx.scalars["r"])))
    return lhs, len(sumset(dilate(C1, c - d), dilate(D1, a - b)))


@recipe("nda_pivot")
def _r_nda_pivot(ctx):
    a, b, c, d = _quad_coefs(ctx)
    C1, D1 = ctx["C_prime"], ctx["Cp_prime"]
    lhs = len(sumset(dilate(C1, c - d), dilate(D1, a - b)))
    big = signed_sumset([(1, dilate(C1, c)), (-1, dilate(C1, d)), (-1, dilate(D1, b)), (1, ctx["A_s"])])
    return lhs, len(big)


@recipe("nda_cover_product")
def _r_nda_cover_product(ctx):
    a, b, c, d = _quad_coefs(ctx)
    C1, D1 = ctx["C_prime"], ctx["Cp_prime"]
    big = signed_sumset([(1, dilate(C1, c)), (-1, dilate(C1, d)), (-1, dilate(D1, b)), (1, ctx["A_s"])])
    counts = 1
    for k in ("s", "t", "q"):
        counts *= len(_cover_entry(ctx, k)["translates"])
    return len(big), counts * len(ctx.s4())


@recipe("nda_final")
def _r_nda_final(ctx, bound):
    g = ctx.group()
    n = ctx.size
    N = g.N_lo
    lhs = Fraction(g.L * N, n) ** 2 * Fraction(g.L * g.M * N, n**4) * N**3
    K = ctx.frac("K")
    rhs = K**4 * n**4 * len(ctx.s4()) if bound == "S4" else K**7 * n**5
    return lhs, rhs


@recipe("withlog")
def _r_withlog(ctx):
    K = ctx.frac("K")
    if ctx.scalars["mode"] == "ratio":
        return K**11, ctx.size
    return K**11 * log_bound(ctx.size) ** 4, ctx.size


@recipe("fin2")
def _r_fin2(ctx):
    return ctx.group().M ** 4, ctx.frac("K") ** 7 * ctx.size**11


# --------------------------------------------------------------------------
# case dispatch
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseTag:
    tag: str
    r: int | None = None
    quadruple: tuple[int, int, int, int] | None = None
    source: str | None = None  # set the quadruple is drawn from
    slopes: tuple[int, int, int, int] | None = None  # coefficients used in the pivot
    pivot_slope: int | None = None  # case iii only

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "r": self.r,
            "quadruple": list(self.quadruple) if self.quadruple else None,
            "source": self.source,
            "slopes": list(self.slopes) if self.slopes else None,
            "pivot_slope": self.pivot_slope,
        }


def _ratio_set(S: ElementSet) -> ElementSet:
    return ratio_of_differences(S, S) if len(S) >= 2 else ElementSet.empty(S.prime)


def case_dispatch(R_B: ElementSet, R_C: ElementSet, C_size: int, p: int, tau=Fraction(4)) -> CaseTag:
    """Choose the case and its pivot r deterministically (smallest admissible r)."""
    if not len(R_B) and not len(R_C):
        raise DegenerateInstance("both ratio sets are empty")
    if R_B != R_C:
        only_B = R_B.difference(R_C)
        if len(only_B):
            return CaseTag("i.1", only_B.min())
        return CaseTag("i.2", R_C.difference(R_B).min())
    R = R_B
    if len(R) * Fraction(tau) >= min(C_size * C_size, p):
        return CaseTag("ii")
    for r in R:
        nxt = (r + 1) % p
        if nxt != 0 and nxt not in R:
            return CaseTag("iii", r)
    raise ConsistencyError("no r in R with r + 1 outside R: R would be all of F_p^*")


def find_quadruple(S: ElementSet, r: int) -> tuple[int, int, int, int]:
    """Lexicographically first (u, v, s, t) in S with u != v, s != t, (u - v) = r (s - t)."""
    p = S.prime
    r_inv = mod_inverse(r, p)
    elems = S.tolist()
    for u in elems:
        for v in elems:
            if u == v:
                continue
            d = (u - v) * r_inv % p
            for s in elems:
                if (s - d) % p in S:
                    return u, v, s, (s - d) % p
    raise DomainError(f"{r} is not in R(S, S)")


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


@dataclass
class TraceReport:
    ctx: Context
    header: dict
    case: CaseTag
    ledger: list[InequalityRecord]
    warnings: list[str] = field(default_factory=list)

    @property
    def case_taken(self) -> str:
        return self.case.tag

    @property
    def final_check(self) -> Fraction:
        return self.ledger[-1].implied_constant

    def record(self, label: str) -> InequalityRecord:
        return next(r for r in self.ledger if r.label == label)

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "case_taken": self.case.tag,
            "case": self.case.to_dict(),
            "sets": {k: v.tolist() for k, v in sorted(self.ctx.sets.items())},
            "scalars": _jsonable(self.ctx.scalars),
            "ledger": [r.to_dict() for r in self.ledger],
            "paper_labels": [r.paper_label for r in self.ledger],
            "final_check": _fr(self.final_check),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TraceReport":
        p = int(d["header"]["p"])
        sets = {k: ElementSet.from_iterable(p, v) for k, v in d["sets"].items()}
        ctx = Context(p, sets, d["scalars"])
        c = d["case"]
        case = CaseTag(
            c["tag"], c["r"], tuple(c["quadruple"]) if c["quadruple"] else None, c["source"],
            tuple(c["slopes"]) if c["slopes"] else None, c["pivot_slope"],
        )
        ledger = [InequalityRecord.from_dict(r) for r in d["ledger"]]
        return cls(ctx, d["header"], case, ledger, list(d.get("warnings", [])))

    @classmethod
    def from_json(cls, text: str) -> "TraceReport":
        return cls.from_dict(json.loads(text))


def _jsonable(x):
    if isinstance(x, Fraction):
        return _fr(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    return int(x)


class _Ledger:
    def __init__(self, ctx: Context):
        self.ctx = ctx
        self.records: list[InequalityRecord] = []

    def add(self, label, paper_label, relation, recipe_name, exact=False, **args):
        lhs, rhs = RECIPES[recipe_name](self.ctx, **args)
        lhs, rhs = Fraction(lhs), Fraction(rhs)
        if lhs <= 0 or rhs <= 0:
            raise ConsistencyError(f"record {label}: non-positive side ({lhs}, {rhs})")
        rec = InequalityRecord(label, paper_label, relation, lhs, rhs, exact, recipe_name, args)
        if exact and not rec.holds():
            raise ConsistencyError(f"exact record {label} fails: {lhs} {relation} {rhs}")
        self.records.append(rec)
        return rec


# --------------------------------------------------------------------------
# the pipeline
# --------------------------------------------------------------------------


def _check_hypothesis(A: ElementSet) -> None:
    if 0 in A:
        raise HypothesisError("A must avoid 0")
    if not len(A):
        raise HypothesisError("A is empty")
    if len(A) ** 2 >= A.prime:
        raise HypothesisError(f"|A|^2 = {len(A) ** 2} >= p = {A.prime}")


def _focus_with_fallback(A_w: ElementSet, config: TraceConfig, K: Fraction, warnings: list):
    """Focus lemma on the popular group; falls back to other groups / lower constants.

    Returns (group, focus result, whether the group is the energy maximiser).
    """
    stats = line_statistics(A_w)
    if config.mode == "ratio":
        g, P = popular_lines_mode(A_w, K)
        candidates = [(g, P)]
    else:
        groups = dyadic_decompose(stats)
        top = select_popular_group(groups)
        ordered = sorted(groups, key=lambda g: (-g.M, g.j))
        candidates = [(g, point_set(stats, g.slopes)) for g in ordered]
        assert candidates[0][0] is top
    for idx, (g, P) in enumerate(candidates):
        cfg = config.focus
        for attempt in range(FOCUS_RETRIES):
            try:
                f = focus_lemma(g, P, len(A_w), cfg)
            except FocusError:
                cfg = cfg.scaled(Fraction(1, 2))
                continue
            break
        else:
            continue
        if attempt:
            warnings.append(f"focus constants lowered by 2^-{attempt} for group j={g.j}")
        if len(f.B_tilde) >= 2 or len(f.C) >= 2:
            if idx:
                warnings.append(
                    f"popular group j={candidates[0][0].j} gives a degenerate focus "
                    f"configuration; using group j={g.j}"
                )
            return g, f, idx == 0
    raise DegenerateInstance("every dyadic group yields |B~| <= 1 and |C| <= 1")


def run_trace(A: ElementSet, config: TraceConfig = TraceConfig()) -> TraceReport:
    _check_hypothesis(A)
    p = A.prime
    n0 = len(A)
    warnings: list[str] = []
    K_plus = Fraction(len(sumset(A, A)), n0)
    if config.mode == "ratio":
        K_mult = Fraction(len(ratio_set_simple(A, A)), n0)
    else:
        K_mult = Fraction(len(product_set(A, A)), n0)
    K = max(K_plus, K_mult)

    ctx = Context(p)
    ctx.put("A", A)
    ctx.scalars.update(
        mode=config.mode, K=K, refine_eps=config.refine_eps, pr_eps=config.pr_eps,
        proportion=config.proportion,
    )
    led = _Ledger(ctx)
    mult_op = "ratio" if config.mode == "ratio" else "prod"
    led.add("hyp_sum", "hyp", "le", "hyp", exact=True, op="sum")
    led.add(f"hyp_{mult_op}", "hyp", "le", "hyp", exact=True, op=mult_op)

    # refinement so that |A + A + A + A| << K^3 |A|
    ref = quadruple_refine(A, K, config.refine_eps)
    A_w = ctx.put("A_w", ref.A_prime)
    led.add("finepl", "finepl", "le", "refine_bound")
    led.add("finepl_floor", "finepl", "ge", "refine_floor", exact=True)
    led.add("finepl_subset", "finepl", "eq", "subset", exact=True, sub="A_w", sup="A")
    led.add("hyp_refined", "finepl", "le", "refined_sum", exact=True)

    group, focus, is_top = _focus_with_fallback(A_w, config, K, warnings)
    lam = mod_inverse(focus.x_tilde, p)
    A_s = ctx.put("A_s", dilate(A_w, lam))
    ctx.scalars.update(scale=lam, x_tilde=focus.x_tilde, group_j=group.j)
    led.add("rescale", "rescale", "eq", "rescale", exact=True)

    if config.mode == "product":
        led.add("beg", "beg", "ge", "beg", exact=True)
        led.add("beg_K", "beg", "ge", "beg_K")
    else:
        led.add("remark_support", "remark", "ge", "remark_support")
        led.add("remark_N", "remark", "ge", "remark_N", exact=True)
    led.add("dy_lo", "dy", "ge", "dy", exact=True, side="lo")
    led.add("dy_hi", "dy", "le", "dy", exact=True, side="hi")
    led.add("lbn_L", "lbn", "ge", "lbn", which="L")
    led.add("lbn_N", "lbn", "ge", "lbn", which="N")
    led.add("ptset_lo", "ptset", "ge", "ptset", exact=True, side="lo")
    led.add("ptset_hi", "ptset", "le", "ptset", exact=True, side="hi")
    if config.mode == "product":
        led.add("choiceofm", "choiceofm", "ge", "choiceofm", exact=is_top)

    # focus lemma, recorded in rescaled coordinates (x~ -> 1)
    sc = lambda S: dilate(S, lam)
    ctx.scalars["P_star"] = [[x * lam % p, y * lam % p] for x, y in focus.refined.points]
    ctx.scalars["P_star"].sort()
    ctx.scalars["y_tilde_s"] = focus.y_tilde * lam % p
    ctx.scalars["x_one"] = 1
    B = ctx.put("B", sc(focus.B))
    C = ctx.put("C", sc(focus.C))
    B_t = ctx.put("B_tilde", sc(focus.B_tilde))
    ctx.scalars["focus"] = {
        "x_tilde": focus.x_tilde, "y_tilde": focus.y_tilde, "c1": focus.c1, "c2": focus.c2,
        "c3": focus.c3, "sigma": focus.sigma, "sigma_pair": focus.sigma_pair,
        "c_sigma": focus.c_sigma, "rounds": focus.rounds, "config": focus.config.to_dict(),
    }
    led.add("refined_points", "focus", "eq", "refined_points", exact=True)
    led.add("fiber_B", "ai", "eq", "fiber_match", exact=True, name="B", axis="x", key="x_one")
    led.add("fiber_C", "ai", "eq", "fiber_match", exact=True, name="C", axis="y", key="y_tilde_s")
    led.add("B_tilde_subset", "focus", "eq", "subset", exact=True, sub="B_tilde", sup="B")
    led.add("focus_popular", "focus", "ge", "focus_popular")
    led.add("sbd", "sbd", "ge", "sbd")
    led.add("sbd1", "sbd1", "ge", "sbd1")
    led.add("onebug", "onebug", "ge", "onebug")
    led.add("cl", "cl", "ge", "cl")
    led.add("B_slopes", "focus", "eq", "slopes_in_group", exact=True, name="B_tilde")

    R_B, R_C = _ratio_set(B_t), _ratio_set(C)
    ctx.scalars["R_sizes"] = {"B_tilde": len(R_B), "C": len(R_C)}
    tag = case_dispatch(R_B, R_C, len(C), p, config.tau)
    covers: dict[str, dict] = {}
    ctx.scalars["covers"] = covers
    y_inv = mod_inverse(ctx.scalars["y_tilde_s"], p)

    def cover_all(name: str, slopes: dict[str, int]) -> ElementSet:
        """Cover slope * S by translates of slope * A_slope; keep the jointly covered part."""
        S = ctx[name]
        keep = S
        for key, xi in slopes.items():
            A_xi = ctx.line(xi)
            res = greedy_cover(dilate(S, xi), dilate(A_xi, xi), config.cover_eps)
            covers[key] = {"set": name, "slope": xi, "translates": list(res.translates)}
            keep = keep.intersection(dilate(res.covered, mod_inverse(xi, p)))
        return keep

    def pivot_chain(name: str, sub: str, fin_label: str, bchain: str):
        coef = dict(zip("pqst", ctx.scalars["slopes"]["list"]))
        for xi in set(coef.values()):
            if xi not in group.slopes:
                raise ConsistencyError(f"pivot coefficient {xi} is not a slope of the group")
        kept = cover_all(name, coef)
        Sp = ctx.put(sub, kept)
        led.add(f"{sub}_floor", bchain, "ge", "proportion", exact=True, sub=sub, sup=name)
        led.add(f"{bchain}", bchain, "ge", "pivot_vs", name=sub, base=name)
        led.add("vot", "vot", "le", "vot", exact=True, name=sub)
        for k in "pqst":
            led.add(f"cov:{k}", "cov", "le", "cov", key=k)
            led.add(f"cov_K:{k}", "cov", "le", "cov_K", key=k)
            led.add(f"cov_sound:{k}", "cov", "eq", "cov_sound", exact=True, key=k, sub=sub)
        led.add("cover_product", "cov", "le", "cover_product", exact=True, name=sub)
        led.add("finepl_pm", "finepl", "le", "s4_bound")
        led.add(fin_label, fin_label, "le", "fin_chain", name=name, bound="S4")
        led.add(f"{fin_label}_K7", fin_label, "le", "fin_chain", name=name, bound="K7")
        return Sp

    def set_slopes(values):
        ctx.scalars["slopes"] = {"p": values[0], "q": values[1], "s": values[2], "t": values[3],
                                 "list": list(values)}

    if tag.tag == "i.1":
        r = tag.r
        quad = find_quadruple(B_t, r)
        ctx.scalars["r"] = r
        set_slopes(quad)
        tag = CaseTag("i.1", r, quad, "B_tilde", quad)
        led.add("quad1", "quad1", "eq", "E_r_trivial", exact=True, name="C")
        Cp = pivot_chain("C", "C_prime", "fin1", "bchain1")
        led.add("bchain1_exact", "bchain1", "eq", "pivot_exact", exact=True, name="C_prime")
    elif tag.tag == "i.2":
        r = tag.r
        quad = find_quadruple(C, r)
        slopes = tuple(a * y_inv % p for a in quad)
        ctx.scalars["r"] = r
        set_slopes(slopes)
        tag = CaseTag("i.2", r, quad, "C", slopes)
        led.add("inv", "inv", "eq", "inv", exact=True)
        _slope_warnings(slopes, focus, lam, p, warnings)
        led.add("quad1", "quad1", "eq", "E_r_trivial", exact=True, name="B_tilde")
        pivot_chain("B_tilde", "B_tilde_prime", "fin11", "bchain1")
        led.add("bchain1_exact", "bchain1", "eq", "pivot_exact", exact=True, name="B_tilde_prime")
    elif tag.tag == "ii":
        R = ctx.put("R", R_C)
        r = min(R, key=lambda x: (E_r_count(C, x), x))
        quad = find_quadruple(C, r)
        slopes = tuple(a * y_inv % p for a in quad)
        ctx.scalars["r"] = r
        set_slopes(slopes)
        tag = CaseTag("ii", r, quad, "C", slopes)
        led.add("ph", "ph", "eq", "ph", exact=True, form="exact")
        led.add("ph_bound", "ph", "le", "ph", exact=True, form="bound")
        led.add("E_r_small", "ph", "le", "E_r_small")
        led.add("inv", "inv", "eq", "inv", exact=True)
        _slope_warnings(slopes, focus, lam, p, warnings)
        pivot_chain("C", "C_prime", "fin1", "bchain2")
        led.add("bchain2_cs", "bchain2", "ge", "cauchy_schwarz", exact=True, name="C_prime")
    else:
        r = tag.r
        quad = find_quadruple(B_t, r)
        ctx.scalars["r"] = r
        set_slopes(quad)
        pivot = quad[0]
        ctx.scalars["pivot_slope"] = pivot
        tag = CaseTag("iii", r, quad, "B_tilde", quad, pivot)
        Cp = ctx.put("Cp_tilde", sc(focus.intersections[pivot * focus.x_tilde % p]))
        led.add("Cp_subset", "cl", "eq", "subset", exact=True, sub="Cp_tilde", sup="C")
        led.add("Cp_line", "nda", "eq", "line_contained", exact=True, name="Cp_tilde")
        _, _, s, t = quad
        q = quad[1]
        C1 = cover_all("C", {"s": s, "t": t})
        ctx.put("C_prime", C1)
        D1 = cover_all("Cp_tilde", {"q": q})
        ctx.put("Cp_prime", D1)
        led.add("C_prime_floor", "bchain3", "ge", "proportion", exact=True, sub="C_prime", sup="C")
        led.add("Cp_prime_floor", "bchain3", "ge", "proportion", exact=True,
                sub="Cp_prime", sup="Cp_tilde")
        led.add("bchain3_injective", "bchain3", "eq", "bchain3_injective", exact=True)
        led.add("bchain3", "bchain3", "ge", "bchain3")
        pr = pr_refine(C1, [D1, dilate(D1, r)], config.pr_eps)
        ctx.put("C_second", pr.Y_prime)
        ctx.scalars["pr_constant"] = pr.constant
        led.add("nda:pr_floor", "nda", "ge", "pr_floor", exact=True)
        led.add("nda:containment", "nda", "le", "nda_containment", exact=True)
        led.add("nda:pr", "nda", "le", "nda_pr")
        led.add("nda:sum", "nda", "le", "nda_sum")
        led.add("nda:dilate", "nda", "eq", "nda_dilate", exact=True)
        led.add("nda:pivot", "nda", "le", "nda_pivot", exact=True)
        for k, sub in (("s", "C_prime"), ("t", "C_prime"), ("q", "Cp_prime")):
            led.add(f"cov:{k}", "cov", "le", "cov", key=k)
            led.add(f"cov_K:{k}", "cov", "le", "cov_K", key=k)
            led.add(f"cov_sound:{k}", "cov", "eq", "cov_sound", exact=True, key=k, sub=sub)
        led.add("nda:cover_product", "nda", "le", "nda_cover_product", exact=True)
        led.add("finepl_pm", "finepl", "le", "s4_bound")
        led.add("nda", "nda", "le", "nda_final", bound="S4")
        led.add("nda_K7", "nda", "le", "nda_final", bound="K7")

    led.add("withlog", "withlog", "ge", "withlog")
    led.add("fin2", "fin2", "le", "fin2")

    header = {
        "input": format_set_literal(A),
        "p": int(p),
        "size": n0,
        "working_size": len(A_w),
        "K_plus": _fr(K_plus),
        "K_times" if config.mode == "product" else "K_ratio": _fr(K_mult),
        "K": _fr(K),
        "config": config.to_dict(),
        "group": {**group.to_dict(), "N_avg": _fr(group.N_avg), "popular": is_top},
        "focus_constants": {"c1": _fr(focus.c1), "c2": _fr(focus.c2), "c3": _fr(focus.c3)},
        "pivot_symbol_note": "pivot_slope is the element of B~ written p in the case analysis; "
        "it is unrelated to the field characteristic",
    }
    return TraceReport(ctx, header, tag, led.records, warnings)


def _slope_warnings(slopes, focus, lam, p, warnings):
    refined = {y * pow(x, -1, p) % p for x, y in focus.refined.points}
    for xi in slopes:
        if xi not in refined:
            warnings.append(f"slope {xi} lies in the group but not among the refined lines")


def _trace_json(args) -> str:
    literal, config = args
    return run_trace(parse_set_literal(literal), config).to_json()


def run_traces(sets: list[ElementSet], config: TraceConfig = TraceConfig(), workers: int = 1) -> list[str]:
    """Serialized reports for many sets; output order and bytes do not depend on ``workers``."""
    jobs = [(format_set_literal(A), config) for A in sets]
    if workers <= 1:
        return [_trace_json(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_trace_json, jobs))


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------


def verify_ledger(report: TraceReport | dict | str) -> list[str]:
    """Recompute every record from the stored sets; return one message per bad label."""
    if isinstance(report, str):
        report = TraceReport.from_json(report)
    elif isinstance(report, dict):
        report = TraceReport.from_dict(report)
    ctx = Context(report.ctx.p, report.ctx.sets, report.ctx.scalars)
    problems: dict[str, list[str]] = {}

    def flag(label, msg):
        problems.setdefault(label, []).append(msg)

    if report.case.tag not in CASES:
        flag("case", f"unknown case {report.case.tag!r}")
    if not report.ledger:
        flag("ledger", "empty ledger")
    elif report.ledger[-1].paper_label != "fin2":
        flag("ledger", "ledger does not end with fin2")
    seen = set()
    for rec in report.ledger:
        if rec.label in seen:
            flag(rec.label, "duplicate label")
        seen.add(rec.label)
        if rec.relation not in RELATIONS:
            flag(rec.label, f"bad relation {rec.relation}")
        if rec.lhs <= 0 or rec.rhs <= 0:
            flag(rec.label, "non-positive side")
            continue
        try:
            lhs, rhs = RECIPES[rec.recipe](ctx, **rec.args)
        except Exception as exc:  # a corrupted report can break any recipe
            flag(rec.label, f"recomputation failed: {exc!r}")
            continue
        if Fraction(lhs) != rec.lhs:
            flag(rec.label, f"lhs {rec.lhs} != recomputed {lhs}")
        if Fraction(rhs) != rec.rhs:
            flag(rec.label, f"rhs {rec.rhs} != recomputed {rhs}")
        if rec.exact and not rec.holds():
            flag(rec.label, f"exact relation fails: {rec.lhs} {rec.relation} {rec.rhs}")
    _verify_witness(report, ctx, flag)
    return [f"{label}: {'; '.join(msgs)}" for label, msgs in problems.items()]


def _verify_witness(report: TraceReport, ctx: Context, flag) -> None:
    case = report.case
    p = ctx.p
    if case.r is None or case.quadruple is None:
        flag("case", "missing witness")
        return
    if ctx.scalars.get("r") != case.r:
        flag("case", "stored r disagrees with the case tag")
    u, v, s, t = case.quadruple
    if u == v or s == t:
        flag("case", "degenerate witness quadruple")
        return
    if (u - v) * mod_inverse(s - t, p) % p != case.r % p:
        flag("case", "witness quadruple does not reproduce r")
    src = ctx.sets.get(case.source)
    if src is None or any(x not in src for x in case.quadruple):
        flag("case", f"witness quadruple not drawn from {case.source}")
    B_t, C = ctx["B_tilde"], ctx["C"]
    R_B, R_C = _ratio_set(B_t), _ratio_set(C)
    if case.tag == "i.1" and not (case.r in R_B and case.r not in R_C):
        flag("case", "case i.1 witness must lie in R(B~,B~) but not R(C,C)")
    if case.tag == "i.2" and not (case.r in R_C and case.r not in R_B):
        flag("case", "case i.2 witness must lie in R(C,C) but not R(B~,B~)")
    if case.tag in ("ii", "iii") and R_B != R_C:
        flag("case", "cases ii/iii require R(B~,B~) = R(C,C)")
    if case.tag == "iii" and ((case.r + 1) % p == 0 or (case.r + 1) % p in R_C):
        flag("case", "case iii needs r + 1 outside R and nonzero")
