"""Local update rules for cancellative spin systems.

A rule template is a finite set of (row, col) offset pairs with a positive
rate.  Anchored at site ``i``, the template reads the spins at ``i + col``
for the columns of each row ``r`` and, when their mod-2 sum is odd, toggles
the spin at ``i + row``.  All rule families here are translation invariant:
the template plus the anchor determines the update.

Flip-symmetric single-row families (voter-type models) and their transposed
parity-preserving duals (annihilating walks with branching) are both plain
:class:`RuleSet` objects; the engines and the exact generator treat them
identically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .lattice import LatticeShape, Site, SpinConfig, _as_site

Pair = tuple[Site, Site]

X_MODEL_NAMES = ("neutral-np", "affine", "rebellious", "disagreement", "swapping")
# common names for specific dual processes, resolved to dual-of(model)
DUAL_ALIASES = {
    "adbarw": "rebellious",
    "dbarw": "disagreement",
    "sarw": "swapping",
}

RATE_TOL = 1e-12


def _canon_pairs(pairs: Iterable[Pair], d: int) -> frozenset[Pair]:
    out = set()
    for row, col in pairs:
        out.add((_as_site(row, d), _as_site(col, d)))
    return frozenset(out)


@dataclass(frozen=True)
class RuleTemplate:
    """One anchored jump template: offset pairs plus a rate."""

    pairs: frozenset[Pair]
    rate: float

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("a template needs at least one (row, col) pair")
        if not self.rate > 0.0:
            raise ValueError("template rates must be positive")
        first_row = next(iter(self.pairs))[0]
        d = 1 if isinstance(first_row, int) else len(first_row)
        object.__setattr__(self, "pairs", _canon_pairs(self.pairs, d))

    @property
    def d(self) -> int:
        return len(next(iter(self.pairs))[0])

    @property
    def rows(self) -> tuple[Site, ...]:
        return tuple(sorted({r for r, _ in self.pairs}))

    def cols_of(self, row: Site) -> tuple[Site, ...]:
        return tuple(sorted(c for r, c in self.pairs if r == row))

    @property
    def radius(self) -> int:
        return max(abs(c) for r, co in self.pairs for s in (r, co) for c in s)

    def sort_key(self):
        return tuple(sorted(self.pairs))

    def transpose(self) -> "RuleTemplate":
        return RuleTemplate(frozenset((c, r) for r, c in self.pairs), self.rate)

    def __repr__(self) -> str:
        return f"RuleTemplate({pairs_to_text(self.pairs)}, rate={self.rate!r})"


@dataclass(frozen=True)
class RuleSet:
    """A merged, canonically ordered collection of templates."""

    d: int
    templates: tuple[RuleTemplate, ...]

    def __post_init__(self):
        for t in self.templates:
            if t.d != self.d:
                raise ValueError("template dimension does not match rule set")
        merged: dict[frozenset[Pair], float] = {}
        for t in self.templates:
            merged[t.pairs] = merged.get(t.pairs, 0.0) + t.rate
        tpls = tuple(
            sorted(
                (RuleTemplate(p, r) for p, r in merged.items() if r > RATE_TOL),
                key=RuleTemplate.sort_key,
            )
        )
        object.__setattr__(self, "templates", tpls)

    @property
    def radius(self) -> int:
        return max((t.radius for t in self.templates), default=0)

    @property
    def total_rate_per_site(self) -> float:
        return sum(t.rate for t in self.templates)

    @property
    def spin_flip_symmetric(self) -> bool:
        """Every row of every template reads an even number of columns.

        Equivalent to invariance of the dynamics under the global 0<->1
        flip: an all-ones input contributes 0 mod 2 to every row.
        """
        return all(
            len(t.cols_of(r)) % 2 == 0 for t in self.templates for r in t.rows
        )

    @property
    def parity_preserving(self) -> bool:
        """Every column feeds an even number of rows, so each firing toggles
        an even number of sites and the occupation parity is conserved."""
        for t in self.templates:
            cols = {c for _, c in t.pairs}
            for c in cols:
                if sum(1 for r, cc in t.pairs if cc == c) % 2 != 0:
                    return False
        return True

    def transpose(self) -> "RuleSet":
        return RuleSet(self.d, tuple(t.transpose() for t in self.templates))


def transpose_dual(r: RuleSet) -> RuleSet:
    """The dual rule family: every template transposed, rates kept."""
    return r.transpose()


# ---------------------------------------------------------------------------
# model constructors

@dataclass(frozen=True)
class ModelSpec:
    """Name plus parameters identifying one model from the catalog."""

    name: str
    alpha: float
    d: int = 1
    R: int = 1
    dual: bool = False
    allow_1d: bool = False

    def __post_init__(self):
        name = self.name.lower()
        if name in DUAL_ALIASES:
            object.__setattr__(self, "name", DUAL_ALIASES[name])
            object.__setattr__(self, "dual", True)
            name = self.name
        if name not in X_MODEL_NAMES:
            raise ValueError(
                f"unknown model {self.name!r}; expected one of {X_MODEL_NAMES} "
                f"or a dual alias {tuple(DUAL_ALIASES)}"
            )
        object.__setattr__(self, "name", name)
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.d < 1 or self.R < 1:
            raise ValueError("d and R must be positive")
        if name in ("rebellious", "disagreement", "swapping"):
            if self.d != 1:
                raise ValueError(f"the {name} model is one-dimensional")
        else:
            if max(self.d, self.R) < 2 and not self.allow_1d:
                raise ValueError(
                    f"the {name} model requires d >= 2 or R >= 2; pass "
                    "allow_1d=True to run the degenerate d = R = 1 case"
                )

    def label(self) -> str:
        base = f"{self.name}(alpha={self.alpha:g}"
        if self.name in ("neutral-np", "affine"):
            base += f", d={self.d}, R={self.R}"
        base += ")"
        return f"dual-of-{base}" if self.dual else base


def _block_neighborhood(d: int, R: int) -> list[Site]:
    """All sites of the (2R+1)^d block around the origin, origin excluded."""
    rng = range(-R, R + 1)
    return [s for s in itertools.product(rng, repeat=d) if any(c != 0 for c in s)]


def _single_row(cols: Iterable[Site], rate: float, d: int) -> RuleTemplate:
    zero = (0,) * d
    return RuleTemplate(frozenset((zero, _as_site(c, d)) for c in cols), rate)


def _build_neutral_np(alpha: float, d: int, R: int) -> list[RuleTemplate]:
    nbrs = _block_neighborhood(d, R)
    n = len(nbrs)
    zero = (0,) * d
    tpls = []
    if alpha > 0.0:
        for j in nbrs:
            tpls.append(_single_row([zero, j], alpha / n, d))
    if alpha < 1.0:
        for j, k in itertools.combinations(nbrs, 2):
            tpls.append(_single_row([j, k], (1.0 - alpha) / n**2, d))
    return tpls


def _build_affine(alpha: float, d: int, R: int) -> list[RuleTemplate]:
    nbrs = _block_neighborhood(d, R)
    n = len(nbrs)
    zero = (0,) * d
    tpls = []
    if alpha > 0.0:
        for j in nbrs:
            tpls.append(_single_row([zero, j], alpha / n, d))
    if alpha < 1.0:
        even_rate = (1.0 - alpha) * 2.0 ** (1 - n)
        full = [zero] + nbrs
        for size in range(2, n + 2, 2):
            for delta in itertools.combinations(full, size):
                tpls.append(_single_row(delta, even_rate, d))
    return tpls


def _build_rebellious(alpha: float) -> list[RuleTemplate]:
    tpls = []
    if alpha > 0.0:
        tpls += [_single_row([0, -1], alpha, 1), _single_row([0, 1], alpha, 1)]
    if alpha < 1.0:
        tpls += [
            _single_row([-2, -1], 1.0 - alpha, 1),
            _single_row([1, 2], 1.0 - alpha, 1),
        ]
    return tpls


def _build_disagreement(alpha: float) -> list[RuleTemplate]:
    tpls = []
    if alpha > 0.0:
        tpls += [_single_row([0, -1], alpha, 1), _single_row([0, 1], alpha, 1)]
    if alpha < 1.0:
        tpls.append(_single_row([-1, 1], 1.0 - alpha, 1))
    return tpls


def _build_swapping(alpha: float) -> list[RuleTemplate]:
    tpls = []
    if alpha > 0.0:
        tpls += [_single_row([0, -1], alpha, 1), _single_row([0, 1], alpha, 1)]
    if alpha < 1.0:
        # both rows read both sites: fires iff the two spins disagree, and
        # then toggles both, i.e. exchanges them
        swap = RuleTemplate(
            frozenset({((0,), (0,)), ((0,), (1,)), ((1,), (0,)), ((1,), (1,))}),
            1.0 - alpha,
        )
        tpls.append(swap)
    return tpls


def build_model(spec: ModelSpec) -> RuleSet:
    """Instantiate the rule set for a catalog model (or its dual)."""
    if spec.name == "neutral-np":
        tpls = _build_neutral_np(spec.alpha, spec.d, spec.R)
    elif spec.name == "affine":
        tpls = _build_affine(spec.alpha, spec.d, spec.R)
    elif spec.name == "rebellious":
        tpls = _build_rebellious(spec.alpha)
    elif spec.name == "disagreement":
        tpls = _build_disagreement(spec.alpha)
    else:
        tpls = _build_swapping(spec.alpha)
    rs = RuleSet(spec.d, tuple(tpls))
    return transpose_dual(rs) if spec.dual else rs


def model(name: str, alpha: float, **kw) -> RuleSet:
    """Shorthand: ``model("rebellious", 0.3)`` or ``model("adbarw", 0.3)``."""
    return build_model(ModelSpec(name, alpha, **kw))


@dataclass(frozen=True)
class DisagreementReduction:
    """Equivalence of a short-range model with the disagreement voter model.

    ``model(name, alpha)`` run for time ``time_scale * t`` has the same law
    as ``disagreement(alpha_prime)`` run for time ``t`` ... equivalently its
    rule set equals ``time_scale *`` the disagreement(alpha_prime) rule set.
    """

    alpha_prime: float
    time_scale: float


def reduce_to_disagreement(name: str, alpha: float) -> DisagreementReduction:
    """Exact reduction of the d=1, R=1 neutral-np / affine models."""
    if name == "neutral-np":
        return DisagreementReduction(2.0 * alpha / (1.0 + alpha), (1.0 + alpha) / 4.0)
    if name == "affine":
        return DisagreementReduction(1.0 / (2.0 - alpha), (2.0 - alpha) / 2.0)
    raise ValueError("the reduction applies to the neutral-np and affine models")


# ---------------------------------------------------------------------------
# rule application and rates

def action_toggles(template: RuleTemplate, x: SpinConfig, anchor) -> list[Site]:
    """Sites toggled when ``template`` anchored at ``anchor`` fires on ``x``.

    Row ``r`` toggles iff the mod-2 sum of ``x`` over its columns is odd.
    An empty list means the instance is currently inactive (null action).
    """
    a = _as_site(anchor, x.shape.d)
    toggles = []
    for row in template.rows:
        par = 0
        for col in template.cols_of(row):
            par ^= x.value_at(tuple(ai + ci for ai, ci in zip(a, col)))
        if par:
            toggles.append(tuple(ai + ri for ai, ri in zip(a, row)))
    return toggles


def apply_rule(x: SpinConfig, template: RuleTemplate, anchor) -> SpinConfig:
    """State after one firing of ``template`` at ``anchor`` (wraps on tori)."""
    return x.toggled(action_toggles(template, x, anchor))


def effective_flip_rate(r: RuleSet, x: SpinConfig, site) -> float:
    """Total rate at which ``x`` flips the spin at ``site``.

    Requires every template to write a single row, so that the toggle at
    ``site`` is the sole effect; multi-row rule sets (exchanges, duals with
    paired writes) have no per-site flip rate and raise.
    """
    s = _as_site(site, r.d)
    total = 0.0
    for t in r.templates:
        rows = t.rows
        if len(rows) != 1:
            raise ValueError(
                "effective_flip_rate needs single-row templates; "
                f"{pairs_to_text(t.pairs)} writes {len(rows)} rows"
            )
        row = rows[0]
        anchor = tuple(si - ri for si, ri in zip(s, row))
        par = 0
        for col in t.cols_of(row):
            par ^= x.value_at(tuple(ai + ci for ai, ci in zip(anchor, col)))
        if par:
            total += t.rate
    return total


def _candidate_anchors(r: RuleSet, y: SpinConfig) -> set[Site]:
    """Anchors whose instance reads at least one occupied site of ``y``."""
    cands: set[Site] = set()
    for t in r.templates:
        col_offs = {c for _, c in t.pairs}
        for s in y.support:
            for c in col_offs:
                cands.add(tuple(si - ci for si, ci in zip(s, c)))
    return cands


def total_exit_rate(r: RuleSet, y: SpinConfig, per_site: bool = False) -> float:
    """Summed rate of all instances whose action on ``y`` is nonzero.

    This is the total jump rate out of state ``y``; an interval of ones in
    a one-dimensional nearest-block model exits only through its two ends.
    """
    total = 0.0
    if y.is_dense:
        anchors = [y.shape.site_of_flat(i) for i in range(y.shape.n_sites)]
        for t in r.templates:
            for a in anchors:
                if action_toggles(t, y, a):
                    total += t.rate
        return total / y.shape.n_sites if per_site else total
    if per_site:
        raise ValueError("per-site normalization needs a finite torus")
    for t in r.templates:
        col_offs = {c for _, c in t.pairs}
        cands = {
            tuple(si - ci for si, ci in zip(s, c))
            for s in y.support
            for c in col_offs
        }
        for a in cands:
            if action_toggles(t, y, a):
                total += t.rate
    return total


@dataclass(frozen=True)
class RuleSetAnalysis:
    spin_flip_symmetric: bool
    parity_preserving: bool
    radius: int
    total_exit_rate: Callable[..., float] = field(compare=False)


def analyze_ruleset(r: RuleSet) -> RuleSetAnalysis:
    return RuleSetAnalysis(
        spin_flip_symmetric=r.spin_flip_symmetric,
        parity_preserving=r.parity_preserving,
        radius=r.radius,
        total_exit_rate=lambda y, per_site=False: total_exit_rate(r, y, per_site),
    )


# ---------------------------------------------------------------------------
# pairing-change norm

def _normalize_shape(pairs: frozenset[Pair]) -> frozenset[Pair]:
    """Translate a pair set so its lexicographically least offset is 0."""
    offs = sorted({s for p in pairs for s in p})
    base = offs[0]
    return frozenset(
        (tuple(r - b for r, b in zip(row, base)), tuple(c - b for c, b in zip(col, base)))
        for row, col in pairs
    )


def norm_b(y: SpinConfig, basis: Sequence, ruleset: RuleSet | None = None) -> int:
    """Number of anchors where some basis rule changes the pairing parity.

    Counts sites ``i`` such that for some basis member ``B`` and some input
    configuration ``x``, the bilinear form ``y^T (T_i B) x`` is odd ...
    equivalently some column of ``B`` reads an odd number of ones of ``y``
    through its rows.  With point pair sets ``{0} x {a, b}`` this is the
    particle count of ``y``; with gradient pair sets ``{0, 1} x {c}`` it
    counts sites whose right neighbor disagrees, i.e. half the ordered
    disagreement count.
    """
    shapes: list[frozenset[Pair]] = []
    for b in basis:
        pairs = b.pairs if isinstance(b, RuleTemplate) else _canon_pairs(b, y.shape.d)
        shapes.append(pairs)
    if ruleset is not None:
        have = {_normalize_shape(t.pairs) for t in ruleset.templates}
        for pairs in shapes:
            if _normalize_shape(pairs) not in have:
                raise ValueError(
                    f"basis member {pairs_to_text(pairs)} does not occur in the rule set"
                )

    def member_hits(pairs: frozenset[Pair], anchor: Site) -> bool:
        cols = {c for _, c in pairs}
        for c in cols:
            par = 0
            for row, cc in pairs:
                if cc == c:
                    par ^= y.value_at(tuple(ai + ri for ai, ri in zip(anchor, row)))
            if par:
                return True
        return False

    if y.is_dense:
        anchors: Iterable[Site] = (
            y.shape.site_of_flat(i) for i in range(y.shape.n_sites)
        )
        return sum(1 for a in anchors if any(member_hits(p, a) for p in shapes))
    count = 0
    cands: set[Site] = set()
    for pairs in shapes:
        rows = {r for r, _ in pairs}
        for s in y.support:
            for r in rows:
                cands.add(tuple(si - ri for si, ri in zip(s, r)))
    for a in cands:
        if any(member_hits(p, a) for p in shapes):
            count += 1
    return count


def point_basis(r: RuleSet) -> list[frozenset[Pair]]:
    """All single-row two-column template shapes, anchored to row 0."""
    out = []
    for t in r.templates:
        if len(t.rows) == 1 and len(t.pairs) == 2:
            row = t.rows[0]
            out.append(
                frozenset(
                    ((0,) * r.d, tuple(ci - ri for ci, ri in zip(c, row)))
                    for _, c in t.pairs
                )
            )
    if not out:
        raise ValueError("rule set has no single-row pair templates")
    return out


def gradient_basis(r: RuleSet) -> list[frozenset[Pair]]:
    """All two-row single-column shapes whose rows are nearest neighbors."""
    out = []
    for t in r.templates:
        rows = t.rows
        cols = {c for _, c in t.pairs}
        if len(rows) == 2 and len(cols) == 1 and len(t.pairs) == 2:
            lo, hi = rows
            if sum(abs(a - b) for a, b in zip(lo, hi)) == 1:
                col = next(iter(cols))
                out.append(
                    frozenset(
                        (
                            tuple(r2 - l2 for r2, l2 in zip(rw, lo)),
                            tuple(c2 - l2 for c2, l2 in zip(col, lo)),
                        )
                        for rw, _ in t.pairs
                    )
                )
    if not out:
        raise ValueError("rule set has no adjacent-row single-column templates")
    return out


# ---------------------------------------------------------------------------
# serialization

def _site_to_text(s: Site) -> str:
    return ",".join(str(c) for c in s)


def _site_from_text(txt: str, d: int) -> Site:
    parts = tuple(int(c) for c in txt.split(","))
    if len(parts) != d:
        raise ValueError(f"site {txt!r} does not have {d} coordinates")
    return parts


def pairs_to_text(pairs: frozenset[Pair]) -> str:
    return " ".join(
        f"({_site_to_text(r)}|{_site_to_text(c)})" for r, c in sorted(pairs)
    )


def ruleset_to_text(r: RuleSet) -> str:
    """Stable plain-text form: one header line, one line per template."""
    lines = [f"ruleset d={r.d}"]
    for t in r.templates:
        lines.append(f"template {t.rate!r} {pairs_to_text(t.pairs)}")
    return "\n".join(lines) + "\n"


def ruleset_from_text(text: str) -> RuleSet:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("ruleset d="):
        raise ValueError("expected a 'ruleset d=<dim>' header line")
    d = int(lines[0].split("=", 1)[1])
    tpls = []
    for ln in lines[1:]:
        if not ln.startswith("template "):
            raise ValueError(f"unexpected line {ln!r}")
        _, rate_txt, rest = ln.split(" ", 2)
        pairs = set()
        for tok in rest.split():
            if not (tok.startswith("(") and tok.endswith(")")):
                raise ValueError(f"bad pair token {tok!r}")
            row_txt, col_txt = tok[1:-1].split("|")
            pairs.add((_site_from_text(row_txt, d), _site_from_text(col_txt, d)))
        tpls.append(RuleTemplate(frozenset(pairs), float(rate_txt)))
    return RuleSet(d, tuple(tpls))
