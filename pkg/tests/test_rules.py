"""Model rate tables, duals, closed-form flip rates, and rule algebra."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spindual import lattice, rules
from spindual.lattice import LatticeShape
from spindual.rules import RuleSet, RuleTemplate


def pairs1(row, cols):
    """d=1 pair set for one row offset reading the given column offsets."""
    return frozenset(((row,), (c,)) for c in cols)


def table(r: RuleSet) -> dict:
    return {t.pairs: t.rate for t in r.templates}


def tables_close(a: RuleSet, b: RuleSet, tol=1e-12) -> bool:
    ta, tb = table(a), table(b)
    return ta.keys() == tb.keys() and all(
        math.isclose(ta[k], tb[k], abs_tol=tol) for k in ta)


# rate tables ------------------------------------------------------------------

def test_rebellious_table():
    r = rules.model("rebellious", 0.3)
    assert table(r) == {
        pairs1(0, [-1, 0]): 0.3,
        pairs1(0, [0, 1]): 0.3,
        pairs1(0, [-2, -1]): 0.7,
        pairs1(0, [1, 2]): 0.7,
    }


def test_disagreement_table():
    r = rules.model("disagreement", 0.4)
    assert table(r) == {
        pairs1(0, [-1, 0]): 0.4,
        pairs1(0, [0, 1]): 0.4,
        pairs1(0, [-1, 1]): 0.6,
    }


def test_swapping_table():
    r = rules.model("swapping", 0.25)
    swap = frozenset({((0,), (0,)), ((0,), (1,)), ((1,), (0,)), ((1,), (1,))})
    t = table(r)
    assert t[pairs1(0, [-1, 0])] == 0.25
    assert t[pairs1(0, [0, 1])] == 0.25
    assert t[swap] == 0.75
    assert len(t) == 3


def test_neutral_np_d2_table():
    r = rules.model("neutral-np", 0.3, d=2, R=1)
    t = table(r)
    assert len(t) == 36
    origin = (0, 0)
    pair_rates = [v for k, v in t.items()
                  if any(p == (origin, origin) for p in k)]
    other_rates = [v for k, v in t.items()
                   if not any(p == (origin, origin) for p in k)]
    assert len(pair_rates) == 8
    assert all(math.isclose(v, 0.3 / 8) for v in pair_rates)
    assert len(other_rates) == 28
    assert all(math.isclose(v, 0.7 / 64) for v in other_rates)


def test_degenerate_alphas_drop_templates():
    assert len(rules.model("rebellious", 1.0).templates) == 2
    assert len(rules.model("rebellious", 0.0).templates) == 2
    assert len(rules.model("disagreement", 1.0).templates) == 2
    assert len(rules.model("neutral-np", 1.0, d=2, R=1).templates) == 8
    assert len(rules.model("neutral-np", 0.0, d=2, R=1).templates) == 28


def test_rebellious_alpha1_is_nn_voter():
    # both constructions: two single-row templates {0}x{-1,0}, {0}x{0,1},
    # rate 1 each
    r = rules.model("rebellious", 1.0)
    assert table(r) == {pairs1(0, [-1, 0]): 1.0, pairs1(0, [0, 1]): 1.0}
    assert table(r) == table(rules.model("disagreement", 1.0))


# model spec guards -------------------------------------------------------------

def test_alpha_range_enforced():
    with pytest.raises(ValueError):
        rules.model("rebellious", 1.5)
    with pytest.raises(ValueError):
        rules.model("rebellious", -0.1)


def test_unknown_model_rejected():
    with pytest.raises(ValueError, match="unknown model"):
        rules.model("majority", 0.5)


def test_np_affine_need_d_or_R_at_least_2():
    with pytest.raises(ValueError, match="allow_1d"):
        rules.model("neutral-np", 0.5)
    with pytest.raises(ValueError, match="allow_1d"):
        rules.model("affine", 0.5)
    # any of d >= 2, R >= 2, or the explicit override is enough
    rules.model("neutral-np", 0.5, d=2, R=1)
    rules.model("affine", 0.5, d=1, R=2)
    rules.model("neutral-np", 0.5, allow_1d=True)


def test_one_dimensional_models_force_d1():
    with pytest.raises(ValueError, match="one-dimensional"):
        rules.model("rebellious", 0.5, d=2)


def test_dual_aliases():
    assert tables_close(rules.model("adbarw", 0.3),
                        rules.transpose_dual(rules.model("rebellious", 0.3)))
    assert tables_close(rules.model("dbarw", 0.3),
                        rules.transpose_dual(rules.model("disagreement", 0.3)))
    assert tables_close(rules.model("sarw", 0.3),
                        rules.transpose_dual(rules.model("swapping", 0.3)))


# template / ruleset invariants -------------------------------------------------

def test_template_invariants():
    with pytest.raises(ValueError):
        RuleTemplate(frozenset(), 1.0)
    with pytest.raises(ValueError):
        RuleTemplate(pairs1(0, [0, 1]), 0.0)
    with pytest.raises(ValueError):
        RuleTemplate(pairs1(0, [0, 1]), -2.0)


def test_ruleset_merges_duplicates():
    t = pairs1(0, [0, 1])
    r = RuleSet(1, (RuleTemplate(t, 0.5), RuleTemplate(t, 0.25)))
    assert table(r) == {t: 0.75}


def test_ruleset_dimension_check():
    with pytest.raises(ValueError):
        RuleSet(2, (RuleTemplate(pairs1(0, [0, 1]), 1.0),))


def test_transpose_is_an_involution():
    for name in rules.X_MODEL_NAMES:
        kw = {"d": 2} if name in ("neutral-np", "affine") else {}
        r = rules.model(name, 0.3, **kw)
        assert rules.transpose_dual(rules.transpose_dual(r)) == r


def test_transpose_example_is_a_walk_step():
    # {0}x{0,1} at rate a transposes to {0,1}x{0}: with y(0)=1, y(1)=0 the
    # firing toggles both sites, moving the particle one step right
    t = RuleTemplate(pairs1(0, [0, 1]), 0.3).transpose()
    y = lattice.sparse_config(LatticeShape.infinite(1), [0])
    moved = rules.apply_rule(y, t, (0,))
    assert moved.support == frozenset({(1,)})


def test_transpose_example_is_a_double_birth():
    t = RuleTemplate(pairs1(0, [1, 2]), 0.7).transpose()
    y = lattice.sparse_config(LatticeShape.infinite(1), [0])
    born = rules.apply_rule(y, t, (0,))
    assert born.support == frozenset({(0,), (1,), (2,)})


def test_flags_per_model():
    for name in rules.X_MODEL_NAMES:
        kw = {"d": 2} if name in ("neutral-np", "affine") else {}
        r = rules.model(name, 0.3, **kw)
        dual = rules.transpose_dual(r)
        assert r.spin_flip_symmetric, name
        assert not r.parity_preserving, name
        assert dual.parity_preserving, name


def test_radius_values():
    assert rules.model("rebellious", 0.3).radius == 2
    assert rules.model("disagreement", 0.3).radius == 1
    assert rules.model("neutral-np", 0.3, d=2, R=1).radius == 1


# rule application ---------------------------------------------------------------

def test_apply_rule_worked_example():
    sh = LatticeShape.torus(5)
    x = lattice.from_pattern(sh, "00100")
    t = RuleTemplate(pairs1(0, [0, 1]), 1.0)
    out = rules.apply_rule(x, t, (2,))
    assert out.to_pattern() == "00000"


def test_apply_rule_swap_exchanges():
    sh = LatticeShape.torus(6)
    x = lattice.from_pattern(sh, "010000")
    swap = RuleTemplate(
        frozenset({((0,), (0,)), ((0,), (1,)), ((1,), (0,)), ((1,), (1,))}), 1.0)
    out = rules.apply_rule(x, swap, (0,))
    assert out.to_pattern() == "100000"


def test_apply_rule_null_action():
    sh = LatticeShape.torus(5)
    x = lattice.from_pattern(sh, "00110")
    t = RuleTemplate(pairs1(0, [0, 1]), 1.0)
    assert rules.apply_rule(x, t, (2,)) == x  # x(2)+x(3) = 0 mod 2
    assert rules.action_toggles(t, x, (2,)) == []


def test_apply_rule_wraps_on_torus():
    sh = LatticeShape.torus(5)
    x = lattice.from_pattern(sh, "10000")
    t = RuleTemplate(pairs1(0, [0, 1]), 1.0)
    out = rules.apply_rule(x, t, (4,))  # reads x(4)+x(0) = 1, toggles site 4
    assert out.to_pattern() == "10001"


# closed-form flip rates -----------------------------------------------------------

def rebellious_rate(w, alpha):
    """Direct evaluation on the window (x(i-2), ..., x(i+2))."""
    return (alpha * ((w[1] != w[2]) + (w[2] != w[3]))
            + (1 - alpha) * ((w[0] != w[1]) + (w[3] != w[4])))


def test_rebellious_window_by_hand():
    sh = LatticeShape.torus(7)
    for alpha in (0.0, 0.3, 1.0):
        r = rules.model("rebellious", alpha)
        x = lattice.from_pattern(sh, "0110000")  # window at i=2: 0,1,1,0,0
        assert math.isclose(rules.effective_flip_rate(r, x, (2,)), 1.0)


@settings(max_examples=60)
@given(st.text(alphabet="01", min_size=5, max_size=5),
       st.sampled_from([0.0, 0.2, 0.5, 0.8, 1.0]))
def test_rebellious_closed_form(window, alpha):
    sh = LatticeShape.torus(9)
    x = lattice.from_pattern(sh, "00" + window + "00")
    r = rules.model("rebellious", alpha)
    got = rules.effective_flip_rate(r, x, (4,))
    want = rebellious_rate([int(c) for c in window], alpha)
    assert math.isclose(got, want, abs_tol=1e-12)


def test_neutral_np_value_by_hand():
    # center 0 with exactly 4 of 8 neighbors one: f1 = 1/2, rate
    # f1 (f0 + a f1) = (1/2)(1/2 + a/2)
    sh = LatticeShape.torus(5, 5)
    x = lattice.sparse_config(sh, [(1, 1), (1, 2), (2, 1), (3, 3)])
    for alpha in (0.0, 0.4, 1.0):
        r = rules.model("neutral-np", alpha, d=2, R=1)
        got = rules.effective_flip_rate(r, x, (2, 2))
        assert math.isclose(got, 0.5 * (0.5 + alpha * 0.5), abs_tol=1e-12)


def test_affine_zero_when_no_opposite_neighbors():
    sh = LatticeShape.torus(5, 5)
    x = lattice.zeros(sh)
    for alpha in (0.0, 0.5, 1.0):
        r = rules.model("affine", alpha, d=2, R=1)
        assert rules.effective_flip_rate(r, x, (2, 2)) == 0.0


def test_effective_flip_rate_rejects_multirow_sets():
    r = rules.model("swapping", 0.3)
    x = lattice.zeros(LatticeShape.torus(6))
    with pytest.raises(ValueError):
        rules.effective_flip_rate(r, x, (0,))


# analysis, exit rates, norms -------------------------------------------------------

def test_analyze_ruleset_flags():
    rep = rules.analyze_ruleset(rules.model("rebellious", 0.3))
    assert rep.spin_flip_symmetric and not rep.parity_preserving
    rep_dual = rules.analyze_ruleset(rules.model("adbarw", 0.3))
    assert rep_dual.parity_preserving


def test_interval_exit_rate_is_four():
    sh = LatticeShape.infinite(1)
    for n in (4, 7, 11):
        y = lattice.interval(sh, 0, n - 1)
        for alpha in (0.0, 0.3, 1.0):
            r = rules.model("rebellious", alpha)
            assert math.isclose(rules.total_exit_rate(r, y), 4.0, abs_tol=1e-12)


def test_exit_rate_counts_active_instances():
    # single particle under the dual: 2 walk moves (rate a) and 2 double
    # births (rate 1-a) are active
    y = lattice.sparse_config(LatticeShape.infinite(1), [0])
    r = rules.model("adbarw", 0.3)
    assert math.isclose(rules.total_exit_rate(r, y), 2.0, abs_tol=1e-12)


def test_norm_b_point_basis_counts_particles():
    r = rules.model("adbarw", 0.3)
    # the walk templates of the dual transpose back to single-row pairs of
    # the spin model; point shapes for the dual come from its own table
    y = lattice.sparse_config(LatticeShape.infinite(1), [0, 3, 4, 9])
    basis = rules.point_basis(rules.model("rebellious", 0.3))
    assert rules.norm_b(y, basis) == 4


def test_norm_b_gradient_basis_counts_boundaries():
    y = lattice.sparse_config(LatticeShape.infinite(1), [0, 1, 2, 5])
    basis = rules.gradient_basis(rules.model("adbarw", 0.3))
    # boundaries of {0,1,2,5}: (-1,0),(2,3),(4,5),(5,6) -> 4 sites i with
    # y(i) != y(i+1)
    assert rules.norm_b(y, basis) == 4
    assert rules.norm_b(y, basis) * 2 == lattice.config_statistics(y).gradient


def test_norm_b_requires_member_of_ruleset():
    r = rules.model("rebellious", 0.3)
    alien = [frozenset({((0,), (5,)), ((0,), (6,))})]
    with pytest.raises(ValueError, match="does not occur"):
        rules.norm_b(lattice.sparse_config(LatticeShape.infinite(1), [0]),
                     alien, ruleset=r)


# reductions -----------------------------------------------------------------------

def test_d1_reductions_to_disagreement():
    for name in ("neutral-np", "affine"):
        for alpha in (0.0, 0.3, 0.7, 1.0):
            red = rules.reduce_to_disagreement(name, alpha)
            got = rules.model(name, alpha, allow_1d=True)
            dis = rules.model("disagreement", red.alpha_prime)
            scaled = RuleSet(1, tuple(
                RuleTemplate(t.pairs, t.rate * red.time_scale)
                for t in dis.templates))
            assert tables_close(got, scaled), (name, alpha)


def test_reduction_rejects_other_models():
    with pytest.raises(ValueError):
        rules.reduce_to_disagreement("rebellious", 0.3)


# serialization ---------------------------------------------------------------------

def test_text_round_trip_all_models():
    for name in rules.X_MODEL_NAMES:
        kw = {"d": 2} if name in ("neutral-np", "affine") else {}
        for r in (rules.model(name, 0.35, **kw),
                  rules.transpose_dual(rules.model(name, 0.35, **kw))):
            back = rules.ruleset_from_text(rules.ruleset_to_text(r))
            assert back == r
