import numpy as np
import pytest

from fairadjust.estimation import EmpiricalModel, build_v, fit_empirical
from fairadjust.data_model import from_values
from fairadjust.fairness_lp import (CRITERIA, AssembledLP, FairnessSpec, ObjectiveSpec,
                                    assemble, fairness_rows, objective_vector,
                                    write_lp_text)
from fairadjust.lp_solver import solve

from _oracles import random_model, random_policy_tensor


def model_from_parts(z, p_ya):
    z = np.asarray(z, dtype=np.float64)
    p_ya = np.asarray(p_ya, dtype=np.float64)
    p_a = p_ya.sum(axis=1)
    return EmpiricalModel(p_a=p_a, p_ya=p_ya, z=z, v=build_v(z, p_ya),
                          p_yhat_given_a=np.einsum("akj,aj->ak", z, p_ya) / p_a[:, None],
                          n_cells=p_ya * 100, n=100)


def test_spec_validation():
    with pytest.raises(ValueError, match="criterion"):
        FairnessSpec(criterion="nope")
    with pytest.raises(ValueError, match="epsilon"):
        FairnessSpec(epsilon=1.5)
    with pytest.raises(ValueError, match="pairing"):
        FairnessSpec(pairing="ring")
    with pytest.raises(ValueError, match="custom_loss"):
        ObjectiveSpec(kind="custom")
    with pytest.raises(ValueError, match="custom_loss"):
        ObjectiveSpec(kind="weighted", custom_loss=np.ones((1, 2, 2)))


def test_pairing_resolution():
    assert FairnessSpec(epsilon=0.0).resolved_pairing == "star"
    assert FairnessSpec(epsilon=0.1).resolved_pairing == "all-pairs"
    assert FairnessSpec(epsilon=0.1, pairing="star").resolved_pairing == "star"
    assert FairnessSpec(epsilon=0.0).group_pairs(3) == [(0, 1), (0, 2)]
    assert FairnessSpec(epsilon=0.1).group_pairs(3) == [(0, 1), (0, 2), (1, 2)]


def test_objective_coefficient_hand_value():
    # single group, z=[[.9,.2],[.1,.8]], uniform classes: the coefficient of
    # the variable "predict 0 when yhat=1" is Pr(Yhat=1|Y=1) Pr(Y=1) = .4
    em = model_from_parts([[[0.9, 0.2], [0.1, 0.8]]], [[0.5, 0.5]])
    c = objective_vector(em, ObjectiveSpec("unweighted"))
    lp_idx = AssembledLP(c=c, a_eq=np.zeros((0, 4)), b_eq=np.zeros(0),
                         a_ub=np.zeros((0, 4)), b_ub=np.zeros(0),
                         lower=np.zeros(4), upper=np.ones(4), n_classes=2, n_groups=1,
                         n_stochastic_rows=0, row_tags=())
    assert abs(c[lp_idx.var_index(0, 0, 1)] - 0.4) < 1e-15
    assert abs(c[lp_idx.var_index(0, 1, 0)] - 0.9 * 0.5) < 1e-15


def test_unweighted_objective_zero_for_perfect_identity():
    ds = from_values(list("abab"), list("abab"), list("gghh"))
    em = fit_empirical(ds, 0.0)
    c = objective_vector(em, ObjectiveSpec("unweighted"))
    x = np.stack([np.eye(2), np.eye(2)]).reshape(-1)
    assert abs(c @ x) < 1e-15


def test_weighted_objective_equals_classes_minus_traces():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g, cc = int(rng.integers(2, 4)), int(rng.integers(2, 5))
        em = random_model(rng, cc, g)
        cvec = objective_vector(em, ObjectiveSpec("weighted"))
        p = random_policy_tensor(rng, cc, g)
        w = np.einsum("aik,akj->aij", p, em.z)
        expect = sum(cc - np.trace(w[a]) for a in range(g))
        assert abs(cvec @ p.reshape(-1) - expect) < 1e-10


def test_unweighted_objective_equals_one_minus_accuracy():
    rng = np.random.default_rng(4)
    for _ in range(20):
        g, cc = int(rng.integers(2, 4)), int(rng.integers(2, 5))
        em = random_model(rng, cc, g)
        cvec = objective_vector(em, ObjectiveSpec("unweighted"))
        p = random_policy_tensor(rng, cc, g)
        w = np.einsum("aik,akj->aij", p, em.z)
        acc = np.einsum("aj,ajj->", em.p_ya, w)
        assert abs(cvec @ p.reshape(-1) - (1.0 - acc)) < 1e-10


def test_weighted_rejects_zero_joint_cell():
    z = np.stack([np.eye(3), np.eye(3)])
    p_ya = np.array([[0.2, 0.2, 0.1], [0.3, 0.2, 0.0]])   # one empty joint cell
    em = model_from_parts(z, p_ya)
    with pytest.raises(ValueError, match="weighted objective undefined"):
        objective_vector(em, ObjectiveSpec("weighted"))
    objective_vector(em, ObjectiveSpec("unweighted"))      # fine without weights


def test_custom_loss_with_unit_offdiagonal_matches_unweighted():
    rng = np.random.default_rng(9)
    em = random_model(rng, 3, 2)
    ones = np.ones((2, 3, 3))  # diagonal is zeroed internally
    c_custom = objective_vector(em, ObjectiveSpec("custom", custom_loss=ones))
    c_unw = objective_vector(em, ObjectiveSpec("unweighted"))
    assert np.allclose(c_custom, c_unw, atol=1e-15)


def test_fairness_row_counts():
    rng = np.random.default_rng(11)
    em23 = random_model(rng, 3, 2)
    assert len(fairness_rows(em23, FairnessSpec("term-by-term"))) == 9
    em33 = random_model(rng, 3, 3)
    assert len(fairness_rows(em33, FairnessSpec("classwise"))) == 12  # 2 pairs x 6
    assert len(fairness_rows(em33, FairnessSpec("opportunity"))) == 6
    assert len(fairness_rows(em33, FairnessSpec("parity"))) == 6
    assert len(fairness_rows(em33, FairnessSpec("term-by-term", epsilon=0.1))) == 27


def test_parity_rows_vanish_at_identity_iff_yhat_marginals_match():
    z = np.stack([[[0.8, 0.3], [0.2, 0.7]], [[0.6, 0.1], [0.4, 0.9]]])
    p_ya = np.array([[0.3, 0.2], [0.1, 0.4]])
    em = model_from_parts(z, p_ya)
    rows = fairness_rows(em, FairnessSpec("parity"))
    x = np.stack([np.eye(2), np.eye(2)]).reshape(-1)
    residual = max(abs(r.coeffs @ x) for r in rows)
    gap = np.abs(em.p_yhat_given_a[0] - em.p_yhat_given_a[1]).max()
    assert (residual < 1e-12) == (gap < 1e-12)
    assert abs(residual - gap) < 1e-12


def test_assemble_variable_counts():
    rng = np.random.default_rng(13)
    lp = assemble(random_model(rng, 3, 2), ObjectiveSpec(), FairnessSpec())
    assert lp.n_vars == 18
    lp = assemble(random_model(rng, 5, 2), ObjectiveSpec(), FairnessSpec())
    assert lp.n_vars == 50


def test_assemble_row_counts_with_relaxation():
    rng = np.random.default_rng(15)
    em = random_model(rng, 3, 2)
    lp = assemble(em, ObjectiveSpec(), FairnessSpec("opportunity", epsilon=0.01))
    assert len(lp.b_eq) == 6 and lp.n_stochastic_rows == 6
    assert len(lp.b_ub) == 6                       # 3 scalars x 2 directions
    lp0 = assemble(em, ObjectiveSpec(), FairnessSpec("opportunity", epsilon=0.0))
    assert len(lp0.b_eq) == 9 and len(lp0.b_ub) == 0


def test_var_index_bijection():
    rng = np.random.default_rng(17)
    lp = assemble(random_model(rng, 4, 3), ObjectiveSpec(), FairnessSpec())
    seen = set()
    for a in range(3):
        for i in range(4):
            for k in range(4):
                idx = lp.var_index(a, i, k)
                assert lp.var_unindex(idx) == (a, i, k)
                seen.add(idx)
    assert seen == set(range(lp.n_vars))


def test_uniform_policy_feasible_for_every_criterion():
    rng = np.random.default_rng(19)
    for criterion in CRITERIA:
        g, cc = int(rng.integers(2, 4)), int(rng.integers(2, 5))
        em = random_model(rng, cc, g)
        lp = assemble(em, ObjectiveSpec(), FairnessSpec(criterion, 0.0))
        x = np.full(lp.n_vars, 1.0 / cc)
        assert np.abs(lp.a_eq @ x - lp.b_eq).max() < 1e-10


def test_identity_violates_term_constraints_when_z_differs():
    z = np.stack([[[0.9, 0.1], [0.1, 0.9]], [[0.7, 0.3], [0.3, 0.7]]])
    p_ya = np.full((2, 2), 0.25)
    em = model_from_parts(z, p_ya)
    lp = assemble(em, ObjectiveSpec(), FairnessSpec("term-by-term", 0.0))
    x = np.stack([np.eye(2), np.eye(2)]).reshape(-1)
    fairness_residual = np.abs(lp.a_eq[lp.n_stochastic_rows:] @ x).max()
    assert fairness_residual > 0.1


def test_relaxation_monotone_in_epsilon():
    rng = np.random.default_rng(21)
    em = random_model(rng, 3, 2, sharpen=0.6)
    prev = np.inf
    for eps in (0.0, 0.05, 0.1, 0.2, 0.5, 1.0):
        sol = solve(assemble(em, ObjectiveSpec("weighted"), FairnessSpec("term-by-term", eps)))
        assert sol.status == "optimal"
        assert sol.objective <= prev + 1e-9
        prev = sol.objective


def test_criterion_nesting_at_exact_fairness():
    # with class mix shared across groups, a term-by-term-feasible point
    # also satisfies the classwise and opportunity rows
    rng = np.random.default_rng(23)
    p_y = np.array([0.5, 0.3, 0.2])
    z = np.stack([np.linalg.qr(rng.random((3, 3)))[0] ** 2 for _ in range(2)])
    z = z / z.sum(axis=1, keepdims=True)
    p_ya = np.stack([0.5 * p_y, 0.5 * p_y])
    em = model_from_parts(z, p_ya)
    sol = solve(assemble(em, ObjectiveSpec("weighted"), FairnessSpec("term-by-term", 0.0)))
    assert sol.status == "optimal"
    for criterion in ("classwise", "opportunity"):
        rows = fairness_rows(em, FairnessSpec(criterion, 0.0))
        resid = max(abs(r.coeffs @ sol.x) for r in rows)
        assert resid < 1e-10


def test_lp_text_dump(tmp_path):
    rng = np.random.default_rng(25)
    em = random_model(rng, 2, 2)
    lp = assemble(em, ObjectiveSpec(), FairnessSpec("parity", epsilon=0.05))
    path = tmp_path / "lp.txt"
    write_lp_text(lp, path)
    lines = path.read_text().strip().splitlines()
    n, m_eq, m_ub = map(int, lines[0].split())
    assert (n, m_eq, m_ub) == (lp.n_vars, len(lp.b_eq), len(lp.b_ub))
    assert len(lines) == 2 + m_eq + m_ub
    c = np.array([float(t) for t in lines[1].split()])
    assert np.array_equal(c, lp.c)
    first_eq = np.array([float(t) for t in lines[2].split()])
    assert np.array_equal(first_eq[:-1], lp.a_eq[0]) and first_eq[-1] == lp.b_eq[0]
