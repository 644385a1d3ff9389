import numpy as np
import pytest

from bmaster.model import (ConstraintMask, Hyperparameters, LatentState, RegressionData,
                           joint_log_density)

# acceptance outcomes, printed once at the end of the session
ACCEPTANCE = {}


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


def random_instance(N=8, P=6, Q=5, seed=0, mask_density=0.7, hp=None):
    """Random data, partial mask and a valid parameter point."""
    g = np.random.default_rng(seed)
    X = g.standard_normal((N, P))
    Y = g.standard_normal((N, Q))
    C = g.random((P, Q)) < mask_density
    C[0] = True
    C[-1] = False
    mask = ConstraintMask(C)
    B = g.standard_normal((P, Q))
    state = LatentState(
        delta1=np.where(C, g.gamma(2.0, 1.0, (P, Q)), np.nan),
        delta2=np.where(mask.active_rows, g.gamma(2.0, 1.0, P), np.nan),
        sigma2=g.gamma(3.0, 0.5, Q),
        lambda1_sq=float(g.gamma(2.0, 1.0)),
        lambda2_sq=float(g.gamma(2.0, 1.0)),
    )
    hp = hp or Hyperparameters(1.5, 0.7, 2.0, 1.3, 2.5, 1.1)
    return RegressionData(X, Y), mask, B, state, hp


@pytest.fixture
def instance():
    return random_instance()


def conditional_joint_gaps(data, mask, B, state, hp, seed=1):
    """Worst relative mismatch, per block, between differences of the joint
    log density and differences of the log full conditional.

    For each block and index a second value is drawn; proportionality means
    log p(v', rest) - log p(v, rest) equals log f(v') - log f(v).
    """
    from bmaster import sampler as s

    g = np.random.default_rng(seed)
    joint = lambda B_, st: joint_log_density(data, mask, B_, st, hp)
    base = joint(B, state)
    gaps = {}

    def gap(d_joint, d_cond):
        return abs(d_joint - d_cond) / max(1.0, abs(d_joint))

    worst = 0.0
    for q in range(data.Q):
        b2 = B.copy()
        b2[:, q] = g.standard_normal(data.P)
        d_cond = (s.log_conditional_beta(q, b2[:, q], data, mask, state)
                  - s.log_conditional_beta(q, B[:, q], data, mask, state))
        worst = max(worst, gap(joint(b2, state) - base, d_cond))
    gaps["beta"] = worst

    worst = 0.0
    for p, q in zip(*np.nonzero(mask.C)):
        st = state.copy()
        st.delta1[p, q] = g.gamma(2.0, 1.0)
        d_cond = (s.log_conditional_delta1(p, q, st.delta1[p, q], state, B)
                  - s.log_conditional_delta1(p, q, state.delta1[p, q], state, B))
        worst = max(worst, gap(joint(B, st) - base, d_cond))
    gaps["delta1"] = worst

    worst = 0.0
    for p in np.flatnonzero(mask.active_rows):
        st = state.copy()
        st.delta2[p] = g.gamma(2.0, 1.0)
        d_cond = (s.log_conditional_delta2(p, st.delta2[p], state, B, mask)
                  - s.log_conditional_delta2(p, state.delta2[p], state, B, mask))
        worst = max(worst, gap(joint(B, st) - base, d_cond))
    gaps["delta2"] = worst

    worst = 0.0
    for q in range(data.Q):
        st = state.copy()
        st.sigma2[q] = g.gamma(3.0, 0.5)
        d_cond = (s.log_conditional_sigma2(q, st.sigma2[q], data, mask, state, B, hp)
                  - s.log_conditional_sigma2(q, state.sigma2[q], data, mask, state, B, hp))
        worst = max(worst, gap(joint(B, st) - base, d_cond))
    gaps["sigma2"] = worst

    st = state.copy()
    st.lambda1_sq, st.lambda2_sq = g.gamma(2.0, 1.0, 2)
    d_cond = (s.log_conditional_lambdas(st.lambda1_sq, st.lambda2_sq, state, mask, hp)
              - s.log_conditional_lambdas(state.lambda1_sq, state.lambda2_sq, state, mask, hp))
    gaps["lambda"] = gap(joint(B, st) - base, d_cond)
    return gaps
