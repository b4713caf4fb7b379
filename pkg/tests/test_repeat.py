import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spendseq import repeat, synth
from spendseq.errors import ConvergenceError, DataError
from spendseq.ingest import DaySequence
from spendseq.repeat import RepeatModel, RepurchaseInstance

HALVING = 0.5 ** np.arange(8)


@st.composite
def instances(draw):
    day = draw(st.integers(2, 400))
    n_apps = draw(st.integers(1, 5))
    cands = {}
    for k in range(n_apps):
        days = draw(st.lists(st.integers(0, day - 1), min_size=1, max_size=70, unique=True))
        cands[f"a{k}"] = sorted(days)
    target = draw(st.sampled_from(sorted(cands)))
    return RepurchaseInstance(cands, target, day)


tables = st.lists(st.floats(1e-3, 1e3), min_size=8, max_size=8).map(np.array)


def test_buckets():
    assert repeat.freq_bucket([1, 2, 4, 5, 9, 10, 19, 20, 49, 50, 500]).tolist() == [0, 1, 3, 4, 4, 5, 5, 6, 6, 7, 7]
    assert repeat.gap_bucket([1, 2, 3, 4, 5, 8, 9, 16, 17, 32, 33, 64, 65, 900]).tolist() == [
        0, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7
    ]


def test_instance_validation():
    with pytest.raises(ValueError):
        RepurchaseInstance({}, None, 3)
    with pytest.raises(ValueError):
        RepurchaseInstance({"a": [1]}, "b", 3)
    with pytest.raises(ValueError):
        RepurchaseInstance({"a": [1, 3]}, "a", 3)


def test_uniform_tables_give_count_share():
    inst = RepurchaseInstance({"A": [1, 4, 6], "B": [2]}, "A", 10)
    assert repeat.score_candidates(RepeatModel(), inst) == {"A": 0.75, "B": 0.25}


def test_recency_limit():
    t = np.r_[1.0, np.full(7, 1e-12)]
    inst = RepurchaseInstance({"A": [1, 2, 3, 4], "B": [9]}, "B", 10)
    p = repeat.score_candidates(RepeatModel(np.ones(8), t), inst)
    assert p["B"] > 1 - 1e-9


def test_hand_evaluated_probability():
    s = np.arange(1.0, 9.0)
    inst = RepurchaseInstance({"A": [1, 5], "B": [8]}, "A", 10)
    p = repeat.score_candidates(RepeatModel(s, HALVING), inst)
    # A: day 1 (1st buy, gap 9) and day 5 (2nd buy, gap 5); B: day 8 (1st buy, gap 2)
    a = 1 * 0.5**4 + 2 * 0.5**3
    b = 1 * 0.5**1
    assert abs(p["A"] - a / (a + b)) < 1e-12 and abs(p["B"] - b / (a + b)) < 1e-12


def test_degenerate_model():
    inst = RepurchaseInstance({"A": [1]}, "A", 5)
    with pytest.raises(DataError):
        repeat.score_candidates(RepeatModel(np.ones(8), np.zeros(8)), inst)


@given(instances(), tables, tables)
def test_probabilities_sum_to_one(inst, s, t):
    p = repeat.score_candidates(RepeatModel(s, t), inst)
    assert abs(sum(p.values()) - 1) < 1e-12
    assert all(0 <= v <= 1 for v in p.values())


@given(instances(), tables, tables, st.floats(1e-4, 1e4), st.floats(1e-4, 1e4))
def test_gauge_invariance(inst, s, t, cs, ct):
    p = repeat.score_candidates(RepeatModel(s, t), inst)
    q = repeat.score_candidates(RepeatModel(cs * s, ct * t), inst)
    assert all(abs(p[a] - q[a]) < 1e-12 for a in p)


@given(instances())
def test_flat_tables_equal_most_frequent(inst):
    counts = sorted((len(d) for d in inst.candidates.values()), reverse=True)
    if len(counts) > 1 and counts[0] == counts[1]:
        return
    assert repeat.predict_repeat(RepeatModel(), inst) == repeat.baseline_most_frequent(inst)


def test_predict_single_and_tie():
    assert repeat.predict_repeat(RepeatModel(), RepurchaseInstance({"z": [1]}, None, 4)) == "z"
    assert repeat.predict_repeat(RepeatModel(), RepurchaseInstance({"b": [2], "a": [2]}, None, 4)) == "a"


def test_baselines():
    inst = RepurchaseInstance({"A": [1, 9], "B": [8]}, "A", 10)
    assert repeat.baseline_most_recent(inst) == "A" and repeat.baseline_most_frequent(inst) == "A"
    inst = RepurchaseInstance({"A": [1, 2], "B": [5]}, "A", 10)
    assert repeat.baseline_most_recent(inst) == "B" and repeat.baseline_most_frequent(inst) == "A"
    inst = RepurchaseInstance({"B": [1, 3], "A": [2, 4]}, "A", 10)
    assert repeat.baseline_most_frequent(inst) == "A"


def test_evaluate_hand_built():
    insts = [
        RepurchaseInstance({"A": [1, 2], "B": [5]}, "A", 10),  # model A, recent B, frequent A
        RepurchaseInstance({"A": [1, 2], "B": [5]}, "B", 10),
        RepurchaseInstance({"A": [1], "B": [3]}, "B", 10),  # model tie -> A, recent B, frequent A
        RepurchaseInstance({"C": [7]}, "C", 10),
    ]
    m = repeat.evaluate_repeat(RepeatModel(), insts)
    assert m == (2 / 4, 3 / 4, 2 / 4, 4)


def test_perfect_recency():
    rng = np.random.default_rng(0)
    insts = []
    for _ in range(50):
        days = rng.choice(50, 4, replace=False).tolist()
        cands = {f"a{i}": [d] for i, d in enumerate(days)}
        insts.append(RepurchaseInstance(cands, f"a{int(np.argmax(days))}", 60))
    assert repeat.evaluate_repeat(RepeatModel(), insts).recent_acc == 1.0


def test_evaluate_empty():
    with pytest.raises(DataError):
        repeat.evaluate_repeat(RepeatModel(), [])


# ----------------------------------------------------------------- training

def test_single_candidate_training():
    m = repeat.train_repeat([RepurchaseInstance({"a": [1, 2]}, "a", 5)])
    assert m.trajectory[-1] == 0.0
    assert np.all(m.s_weights == 1) and np.all(m.t_weights == 1)


def test_compiled_matches_direct_likelihood():
    insts = synth.generate_repeat_instances(300, np.linspace(1, 3, 8), HALVING, seed=1)
    data = repeat.compile_instances(insts)
    s, t = np.linspace(1, 2, 8), np.linspace(1, 0.3, 8)
    direct = -sum(np.log(repeat.score_candidates(RepeatModel(s, t), i)[i.target]) for i in insts)
    assert repeat.negative_log_likelihood(data, s, t) == pytest.approx(direct, rel=1e-12)


@given(st.integers(0, 1000))
def test_block_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    insts = synth.generate_repeat_instances(40, np.ones(8), np.ones(8), seed=seed)
    data = repeat.compile_instances(insts)
    u, v = rng.normal(0, 0.5, 8), rng.normal(0, 0.5, 8)
    gu, gv = repeat.nll_gradients(data, np.exp(u), np.exp(v))
    h = 1e-5
    f = lambda a, b: repeat.negative_log_likelihood(data, np.exp(a), np.exp(b))  # noqa: E731
    fu = np.array([(f(u + h * e, v) - f(u - h * e, v)) / (2 * h) for e in np.eye(8)])
    fv = np.array([(f(u, v + h * e) - f(u, v - h * e)) / (2 * h) for e in np.eye(8)])
    assert np.allclose(gu, fu, rtol=1e-4, atol=1e-7)
    assert np.allclose(gv, fv, rtol=1e-4, atol=1e-7)


def test_training_trajectory_and_gauge():
    insts = synth.generate_repeat_instances(5000, np.linspace(1, 4, 8), HALVING, seed=2)
    m = repeat.train_repeat(insts)
    traj = np.array(m.trajectory)
    assert np.all(np.diff(traj) <= 0)
    assert m.s_weights[0] == 1.0 and m.t_weights[0] == 1.0
    assert np.all(np.diff(m.t_weights) < 0)


def test_convergence_error_carries_trajectory():
    insts = synth.generate_repeat_instances(2000, np.linspace(1, 4, 8), HALVING, seed=3)
    with pytest.raises(ConvergenceError) as err:
        repeat.train_repeat(insts, max_outer=1, outer_tol=0.0)
    traj = err.value.trajectory
    assert len(traj) == 3 and traj[0] >= traj[1] >= traj[2]
    assert isinstance(err.value.last, RepeatModel)


def test_empty_training():
    with pytest.raises(DataError):
        repeat.train_repeat([])


def test_model_text_round_trip(tmp_path):
    m = RepeatModel(np.linspace(1, 3, 8), HALVING)
    path = tmp_path / "r.txt"
    m.save(path)
    m2 = RepeatModel.load(path)
    assert np.array_equal(m2.s_weights, m.s_weights) and np.array_equal(m2.t_weights, m.t_weights)
    assert m2.freq_edges == repeat.FREQ_EDGES and m2.gap_edges == repeat.GAP_EDGES


def test_build_instances():
    seq = DaySequence("u", [("a", 1, 1), ("b", 2, 1), ("a", 4, 1), ("b", 4, 1), ("c", 6, 1), ("a", 9, 1)])
    insts = repeat.build_repurchase_instances({"u": seq})
    assert [(i.target, i.day) for i in insts] == [("a", 4), ("b", 4), ("a", 9)]
    assert insts[2].candidates == {"a": [1, 4], "b": [2, 4], "c": [6]}
    late = repeat.build_repurchase_instances({"u": seq}, (5, 100))
    assert [(i.target, i.day) for i in late] == [("a", 9)]
