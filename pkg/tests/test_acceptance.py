"""Acceptance suite: one test per release criterion, each printing a
PASS line with its runtime.  Tolerances are pinned; run with ``-s`` (or
rely on pytest's captured output on failure) to see the lines.
"""

import time

import numpy as np
import pytest

from tomuq.calibrate import ExceedancePool, exceedance_probability
from tomuq.forecast import (
    bag_of_thoughts,
    classification_metrics,
    classify_belief,
    direct_forecast,
    estimate_funq_two_step,
)
from tomuq.gateway import SyntheticCompletionBackend, TruthRow, parse_certainty
from tomuq.gateway.backends import FeatureVector
from tomuq.gateway.prompts import PromptBundle, PromptTask, build_prompt
from tomuq.harness.cli import main
from tomuq.harness.config import ExperimentConfig, Method, Task
from tomuq.harness.runner import rescore_run, run_experiment
from tomuq.harness.synth import synth_world
from tomuq.metrics import expected_brier, mae_percent, oos_r_squared, pearson, spearman
from tomuq.regress import (
    RandomForestRegressor,
    ReluNetHead,
    apply_platt_scaling,
    fit_head,
    fit_linear_scaling,
    mse_decomposition,
    tree_depth,
)
from tomuq.regress.scaling import ScalingParams


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def _report(number, label, timer, limit=None):
    line = f"ACCEPTANCE {number:>2} PASS: {label} ({timer.elapsed:.2f}s)"
    print(line)
    if limit is not None:
        assert timer.elapsed < limit, f"criterion {number} exceeded {limit}s"


def test_criterion_01_expected_brier_identity_and_monte_carlo():
    with _Timer() as timer:
        grid = np.round(np.arange(0.0, 1.0001, 0.01), 2)
        for forecast in grid:
            for p in grid:
                d = expected_brier(float(forecast), float(p))
                assert abs(d.expected_bs - (d.aleatoric + d.epistemic)) <= 1e-12

        rng = np.random.default_rng(100)
        for forecast, p in [(0.9, 0.6), (0.2, 0.7), (0.5, 0.05)]:
            outcomes = (rng.uniform(0, 1, 100_000) < p).astype(float)
            scores = (forecast - outcomes) ** 2
            expected = expected_brier(forecast, p).expected_bs
            stderr = scores.std(ddof=1) / np.sqrt(scores.size)
            assert abs(scores.mean() - expected) <= 3 * stderr
    _report(1, "expected score identity on 0.01 grid + Monte Carlo", timer, limit=5.0)


def test_criterion_02_mse_decomposition_identity():
    with _Timer() as timer:
        rng = np.random.default_rng(101)
        for _ in range(1000):
            estimates = rng.uniform(0, 1, int(rng.integers(1, 50))).tolist()
            target = float(rng.uniform(0, 1))
            d = mse_decomposition(estimates, target)
            assert abs(d["mse"] - (d["variance"] + d["bias_sq"])) <= 1e-12
    _report(2, "mse = variance + bias^2 on 1000 random instances", timer, limit=1.0)


def test_criterion_03_bag_of_thoughts_variance_reduction():
    with _Timer() as timer:
        truth = {"d1": TruthRow(ground_truth=0.55, forecast=0.55, false_uncertainty=0.0)}
        prompt = PromptBundle(
            system_text="s", user_text="u", task=PromptTask.TWO_TUQ,
            dialogue_id="d1", include_demographics=False,
        )
        singles, bagged = [], []
        for seed in range(200):
            backend = SyntheticCompletionBackend(truth, sigma=0.1, seed=seed)
            singles.append(direct_forecast(prompt, backend).value)
            bagged.append(bag_of_thoughts(prompt, backend, n_samples=10).value)
        ratio = np.var(bagged) / np.var(singles)
        assert ratio <= 0.25, f"variance ratio {ratio:.3f} above 0.25"
    _report(3, f"10-sample bagging variance ratio {ratio:.3f} <= 0.25", timer, limit=30.0)


def test_criterion_04_calibration_properties():
    with _Timer() as timer:
        rng = np.random.default_rng(102)
        for _ in range(1000):
            size = int(rng.integers(1, 40))
            values = rng.integers(1, 12, size=size).astype(float)
            pool = ExceedancePool(question_key="q", values=tuple(values))

            probes = np.sort(rng.uniform(0, 13, size=6))
            probs = [exceedance_probability(float(v), pool) for v in probes]
            assert all(a <= b for a, b in zip(probs, probs[1:])), "not monotone"

            member = float(values[int(rng.integers(0, size))])
            inside = exceedance_probability(member, pool)
            assert 0.0 < inside < 1.0, "pool member not strictly inside (0,1)"

            shifted = ExceedancePool(
                question_key="q", values=tuple(np.exp(0.3 * values))
            )
            transformed = exceedance_probability(float(np.exp(0.3 * member)), shifted)
            assert transformed == pytest.approx(inside, abs=1e-12), "not rank-invariant"
    _report(4, "exceedance monotone, interior, and rank-invariant on 1000 pools", timer, limit=5.0)


def test_criterion_05_scaling_correctness():
    with _Timer() as timer:
        params = fit_linear_scaling([(0.2, 0.4), (0.4, 0.8)])
        assert abs(params.slope - 2.0) <= 1e-9 and abs(params.intercept) <= 1e-9

        rng = np.random.default_rng(103)
        for _ in range(100):
            x1, x2 = rng.uniform(0, 1, 2)
            if abs(x1 - x2) < 1e-3:
                continue
            y1, y2 = rng.uniform(0, 1, 2)
            fitted = fit_linear_scaling([(x1, y1), (x2, y2)])
            slope = (y2 - y1) / (x2 - x1)  # two-point line, solved directly
            intercept = y1 - slope * x1
            assert abs(fitted.slope - slope) <= 1e-9
            assert abs(fitted.intercept - intercept) <= 1e-9

        for _ in range(100):
            xs = rng.uniform(0, 1, 25)
            ys = 0.7 * xs + rng.normal(0, 0.1, 25)
            fitted = fit_linear_scaling(list(zip(xs, ys)))
            best = np.mean((fitted.slope * xs + fitted.intercept - ys) ** 2)
            candidates = rng.uniform(-4, 4, (100, 2))
            for slope, intercept in candidates:
                assert best <= np.mean((slope * xs + intercept - ys) ** 2) + 1e-12

        identity = ScalingParams(slope=1.0, intercept=0.0, kind="platt", epsilon=1e-3)
        for x in np.linspace(0, 1, 201):
            clamped = min(max(float(x), 1e-3), 1 - 1e-3)
            assert abs(apply_platt_scaling(identity, float(x)) - clamped) <= 1e-12
    _report(5, "least-squares scaling exact, optimal, and identity-stable", timer, limit=5.0)


def test_criterion_06_head_correctness():
    with _Timer() as timer:
        rng = np.random.default_rng(104)
        for trial in range(50):
            net = ReluNetHead(4, hidden_width=3, seed=trial)
            X = rng.standard_normal((5, 4))
            y = rng.standard_normal(5)
            _, grads = net.loss_and_gradients(X, y)
            h = 1e-5
            for name, arr in net.params.items():
                flat = arr.ravel()
                for i in range(flat.size):
                    original = flat[i]
                    flat[i] = original + h
                    loss_plus, _ = net.loss_and_gradients(X, y)
                    flat[i] = original - h
                    loss_minus, _ = net.loss_and_gradients(X, y)
                    flat[i] = original
                    numeric = (loss_plus - loss_minus) / (2 * h)
                    analytic = grads[name].ravel()[i]
                    scale = max(abs(numeric), abs(analytic), 1e-8)
                    assert abs(numeric - analytic) / scale <= 1e-4, f"grad {name}[{i}]"

        X = rng.uniform(0, 1, (120, 8))
        y = 1.5 * X[:, 2] + rng.normal(0, 0.05, 120)
        forest_a = RandomForestRegressor(n_trees=100, max_depth=5, seed=7).fit(X, y)
        forest_b = RandomForestRegressor(n_trees=100, max_depth=5, seed=7).fit(X, y)
        assert len(forest_a.trees) == 100
        assert all(tree_depth(t) <= 5 for t in forest_a.trees)
        probe = rng.uniform(0, 1, (30, 8))
        assert np.array_equal(forest_a.predict(probe), forest_b.predict(probe))

        Xp = rng.standard_normal((100, 8))
        yp = Xp[:, 0]
        feats = [FeatureVector(values=row, dim=8, backend_id="t") for row in Xp]
        head = fit_head(feats, yp.tolist(), "linear", seed=3)
        mse = float(np.mean((head.predict_batch(Xp) - yp) ** 2))
        assert mse <= 1e-4, f"planted-signal training MSE {mse:.2e}"
    _report(6, "gradients, forest structure, and planted-signal fit", timer, limit=60.0)


def _brute_pearson(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    return cov / (vx**0.5 * vy**0.5)


def _brute_ranks(values):
    return [
        sum(1 for u in values if u < v) + (sum(1 for u in values if u == v) + 1) / 2
        for v in values
    ]


def test_criterion_07_metric_oracles():
    with _Timer() as timer:
        rng = np.random.default_rng(105)
        for _ in range(500):
            n = int(rng.integers(4, 30))
            xs = rng.uniform(0, 1, n).tolist()
            ys = rng.uniform(0, 1, n).tolist()
            train_mean = float(rng.uniform(0.2, 0.8))
            assert pearson(xs, ys) == pytest.approx(_brute_pearson(xs, ys), abs=1e-10)
            assert spearman(xs, ys) == pytest.approx(
                _brute_pearson(_brute_ranks(xs), _brute_ranks(ys)), abs=1e-10
            )
            assert mae_percent(xs, ys) == pytest.approx(
                100 * sum(abs(a - b) for a, b in zip(xs, ys)) / n, abs=1e-10
            )
            ss_res = sum((y - x) ** 2 for x, y in zip(xs, ys))
            ss_tot = sum((y - train_mean) ** 2 for y in ys)
            assert oos_r_squared(ys, xs, train_mean) == pytest.approx(
                1 - ss_res / ss_tot, abs=1e-10
            )

        targets = [0.1, 0.8, 0.4, 0.6]
        assert oos_r_squared(targets, [0.5] * 4, 0.5) == 0.0
        assert mae_percent([0.2], [0.4]) == pytest.approx(20.0)
    _report(7, "metrics match brute-force references on 500 instances", timer, limit=30.0)


GOLDEN_CONFIG = """
[experiment]
task = 1tuq
method = df_ls
question_key = likes_partner
seeds = 1,2,3,4,5
train_n = 100

[backend]
kind = synthetic
world_seed = 11
n_dialogues = 400
sigma = 0.1

[gateway]
max_workers = 4
cache_dir = {cache_dir}
"""


def test_criterion_08_synthetic_golden_run(tmp_path):
    with _Timer() as timer:
        config_path = tmp_path / "golden.ini"
        config_path.write_text(GOLDEN_CONFIG.format(cache_dir=tmp_path / "cache"))
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["run", "--config", str(config_path), "--out", str(out_a)]) == 0
        assert main(["run", "--config", str(config_path), "--out", str(out_b)]) == 0

        (run_a,) = sorted(out_a.glob("run-*"))
        (run_b,) = sorted(out_b.glob("run-*"))
        assert run_a.name == run_b.name
        for name in ("config.json", "splits.json", "estimates.jsonl", "report.csv", "report.txt"):
            assert (run_a / name).read_bytes() == (run_b / name).read_bytes(), name

        report = rescore_run(run_a)
        assert report.r_squared >= 0.5, f"pooled explained variance {report.r_squared:.3f}"
        assert report.n_test == 5 * 300
    _report(
        8,
        f"golden run reproducible, pooled R^2 {report.r_squared:.3f} >= 0.5",
        timer,
        limit=120.0,
    )


def test_criterion_09_false_uncertainty_composition():
    with _Timer() as timer:
        world = synth_world(seed=31, n_dialogues=40, sigma=0.1)
        backend = world.completion_backend()
        for record in world.records:
            forecast_prompt = build_prompt(PromptTask.TWO_TUQ, record, "likes_partner")
            world_prompt = build_prompt(PromptTask.FUNQ_WORLD_SIDE, record, "likes_partner")
            forecast_est = bag_of_thoughts(forecast_prompt, backend, n_samples=5)
            world_est = bag_of_thoughts(world_prompt, backend, n_samples=5)
            composed = estimate_funq_two_step(forecast_est, world_est)
            truth = world.truths[record.id]
            lhs = abs(composed.value - truth.false_uncertainty)
            rhs = abs(forecast_est.value - truth.forecast) + abs(
                world_est.value - truth.ground_truth
            )
            assert lhs <= rhs + 1e-12, record.id

        base = dict(
            task=Task.FUNQ,
            question_key="likes_partner",
            backend={
                "kind": "synthetic", "world_seed": 21, "n_dialogues": 160,
                "sigma": 0.1, "fun_std": 0.35, "embedding_dim": 24,
                "embedding_mode": "joint_only", "signal_sigma": 0.02,
            },
            seeds=(1, 2, 3, 4, 5),
            train_n=100,
            max_workers=4,
        )
        joint = run_experiment(ExperimentConfig(method=Method.FT_RF_J, **base))
        two_step = run_experiment(ExperimentConfig(method=Method.FT_RF, **base))
        assert joint.report.r_squared > two_step.report.r_squared, (
            f"joint {joint.report.r_squared:.3f} vs two-step "
            f"{two_step.report.r_squared:.3f}"
        )
    _report(
        9,
        "two-step error bound holds; joint forest beats two-step "
        f"({joint.report.r_squared:.2f} vs {two_step.report.r_squared:.2f})",
        timer,
        limit=120.0,
    )


PARSER_FIXTURES = [
    ("Step by step: the 2 speakers traded 3 times. CERTAINTY = 7", 0.7),
    ("They agreed on 4 of 5 issues, so confidence is high. CERTAINTY = 9", 0.9),
    ("On a scale from 1 to 10 I would say CERTAINTY = 6", 0.6),
    ("Given 12 turns of small talk, CERTAINTY: 5", 0.5),
    ("Some hesitation in turn 7. certainty = 4", 0.4),
    ("CERTAINTY=8 after weighing the 50/50 odds mentioned.", 0.8),
    ("First guess was CERTAINTY = 3, revising up. CERTAINTY = 6", 0.6),
    ("The user books 2 rooms for 3 nights. CERTAINTY 8", 0.8),
    ("Certainty: 10. No doubts remain.", 1.0),
    ("I estimate 70% which maps to CERTAINTY = 7", 0.7),
    ("Speaker B laughed 4 times; warm tone. CERTAINTY = 9.", 0.9),
    ("Prices rose from 20 to 35; still satisfied. CERTAINTY = 8", 0.8),
    ("Counting 6 positive and 2 negative cues: CERTAINTY = 7", 0.7),
    ("They spent 15 minutes on logistics. CERTAINTY: 4", 0.4),
    ("A 1-in-3 chance of a better deal. CERTAINTY = 3", 0.3),
    ("certainty   =   2  (hedging throughout)", 0.2),
    ("Final answer. CERTAINTY = 1", 0.1),
    ("My CERTAINTY = 5 given the 10-point scale.", 0.5),
    ("Two speakers, 3 topics, 1 argument. CERTAINTY = 4", 0.4),
    ("Rating within [1, 10]: CERTAINTY = 6", 0.6),
    ("CERTAINTY = 2. The 8 pauses suggest doubt.", 0.2),
    ("Roughly 9 of 10 signals positive. CERTAINTY = 9", 0.9),
    ("After step 3 of my reasoning, CERTAINTY = 8", 0.8),
    ("The assistant offered 4 hotels. CERTAINTY: 7", 0.7),
    ("Both sides scored 5 points. CERTAINTY = 5", 0.5),
    ("Turn 11 was decisive. CERTAINTY = 10", 1.0),
    ("Despite the 2-minute silence, CERTAINTY = 6", 0.6),
    ("I considered values 3, 4, and 5; settling: CERTAINTY = 4", 0.4),
    ("90 percent satisfaction implies CERTAINTY = 9", 0.9),
    ("CERTAINTY = 3 despite 7 friendly exchanges.", 0.3),
    ("One last look at turn 6... CERTAINTY = 7", 0.7),
    ("Uncertain start, strong finish. CERTAINTY: 8", 0.8),
    ("The 5-point Likert maps weakly here. CERTAINTY = 5", 0.5),
    ("Too many unknowns in 4 areas. CERTAINTY = 2", 0.2),
    ("All 10 cues align. certainty: 10", 1.0),
    ("Hmm, 6 or 7? I will commit. CERTAINTY = 7", 0.7),
    ("Brief call, only 2 turns. CERTAINTY = 3", 0.3),
    ("The negotiation closed in 9 turns. CERTAINTY = 6", 0.6),
    ("Scale check: 1 low, 10 high. CERTAINTY = 8", 0.8),
    ("Weighing 3 hypotheses, the best gets CERTAINTY = 5", 0.5),
]


def test_criterion_10_parser_suite():
    with _Timer() as timer:
        assert len(PARSER_FIXTURES) == 40
        successes = 0
        for text, expected in PARSER_FIXTURES:
            try:
                if parse_certainty(text) == expected:
                    successes += 1
            except Exception:
                pass
        rate = successes / len(PARSER_FIXTURES)
        assert rate >= 0.95, f"parse success rate {rate:.2%}"

        for k in range(1, 11):
            assert parse_certainty(f"CERTAINTY = {k}") == k / 10
    _report(10, f"parser success {rate:.0%} on fixtures; round-trip exact", timer, limit=5.0)


def test_criterion_11_belief_classification_wiring():
    with _Timer() as timer:
        # three confusion fixtures with hand-computed accuracy and F1
        fixtures = [
            # (tp, fp, fn, tn) = (3, 1, 2, 4): acc 7/10, f1 2/3
            ([1, 1, 1, 1, 0, 0, 0, 0, 0, 0],
             [1, 1, 1, 0, 1, 1, 0, 0, 0, 0],
             0.7, 2 / 3),
            # perfect: acc 1, f1 1
            ([1, 0, 1, 0], [1, 0, 1, 0], 1.0, 1.0),
            # (tp, fp, fn, tn) = (1, 2, 1, 0): acc 1/4, f1 2/5
            ([1, 1, 1, 0], [1, 0, 0, 1], 0.25, 0.4),
        ]
        for preds, labels, want_acc, want_f1 in fixtures:
            result = classification_metrics(preds, labels)
            assert result["accuracy"] == pytest.approx(want_acc, abs=1e-15)
            assert result["f1"] == pytest.approx(want_f1, abs=1e-15)

        # classification route: grid forecasts through the >5 rule
        forecasts = [0.2, 0.5, 0.6, 0.9, 0.3, 0.8]
        predictions = [classify_belief(f) for f in forecasts]
        assert predictions == [0, 0, 1, 1, 0, 1]
        labels = [0, 1, 1, 1, 0, 0]
        result = classification_metrics(predictions, labels)
        assert result["accuracy"] == pytest.approx(4 / 6)
        assert result["f1"] == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))
    _report(11, "belief classification metrics match hand computation", timer, limit=5.0)
