"""End-to-end acceptance checks for the simulator.

One test per numbered check below; each finishes by printing a single
PASS line with the measured numbers, so `pytest -v tests/test_acceptance.py`
reads as a checklist with one pass/fail line per item.
"""

import csv
import json

import numpy as np
import pytest

from fedsim.aggregation import Update, add_uniform_noise, plain_average, weighted_fedavg
from fedsim.cli import main
from fedsim.models import (
    ModelSpec,
    ParameterSet,
    TrainConfig,
    init_params,
    loss_and_grad,
    train_local,
)
from fedsim.orchestrator import (
    ClientSetup,
    IntermittencyEvent,
    PolicyConfig,
    SimPlan,
    init_seed,
    run,
    train_seed,
)
from fedsim.partition import (
    PartitionPlan,
    make_synthetic,
    partition,
    relabel_shard,
    skew_report,
)
from fedsim.report import write_rounds_csv
from fedsim.seeding import derive_seed, rng_from

from _oracles import fd_gradient, pairwise_auc

SPEC2 = ModelSpec("logistic-regression", input_dim=2)
GLOBAL_TEST = make_synthetic([[-2, -2], [2, 2]], 1.0, (40, 40), seed=990)


def _clients(times, n=240, seed=17):
    shards = partition(
        make_synthetic([[-2, -2], [2, 2]], 1.0, (n // 2, n - n // 2), seed=seed),
        PartitionPlan("random-uniform", len(times), seed=seed),
    )
    return tuple(ClientSetup(s.client_id, s, t) for s, t in zip(shards, times))


def _plan(times, n_rounds, epochs, seed=5, **kw):
    return SimPlan(
        model=SPEC2,
        train=TrainConfig(epochs=epochs, batch_size=16, learning_rate=0.3),
        n_rounds=n_rounds,
        clients=_clients(times),
        global_test=GLOBAL_TEST,
        seed=seed,
        **kw,
    )


def test_c01_simulated_clock_matches_closed_form():
    """Rounds x epochs x slowest client, exact in floating point."""
    t3 = (23.1, 40.1, 24.0)
    t10 = (10.1, 9.7, 6.0, 7.9, 9.0, 9.0, 8.0, 11.0, 9.8, 10.1)
    total_3 = run(_plan(t3, n_rounds=10, epochs=1)).total_sim_time_s
    total_10 = run(_plan(t10, n_rounds=10, epochs=1)).total_sim_time_s
    total_flip = run(_plan(t3, n_rounds=1, epochs=10)).total_sim_time_s
    assert abs(total_3 - 401.0) <= 1e-9
    assert abs(total_10 - 110.0) <= 1e-9
    assert abs(total_flip - 401.0) <= 1e-9
    print(f"PASS clock: 3 clients {total_3!r}s, 10 clients {total_10!r}s, "
          f"Ne=10/Nr=1 {total_flip!r}s")


def test_c02_sweep_reports_time_reduction(tmp_path):
    """Sweep CSV carries the percent saved against a single-machine baseline."""
    cfg = {
        "seed": 5,
        "rounds": 10,
        "model": {"kind": "logistic-regression", "input_dim": 2},
        "train": {"epochs": 1, "batch_size": 16, "learning_rate": 0.3},
        "centralized_epoch_time_s": 138.6,
        "data": {
            "source": {
                "type": "synthetic",
                "class_means": [[-2, -2], [2, 2]],
                "n_per_class": [120, 120],
                "seed": 9,
            },
            "global_test": {
                "type": "synthetic",
                "class_means": [[-2, -2], [2, 2]],
                "n_per_class": [30, 30],
                "seed": 10,
            },
            "partition": {"mode": "random-uniform", "seed": 11},
        },
        "clients": [
            {"id": 0, "epoch_time_s": 23.1},
            {"id": 1, "epoch_time_s": 40.1},
            {"id": 2, "epoch_time_s": 24.0},
        ],
        "sweeps": {
            "client-count": {
                "10": {
                    "clients": [
                        {"id": i, "epoch_time_s": t}
                        for i, t in enumerate(
                            [10.1, 9.7, 6.0, 7.9, 9.0, 9.0, 8.0, 11.0, 9.8, 10.1]
                        )
                    ]
                }
            }
        },
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "out"),
                 "--variable", "client-count", "--values", "3,10"]) == 0
    with (tmp_path / "out" / "sweep_client-count" / "comparison.csv").open() as fh:
        rows = {r["value"]: r for r in csv.DictReader(fh)}
    red3 = round(float(rows["3"]["time_reduction_pct"]), 2)
    red10 = round(float(rows["10"]["time_reduction_pct"]), 2)
    assert red3 == 71.07
    assert red10 == 92.06
    assert float(rows["3"]["centralized_time_s"]) == 1386.0
    print(f"PASS time reduction: 3 clients {red3}%, 10 clients {red10}% vs 1386s")


def test_c03_partition_reproduces_requested_label_skew():
    """Explicit counts plus positive fractions land within 0.1 points."""
    master = make_synthetic([np.zeros(3), np.ones(3)], 1.0, (1341, 3875), seed=20)
    shards = partition(
        master,
        PartitionPlan(
            "explicit-counts",
            3,
            counts=(1400, 2400, 1416),
            positive_fractions=(0.7143, 0.8333, 0.6179),
            seed=21,
        ),
    )
    report = skew_report(shards)
    got = [row.pct_positive for row in report.clients]
    for val, want in zip(got, (71.43, 83.33, 61.79)):
        assert abs(val - want) < 0.1
    assert abs(report.overall.pct_positive - 74.29) < 0.1
    print(f"PASS label skew: per client {[round(v, 2) for v in got]}, "
          f"overall {report.overall.pct_positive:.2f}%")


def test_c04_aggregation_property_suite():
    """200 randomized cases of the averaging algebra."""
    rng = np.random.default_rng(20240814)
    shapes_of = {}

    def pset(vals):
        d = vals.size
        if d not in shapes_of:
            shapes_of[d] = (("output_kernel", (d,)),)
        return ParameterSet(vals, shapes_of[d])

    cases = 0
    for case in range(200):
        k = 1 if case % 7 == 0 else int(rng.integers(2, 9))
        d = int(rng.integers(1, 40))
        equal_n = case % 4 == 0
        base_n = int(rng.integers(1, 5000))
        ids = sorted(int(c) for c in rng.choice(10000, size=k, replace=False))
        updates = [
            Update(
                cid,
                pset(rng.standard_normal(d) * 10.0 ** float(rng.integers(-2, 3))),
                base_n if equal_n else int(rng.integers(1, 5000)),
                0,
            )
            for cid in ids
        ]
        agg = weighted_fedavg(updates)

        ws = [w for _, w in agg.weights_used]
        assert abs(sum(ws) - 1.0) <= 1e-12
        stacked = np.stack([u.params.values for u in updates])
        assert np.all(agg.params.values >= stacked.min(axis=0))
        assert np.all(agg.params.values <= stacked.max(axis=0))
        if equal_n:
            assert np.array_equal(plain_average(updates).params.values, agg.params.values)
        if k == 1:
            assert np.array_equal(agg.params.values, updates[0].params.values)
        shuffled = [updates[i] for i in rng.permutation(k)]
        assert np.array_equal(weighted_fedavg(shuffled).params.values, agg.params.values)
        lam = float(rng.uniform(0.25, 4.0))
        scaled = [
            Update(u.client_id, u.params.with_values(lam * u.params.values), u.n, 0)
            for u in updates
        ]
        scale_tol = 1e-12 * max(1.0, float(np.abs(lam * agg.params.values).max()))
        assert np.allclose(
            weighted_fedavg(scaled).params.values, lam * agg.params.values,
            rtol=0, atol=scale_tol,
        )
        cases += 1
    assert cases == 200
    print(f"PASS aggregation algebra: {cases} randomized cases")


def test_c05_single_client_run_is_bitwise_centralized():
    """One-client federation composes to plain local training, bit for bit."""
    spec = ModelSpec("logistic-regression", input_dim=3)
    master = make_synthetic([[0, 0, 0], [2, 2, 2]], 1.0, (250, 250), seed=11)
    gtest = make_synthetic([[0, 0, 0], [2, 2, 2]], 1.0, (40, 40), seed=12)
    empty = np.zeros(0, dtype=np.int64)
    from fedsim.partition import ClientShard
    from fedsim.models import Dataset

    shard = ClientShard(0, master, Dataset(np.zeros((0, 3)), empty, empty))
    checked = []
    for n_r, n_e in [(1, 1), (5, 1), (4, 5)]:
        plan = SimPlan(
            model=spec,
            train=TrainConfig(epochs=n_e, batch_size=32, learning_rate=0.1),
            n_rounds=n_r,
            clients=(ClientSetup(0, shard, 1.0),),
            global_test=gtest,
            seed=99,
        )
        federated = run(plan).final_params
        params = init_params(spec, init_seed(99))
        for r in range(1, n_r + 1):
            cfg = TrainConfig(epochs=n_e, batch_size=32, learning_rate=0.1,
                              seed=train_seed(99, 0, r))
            params, _ = train_local(spec, params, master, cfg)
        assert np.array_equal(federated.values, params.values)
        checked.append(n_r * n_e)
    print(f"PASS centralized equivalence: bit-identical at total epochs {checked}")


def test_c06_analytic_gradients_match_finite_differences():
    """20 random instances per model kind, relative error at most 1e-5."""
    worst = 0.0
    specs = {
        "logistic-regression": [ModelSpec("logistic-regression", input_dim=d)
                                for d in (1, 2, 4, 7)],
        "mlp-1hidden": [
            ModelSpec("mlp-1hidden", input_dim=3, hidden_dim=5),
            ModelSpec("mlp-1hidden", input_dim=2, hidden_dim=3),
            ModelSpec("mlp-1hidden", input_dim=4, hidden_dim=2, activation="sigmoid"),
            ModelSpec("mlp-1hidden", input_dim=3, hidden_dim=6, activation="sigmoid"),
        ],
    }
    for kind, variants in specs.items():
        count = 0
        while count < 20:
            spec = variants[count % len(variants)]
            rng = rng_from(500 + count, spec.param_count)
            base = init_params(spec, 1000 + count)
            params = base.with_values(base.values + 0.5 * rng.standard_normal(base.size))
            X = rng.standard_normal((int(rng.integers(3, 12)), spec.input_dim))
            y = rng.integers(0, 2, size=X.shape[0])

            def loss_of(vals, spec=spec, params=params, X=X, y=y):
                return loss_and_grad(spec, params.with_values(vals), X, y)[0]

            _, grad = loss_and_grad(spec, params, X, y)
            fd = fd_gradient(loss_of, params.values, step=1e-6)
            rel = np.abs(fd - grad.values) / np.maximum(np.abs(grad.values), 1e-8)
            assert rel.max() <= 1e-5, f"{kind} instance {count}: {rel.max():.2e}"
            worst = max(worst, float(rel.max()))
            count += 1
    print(f"PASS gradients: 20 instances per kind, worst relative error {worst:.2e}")


def test_c07_trapezoid_auc_equals_pairwise_oracle():
    """At least 100 random score/label sets, ties included, within 1e-12."""
    from fedsim.metrics import roc_auc as metric_roc_auc

    rng = np.random.default_rng(424242)
    worst = 0.0
    for case in range(120):
        n = int(rng.integers(2, 80))
        if case % 3 == 0:
            scores = np.round(rng.random(n), 1)
        elif case % 3 == 1:
            scores = rng.standard_normal(n)
        else:
            scores = rng.integers(0, 5, size=n).astype(float)
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[rng.integers(0, n)] ^= 1
        _, auc = metric_roc_auc(scores, labels)
        diff = abs(auc - pairwise_auc(scores, labels))
        assert diff <= 1e-12
        worst = max(worst, diff)
    print(f"PASS AUC oracle: 120 cases, worst |trapezoid - pairwise| = {worst:.2e}")


def test_c08_federated_training_converges_over_rounds():
    """Unbalanced 3-client split of a separable problem reaches high accuracy."""
    spec = ModelSpec("logistic-regression", input_dim=4)
    mu0, mu1 = [0.0] * 4, [2.5] * 4  # centers 5 sigma apart
    master = make_synthetic([mu0, mu1], 1.0, (1880, 3120), seed=21)
    gtest = make_synthetic([mu0, mu1], 1.0, (500, 500), seed=22)
    shards = partition(
        master,
        PartitionPlan(
            "explicit-counts",
            3,
            counts=(1400, 2400, 1200),
            positive_fractions=(0.6, 0.7, 0.5),
            seed=5,
        ),
    )
    times = (23.1, 40.1, 24.0)
    plan = SimPlan(
        model=spec,
        train=TrainConfig(epochs=1, batch_size=64, learning_rate=0.5),
        n_rounds=20,
        clients=tuple(ClientSetup(s.client_id, s, t) for s, t in zip(shards, times)),
        global_test=gtest,
        seed=7,
    )
    report = run(plan)
    acc1 = report.rounds[0].global_metrics.accuracy
    acc20 = report.rounds[-1].global_metrics.accuracy
    auc20 = report.rounds[-1].global_metrics.auc
    assert acc20 >= 0.95
    assert auc20 >= 0.97
    assert acc20 > acc1
    print(f"PASS convergence: accuracy {acc1:.3f} -> {acc20:.3f}, AUC {auc20:.4f}")


def test_c09_intermittency_policies_shape_membership_and_trajectory():
    """Departure and delay policies: membership patterns and divergence."""
    times = (23.1, 40.1, 24.0)
    tiny = make_synthetic([[-2, -2], [2, 2]], 1.0, (8, 8), seed=303)
    joiner = relabel_shard(
        partition(tiny, PartitionPlan("random-uniform", 1, seed=303))[0], 9
    )
    leave_join = (IntermittencyEvent.leave(5, 1), IntermittencyEvent.join(5, 9, joiner, 3.0))

    # (a) drop-history: the departed client never reappears
    rep = run(_plan(times, 10, 1, events=leave_join,
                    policy=PolicyConfig(departure="drop-history")))
    for rec in rep.rounds[5:]:
        assert 1 not in [p.client_id for p in rec.participants]

    # (b) retain-last: departed client is stale in every later round
    rep = run(_plan(times, 10, 1, events=leave_join,
                    policy=PolicyConfig(departure="retain-last")))
    for rec in rep.rounds[5:]:
        by_id = {p.client_id: p for p in rec.participants}
        assert not by_id[1].fresh
        assert by_id[1].age == rec.round_index - 5

    # (c) stale-serving delay: old update rounds 5..9, late one lands at 10
    delay = (IntermittencyEvent.delay(5, 1, 10),)
    rep_a = run(_plan(times, 10, 1, events=delay,
                      policy=PolicyConfig(delay="use-stale-accept-any")))
    for rec in rep_a.rounds[4:9]:
        by_id = {p.client_id: p for p in rec.participants}
        assert not by_id[1].fresh
    last = {p.client_id: p for p in rep_a.rounds[9].participants}
    assert not last[1].fresh and last[1].age == 5
    assert any("late-delivery client=1 accepted" in line for line in rep_a.audit_log)

    # (d) strict delay: excluded throughout, late submission discarded
    rep_b = run(_plan(times, 10, 1, events=delay,
                      policy=PolicyConfig(delay="exclude-until-current")))
    for rec in rep_b.rounds[4:9]:
        assert 1 not in [p.client_id for p in rec.participants]
    assert any("late-delivery client=1 discarded" in line for line in rep_b.audit_log)
    last = {p.client_id: p for p in rep_b.rounds[9].participants}
    assert last[1].fresh

    # (e) the two delay policies produce different loss trajectories
    diffs = [abs(ra.global_metrics.loss - rb.global_metrics.loss)
             for ra, rb in zip(rep_a.rounds, rep_b.rounds)]
    assert max(diffs) > 1e-9
    print(f"PASS policies: membership patterns hold, max trajectory gap {max(diffs):.2e}")


def test_c10_policies_are_inert_without_events(tmp_path):
    """All four policy combinations give byte-identical round tables."""
    outputs = []
    for dep in ("drop-history", "retain-last"):
        for delay in ("use-stale-accept-any", "exclude-until-current"):
            rep = run(_plan((23.1, 40.1, 24.0), 5, 1,
                            policy=PolicyConfig(departure=dep, delay=delay)))
            path = tmp_path / f"{dep}_{delay}.csv"
            write_rounds_csv(rep.rounds, path)
            outputs.append(path.read_bytes())
    assert all(blob == outputs[0] for blob in outputs[1:])
    print("PASS policy neutrality: 4/4 byte-identical rounds.csv without events")


def test_c11_uniform_noise_averages_away():
    """Mean of 10^4 noised copies returns the clean vector within 0.05."""
    base_vals = rng_from(123).standard_normal(50)
    base = ParameterSet(base_vals, (("output_kernel", (50,)),))
    updates = [
        Update(i, add_uniform_noise(base, 1.0, derive_seed(55, i)), 1, 0)
        for i in range(10_000)
    ]
    agg = plain_average(updates)
    err = float(np.max(np.abs(agg.params.values - base.values)))
    assert err <= 0.05
    print(f"PASS noise averaging: max coordinate error {err:.4f} over 10000 copies")
