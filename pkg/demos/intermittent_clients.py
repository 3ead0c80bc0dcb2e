"""Clients that leave, join, or deliver updates late.

Two scenarios, each run under the policies that govern it:

* departure at round 5 plus a tiny new client joining the same round,
  handled by either dropping the leaver's history or retaining its last
  update as a stale participant;
* a delayed client that misses rounds 5..9 and delivers at round 10,
  handled by either re-serving its old update (and accepting the late
  one) or excluding it until it trains on the current broadcast.

The printed participant strings come straight from the audit trail:
"fresh" means trained this round, "stale(k)" means a k-round-old update.
"""

from fedsim import (
    ClientSetup,
    IntermittencyEvent,
    ModelSpec,
    PartitionPlan,
    PolicyConfig,
    SimPlan,
    TrainConfig,
    make_synthetic,
    partition,
    relabel_shard,
    run,
)

MEANS = [[-2.0, -2.0], [2.0, 2.0]]


def base_plan(events, policy):
    master = make_synthetic(MEANS, 1.0, (600, 600), seed=17)
    shards = partition(master, PartitionPlan("random-uniform", 3, seed=17))
    return SimPlan(
        model=ModelSpec("logistic-regression", input_dim=2),
        train=TrainConfig(epochs=1, batch_size=32, learning_rate=0.3),
        n_rounds=10,
        clients=(
            ClientSetup(0, shards[0], 23.1),
            ClientSetup(1, shards[1], 40.1),
            ClientSetup(2, shards[2], 24.0),
        ),
        global_test=make_synthetic(MEANS, 1.0, (200, 200), seed=18),
        seed=5,
        events=events,
        policy=policy,
    )


def show(title, report):
    print(f"\n--- {title} ---")
    for rec in report.rounds:
        who = " ".join(f"{p.client_id}:{p.label()}" for p in rec.participants)
        print(f"round {rec.round_index:>2}  loss {rec.global_metrics.loss:.4f}  "
              f"t {rec.sim_time_s:>5.1f}s  [{who}]")
    print(f"total simulated time {report.total_sim_time_s:.1f}s")


def main():
    tiny = make_synthetic(MEANS, 1.0, (8, 8), seed=303)
    joiner = relabel_shard(partition(tiny, PartitionPlan("random-uniform", 1, seed=303))[0], 9)
    leave_join = (
        IntermittencyEvent.leave(5, 1),
        IntermittencyEvent.join(5, 9, joiner, 3.0),
    )
    for dep in ("drop-history", "retain-last"):
        report = run(base_plan(leave_join, PolicyConfig(departure=dep)))
        show(f"client 1 leaves at round 5, client 9 joins (departure={dep})", report)

    delay = (IntermittencyEvent.delay(5, 1, 10),)
    for dl in ("use-stale-accept-any", "exclude-until-current"):
        report = run(base_plan(delay, PolicyConfig(delay=dl)))
        show(f"client 1 delayed rounds 5..9, resumes at 10 (delay={dl})", report)


if __name__ == "__main__":
    main()
