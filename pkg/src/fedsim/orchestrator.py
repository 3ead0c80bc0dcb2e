"""Parameter-server simulation: rounds, intermittency policies, simulated clock.

Each round broadcasts the current global parameters, lets every eligible
client train locally, aggregates the collected updates in ascending
client-id order, and evaluates the refreshed model on the global test
set and on every active client's test shard.  An event script injects
client departures, arrivals and delayed updates; the policy config
decides how a departed client's history and a late update enter the
aggregation.

Event timing:

* ``leave`` at round r: the client still trains and aggregates in round
  r, then departs.  Under ``drop-history`` its weights never appear
  again; under ``retain-last`` its round-r update stays in every later
  aggregation with its original sample count, aging one round at a time.
* ``join`` at round r: the client is active from round r and first
  trains on that round's broadcast.
* ``delay`` at round r with resume s > r: the client trains from the
  round-r broadcast but misses the collection deadline, so its fresh
  update only arrives at round s.  Under ``use-stale-accept-any`` the
  server re-uses the client's last delivered update during rounds r..s-1
  and accepts the late one at round s; under ``exclude-until-current``
  the client is simply absent during r..s-1, the late update is
  discarded, and (by default) the client retrains fresh within round s.
  Set ``PolicyConfig.delay_resume_same_round`` to False to push that
  first fresh round to s+1 instead.

The clock charges each round ``epochs`` times the slowest client that
trained fresh for that round's aggregation; clients whose updates are
stale or late never hold the round open.  Per-client training seeds
derive from (plan seed, client id, round), so adding, delaying or
removing one client never perturbs the randomness any other client
sees, and policy variants of the same plan stay comparable round by
round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .aggregation import AggregateResult, Update, add_uniform_noise, plain_average, weighted_fedavg
from .metrics import MetricSet, RunSummary, evaluate, loss_accuracy, summarize
from .models import Dataset, ModelSpec, ParameterSet, TrainConfig, init_params, train_local
from .partition import ClientShard
from .seeding import derive_seed

DROP_HISTORY = "drop-history"
RETAIN_LAST = "retain-last"
DEPARTURE_POLICIES = (DROP_HISTORY, RETAIN_LAST)

USE_STALE = "use-stale-accept-any"
EXCLUDE_UNTIL_CURRENT = "exclude-until-current"
DELAY_POLICIES = (USE_STALE, EXCLUDE_UNTIL_CURRENT)

AGGREGATORS = ("weighted", "plain")
NOISE_PLACEMENTS = ("client", "server")

LEAVE = "leave"
JOIN = "join"
DELAY = "delay"

# Purpose tags for seed derivation; every stream key starts (plan_seed, tag).
_INIT, _TRAIN, _CLIENT_NOISE, _SERVER_NOISE, _SWEEP = 0, 1, 2, 3, 4


def init_seed(plan_seed: int) -> int:
    return derive_seed(plan_seed, _INIT)


def train_seed(plan_seed: int, client_id: int, round_index: int) -> int:
    return derive_seed(plan_seed, _TRAIN, client_id, round_index)


def client_noise_seed(plan_seed: int, client_id: int, round_index: int) -> int:
    return derive_seed(plan_seed, _CLIENT_NOISE, client_id, round_index)


def server_noise_seed(plan_seed: int, round_index: int) -> int:
    return derive_seed(plan_seed, _SERVER_NOISE, round_index)


def sweep_seed(plan_seed: int, index: int) -> int:
    return derive_seed(plan_seed, _SWEEP, index)


class PlanValidationError(ValueError):
    """The plan or its event script is inconsistent."""


class PolicyStarvationError(RuntimeError):
    """The policy left a round with no eligible participants.

    Carries the rounds completed before the starved one so callers can
    still persist the partial trajectory.
    """

    def __init__(self, round_index: int, completed: list["RoundRecord"], audit_log: list[str]):
        super().__init__(
            f"no eligible participants in round {round_index}; the policy excluded everyone"
        )
        self.round_index = round_index
        self.completed = completed
        self.audit_log = audit_log


@dataclass(frozen=True)
class PolicyConfig:
    """How departures and delayed updates are treated during aggregation."""

    departure: str = DROP_HISTORY
    delay: str = EXCLUDE_UNTIL_CURRENT
    delay_resume_same_round: bool = True

    def __post_init__(self) -> None:
        if self.departure not in DEPARTURE_POLICIES:
            raise ValueError(f"unknown departure policy {self.departure!r}")
        if self.delay not in DELAY_POLICIES:
            raise ValueError(f"unknown delay policy {self.delay!r}")


@dataclass(frozen=True)
class NoiseConfig:
    """Uniform perturbation of exchanged parameters.

    ``client`` placement noises every update before it is sent;
    ``server`` placement noises the aggregated model instead.
    """

    amplitude: float
    placement: str = "client"

    def __post_init__(self) -> None:
        if not (float(self.amplitude) > 0):
            raise ValueError("noise amplitude must be > 0")
        if self.placement not in NOISE_PLACEMENTS:
            raise ValueError(f"unknown noise placement {self.placement!r}")


@dataclass(frozen=True)
class ClientSetup:
    """Initial-client descriptor: data shard plus per-epoch training time."""

    client_id: int
    shard: ClientShard
    epoch_time_s: float

    def __post_init__(self) -> None:
        if int(self.client_id) < 0:
            raise ValueError("client_id must be >= 0")
        if not (float(self.epoch_time_s) > 0):
            raise ValueError("epoch_time_s must be > 0")


@dataclass(frozen=True)
class IntermittencyEvent:
    """A scripted membership change; see the module docstring for timing."""

    round_index: int
    kind: str
    client_id: int
    shard: ClientShard | None = None
    epoch_time_s: float | None = None
    resume_round: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in (LEAVE, JOIN, DELAY):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if int(self.round_index) < 1:
            raise ValueError("event round must be >= 1")
        if int(self.client_id) < 0:
            raise ValueError("client_id must be >= 0")
        if self.kind == JOIN:
            if self.shard is None or self.epoch_time_s is None:
                raise ValueError("a join event needs a shard and an epoch_time_s")
            if not (float(self.epoch_time_s) > 0):
                raise ValueError("epoch_time_s must be > 0")
        else:
            if self.shard is not None or self.epoch_time_s is not None:
                raise ValueError(f"a {self.kind} event takes no shard or epoch_time_s")
        if self.kind == DELAY:
            if self.resume_round is None or int(self.resume_round) <= int(self.round_index):
                raise ValueError("a delay needs resume_round > round_index")
        elif self.resume_round is not None:
            raise ValueError(f"a {self.kind} event takes no resume_round")

    @classmethod
    def leave(cls, round_index: int, client_id: int) -> "IntermittencyEvent":
        return cls(round_index, LEAVE, client_id)

    @classmethod
    def join(
        cls, round_index: int, client_id: int, shard: ClientShard, epoch_time_s: float
    ) -> "IntermittencyEvent":
        return cls(round_index, JOIN, client_id, shard=shard, epoch_time_s=epoch_time_s)

    @classmethod
    def delay(cls, round_index: int, client_id: int, resume_round: int) -> "IntermittencyEvent":
        return cls(round_index, DELAY, client_id, resume_round=resume_round)


@dataclass
class ClientState:
    """Mutable per-client simulation state."""

    client_id: int
    shard: ClientShard
    epoch_time_s: float
    status: str = "active"  # "active" | "departed"
    last_update: Update | None = None
    join_round: int = 1


@dataclass(frozen=True)
class SimPlan:
    """Everything a run needs: model, schedule, clients, events, seed."""

    model: ModelSpec
    train: TrainConfig
    n_rounds: int
    clients: tuple[ClientSetup, ...]
    global_test: Dataset
    seed: int
    events: tuple[IntermittencyEvent, ...] = ()
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    aggregator: str = "weighted"
    noise: NoiseConfig | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "clients", tuple(self.clients))
        object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class Participation:
    """One aggregation entry: who, and how fresh their update was."""

    client_id: int
    fresh: bool
    age: int  # rounds since the update was produced; 0 iff fresh

    def label(self) -> str:
        return "fresh" if self.fresh else f"stale({self.age})"


@dataclass(frozen=True)
class ClientEval:
    client_id: int
    loss: float
    accuracy: float
    n: int


@dataclass
class RoundRecord:
    round_index: int
    participants: tuple[Participation, ...]
    aggregate: AggregateResult
    global_params: ParameterSet
    global_metrics: MetricSet
    client_metrics: tuple[ClientEval, ...]
    sim_time_s: float


@dataclass
class RunReport:
    plan: SimPlan
    rounds: list[RoundRecord]
    total_sim_time_s: float
    final_params: ParameterSet
    audit_log: list[str]
    summary: RunSummary | None = None


def static_sim_time(n_rounds: int, n_epochs: int, epoch_times: Sequence[float]) -> float:
    """Clock total for a fixed client set: rounds x epochs x slowest client."""
    if not epoch_times:
        raise ValueError("static_sim_time needs at least one client time")
    return n_rounds * (n_epochs * max(epoch_times))


def simulated_time(n_epochs: int, per_round_fresh_times: Sequence[Sequence[float]]) -> float:
    """Total simulated seconds: per round, epochs x the slowest fresh trainer.

    A round in which nobody trained fresh (every participant was stale)
    costs no time.  With the same nonempty time list every round this
    equals ``static_sim_time`` exactly.
    """
    return math.fsum(n_epochs * max(ts) if len(ts) else 0.0 for ts in per_round_fresh_times)


def validate_plan(plan: SimPlan) -> None:
    """Check the plan and statically verify the event script round by round."""
    errors: list[str] = []
    if plan.n_rounds < 1:
        errors.append("n_rounds must be >= 1")
    if plan.train.epochs < 1:
        errors.append("train.epochs must be >= 1 for a simulation plan")
    if plan.aggregator not in AGGREGATORS:
        errors.append(f"unknown aggregator {plan.aggregator!r}")
    if plan.seed < 0:
        errors.append("seed must be >= 0")
    if plan.global_test.n == 0:
        errors.append("global_test must be nonempty")
    elif len(set(plan.global_test.labels.tolist())) < 2:
        errors.append("global_test must contain both classes (AUC is undefined otherwise)")
    if plan.global_test.feature_dim != plan.model.input_dim:
        errors.append("global_test feature width does not match the model input_dim")

    ids = [c.client_id for c in plan.clients]
    if len(set(ids)) != len(ids):
        errors.append("duplicate initial client ids")
    for c in plan.clients:
        if c.shard.train.feature_dim != plan.model.input_dim:
            errors.append(f"client {c.client_id}: shard width does not match model input_dim")

    # Static walk of the event script.
    known = set(ids)
    active = set(ids)
    delay_windows: dict[int, list[tuple[int, int]]] = {}
    by_round: dict[int, list[IntermittencyEvent]] = {}
    for ev in plan.events:
        by_round.setdefault(ev.round_index, []).append(ev)
        if not (1 <= ev.round_index <= plan.n_rounds):
            errors.append(
                f"event {ev.kind} for client {ev.client_id} at round {ev.round_index} "
                f"falls outside rounds 1..{plan.n_rounds}"
            )
    order = {JOIN: 0, DELAY: 1, LEAVE: 2}
    for r in sorted(by_round):
        touched: set[int] = set()
        for ev in sorted(by_round[r], key=lambda e: order[e.kind]):
            cid = ev.client_id
            if cid in touched:
                errors.append(f"round {r}: multiple events target client {cid}")
                continue
            touched.add(cid)
            # Delay windows are closed [start, resume]: no other event may
            # touch the client until its comeback round has played out.
            in_delay = any(s <= r <= res for s, res in delay_windows.get(cid, ()))
            if ev.kind == JOIN:
                if cid in known:
                    errors.append(f"round {r}: join re-uses client id {cid}")
                elif ev.shard is not None and ev.shard.train.feature_dim != plan.model.input_dim:
                    errors.append(f"round {r}: joining client {cid} shard width mismatch")
                else:
                    known.add(cid)
                    active.add(cid)
            elif ev.kind == LEAVE:
                if cid not in active:
                    errors.append(f"round {r}: leave targets inactive client {cid}")
                elif in_delay:
                    errors.append(f"round {r}: leave targets client {cid} during a delay window")
                else:
                    active.discard(cid)
            else:  # DELAY
                if cid not in active:
                    errors.append(f"round {r}: delay targets inactive client {cid}")
                elif in_delay:
                    errors.append(f"round {r}: overlapping delays on client {cid}")
                else:
                    delay_windows.setdefault(cid, []).append((r, int(ev.resume_round)))
    if errors:
        raise PlanValidationError("; ".join(errors))


def _train_update(
    plan: SimPlan, state: ClientState, broadcast: ParameterSet, round_index: int
) -> Update:
    cfg = replace(plan.train, seed=train_seed(plan.seed, state.client_id, round_index))
    new_params, _ = train_local(plan.model, broadcast, state.shard.train, cfg)
    if plan.noise is not None and plan.noise.placement == "client":
        new_params = add_uniform_noise(
            new_params,
            plan.noise.amplitude,
            client_noise_seed(plan.seed, state.client_id, round_index),
        )
    return Update(state.client_id, new_params, state.shard.n_train, round_index)


def run(plan: SimPlan) -> RunReport:
    """Simulate the full round schedule; see the module docstring for semantics."""
    validate_plan(plan)
    states: dict[int, ClientState] = {
        c.client_id: ClientState(c.client_id, c.shard, float(c.epoch_time_s))
        for c in plan.clients
    }
    joins: dict[int, list[IntermittencyEvent]] = {}
    leaves: dict[int, list[IntermittencyEvent]] = {}
    windows: dict[int, list[tuple[int, int]]] = {}
    for ev in plan.events:
        if ev.kind == JOIN:
            joins.setdefault(ev.round_index, []).append(ev)
        elif ev.kind == LEAVE:
            leaves.setdefault(ev.round_index, []).append(ev)
        else:
            windows.setdefault(ev.client_id, []).append((ev.round_index, int(ev.resume_round)))
    for ws in windows.values():
        ws.sort()

    def delay_phase(cid: int, r: int) -> str:
        # Windows never overlap (validated), so at most one matches r.
        for start, resume in windows.get(cid, ()):
            if r == start:
                return "start"
            if start < r < resume:
                return "mid"
            if r == resume:
                return "resume"
        return "none"

    pending_late: dict[int, Update] = {}
    audit: list[str] = []
    records: list[RoundRecord] = []
    global_params = init_params(plan.model, init_seed(plan.seed))

    for r in range(1, plan.n_rounds + 1):
        for ev in joins.get(r, ()):
            states[ev.client_id] = ClientState(
                ev.client_id, ev.shard, float(ev.epoch_time_s), join_round=r
            )
            audit.append(f"round {r} join client={ev.client_id} n_train={ev.shard.n_train}")

        contributions: list[tuple[Update, Participation]] = []
        fresh_times: list[float] = []

        def contribute(update: Update, fresh: bool, r: int = r) -> None:
            age = 0 if fresh else r - update.produced_round
            contributions.append((update, Participation(update.client_id, fresh, age)))

        for cid in sorted(states):
            st = states[cid]
            if st.status == "departed":
                if plan.policy.departure == RETAIN_LAST and st.last_update is not None:
                    contribute(st.last_update, fresh=False)
                continue
            phase = delay_phase(cid, r)
            if phase == "start":
                pending_late[cid] = _train_update(plan, st, global_params, r)
                audit.append(f"round {r} delay client={cid} update held back")
                if plan.policy.delay == USE_STALE and st.last_update is not None:
                    contribute(st.last_update, fresh=False)
            elif phase == "mid":
                if plan.policy.delay == USE_STALE and st.last_update is not None:
                    contribute(st.last_update, fresh=False)
            elif phase == "resume":
                late = pending_late.pop(cid, None)
                if plan.policy.delay == USE_STALE:
                    if late is not None:
                        contribute(late, fresh=False)
                        st.last_update = late
                        audit.append(f"round {r} late-delivery client={cid} accepted")
                else:
                    if late is not None:
                        audit.append(f"round {r} late-delivery client={cid} discarded")
                    if plan.policy.delay_resume_same_round:
                        update = _train_update(plan, st, global_params, r)
                        st.last_update = update
                        contribute(update, fresh=True)
                        fresh_times.append(st.epoch_time_s)
            else:
                update = _train_update(plan, st, global_params, r)
                st.last_update = update
                contribute(update, fresh=True)
                fresh_times.append(st.epoch_time_s)

        if not contributions:
            raise PolicyStarvationError(r, records, audit)

        updates = [u for u, _ in contributions]
        participants = tuple(p for _, p in contributions)
        if plan.aggregator == "weighted":
            agg = weighted_fedavg(updates)
        else:
            agg = plain_average(updates)
        global_params = agg.params
        if plan.noise is not None and plan.noise.placement == "server":
            global_params = add_uniform_noise(
                global_params, plan.noise.amplitude, server_noise_seed(plan.seed, r)
            )
        audit.append(
            f"round {r} aggregate participants="
            + ",".join(f"{p.client_id}:{p.label()}" for p in participants)
            + " weights="
            + ",".join(f"{cid}:{w!r}" for cid, w in agg.weights_used)
            + f" total_n={agg.total_n}"
        )

        global_metrics = evaluate(plan.model, global_params, plan.global_test)

        for ev in leaves.get(r, ()):
            st = states[ev.client_id]
            st.status = "departed"
            if plan.policy.departure == DROP_HISTORY:
                st.last_update = None
            audit.append(f"round {r} leave client={ev.client_id} policy={plan.policy.departure}")

        client_metrics = []
        for cid in sorted(states):
            st = states[cid]
            if st.status != "active" or st.shard.test.n == 0:
                continue
            loss, acc = loss_accuracy(plan.model, global_params, st.shard.test)
            client_metrics.append(ClientEval(cid, loss, acc, st.shard.test.n))

        sim_time = plan.train.epochs * max(fresh_times) if fresh_times else 0.0
        records.append(
            RoundRecord(
                round_index=r,
                participants=participants,
                aggregate=agg,
                global_params=global_params,
                global_metrics=global_metrics,
                client_metrics=tuple(client_metrics),
                sim_time_s=sim_time,
            )
        )

    report = RunReport(
        plan=plan,
        rounds=records,
        total_sim_time_s=math.fsum(rec.sim_time_s for rec in records),
        final_params=global_params,
        audit_log=audit,
    )
    report.summary = summarize(report)
    return report
