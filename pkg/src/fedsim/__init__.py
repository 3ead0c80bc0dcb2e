"""Deterministic federated-averaging simulator.

A small numpy library that trains binary classifiers across simulated
clients, averages their parameters round by round (sample-count weighted
or plain), injects client departures, arrivals and delayed updates under
configurable policies, and charges a simulated wall clock per round.
"""

from .aggregation import AggregateResult, Update, add_uniform_noise, plain_average, weighted_fedavg
from .metrics import (
    MetricSet,
    RocCurve,
    RunSummary,
    UndefinedAUCError,
    evaluate,
    loss_accuracy,
    roc_auc,
    summarize,
)
from .models import (
    Dataset,
    ModelSpec,
    ParameterSet,
    TrainConfig,
    forward,
    init_params,
    loss_and_grad,
    train_local,
)
from .orchestrator import (
    ClientEval,
    ClientSetup,
    ClientState,
    IntermittencyEvent,
    NoiseConfig,
    Participation,
    PlanValidationError,
    PolicyConfig,
    PolicyStarvationError,
    RoundRecord,
    RunReport,
    SimPlan,
    init_seed,
    run,
    simulated_time,
    static_sim_time,
    train_seed,
    validate_plan,
)
from .partition import (
    ClientShard,
    InfeasiblePartition,
    PartitionPlan,
    SkewReport,
    SkewRow,
    make_synthetic,
    partition,
    read_dataset_csv,
    relabel_shard,
    skew_report,
    write_dataset_csv,
)
from .seeding import derive_seed, rng_from

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "ClientEval",
    "ClientSetup",
    "ClientShard",
    "ClientState",
    "Dataset",
    "IntermittencyEvent",
    "InfeasiblePartition",
    "MetricSet",
    "ModelSpec",
    "NoiseConfig",
    "ParameterSet",
    "Participation",
    "PartitionPlan",
    "PlanValidationError",
    "PolicyConfig",
    "PolicyStarvationError",
    "RocCurve",
    "RoundRecord",
    "RunReport",
    "RunSummary",
    "SimPlan",
    "SkewReport",
    "SkewRow",
    "TrainConfig",
    "Update",
    "UndefinedAUCError",
    "add_uniform_noise",
    "derive_seed",
    "evaluate",
    "forward",
    "init_params",
    "init_seed",
    "loss_accuracy",
    "loss_and_grad",
    "make_synthetic",
    "partition",
    "plain_average",
    "read_dataset_csv",
    "relabel_shard",
    "rng_from",
    "roc_auc",
    "run",
    "simulated_time",
    "skew_report",
    "static_sim_time",
    "summarize",
    "train_local",
    "train_seed",
    "validate_plan",
    "weighted_fedavg",
    "write_dataset_csv",
]
