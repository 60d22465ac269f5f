"""The requester side: per-height task generation and dataset publication.

One scenario-level dataset backs every height; each height's task draws a
fresh validation/test split from the held-out pool, so task IDs differ per
height while remaining a pure function of (scenario, height). That keeps
tasks unified across forks, which the Key Block task queue relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..chain import LearnerSpec, Task
from ..hashing import HashDigest, derive_seed
from ..messages import DatasetPublication
from ..ml.dataset import Dataset, split_val_test


class TaskSchedule:
    """Deterministic height-indexed task source shared by all nodes.

    Models the requester's task transaction pool plus instantaneous public
    dataset fetches; see the repo notes for the simplifications taken.
    """

    def __init__(
        self,
        public_train: Dataset,
        holdout: Dataset,
        learner_spec: LearnerSpec,
        metric_min: float,
        fee: int,
        master_seed: int,
        requester_id: str = "R0",
    ):
        self.public_train = public_train
        self.holdout = holdout
        self.learner_spec = learner_spec
        self.metric_min = metric_min
        self.fee = fee
        self.master_seed = master_seed
        self.requester_id = requester_id
        self._tasks: dict[int, Task] = {}
        self._datasets: dict[int, tuple[Dataset, Dataset]] = {}
        self._by_id: dict[HashDigest, tuple[Task, int]] = {}

    def datasets_for_height(self, height: int) -> tuple[Dataset, Dataset]:
        if height not in self._datasets:
            seed = derive_seed(self.master_seed, "valtest", height)
            self._datasets[height] = split_val_test(self.holdout, seed)
        return self._datasets[height]

    def task_for_height(self, height: int) -> Task:
        if height not in self._tasks:
            val, test = self.datasets_for_height(height)
            task = Task(
                train_commit=self.public_train.commitment,
                val_commit=val.commitment,
                test_commit=test.commitment,
                learner_spec=self.learner_spec,
                metric_min=self.metric_min,
                fee=self.fee,
                requester_id=self.requester_id,
            )
            self._tasks[height] = task
            self._by_id[task.task_id] = (task, height)
        return self._tasks[height]

    def task_by_id(self, task_id: HashDigest) -> Task | None:
        entry = self._by_id.get(task_id)
        return entry[0] if entry else None

    def height_of_task(self, task_id: HashDigest) -> int | None:
        entry = self._by_id.get(task_id)
        return entry[1] if entry else None

    def initial_queue(self, queue_len: int) -> tuple[HashDigest, ...]:
        return tuple(self.task_for_height(h).task_id for h in range(1, queue_len + 1))


@dataclass
class RequesterState:
    """Publication clock: D_V goes out `phase1` rounds after the phase
    anchor of a height, D_E another `phase2` rounds later. The anchor of
    height h is the round the first height h-1 Key Block is accepted
    anywhere in the network."""

    schedule: TaskSchedule
    phase1: int
    phase2: int
    anchors: dict[int, int] = field(default_factory=dict)
    _published: set[tuple[int, str]] = field(default_factory=set)
    _anchored_through: int = 0

    def observe_height(self, reached_height: int, round_: int) -> None:
        """Record that some miner's tip reached `reached_height`."""
        while self._anchored_through <= reached_height:
            self._anchored_through += 1
            self.anchors[self._anchored_through] = round_

    def due_publications(self, round_: int) -> list[DatasetPublication]:
        out = []
        for height, anchor in self.anchors.items():
            task = self.schedule.task_for_height(height)
            val, test = self.schedule.datasets_for_height(height)
            for kind, dataset, at in (
                ("validation", val, anchor + self.phase1),
                ("test", test, anchor + self.phase1 + self.phase2),
            ):
                if round_ >= at and (height, kind) not in self._published:
                    self._published.add((height, kind))
                    out.append(
                        DatasetPublication(
                            height=height,
                            kind=kind,
                            timestamp=round_,
                            task_id=task.task_id,
                            requester_id=self.schedule.requester_id,
                            dataset=dataset,
                        )
                    )
        return out
