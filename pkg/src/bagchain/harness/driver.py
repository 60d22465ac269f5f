"""Scenario driver: wires datasets, miners, requester, and the network
into a round loop and collects per-height results.

Miners may be stepped serially or on a thread pool; both orders apply
outbound messages in miner-ID order, so the two modes produce identical
simulations.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..chain import KeyBlock, LearnerSpec, chain_preference_key, make_genesis
from ..consensus.miner import HONEST, Miner, ProtocolConfig
from ..consensus.requester import RequesterState, TaskSchedule
from ..consensus.validation import EvalCache, ensemble_metric
from ..hashing import derive_seed, sha256
from ..messages import BlockMessage
from ..ml.bagging import metric
from ..ml.dataset import Dataset, load_csv, synthesize_dataset
from ..ml.splits import SplitPlan, partition_for_miners
from ..netsim import Network, Topology
from .scenario import Scenario

ROUND_SLACK = 60  # propagation headroom added per height to the auto budget


@dataclass
class HeightRecord:
    height: int
    accuracy: float  # winning ensemble on the test set
    best_possible: float  # all observed base models pooled
    mean_base: float
    base_accuracies: dict[str, float]
    miniblocks_total: int
    miniblocks_used: int
    keyblocks_observed: int
    rounds: int


@dataclass
class SimulationResult:
    scenario: Scenario
    records: list[HeightRecord]
    rewards: dict[str, int]
    rounds_used: int
    messages_sent: int
    converged: bool
    chain_digests: list[str]
    rejected_late_miniblocks: int

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([r.accuracy for r in self.records])) if self.records else 0.0

    @property
    def wastage(self) -> float:
        total = sum(r.miniblocks_total for r in self.records)
        used = sum(r.miniblocks_used for r in self.records)
        return (total - used) / total if total else 0.0


def build_source_data(scenario: Scenario) -> tuple[Dataset, Dataset]:
    """Scenario-level (training pool, holdout pool) pair."""
    seed = derive_seed(scenario.seed, "dataset")
    if scenario.dataset == "synthetic":
        n_total = scenario.synth_train + scenario.synth_holdout
        full = synthesize_dataset(
            n_total,
            scenario.synth_features,
            scenario.synth_classes,
            scenario.synth_separation,
            seed,
        )
    else:
        full = load_csv(scenario.dataset.removeprefix("csv:"))
        if len(full) <= scenario.synth_holdout:
            raise ValueError("holdout size leaves no training data")
    rng = np.random.default_rng(derive_seed(scenario.seed, "pool-shuffle"))
    order = rng.permutation(len(full))
    n_holdout = scenario.synth_holdout
    train = full.subset(order[n_holdout:], role="train-pool")
    holdout = full.subset(order[:n_holdout], role="holdout")
    return train, holdout


def build_topology(scenario: Scenario) -> Topology:
    node_ids = scenario.miner_ids()
    if scenario.topology == "full":
        return Topology.fully_connected(node_ids, scenario.bandwidth)
    if scenario.topology == "mesh":
        return Topology.mesh(
            node_ids,
            scenario.mesh_edge_prob,
            scenario.bandwidth,
            derive_seed(scenario.seed, "topology"),
        )
    return Topology.from_file(
        scenario.topology.removeprefix("file:"), node_ids, scenario.bandwidth
    )


class Simulation:
    def __init__(self, scenario: Scenario, parallel: bool = False):
        self.scenario = scenario
        self.parallel = parallel
        self.cache = EvalCache()

        train, holdout = build_source_data(scenario)
        plan = SplitPlan(
            kappa=scenario.kappa,
            zeta=scenario.zeta,
            n_partitions=scenario.partitions,
            heterogeneity=scenario.heterogeneity,
            beta=scenario.beta,
            seed=derive_seed(scenario.seed, "split"),
        )
        public, privates = partition_for_miners(train, plan, scenario.miners)
        self.schedule = TaskSchedule(
            public_train=public,
            holdout=holdout,
            learner_spec=LearnerSpec(
                scenario.learner, scenario.max_depth, scenario.min_leaf
            ),
            metric_min=scenario.metric_min,
            fee=scenario.fee,
            master_seed=derive_seed(scenario.seed, "tasks"),
        )
        self.genesis = make_genesis(self.schedule.initial_queue(scenario.queue_len))
        self.network = Network(build_topology(scenario), scenario.keyblock_delay)
        self.requester = RequesterState(self.schedule, scenario.phase1, scenario.phase2)

        config = ProtocolConfig(
            target=scenario.target,
            hash_trials=scenario.hash_trials,
            queue_len=scenario.queue_len,
            cfs_enabled=scenario.cfs,
            block_reward=scenario.block_reward,
            miniblock_size=scenario.miniblock_size,
            ensembleblock_size=scenario.ensembleblock_size,
            keyblock_size=scenario.keyblock_size,
            model_size=scenario.model_size,
            keyblock_delay=scenario.keyblock_delay,
        )
        strategy_map = scenario.strategy_map()
        self.miners = [
            Miner(
                miner_id=mid,
                genesis=self.genesis,
                private_data=privates[i],
                schedule=self.schedule,
                config=config,
                cache=self.cache,
                master_seed=derive_seed(scenario.seed, "mining"),
                strategy=strategy_map.get(mid, HONEST),
            )
            for i, mid in enumerate(scenario.miner_ids())
        ]
        # global observer state, fed from broadcast instructions
        self.observed_miniblocks: dict[int, dict] = {}
        self.observed_keyblocks: dict[int, dict] = {}
        self.rounds_used = 0

    # ----- round loop ----------------------------------------------------

    def _observe(self, outbound) -> None:
        payload = outbound.payload
        if not isinstance(payload, BlockMessage):
            return
        block = payload.block
        if isinstance(block, KeyBlock):
            self.observed_keyblocks.setdefault(block.height, {})[block.digest] = block
        elif hasattr(block, "model_hash"):
            self.observed_miniblocks.setdefault(block.height, {})[block.digest] = block

    def _apply_outbound(self, miner: Miner, instructions, round_: int) -> None:
        for out in instructions:
            self._observe(out)
            if out.kind == "broadcast":
                override = self.scenario.keyblock_delay if out.is_keyblock else None
                self.network.broadcast(miner.miner_id, out.payload, out.size, round_, override)
            else:
                self.network.send(miner.miner_id, out.destination, out.payload, out.size, round_)

    def _step_round(self, round_: int, executor: ThreadPoolExecutor | None) -> None:
        inboxes = self.network.step(round_)
        payloads = {
            mid: [m.payload for m in inboxes.get(mid, [])] for mid in self.scenario.miner_ids()
        }
        if executor is None:
            results = [(m, m.step(round_, payloads[m.miner_id])) for m in self.miners]
        else:
            futures = [
                executor.submit(m.step, round_, payloads[m.miner_id]) for m in self.miners
            ]
            results = list(zip(self.miners, (f.result() for f in futures)))
        for miner, instructions in results:  # miner-ID order
            self._apply_outbound(miner, instructions, round_)
        best_height = max(m.tip.height for m in self.miners)
        self.requester.observe_height(best_height, round_)
        for pub in self.requester.due_publications(round_):
            for mid in self.scenario.miner_ids():
                self.network.inject(
                    mid, pub, self.schedule.requester_id, round_ + self.scenario.publication_delay
                )

    def _round_budget(self) -> int:
        if self.scenario.round_budget:
            return self.scenario.round_budget
        p_trial = 2.0 ** (self.scenario.target_exp - 256)
        network_rate = p_trial * self.scenario.miners * self.scenario.hash_trials
        mining_rounds = int(np.ceil(20.0 / network_rate))
        per_height = self.scenario.phase1 + self.scenario.phase2 + mining_rounds + ROUND_SLACK
        return self.scenario.heights * per_height

    def run(self) -> SimulationResult:
        budget = self._round_budget()
        # once the target height is reached, keep stepping long enough for
        # the final Key Block to cross the network
        kb_delay = self.scenario.keyblock_delay or int(
            np.ceil(self.scenario.keyblock_size / self.scenario.bandwidth)
        )
        drain_limit = 4 * kb_delay + 4
        drain = None
        executor = ThreadPoolExecutor(max_workers=8) if self.parallel else None
        try:
            for round_ in range(budget):
                self._step_round(round_, executor)
                self.rounds_used = round_ + 1
                if all(m.tip.height >= self.scenario.heights for m in self.miners):
                    if drain is None:
                        drain = drain_limit
                    elif len({m.tip.digest for m in self.miners}) == 1 or drain <= 0:
                        break
                    drain -= 1
        finally:
            if executor is not None:
                executor.shutdown()
        return self._collect()

    # ----- result collection ---------------------------------------------

    def _reference_store(self):
        """Store of a miner on the plurality tip, so one isolated miner on a
        private fork cannot define the reported chain."""
        votes: dict = {}
        for miner in self.miners:
            votes[miner.tip.digest] = votes.get(miner.tip.digest, 0) + 1
        by_digest = {m.tip.digest: m for m in self.miners}
        winner = min(
            votes,
            key=lambda d: (-votes[d], chain_preference_key(by_digest[d].tip)),
        )
        return by_digest[winner].store

    def _merged_params(self) -> dict:
        merged = {}
        for miner in self.miners:
            merged.update(miner.model_params)
        return merged

    def _collect(self) -> SimulationResult:
        store = self._reference_store()
        chain = store.main_chain()
        params_by_hash = self._merged_params()
        records = []
        rewards: dict[str, int] = {}
        for kb in chain[1:]:
            if kb.height > self.scenario.heights:
                break
            task = self.schedule.task_by_id(kb.task_id)
            _, d_e = self.schedule.datasets_for_height(kb.height)
            accuracy = kb.metric_best.value
            used = 0
            if kb.winning_entry is not None:
                eb = store.ensembleblocks.get(kb.winning_entry[0])
                used = len(eb.miniblock_hashes) if eb else 0
            observed = self.observed_miniblocks.get(kb.height, {})
            # pool every distinct observed base model for the ceiling
            pooled: dict[bytes, bytes] = {}
            base_accs: dict[str, float] = {}
            for mb in observed.values():
                params = params_by_hash.get(mb.model_hash)
                if params is None:
                    continue
                pooled[sha256(params).value] = params
                score = metric(self.cache.predict(params, d_e), d_e.labels)
                # keep the first (main-parent) model per miner
                base_accs.setdefault(mb.miner_id, score.value)
            best_possible = (
                ensemble_metric(list(pooled.values()), d_e, self.cache).value if pooled else 0.0
            )
            mean_base = float(np.mean(list(base_accs.values()))) if base_accs else 0.0
            records.append(
                HeightRecord(
                    height=kb.height,
                    accuracy=accuracy,
                    best_possible=best_possible,
                    mean_base=mean_base,
                    base_accuracies=base_accs,
                    miniblocks_total=len(observed),
                    miniblocks_used=used,
                    keyblocks_observed=len(self.observed_keyblocks.get(kb.height, {})),
                    rounds=self._height_rounds(kb.height),
                )
            )
            for record in kb.payload:
                rewards[record.payee] = rewards.get(record.payee, 0) + record.amount
        tips = {m.tip.digest for m in self.miners}
        return SimulationResult(
            scenario=self.scenario,
            records=records,
            rewards=rewards,
            rounds_used=self.rounds_used,
            messages_sent=self.network.messages_sent,
            converged=len(tips) == 1,
            chain_digests=[kb.digest.hex for kb in chain],
            rejected_late_miniblocks=sum(m.rejected_late_miniblocks for m in self.miners),
        )

    def _height_rounds(self, height: int) -> int:
        start = self.requester.anchors.get(height)
        end = self.requester.anchors.get(height + 1, self.rounds_used)
        if start is None:
            return 0
        return max(0, end - start)


def run_scenario(scenario: Scenario, parallel: bool = False) -> SimulationResult:
    return Simulation(scenario, parallel=parallel).run()
