"""Per-miner protocol state machine.

Each miner owns a block-store replica and steps once per round: it merges
inbox messages, re-evaluates fork choice, and acts for its current phase.
The phase for the height under work is derived from which dataset
publications have arrived: none yet means Phase I (train + MiniBlock),
the validation set opens Phase II (Ensemble Block), the test set opens
Phase III (scoring + Key Block mining).

A step only reads the miner's own state and its inbox and returns outbound
message instructions, so miners may step in parallel within a round.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..chain import (
    BlockStore,
    EnsembleBlock,
    KeyBlock,
    MiniBlock,
    Task,
    payload_merkle_root,
    push_task_queue,
)
from ..hashing import HashDigest, derive_seed, sha256
from ..messages import BlockMessage, DatasetPublication, FetchRequest, FetchResponse
from ..metrics import MetricValue
from ..ml.bagging import resample
from ..ml.dataset import Dataset
from ..ml.tree import TrainedModel, fit_model
from .requester import TaskSchedule
from .rewards import build_payload
from .validation import (
    PENDING,
    EvalCache,
    ValidationResult,
    ensemble_metric,
    prehash_majority,
    validate_ensembleblock,
    validate_keyblock,
    validate_miniblock,
)

FETCH_RETRY_ROUNDS = 2

HONEST = "honest"
PLAGIARIST = "plagiarist"
INFLATER = "inflater"
WITHHOLDER = "withholder"
STRATEGIES = (HONEST, PLAGIARIST, INFLATER, WITHHOLDER)


@dataclass
class Outbound:
    """Message instruction returned from a miner step."""

    kind: str  # "broadcast" | "send"
    payload: object
    size: float
    destination: str | None = None
    is_keyblock: bool = False


@dataclass
class WorkState:
    """Progress on one (height, parent) attempt."""

    parent: HashDigest
    height: int
    mb_sent: bool = False
    eb_sent: bool = False
    mining_key: tuple | None = None
    candidate: KeyBlock | None = None
    next_nonce: int = 0


@dataclass(frozen=True)
class ProtocolConfig:
    target: int
    hash_trials: int = 1
    queue_len: int = 4
    cfs_enabled: bool = False
    block_reward: int = 50
    miniblock_size: float = 2.0
    ensembleblock_size: float = 2.0
    keyblock_size: float = 6.0
    model_size: float = 2.0
    keyblock_delay: int | None = None


class Miner:
    def __init__(
        self,
        miner_id: str,
        genesis: KeyBlock,
        private_data: Dataset,
        schedule: TaskSchedule,
        config: ProtocolConfig,
        cache: EvalCache,
        master_seed: int,
        strategy: str = HONEST,
    ):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy: {strategy}")
        self.miner_id = miner_id
        self.store = BlockStore(genesis)
        self.private_data = private_data
        self.schedule = schedule
        self.config = config
        self.cache = cache
        self.master_seed = master_seed
        self.strategy = strategy

        self.tip = genesis
        self.publications: dict[int, dict[str, Dataset]] = {}
        self.model_params: dict[HashDigest, bytes] = {}
        self.own_models: dict[HashDigest, TrainedModel] = {}  # model_hash -> model
        self.own_model_height: dict[HashDigest, int] = {}
        self.seen: set[HashDigest] = set()
        self.pending_fetches: dict[HashDigest, tuple[str, int]] = {}  # hash -> (holder, retry round)
        self.works: dict[tuple[int, HashDigest], WorkState] = {}
        self.pending_keyblocks: dict[HashDigest, KeyBlock] = {}
        self.late_miniblocks: set[HashDigest] = set()
        self.rejected_late_miniblocks = 0
        self.dropped_invalid = 0
        self.outbox: list[Outbound] = []

    # ----- helpers -------------------------------------------------------

    def current_task(self) -> Task:
        task_id = self.tip.task_queue[0]
        task = self.schedule.task_by_id(task_id)
        if task is None:
            raise RuntimeError(f"unknown task id {task_id.hex}")
        return task

    def phase(self, height: int) -> str:
        pubs = self.publications.get(height, {})
        if "validation" not in pubs:
            return "I"
        return "II" if "test" not in pubs else "III"

    def _work(self) -> WorkState:
        key = (self.tip.height + 1, self.tip.digest)
        work = self.works.get(key)
        if work is None:
            work = WorkState(parent=self.tip.digest, height=self.tip.height + 1)
            self.works[key] = work
        return work

    def _resolve_params(self, model_hash: HashDigest) -> bytes | None:
        return self.model_params.get(model_hash)

    def _resolve_mb(self, digest: HashDigest) -> MiniBlock | None:
        return self.store.miniblocks.get(digest)

    def _resolve_eb(self, digest: HashDigest) -> EnsembleBlock | None:
        return self.store.ensembleblocks.get(digest)

    def _broadcast(self, payload, size: float, is_keyblock: bool = False) -> None:
        self.outbox.append(Outbound("broadcast", payload, size, is_keyblock=is_keyblock))

    def _send(self, destination: str, payload, size: float) -> None:
        self.outbox.append(Outbound("send", payload, size, destination=destination))

    # ----- inbox handling ------------------------------------------------

    def _on_miniblock(self, mb: MiniBlock) -> None:
        if "validation" in self.publications.get(mb.height, {}):
            # validation dataset already out for this height: too late to
            # join any of our ensembles, but kept for validating peers'
            # blocks (timing is not an objective consensus rule)
            self.rejected_late_miniblocks += 1
            self.late_miniblocks.add(mb.digest)
        if self.store.add_miniblock(mb):
            self._broadcast(BlockMessage(mb), self.config.miniblock_size)

    def _on_ensembleblock(self, eb: EnsembleBlock) -> None:
        if self.store.add_ensembleblock(eb):
            self._broadcast(BlockMessage(eb), self.config.ensembleblock_size)

    def _on_keyblock(self, kb: KeyBlock) -> None:
        if kb.digest in self.store.keyblocks or kb.digest in self.pending_keyblocks:
            return
        # full validation happens in _try_accept_keyblocks once every
        # referenced object is available; forwarding waits for it too
        self.pending_keyblocks[kb.digest] = kb

    def _validate_keyblock_full(self, kb: KeyBlock) -> ValidationResult:
        task = self.schedule.task_by_id(kb.task_id)
        pubs = self.publications.get(kb.height, {})
        if task is None or "validation" not in pubs or "test" not in pubs:
            return PENDING
        return validate_keyblock(
            kb,
            task,
            pubs["validation"],
            pubs["test"],
            self.store.keyblocks.get(kb.prehash),
            self.config.target,
            self.config.cfs_enabled,
            self.config.block_reward,
            self._resolve_eb,
            self._resolve_mb,
            self._resolve_params,
            self.cache,
        )

    def _fetch_for_keyblock(self, kb: KeyBlock, round_: int) -> None:
        for eb_digest, _ in kb.eb_entries:
            eb = self._resolve_eb(eb_digest)
            if eb is None:
                continue  # arrives by gossip; models are all we can fetch
            for mb_digest in eb.miniblock_hashes:
                mb = self._resolve_mb(mb_digest)
                if mb is not None and mb.model_hash not in self.model_params:
                    self._fetch_model(mb.model_hash, mb.miner_id, round_)

    def _try_accept_keyblocks(self, round_: int) -> None:
        progress = True
        while progress:
            progress = False
            order = sorted(
                self.pending_keyblocks, key=lambda d: (self.pending_keyblocks[d].height, d.value)
            )
            for digest in order:
                kb = self.pending_keyblocks[digest]
                result = self._validate_keyblock_full(kb)
                if result.ok:
                    parent = self.store.keyblocks[kb.prehash]
                    del self.pending_keyblocks[digest]
                    progress = True
                    if kb.height != parent.height + 1:
                        self.dropped_invalid += 1
                        continue
                    self.store.add_keyblock(kb)
                    self._broadcast(BlockMessage(kb), self.config.keyblock_size, is_keyblock=True)
                elif not result.pending:
                    del self.pending_keyblocks[digest]
                    self.dropped_invalid += 1
                    progress = True
                else:
                    self._fetch_for_keyblock(kb, round_)

    def _on_publication(self, pub: DatasetPublication) -> None:
        task = self.schedule.task_by_id(pub.task_id)
        if task is None:
            self.dropped_invalid += 1
            return
        expected = task.val_commit if pub.kind == "validation" else task.test_commit
        if pub.dataset.commitment != expected:
            self.dropped_invalid += 1
            return
        self.publications.setdefault(pub.height, {})[pub.kind] = pub.dataset

    def _release_allowed(self, model_hash: HashDigest) -> bool:
        height = self.own_model_height.get(model_hash)
        if height is None:
            return False
        return "validation" in self.publications.get(height, {})

    def _on_fetch_request(self, req: FetchRequest) -> None:
        if self.strategy == WITHHOLDER:
            return  # never serves; requesters keep retrying into the void
        params: bytes | None = None
        if req.object_id in self.own_models and self._release_allowed(req.object_id):
            params = self.own_models[req.object_id].params
        elif req.object_id in self.model_params and req.object_id not in self.own_models:
            # plagiarized serving path: hand out whatever we fetched
            if self.strategy == PLAGIARIST:
                params = self.model_params[req.object_id]
        if params is not None:
            self._send(req.requester, FetchResponse(req.object_id, params, self.miner_id), self.config.model_size)
        else:
            self._send(req.requester, FetchResponse(req.object_id, None, self.miner_id), 0.0)

    def _on_fetch_response(self, resp: FetchResponse, round_: int) -> None:
        if resp.deferred:
            holder, _ = self.pending_fetches.get(resp.object_id, (resp.holder, 0))
            self.pending_fetches[resp.object_id] = (holder, round_ + FETCH_RETRY_ROUNDS)
            return
        self.pending_fetches.pop(resp.object_id, None)
        self.model_params.setdefault(resp.object_id, resp.payload)

    def handle_message(self, payload, round_: int) -> None:
        if isinstance(payload, BlockMessage):
            digest = payload.digest
            if digest in self.seen:
                return
            self.seen.add(digest)
            block = payload.block
            if isinstance(block, MiniBlock):
                self._on_miniblock(block)
            elif isinstance(block, EnsembleBlock):
                self._on_ensembleblock(block)
            else:
                self._on_keyblock(block)
        elif isinstance(payload, DatasetPublication):
            self._on_publication(payload)
        elif isinstance(payload, FetchRequest):
            self._on_fetch_request(payload)
        elif isinstance(payload, FetchResponse):
            self._on_fetch_response(payload, round_)

    # ----- phase actions -------------------------------------------------

    def _local_training_set(self, task: Task) -> Dataset:
        public = self.schedule.public_train
        if len(self.private_data) == 0:
            return public
        return public.union(self.private_data, role="local-train")

    def _generate_miniblock(self, work: WorkState, task: Task, round_: int) -> None:
        if self.strategy == PLAGIARIST:
            victim = next(
                (
                    mb
                    for d in self.store.miniblocks_by_height.get(work.height, [])
                    if (mb := self.store.miniblocks[d]).miner_id != self.miner_id
                ),
                None,
            )
            if victim is None:
                return  # keep waiting for something to copy
            mb = MiniBlock(
                timestamp=round_,
                miner_id=self.miner_id,
                task_id=task.task_id,
                model_hash=victim.model_hash,
                prehash=work.parent,
                height=work.height,
            )
        else:
            seed = derive_seed(self.master_seed, "resample", self.miner_id, work.height, work.parent.hex)
            boot = resample(self._local_training_set(task), seed)
            model = fit_model(boot, task.learner_spec, self.miner_id)
            self.own_models[model.model_hash] = model
            self.own_model_height[model.model_hash] = work.height
            self.model_params[model.model_hash] = model.params
            mb = MiniBlock(
                timestamp=round_,
                miner_id=self.miner_id,
                task_id=task.task_id,
                model_hash=model.model_hash,
                prehash=work.parent,
                height=work.height,
            )
        work.mb_sent = True
        self.seen.add(mb.digest)
        self.store.add_miniblock(mb)
        self._broadcast(BlockMessage(mb), self.config.miniblock_size)

    def _candidate_miniblocks(self, work: WorkState, task: Task) -> list[MiniBlock]:
        mbs = [
            self.store.miniblocks[d]
            for d in self.store.miniblocks_by_height.get(work.height, [])
        ]
        mbs = [
            mb
            for mb in mbs
            if mb.task_id == task.task_id and mb.digest not in self.late_miniblocks
        ]
        if not self.config.cfs_enabled:
            mbs = [mb for mb in mbs if mb.prehash == work.parent]
        return mbs

    def _fetch_model(self, model_hash: HashDigest, holder: str, round_: int) -> None:
        """Issue or re-issue a model download, rate limited per object."""
        pending = self.pending_fetches.get(model_hash)
        if pending is None:
            self.pending_fetches[model_hash] = (holder, round_ + FETCH_RETRY_ROUNDS)
            self._send(holder, FetchRequest(model_hash, self.miner_id), 0.0)
        elif round_ >= pending[1]:
            self.pending_fetches[model_hash] = (pending[0], round_ + FETCH_RETRY_ROUNDS)
            self._send(pending[0], FetchRequest(model_hash, self.miner_id), 0.0)

    def _request_missing_models(self, candidates: list[MiniBlock], round_: int) -> None:
        for mb in candidates:
            if mb.model_hash not in self.model_params:
                self._fetch_model(mb.model_hash, mb.miner_id, round_)

    def _generate_ensembleblock(
        self, work: WorkState, task: Task, d_v: Dataset, round_: int, final: bool
    ) -> None:
        """Build the Ensemble Block once every candidate model resolved; a
        `final` attempt (Phase III entry) drops still-missing models."""
        candidates = self._candidate_miniblocks(work, task)
        self._request_missing_models(candidates, round_)
        unresolved = [mb for mb in candidates if mb.model_hash not in self.model_params]
        if unresolved and not final:
            return
        kept: list[MiniBlock] = []
        seen_models: set[bytes] = set()
        seen_miners: set[str] = set()
        # prefer the variant trained on our own parent so cross-fork pulls
        # only fill gaps; then deterministic digest order
        order = sorted(candidates, key=lambda m: (m.prehash != work.parent, m.digest.value))
        for mb in order:
            params = self.model_params.get(mb.model_hash)
            if validate_miniblock(mb, params, task, d_v, self.cache).ok:
                if self.config.cfs_enabled:
                    raw = sha256(params).value
                    if raw in seen_models or mb.miner_id in seen_miners:
                        # one vote per miner: a retrained copy from another
                        # fork is correlated with the one we already hold
                        continue
                    seen_models.add(raw)
                    seen_miners.add(mb.miner_id)
                kept.append(mb)
        kept.sort(key=lambda m: m.digest.value)
        if not kept:
            if final:
                work.eb_sent = True  # abstain for this height
            return
        params_list = [self.model_params[mb.model_hash] for mb in kept]
        metric_v = ensemble_metric(params_list, d_v, self.cache)
        if self.strategy == INFLATER and metric_v.correct < metric_v.total:
            metric_v = MetricValue(metric_v.correct + 1, metric_v.total)
        eb = EnsembleBlock(
            miniblock_hashes=tuple(mb.digest for mb in kept),
            metric_v=metric_v,
            miner_id=self.miner_id,
            task_id=task.task_id,
            timestamp=round_,
            height=work.height,
        )
        work.eb_sent = True
        self.seen.add(eb.digest)
        self.store.add_ensembleblock(eb)
        self._broadcast(BlockMessage(eb), self.config.ensembleblock_size)

    def _score_ensembles(
        self, work: WorkState, task: Task, d_v: Dataset, d_e: Dataset
    ) -> list[tuple[HashDigest, MetricValue, EnsembleBlock]]:
        scored = []
        for digest in self.store.ensembleblocks_by_height.get(work.height, []):
            eb = self.store.ensembleblocks[digest]
            if eb.task_id != task.task_id:
                continue
            result = validate_ensembleblock(
                eb,
                task,
                d_v,
                work.parent,
                self.config.cfs_enabled,
                self._resolve_mb,
                self._resolve_params,
                self.cache,
            )
            if not result.ok:
                continue  # pending ones may join once their models arrive
            params_list = [
                self.model_params[self.store.miniblocks[h].model_hash]
                for h in eb.miniblock_hashes
            ]
            scored.append((digest, ensemble_metric(params_list, d_e, self.cache), eb))
        scored.sort(key=lambda t: (-t[1].as_fraction(), t[0].value))
        return scored

    def _mine(self, work: WorkState, task: Task, d_v: Dataset, d_e: Dataset, round_: int) -> None:
        scored = self._score_ensembles(work, task, d_v, d_e)
        if not scored:
            # nothing worth committing: leave the height to miners that do
            # hold a validated ensemble instead of mining an empty block
            work.mining_key = None
            work.candidate = None
            return
        entries = tuple((d, m) for d, m, _ in scored)
        mining_key = (work.parent, tuple(d for d, _ in entries))
        if work.mining_key != mining_key:
            work.mining_key = mining_key
            work.next_nonce = 0
            winner_eb = scored[0][2]
            winner_mbs = [self.store.miniblocks[h] for h in winner_eb.miniblock_hashes]
            producers = [mb.miner_id for mb in winner_mbs]
            metric_best = entries[0][1]
            prehash = (
                prehash_majority(winner_mbs) if self.config.cfs_enabled else work.parent
            )
            if prehash not in self.store.keyblocks:
                prehash = work.parent  # vote winner not locally known
            parent_kb = self.store.keyblocks[prehash]
            incoming = self.schedule.task_for_height(
                work.height + self.config.queue_len
            ).task_id
            queue = push_task_queue(parent_kb.task_queue, task.task_id, incoming)
            payload = build_payload(producers, task.fee, self.miner_id, self.config.block_reward)
            work.candidate = KeyBlock(
                nonce=0,
                merkle_root=payload_merkle_root(payload),
                timestamp=round_,
                metric_best=metric_best,
                eb_entries=entries,
                miner_id=self.miner_id,
                task_id=task.task_id,
                task_queue=queue,
                prehash=prehash,
                height=work.height,
                payload=payload,
            )
        for nonce in range(work.next_nonce, work.next_nonce + self.config.hash_trials):
            kb = replace(work.candidate, nonce=nonce)
            if kb.digest.as_int() < self.config.target:
                self.seen.add(kb.digest)
                self.store.add_keyblock(kb)
                self._broadcast(BlockMessage(kb), self.config.keyblock_size, is_keyblock=True)
                return
        work.next_nonce += self.config.hash_trials

    # ----- round step ----------------------------------------------------

    def step(self, round_: int, inbox: list) -> list[Outbound]:
        self.outbox = []
        for payload in inbox:
            self.handle_message(payload, round_)
        self._try_accept_keyblocks(round_)
        self.tip = self.store.best_tip()
        work = self._work()
        task = self.current_task()
        phase = self.phase(work.height)
        pubs = self.publications.get(work.height, {})
        if phase == "I":
            if not work.mb_sent:
                self._generate_miniblock(work, task, round_)
        elif phase == "II":
            if not work.mb_sent:
                # the tip moved after training closed: train for the new
                # parent anyway (peers will count it late, we can still use it)
                self._generate_miniblock(work, task, round_)
            if not work.eb_sent:
                self._generate_ensembleblock(work, task, pubs["validation"], round_, final=False)
        else:
            if not work.mb_sent:
                self._generate_miniblock(work, task, round_)
            if not work.eb_sent:
                self._generate_ensembleblock(work, task, pubs["validation"], round_, final=True)
            self._mine(work, task, pubs["validation"], pubs["test"], round_)
            if self.tip.digest != work.parent:
                # mined our own block (or merged an orphan chain): advance
                self.tip = self.store.best_tip()
        return self.outbox
