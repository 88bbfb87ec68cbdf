"""Benchmark evaluation, corpus statistics, gold building and dataset splits.

Prediction and gold files are JSON Lines.  An optional first header line
declares the task (and, for the preference-disambiguation task, the gold
mode); every other line is a row:

    {"task": "SPD", "spd_mode": "cumulative"}
    {"dialog_id": "d00000", "round": 3, "payload": ["red", "yellow"]}

Payload types per task: SPD list of value strings, RRU list of object ids,
ACT an act name, RESPONSE an utterance string, RECOMMEND a list of object
ids or a raw utterance (ids are then extracted from "<@id>" tokens).
Missing prediction rows count as empty predictions, so partial submissions
remain scorable.

BLEU-4 here is corpus-level and unsmoothed: uniform 1..4-gram weights over
pooled modified precisions, times the standard brevity penalty
exp(1 - r/c) for c < r.  Tokenization is whitespace splitting.
"""

from __future__ import annotations

import json
import math
import random
import re
from collections import Counter
from dataclasses import dataclass

from .catalog import Scene, items_in_region
from .engine import (
    DialogFlow,
    ELICIT_ACTS,
    SALESPERSON_ACTS,
)
from .errors import (
    BadRatios,
    EmptyCorpus,
    MalformedFile,
    TaskMismatch,
    UnknownActName,
    ValidationError,
)
from .ontology import Ontology, spd_oracle

TASKS = ("SPD", "RRU", "ACT", "RESPONSE", "RECOMMEND")
SPD_MODES = ("cumulative", "scene_only")
SPLIT_NAMES = ("train", "dev", "dev_test", "test_std")

Key = tuple[str, int]
ID_TOKEN = re.compile(r"<@(\d+)>")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRF":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1, tp, fp, fn)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "tp": self.tp, "fp": self.fp, "fn": self.fn,
        }


def eval_set_task(preds: dict[Key, set], gold: dict[Key, set], task: str) -> PRF:
    """Micro-averaged PRF over element-level matches pooled across rounds."""
    if task not in ("SPD", "RRU"):
        raise TaskMismatch(f"set-based scoring applies to SPD/RRU, not {task!r}")
    tp = fp = fn = 0
    for key, gold_set in gold.items():
        pred_set = set(preds.get(key, set()))
        tp += len(pred_set & gold_set)
        fp += len(pred_set - gold_set)
        fn += len(gold_set - pred_set)
    return PRF.from_counts(tp, fp, fn)


def eval_set_task_macro(preds: dict[Key, set], gold: dict[Key, set]) -> PRF:
    """Unweighted mean of per-round PRF (secondary to the micro headline)."""
    ps, rs, f1s = [], [], []
    for key, gold_set in gold.items():
        pred_set = set(preds.get(key, set()))
        prf = PRF.from_counts(
            len(pred_set & gold_set), len(pred_set - gold_set), len(gold_set - pred_set)
        )
        ps.append(prf.precision)
        rs.append(prf.recall)
        f1s.append(prf.f1)
    n = len(gold)
    if n == 0:
        return PRF(0.0, 0.0, 0.0)
    return PRF(sum(ps) / n, sum(rs) / n, sum(f1s) / n)


@dataclass(frozen=True)
class ActReport:
    micro: PRF
    macro: PRF
    per_class: dict[str, PRF]

    def to_dict(self) -> dict:
        return {
            "micro": self.micro.to_dict(),
            "macro": self.macro.to_dict(),
            "per_class": {a: p.to_dict() for a, p in self.per_class.items()},
        }


def eval_act(preds: dict[Key, str], gold: dict[Key, str]) -> ActReport:
    """Per-class PRF over the salesperson acts plus micro/macro averages."""
    for key, act in preds.items():
        if act not in SALESPERSON_ACTS:
            raise UnknownActName(f"{key}: {act!r} is not a salesperson act")
    tp = fp = fn = 0
    per_class: dict[str, PRF] = {}
    classes = sorted(set(gold.values()) | set(preds.values()))
    for cls in classes:
        ctp = sum(1 for k, g in gold.items() if g == cls and preds.get(k) == cls)
        cfp = sum(1 for k, p in preds.items() if p == cls and gold.get(k) != cls)
        cfn = sum(1 for k, g in gold.items() if g == cls and preds.get(k) != cls)
        per_class[cls] = PRF.from_counts(ctp, cfp, cfn)
        tp, fp, fn = tp + ctp, fp + cfp, fn + cfn
    micro = PRF.from_counts(tp, fp, fn)
    n = len(classes)
    macro = PRF(
        sum(p.precision for p in per_class.values()) / n if n else 0.0,
        sum(p.recall for p in per_class.values()) / n if n else 0.0,
        sum(p.f1 for p in per_class.values()) / n if n else 0.0,
    )
    return ActReport(micro, macro, per_class)


def eval_response(preds: dict[Key, str], refs: dict[Key, str]) -> float:
    """Corpus-level unsmoothed BLEU-4 over aligned hypothesis/reference pairs."""
    if not refs:
        raise EmptyCorpus("no reference utterances to score against")
    clipped = [0] * 4
    totals = [0] * 4
    hyp_len = ref_len = 0
    for key, ref in refs.items():
        hyp_tokens = preds.get(key, "").split()
        ref_tokens = ref.split()
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, 5):
            hyp_grams = Counter(
                tuple(hyp_tokens[i:i + n]) for i in range(len(hyp_tokens) - n + 1)
            )
            ref_grams = Counter(
                tuple(ref_tokens[i:i + n]) for i in range(len(ref_tokens) - n + 1)
            )
            totals[n - 1] += sum(hyp_grams.values())
            clipped[n - 1] += sum(min(c, ref_grams[g]) for g, c in hyp_grams.items())
    if any(t == 0 for t in totals) or any(c == 0 for c in clipped):
        return 0.0
    log_precision = sum(0.25 * math.log(c / t) for c, t in zip(clipped, totals))
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * math.exp(log_precision)


def extract_item_ids(payload) -> set[int]:
    """Object ids from an explicit list or from "<@id>" tokens in an utterance."""
    if isinstance(payload, str):
        return {int(m) for m in ID_TOKEN.findall(payload)}
    return {int(v) for v in payload}


def eval_recommend(preds: dict[Key, object], gold_targets: dict[Key, set[int]]) -> PRF:
    """Micro PRF over per-dialog recommended-id sets; unparseable preds are empty."""
    tp = fp = fn = 0
    for key, gold_ids in gold_targets.items():
        pred_ids = extract_item_ids(preds.get(key, ()))
        tp += len(pred_ids & gold_ids)
        fp += len(pred_ids - gold_ids)
        fn += len(gold_ids - pred_ids)
    return PRF.from_counts(tp, fp, fn)


@dataclass
class StatsReport:
    n_dialogs: int
    n_utterances: int
    avg_utterances_per_dialog: float
    avg_salesperson_acts_per_dialog: float
    avg_subjective_preferences_per_dialog: float
    avg_objects_per_scene: float
    candidate_items_by_round: list[float]
    act_distribution_by_round: list[dict[str, float]]  # rounds 1..8, rows sum to 1

    def to_dict(self) -> dict:
        return {
            "n_dialogs": self.n_dialogs,
            "n_utterances": self.n_utterances,
            "avg_utterances_per_dialog": self.avg_utterances_per_dialog,
            "avg_salesperson_acts_per_dialog": self.avg_salesperson_acts_per_dialog,
            "avg_subjective_preferences_per_dialog": self.avg_subjective_preferences_per_dialog,
            "avg_objects_per_scene": self.avg_objects_per_scene,
            "candidate_items_by_round": self.candidate_items_by_round,
            "act_distribution_by_round": self.act_distribution_by_round,
        }


# Turns realized with a preference surface form: these carry the concept slot.
_PREFERENCE_ACTS = ("ANSWER_PREFERENCE", "NEGATE_PREFERENCE", "PROMPT_PREFERENCE")


def corpus_stats(flows: list[DialogFlow]) -> StatsReport:
    """Corpus aggregates; the per-round candidate series carries each dialog's
    last observed count forward, so the corpus curve is non-increasing."""
    if not flows:
        raise EmptyCorpus("no dialogs")
    n_utt = 0
    n_acts = 0
    n_prefs = 0
    n_objects = 0
    max_round = 0
    for flow in flows:
        n_utt += len(flow.turns)
        sales = [t for t in flow.turns if t.speaker == "salesperson"]
        n_acts += len(sales)
        n_prefs += sum(1 for t in flow.turns if t.act in _PREFERENCE_ACTS)
        n_objects += len(flow.turns[0].candidate_items)
        max_round = max(max_round, sales[-1].round)

    per_round_sum = [0.0] * max_round
    for flow in flows:
        by_round = {t.round: len(t.candidate_items) for t in flow.turns if t.speaker == "customer"}
        last = len(flow.turns[0].candidate_items)
        for rnd in range(1, max_round + 1):
            last = by_round.get(rnd, last)
            per_round_sum[rnd - 1] += last
    n = len(flows)

    act_rows: list[dict[str, float]] = []
    for rnd in range(1, 9):
        counts = Counter(
            t.act for flow in flows for t in flow.turns
            if t.speaker == "salesperson" and t.round == rnd
        )
        total = sum(counts.values())
        act_rows.append(
            {a: (counts[a] / total if total else 0.0) for a in SALESPERSON_ACTS}
        )

    return StatsReport(
        n_dialogs=n,
        n_utterances=n_utt,
        avg_utterances_per_dialog=n_utt / n,
        avg_salesperson_acts_per_dialog=n_acts / n,
        avg_subjective_preferences_per_dialog=n_prefs / n,
        avg_objects_per_scene=n_objects / n,
        candidate_items_by_round=[s / n for s in per_round_sum],
        act_distribution_by_round=act_rows,
    )


def split_corpus(
    flows: list[DialogFlow], ratios: tuple[float, float, float, float], seed: int
) -> dict[str, list[DialogFlow]]:
    """Seed-deterministic disjoint exhaustive partition into the four splits.

    Sizes are floor(ratio * n) with the remainder going to the splits with
    the largest fractional parts, so e.g. 100 dialogs at (.65, .05, .15, .15)
    come out exactly 65/5/15/15.
    """
    if len(ratios) != len(SPLIT_NAMES):
        raise BadRatios(f"need {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must be non-negative and sum to 1, got {ratios}")
    n = len(flows)
    sizes = [int(n * r) for r in ratios]
    # Largest fractional remainders absorb the rounding gap (< 4 dialogs).
    by_fraction = sorted(range(len(ratios)), key=lambda i: (sizes[i] - n * ratios[i], i))
    for i in range(n - sum(sizes)):
        sizes[by_fraction[i]] += 1
    order = list(range(n))
    random.Random(seed).shuffle(order)
    out: dict[str, list[DialogFlow]] = {}
    start = 0
    for name, size in zip(SPLIT_NAMES, sizes):
        out[name] = [flows[i] for i in sorted(order[start:start + size])]
        start += size
    return out


def _preference_clauses(flow: DialogFlow) -> list[tuple[int, str, str, str]]:
    """(round, attribute, polarity, concept_id) from the customer's preference turns."""
    clauses = []
    for turn in flow.turns:
        if turn.speaker != "customer":
            continue
        if turn.act == "ANSWER_PREFERENCE":
            clauses.append((turn.round, turn.slots["attribute"], "like", turn.slots["concept_id"]))
        elif turn.act == "NEGATE_PREFERENCE":
            clauses.append((turn.round, turn.slots["attribute"], "dislike", turn.slots["concept_id"]))
        elif turn.act == "RESPOND_PROMPT":
            polarity = "like" if turn.slots["accept"] else "dislike"
            clauses.append((turn.round, turn.slots["attribute"], polarity, turn.slots["concept_id"]))
    return clauses


def build_gold(
    flows: list[DialogFlow],
    ont: Ontology,
    scenes: list[Scene],
    task: str,
    spd_mode: str = "cumulative",
) -> tuple[dict, dict[Key, object]]:
    """Gold rows restricted to the task's eligible rounds, plus a file header.

    SPD gold is recomputed from the preference clauses through the oracle
    (never read off the flow annotations): `cumulative` folds every clause on
    the elicited attribute up to the round, `scene_only` just that round's.
    """
    if task not in TASKS:
        raise TaskMismatch(f"unknown task {task!r}")
    if spd_mode not in SPD_MODES:
        raise ValidationError(f"unknown spd_mode {spd_mode!r}")
    by_id = {s.scene_id: s for s in scenes}
    header: dict = {"task": task}
    if task == "SPD":
        header["spd_mode"] = spd_mode
    rows: dict[Key, object] = {}
    for flow in flows:
        if task == "SPD":
            scene = by_id[flow.scene_id]
            clauses = _preference_clauses(flow)
            for rnd, attr, _, _ in clauses:
                keep = [
                    (pol, cid) for r, a, pol, cid in clauses
                    if a == attr and (r == rnd if spd_mode == "scene_only" else r <= rnd)
                ]
                rows[(flow.dialog_id, rnd)] = sorted(spd_oracle(ont, scene, keep))
        elif task == "RRU":
            scene = by_id[flow.scene_id]
            for turn in flow.turns:
                if turn.speaker == "salesperson" and turn.act == "REFER_REGION":
                    ids = items_in_region(scene, turn.slots["region_label"])
                    rows[(flow.dialog_id, turn.round)] = sorted(ids)
        elif task == "ACT":
            for turn in flow.turns:
                if turn.speaker == "salesperson":
                    rows[(flow.dialog_id, turn.round)] = turn.act
        elif task == "RESPONSE":
            for turn in flow.turns:
                if turn.speaker == "salesperson":
                    if turn.utterance is None:
                        raise ValidationError(
                            f"{flow.dialog_id}: RESPONSE gold needs realized flows"
                        )
                    rows[(flow.dialog_id, turn.round)] = turn.utterance
        elif task == "RECOMMEND":
            last_round = flow.turns[-1].round
            rows[(flow.dialog_id, last_round)] = [flow.target_object_id]
    return header, rows


def elicit_rounds(flow: DialogFlow) -> list[int]:
    """Rounds whose salesperson act elicits a preference."""
    return [
        t.round for t in flow.turns if t.speaker == "salesperson" and t.act in ELICIT_ACTS
    ]


def write_predictions(path, header: dict, rows: dict[Key, object]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for (dialog_id, rnd), payload in sorted(rows.items()):
            record = {"dialog_id": dialog_id, "round": rnd, "payload": payload}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_predictions(path) -> tuple[dict, dict[Key, object]]:
    """Parse a prediction/gold file; returns (header, rows). Header may be {}."""
    header: dict = {}
    rows: dict[Key, object] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedFile(f"{path}:{line_no}: {exc}") from exc
                if "dialog_id" not in record:
                    if line_no == 1:
                        header = record
                        continue
                    raise MalformedFile(f"{path}:{line_no}: row without dialog_id")
                key = (record["dialog_id"], int(record["round"]))
                if key in rows:
                    raise ValidationError(f"{path}:{line_no}: duplicate key {key}")
                rows[key] = record["payload"]
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    return header, rows
