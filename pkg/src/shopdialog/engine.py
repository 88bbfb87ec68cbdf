"""Self-play dialog flow generation.

A session pits a salesperson policy (stochastic act selection under
eligibility guards, per-round probability rows) against a truthful customer
simulator that answers from a hidden target item.  Candidate attribute-value
sets and the candidate item set narrow monotonically until the target is
recommended and accepted.

Flows are interchanged as JSON Lines, one dialog per line:

    {"dialog_id": ..., "scene_id": ..., "target_object_id": ..., "outcome":
     "success"|"max_rounds", "turns": [{"round", "speaker", "act", "slots",
     "candidate_items", "candidate_values", ("utterance")}, ...]}

A salesperson turn is annotated with the candidate state it acted on; the
paired customer turn carries the state after the round's narrowing applied.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .attributes import attribute_names_for_domain
from .catalog import Scene, items_in_region, scene_value_universe
from .errors import (
    EmptyScene,
    InconsistentState,
    MalformedFile,
    NoTruthfulConcept,
    ValidationError,
)
from .ontology import Ontology, concepts_for_value

SALESPERSON_ACTS = (
    "ASK_PREFERENCE",
    "EXCLUDE_PREFERENCE",
    "PROMPT_PREFERENCE",
    "GUESS_ATTRIBUTE_VALUE",
    "REVISE_ATTRIBUTE_VALUE",
    "DISPLAY_CANDIDATE_VALUES",
    "REFER_REGION",
    "RECOMMEND_ITEM",
)
CUSTOMER_ACTS = (
    "ANSWER_PREFERENCE",
    "NEGATE_PREFERENCE",
    "RESPOND_PROMPT",
    "RESPOND_ATTRIBUTE_VALUE",
    "CHOOSE_ATTRIBUTE_VALUE",
    "JUDGE_REGION",
    "RESPOND_RECOMMENDATION",
)
# Each salesperson act is answered by exactly one customer act.
ACT_PAIRS = {
    "ASK_PREFERENCE": "ANSWER_PREFERENCE",
    "EXCLUDE_PREFERENCE": "NEGATE_PREFERENCE",
    "PROMPT_PREFERENCE": "RESPOND_PROMPT",
    "GUESS_ATTRIBUTE_VALUE": "RESPOND_ATTRIBUTE_VALUE",
    "REVISE_ATTRIBUTE_VALUE": "RESPOND_ATTRIBUTE_VALUE",
    "DISPLAY_CANDIDATE_VALUES": "CHOOSE_ATTRIBUTE_VALUE",
    "REFER_REGION": "JUDGE_REGION",
    "RECOMMEND_ITEM": "RESPOND_RECOMMENDATION",
}
ELICIT_ACTS = ("ASK_PREFERENCE", "EXCLUDE_PREFERENCE", "PROMPT_PREFERENCE")


@dataclass(frozen=True)
class DialogAct:
    name: str
    slots: dict


@dataclass(frozen=True)
class GoalSpec:
    target_object_id: int
    target_attributes: dict[str, str]


@dataclass(frozen=True)
class PolicyConfig:
    rounds: tuple[dict[str, float], ...]  # act-probability rows for rounds 1..8
    stationary: dict[str, float]          # row used beyond round 8
    display_min: int = 3
    display_max: int = 5
    recommend_max: int = 5
    refer_region_min_elicited: int = 1
    max_rounds: int = 30
    rng_seed: int = 0

    def row_for_round(self, rnd: int) -> dict[str, float]:
        if rnd <= len(self.rounds):
            return self.rounds[rnd - 1]
        return self.stationary


def _validate_row(row: dict[str, float], where: str) -> dict[str, float]:
    if set(row) != set(SALESPERSON_ACTS):
        raise ValidationError(f"{where}: row must cover exactly the salesperson acts")
    if any(p < 0 for p in row.values()):
        raise ValidationError(f"{where}: negative probability")
    if abs(sum(row.values()) - 1.0) > 1e-9:
        raise ValidationError(f"{where}: row sums to {sum(row.values())}, not 1")
    return {a: float(row[a]) for a in SALESPERSON_ACTS}


def policy_from_dict(raw: dict) -> PolicyConfig:
    allowed = {
        "rounds", "stationary", "display_min", "display_max", "recommend_max",
        "refer_region_min_elicited", "max_rounds", "rng_seed",
    }
    extra = set(raw) - allowed
    if extra:
        raise ValidationError(f"policy: unknown fields {sorted(extra)}")
    rows = tuple(_validate_row(r, f"policy round {i + 1}") for i, r in enumerate(raw["rounds"]))
    if not rows:
        raise ValidationError("policy: needs at least one round row")
    stationary = _validate_row(raw.get("stationary", raw["rounds"][-1]), "policy stationary")
    cfg = PolicyConfig(
        rounds=rows,
        stationary=stationary,
        display_min=int(raw.get("display_min", 3)),
        display_max=int(raw.get("display_max", 5)),
        recommend_max=int(raw.get("recommend_max", 5)),
        refer_region_min_elicited=int(raw.get("refer_region_min_elicited", 1)),
        max_rounds=int(raw.get("max_rounds", 30)),
        rng_seed=int(raw.get("rng_seed", 0)),
    )
    if cfg.display_min > cfg.display_max:
        raise ValidationError("policy: display_min must be <= display_max")
    if cfg.max_rounds < 1:
        raise ValidationError("policy: max_rounds must be >= 1")
    return cfg


def load_policy(path) -> PolicyConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"cannot parse {path}: {exc}") from exc
    return policy_from_dict(raw)


@dataclass
class SessionState:
    scene: Scene
    round: int
    candidate_values: dict[str, set[str]]
    candidate_items: set[int]
    history: list[tuple[DialogAct, DialogAct]]
    elicited_attrs: set[str]
    last_guess: tuple[str, str] | None
    region_includes: list[str]
    region_excludes: list[str]
    rejected_items: set[int]
    outcome: str | None
    # per-session caches, shared across apply_turn copies
    region_items: dict[str, frozenset[int]] = field(repr=False, default_factory=dict)
    item_attrs: dict[int, dict[str, str]] = field(repr=False, default_factory=dict)

    @property
    def elicited_count(self) -> int:
        return len(self.elicited_attrs)


def new_session(scene: Scene) -> SessionState:
    attrs = attribute_names_for_domain(scene.domain)
    return SessionState(
        scene=scene,
        round=1,
        candidate_values={a: set(scene_value_universe(scene, a)) for a in attrs},
        candidate_items={it.object_id for it in scene.items},
        history=[],
        elicited_attrs=set(),
        last_guess=None,
        region_includes=[],
        region_excludes=[],
        rejected_items=set(),
        outcome=None,
        region_items={r.label: frozenset(items_in_region(scene, r.label)) for r in scene.regions},
        item_attrs={it.object_id: it.attributes for it in scene.items},
    )


def consistent_items(candidate_values: dict[str, set[str]], scene: Scene) -> set[int]:
    """Items whose every attribute value lies in the corresponding candidate set."""
    return {
        it.object_id
        for it in scene.items
        if all(it.attributes[a] in vals for a, vals in candidate_values.items())
    }


def generate_goal(scene: Scene, rng: random.Random) -> GoalSpec:
    """Uniformly pick a hidden target item and copy its attribute map."""
    if not scene.items:
        raise EmptyScene(f"scene {scene.scene_id} has no items")
    item = scene.items[rng.randrange(len(scene.items))]
    return GoalSpec(item.object_id, dict(item.attributes))


def _informative_regions(state: SessionState) -> list[str]:
    """Regions that properly split the current candidate item set."""
    labels = []
    n = len(state.candidate_items)
    for region in state.scene.regions:
        overlap = len(state.candidate_items & state.region_items[region.label])
        if 0 < overlap < n:
            labels.append(region.label)
    return labels


def eligible_acts(state: SessionState, cfg: PolicyConfig) -> set[str]:
    """Guard-based act availability; never empty (RECOMMEND_ITEM is forced last)."""
    counts = {a: len(vs) for a, vs in state.candidate_values.items()}
    multi = [a for a, c in counts.items() if c >= 2]
    elig: set[str] = set()
    if multi:
        elig |= {"ASK_PREFERENCE", "EXCLUDE_PREFERENCE", "PROMPT_PREFERENCE"}
    if state.elicited_count >= 1:
        if multi:
            elig.add("GUESS_ATTRIBUTE_VALUE")
        if any(cfg.display_min <= counts[a] <= cfg.display_max for a in counts):
            elig.add("DISPLAY_CANDIDATE_VALUES")
        if state.elicited_count >= cfg.refer_region_min_elicited and _informative_regions(state):
            elig.add("REFER_REGION")
    if state.last_guess is not None:
        elig.add("REVISE_ATTRIBUTE_VALUE")
    if len(state.candidate_items) <= cfg.recommend_max:
        elig.add("RECOMMEND_ITEM")
    if not elig:
        elig = {"RECOMMEND_ITEM"}
    return elig


def _most_ambiguous_attr(state: SessionState) -> str:
    """Attribute with the largest candidate-value count; registry order breaks ties."""
    best, best_count = None, 1
    for attr, vals in state.candidate_values.items():
        if len(vals) > best_count:
            best, best_count = attr, len(vals)
    assert best is not None, "no ambiguous attribute left"
    return best


def _weighted_choice(rng: random.Random, options: list[str], row: dict[str, float]) -> str:
    weights = [row.get(o, 0.0) for o in options]
    total = sum(weights)
    if total <= 0:
        return options[rng.randrange(len(options))]
    target = rng.random() * total
    acc = 0.0
    for option, weight in zip(options, weights):
        acc += weight
        if target < acc:
            return option
    return options[-1]


def salesperson_step(
    state: SessionState,
    cfg: PolicyConfig,
    rng: random.Random,
    ont: Ontology | None = None,
    banned: frozenset[str] = frozenset(),
) -> DialogAct:
    """Sample an act from the round's row renormalized over eligible acts, fill slots.

    `banned` removes acts the customer just declined to answer (see run_dialog);
    the ontology is only needed to pick a concept slot for PROMPT_PREFERENCE.
    """
    elig = eligible_acts(state, cfg) - banned
    if not elig:
        elig = {"RECOMMEND_ITEM"}
    order = [a for a in SALESPERSON_ACTS if a in elig]
    name = _weighted_choice(rng, order, cfg.row_for_round(state.round))
    return DialogAct(name, _choose_slots(name, state, cfg, rng, ont))


def _choose_slots(
    name: str, state: SessionState, cfg: PolicyConfig, rng: random.Random, ont: Ontology | None
) -> dict:
    if name in ("ASK_PREFERENCE", "EXCLUDE_PREFERENCE"):
        return {"attribute": _most_ambiguous_attr(state)}
    if name == "PROMPT_PREFERENCE":
        attr = _most_ambiguous_attr(state)
        assert ont is not None, "PROMPT_PREFERENCE needs the ontology to pick a concept"
        cands = state.candidate_values[attr]
        concepts = sorted(ont.concepts_of(attr), key=lambda c: c.concept_id)
        informative = [c for c in concepts if 0 < len(c.values & cands) < len(cands)]
        pool = informative or [c for c in concepts if c.values & cands] or concepts
        return {"attribute": attr, "concept_id": pool[rng.randrange(len(pool))].concept_id}
    if name == "GUESS_ATTRIBUTE_VALUE":
        attr = _most_ambiguous_attr(state)
        values = sorted(state.candidate_values[attr])
        return {"attribute": attr, "value": values[rng.randrange(len(values))]}
    if name == "REVISE_ATTRIBUTE_VALUE":
        assert state.last_guess is not None
        attr = state.last_guess[0]
        values = sorted(state.candidate_values[attr])
        return {"attribute": attr, "value": values[rng.randrange(len(values))]}
    if name == "DISPLAY_CANDIDATE_VALUES":
        windowed = [
            a for a, vs in state.candidate_values.items()
            if cfg.display_min <= len(vs) <= cfg.display_max
        ]
        attr = windowed[rng.randrange(len(windowed))]
        return {"attribute": attr, "values": sorted(state.candidate_values[attr])}
    if name == "REFER_REGION":
        labels = _informative_regions(state)
        return {"region_label": labels[rng.randrange(len(labels))]}
    if name == "RECOMMEND_ITEM":
        items = sorted(state.candidate_items)
        return {"object_id": items[rng.randrange(len(items))]}
    raise ValueError(f"not a salesperson act: {name}")


def customer_step(
    state: SessionState,
    goal: GoalSpec,
    s_act: DialogAct,
    ont: Ontology,
    scene: Scene,
    rng: random.Random,
) -> DialogAct:
    """Truthful response: never contradicts the hidden target's attributes."""
    name, slots = s_act.name, s_act.slots
    if name == "ASK_PREFERENCE":
        attr = slots["attribute"]
        options = sorted(concepts_for_value(ont, attr, goal.target_attributes[attr]))
        return DialogAct(
            "ANSWER_PREFERENCE",
            {"attribute": attr, "concept_id": options[rng.randrange(len(options))]},
        )
    if name == "EXCLUDE_PREFERENCE":
        # Answer about the asked attribute if a truthful dislike exists there,
        # otherwise fall back to any other attribute of the domain.
        asked = slots["attribute"]
        attrs = [asked] + [a for a in state.candidate_values if a != asked]
        for attr in attrs:
            target_value = goal.target_attributes[attr]
            honest = [
                c for c in sorted(ont.concepts_of(attr), key=lambda c: c.concept_id)
                if target_value not in c.values
            ]
            informative = [c for c in honest if c.values & state.candidate_values[attr]]
            pool = informative or honest
            if pool:
                return DialogAct(
                    "NEGATE_PREFERENCE",
                    {"attribute": attr, "concept_id": pool[rng.randrange(len(pool))].concept_id},
                )
        raise NoTruthfulConcept("every concept of every attribute covers the target")
    if name == "PROMPT_PREFERENCE":
        attr, cid = slots["attribute"], slots["concept_id"]
        accept = goal.target_attributes[attr] in ont.concept(cid).values
        return DialogAct("RESPOND_PROMPT", {"attribute": attr, "concept_id": cid, "accept": accept})
    if name in ("GUESS_ATTRIBUTE_VALUE", "REVISE_ATTRIBUTE_VALUE"):
        attr, value = slots["attribute"], slots["value"]
        accept = goal.target_attributes[attr] == value
        return DialogAct(
            "RESPOND_ATTRIBUTE_VALUE", {"attribute": attr, "value": value, "accept": accept}
        )
    if name == "DISPLAY_CANDIDATE_VALUES":
        attr = slots["attribute"]
        return DialogAct(
            "CHOOSE_ATTRIBUTE_VALUE", {"attribute": attr, "value": goal.target_attributes[attr]}
        )
    if name == "REFER_REGION":
        label = slots["region_label"]
        accept = goal.target_object_id in state.region_items[label]
        return DialogAct("JUDGE_REGION", {"region_label": label, "accept": accept})
    if name == "RECOMMEND_ITEM":
        return DialogAct(
            "RESPOND_RECOMMENDATION", {"accept": slots["object_id"] == goal.target_object_id}
        )
    raise ValueError(f"not a salesperson act: {name}")


def apply_turn(
    state: SessionState, s_act: DialogAct, c_act: DialogAct, ont: Ontology, scene: Scene
) -> SessionState:
    """Narrow candidates per the act pair and advance one round."""
    if ACT_PAIRS.get(s_act.name) != c_act.name:
        raise ValueError(f"invalid act pair {s_act.name} -> {c_act.name}")

    values = {a: set(vs) for a, vs in state.candidate_values.items()}
    items = set(state.candidate_items)
    elicited = set(state.elicited_attrs)
    includes = list(state.region_includes)
    excludes = list(state.region_excludes)
    rejected = set(state.rejected_items)
    last_guess: tuple[str, str] | None = None
    outcome = state.outcome
    touched_attr: str | None = None

    name, slots = c_act.name, c_act.slots
    if name == "ANSWER_PREFERENCE":
        touched_attr = slots["attribute"]
        values[touched_attr] &= ont.concept(slots["concept_id"]).values
        elicited.add(touched_attr)
    elif name == "NEGATE_PREFERENCE":
        touched_attr = slots["attribute"]
        values[touched_attr] -= ont.concept(slots["concept_id"]).values
        elicited.add(touched_attr)
    elif name == "RESPOND_PROMPT":
        touched_attr = slots["attribute"]
        concept = ont.concept(slots["concept_id"])
        if slots["accept"]:
            values[touched_attr] &= concept.values
        else:
            values[touched_attr] -= concept.values
        elicited.add(touched_attr)
    elif name == "RESPOND_ATTRIBUTE_VALUE":
        touched_attr = slots["attribute"]
        if slots["accept"]:
            values[touched_attr] = {slots["value"]}
        else:
            values[touched_attr].discard(slots["value"])
            last_guess = (touched_attr, slots["value"])
    elif name == "CHOOSE_ATTRIBUTE_VALUE":
        touched_attr = slots["attribute"]
        values[touched_attr] = {slots["value"]}
    elif name == "JUDGE_REGION":
        label = slots["region_label"]
        if slots["accept"]:
            items &= state.region_items[label]
            includes.append(label)
        else:
            items -= state.region_items[label]
            excludes.append(label)
    elif name == "RESPOND_RECOMMENDATION":
        if slots["accept"]:
            outcome = "success"
        else:
            oid = s_act.slots["object_id"]
            rejected.add(oid)
            items.discard(oid)
    else:
        raise ValueError(f"not a customer act: {name}")

    if touched_attr is not None:
        if not values[touched_attr]:
            raise InconsistentState(f"candidate values of {touched_attr} emptied")
        items = {i for i in items if state.item_attrs[i][touched_attr] in values[touched_attr]}
    if not items:
        raise InconsistentState("candidate item set emptied")

    return SessionState(
        scene=state.scene,
        round=state.round + 1,
        candidate_values=values,
        candidate_items=items,
        history=state.history + [(s_act, c_act)],
        elicited_attrs=elicited,
        last_guess=last_guess,
        region_includes=includes,
        region_excludes=excludes,
        rejected_items=rejected,
        outcome=outcome,
        region_items=state.region_items,
        item_attrs=state.item_attrs,
    )


@dataclass
class Turn:
    round: int
    speaker: str  # "salesperson" | "customer"
    act: str
    slots: dict
    candidate_items: list[int]
    candidate_values: dict[str, list[str]]
    utterance: str | None = None


@dataclass
class DialogFlow:
    dialog_id: str
    scene_id: str
    target_object_id: int
    outcome: str  # "success" | "max_rounds"
    turns: list[Turn]


def _snapshot(state: SessionState) -> dict[str, list[str]]:
    return {a: sorted(vs) for a, vs in state.candidate_values.items()}


def run_dialog(
    scene: Scene, ont: Ontology, cfg: PolicyConfig, seed: int, dialog_id: str = "d00000"
) -> DialogFlow:
    """Simulate one dialog to acceptance or the round cap; seed-deterministic."""
    return _run_with_rng(scene, ont, cfg, random.Random(seed), dialog_id)


def _run_with_rng(
    scene: Scene, ont: Ontology, cfg: PolicyConfig, rng: random.Random, dialog_id: str
) -> DialogFlow:
    goal = generate_goal(scene, rng)
    state = new_session(scene)
    turns: list[Turn] = []
    while state.round <= cfg.max_rounds and state.outcome is None:
        banned: frozenset[str] = frozenset()
        while True:
            s_act = salesperson_step(state, cfg, rng, ont, banned=banned)
            try:
                c_act = customer_step(state, goal, s_act, ont, scene, rng)
                break
            except NoTruthfulConcept:
                banned |= {s_act.name}
        rnd = state.round
        turns.append(
            Turn(rnd, "salesperson", s_act.name, s_act.slots,
                 sorted(state.candidate_items), _snapshot(state))
        )
        state = apply_turn(state, s_act, c_act, ont, scene)
        turns.append(
            Turn(rnd, "customer", c_act.name, c_act.slots,
                 sorted(state.candidate_items), _snapshot(state))
        )
    outcome = state.outcome if state.outcome is not None else "max_rounds"
    return DialogFlow(dialog_id, scene.scene_id, goal.target_object_id, outcome, turns)


def _run_session(scenes: list[Scene], ont: Ontology, cfg: PolicyConfig, base_seed: int, index: int) -> DialogFlow:
    rng = random.Random(base_seed ^ index)
    scene = scenes[rng.randrange(len(scenes))]
    return _run_with_rng(scene, ont, cfg, rng, dialog_id=f"d{index:05d}")


def _corpus_chunk(args) -> list[DialogFlow]:
    scenes, ont, cfg, base_seed, indices = args
    return [_run_session(scenes, ont, cfg, base_seed, i) for i in indices]


def generate_corpus(
    scenes: list[Scene],
    ont: Ontology,
    cfg: PolicyConfig,
    n: int,
    base_seed: int,
    jobs: int = 1,
) -> Iterator[DialogFlow]:
    """Yield n dialogs in index order; identical output for any jobs count.

    Session i draws from its own RNG seeded with base_seed XOR i (scene pick
    first, then the dialog), so parallel chunking cannot change results.
    """
    if jobs <= 1 or n <= 1:
        for i in range(n):
            yield _run_session(scenes, ont, cfg, base_seed, i)
        return
    step = (n + jobs - 1) // jobs
    chunks = [range(lo, min(lo + step, n)) for lo in range(0, n, step)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for flows in pool.map(_corpus_chunk, [(scenes, ont, cfg, base_seed, c) for c in chunks]):
            yield from flows


def turn_to_dict(turn: Turn) -> dict:
    out = {
        "round": turn.round,
        "speaker": turn.speaker,
        "act": turn.act,
        "slots": turn.slots,
        "candidate_items": turn.candidate_items,
        "candidate_values": turn.candidate_values,
    }
    if turn.utterance is not None:
        out["utterance"] = turn.utterance
    return out


def flow_to_dict(flow: DialogFlow) -> dict:
    return {
        "dialog_id": flow.dialog_id,
        "scene_id": flow.scene_id,
        "target_object_id": flow.target_object_id,
        "outcome": flow.outcome,
        "turns": [turn_to_dict(t) for t in flow.turns],
    }


def flow_from_dict(raw: dict) -> DialogFlow:
    turns = [
        Turn(
            round=t["round"],
            speaker=t["speaker"],
            act=t["act"],
            slots=t["slots"],
            candidate_items=t["candidate_items"],
            candidate_values=t["candidate_values"],
            utterance=t.get("utterance"),
        )
        for t in raw["turns"]
    ]
    return DialogFlow(
        raw["dialog_id"], raw["scene_id"], raw["target_object_id"], raw["outcome"], turns
    )


def write_flows(flows: Iterable[DialogFlow], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for flow in flows:
            fh.write(json.dumps(flow_to_dict(flow), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_flows(path) -> list[DialogFlow]:
    flows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    flows.append(flow_from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise MalformedFile(f"{path}:{line_no}: bad dialog record ({exc})") from exc
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    return flows
