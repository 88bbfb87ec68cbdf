"""Template-based surface realization of dialog flows.

Stands in for the human paraphrase pass at desk scale: deterministic given a
seed, and slot-preserving by construction.  Concept slots are rendered
through a surface form from the ontology lexicon (so the phrase resolves
back to the annotated concept); values, region labels and item references
are rendered verbatim.  Recommendation turns embed the item id as an
"<@id>" token, which the recommendation metric extracts by regex.

Template files are UTF-8 JSON mapping an act key to a list of template
strings.  Acts whose customer response carries an accept flag use variant
keys: "RESPOND_PROMPT.accept" / "RESPOND_PROMPT.reject", and likewise for
RESPOND_ATTRIBUTE_VALUE, JUDGE_REGION and RESPOND_RECOMMENDATION.
"""

from __future__ import annotations

import json
import random
import string
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .catalog import Scene, contains_center
from .engine import ACT_PAIRS, DialogFlow, SALESPERSON_ACTS, Turn
from .errors import MalformedFile, MissingTemplate, ValidationError
from .ontology import Ontology

_FLAGGED_ACTS = (
    "RESPOND_PROMPT",
    "RESPOND_ATTRIBUTE_VALUE",
    "JUDGE_REGION",
    "RESPOND_RECOMMENDATION",
)
_PLAIN_ACTS = tuple(
    a for a in SALESPERSON_ACTS + tuple(ACT_PAIRS.values()) if a not in _FLAGGED_ACTS
)
REQUIRED_KEYS = _PLAIN_ACTS + tuple(
    f"{a}.{variant}" for a in _FLAGGED_ACTS for variant in ("accept", "reject")
)

# Placeholders each act key may use (all are filled from the turn's slots).
_ALLOWED_PLACEHOLDERS = {
    "ASK_PREFERENCE": {"attr"},
    "EXCLUDE_PREFERENCE": {"attr"},
    "PROMPT_PREFERENCE": {"attr", "preference_phrase"},
    "GUESS_ATTRIBUTE_VALUE": {"attr", "value"},
    "REVISE_ATTRIBUTE_VALUE": {"attr", "value"},
    "DISPLAY_CANDIDATE_VALUES": {"attr", "values_list"},
    "REFER_REGION": {"region_label"},
    "RECOMMEND_ITEM": {"item_description", "object_id"},
    "ANSWER_PREFERENCE": {"attr", "preference_phrase"},
    "NEGATE_PREFERENCE": {"attr", "preference_phrase"},
    "RESPOND_PROMPT.accept": {"attr", "preference_phrase"},
    "RESPOND_PROMPT.reject": {"attr", "preference_phrase"},
    "RESPOND_ATTRIBUTE_VALUE.accept": {"attr", "value"},
    "RESPOND_ATTRIBUTE_VALUE.reject": {"attr", "value"},
    "CHOOSE_ATTRIBUTE_VALUE": {"attr", "value"},
    "JUDGE_REGION.accept": {"region_label"},
    "JUDGE_REGION.reject": {"region_label"},
    "RESPOND_RECOMMENDATION.accept": set(),
    "RESPOND_RECOMMENDATION.reject": set(),
}


@dataclass(frozen=True)
class TemplateSet:
    by_key: dict[str, tuple[str, ...]]

    def templates(self, key: str) -> tuple[str, ...]:
        try:
            return self.by_key[key]
        except KeyError:
            raise MissingTemplate(f"no templates for act key {key!r}") from None


def _placeholders(template: str) -> set[str]:
    return {f[1] for f in string.Formatter().parse(template) if f[1] is not None}


def templates_from_dict(raw: dict) -> TemplateSet:
    extra = set(raw) - set(REQUIRED_KEYS)
    if extra:
        raise ValidationError(f"templates: unknown act keys {sorted(extra)}")
    missing = set(REQUIRED_KEYS) - set(raw)
    if missing:
        raise ValidationError(f"templates: missing act keys {sorted(missing)}")
    by_key: dict[str, tuple[str, ...]] = {}
    for key, templates in raw.items():
        if not templates:
            raise ValidationError(f"templates: {key!r} needs at least one template")
        for tpl in templates:
            bad = _placeholders(tpl) - _ALLOWED_PLACEHOLDERS[key]
            if bad:
                raise ValidationError(f"templates: {key!r} has unfillable placeholders {sorted(bad)}")
        by_key[key] = tuple(templates)
    return TemplateSet(by_key)


def load_templates(path) -> TemplateSet:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"cannot parse {path}: {exc}") from exc
    return templates_from_dict(raw)


def _attr_display(attr: str) -> str:
    return attr.replace("_", " ")


def _values_list(values: list[str]) -> str:
    if len(values) == 1:
        return values[0]
    return ", ".join(values[:-1]) + " and " + values[-1]


def item_description(scene: Scene, object_id: int) -> str:
    """Color + type, anchored to the first region covering the item's center."""
    item = scene.item(object_id)
    base = f"{item.attributes['color']} {item.attributes['type']}"
    for region in scene.regions:
        if contains_center(region.bbox, item.center):
            return f"{base} on the {region.label}"
    return base


def _template_key(turn: Turn) -> str:
    if turn.act in _FLAGGED_ACTS:
        return f"{turn.act}.{'accept' if turn.slots['accept'] else 'reject'}"
    return turn.act


def realize_turn(
    turn: Turn, templates: TemplateSet, ont: Ontology, scene: Scene, rng: random.Random
) -> str:
    """Render one turn; concept slots keep a registered surface form."""
    key = _template_key(turn)
    pool = templates.templates(key)
    template = pool[rng.randrange(len(pool))]
    slots = turn.slots
    fills: dict[str, str] = {}
    if "attribute" in slots:
        fills["attr"] = _attr_display(slots["attribute"])
    if "concept_id" in slots:
        forms = ont.concept(slots["concept_id"]).surface_forms
        fills["preference_phrase"] = forms[rng.randrange(len(forms))]
    if "value" in slots:
        fills["value"] = slots["value"]
    if "values" in slots:
        fills["values_list"] = _values_list(slots["values"])
    if "region_label" in slots:
        fills["region_label"] = slots["region_label"]
    if "object_id" in slots:
        fills["object_id"] = str(slots["object_id"])
        fills["item_description"] = item_description(scene, slots["object_id"])
    return template.format(**{k: v for k, v in fills.items() if k in _placeholders(template)})


def realize_dialog(
    flow: DialogFlow, templates: TemplateSet, ont: Ontology, scene: Scene, seed: int
) -> DialogFlow:
    """Fill every turn's utterance; acts, slots and candidate annotations untouched."""
    rng = random.Random(seed)
    turns = [
        replace(t, utterance=realize_turn(t, templates, ont, scene, rng)) for t in flow.turns
    ]
    return replace(flow, turns=turns)


def _realize_chunk(args) -> list[DialogFlow]:
    flows, templates, ont, scenes_by_id, base_seed, indices = args
    return [
        realize_dialog(flow, templates, ont, scenes_by_id[flow.scene_id], base_seed ^ i)
        for i, flow in zip(indices, flows)
    ]


def realize_corpus(
    flows: list[DialogFlow],
    templates: TemplateSet,
    ont: Ontology,
    scenes: list[Scene],
    base_seed: int,
    jobs: int = 1,
) -> list[DialogFlow]:
    """Realize a corpus; dialog i uses seed base_seed XOR i, so any jobs count agrees."""
    scenes_by_id = {s.scene_id: s for s in scenes}
    if jobs <= 1 or len(flows) <= 1:
        return _realize_chunk((flows, templates, ont, scenes_by_id, base_seed, range(len(flows))))
    step = (len(flows) + jobs - 1) // jobs
    chunks = [
        (flows[lo:lo + step], templates, ont, scenes_by_id, base_seed, range(lo, min(lo + step, len(flows))))
        for lo in range(0, len(flows), step)
    ]
    out: list[DialogFlow] = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_realize_chunk, chunks):
            out.extend(part)
    return out
