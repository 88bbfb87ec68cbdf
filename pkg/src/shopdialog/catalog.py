"""Store-scene catalog: loading, validation, and spatial/metadata queries.

Scene files are UTF-8 JSON holding one scene object or a list of them:

    {"scene_id": str, "domain": "fashion"|"furniture",
     "items":   [{"object_id": int, "prototype_id": str, "bbox": [x, y, w, h]}, ...],
     "regions": [{"label": str, "bbox": [x, y, w, h]}, ...]}

Metadata files map prototype ids to complete attribute maps:

    {"proto_0": {"type": "jacket", "color": "red", ...}, ...}

Field names are normative; validators reject unknown fields.  A scene item
references a prototype and inherits its attributes at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .attributes import attribute_names_for_domain, get_attribute, numeric_payload
from .errors import MalformedFile, UnknownAttribute, UnknownRegion, ValidationError

Bbox = tuple[float, float, float, float]


@dataclass(frozen=True)
class Item:
    object_id: int
    prototype_id: str
    bbox: Bbox
    attributes: dict[str, str]

    @property
    def center(self) -> tuple[float, float]:
        x, y, w, h = self.bbox
        return (x + w / 2.0, y + h / 2.0)


@dataclass(frozen=True)
class BackgroundItem:
    label: str  # "absolute position + name", e.g. "back leftmost closet"
    bbox: Bbox


@dataclass(frozen=True)
class Scene:
    scene_id: str
    domain: str
    items: tuple[Item, ...]
    regions: tuple[BackgroundItem, ...]

    def item(self, object_id: int) -> Item:
        for it in self.items:
            if it.object_id == object_id:
                return it
        raise KeyError(object_id)


Metadata = dict[str, dict[str, str]]


def _require_fields(obj: dict, fields: set[str], where: str) -> None:
    extra = set(obj) - fields
    if extra:
        raise ValidationError(f"{where}: unknown fields {sorted(extra)}")
    missing = fields - set(obj)
    if missing:
        raise ValidationError(f"{where}: missing fields {sorted(missing)}")


def _parse_bbox(raw, where: str) -> Bbox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise ValidationError(f"{where}: bbox must be [x, y, w, h]")
    x, y, w, h = (float(v) for v in raw)
    if w <= 0 or h <= 0:
        raise ValidationError(f"{where}: bbox must have positive width/height")
    return (x, y, w, h)


def _read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"cannot parse {path}: {exc}") from exc


def _parse_scene(raw: dict, metadata: Metadata) -> Scene:
    if not isinstance(raw, dict):
        raise ValidationError("scene entry must be an object")
    _require_fields(raw, {"scene_id", "domain", "items", "regions"}, "scene")
    scene_id = raw["scene_id"]
    domain = raw["domain"]
    if domain not in ("fashion", "furniture"):
        raise ValidationError(f"scene {scene_id}: unknown domain {domain!r}")
    declared = attribute_names_for_domain(domain)

    if not raw["items"]:
        raise ValidationError(f"scene {scene_id}: needs at least one item")
    items = []
    seen_ids: set[int] = set()
    for entry in raw["items"]:
        _require_fields(entry, {"object_id", "prototype_id", "bbox"}, f"scene {scene_id} item")
        oid = entry["object_id"]
        if not isinstance(oid, int) or oid < 0:
            raise ValidationError(f"scene {scene_id}: object_id must be a non-negative integer")
        if oid in seen_ids:
            raise ValidationError(f"scene {scene_id}: duplicate object_id {oid}")
        seen_ids.add(oid)
        proto = entry["prototype_id"]
        if proto not in metadata:
            raise ValidationError(f"scene {scene_id}: prototype {proto!r} not in metadata")
        attrs = metadata[proto]
        if set(attrs) != set(declared):
            raise ValidationError(
                f"scene {scene_id}: prototype {proto!r} attributes {sorted(attrs)} "
                f"do not match the {domain} declaration {sorted(declared)}"
            )
        bbox = _parse_bbox(entry["bbox"], f"scene {scene_id} item {oid}")
        items.append(Item(oid, proto, bbox, dict(attrs)))

    regions = []
    seen_labels: set[str] = set()
    for entry in raw["regions"]:
        _require_fields(entry, {"label", "bbox"}, f"scene {scene_id} region")
        label = entry["label"]
        if label in seen_labels:
            raise ValidationError(f"scene {scene_id}: duplicate region label {label!r}")
        seen_labels.add(label)
        bbox = _parse_bbox(entry["bbox"], f"scene {scene_id} region {label!r}")
        regions.append(BackgroundItem(label, bbox))

    return Scene(scene_id, domain, tuple(items), tuple(regions))


def _validate_metadata(raw: object) -> Metadata:
    if not isinstance(raw, dict):
        raise ValidationError("metadata file must map prototype ids to attribute maps")
    for proto, attrs in raw.items():
        if not isinstance(attrs, dict):
            raise ValidationError(f"metadata {proto!r}: attribute map expected")
        for name, value in attrs.items():
            attr = get_attribute(name)  # raises UnknownAttribute for stray names
            if not isinstance(value, str):
                raise ValidationError(f"metadata {proto!r}: value of {name!r} must be a string")
            if attr.kind == "numeric":
                try:
                    numeric_payload(value)
                except ValueError:
                    raise ValidationError(
                        f"metadata {proto!r}: {name!r} value {value!r} has no numeric payload"
                    ) from None
    return raw


def load_catalog(scene_path, metadata_path) -> tuple[list[Scene], Metadata]:
    """Load and validate scenes plus the item-prototype metadata index."""
    metadata = _validate_metadata(_read_json(metadata_path))
    raw_scenes = _read_json(scene_path)
    if isinstance(raw_scenes, dict):
        raw_scenes = [raw_scenes]
    if not isinstance(raw_scenes, list):
        raise ValidationError("scene file must hold a scene object or a list of them")
    scenes = [_parse_scene(entry, metadata) for entry in raw_scenes]
    seen = set()
    for scene in scenes:
        if scene.scene_id in seen:
            raise ValidationError(f"duplicate scene_id {scene.scene_id!r}")
        seen.add(scene.scene_id)
    return scenes, metadata


def dump_scenes(scenes: list[Scene]) -> list[dict]:
    """Serialize scenes back to the on-disk schema (attributes stay in metadata)."""
    return [
        {
            "scene_id": s.scene_id,
            "domain": s.domain,
            "items": [
                {"object_id": i.object_id, "prototype_id": i.prototype_id, "bbox": list(i.bbox)}
                for i in s.items
            ],
            "regions": [{"label": r.label, "bbox": list(r.bbox)} for r in s.regions],
        }
        for s in scenes
    ]


def save_catalog(scenes: list[Scene], scene_path) -> None:
    Path(scene_path).write_text(
        json.dumps(dump_scenes(scenes), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def contains_center(bbox: Bbox, point: tuple[float, float]) -> bool:
    """Center-point containment, bounds inclusive."""
    x, y, w, h = bbox
    px, py = point
    return x <= px <= x + w and y <= py <= y + h


def items_in_region(scene: Scene, region_label: str) -> set[int]:
    """Object ids whose bbox center lies inside the labeled region's bbox."""
    for region in scene.regions:
        if region.label == region_label:
            return {it.object_id for it in scene.items if contains_center(region.bbox, it.center)}
    raise UnknownRegion(f"scene {scene.scene_id}: no region labeled {region_label!r}")


def attribute_of(item: Item, attr: str) -> str:
    """The item's stored value for attr; total over valid catalogs."""
    try:
        return item.attributes[attr]
    except KeyError:
        raise UnknownAttribute(
            f"item {item.object_id} ({item.prototype_id}) has no attribute {attr!r}"
        ) from None


def scene_value_universe(scene: Scene, attr: str) -> set[str]:
    """Distinct values of attr over the scene's items."""
    return {attribute_of(it, attr) for it in scene.items}
