#!/usr/bin/env python3
"""Regenerate the bundled desk-scale fixture pack.

Writes data/metadata.json (90 item prototypes) and data/scenes.json
(10 store scenes, ~27 items each, on a 1920x1080 canvas).  Deterministic:
re-running reproduces the committed files byte for byte.

Scene f01 is laid out so that the "far right shelf" region contains exactly
the items with object ids 12, 13, 16, 22 and 31 (bbox centers inside), which
the region-query tests pin down.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SEED = 20240613
CANVAS = (1920, 1080)

FASHION_TYPES = ["jacket", "t-shirt", "dress", "coat", "hoodie", "skirt", "jeans", "sweater", "blouse", "shirt"]
FURNITURE_TYPES = ["sofa", "chair", "table", "bed", "shelf", "couch chair", "lamp"]
FASHION_MATERIALS = ["natural fibers", "wool", "leather", "silk"]
FURNITURE_MATERIALS = ["metal", "marble", "plastic", "leather", "wool"]
FASHION_PATTERNS = ["floral pattern", "leopard print", "star design", "diamond style", "stripes", "checkered", "plain"]
FURNITURE_PATTERNS = ["plain", "stripes", "checkered", "floral pattern"]
FASHION_PRICES = ["$19", "$29", "$49", "$79", "$99", "$129", "$199", "$299"]
FURNITURE_PRICES = ["$49", "$99", "$129", "$199", "$299", "$499"]
FASHION_SIZES = ["XS", "S", "M", "L", "XL", "XXL"]
FURNITURE_SIZES = ["compact", "medium size", "large"]
SLEEVES = ["short", "half", "full"]

# Disjoint region slots: (position prefix, bbox)
REGION_SLOTS = [
    ("back left", (60, 80, 520, 400)),
    ("back middle", (650, 80, 520, 400)),
    ("back right", (1240, 80, 560, 400)),
    ("front left", (60, 560, 520, 420)),
    ("front middle", (650, 560, 520, 420)),
    ("front right", (1240, 560, 560, 420)),
]
FASHION_FIXTURE_NAMES = ["rack", "display table", "display wall", "floor rack", "closet", "wardrobe"]
FURNITURE_FIXTURE_NAMES = ["shelf", "display table", "showcase", "platform"]

# (scene_id, domain, item count, region count); f01 is hand-laid below.
SCENE_PLAN = [
    ("f02", "fashion", 26, 4),
    ("f03", "fashion", 24, 3),
    ("f04", "fashion", 29, 5),
    ("f05", "fashion", 31, 4),
    ("f06", "fashion", 22, 3),
    ("f07", "fashion", 27, 4),
    ("u01", "furniture", 25, 3),
    ("u02", "furniture", 30, 2),
    ("u03", "furniture", 26, 0),
]


def load_spaces() -> dict[str, list[str]]:
    blocks = json.loads((ROOT / "data" / "ontology.json").read_text(encoding="utf-8"))
    return {b["attribute"]: b["value_space"] for b in blocks}


def make_metadata(rng: random.Random, spaces: dict[str, list[str]]) -> dict[str, dict[str, str]]:
    colors = spaces["color"]
    brands = spaces["brand"]
    reviews = spaces["customer_review"]
    metadata: dict[str, dict[str, str]] = {}
    for i in range(60):
        metadata[f"p_fash_{i:03d}"] = {
            "type": rng.choice(FASHION_TYPES),
            "color": rng.choice(colors),
            "pattern": rng.choice(FASHION_PATTERNS),
            "material": rng.choice(FASHION_MATERIALS),
            "price": rng.choice(FASHION_PRICES),
            "brand": rng.choice(brands),
            "size": rng.choice(FASHION_SIZES),
            "customer_review": rng.choice(reviews),
            "sleeve_length": rng.choice(SLEEVES),
        }
    for i in range(30):
        metadata[f"p_furn_{i:03d}"] = {
            "type": rng.choice(FURNITURE_TYPES),
            "color": rng.choice(colors),
            "pattern": rng.choice(FURNITURE_PATTERNS),
            "material": rng.choice(FURNITURE_MATERIALS),
            "price": rng.choice(FURNITURE_PRICES),
            "brand": rng.choice(brands),
            "size": rng.choice(FURNITURE_SIZES),
            "customer_review": rng.choice(reviews),
        }
    return metadata


def item_size(rng: random.Random, domain: str) -> tuple[int, int]:
    if domain == "fashion":
        return rng.randint(70, 110), rng.randint(100, 150)
    return rng.randint(120, 240), rng.randint(110, 220)


def bbox_with_center_in(rng: random.Random, region: tuple, size: tuple[int, int]) -> list[int]:
    rx, ry, rw, rh = region
    w, h = size
    cx = rng.randint(int(rx) + 2, int(rx + rw) - 2)
    cy = rng.randint(int(ry) + 2, int(ry + rh) - 2)
    return [max(0, cx - w // 2), max(0, cy - h // 2), w, h]


def bbox_outside_regions(rng: random.Random, regions: list[tuple], size: tuple[int, int]) -> list[int]:
    w, h = size
    while True:
        cx = rng.randint(w // 2 + 1, CANVAS[0] - w // 2 - 1)
        cy = rng.randint(h // 2 + 1, CANVAS[1] - h // 2 - 1)
        clear = all(
            not (rx - 6 <= cx <= rx + rw + 6 and ry - 6 <= cy <= ry + rh + 6)
            for rx, ry, rw, rh in regions
        )
        if clear:
            return [cx - w // 2, cy - h // 2, w, h]


def pick_regions(rng: random.Random, domain: str, count: int) -> list[dict]:
    slots = rng.sample(REGION_SLOTS, count)
    names = FASHION_FIXTURE_NAMES if domain == "fashion" else FURNITURE_FIXTURE_NAMES
    return [
        {"label": f"{prefix} {rng.choice(names)}", "bbox": list(bbox)}
        for prefix, bbox in slots
    ]


def make_scene(rng, scene_id, domain, n_items, n_regions, protos) -> dict:
    regions = pick_regions(rng, domain, n_regions)
    region_boxes = [tuple(r["bbox"]) for r in regions]
    items = []
    for oid in range(n_items):
        size = item_size(rng, domain)
        if regions and rng.random() < 0.75:
            bbox = bbox_with_center_in(rng, rng.choice(region_boxes), size)
        else:
            bbox = bbox_outside_regions(rng, region_boxes, size)
        items.append({"object_id": oid, "prototype_id": rng.choice(protos), "bbox": bbox})
    return {"scene_id": scene_id, "domain": domain, "items": items, "regions": regions}


def make_scene_f01(rng, protos) -> dict:
    """Hand-laid scene: the far right shelf covers exactly ids 12/13/16/22/31."""
    regions = [
        {"label": "back left rack", "bbox": [60, 80, 520, 400]},
        {"label": "front middle display table", "bbox": [650, 620, 520, 380]},
        {"label": "far right shelf", "bbox": [1450, 150, 420, 700]},
    ]
    shelf_ids = {12, 13, 16, 22, 31}
    region_boxes = [tuple(r["bbox"]) for r in regions]
    items = []
    for oid in range(32):
        size = item_size(rng, "fashion")
        if oid in shelf_ids:
            bbox = bbox_with_center_in(rng, region_boxes[2], size)
        elif oid % 3 == 0:
            bbox = bbox_with_center_in(rng, region_boxes[0], size)
        elif oid % 3 == 1:
            bbox = bbox_with_center_in(rng, region_boxes[1], size)
        else:
            bbox = bbox_outside_regions(rng, region_boxes, size)
        items.append({"object_id": oid, "prototype_id": rng.choice(protos), "bbox": bbox})
    return {"scene_id": "f01", "domain": "fashion", "items": items, "regions": regions}


def main() -> None:
    rng = random.Random(SEED)
    spaces = load_spaces()
    metadata = make_metadata(rng, spaces)
    fash = sorted(p for p in metadata if p.startswith("p_fash"))
    furn = sorted(p for p in metadata if p.startswith("p_furn"))

    scenes = [make_scene_f01(rng, fash)]
    for scene_id, domain, n_items, n_regions in SCENE_PLAN:
        protos = fash if domain == "fashion" else furn
        scenes.append(make_scene(rng, scene_id, domain, n_items, n_regions, protos))

    data = ROOT / "data"
    data.joinpath("metadata.json").write_text(
        json.dumps(metadata, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    data.joinpath("scenes.json").write_text(
        json.dumps(scenes, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    counts = [len(s["items"]) for s in scenes]
    print(f"wrote {len(scenes)} scenes, avg {sum(counts) / len(counts):.1f} items/scene")


if __name__ == "__main__":
    main()
