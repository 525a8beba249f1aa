"""Scene annotation datasets and their translation into a scene knowledge graph.

Input JSON layout::

    {"scenes": [{"id": ..., "location": ...,
                 "sub_scenes": [{"id": ..., "timestamp": <seconds>,
                                 "objects": [{"id": ..., "category": ...,
                                              "events": [...]}]}]}]}

Ontology config layout::

    {"taxonomy": {"vehicle.car": "vehicle", "vehicle": "FeatureOfInterest"},
     "event_classes": ["parked_car", ...],
     "extra_relations": [...],          # optional
     "time_bucket_seconds": 3600}       # optional, enables hasTimeBucket
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .kg import KnowledgeGraph

FOI_ROOT = "FeatureOfInterest"
EVENT_ROOT = "Event"
SCENE_CLASS = "Scene"

TYPE = "type"
SUBCLASS_OF = "subClassOf"
HAS_SUB_SCENE = "hasSubScene"
HAS_LOCATION = "hasLocation"
INCLUDES = "includes"
IS_PARTICIPANT_OF = "isParticipantOf"
HAS_TIME_BUCKET = "hasTimeBucket"

RELATION_LABELS = (TYPE, SUBCLASS_OF, HAS_SUB_SCENE, HAS_LOCATION, INCLUDES, IS_PARTICIPANT_OF)


class SchemaError(ValueError):
    """Dataset or ontology config does not match the expected layout."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class OntologyError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectRecord:
    id: str
    category: str
    events: tuple[str, ...] = ()


@dataclass(frozen=True)
class SubSceneRecord:
    id: str
    timestamp: float
    objects: tuple[ObjectRecord, ...] = ()


@dataclass(frozen=True)
class SceneRecord:
    id: str
    location: str
    sub_scenes: tuple[SubSceneRecord, ...]


@dataclass(frozen=True)
class SceneDataset:
    scenes: tuple[SceneRecord, ...] = ()

    def sub_scene_ids(self) -> list[str]:
        return [sub.id for sc in self.scenes for sub in sc.sub_scenes]

    def to_json(self) -> str:
        doc = {
            "scenes": [
                {
                    "id": sc.id,
                    "location": sc.location,
                    "sub_scenes": [
                        {
                            "id": sub.id,
                            "timestamp": sub.timestamp,
                            "objects": [
                                {"id": o.id, "category": o.category, "events": list(o.events)}
                                for o in sub.objects
                            ],
                        }
                        for sub in sc.sub_scenes
                    ],
                }
                for sc in self.scenes
            ]
        }
        return json.dumps(doc, indent=1)


@dataclass(frozen=True)
class OntologyConfig:
    foi_taxonomy: dict[str, str]
    event_classes: frozenset[str]
    extra_relations: tuple[str, ...] = ()
    time_bucket_seconds: float | None = None
    relation_labels: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        labels = RELATION_LABELS + ((HAS_TIME_BUCKET,) if self.time_bucket_seconds else ())
        labels += tuple(r for r in self.extra_relations if r not in labels)
        object.__setattr__(self, "relation_labels", labels)

    def ancestors(self, category: str) -> list[str]:
        """Parent chain of ``category`` up to and including the FoI root."""
        chain, seen, node = [], {category}, category
        while node != FOI_ROOT:
            if node not in self.foi_taxonomy:
                raise OntologyError(f"category {category!r} does not resolve to {FOI_ROOT}")
            node = self.foi_taxonomy[node]
            if node in seen:
                raise OntologyError(f"cycle in taxonomy through {node!r}")
            seen.add(node)
            chain.append(node)
        return chain

    def validate(self) -> None:
        for child in self.foi_taxonomy:
            self.ancestors(child)
        clash = self.event_classes & (set(self.foi_taxonomy) | {FOI_ROOT})
        if clash:
            raise OntologyError(f"names used both as event and FoI class: {sorted(clash)}")
        if self.time_bucket_seconds is not None and not self.time_bucket_seconds > 0:
            raise OntologyError("time_bucket_seconds must be positive")


def _expect(value, kind, path):
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(path, f"expected {name}, got {type(value).__name__}")
    return value


def _label(value, path) -> str:
    _expect(value, str, path)
    if not value or any(c in value for c in "\t\n\r"):
        raise SchemaError(path, f"invalid label {value!r}")
    return value


def load_ontology(text: str) -> OntologyConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON ({exc})") from None
    _expect(doc, dict, "$")
    taxonomy = _expect(doc.get("taxonomy", {}), dict, "$.taxonomy")
    for k, v in taxonomy.items():
        _label(k, f"$.taxonomy.{k}")
        _label(v, f"$.taxonomy.{k}")
    events = _expect(doc.get("event_classes", []), list, "$.event_classes")
    for i, ev in enumerate(events):
        _label(ev, f"$.event_classes[{i}]")
    extras = _expect(doc.get("extra_relations", []), list, "$.extra_relations")
    for i, rel in enumerate(extras):
        _label(rel, f"$.extra_relations[{i}]")
    bucket = doc.get("time_bucket_seconds")
    if bucket is not None:
        _expect(bucket, (int, float), "$.time_bucket_seconds")
    cfg = OntologyConfig(dict(taxonomy), frozenset(events), tuple(extras), bucket)
    cfg.validate()
    return cfg


def load_scene_dataset(json_text: str) -> SceneDataset:
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON ({exc})") from None
    _expect(doc, dict, "$")
    if "scenes" not in doc:
        raise SchemaError("$", "missing key 'scenes'")
    raw_scenes = _expect(doc["scenes"], list, "$.scenes")

    scene_ids: set[str] = set()
    sub_ids: set[str] = set()
    object_category: dict[str, str] = {}
    scenes = []
    for i, sc in enumerate(raw_scenes):
        p = f"$.scenes[{i}]"
        _expect(sc, dict, p)
        for key in ("id", "location", "sub_scenes"):
            if key not in sc:
                raise SchemaError(p, f"missing key {key!r}")
        sid = _label(sc["id"], p + ".id")
        if sid in scene_ids:
            raise SchemaError(p + ".id", f"duplicate scene id {sid!r}")
        scene_ids.add(sid)
        location = _label(sc["location"], p + ".location")
        raw_subs = _expect(sc["sub_scenes"], list, p + ".sub_scenes")
        if not raw_subs:
            raise SchemaError(p + ".sub_scenes", "scene has no sub-scenes")
        subs = []
        last_ts = -math.inf
        for j, sub in enumerate(raw_subs):
            q = f"{p}.sub_scenes[{j}]"
            _expect(sub, dict, q)
            for key in ("id", "timestamp"):
                if key not in sub:
                    raise SchemaError(q, f"missing key {key!r}")
            sub_id = _label(sub["id"], q + ".id")
            if sub_id in sub_ids:
                raise SchemaError(q + ".id", f"duplicate sub-scene id {sub_id!r}")
            sub_ids.add(sub_id)
            ts = _expect(sub["timestamp"], (int, float), q + ".timestamp")
            if not math.isfinite(ts) or ts < 0:
                raise SchemaError(q + ".timestamp", f"timestamp must be finite and non-negative, got {ts}")
            if ts < last_ts:
                raise SchemaError(q + ".timestamp", f"timestamp {ts} precedes previous {last_ts}")
            last_ts = ts
            objects = []
            for k, obj in enumerate(_expect(sub.get("objects", []), list, q + ".objects")):
                r = f"{q}.objects[{k}]"
                _expect(obj, dict, r)
                for key in ("id", "category"):
                    if key not in obj:
                        raise SchemaError(r, f"missing key {key!r}")
                oid = _label(obj["id"], r + ".id")
                cat = _label(obj["category"], r + ".category")
                if object_category.setdefault(oid, cat) != cat:
                    raise SchemaError(r + ".category", f"object {oid!r} has conflicting categories")
                evs = _expect(obj.get("events", []), list, r + ".events")
                events = tuple(_label(ev, f"{r}.events[{e}]") for e, ev in enumerate(evs))
                objects.append(ObjectRecord(oid, cat, events))
            subs.append(SubSceneRecord(sub_id, float(ts), tuple(objects)))
        scenes.append(SceneRecord(sid, location, tuple(subs)))
    return SceneDataset(tuple(scenes))


def taxonomy_triples(config: OntologyConfig) -> list[tuple[str, str, str]]:
    config.validate()
    out = [(child, SUBCLASS_OF, parent) for child, parent in sorted(config.foi_taxonomy.items())]
    out += [(ev, SUBCLASS_OF, EVENT_ROOT) for ev in sorted(config.event_classes)]
    return out


def event_instance_id(sub_id: str, event_class: str, object_id: str) -> str:
    return f"{sub_id}/{event_class}/{object_id}"


def time_bucket_label(timestamp: float, bucket_seconds: float) -> str:
    seconds_of_day = timestamp % 86400.0
    return f"time_bucket/{int(seconds_of_day // bucket_seconds)}"


def instance_triples(dataset: SceneDataset, config: OntologyConfig) -> list[tuple[str, str, str]]:
    """Scene/object/event instance triples, in dataset traversal order."""
    out: list[tuple[str, str, str]] = []
    for sc in dataset.scenes:
        out.append((sc.id, TYPE, SCENE_CLASS))
        out.append((sc.id, HAS_LOCATION, sc.location))
        for sub in sc.sub_scenes:
            out.append((sc.id, HAS_SUB_SCENE, sub.id))
            out.append((sub.id, TYPE, SCENE_CLASS))
            if config.time_bucket_seconds:
                out.append((sub.id, HAS_TIME_BUCKET, time_bucket_label(sub.timestamp, config.time_bucket_seconds)))
            for obj in sub.objects:
                if obj.category not in config.foi_taxonomy:
                    raise OntologyError(f"unknown object category {obj.category!r}")
                out.append((sub.id, INCLUDES, obj.id))
                out.append((obj.id, TYPE, obj.category))
                for ev in obj.events:
                    if ev not in config.event_classes:
                        raise OntologyError(f"unknown event class {ev!r}")
                    inst = event_instance_id(sub.id, ev, obj.id)
                    out.append((sub.id, INCLUDES, inst))
                    out.append((inst, TYPE, ev))
                    out.append((obj.id, IS_PARTICIPANT_OF, inst))
    return out


def emit_triples(dataset: SceneDataset, config: OntologyConfig) -> KnowledgeGraph:
    triples = taxonomy_triples(config) + instance_triples(dataset, config)
    return KnowledgeGraph.from_labels(triples, type_relation=TYPE)


def scene_profile(sub: SubSceneRecord) -> frozenset[str]:
    """Set of object categories and event classes appearing in a sub-scene."""
    return frozenset(o.category for o in sub.objects) | frozenset(
        ev for o in sub.objects for ev in o.events
    )


def read_dataset(path) -> SceneDataset:
    with open(path, encoding="utf-8") as fh:
        return load_scene_dataset(fh.read())


def read_ontology(path) -> OntologyConfig:
    with open(path, encoding="utf-8") as fh:
        return load_ontology(fh.read())


def ontology_to_json(config: OntologyConfig) -> str:
    doc: dict[str, Any] = {
        "taxonomy": dict(sorted(config.foi_taxonomy.items())),
        "event_classes": sorted(config.event_classes),
    }
    if config.extra_relations:
        doc["extra_relations"] = list(config.extra_relations)
    if config.time_bucket_seconds:
        doc["time_bucket_seconds"] = config.time_bucket_seconds
    return json.dumps(doc, indent=1)
