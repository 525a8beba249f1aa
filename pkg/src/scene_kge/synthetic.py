"""Desk-scale synthetic scene data with class-correlated events.

Four object categories with 50 instances each are spread over sub-scenes whose
object mix is drawn from a pair of categories. Each category has two
preferred event classes; objects usually participate in one of those. Two
extra "twin" sub-scenes in different scenes share an identical
object/event profile.
"""

from __future__ import annotations

import itertools

import numpy as np

from .scenes import (
    FOI_ROOT,
    ObjectRecord,
    OntologyConfig,
    SceneDataset,
    SceneRecord,
    SubSceneRecord,
)

CATEGORIES = ("vehicle.car", "vehicle.truck", "human.pedestrian", "movable_object.barrier")

TAXONOMY = {
    "vehicle.car": "vehicle",
    "vehicle.truck": "vehicle",
    "vehicle": FOI_ROOT,
    "human.pedestrian": "human",
    "human": FOI_ROOT,
    "movable_object.barrier": "movable_object",
    "movable_object": FOI_ROOT,
}

PREFERRED_EVENTS = {
    "vehicle.car": ("parked_car", "moving_car"),
    "vehicle.truck": ("parked_truck", "moving_truck"),
    "human.pedestrian": ("walking_pedestrian", "standing_pedestrian"),
    "movable_object.barrier": ("static_barrier", "blocking_barrier"),
}

EVENT_CLASSES = tuple(ev for evs in PREFERRED_EVENTS.values() for ev in evs)
TWIN_SUB_SCENES = ("twin_a", "twin_b")


def clustered_ontology() -> OntologyConfig:
    return OntologyConfig(dict(TAXONOMY), frozenset(EVENT_CLASSES))


def clustered_dataset(
    seed: int = 0,
    instances_per_class: int = 50,
    n_scenes: int = 5,
    subs_per_scene: int = 8,
    off_class_event_rate: float = 0.1,
) -> SceneDataset:
    rng = np.random.default_rng(seed)
    pairs = list(itertools.combinations(range(len(CATEGORIES)), 2))
    n_subs = n_scenes * subs_per_scene
    profiles = [pairs[i % len(pairs)] for i in range(n_subs)]

    def events_for(cat: str) -> tuple[str, ...]:
        count = 1 + int(rng.random() < 0.5) + int(rng.random() < 0.5)
        chosen = []
        for _ in range(count):
            if rng.random() < off_class_event_rate:
                pool = [ev for ev in EVENT_CLASSES if ev not in PREFERRED_EVENTS[cat]]
            else:
                pool = list(PREFERRED_EVENTS[cat])
            ev = pool[int(rng.integers(len(pool)))]
            if ev not in chosen:
                chosen.append(ev)
        return tuple(chosen)

    # twins: 2 cars (parked) + 2 pedestrians (walking) each
    twin_cats = (0, 0, 2, 2)
    counters = [0] * len(CATEGORIES)

    def new_object(ci: int, events=None) -> ObjectRecord:
        cat = CATEGORIES[ci]
        oid = f"{cat.split('.')[-1]}_{counters[ci]:03d}"
        counters[ci] += 1
        return ObjectRecord(oid, cat, events if events is not None else events_for(cat))

    twins = {
        name: [new_object(ci, (PREFERRED_EVENTS[CATEGORIES[ci]][0],)) for ci in twin_cats]
        for name in TWIN_SUB_SCENES
    }

    slots: list[list[ObjectRecord]] = [[] for _ in range(n_subs)]
    for ci in range(len(CATEGORIES)):
        hosts = [i for i, p in enumerate(profiles) if ci in p]
        remaining = instances_per_class - counters[ci]
        for j in range(remaining):
            slots[hosts[j % len(hosts)]].append(new_object(ci))

    scenes = []
    locations = ("boston-seaport", "singapore-onenorth")
    for s in range(n_scenes):
        subs = []
        for j in range(subs_per_scene):
            i = s * subs_per_scene + j
            objs = slots[i]
            order = rng.permutation(len(objs))
            subs.append(SubSceneRecord(f"scene{s}_sub{j:02d}", 0.5 * len(subs), tuple(objs[o] for o in order)))
            if s == 0 and j == subs_per_scene // 2:
                subs.append(SubSceneRecord(TWIN_SUB_SCENES[0], 0.5 * len(subs), tuple(twins[TWIN_SUB_SCENES[0]])))
            if s == min(3, n_scenes - 1) and j == subs_per_scene // 2:
                subs.append(SubSceneRecord(TWIN_SUB_SCENES[1], 0.5 * len(subs), tuple(twins[TWIN_SUB_SCENES[1]])))
        scenes.append(SceneRecord(f"scene{s}", locations[s % len(locations)], tuple(subs)))
    return SceneDataset(tuple(scenes))
