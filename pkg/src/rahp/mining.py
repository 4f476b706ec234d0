"""Region-description and super-name mining through an LLM HTTP endpoint.

Two modes, exactly one active per request: online (POST to an endpoint,
responses archived and replayed by request hash) and fixture (offline files,
zero network).  Raw responses are parsed by extracting the quoted strings of
the bracketed list following the "Region Descriptions" marker.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    EndpointUnreachable,
    MissingFixture,
    UnparseableResponse,
)
from .prompts import RegionDescriptionSet

ENDPOINT_ENV = "RAHP_LLM_ENDPOINT"

KIND_REGION = "region_descriptions"
KIND_NAMES = "super_names"

_REGION_PROMPT_HEADER = (
    "Describe [{subject}] [{predicate}] [{object}] which parts of subject and "
    "object function in this relationship. Please list these parts, and then "
    "analyze and describe the visual relationship between these parts.\n"
    "The generated description should be concise and clear. "
    "Here are two examples for you to learn:\n\n"
)

_EXAMPLE_A = (
    'Example A: "[human] [holding] [wild animal]":\n'
    "Subject Part : [hand, arm, legs, ...]\n"
    "Object Part : [animal limbs, animal body, ...]\n"
    "Region Descriptions :\n"
    '["human hand(s) securely gripping the animal", '
    '"human arm(s) embracing or supporting the animal", '
    '"animal positioned close to or physically touching the human\'s torso", '
    '"animal appears stable and not struggling", '
    '"direct gaze or interaction between the human and the animal suggesting '
    'control or care", '
    '"human fingers intertwined or wrapped around the animal\'s body or limbs", '
    '"animal\'s posture conveys being held, often with limbs tucked or '
    'supported", '
    '"proximity of the human face to the animal, especially when holding '
    'smaller animals", '
    '"human holding the animal with hands", '
    '"human\'s hands or arms in contact with the animal", '
    '"animal is held in the human\'s arms"]\n'
)

_EXAMPLE_B = (
    'Example B: "[human] [sitting on] [seating furniture]":\n'
    "Subject Part : [buttocks, thighs, legs, back, arms]\n"
    "Object Part : [seat, backrest, armrests]\n"
    "Region Descriptions :\n"
    '["Human\'s buttocks are making contact with the seat of the furniture.", '
    '"Human\'s thighs rest on the seat, with legs positioned either bent or '
    'extended.", '
    '"Human\'s back is supported by the backrest of the furniture.", '
    '"Human\'s arms may be resting on or near the armrests of the furniture, '
    'if present.", '
    '"The furniture\'s seat aligns with the human\'s buttocks and thighs, '
    'indicating proper seating support.", '
    '"The human\'s posture is influenced by the backrest, which can be either '
    'upright or reclining.", '
    '"The armrests, if present, support the human\'s arms, enhancing comfort '
    'and stability.", '
    '"The arrangement of the human\'s legs and feet suggests their interaction '
    'with the seat and alignment with the furniture."]\n'
)

_NAMES_PROMPT = (
    "Task Description: You will be provided with a set of predicates related "
    "to specific actions, states, or relationships. Your task is to generate "
    "an appropriate superclass category name that effectively encapsulates "
    "the common characteristics of these predicates.\n\n"
    "Input: You will receive the following set of predicates.\n{members}\n\n"
    "Output: Please provide a concise and specific superclass category name "
    "that encompasses all the given predicates. The superclass name should be "
    "between one to three words and should use general and easily "
    "understandable vocabulary."
)


def region_mining_prompt(subject: str, predicate: str, obj: str) -> str:
    return (
        _REGION_PROMPT_HEADER.format(subject=subject, predicate=predicate,
                                     object=obj)
        + _EXAMPLE_A + "\n" + _EXAMPLE_B
    )


def super_name_prompt(members) -> str:
    return _NAMES_PROMPT.format(members=", ".join(members))


@dataclass(frozen=True)
class MiningRequest:
    kind: str
    payload: object  # (subj, pred, obj) triplet or list of member-name lists
    endpoint: str | None = None
    fixtures_dir: str | None = None
    archive_dir: str | None = None
    transport: object = None  # callable(url, body: dict) -> dict

    def __post_init__(self):
        if self.kind not in (KIND_REGION, KIND_NAMES):
            raise ValueError(f"unknown mining kind {self.kind!r}")
        endpoint = self.endpoint or os.environ.get(ENDPOINT_ENV)
        if (endpoint is None) == (self.fixtures_dir is None):
            raise ValueError(
                "exactly one of endpoint/fixtures_dir must be active"
            )

    @property
    def resolved_endpoint(self) -> str | None:
        return self.endpoint or os.environ.get(ENDPOINT_ENV)


def _default_transport(url: str, body: dict) -> dict:
    import requests

    try:
        resp = requests.post(url, json=body, timeout=60)
        resp.raise_for_status()
        return resp.json()
    except Exception as exc:  # noqa: BLE001 - collapsed into one error kind
        raise EndpointUnreachable(f"POST {url} failed: {exc}") from exc


def _request_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:32]


def _archive_path(req: MiningRequest, key: str) -> Path | None:
    if req.archive_dir is None:
        return None
    return Path(req.archive_dir) / f"{key}.json"


def _fetch(req: MiningRequest, prompt: str) -> tuple[str, Path | None]:
    """Raw response text for a prompt, served from the archive when cached."""
    key = _request_hash(prompt)
    apath = _archive_path(req, key)
    if apath is not None and apath.exists():
        with open(apath, "r", encoding="utf-8") as fh:
            return json.load(fh)["raw"], apath
    transport = req.transport or _default_transport
    doc = transport(req.resolved_endpoint, {"prompt": prompt})
    try:
        raw = doc["text"]
    except (TypeError, KeyError) as exc:
        raise UnparseableResponse(f"response lacks a 'text' field: {doc!r}") from exc
    if apath is not None:
        apath.parent.mkdir(parents=True, exist_ok=True)
        with open(apath, "w", encoding="utf-8") as fh:
            json.dump({"request": {"prompt": prompt}, "raw": raw}, fh)
    return raw, apath


def _archive_parsed(apath: Path | None, parsed) -> None:
    if apath is None or not apath.exists():
        return
    with open(apath, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    doc["parsed"] = parsed
    with open(apath, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _slug(parts) -> str:
    return "__".join(p.replace(" ", "_") for p in parts)


_MARKER = re.compile(r"region\s+(?:de|re)scriptions?\s*:?", re.IGNORECASE)
_QUOTED = re.compile(r'"((?:[^"\\]|\\.)+?)"')


def parse_region_descriptions(raw: str) -> list[str]:
    """Quoted strings of the bracketed list after the last marker line."""
    matches = list(_MARKER.finditer(raw))
    tail = raw[matches[-1].end():] if matches else raw
    start = tail.find("[")
    if start < 0:
        raise UnparseableResponse("no bracketed description list found")
    end = tail.find("]", start)
    segment = tail[start: end if end > start else len(tail)]
    descs = [m.group(1).strip() for m in _QUOTED.finditer(segment)]
    descs = [d for d in descs if d]
    if not descs:
        raise UnparseableResponse("description list contains no quoted strings")
    return descs


def mine_region_descriptions(req: MiningRequest) -> RegionDescriptionSet:
    """Descriptions for one (subject, predicate, object) triplet."""
    subj, pred, obj = req.payload
    if req.fixtures_dir is not None:
        fpath = Path(req.fixtures_dir) / f"{_slug((subj, pred, obj))}.txt"
        if not fpath.exists():
            raise MissingFixture(f"no fixture for triplet {req.payload!r}")
        raw = fpath.read_text(encoding="utf-8")
        apath = None
    else:
        prompt = region_mining_prompt(subj, pred, obj)
        raw, apath = _fetch(req, prompt)
    descs = parse_region_descriptions(raw)
    _archive_parsed(apath, descs)
    out = RegionDescriptionSet()
    out.put((subj, pred, obj), descs)
    return out


def mine_super_names(req: MiningRequest) -> list[str]:
    """One 1-3 word name per cluster member list, in cluster order."""
    clusters = [list(c) for c in req.payload]
    if any(len(c) == 0 for c in clusters):
        raise ValueError("every cluster must have at least one member")
    names = []
    fixture_map = None
    if req.fixtures_dir is not None:
        fpath = Path(req.fixtures_dir) / "super_names.json"
        if not fpath.exists():
            raise MissingFixture(f"no super_names.json under {req.fixtures_dir}")
        with open(fpath, "r", encoding="utf-8") as fh:
            fixture_map = json.load(fh)
    for members in clusters:
        if fixture_map is not None:
            key = "|".join(sorted(members))
            if key not in fixture_map:
                raise MissingFixture(f"no name fixture for cluster {members!r}")
            name = fixture_map[key]
        else:
            raw, apath = _fetch(req, super_name_prompt(members))
            name = raw.strip().splitlines()[0].strip().strip('"')
            _archive_parsed(apath, name)
        if not 1 <= len(name.split()) <= 3:
            warnings.warn(
                f"super-entity name {name!r} is not 1-3 words", stacklevel=2
            )
        names.append(name)
    return names
