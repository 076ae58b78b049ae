"""Versioned artifact files (JSON) and trial logs (JSON Lines).

Artifacts serialize canonically (sorted keys, 2-space indent, no NaN), so a
load/save cycle is byte-identical. Log records are one compact JSON object
per line; the reader skips unparseable lines and reports them with their
line numbers instead of failing, since a torn final write must never poison
a session's history.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bomi import BomiMap
from .iohmm import IohmmModel
from .policy import QFunction, StateLookup, enumerate_pomdp_states

FORMAT_VERSION = 1


class FormatError(ValueError):
    """Raised for unreadable, mis-kinded, or wrong-version artifact files."""


def _plain(value):
    """Recursively convert numpy containers/scalars to JSON-native types."""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _canonical(doc: dict) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _save_document(kind: str, payload: dict, path, provenance=None):
    doc = {"format_version": FORMAT_VERSION, "kind": kind, "payload": payload}
    if provenance is not None:
        doc["provenance"] = provenance
    Path(path).write_text(_canonical(doc))


def load_document(path) -> dict:
    """Read a raw artifact document, checking only that it parses."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: not valid JSON ({err})") from err
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: artifact must be a JSON object")
    return doc


def _load_payload(path, kind: str) -> dict:
    doc = load_document(path)
    got_version = doc.get("format_version")
    if got_version != FORMAT_VERSION:
        raise FormatError(
            f"{path}: format version {got_version!r}, expected {FORMAT_VERSION}")
    got_kind = doc.get("kind")
    if got_kind != kind:
        raise FormatError(f"{path}: artifact kind {got_kind!r}, expected {kind!r}")
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: missing payload")
    return payload


def _field(payload: dict, name: str, path="artifact") -> object:
    if name not in payload:
        raise FormatError(f"{path}: payload missing field {name!r}")
    return payload[name]


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- posture map -------------------------------------------------------


def save_bomi_map(bmap: BomiMap, path, provenance=None):
    payload = {
        "weights": bmap.weights,
        "center": bmap.center,
        "component_sd": bmap.component_sd,
        "window": bmap.window,
    }
    _save_document("bomi_map", payload, path, provenance)


def load_bomi_map(path) -> BomiMap:
    p = _load_payload(path, "bomi_map")
    try:
        return BomiMap(
            weights=np.asarray(_field(p, "weights", path), dtype=float),
            center=np.asarray(_field(p, "center", path), dtype=float),
            component_sd=np.asarray(_field(p, "component_sd", path), dtype=float),
            window=float(_field(p, "window", path)),
        )
    except (TypeError, ValueError) as err:
        raise FormatError(f"{path}: malformed posture map ({err})") from err


# --- learner model -----------------------------------------------------

_IOHMM_ARRAYS = ("init_w", "init_b", "trans_w", "trans_b",
                 "emit_V", "emit_c", "emit_cov")


def save_iohmm(model: IohmmModel, path, provenance=None):
    model.validate()
    payload = {"n_states": model.n_states}
    payload.update({name: getattr(model, name) for name in _IOHMM_ARRAYS})
    _save_document("iohmm", payload, path, provenance)


def load_iohmm(path) -> IohmmModel:
    p = _load_payload(path, "iohmm")
    try:
        model = IohmmModel(
            n_states=int(_field(p, "n_states", path)),
            **{name: np.asarray(_field(p, name, path), dtype=float)
               for name in _IOHMM_ARRAYS})
        model.validate()
    except (TypeError, ValueError) as err:
        raise FormatError(f"{path}: malformed learner model ({err})") from err
    return model


# --- solved policy -----------------------------------------------------


@dataclass(frozen=True)
class PolicyBundle:
    """A solved planner: the Q table plus what is needed to apply it.

    The planner state enumeration is a deterministic function of
    (n_skill, targets), so action selection is reconstructible without the
    transition/reward tensors. `ordering` maps skill rank to the original
    model state label.
    """

    q: np.ndarray
    alpha: float
    gamma: float
    n_skill: int
    targets: tuple
    ordering: np.ndarray

    def qfunction(self) -> QFunction:
        return QFunction(q=self.q, alpha=self.alpha)

    def state_index(self) -> dict:
        states = enumerate_pomdp_states(self.n_skill, list(self.targets))
        return {(s.skill, s.prev_target, s.cur_target): k
                for k, s in enumerate(states)}

    def lookup(self) -> StateLookup:
        return StateLookup(state_index=self.state_index())


def save_policy(bundle: PolicyBundle, path, provenance=None):
    payload = {
        "q": bundle.q,
        "alpha": bundle.alpha,
        "gamma": bundle.gamma,
        "n_skill": bundle.n_skill,
        "targets": list(bundle.targets),
        "ordering": bundle.ordering,
    }
    _save_document("qfunction", payload, path, provenance)


def load_policy(path) -> PolicyBundle:
    p = _load_payload(path, "qfunction")
    try:
        bundle = PolicyBundle(
            q=np.asarray(_field(p, "q", path), dtype=float),
            alpha=float(_field(p, "alpha", path)),
            gamma=float(_field(p, "gamma", path)),
            n_skill=int(_field(p, "n_skill", path)),
            targets=tuple(int(t) for t in _field(p, "targets", path)),
            ordering=np.asarray(_field(p, "ordering", path), dtype=int),
        )
    except (TypeError, ValueError) as err:
        raise FormatError(f"{path}: malformed policy ({err})") from err
    if bundle.q.ndim != 2 or not np.isfinite(bundle.q).all():
        raise FormatError(f"{path}: Q table must be a finite 2-D array")
    return bundle


# --- trial logs --------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    """One completed trial. Simulated trials leave the live-only fields None;
    live trials leave the simulation-only fields None."""

    session: str
    trial: int
    prev_target: int
    cur_target: int
    nudge: int
    slope: float
    re: float | None
    sot: float | None
    state: int | None = None            # true latent rank (simulation)
    cost: float | None = None           # model-mean immediate cost (simulation)
    belief: list | None = None          # pre-trial skill belief
    expected_state: float | None = None
    captured: bool | None = None        # live capture verdict
    truncated: bool | None = None
    end_index: int | None = None
    onset_pose: list | None = None
    trajectory: dict | None = None      # {"t": [...], "x": [...], "y": [...]}
    t_start: float | None = None
    t_end: float | None = None


def record_to_line(record: TrialRecord) -> str:
    doc = _plain(dataclasses.asdict(record))
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      allow_nan=False) + "\n"


def record_from_doc(doc: dict) -> TrialRecord:
    if not isinstance(doc, dict):
        raise ValueError("record line must be a JSON object")
    fields = {f.name for f in dataclasses.fields(TrialRecord)}
    known = {k: v for k, v in doc.items() if k in fields}
    rec = TrialRecord(**known)
    if not isinstance(rec.trial, int) or isinstance(rec.trial, bool):
        raise ValueError("trial index must be an integer")
    return rec


def append_record(path, record: TrialRecord):
    """Append one record as a single write, so readers never see half-merged
    interleavings; a torn tail line is invalid JSON and gets skipped."""
    data = record_to_line(record).encode()
    with open(path, "ab") as fh:
        fh.write(data)
        fh.flush()


def write_records(path, records):
    with open(path, "wb") as fh:
        for rec in records:
            fh.write(record_to_line(rec).encode())


def read_records(path):
    """Parse a trial log. Returns (records, skipped) where skipped lists
    (line_number, reason) for lines that failed to parse."""
    records, skipped = [], []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_doc(json.loads(line)))
            except (ValueError, TypeError) as err:
                skipped.append((lineno, str(err)))
    return records, skipped
