"""HTTP study service: sessions, item queues, answers, and summaries.

The service walks an annotator through a seeded shuffle of the corpus's
(scene, speaker ID) instances. Payloads never carry the gold mapping:
beyond the candidate list (the declared answer space) no gold name appears
anywhere in a served item. ``next`` is idempotent until the current item is
answered; answering anything but the current item is rejected as
out-of-order. Sessions and the annotation log live on disk and survive
restarts; every mutation is persisted before it is acknowledged.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .annotations import (
    AnnotationRecord,
    agreement_report,
    record_from_dict,
    record_to_dict,
    validate_annotation,
)
from .anonymize import MaskedInstanceSet, derive_scene_seed
from .dataset import instance_to_dict
from .errors import (
    EmptyLog,
    NoOverlap,
    OutOfOrder,
    SessionExhausted,
    TvsgError,
    UnknownSession,
    ValidationFailed,
)

import numpy as np


@dataclass
class ServiceConfig:
    corpus: list[MaskedInstanceSet]
    data_dir: Path
    reveal_correct: bool = True


class StudyStore:
    """Session and log state; every mutation hits disk before returning."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.lock = threading.Lock()
        self.by_ref: dict[tuple, MaskedInstanceSet] = {
            inst.scene_ref(): inst for inst in config.corpus
        }
        self.sessions: dict[str, dict] = {}
        self.records: list[AnnotationRecord] = []
        self.sessions_dir = Path(config.data_dir) / "sessions"
        self.log_path = Path(config.data_dir) / "annotations.jsonl"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        for path in sorted(self.sessions_dir.glob("*.json")):
            with open(path, "r", encoding="utf-8") as fh:
                session = json.load(fh)
            self.sessions[session["session_id"]] = session
        if self.log_path.exists():
            with open(self.log_path, "r", encoding="utf-8") as fh:
                for raw in fh:
                    if raw.strip():
                        self.records.append(record_from_dict(json.loads(raw)))

    # -- persistence

    def _persist_session(self, session: dict) -> None:
        path = self.sessions_dir / f"{session['session_id']}.json"
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(session, fh, ensure_ascii=False)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _append_record(self, record: AnnotationRecord) -> None:
        with open(self.log_path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False))
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.records.append(record)

    # -- operations

    def create_session(self, annotator: str, show: str = "", seed: int = 0) -> dict:
        if not annotator:
            raise ValidationFailed(["annotator must be non-empty"])
        with self.lock:
            items = [
                [inst.show, inst.episode_id, inst.scene_index, sid]
                for inst in self.config.corpus
                if not show or inst.show == show
                for sid in sorted(inst.gold)
            ]
            if not items:
                raise ValidationFailed([f"no instances for show {show!r}"])
            items.sort(key=lambda it: (it[0], it[2], it[3]))
            rng = np.random.default_rng(derive_scene_seed(seed, annotator, "__queue__", 0))
            order = rng.permutation(len(items))
            session = {
                "session_id": uuid.uuid4().hex,
                "annotator": annotator,
                "show": show,
                "seed": seed,
                "queue": [items[i] for i in order],
                "cursor": 0,
            }
            self.sessions[session["session_id"]] = session
            self._persist_session(session)
            return session

    def _session(self, session_id: str) -> dict:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def _current_item(self, session: dict) -> tuple[MaskedInstanceSet, str]:
        if session["cursor"] >= len(session["queue"]):
            raise SessionExhausted(
                f"all {len(session['queue'])} items answered"
            )
        show, episode_id, scene_index, sid = session["queue"][session["cursor"]]
        inst = self.by_ref[(show, episode_id, scene_index)]
        return inst, sid

    def next_item(self, session_id: str) -> dict:
        with self.lock:
            session = self._session(session_id)
            inst, sid = self._current_item(session)
            scene = instance_to_dict(inst)
            for hidden in ("gold", "rng_seed", "candidates", "schema"):
                scene.pop(hidden, None)
            return {
                "session_id": session_id,
                "cursor": session["cursor"],
                "total": len(session["queue"]),
                "item": {
                    "scene_ref": {
                        "show": inst.show,
                        "episode_id": inst.episode_id,
                        "scene_index": inst.scene_index,
                    },
                    "speaker_id": sid,
                    "candidates": list(inst.candidates),
                    "lines": scene["lines"],
                },
            }

    def submit_answer(self, session_id: str, payload: dict) -> dict:
        record = record_from_dict(payload)
        with self.lock:
            session = self._session(session_id)
            inst, sid = self._current_item(session)
            if record.annotator_id != session["annotator"]:
                raise ValidationFailed(
                    [f"annotator {record.annotator_id!r} does not own this session"]
                )
            if record.scene_ref() != inst.scene_ref() or record.speaker_id != sid:
                raise OutOfOrder(
                    f"current item is {inst.scene_ref()} / {sid}, "
                    f"got {record.scene_ref()} / {record.speaker_id}"
                )
            report = validate_annotation(record, inst)
            if not report.ok:
                raise ValidationFailed(report.errors)
            self._append_record(record)
            session["cursor"] += 1
            self._persist_session(session)
            correct = record.guess == inst.gold[sid]
            return {
                "correct": correct if self.config.reveal_correct else None,
                "warnings": report.warnings,
            }

    def summary(self) -> dict:
        with self.lock:
            if not self.records:
                raise EmptyLog("no annotations recorded yet")
            per_annotator: dict[str, list[AnnotationRecord]] = {}
            overall: list[bool] = []
            per_show: dict[str, list[bool]] = {}
            per_annotator_acc: dict[str, list[bool]] = {}
            for rec in self.records:
                inst = self.by_ref.get(rec.scene_ref())
                if inst is None or rec.speaker_id not in inst.gold:
                    continue
                ok = rec.guess == inst.gold[rec.speaker_id]
                overall.append(ok)
                per_show.setdefault(rec.show, []).append(ok)
                per_annotator_acc.setdefault(rec.annotator_id, []).append(ok)
                per_annotator.setdefault(rec.annotator_id, []).append(rec)
            agreements = []
            annotators = sorted(per_annotator)
            for i, a in enumerate(annotators):
                for b in annotators[i + 1:]:
                    try:
                        rep = agreement_report(per_annotator[a], per_annotator[b])
                    except NoOverlap:
                        continue
                    agreements.append(
                        {"a": a, "b": b, "n_items": rep.n_items, "groups": rep.groups}
                    )
            return {
                "n_records": len(self.records),
                "annotators": annotators,
                "accuracy": {
                    "overall": sum(overall) / len(overall) if overall else None,
                    "per_show": {
                        show: sum(v) / len(v) for show, v in sorted(per_show.items())
                    },
                    "per_annotator": {
                        a: sum(v) / len(v) for a, v in sorted(per_annotator_acc.items())
                    },
                },
                "agreement": agreements,
                "reveal_mode": "on" if self.config.reveal_correct else "off",
            }


_STATUS = {
    UnknownSession: 404,
    SessionExhausted: 409,
    OutOfOrder: 409,
    EmptyLog: 409,
    ValidationFailed: 422,
}


def create_app(config: ServiceConfig, static_dir: str | Path | None = None) -> FastAPI:
    """Build the API app; optionally serve a static UI bundle at the root."""
    store = StudyStore(config)
    app = FastAPI(title="speaker guessing study")
    app.state.store = store

    @app.exception_handler(TvsgError)
    async def _domain_error(request, exc: TvsgError):
        status = next(
            (code for cls, code in _STATUS.items() if isinstance(exc, cls)), 400
        )
        body = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, ValidationFailed):
            body["problems"] = exc.problems
        return JSONResponse(status_code=status, content=body)

    @app.get("/api/session")
    def create_session(annotator: str, show: str = "", seed: int = 0):
        session = store.create_session(annotator, show, seed)
        return {"session_id": session["session_id"], "total": len(session["queue"])}

    @app.get("/api/session/{session_id}/next")
    def next_item(session_id: str):
        return store.next_item(session_id)

    @app.post("/api/session/{session_id}/answer")
    def submit_answer(session_id: str, payload: dict = Body(...)):
        return store.submit_answer(session_id, payload)

    @app.get("/api/summary")
    def summary():
        return store.summary()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
