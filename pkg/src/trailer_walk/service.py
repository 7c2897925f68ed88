"""Interactive traversal sessions over HTTP.

A session walks one movie's shot graph step by step: the client sees every
candidate's score breakdown, picks a shot (or lets the greedy rule pick),
and can undo. A session driven only by "auto" choices reproduces the batch
walker exactly, so the service is a faithful interactive view of it.

Movies and graphs are immutable and shared across sessions; each session
serializes its own mutations behind a lock. An optional append-only journal
records every mutating request and is replayed on startup, which restores
all sessions after a crash.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, replace

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .config import EngineConfig, ServiceConfig
from .engine import EngineInputs, prepare
from .ingest import MovieBundle, load_bundle
from .model_core import flow_targets
from .traversal import PathStep, TraversalConfig, covered_tps, step_score

__all__ = ["create_app"]


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field: str | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.field = field


def _error_response(e: _ApiError) -> JSONResponse:
    body = {"code": e.code, "message": e.message}
    if e.field is not None:
        body["field"] = e.field
    return JSONResponse(status_code=e.status, content=body)


def _require(condition, field, message):
    if not condition:
        raise _ApiError(422, "invalid-config", message, field=field)


def _engine_from_request(base: EngineConfig, raw) -> EngineConfig:
    """Apply a request's config overrides onto the served defaults."""
    if raw is None:
        return base
    _require(isinstance(raw, dict), "config", "config must be an object")
    known = {
        "budget",
        "proposals",
        "fill_to_budget",
        "sentiment_mode",
        "rng_seed",
        "weights",
        "spoiler",
    }
    for key in raw:
        _require(key in known, key, f"unknown config key {key!r}")
    updates = {}
    if "budget" in raw:
        _require(isinstance(raw["budget"], int) and raw["budget"] >= 3, "budget", "budget must be an integer >= 3")
        updates["budget"] = raw["budget"]
    if "proposals" in raw:
        _require(
            isinstance(raw["proposals"], int) and raw["proposals"] >= 1,
            "proposals",
            "proposals must be an integer >= 1",
        )
        updates["proposals"] = raw["proposals"]
    if "fill_to_budget" in raw:
        _require(isinstance(raw["fill_to_budget"], bool), "fill_to_budget", "fill_to_budget must be a boolean")
        updates["fill_to_budget"] = raw["fill_to_budget"]
    if "sentiment_mode" in raw:
        _require(
            raw["sentiment_mode"] in ("absolute", "delta"),
            "sentiment_mode",
            'sentiment_mode must be "absolute" or "delta"',
        )
        updates["sentiment_mode"] = raw["sentiment_mode"]
    if "rng_seed" in raw:
        _require(isinstance(raw["rng_seed"], int), "rng_seed", "rng_seed must be an integer")
        updates["rng_seed"] = raw["rng_seed"]
    if "weights" in raw:
        w = raw["weights"]
        _require(isinstance(w, dict), "weights", "weights must be an object")
        for name in w:
            _require(
                name in ("similarity", "proximity", "structure", "sentiment"),
                f"weights.{name}",
                f"unknown criterion {name!r}",
            )
            value = w[name]
            _require(
                isinstance(value, (int, float)) and np.isfinite(value) and value >= 0,
                f"weights.{name}",
                "criterion weights must be finite numbers >= 0",
            )
            updates[f"{name}_weight"] = float(value)
    if "spoiler" in raw:
        s = raw["spoiler"]
        if s is None:
            updates["spoiler_weight"] = 0.0
        else:
            _require(isinstance(s, dict), "spoiler", "spoiler must be an object or null")
            for name in s:
                _require(name in ("weight", "horizon"), f"spoiler.{name}", f"unknown spoiler key {name!r}")
            if "weight" in s:
                _require(
                    isinstance(s["weight"], (int, float)) and np.isfinite(s["weight"]) and s["weight"] >= 0,
                    "spoiler.weight",
                    "spoiler weight must be a finite number >= 0",
                )
                updates["spoiler_weight"] = float(s["weight"])
            if "horizon" in s:
                _require(
                    isinstance(s["horizon"], int) and s["horizon"] >= 1,
                    "spoiler.horizon",
                    "spoiler horizon must be an integer >= 1",
                )
                updates["spoiler_horizon"] = s["horizon"]
    return replace(base, **updates)


@dataclass(frozen=True)
class _State:
    """A session's walk state; everything else derives from it."""

    path: tuple[PathStep, ...]
    visited: frozenset[int]


class _Session:
    def __init__(self, session_id, bundle, inputs, engine_config, raw_config):
        self.id = session_id
        self.bundle: MovieBundle = bundle
        self.inputs: EngineInputs = inputs
        self.engine_config: EngineConfig = engine_config
        self.config: TraversalConfig = engine_config.traversal()
        self.raw_config = raw_config
        self.state = _State(path=(), visited=frozenset())
        self.history: list[_State] = []
        self.lock = threading.Lock()
        self.start_candidates = self._pick_starts()

    def _pick_starts(self) -> list[int]:
        tp = self.inputs.tp_sets
        if tp.sets[0]:
            if tp.scores is not None:
                order = np.argsort(-tp.scores[:, 0], kind="stable")
                ranked = [int(i) for i in order if int(i) in tp.sets[0]]
            else:
                ranked = sorted(tp.sets[0])
            return ranked[: self.config.proposals]
        rng = np.random.default_rng(self.config.rng_seed)
        n = min(self.config.proposals, self.inputs.graph.n_shots)
        return [int(i) for i in rng.choice(self.inputs.graph.n_shots, size=n, replace=False)]

    # -- walk-state queries, all pure in self.state --

    def _covered(self, path=None):
        shots = [p.shot for p in (self.state.path if path is None else path)]
        return covered_tps(shots, self.inputs.tp_sets, self.inputs.graph)

    def _legal(self, shot):
        return [j for j in self.inputs.graph.neighbor_ids(shot) if j not in self.state.visited]

    def termination(self) -> str | None:
        """Why the walk is over, or None while it can still advance.

        Mirrors the batch walker's stop checks: all defined TPs covered
        (only when not filling to budget), then budget, then dead end with
        no single-step backtrack escape.
        """
        path = self.state.path
        if not path:
            return None
        defined = set(self.inputs.tp_sets.defined())
        if not self.config.fill_to_budget and defined and defined <= self._covered():
            return "all-TPs"
        if len(path) >= self.config.budget:
            return "budget"
        if not self._legal(path[-1].shot):
            backtrack = self._legal(path[-2].shot) if len(path) >= 2 else []
            if not backtrack:
                return "dead-end"
        return None

    def needs_backtrack(self) -> bool:
        path = self.state.path
        return bool(path) and not self._legal(path[-1].shot)

    def _scored_candidates(self, current, path):
        covered = self._covered(path)
        k = len(path) + 1
        out = [
            step_score(
                self.inputs.graph,
                current,
                j,
                k,
                self.inputs.intensities,
                self.inputs.tp_sets,
                self.config,
                covered,
            )
            for j in self._legal(current)
        ]
        return sorted(out, key=lambda s: (-s.total, s.shot))

    def candidates(self):
        """(kind, list) for the current state; raises on over/dead states.

        When the head shot has no continuation but the previous shot does,
        the kind is "backtrack": the listed candidates are scored from the
        previous shot, and stepping to one drops the head first, exactly as
        the batch walker does in a single iteration.
        """
        reason = self.termination()
        if reason == "dead-end":
            raise _ApiError(409, "dead-end", "walk is stuck: no legal continuation and backtracking cannot escape; undo to explore another branch")
        if reason is not None:
            raise _ApiError(409, "session-complete", f"walk already ended ({reason}); undo to continue exploring")
        if not self.state.path:
            return "start", self.start_candidates
        if self.needs_backtrack():
            return "backtrack", self._scored_candidates(
                self.state.path[-2].shot, self.state.path[:-1]
            )
        return "step", self._scored_candidates(self.state.path[-1].shot, self.state.path)

    def step(self, choice):
        reason = self.termination()
        if reason is not None:
            raise _ApiError(409, "session-complete", f"walk already ended ({reason})")
        snapshot = self.state
        if not self.state.path:
            if choice == "auto":
                shot = self.start_candidates[0]
            else:
                if choice not in self.start_candidates:
                    raise _ApiError(
                        422,
                        "illegal-choice",
                        f"shot {choice} is not one of the offered start candidates {self.start_candidates}",
                        field="choice",
                    )
                shot = choice
            self.state = _State(path=(PathStep(shot=shot),), visited=frozenset({shot}))
            self.history.append(snapshot)
            return
        path = self.state.path
        if self.needs_backtrack():
            path = path[:-1]
        scored = self._scored_candidates(path[-1].shot, path)
        if choice == "auto":
            best = scored[0]
        else:
            matches = [s for s in scored if s.shot == choice]
            if not matches:
                raise _ApiError(
                    422,
                    "illegal-choice",
                    f"shot {choice} is not a legal continuation (candidates: {[s.shot for s in scored]})",
                    field="choice",
                )
            best = matches[0]
        self.state = _State(
            path=path + (PathStep(shot=best.shot, score=best),),
            visited=self.state.visited | {best.shot},
        )
        self.history.append(snapshot)

    def undo(self):
        if not self.history:
            raise _ApiError(409, "nothing-to-undo", "session has no steps to undo")
        self.state = self.history.pop()


class _MovieStore:
    def __init__(self, bundle_dir: str):
        self.bundle_dir = bundle_dir
        self.paths: dict[str, str] = {}
        self.bundles: dict[str, MovieBundle] = {}
        self.lock = threading.Lock()
        if os.path.isdir(bundle_dir):
            for name in sorted(os.listdir(bundle_dir)):
                if not name.endswith(".json"):
                    continue
                path = os.path.join(bundle_dir, name)
                try:
                    bundle = load_bundle(path)
                except ValueError:
                    continue
                self.paths.setdefault(bundle.movie_id, path)

    def ids(self):
        return sorted(self.paths)

    def get(self, movie_id: str) -> MovieBundle:
        with self.lock:
            if movie_id in self.bundles:
                return self.bundles[movie_id]
            if movie_id not in self.paths:
                raise _ApiError(404, "unknown-movie", f"no bundle for movie {movie_id!r}")
            bundle = load_bundle(self.paths[movie_id])
            self.bundles[movie_id] = bundle
            return bundle


def _step_payload(step: PathStep, config: TraversalConfig, bundle: MovieBundle) -> dict:
    d = {"shot": step.shot}
    ref = bundle.shots[step.shot].thumbnail_ref
    if ref is not None:
        d["thumbnail_ref"] = ref
    if step.score is not None:
        d["criteria"] = {
            "similarity": step.score.similarity,
            "proximity": step.score.proximity,
            "structure": step.score.structure,
            "sentiment_gap": step.score.sentiment_gap,
            "spoiler": step.score.spoiler,
        }
        d["contributions"] = step.score.contributions(config)
        d["total"] = step.score.total
    return d


def create_app(service: ServiceConfig) -> FastAPI:
    app = FastAPI(title="trailer-walk session service")
    # browser frontends are served from their own origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = _MovieStore(service.bundle_dir)
    sessions: dict[str, _Session] = {}
    sessions_lock = threading.Lock()
    journal_lock = threading.Lock()
    default_inputs: dict[str, EngineInputs] = {}
    inputs_lock = threading.Lock()

    def inputs_for(movie_id: str) -> EngineInputs:
        with inputs_lock:
            if movie_id not in default_inputs:
                default_inputs[movie_id] = prepare(store.get(movie_id), service.engine)
            return default_inputs[movie_id]

    @app.exception_handler(_ApiError)
    async def _handle_api_error(request: Request, exc: _ApiError):
        return _error_response(exc)

    def journal_write(event: dict) -> None:
        if service.journal_path is None:
            return
        with journal_lock:
            with open(service.journal_path, "a") as f:
                f.write(json.dumps(event, sort_keys=True) + "\n")

    def make_session(movie_id, raw_config, session_id=None) -> _Session:
        bundle = store.get(movie_id)
        engine = _engine_from_request(service.engine, raw_config)
        try:
            inputs = prepare(bundle, engine)
            session = _Session(
                session_id or uuid.uuid4().hex,
                bundle,
                inputs,
                engine,
                raw_config,
            )
        except ValueError as e:
            raise _ApiError(422, "invalid-config", str(e), field="config")
        with sessions_lock:
            sessions[session.id] = session
        return session

    def get_session(session_id: str) -> _Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise _ApiError(404, "unknown-session", f"no session {session_id!r}")
        return session

    def replay_journal() -> None:
        path = service.journal_path
        if path is None or not os.path.exists(path):
            return
        with open(path) as f:
            for n, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                    kind = event["event"]
                    if kind == "create":
                        make_session(event["movie"], event["config"], session_id=event["session"])
                    elif kind == "step":
                        get_session(event["session"]).step(event["choice"])
                    elif kind == "undo":
                        get_session(event["session"]).undo()
                    else:
                        raise ValueError(f"unknown event {kind!r}")
                except (_ApiError, ValueError, KeyError) as e:
                    detail = e.message if isinstance(e, _ApiError) else str(e)
                    raise RuntimeError(f"journal replay failed at {path}:{n}: {detail}")

    replay_journal()

    def candidates_payload(session: _Session) -> dict:
        kind, items = session.candidates()
        if kind == "start":
            tp = session.inputs.tp_sets
            out = []
            for shot in items:
                d = {"shot": shot}
                if tp.scores is not None:
                    d["tp_scores"] = [float(v) for v in tp.scores[shot]]
                ref = session.bundle.shots[shot].thumbnail_ref
                if ref is not None:
                    d["thumbnail_ref"] = ref
                out.append(d)
            return {"kind": "start", "candidates": out}
        out = []
        for score in items:
            d = _step_payload(PathStep(shot=score.shot, score=score), session.config, session.bundle)
            out.append(d)
        payload = {"kind": kind, "candidates": out}
        if kind == "backtrack":
            payload["resume_at"] = session.state.path[-2].shot
            payload["dropping"] = session.state.path[-1].shot
        return payload

    def path_payload(session: _Session) -> dict:
        state = session.state
        shots = [p.shot for p in state.path]
        reason = session.termination()
        return {
            "session_id": session.id,
            "movie_id": session.bundle.movie_id,
            "budget": session.config.budget,
            "shots": shots,
            "steps": [_step_payload(p, session.config, session.bundle) for p in state.path],
            "flow": {
                "target": [float(v) for v in flow_targets(session.config.schedule)],
                "realized": [float(session.inputs.intensities[s]) for s in shots],
            },
            "tps_covered": sorted(session._covered()),
            "steps_taken": len(session.history),
            "done": reason is not None,
            "terminated": reason,
        }

    @app.get("/movies")
    def list_movies():
        out = []
        for movie_id in store.ids():
            bundle = store.get(movie_id)
            out.append(
                {
                    "movie_id": movie_id,
                    "n_shots": bundle.n_shots,
                    "n_scenes": len(bundle.scenes) if bundle.scenes is not None else 0,
                    "has_tp_labels": any(s.tp_scores is not None for s in bundle.shots)
                    or (
                        bundle.scenes is not None
                        and any(s.tp_labels is not None for s in bundle.scenes)
                    ),
                    "has_sentiment": all(s.sentiment is not None for s in bundle.shots),
                }
            )
        return out

    @app.get("/movies/{movie_id}/graph")
    def movie_graph(movie_id: str):
        bundle = store.get(movie_id)
        inputs = inputs_for(movie_id)
        edges = []
        for src in range(inputs.graph.n_shots):
            for dst, weight in inputs.graph.neighbors(src):
                edges.append({"src": src, "dst": dst, "weight": weight})
        nodes = []
        for shot in bundle.shots:
            d = {
                "shot": shot.id,
                "start_s": shot.start_s,
                "end_s": shot.end_s,
                "intensity": float(inputs.intensities[shot.id]),
                "tps": [t for t in range(1, 6) if shot.id in inputs.tp_sets.sets[t - 1]],
            }
            if shot.thumbnail_ref is not None:
                d["thumbnail_ref"] = shot.thumbnail_ref
            nodes.append(d)
        return {"movie_id": movie_id, "n_shots": inputs.graph.n_shots, "nodes": nodes, "edges": edges}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            payload = await request.json()
        except Exception:
            raise _ApiError(422, "invalid-request", "body must be a JSON object")
        if not isinstance(payload, dict) or "movie_id" not in payload:
            raise _ApiError(422, "invalid-request", "body must carry movie_id", field="movie_id")
        raw_config = payload.get("config")
        session = make_session(payload["movie_id"], raw_config)
        journal_write({"event": "create", "session": session.id, "movie": session.bundle.movie_id, "config": raw_config})
        body = candidates_payload(session)
        body["session_id"] = session.id
        body["movie_id"] = session.bundle.movie_id
        body["budget"] = session.config.budget
        body["flow_target"] = [float(v) for v in flow_targets(session.config.schedule)]
        return body

    @app.get("/sessions/{session_id}/candidates")
    def get_candidates(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return candidates_payload(session)

    @app.post("/sessions/{session_id}/step")
    async def step(session_id: str, request: Request):
        session = get_session(session_id)
        try:
            payload = await request.json()
        except Exception:
            raise _ApiError(422, "invalid-request", "body must be a JSON object")
        choice = payload.get("choice") if isinstance(payload, dict) else None
        if choice != "auto" and (isinstance(choice, bool) or not isinstance(choice, int)):
            raise _ApiError(422, "illegal-choice", 'choice must be a shot id or "auto"', field="choice")
        with session.lock:
            session.step(choice)
            journal_write({"event": "step", "session": session.id, "choice": choice})
            return path_payload(session)

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = get_session(session_id)
        with session.lock:
            session.undo()
            journal_write({"event": "undo", "session": session.id})
            return path_payload(session)

    @app.get("/sessions/{session_id}/path")
    def get_path(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return path_payload(session)

    return app
