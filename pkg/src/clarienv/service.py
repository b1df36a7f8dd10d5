"""HTTP environment service: episodes as a step/reward API.

External trainers create an episode, post agent questions to the step endpoint,
and collect the simulator's responses and turn-level rewards over the wire.
Sessions live in memory, are serialized per episode (a lock per session, so no
turn index is ever issued twice), and expire after idle time.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import (
    JudgeError,
    PipelineError,
    ProviderUnavailableError,
    ScriptError,
    UsageError,
)
from .reward import RewardConfig
from .simulator import (
    Episode,
    SimulatorConfig,
    create_episode,
    is_done,
    step,
)
from .summarizer import summarize
from .traversal import IntentSet

DEFAULT_IDLE_EXPIRY_S = 30 * 60


@dataclass
class EpisodeSession:
    episode: Episode
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_access: float = 0.0


def _error(status_code: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status_code, content={"error": message})


def create_app(
    embedder,
    user_chat,
    judge_chat=None,
    summary_chat=None,
    simulator_config: SimulatorConfig | None = None,
    id_factory=None,
    clock=time.monotonic,
    idle_expiry_s: float = DEFAULT_IDLE_EXPIRY_S,
    auth_token: str | None = None,
    transcript_log: str | None = None,
) -> FastAPI:
    """Build the service. `id_factory` and `clock` are injectable so recorded
    transcripts replay byte-identically under deterministic providers."""
    app = FastAPI(title="clarienv environment service")
    sessions: dict[str, EpisodeSession] = {}
    sessions_lock = threading.Lock()
    base_config = simulator_config or SimulatorConfig()
    make_id = id_factory or (lambda: uuid.uuid4().hex)
    log_lock = threading.Lock()

    def log_event(event: dict) -> None:
        if transcript_log is None:
            return
        with log_lock:
            with open(transcript_log, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, ensure_ascii=False) + "\n")

    def check_auth(request: Request) -> JSONResponse | None:
        if auth_token is not None:
            if request.headers.get("x-auth-token") != auth_token:
                return _error(401, "missing or invalid auth token")
        return None

    def get_session(episode_id: str):
        with sessions_lock:
            session = sessions.get(episode_id)
            if session is None:
                return None, _error(404, f"unknown episode {episode_id!r}")
            if clock() - session.last_access > idle_expiry_s:
                del sessions[episode_id]
                return None, _error(410, f"episode {episode_id!r} has expired")
            session.last_access = clock()
            return session, None

    @app.post("/v1/episodes")
    async def create(request: Request):
        denied = check_auth(request)
        if denied:
            return denied
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be a JSON object")
        if not isinstance(body, dict):
            return _error(400, "body must be a JSON object")
        simple_query = body.get("simple_query")
        intents = body.get("intents")
        if not isinstance(simple_query, str) or not simple_query.strip():
            return _error(400, "simple_query must be a non-empty string")
        if not isinstance(intents, list) or not intents or not all(
            isinstance(i, str) and i.strip() for i in intents
        ):
            return _error(400, "intents must be a non-empty list of texts")
        max_turns = body.get("max_turns", base_config.max_turns)
        stage = body.get("stage", "II")
        if not isinstance(max_turns, int) or max_turns < 1:
            return _error(400, "max_turns must be a positive integer")
        if stage not in ("I", "II"):
            return _error(400, "stage must be 'I' or 'II'")
        config = SimulatorConfig(
            tau_rep=base_config.tau_rep,
            tau_rel=base_config.tau_rel,
            max_turns=max_turns,
            reward=RewardConfig(
                beta=base_config.reward.beta,
                gamma=base_config.reward.gamma,
                stage=stage,
                format_mode=base_config.reward.format_mode,
            ),
            insignificance_judging=base_config.insignificance_judging,
        )
        episode_id = make_id()
        try:
            episode = create_episode(
                simple_query, intents, config, embedder,
                user_chat=user_chat, judge_chat=judge_chat,
                episode_id=episode_id,
            )
        except ProviderUnavailableError as exc:
            return _error(503, str(exc))
        except UsageError as exc:
            return _error(400, str(exc))
        with sessions_lock:
            sessions[episode_id] = EpisodeSession(
                episode=episode, last_access=clock()
            )
        log_event({"event": "create", "episode_id": episode_id,
                   "simple_query": simple_query})
        return JSONResponse(status_code=201, content={"episode_id": episode_id})

    @app.post("/v1/episodes/{episode_id}/step")
    async def step_endpoint(episode_id: str, request: Request):
        denied = check_auth(request)
        if denied:
            return denied
        session, err = get_session(episode_id)
        if err:
            return err
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be a JSON object")
        question = body.get("question") if isinstance(body, dict) else None
        if not isinstance(question, str) or not question.strip():
            return _error(400, "question must be a non-empty string")
        targets = None
        raw_targets = body.get("target_intents")
        if raw_targets is not None:
            if not isinstance(raw_targets, list) or not all(
                isinstance(t, str) for t in raw_targets
            ):
                return _error(400, "target_intents must be a list of texts")
            if raw_targets:
                targets = IntentSet(intents=tuple(raw_targets), node_ids=())
        with session.lock:
            if is_done(session.episode):
                return _error(409, "episode is done")
            try:
                outcome = step(session.episode, question,
                               target_intents_for_reward=targets)
            except (ProviderUnavailableError, ScriptError, JudgeError) as exc:
                return _error(503, str(exc))
            except UsageError as exc:
                return _error(409, str(exc))
        payload = {
            "turn": outcome.turn,
            "status": outcome.status,
            "response": outcome.response,
            "reward": outcome.reward.to_json(),
            "c_rep": outcome.c_rep,
            "c_div": outcome.c_div,
            "done": outcome.done,
        }
        log_event({"event": "step", "episode_id": episode_id,
                   "question": question, **payload})
        return JSONResponse(status_code=200, content=payload)

    @app.post("/v1/episodes/{episode_id}/summarize")
    async def summarize_endpoint(episode_id: str, request: Request):
        denied = check_auth(request)
        if denied:
            return denied
        session, err = get_session(episode_id)
        if err:
            return err
        if summary_chat is None:
            return _error(503, "no summary provider configured")
        with session.lock:
            if not session.episode.history:
                return _error(409, "episode has no turns to summarize")
            try:
                refined = summarize(session.episode, summary_chat)
            except (ProviderUnavailableError, ScriptError, PipelineError) as exc:
                return _error(503, str(exc))
        payload = {"refined_query": refined.text}
        log_event({"event": "summarize", "episode_id": episode_id, **payload})
        return JSONResponse(status_code=200, content=payload)

    return app
