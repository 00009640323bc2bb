"""HTTP service hosting live human-in-the-loop preference sessions.

Each session is an append-only event log (anchors, proposals, answers)
replayed on startup, so every state transition is durable before the
response leaves the process. Proposals run the same engine as the
batch harness with per-step seeded RNG streams.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .acquisition import AcqConfig, acq_values, incumbent, sobol_pool
from .core import BoxDomain
from .harness import _Engine
from .noise import AnchorModel, loo_bandwidth
from .prefmodel import DuelDataset, DuelRecord

__all__ = ["create_app", "SessionStore"]

COLD_START_DUELS = 3


def _err(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


@dataclass
class Session:
    id: str
    domain: BoxDomain
    a: float
    acq: AcqConfig
    seed: int
    backend: str = "hb"
    gibbs_burn_in: int = 50
    status: str = "collecting_anchors"
    anchors: list = field(default_factory=list)
    bandwidth: float | None = None
    dataset: DuelDataset = None
    pending: dict | None = None
    prev_winner: np.ndarray | None = None
    wall_ms: list = field(default_factory=list)
    created: float = 0.0
    updated: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.dataset is None:
            self.dataset = DuelDataset(dim=self.domain.dim)

    @property
    def answered(self) -> int:
        return self.dataset.m

    def anchor_array(self) -> np.ndarray:
        return (
            np.array(self.anchors)
            if self.anchors
            else np.zeros((0, self.domain.dim))
        )

    def noise_model(self) -> AnchorModel:
        anchors = self.anchor_array()
        if anchors.shape[0] == 0:
            raise _err(409, "no_anchors", "session has no anchors yet")
        bw = self.bandwidth or 0.1 * self.domain.diameter
        return AnchorModel(anchors, bw, self.a)

    def engine(self) -> _Engine:
        return _Engine(
            self.domain, self.noise_model(), self.acq, backend=self.backend,
            gibbs_burn_in=self.gibbs_burn_in,
        )

    def bandwidth_for(self, anchors: np.ndarray) -> float | None:
        if anchors.shape[0] >= 2:
            try:
                return loo_bandwidth(anchors)
            except ValueError:
                return 0.1 * self.domain.diameter
        if anchors.shape[0] == 1:
            return 0.1 * self.domain.diameter
        return self.bandwidth

    def posterior(self, step_tag: int):
        engine = self.engine()
        engine.refit(self.dataset)
        rng = np.random.default_rng([self.seed, self.answered, step_tag])
        return engine, engine.posterior(self.dataset, rng)

    def current_incumbent(self, posterior):
        pts = self.dataset.endpoints_in_query_order()
        if pts.shape[0] == 0:
            return None, None
        x, mu = incumbent(posterior, pts)
        return x, mu


class SessionStore:
    """In-memory sessions backed by per-session JSONL event logs."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        for logfile in sorted(self.data_dir.glob("*.jsonl")):
            session = self._replay(logfile)
            if session is not None:
                self.sessions[session.id] = session

    def _logfile(self, sid: str) -> Path:
        return self.data_dir / f"{sid}.jsonl"

    def append(self, sid: str, event: dict) -> None:
        event = dict(event, ts=time.time())
        line = json.dumps(event, separators=(",", ":"))
        with open(self._logfile(sid), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _replay(self, logfile: Path) -> Session | None:
        session = None
        for line in logfile.read_text().splitlines():
            if not line.strip():
                continue
            ev = json.loads(line)
            kind = ev["type"]
            if kind == "created":
                session = Session(
                    id=ev["id"],
                    domain=BoxDomain(ev["lower"], ev["upper"]),
                    a=ev["a"],
                    acq=AcqConfig(
                        kind=ev["acq_kind"], gamma=ev["gamma"], eta=ev["eta"],
                        pool_per_dim=ev.get("pool_per_dim", 1024),
                    ),
                    seed=ev["seed"],
                    backend=ev.get("backend", "hb"),
                    gibbs_burn_in=ev.get("gibbs_burn_in", 50),
                    created=ev["ts"],
                    updated=ev["ts"],
                )
            elif session is None:
                raise ValueError(f"{logfile}: event before creation")
            elif kind == "anchors_added":
                session.anchors.extend(
                    np.asarray(p, dtype=float) for p in ev["points"]
                )
                session.bandwidth = ev.get("bandwidth", session.bandwidth)
            elif kind == "frozen":
                session.status = "active"
                session.bandwidth = ev.get("bandwidth", session.bandwidth)
            elif kind == "duel_proposed":
                session.pending = {
                    "challenger": np.asarray(ev["challenger"], dtype=float),
                    "reference": np.asarray(ev["reference"], dtype=float),
                }
            elif kind == "duel_answered":
                pending = session.pending
                winner_tag = ev["winner_tag"]
                winner = pending[winner_tag]
                loser = (
                    pending["reference"]
                    if winner_tag == "challenger"
                    else pending["challenger"]
                )
                session.dataset.append(DuelRecord(winner, loser))
                session.prev_winner = winner
                session.pending = None
                session.wall_ms.append(ev.get("wall_ms", 0.0))
            elif kind == "closed":
                session.status = "closed"
            if session is not None:
                session.updated = ev["ts"]
        return session

    def create(self, **kw) -> Session:
        sid = secrets.token_hex(8)
        session = Session(id=sid, created=time.time(), updated=time.time(), **kw)
        with self._lock:
            self.sessions[sid] = session
        self.append(
            sid,
            {
                "type": "created", "id": sid,
                "lower": session.domain.lower.tolist(),
                "upper": session.domain.upper.tolist(),
                "a": session.a, "acq_kind": session.acq.kind,
                "gamma": session.acq.gamma, "eta": session.acq.eta,
                "pool_per_dim": session.acq.pool_per_dim,
                "seed": session.seed, "backend": session.backend,
                "gibbs_burn_in": session.gibbs_burn_in,
            },
        )
        return session

    def get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise _err(404, "unknown_session", f"no session {sid!r}")
        return session


def create_app(data_dir="sessions-data") -> FastAPI:
    app = FastAPI(title="hetpbo live sessions")
    store = SessionStore(data_dir)
    app.state.store = store

    @app.exception_handler(HTTPException)
    async def _http_error(_req: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    def _session_view(s: Session) -> dict:
        return {
            "id": s.id,
            "status": s.status,
            "lower": s.domain.lower.tolist(),
            "upper": s.domain.upper.tolist(),
            "a": s.a,
            "n_anchors": len(s.anchors),
            "bandwidth": s.bandwidth,
            "n_duels": s.answered,
            "pending": None
            if s.pending is None
            else {
                "challenger": s.pending["challenger"].tolist(),
                "reference": s.pending["reference"].tolist(),
            },
            "created": s.created,
            "updated": s.updated,
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        try:
            domain = BoxDomain(body["lower"], body["upper"])
            a = float(body["a"])
            if a <= 0:
                raise ValueError("a must be positive")
            acq = AcqConfig(
                kind=body.get("acq_kind", "anpei"),
                gamma=float(body.get("gamma", 1.0)),
                eta=float(body.get("eta", 2.0)),
                pool_per_dim=int(body.get("pool_per_dim", 1024)),
            )
        except HTTPException:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise _err(400, "invalid_request", str(exc)) from exc
        session = store.create(
            domain=domain, a=a, acq=acq,
            seed=int(body.get("seed", secrets.randbits(31))),
            backend=body.get("backend", "hb"),
            gibbs_burn_in=int(body.get("gibbs_burn_in", 50)),
        )
        return _session_view(session)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _session_view(store.get(sid))

    @app.post("/sessions/{sid}/anchors")
    def submit_anchors(sid: str, body: dict):
        s = store.get(sid)
        with s.lock:
            if s.status != "collecting_anchors":
                raise _err(
                    409, "anchors_frozen",
                    f"session is {s.status}; anchors are immutable",
                )
            points = body.get("points", [])
            parsed = []
            offenders = []
            for p in points:
                arr = np.asarray(p, dtype=float)
                if arr.shape != (s.domain.dim,) or not s.domain.contains(arr):
                    offenders.append(p)
                else:
                    parsed.append(arr)
            if offenders:
                raise _err(
                    400, "out_of_domain",
                    f"points outside the domain: {offenders}",
                )
            if parsed:
                # durable before applied: compute the resulting state, log
                # it, and only then commit it to memory
                candidate = np.vstack([s.anchor_array()] + [p[None, :] for p in parsed]) \
                    if s.anchors else np.vstack([p[None, :] for p in parsed])
                bandwidth = s.bandwidth_for(candidate)
                store.append(
                    sid,
                    {
                        "type": "anchors_added",
                        "points": [p.tolist() for p in parsed],
                        "bandwidth": bandwidth,
                    },
                )
                s.anchors.extend(parsed)
                s.bandwidth = bandwidth
            return {"n": len(s.anchors), "bandwidth": s.bandwidth}

    @app.post("/sessions/{sid}/freeze")
    def freeze(sid: str):
        s = store.get(sid)
        with s.lock:
            if s.status == "closed":
                raise _err(410, "closed", "session is closed")
            if s.status == "active":
                return _session_view(s)
            if not s.anchors:
                raise _err(409, "no_anchors", "freeze requires at least one anchor")
            bandwidth = s.bandwidth_for(s.anchor_array())
            store.append(sid, {"type": "frozen", "bandwidth": bandwidth})
            s.bandwidth = bandwidth
            s.status = "active"
            return _session_view(s)

    @app.get("/sessions/{sid}/duel")
    def next_duel(sid: str):
        s = store.get(sid)
        with s.lock:
            if s.status == "closed":
                raise _err(410, "closed", "session is closed")
            if s.status != "active":
                raise _err(409, "not_active", "freeze anchors before dueling")
            if s.pending is not None:
                raise _err(
                    409, "pending_proposal",
                    "answer the open proposal before requesting another",
                )
            t0 = time.perf_counter()
            if s.answered < COLD_START_DUELS:
                rng = np.random.default_rng([s.seed, 7, s.answered])
                pair = sobol_pool(s.domain, 2, rng)
                challenger, reference = pair[0], pair[1]
                if s.prev_winner is not None:
                    reference = s.prev_winner
                if np.array_equal(challenger, reference):
                    challenger = s.domain.uniform(1, rng)[0]
            else:
                engine = s.engine()
                engine.refit(s.dataset)
                rng = np.random.default_rng([s.seed, s.answered, 0])
                _, proposal = engine.propose(s.dataset, s.prev_winner, rng)
                challenger, reference = proposal.challenger, proposal.reference
            wall = (time.perf_counter() - t0) * 1e3
            pending = {
                "challenger": np.asarray(challenger, dtype=float),
                "reference": np.asarray(reference, dtype=float),
                "wall_ms": wall,
            }
            store.append(
                sid,
                {
                    "type": "duel_proposed",
                    "challenger": pending["challenger"].tolist(),
                    "reference": pending["reference"].tolist(),
                },
            )
            s.pending = pending
            return {
                "challenger": pending["challenger"].tolist(),
                "reference": pending["reference"].tolist(),
                "n_duels": s.answered,
            }

    @app.post("/sessions/{sid}/preference")
    def submit_preference(sid: str, body: dict):
        s = store.get(sid)
        with s.lock:
            if s.status == "closed":
                raise _err(410, "closed", "session is closed")
            if s.pending is None:
                raise _err(409, "no_pending", "no open proposal to answer")
            tag = body.get("winner")
            if tag not in ("challenger", "reference"):
                raise _err(
                    400, "bad_winner",
                    "winner must be 'challenger' or 'reference'",
                )
            winner = s.pending[tag]
            loser = (
                s.pending["reference"] if tag == "challenger"
                else s.pending["challenger"]
            )
            challenger = s.pending["challenger"]
            reference = s.pending["reference"]
            wall = s.pending.get("wall_ms", 0.0)
            store.append(
                sid, {"type": "duel_answered", "winner_tag": tag, "wall_ms": wall}
            )
            s.dataset.append(DuelRecord(winner, loser))
            s.prev_winner = winner
            s.pending = None
            s.wall_ms.append(wall)
            _, post = s.posterior(step_tag=1)
            x_inc, mu_inc = s.current_incumbent(post)
            both = np.vstack([challenger, reference])
            mu, _ = post.mean_var(both)
            sig2 = s.noise_model().variance(both)
            return {
                "n_duels": s.answered,
                "winner": winner.tolist(),
                "incumbent": None if x_inc is None else x_inc.tolist(),
                "incumbent_mean": mu_inc,
                "mu_challenger": float(mu[0]),
                "mu_reference": float(mu[1]),
                "sigma2_challenger": float(sig2[0]),
                "sigma2_reference": float(sig2[1]),
            }

    @app.get("/sessions/{sid}/summary")
    def summary(sid: str, grid: int = 32):
        s = store.get(sid)
        with s.lock:
            if s.status == "closed":
                raise _err(410, "closed", "session is closed")
            if s.status != "active":
                raise _err(409, "not_active", "freeze anchors before summaries")
            grid = max(1, min(int(grid), 4096))
            rng = np.random.default_rng([s.seed, 11, grid])
            pts = sobol_pool(s.domain, grid, rng)
            extra = []
            _, post = s.posterior(step_tag=2)
            x_inc, mu_inc = s.current_incumbent(post)
            if x_inc is not None:
                extra.append(x_inc)
            if s.pending is not None:
                extra.extend([s.pending["challenger"], s.pending["reference"]])
            if extra:
                pts = np.vstack([pts] + [np.atleast_2d(e) for e in extra])
            mu, var = post.mean_var(pts)
            sd = np.sqrt(var)
            sig2 = s.noise_model().variance(pts)
            inc_mean = mu_inc if mu_inc is not None else 0.0
            acq = acq_values(mu, sd, sig2, inc_mean, s.acq)
            rows = [
                {
                    "x": pts[i].tolist(),
                    "mu_f": float(mu[i]),
                    "sigma_f": float(sd[i]),
                    "sigma2_eps": float(sig2[i]),
                    "acq": float(acq[i]),
                }
                for i in range(pts.shape[0])
            ]
            return {
                "rows": rows,
                "incumbent": None if x_inc is None else x_inc.tolist(),
                "incumbent_mean": mu_inc,
                "pending": None
                if s.pending is None
                else {
                    "challenger": s.pending["challenger"].tolist(),
                    "reference": s.pending["reference"].tolist(),
                },
            }

    @app.get("/sessions/{sid}/trace")
    def trace(sid: str):
        s = store.get(sid)
        with s.lock:
            d = s.domain.dim
            cols = (
                ["iteration"] + [f"x_{i + 1}" for i in range(d)]
                + ["f", "sigma2_true", "sigma2_hat", "mv_rho0",
                   "simple_regret", "cum_regret", "wall_ms"]
            )
            noise = s.noise_model() if s.anchors else None
            lines = [",".join(cols)]
            for k, rec in enumerate(s.dataset.records, start=1):
                x = rec.winner  # the queried pair's resolved winner location
                s2 = (
                    float(noise.variance(x[None, :])[0]) if noise else float("nan")
                )
                wall = s.wall_ms[k - 1] if k - 1 < len(s.wall_ms) else 0.0
                vals = (
                    [str(k)] + [repr(float(v)) for v in x]
                    + ["nan", "nan", repr(s2), "nan", "nan", "nan",
                       repr(float(wall))]
                )
                lines.append(",".join(vals))
            return PlainTextResponse(
                "\n".join(lines) + "\n", media_type="text/csv"
            )

    @app.post("/sessions/{sid}/close")
    def close(sid: str):
        s = store.get(sid)
        with s.lock:
            if s.status != "closed":
                store.append(sid, {"type": "closed"})
                s.status = "closed"
            return _session_view(s)

    return app
