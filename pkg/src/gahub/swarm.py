"""Synthetic volunteer swarm: many asynchronous client loops against a server.

Each client is an independent thread with its own rng, fetching the experiment
config, running GA segments, exchanging migration messages, and optionally
leaving early (churn). Compute heterogeneity is modeled as a per-segment sleep
scaled by speed_factor; no-delay mode disables all sleeps for raw throughput
runs. Plans are deterministic given a seed; wall-clock timings are not.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from . import ga
from .protocol import (
    MigrationReport,
    decode_config,
    decode_reply,
    encode_report,
)

log = logging.getLogger(__name__)

# Measured average volunteer segment time; scale it down for test runs.
DEFAULT_BASE_SEGMENT_DELAY = 2.906

_RETRIES = 3
_BACKOFF = 0.2
_TIMEOUT = (5.0, 30.0)


@dataclass(frozen=True)
class ClientProfile:
    client_id: str
    speed_factor: float = 1.0
    join_time: float = 0.0
    leave_after: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.speed_factor) and self.speed_factor > 0):
            raise ValueError("speed_factor must be finite and positive")
        if self.join_time < 0:
            raise ValueError("join_time must be >= 0")
        if self.leave_after is not None and self.leave_after < 1:
            raise ValueError("leave_after must be >= 1 when set")


@dataclass
class SwarmPlan:
    profiles: list[ClientProfile]
    base_segment_delay: float = DEFAULT_BASE_SEGMENT_DELAY

    def __post_init__(self):
        if not self.profiles:
            raise ValueError("plan must contain at least one profile")
        ids = [p.client_id for p in self.profiles]
        if len(set(ids)) != len(ids):
            raise ValueError("client_ids must be unique")
        if self.base_segment_delay < 0:
            raise ValueError("base_segment_delay must be >= 0")


@dataclass
class ClientRunSummary:
    client_id: str
    segments_done: int = 0
    evaluations_contributed: int = 0
    wall_time: float = 0.0
    best_fitness: float = 0.0
    abnormal: bool = False
    stop_reason: str = "unknown"


@dataclass
class SwarmReport:
    client_summaries: list[ClientRunSummary]
    total_evaluations: int
    total_segments: int
    wall_time_seconds: float
    evaluations_per_second: float
    peak_concurrency: int
    abnormal_exits: int
    rng_algorithm: str = ga.RNG_ALGORITHM

    def to_payload(self) -> dict:
        return {
            "rng_algorithm": self.rng_algorithm,
            "total_evaluations": self.total_evaluations,
            "total_segments": self.total_segments,
            "wall_time_seconds": self.wall_time_seconds,
            "evaluations_per_second": self.evaluations_per_second,
            "peak_concurrency": self.peak_concurrency,
            "abnormal_exits": self.abnormal_exits,
            "clients": [
                {
                    "client_id": s.client_id,
                    "segments_done": s.segments_done,
                    "evaluations_contributed": s.evaluations_contributed,
                    "wall_time": s.wall_time,
                    "best_fitness": s.best_fitness,
                    "abnormal": s.abnormal,
                    "stop_reason": s.stop_reason,
                }
                for s in self.client_summaries
            ],
        }


def _request_with_retries(send, what: str):
    last_exc = None
    for attempt in range(_RETRIES):
        try:
            resp = send()
            if resp.status_code >= 500:
                last_exc = RuntimeError(f"{what}: server error {resp.status_code}")
            else:
                return resp
        except requests.RequestException as exc:
            last_exc = exc
        time.sleep(_BACKOFF * (2**attempt))
    raise ConnectionError(f"{what} failed after {_RETRIES} tries: {last_exc}")


def client_loop(
    profile: ClientProfile,
    server_url: str,
    base_segment_delay: float = DEFAULT_BASE_SEGMENT_DELAY,
    no_delay: bool = False,
    session: requests.Session | None = None,
) -> ClientRunSummary:
    """Fetch config, then run segments and exchange migrations until stopped.

    Stops on a generations_to_run=0 reply (budget reached or stale
    experiment), on reaching leave_after segments ("surfing away"), or after
    bounded network retries (abnormal exit).
    """
    summary = ClientRunSummary(client_id=profile.client_id)
    own_session = session is None
    sess = session or requests.Session()
    started = time.monotonic()
    base = server_url.rstrip("/")
    try:
        resp = _request_with_retries(
            lambda: sess.get(base + "/api/config", timeout=_TIMEOUT), "config fetch"
        )
        config = decode_config(resp.text)
        params = config.ga
        rng = ga.make_rng(profile.rng_seed)
        population = ga.random_population(params, rng)
        generations = config.generations_per_segment

        while True:
            if profile.leave_after is not None and summary.segments_done >= profile.leave_after:
                summary.stop_reason = "left"
                break
            population, segment = ga.run_segment(population, params, generations, rng)
            summary.best_fitness = segment.best.fitness
            if not no_delay and base_segment_delay > 0:
                scale = generations / config.generations_per_segment
                time.sleep(base_segment_delay * profile.speed_factor * scale)

            report = MigrationReport(
                experiment_id=config.experiment_id,
                client_id=profile.client_id,
                segment_index=summary.segments_done + 1,
                best_genome=segment.best.genome,
                best_fitness=segment.best.fitness,
                evaluations_delta=segment.evaluations_delta,
            )
            body = encode_report(report).encode("utf-8")
            resp = _request_with_retries(
                lambda: sess.post(
                    base + "/api/migration",
                    data=body,
                    headers={"Content-Type": "application/json"},
                    timeout=_TIMEOUT,
                ),
                "migration report",
            )
            if resp.status_code != 200:
                summary.abnormal = True
                summary.stop_reason = f"rejected ({resp.status_code})"
                break
            reply = decode_reply(resp.text, params.genome_length)
            if reply.experiment_id != report.experiment_id:
                summary.stop_reason = "stale-experiment"
                break
            summary.segments_done += 1
            summary.evaluations_contributed += segment.evaluations_delta
            if reply.stop:
                summary.stop_reason = "budget"
                break
            immigrant = ga.Individual(
                reply.immigrant_genome,
                ga.royal_road_fitness(
                    reply.immigrant_genome, params.block_size, params.block_reward
                ),
            )
            population = ga.incorporate_immigrant(population, immigrant)
            generations = reply.generations_to_run
    except (ConnectionError, ValueError) as exc:
        log.warning("client %s abnormal exit: %s", profile.client_id, exc)
        summary.abnormal = True
        summary.stop_reason = f"error: {exc}"
    finally:
        if own_session:
            sess.close()
    summary.wall_time = time.monotonic() - started
    return summary


def run_swarm(plan: SwarmPlan, server_url: str, no_delay: bool = False) -> SwarmReport:
    """Launch every profile at its join_time, wait for all, aggregate."""
    summaries: list[ClientRunSummary | None] = [None] * len(plan.profiles)
    intervals: list[tuple[float, float]] = [None] * len(plan.profiles)  # type: ignore[list-item]
    t0 = time.monotonic()

    def run_one(i: int, profile: ClientProfile):
        if profile.join_time > 0:
            time.sleep(profile.join_time)
        start = time.monotonic()
        summaries[i] = client_loop(
            profile, server_url, plan.base_segment_delay, no_delay=no_delay
        )
        intervals[i] = (start, time.monotonic())

    threads = [
        threading.Thread(target=run_one, args=(i, p), name=f"client-{p.client_id[:8]}")
        for i, p in enumerate(plan.profiles)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    done = [s for s in summaries if s is not None]
    total_evals = sum(s.evaluations_contributed for s in done)
    first_start = min(iv[0] for iv in intervals)
    last_end = max(iv[1] for iv in intervals)
    wall = max(last_end - first_start, 1e-9)

    events = []
    for start, end in intervals:
        events.append((start, 1))
        events.append((end, -1))
    events.sort(key=lambda e: (e[0], -e[1]))
    peak = active = 0
    for _, delta in events:
        active += delta
        peak = max(peak, active)

    return SwarmReport(
        client_summaries=done,
        total_evaluations=total_evals,
        total_segments=sum(s.segments_done for s in done),
        wall_time_seconds=wall,
        evaluations_per_second=total_evals / wall,
        peak_concurrency=peak,
        abnormal_exits=sum(1 for s in done if s.abnormal),
    )


# -- plan construction ---------------------------------------------------------


def _parse_speed_spec(spec: str, n: int, rng: np.random.Generator) -> np.ndarray:
    kind, _, args = spec.partition(":")
    try:
        if kind == "constant":
            value = float(args or "1")
            if value <= 0:
                raise ValueError
            return np.full(n, value)
        if kind == "uniform":
            lo, hi = (float(x) for x in args.split(","))
            if not 0 < lo <= hi:
                raise ValueError
            return rng.uniform(lo, hi, size=n)
        if kind == "lognormal":
            sigma = float(args or "0.5")
            if sigma <= 0:
                raise ValueError
            return rng.lognormal(mean=0.0, sigma=sigma, size=n)
    except (ValueError, TypeError):
        raise ValueError(f"bad speed spec {spec!r}") from None
    raise ValueError(f"unknown speed spec kind {kind!r} (constant|uniform|lognormal)")


def make_plan(
    n_clients: int,
    speed_spec: str = "lognormal:0.5",
    churn_spec: str = "none",
    seed: int = 0,
    base_segment_delay: float = DEFAULT_BASE_SEGMENT_DELAY,
    join_spread: float = 0.0,
) -> SwarmPlan:
    """Deterministic plan from a seed.

    speed_spec: "constant:V" | "uniform:LO,HI" | "lognormal:SIGMA" (median 1).
    churn_spec: "none" | "leave:FRAC,LO,HI[,rejoin]" - FRAC of clients leave
    after uniformly LO..HI segments; with rejoin, each leaver is replaced by a
    fresh client joining at the leaver's estimated departure time.
    """
    if n_clients < 1:
        raise ValueError("n_clients must be >= 1")
    rng = ga.make_rng(seed)
    speeds = _parse_speed_spec(speed_spec, n_clients, rng)
    joins = (
        rng.uniform(0.0, join_spread, size=n_clients) if join_spread > 0 else np.zeros(n_clients)
    )

    leave_frac = 0.0
    leave_lo = leave_hi = 1
    rejoin = False
    if churn_spec != "none":
        kind, _, args = churn_spec.partition(":")
        parts = args.split(",") if args else []
        if kind != "leave" or len(parts) not in (3, 4):
            raise ValueError(f"bad churn spec {churn_spec!r} (none|leave:FRAC,LO,HI[,rejoin])")
        if len(parts) == 4:
            if parts[3] != "rejoin":
                raise ValueError(f"bad churn spec {churn_spec!r}")
            rejoin = True
        try:
            leave_frac = float(parts[0])
            leave_lo, leave_hi = int(parts[1]), int(parts[2])
        except ValueError:
            raise ValueError(f"bad churn spec {churn_spec!r}") from None
        if not (0 <= leave_frac <= 1 and 1 <= leave_lo <= leave_hi):
            raise ValueError(f"bad churn spec {churn_spec!r}")

    def fresh_id() -> str:
        return rng.integers(0, 256, size=16, dtype=np.uint8).tobytes().hex()

    def fresh_seed() -> int:
        return int(rng.integers(0, 2**63))

    profiles = []
    rejoiners = []
    for i in range(n_clients):
        leave_after = None
        if leave_frac > 0 and rng.random() < leave_frac:
            leave_after = int(rng.integers(leave_lo, leave_hi + 1))
        profile = ClientProfile(
            client_id=fresh_id(),
            speed_factor=float(speeds[i]),
            join_time=float(joins[i]),
            leave_after=leave_after,
            rng_seed=fresh_seed(),
        )
        profiles.append(profile)
        if leave_after is not None and rejoin:
            rejoiners.append(
                ClientProfile(
                    client_id=fresh_id(),
                    speed_factor=float(speeds[i]),
                    join_time=float(
                        profile.join_time
                        + leave_after * base_segment_delay * profile.speed_factor
                    ),
                    leave_after=None,
                    rng_seed=fresh_seed(),
                )
            )
    return SwarmPlan(profiles=profiles + rejoiners, base_segment_delay=base_segment_delay)


# -- plan (de)serialization ------------------------------------------------------


def plan_to_payload(plan: SwarmPlan) -> dict:
    return {
        "rng_algorithm": ga.RNG_ALGORITHM,
        "base_segment_delay": plan.base_segment_delay,
        "profiles": [
            {
                "client_id": p.client_id,
                "speed_factor": p.speed_factor,
                "join_time": p.join_time,
                "leave_after": p.leave_after,
                "rng_seed": p.rng_seed,
            }
            for p in plan.profiles
        ],
    }


def plan_from_payload(obj: dict) -> SwarmPlan:
    try:
        profiles = [
            ClientProfile(
                client_id=str(p["client_id"]),
                speed_factor=float(p["speed_factor"]),
                join_time=float(p.get("join_time", 0.0)),
                leave_after=(None if p.get("leave_after") is None else int(p["leave_after"])),
                rng_seed=int(p.get("rng_seed", 0)),
            )
            for p in obj["profiles"]
        ]
        return SwarmPlan(
            profiles=profiles,
            base_segment_delay=float(obj.get("base_segment_delay", DEFAULT_BASE_SEGMENT_DELAY)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad plan payload: {exc}") from None


def save_plan(plan: SwarmPlan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan_to_payload(plan), indent=2), encoding="utf-8")


def load_plan(path: str | Path) -> SwarmPlan:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"bad plan file {path}: {exc}") from None
    return plan_from_payload(obj)
