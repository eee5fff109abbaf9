"""Command-line front end: batch replay reports and the live service."""

from __future__ import annotations

import configparser
import csv as csv_mod
import json
import logging
import os
import sys
import threading
from pathlib import Path

import click

from .clock import RealClock, VirtualClock
from .fixtures import default_floorplan, default_sensors, default_users
from .gateway import BackendConfig, Gateway, HttpBackend, MockBackend
from .har import RuleConfig
from .history import ContextQueue, from_unix, load_activity_csv, render_pre_act
from .ingest import MAX_SPEED, RawReading, normalize, read_records
from .localize import load_floorplan
from .model import HomechatError, load_user_registry
from .pipeline import PARSE_FAILURE_SCORE, InteractionRecord, Pipeline
from .prompts import PromptBuilder

log = logging.getLogger(__name__)

HISTORY_COLUMN_LINES = 8
RULE_ENV_PREFIX = "HOMECHAT_RULE_"


def load_rules(path: str | None, env: dict | None = None) -> RuleConfig:
    """Rules from the [rules] section of an INI file, plus env overrides."""
    mapping: dict = {}
    if path:
        cp = configparser.ConfigParser()
        cp.read(path)
        if cp.has_section("rules"):
            mapping.update(cp["rules"])
    env = env if env is not None else os.environ
    for key, value in env.items():
        if key.startswith(RULE_ENV_PREFIX):
            mapping[key[len(RULE_ENV_PREFIX):].lower()] = value
    return RuleConfig.from_mapping(mapping) if mapping else RuleConfig()


def load_backend_config(path: str | None, backend: str) -> BackendConfig:
    if path:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        data.setdefault("backend_id", backend)
        known = {k: v for k, v in data.items() if k in BackendConfig.__dataclass_fields__}
        return BackendConfig(**known)
    return BackendConfig(backend_id=backend)


def make_gateway(backend: str, backend_config: str | None, clock, trace_path=None) -> Gateway:
    cfg = load_backend_config(backend_config, backend)
    if backend == "mock":
        return Gateway(MockBackend(), cfg, clock=clock, trace_path=trace_path)
    if not cfg.endpoint:
        raise click.UsageError("--backend http needs a backend config file with an endpoint")
    return Gateway(HttpBackend(cfg), cfg, clock=clock, trace_path=trace_path)


def summarize(records: list[InteractionRecord | dict]) -> dict:
    """Count and score stats over valid records (parse-failure sentinels excluded)."""
    scores = []
    per_activity: dict[str, int] = {}
    for rec in records:
        score = rec["score"] if isinstance(rec, dict) else rec.score
        activity = rec["activity"] if isinstance(rec, dict) else rec.activity
        per_activity[activity] = per_activity.get(activity, 0) + 1
        if score != PARSE_FAILURE_SCORE:
            scores.append(score)
    stats = {"count": len(scores), "per_activity": per_activity}
    if scores:
        stats.update(
            mean=sum(scores) / len(scores), min=min(scores), max=max(scores)
        )
    else:
        stats.update(mean=None, min=None, max=None)
    return stats


def _history_column(queue: ContextQueue, rec: InteractionRecord, pre_act_template: str) -> str:
    eps = [e for e in queue.episodes(rec.user) if e.end is not None and e.end <= rec.ts]
    truncated = len(eps) > HISTORY_COLUMN_LINES
    lines = [render_pre_act(e, pre_act_template) for e in eps[-HISTORY_COLUMN_LINES:]]
    if truncated:
        lines.insert(0, "…")
    return " ".join(lines)


def _report_rows(records, queue, builder, top):
    rows = list(records)
    if top is not None:
        rows = sorted(rows, key=lambda r: (-r.score, r.ts))[:top]
    return [
        {
            "activity": r.activity,
            "time": from_unix(r.ts),
            "response": r.response_text,
            "score": r.score,
            "summary": _history_column(queue, r, builder.pre_act_template),
        }
        for r in rows
    ]


def write_report(path: Path, rows: list[dict], stats: dict, fmt: str) -> None:
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv_mod.DictWriter(
                fh, fieldnames=["activity", "time", "response", "score", "summary"]
            )
            writer.writeheader()
            writer.writerows(rows)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# Interaction report\n\n")
        fh.write("| Activity | Time | Response | Score | Summary |\n")
        fh.write("|---|---|---|---|---|\n")
        for r in rows:
            cells = [str(r[k]).replace("|", "\\|") for k in ("activity", "time", "response", "score", "summary")]
            fh.write("| " + " | ".join(cells) + " |\n")
        fh.write("\n")
        if stats["mean"] is None:
            fh.write(f"Interactions: {stats['count']}; no valid scores.\n")
        else:
            fh.write(
                f"Interactions: {stats['count']}; score mean {stats['mean']:g}, "
                f"min {stats['min']}, max {stats['max']}.\n"
            )


def _parse_speed(value: str) -> float:
    if value.upper() == "MAX":
        return MAX_SPEED
    speed = float(value)
    if speed <= 0:
        raise click.BadParameter("speed must be positive or MAX")
    return speed


def _build_environment(floorplan, users, sensors_unused, rules):
    plan = load_floorplan(floorplan) if floorplan else default_floorplan()
    registry = load_user_registry(users) if users else default_users()
    return plan, registry, default_sensors(), load_rules(rules)


def run_replay(
    input_path: str,
    mode: str = "sensors",
    backend: str = "mock",
    out_dir: str = "out",
    fmt: str = "md",
    top: int | None = None,
    speed: str = "MAX",
    skip_bad: bool = False,
    floorplan: str | None = None,
    users: str | None = None,
    rules: str | None = None,
    templates: str | None = None,
    backend_config: str | None = None,
    trace_llm: bool = False,
) -> int:
    """Replay a dataset through the pipeline; returns the process exit code."""
    path = Path(input_path)
    if not path.is_file():
        click.echo(f"error: input file {path} not found", err=True)
        return 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "interactions.jsonl"
    if log_path.exists():
        log_path.unlink()
    clock = VirtualClock()
    builder = PromptBuilder(templates)
    trace_path = out / "llm_trace.jsonl" if trace_llm else None
    try:
        gateway = make_gateway(backend, backend_config, clock, trace_path)
        plan, user_registry, sensors, rule_cfg = _build_environment(
            floorplan, users, None, rules
        )
        skipped = 0
        if mode == "sensors":
            records, skipped = read_records(path, skip_bad=skip_bad)
            pipeline = Pipeline(
                user_registry, sensors, plan, gateway,
                builder=builder, rules=rule_cfg, log_path=log_path,
            )
            from .ingest import event_sort_key

            records.sort(key=event_sort_key)
            pacing = _parse_speed(speed)
            wall = RealClock()
            prev_ts = None
            for rec in records:
                if prev_ts is not None and pacing != MAX_SPEED and rec.ts > prev_ts:
                    wall.sleep((rec.ts - prev_ts) / pacing)
                prev_ts = rec.ts
                if isinstance(rec, RawReading):
                    if rec.sensor_id not in sensors:
                        if not skip_bad:
                            raise HomechatError(f"unknown sensor {rec.sensor_id}")
                        skipped += 1
                        continue
                    pipeline.handle(normalize(rec, sensors.get(rec.sensor_id)))
                else:
                    pipeline.handle(rec)
            pipeline.finish()
            interactions = pipeline.interactions
            queue = pipeline.queue
        elif mode == "activities":
            episodes = load_activity_csv(path)
            queue = ContextQueue()
            interactions = []
            for ep in episodes:
                profile = user_registry.get(ep.user)
                hist = queue.window(ep.user, ep.start, 48 * 3600, 200)
                bundle = builder.build(profile, hist, ep.start, ep.activity, ep.room)
                session = gateway.session(ep.user) or gateway.open_session(
                    ep.user, bundle.system_preamble
                )
                resp = gateway.send(session, bundle)
                rec = InteractionRecord(
                    ts=ep.start,
                    user=ep.user,
                    activity=ep.activity.value,
                    room=ep.room.value,
                    prompt_chars=len(bundle.user_turn),
                    response_text=resp.text,
                    score=resp.score,
                    backend_id=resp.backend_id,
                    latency_ms=resp.latency_ms,
                )
                interactions.append(rec)
                with open(log_path, "a", encoding="utf-8") as fh:
                    fh.write(rec.to_json() + "\n")
                queue.push(ep.user, ep)
        else:
            click.echo(f"error: unknown mode {mode}", err=True)
            return 1
    except (HomechatError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1

    if not log_path.exists():
        log_path.touch()  # zero interactions still produce the log artifact
    stats = summarize(interactions)
    rows = _report_rows(interactions, queue, builder, top)
    write_report(out / f"report.{fmt}", rows, stats, fmt)
    click.echo(
        f"{len(interactions)} interactions -> {log_path}"
        + (f" ({skipped} lines skipped)" if skipped else "")
    )
    return 2 if skipped else 0


@click.group()
def main():
    """Smart-home context-aware assistant pipeline."""
    logging.basicConfig(level=os.environ.get("HOMECHAT_LOG", "WARNING"))


@main.command("replay")
@click.option("--input", "input_path", required=True, help="JSONL sensor trace or activity CSV")
@click.option("--mode", type=click.Choice(["sensors", "activities"]), default="sensors")
@click.option("--backend", type=click.Choice(["mock", "http"]), default="mock")
@click.option("--out", "out_dir", default="out", help="output directory")
@click.option("--format", "fmt", type=click.Choice(["md", "csv"]), default="md")
@click.option("--top", type=int, default=None, help="keep only the K highest-scoring rows")
@click.option("--speed", default="MAX", help="replay speed factor, or MAX")
@click.option("--skip-bad", is_flag=True, help="skip malformed lines instead of failing")
@click.option("--floorplan", default=None, help="floor plan file")
@click.option("--users", default=None, help="user registry config file")
@click.option("--rules", default=None, help="rule config file ([rules] section)")
@click.option("--templates", default=None, help="prompt template directory")
@click.option("--backend-config", default=None, help="backend config JSON (http backend)")
@click.option("--trace-llm", is_flag=True, help="append raw request/response pairs to a log")
def replay_cmd(**kwargs):
    """Replay a recorded dataset and emit an interaction report."""
    sys.exit(run_replay(**kwargs))


@main.command("serve")
@click.option("--source", type=click.Choice(["sim", "mqtt", "replay"]), default="sim")
@click.option("--replay-file", default=None)
@click.option("--speed", default="MAX")
@click.option("--backend", type=click.Choice(["mock", "http"]), default="mock")
@click.option("--broker", default=None, help="MQTT broker URI (default env HOMECHAT_BROKER_URI)")
@click.option("--topic", default="home/#")
@click.option("--log-dir", default="out")
@click.option("--floorplan", default=None)
@click.option("--users", default=None)
@click.option("--rules", default=None)
@click.option("--templates", default=None)
@click.option("--backend-config", default=None)
@click.option("--cooldown", type=int, default=120, help="seconds between prompts per user")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve_cmd(
    source, replay_file, speed, backend, broker, topic, log_dir,
    floorplan, users, rules, templates, backend_config, cooldown, host, port,
):
    """Run the live service (HTTP + WebSocket API for the simulator UI)."""
    import uvicorn

    from .service import LiveService, create_app

    out = Path(log_dir)
    out.mkdir(parents=True, exist_ok=True)
    clock = RealClock()
    builder = PromptBuilder(templates)
    gateway = make_gateway(backend, backend_config, clock)
    plan, user_registry, sensors, rule_cfg = _build_environment(floorplan, users, None, rules)
    pipeline = Pipeline(
        user_registry, sensors, plan, gateway,
        builder=builder, rules=rule_cfg, cooldown=cooldown,
        log_path=out / "interactions.jsonl",
    )
    service = LiveService(pipeline, clock)
    service.start()

    if source == "replay":
        if not replay_file:
            raise click.UsageError("--source replay needs --replay-file")
        from .ingest import replay as replay_stream

        def feed():
            for event in replay_stream(replay_file, sensors, _parse_speed(speed), clock):
                service.enqueue(event)

        threading.Thread(target=feed, daemon=True).start()
    elif source == "mqtt":
        from .mqtt import MqttSubscriber

        uri = broker or os.environ.get("HOMECHAT_BROKER_URI", "mqtt://localhost:1883")

        def feed():
            sub = MqttSubscriber(uri, topic)
            for item in sub.events():
                if isinstance(item, RawReading):
                    if item.sensor_id in sensors:
                        service.enqueue(normalize(item, sensors.get(item.sensor_id)))
                else:
                    service.enqueue(item)

        threading.Thread(target=feed, daemon=True).start()

    app = create_app(service)
    static_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if static_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
