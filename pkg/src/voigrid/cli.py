"""Command-line client for the episode service.

Every subcommand talks HTTP to the service layer. By default an in-process
application instance answers the requests, so the CLI works with no running
server; ``--server URL`` (or VOIGRID_SERVER) points the identical client at a
remote instance instead. Option values resolve as defaults < config file <
environment < flags; the config file is flat ``key = value`` lines named
after episode parameters.

Exit codes: 0 success, 2 usage, 3 configuration or infeasibility, 4 episode
hit its step budget.
"""

from __future__ import annotations

import ast
import dataclasses
import json
import sys
import warnings
from pathlib import Path

import click
import httpx

from .engine import SimConfig
from .service import create_app

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_TIMEOUT = 4

# Service error codes that signal a malformed request rather than a bad world.
_USAGE_CODES = frozenset({"InvalidParameterError"})
_SUBCOMMANDS = ("gen-map", "run", "sweep", "showcase", "serve")

# Fixed demonstration scenario: three crossings of one 32x32 terrain under a
# 27-cell budget. The terrain seed is chosen so every endpoint below lands on
# traversable ground.
_SHOWCASE_SEED = 116
_SHOWCASE_STARTS = ((17, 28), (9, 4), (27, 1))
_SHOWCASE_GOALS = ((20, 13), (27, 31), (11, 27))
_SHOWCASE_SUPPORTER = (8, 8)
_SHOWCASE_FRAMEWORKS = "UI,FI0,FI1,MILP0,MILP1"

_SIM_FIELDS = {f.name for f in dataclasses.fields(SimConfig)}


class ServiceClient:
    """Uniform POST/GET wrapper that turns service errors into exit codes."""

    def __init__(self, server: str | None) -> None:
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            # The in-process transport ships in starlette's testclient module;
            # silence its import-time deprecation chatter on stderr.
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            _fail("ConnectionError", str(exc), EXIT_CONFIG)
        if response.status_code == 200:
            return response.json()
        if response.status_code == 422:
            detail = "; ".join(
                f"{'.'.join(str(p) for p in item.get('loc', []))}: {item.get('msg', '')}"
                for item in response.json().get("detail", [])
            )
            _fail("UsageError", detail or "invalid request", EXIT_USAGE)
        try:
            body = response.json()
            code, message = body["code"], body["message"]
        except (ValueError, KeyError):
            code, message = "ServiceError", response.text.strip()
        _fail(code, message, EXIT_USAGE if code in _USAGE_CODES else EXIT_CONFIG)


def _fail(code: str, message: str, exit_code: int) -> None:
    click.echo(f"error: {code}: {message}", err=True)
    sys.exit(exit_code)


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{ln}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(text: str):
    """Interpret config-file values as Python literals, else keep the string."""
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _parse_cells(text: str, flag: str) -> list[list[int]]:
    """Parse 'x,y;x,y;…' into coordinate pairs."""
    cells = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        try:
            x, y = (int(p) for p in parts)
        except ValueError:
            raise click.UsageError(f"{flag} expects 'x,y;x,y;…', got {chunk!r}")
        cells.append([x, y])
    return cells


def _parse_csv_list(text: str, flag: str, cast=str) -> list:
    items = [chunk.strip() for chunk in text.split(",") if chunk.strip()]
    if not items:
        raise click.UsageError(f"{flag} must not be empty")
    try:
        return [cast(item) for item in items]
    except ValueError:
        raise click.UsageError(f"{flag}: could not parse {text!r}")


def _world_payload(map_path: str | None, kind: str, size: int, seed: int) -> dict:
    if map_path is not None:
        return {"map_text": Path(map_path).read_text()}
    return {"world": {"kind": kind, "size": size, "seed": seed}}


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


@click.group(context_settings={"auto_envvar_prefix": "VOIGRID"})
@click.option("--server", envvar="VOIGRID_SERVER", metavar="URL", default=None,
              help="Remote service URL; omit to run in-process.")
@click.option("--config", "config_path", envvar="VOIGRID_CONFIG", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Flat key = value file overriding built-in defaults.")
@click.version_option()
@click.pass_context
def main(ctx: click.Context, server: str | None, config_path: str | None) -> None:
    """Grid-world navigation experiments with budgeted map sharing."""
    file_values = _parse_config_file(config_path) if config_path else {}
    ctx.obj = {"server": server, "file_values": file_values}
    ctx.default_map = {cmd: dict(file_values) for cmd in _SUBCOMMANDS}


def _gen_options(fn):
    fn = click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="Run on a saved map file instead of generating.")(fn)
    fn = click.option("--gen-kind", type=click.Choice(["terrain", "maze"]),
                      default="terrain", show_default=True)(fn)
    fn = click.option("--gen-size", type=int, default=32, show_default=True)(fn)
    fn = click.option("--gen-seed", type=int, default=0, show_default=True)(fn)
    return fn


@main.command("gen-map")
@click.option("--kind", type=click.Choice(["terrain", "maze"]), required=True)
@click.option("--size", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), required=True)
@click.pass_obj
def gen_map(obj: dict, kind: str, size: int, seed: int, out: str) -> None:
    """Generate a map and write it to a file."""
    client = ServiceClient(obj["server"])
    body = client.post("/maps/generate", {"kind": kind, "size": size, "seed": seed})
    Path(out).write_text(body["map_text"])
    click.echo(f"wrote {out}")


@main.command()
@_gen_options
@click.option("--framework", default="MILP1", show_default=True)
@click.option("--seekers", type=int, default=3, show_default=True,
              help="Seeker count when endpoints are sampled.")
@click.option("--starts", default=None, metavar="X,Y;X,Y;…")
@click.option("--goals", default=None, metavar="X,Y;X,Y;…")
@click.option("--supporter-start", default=None, metavar="X,Y")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Endpoint sampling seed and metrics tag.")
@click.option("--bandwidth", type=int, default=27, show_default=True)
@click.option("--b0", type=int, default=1, show_default=True)
@click.option("--period", type=int, default=1, show_default=True)
@click.option("--m", type=int, default=3, show_default=True)
@click.option("--n-seeker", type=int, default=3, show_default=True)
@click.option("--n-supporter", type=int, default=7, show_default=True)
@click.option("--lambda1", type=float, default=1.0, show_default=True)
@click.option("--w1", type=float, default=0.4, show_default=True)
@click.option("--w2", type=float, default=0.6, show_default=True)
@click.option("--alpha", type=float, default=1000.0, show_default=True)
@click.option("--beta", type=float, default=1.0, show_default=True)
@click.option("--sigma", type=float, default=2.0, show_default=True)
@click.option("--roi-weight-order", type=click.Choice(["prose", "reversed"]),
              default="prose", show_default=True)
@click.option("--fi-accounting", type=click.Choice(["broadcast", "per_seeker"]),
              default="broadcast", show_default=True)
@click.option("--lawnmower-spacing", type=int, default=None)
@click.option("--max-steps", type=int, default=None)
@click.option("--metrics-out", type=click.Path(dir_okay=False, writable=True), default=None,
              help="Write metrics JSON here instead of stdout.")
@click.option("--events-out", type=click.Path(dir_okay=False, writable=True), default=None,
              help="Record the event log as JSON lines.")
@click.pass_obj
def run(obj: dict, map_path, gen_kind, gen_size, gen_seed, framework, seekers,
        starts, goals, supporter_start, seed, bandwidth, b0, period, m,
        n_seeker, n_supporter, lambda1, w1, w2, alpha, beta, sigma,
        roi_weight_order, fi_accounting, lawnmower_spacing, max_steps,
        metrics_out, events_out) -> None:
    """Run one episode and write its metrics as JSON."""
    if (starts is None) != (goals is None):
        raise click.UsageError("--starts and --goals must be given together")
    payload = {
        "framework": framework,
        "seekers": seekers,
        "seed": seed,
        "bandwidth": bandwidth,
        "b0": b0,
        "period": period,
        "m": m,
        "n_seeker": n_seeker,
        "n_supporter": n_supporter,
        "lambda1": lambda1,
        "w1": w1,
        "w2": w2,
        "alpha": alpha,
        "beta": beta,
        "sigma": sigma,
        "roi_weight_order": roi_weight_order,
        "fi_accounting": fi_accounting,
        "lawnmower_spacing": lawnmower_spacing,
        "max_steps": max_steps,
        "record_events": events_out is not None,
        **_world_payload(map_path, gen_kind, gen_size, gen_seed),
    }
    if starts is not None:
        payload["starts"] = _parse_cells(starts, "--starts")
        payload["goals"] = _parse_cells(goals, "--goals")
    if supporter_start is not None:
        payload["supporter_start"] = _parse_cells(supporter_start, "--supporter-start")[0]
    body = ServiceClient(obj["server"]).post("/episodes/run", payload)
    events = body.pop("events", None)
    if events_out is not None:
        Path(events_out).write_text(
            "".join(json.dumps(e, sort_keys=True) + "\n" for e in events)
        )
    _write_json(metrics_out, body)
    if not body["metrics"]["completed"]:
        _fail("StepBudgetExceeded", "episode stopped before every seeker finished", EXIT_TIMEOUT)


@main.command()
@_gen_options
@click.option("--frameworks", default="UI,FI1,MILP1", show_default=True, metavar="A,B,…")
@click.option("--bandwidths", default="27", show_default=True, metavar="B1,B2,…")
@click.option("--trials", type=int, default=50, show_default=True)
@click.option("--seed-base", type=int, default=0, show_default=True)
@click.option("--seekers", type=int, default=3, show_default=True)
@click.option("--vary-map", is_flag=True, default=False,
              help="Regenerate the world per trial (generator seed + trial index).")
@click.option("--starts", default=None, metavar="X,Y;X,Y;…",
              help="Pin every trial to these endpoints.")
@click.option("--goals", default=None, metavar="X,Y;X,Y;…")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.pass_obj
def sweep(obj: dict, map_path, gen_kind, gen_size, gen_seed, frameworks, bandwidths,
          trials, seed_base, seekers, vary_map, starts, goals, jobs, out_dir) -> None:
    """Run a paired multi-trial experiment; write CSV and summary artifacts."""
    if (starts is None) != (goals is None):
        raise click.UsageError("--starts and --goals must be given together")
    overrides = {
        key: _coerce(value)
        for key, value in obj["file_values"].items()
        if key in _SIM_FIELDS and key not in ("starts", "goals", "bandwidth", "seed")
    }
    payload = {
        "frameworks": _parse_csv_list(frameworks, "--frameworks"),
        "bandwidths": _parse_csv_list(bandwidths, "--bandwidths", int),
        "trials": trials,
        "seed_base": seed_base,
        "seekers": seekers,
        "vary_map": vary_map,
        "jobs": jobs,
        "overrides": overrides,
        **_world_payload(map_path, gen_kind, gen_size, gen_seed),
    }
    if starts is not None:
        payload["starts"] = _parse_cells(starts, "--starts")
        payload["goals"] = _parse_cells(goals, "--goals")
    body = ServiceClient(obj["server"]).post("/sweeps/run", payload)
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "metrics.csv").write_text(body["metrics_csv"])
    (directory / "summary.json").write_text(
        json.dumps(body["summary"], indent=2, sort_keys=True) + "\n"
    )
    written = ["metrics.csv", "summary.json"]
    if body["tradeoff_csv"] is not None:
        (directory / "tradeoff.csv").write_text(body["tradeoff_csv"])
        written.append("tradeoff.csv")
    click.echo(f"wrote {', '.join(written)} to {directory}")


@main.command()
@click.option("--seed", type=int, default=_SHOWCASE_SEED, show_default=True,
              help="Terrain seed; the endpoint coordinates stay fixed.")
@click.option("--frameworks", default=_SHOWCASE_FRAMEWORKS, show_default=True)
@click.option("--bandwidth", type=int, default=27, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.pass_obj
def showcase(obj: dict, seed: int, frameworks: str, bandwidth: int, out_dir: str) -> None:
    """Replay the fixed three-seeker scenario under every framework."""
    client = ServiceClient(obj["server"])
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    map_text = client.post(
        "/maps/generate", {"kind": "terrain", "size": 32, "seed": seed}
    )["map_text"]
    (directory / "showcase.map").write_text(map_text)
    results = {}
    for label in _parse_csv_list(frameworks, "--frameworks"):
        body = client.post(
            "/episodes/run",
            {
                "framework": label,
                "map_text": map_text,
                "starts": [list(p) for p in _SHOWCASE_STARTS],
                "goals": [list(p) for p in _SHOWCASE_GOALS],
                "supporter_start": list(_SHOWCASE_SUPPORTER),
                "bandwidth": bandwidth,
                "seed": seed,
                "record_events": True,
            },
        )
        events = body.pop("events")
        (directory / f"events-{label}.jsonl").write_text(
            "".join(json.dumps(e, sort_keys=True) + "\n" for e in events)
        )
        results[label] = body["metrics"]
    _write_json(str(directory / "showcase.json"), results)
    click.echo(f"wrote showcase.json and event logs to {directory}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Serve the HTTP API."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
