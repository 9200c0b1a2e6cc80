"""Command-line front end for reproducible runs.

The CLI is a thin client over the service layer: it reads input files,
builds the same request models the HTTP API accepts, dispatches them
in-process by default (or to a running server via ``--server``), and
writes plot-ready JSON/CSV artifacts plus a run manifest that can be
replayed byte-for-byte.

Exit codes: 0 success, 2 input error, 3 numerical failure,
4 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Dict, Optional

from . import __version__, errors
from .config import apply_overrides, config_from_dict, config_to_dict
from .errors import (
    EntroportError,
    InsufficientData,
    InvalidConfig,
    MalformedInput,
    NoConvergence,
)
from .manifest import (
    atomic_write_text,
    build_manifest,
    canonical_json,
    load_manifest,
    manifest_to_dict,
    sha256_text,
)
from .market_data import synthetic_spec_from_dict, synthetic_spec_to_dict
from .service import handlers
from .service.models import (
    BacktestRequest,
    BacktestResponse,
    OptimizeRequest,
    OptimizeResponse,
    StatsRequest,
    StatsResponse,
    SweepRequest,
    SweepResponse,
    SynthRequest,
    SynthResponse,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_NOCONV = 4

_HANDLERS = {
    "stats": handlers.handle_stats,
    "optimize": handlers.handle_optimize,
    "backtest": handlers.handle_backtest,
    "sweep": handlers.handle_sweep,
    "synth": handlers.handle_synth,
}
_RESPONSE_MODELS = {
    "stats": StatsResponse,
    "optimize": OptimizeResponse,
    "backtest": BacktestResponse,
    "sweep": SweepResponse,
    "synth": SynthResponse,
}


def _read_text(path: str, what: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise MalformedInput(f"cannot read {what} {path}: {exc}") from exc


def _load_json(path: str, what: str) -> tuple[Any, str]:
    text = _read_text(path, what)
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{what} {path} is not valid JSON: {exc}") from exc


def _resolved_config(args) -> Dict[str, Any]:
    """Config file + --set overrides, validated, with defaults materialized."""
    data: Dict[str, Any] = {}
    if args.config:
        data, _ = _load_json(args.config, "config file")
    data = apply_overrides(data, args.set)
    return config_to_dict(config_from_dict(data))


def _market_weights_values(resolved: Dict[str, Any], inputs: dict):
    """Load file-based market weights client-side; record the fingerprint."""
    spec = resolved["optimizer"]["market_weights"]
    if spec == "equal":
        return None
    path = spec["file"]
    data, text = _load_json(path, "market weights file")
    if not isinstance(data, list) or not data or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in data
    ):
        raise MalformedInput(
            f"market weights file {path} must be a nonempty JSON array of numbers"
        )
    inputs["market_weights"] = {"path": path, "sha256": sha256_text(text)}
    return [float(x) for x in data]


def _dispatch(command: str, request, server: Optional[str]):
    if server is None:
        return _HANDLERS[command](request)
    import httpx

    response = httpx.post(
        server.rstrip("/") + "/" + command,
        json=request.model_dump(),
        timeout=600.0,
    )
    if response.status_code == 200:
        return _RESPONSE_MODELS[command].model_validate(response.json())
    try:
        payload = response.json()
    except ValueError:
        raise EntroportError(
            f"server returned status {response.status_code}: {response.text[:200]}"
        ) from None
    name = payload.get("error", "")
    detail = payload.get("detail", f"server returned status {response.status_code}")
    cls = getattr(errors, name, None)
    if not (isinstance(cls, type) and issubclass(cls, EntroportError)):
        cls = MalformedInput if response.status_code == 422 else EntroportError
    if cls is NoConvergence:
        trace = [tuple(step) for step in payload.get("trace", [])]
        raise NoConvergence(str(detail), trace=trace or None)
    raise cls(str(detail))


def _finish(command: str, files: Dict[str, str], config: Dict[str, Any],
            inputs: dict, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    outputs = {name: sha256_text(text) for name, text in files.items()}
    for name, text in files.items():
        atomic_write_text(os.path.join(outdir, name), text)
    manifest = build_manifest(command, config, inputs, outputs, __version__)
    atomic_write_text(
        os.path.join(outdir, f"{command}_manifest.json"),
        canonical_json(manifest_to_dict(manifest)) + "\n",
    )


def _stats_files(resp: StatsResponse) -> Dict[str, str]:
    lines = ["asset_id,mean,variance,entropy"]
    for i, asset in enumerate(resp.asset_ids):
        lines.append(
            f"{asset},{resp.means[i]!r},{resp.variances[i]!r},{resp.entropies[i]!r}"
        )
    return {
        "stats.json": canonical_json(resp.model_dump()) + "\n",
        "stats.csv": "\n".join(lines) + "\n",
    }


def _portfolio_files(resp: OptimizeResponse) -> Dict[str, str]:
    return {"portfolio.json": canonical_json(resp.model_dump()) + "\n"}


def _backtest_files(resp: BacktestResponse) -> Dict[str, str]:
    files = {"backtest_summary.json": canonical_json(resp.model_dump()) + "\n"}
    for strat in resp.strategies:
        lines = ["step,value"]
        lines.extend(f"{i},{v!r}" for i, v in enumerate(strat.value_curve))
        files[f"value_curve_{strat.name}.csv"] = "\n".join(lines) + "\n"
    return files


def _sweep_files(resp: SweepResponse) -> Dict[str, str]:
    lines = [",".join(resp.columns)]
    for row in resp.rows:
        lines.append(",".join("" if v is None else repr(float(v)) for v in row))
    return {f"sweep_{resp.kind}.csv": "\n".join(lines) + "\n"}


def _synth_files(resp: SynthResponse) -> Dict[str, str]:
    return {
        "synthetic_prices.csv": resp.prices_csv,
        "synthetic_returns.csv": resp.returns_csv,
    }


def _prices_inputs(args) -> tuple[str, dict]:
    text = _read_text(args.prices, "price file")
    return text, {"prices": {"path": args.prices, "sha256": sha256_text(text)}}


def _cmd_stats(args) -> None:
    resolved = _resolved_config(args)
    prices_csv, inputs = _prices_inputs(args)
    resp = _dispatch(
        "stats", StatsRequest(prices_csv=prices_csv, config=resolved), args.server
    )
    _finish("stats", _stats_files(resp), resolved, inputs, args.out)


def _cmd_optimize(args) -> None:
    resolved = _resolved_config(args)
    prices_csv, inputs = _prices_inputs(args)
    weights = _market_weights_values(resolved, inputs)
    request = OptimizeRequest(
        prices_csv=prices_csv, config=resolved, market_weights=weights
    )
    resp = _dispatch("optimize", request, args.server)
    _finish("optimize", _portfolio_files(resp), resolved, inputs, args.out)


def _cmd_backtest(args) -> None:
    resolved = _resolved_config(args)
    prices_csv, inputs = _prices_inputs(args)
    weights = _market_weights_values(resolved, inputs)
    request = BacktestRequest(
        prices_csv=prices_csv, config=resolved, market_weights=weights
    )
    resp = _dispatch("backtest", request, args.server)
    _finish("backtest", _backtest_files(resp), resolved, inputs, args.out)


def _cmd_sweep(args) -> None:
    resolved = _resolved_config(args)
    prices_csv, inputs = _prices_inputs(args)
    weights = _market_weights_values(resolved, inputs)
    request = SweepRequest(
        prices_csv=prices_csv, config=resolved, market_weights=weights
    )
    resp = _dispatch("sweep", request, args.server)
    _finish("sweep", _sweep_files(resp), resolved, inputs, args.out)


def _cmd_synth(args) -> None:
    data, text = _load_json(args.spec, "synthetic spec")
    spec = synthetic_spec_from_dict(data)
    resolved = synthetic_spec_to_dict(spec)
    inputs = {"spec": {"path": args.spec, "sha256": sha256_text(text)}}
    resp = _dispatch("synth", SynthRequest(spec=resolved), args.server)
    _finish("synth", _synth_files(resp), resolved, inputs, args.out)


def _cmd_replay(args) -> None:
    manifest = load_manifest(args.manifest)
    command = manifest["command"]
    if command not in _HANDLERS:
        raise MalformedInput(f"manifest command {command!r} is not replayable")
    config = manifest["config"]
    texts: Dict[str, str] = {}
    inputs: Dict[str, dict] = {}
    for label, entry in manifest["inputs"].items():
        text = _read_text(entry["path"], f"recorded {label} input")
        digest = sha256_text(text)
        if digest != entry["sha256"]:
            raise MalformedInput(
                f"input {entry['path']} changed since the manifest was written "
                f"(expected sha256 {entry['sha256']}, got {digest})"
            )
        texts[label] = text
        inputs[label] = {"path": entry["path"], "sha256": digest}

    if command == "synth":
        resp = _dispatch("synth", SynthRequest(spec=config), args.server)
        files = _synth_files(resp)
    else:
        prices_csv = texts["prices"]
        weights = (
            [float(x) for x in json.loads(texts["market_weights"])]
            if "market_weights" in texts
            else None
        )
        if command == "stats":
            request = StatsRequest(prices_csv=prices_csv, config=config)
            files = _stats_files(_dispatch("stats", request, args.server))
        elif command == "optimize":
            request = OptimizeRequest(
                prices_csv=prices_csv, config=config, market_weights=weights
            )
            files = _portfolio_files(_dispatch("optimize", request, args.server))
        elif command == "backtest":
            request = BacktestRequest(
                prices_csv=prices_csv, config=config, market_weights=weights
            )
            files = _backtest_files(_dispatch("backtest", request, args.server))
        else:
            request = SweepRequest(
                prices_csv=prices_csv, config=config, market_weights=weights
            )
            files = _sweep_files(_dispatch("sweep", request, args.server))

    _finish(command, files, config, inputs, args.out)
    recorded = manifest["outputs"]
    mismatched = sorted(
        name for name in recorded
        if sha256_text(files[name]) != recorded[name]
    ) if set(recorded) == set(files) else sorted(set(recorded) ^ set(files))
    if mismatched:
        print(
            f"warning: replay outputs differ from the manifest: {mismatched}",
            file=sys.stderr,
        )


def _add_common(sub, prices_arg: bool = True):
    if prices_arg:
        sub.add_argument("prices", help="price CSV file (header: date,<id1>,...)")
    sub.add_argument("--config", help="run-config JSON file")
    sub.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable), e.g. --set obv.mode=identity",
    )
    sub.add_argument("--out", default=".", help="output directory (default: .)")
    sub.add_argument("--server", help="send the request to a running server URL")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entroport",
        description="Entropy-penalized portfolio optimization toolkit",
    )
    parser.add_argument(
        "--version", action="version", version=f"entroport {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-asset mean/variance/entropy + covariance")
    _add_common(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("optimize", help="solve portfolio weights on the full history")
    _add_common(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("backtest", help="rolling-window strategy comparison")
    _add_common(p)
    p.set_defaults(func=_cmd_backtest)

    p = sub.add_parser("sweep", help="backtest across a temperature or return grid")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("synth", help="generate a deterministic synthetic market")
    p.add_argument("spec", help="synthetic spec JSON file")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--server", help="send the request to a running server URL")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("replay", help="re-run a recorded manifest byte-for-byte")
    p.add_argument("manifest", help="manifest JSON produced by a previous run")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--server", help="send the request to a running server URL")
    p.set_defaults(func=_cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
        return EXIT_OK
    except (MalformedInput, InvalidConfig, InsufficientData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.trace:
            print(
                f"trace: {len(exc.trace)} iterations, last (alpha, beta, qr_market) "
                f"= {exc.trace[-1]}",
                file=sys.stderr,
            )
        return EXIT_NOCONV
    except EntroportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
