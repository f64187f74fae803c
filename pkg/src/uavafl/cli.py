"""Command-line client of the service.

Requests go to ``--url`` when given, otherwise to an in-process instance of
the app. Success prints the JSON response on stdout; failure prints one JSON
error line on stderr and exits nonzero (2 for domain errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

EXIT_DOMAIN = 2
EXIT_OTHER = 1


def _abs(p: str) -> str:
    return str(Path(p).resolve())


def _config_text(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"configuration file not found: {path}")
    return p.read_text()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavafl", description=__doc__.splitlines()[0])
    ap.add_argument("--url", help="service base URL (default: run in-process)")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="optimize a schedule; writes schedule.csv and trace.csv")
    p.add_argument("config")
    p.add_argument("-o", "--out-dir", default="optimized")

    p = sub.add_parser("simulate", help="train with a schedule; writes a history CSV")
    p.add_argument("config")
    p.add_argument("schedule")
    p.add_argument("-o", "--out", default="history.csv")
    p.add_argument("--error-free", action="store_true", help="aggregate exactly (no radio errors)")
    p.add_argument("--relax", action="append", default=[], choices=["staleness", "mechanics"],
                   help="constraint the schedule is allowed to break (repeatable)")

    p = sub.add_parser("benchmark", help="run every configured strategy and write a report")
    p.add_argument("config")
    p.add_argument("-o", "--out-dir", default="benchmark")

    p = sub.add_parser("report", help="rebuild summary and plot script from a results directory")
    p.add_argument("directory")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return ap


def request_body(args) -> tuple[str, dict]:
    if args.command == "optimize":
        return "/optimize", {"config": _config_text(args.config), "out_dir": _abs(args.out_dir)}
    if args.command == "simulate":
        return "/simulate", {"config": _config_text(args.config), "schedule_csv": _abs(args.schedule),
                             "out_csv": _abs(args.out), "error_free": args.error_free,
                             "relaxed": args.relax}
    if args.command == "benchmark":
        return "/benchmark", {"config": _config_text(args.config), "out_dir": _abs(args.out_dir)}
    return "/report", {"directory": _abs(args.directory)}


def _client(url: str | None):
    if url:
        import httpx

        return httpx.Client(base_url=url, timeout=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # starlette nags about its httpx backend
        from fastapi.testclient import TestClient

    from uavafl.service.app import app

    return TestClient(app, raise_server_exceptions=True)


def _fail(code: str, message: str, kind: str = "", status: int = EXIT_OTHER) -> int:
    line = {"ok": False, "error": code, "kind": kind, "message": message}
    print(json.dumps(line), file=sys.stderr)
    return status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "serve":
        import uvicorn

        uvicorn.run("uavafl.service.app:app", host=args.host, port=args.port)
        return 0
    from uavafl.errors import UavAflError

    try:
        path, body = request_body(args)
        with _client(args.url) as client:
            resp = client.post(path, json=body)
    except FileNotFoundError as exc:
        return _fail("configuration_error", str(exc), "FileNotFoundError", EXIT_DOMAIN)
    except UavAflError as exc:
        return _fail(exc.code, str(exc), type(exc).__name__, EXIT_DOMAIN)
    except Exception as exc:  # transport failures and bugs still get a parseable line
        return _fail("internal_error", str(exc), type(exc).__name__)
    if resp.status_code == 200:
        print(json.dumps(resp.json(), indent=2))
        return 0
    try:
        err = resp.json()
    except ValueError:
        err = {}
    if "error" in err:
        return _fail(err["error"], err.get("message", ""), err.get("kind", ""), EXIT_DOMAIN)
    return _fail("http_error", f"HTTP {resp.status_code}: {resp.text[:500]}", "HTTPError")


if __name__ == "__main__":
    sys.exit(main())
