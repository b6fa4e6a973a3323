"""Launcher: `retrievestack --config service.json` or module execution."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import ServiceConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="retrievestack")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--collection", help="override collection TSV path")
    parser.add_argument("--port", type=int)
    args = parser.parse_args(argv)

    config = ServiceConfig.from_json(args.config) if args.config else ServiceConfig()
    if args.collection:
        config.collection = args.collection
    if args.port:
        config.port = args.port
    if not config.collection:
        parser.error("a collection path is required (config file or --collection)")

    app = create_app(config)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
