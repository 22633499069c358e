"""Run the HTTP service under uvicorn."""

from __future__ import annotations

import argparse

from . import create_app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bnsense-serve",
        description="Serve the sensitivity-analysis API over HTTP.",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument(
        "--history-cap",
        type=int,
        default=100,
        help="maximum undo depth kept per session",
    )
    parser.add_argument(
        "--ui",
        metavar="DIR",
        default=None,
        help="also serve a built workbench directory at /ui",
    )
    args = parser.parse_args(argv)

    import uvicorn

    app = create_app(history_cap=args.history_cap)
    if args.ui is not None:
        from starlette.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=args.ui, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
