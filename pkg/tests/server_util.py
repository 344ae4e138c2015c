"""Run the catalog service on a real socket for protocol tests."""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager

import uvicorn

from narralive.catalog import CatalogStore, create_app


@contextmanager
def live_catalog(store_dir):
    """Serve a store on an ephemeral localhost port; yields the base URL."""
    config = uvicorn.Config(
        create_app(CatalogStore(store_dir)),
        host="127.0.0.1",
        port=0,
        log_level="warning",
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("catalog server did not start within 10 s")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5)
