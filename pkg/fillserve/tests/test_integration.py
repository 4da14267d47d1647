"""Full-wire integration: a live uvicorn server driven through the primary
toolkit's remote fill client."""

import socket
import threading
import time

import pytest
import uvicorn

from fillserve.app import ServeConfig, create_app

from sqlsynth.fill import FillRequest, heuristic_fill, remote_fill
from sqlsynth.masking import MASK, MaskedTemplate
from sqlsynth.sql2eng import to_pseudo_english
from sqlsynth.sqlast import parse_sql


@pytest.fixture(scope="module")
def live_server():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(create_app(ServeConfig()), host="127.0.0.1",
                            port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_remote_fill_against_live_service(live_server):
    pseudo = to_pseudo_english(
        parse_sql("SELECT count(*) FROM head WHERE age > 56"))
    template = MaskedTemplate(("Show", "the", MASK, "of", "each", MASK, "."))
    request = FillRequest(pseudo=pseudo, template=template,
                          num_candidates=4, seed=11)
    remote = remote_fill(request, live_server, timeout=10)
    local = heuristic_fill(request)
    assert [(c.text, c.backend_score) for c in remote] == \
           [(c.text, c.backend_score) for c in local]
    assert remote[0].text == "Show the head of each age ."
