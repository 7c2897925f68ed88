import json

import pytest
from fastapi.testclient import TestClient

from trailer_walk.config import ServiceConfig, default_config
from trailer_walk.engine import prepare
from trailer_walk.ingest import save_bundle
from trailer_walk.service import create_app
from trailer_walk.traversal import traverse

from conftest import full_bundle


@pytest.fixture
def bundle_dir(tmp_path):
    d = tmp_path / "bundles"
    d.mkdir()
    save_bundle(full_bundle(m=24, seed=3, movie_id="demo"), d / "demo.json")
    save_bundle(full_bundle(m=12, seed=5, movie_id="tiny"), d / "tiny.json")
    return d


@pytest.fixture
def client(bundle_dir):
    app = create_app(ServiceConfig(bundle_dir=str(bundle_dir)))
    return TestClient(app)


def drive_auto(client, session_id, limit=64):
    body = None
    for _ in range(limit):
        r = client.post(f"/sessions/{session_id}/step", json={"choice": "auto"})
        assert r.status_code == 200, r.text
        body = r.json()
        if body["done"]:
            return body
    raise AssertionError("walk never finished")


class TestMovies:
    def test_listing(self, client):
        r = client.get("/movies")
        assert r.status_code == 200
        ids = [m["movie_id"] for m in r.json()]
        assert ids == ["demo", "tiny"]
        demo = r.json()[0]
        assert demo["n_shots"] == 24
        assert demo["has_tp_labels"] is True

    def test_graph_matches_engine(self, client, bundle_dir):
        r = client.get("/movies/demo/graph")
        assert r.status_code == 200
        doc = r.json()
        bundle = full_bundle(m=24, seed=3, movie_id="demo")
        inputs = prepare(bundle, default_config())
        expected = [
            (src, dst, w)
            for src in range(inputs.graph.n_shots)
            for dst, w in inputs.graph.neighbors(src)
        ]
        got = [(e["src"], e["dst"], e["weight"]) for e in doc["edges"]]
        assert got == [(s, d, pytest.approx(w)) for s, d, w in expected]
        assert len(doc["nodes"]) == 24

    def test_unknown_movie_404(self, client):
        r = client.get("/movies/nope/graph")
        assert r.status_code == 404
        assert r.json()["code"] == "unknown-movie"


class TestCreateSession:
    def test_created_with_start_candidates(self, client):
        r = client.post("/sessions", json={"movie_id": "demo"})
        assert r.status_code == 201, r.text
        body = r.json()
        assert body["kind"] == "start"
        assert 1 <= len(body["candidates"]) <= 5
        assert all("tp_scores" in c for c in body["candidates"])
        assert body["budget"] == 10
        assert len(body["flow_target"]) == 10

    def test_unknown_movie(self, client):
        r = client.post("/sessions", json={"movie_id": "nope"})
        assert r.status_code == 404
        assert r.json()["code"] == "unknown-movie"

    def test_negative_weight_rejected_with_field(self, client):
        r = client.post(
            "/sessions",
            json={"movie_id": "demo", "config": {"weights": {"proximity": -1}}},
        )
        assert r.status_code == 422
        body = r.json()
        assert body["code"] == "invalid-config"
        assert body["field"] == "weights.proximity"

    def test_unknown_config_key_rejected(self, client):
        r = client.post("/sessions", json={"movie_id": "demo", "config": {"budgets": 5}})
        assert r.status_code == 422
        assert r.json()["field"] == "budgets"

    def test_bad_budget_rejected(self, client):
        r = client.post("/sessions", json={"movie_id": "demo", "config": {"budget": 2}})
        assert r.status_code == 422
        assert r.json()["field"] == "budget"


class TestCandidates:
    def test_sorted_and_recombining(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        r = client.get(f"/sessions/{session}/candidates")
        assert r.status_code == 200
        body = r.json()
        assert body["kind"] == "step"
        totals = [c["total"] for c in body["candidates"]]
        assert totals == sorted(totals, reverse=True)
        for c in body["candidates"]:
            assert sum(c["contributions"].values()) == pytest.approx(c["total"], abs=1e-9)

    def test_start_kind_before_first_step(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        r = client.get(f"/sessions/{session}/candidates")
        assert r.json()["kind"] == "start"

    def test_unknown_session(self, client):
        r = client.get("/sessions/nope/candidates")
        assert r.status_code == 404
        assert r.json()["code"] == "unknown-session"


class TestStepAndUndo:
    def test_all_auto_equals_batch_traverse(self, client):
        create = client.post("/sessions", json={"movie_id": "demo"}).json()
        final = drive_auto(client, create["session_id"])

        bundle = full_bundle(m=24, seed=3, movie_id="demo")
        config = default_config()
        inputs = prepare(bundle, config)
        start = create["candidates"][0]["shot"]
        expected = traverse(
            inputs.graph, inputs.tp_sets, inputs.intensities, config.traversal(), start
        )
        assert tuple(final["shots"]) == expected.shot_ids
        assert final["terminated"] == expected.terminated_reason
        assert final["flow"]["realized"] == pytest.approx(list(expected.flow_trace))
        assert final["tps_covered"] == sorted(expected.tps_covered)

    def test_step_undo_restores_serialized_state(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        before_path = client.get(f"/sessions/{session}/path").json()
        before_cands = client.get(f"/sessions/{session}/candidates").json()
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        undo = client.post(f"/sessions/{session}/undo")
        assert undo.status_code == 200
        after_path = client.get(f"/sessions/{session}/path").json()
        after_cands = client.get(f"/sessions/{session}/candidates").json()
        assert json.dumps(before_path, sort_keys=True) == json.dumps(after_path, sort_keys=True)
        assert json.dumps(before_cands, sort_keys=True) == json.dumps(after_cands, sort_keys=True)

    def test_step_after_undo_reproduces_state(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        first = client.post(f"/sessions/{session}/step", json={"choice": "auto"}).json()
        client.post(f"/sessions/{session}/undo")
        again = client.post(f"/sessions/{session}/step", json={"choice": "auto"}).json()
        assert json.dumps(first, sort_keys=True) == json.dumps(again, sort_keys=True)

    def test_manual_choice_diverges(self, client):
        a = client.post("/sessions", json={"movie_id": "demo"}).json()
        b = client.post("/sessions", json={"movie_id": "demo"}).json()
        client.post(f"/sessions/{a['session_id']}/step", json={"choice": "auto"})
        client.post(f"/sessions/{b['session_id']}/step", json={"choice": "auto"})
        cands = client.get(f"/sessions/{a['session_id']}/candidates").json()["candidates"]
        assert len(cands) >= 2
        auto = client.post(
            f"/sessions/{b['session_id']}/step", json={"choice": "auto"}
        ).json()
        manual = client.post(
            f"/sessions/{a['session_id']}/step", json={"choice": cands[1]["shot"]}
        ).json()
        assert manual["shots"][:1] == auto["shots"][:1]
        assert manual["shots"] != auto["shots"]

    def test_illegal_choice(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        r = client.post(f"/sessions/{session}/step", json={"choice": 9999})
        assert r.status_code == 422
        assert r.json()["code"] == "illegal-choice"

    def test_illegal_start_choice(self, client):
        create = client.post("/sessions", json={"movie_id": "demo"}).json()
        offered = {c["shot"] for c in create["candidates"]}
        outsider = next(i for i in range(24) if i not in offered)
        r = client.post(f"/sessions/{create['session_id']}/step", json={"choice": outsider})
        assert r.status_code == 422

    def test_undo_on_empty_session(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        r = client.post(f"/sessions/{session}/undo")
        assert r.status_code == 409
        assert r.json()["code"] == "nothing-to-undo"

    def test_step_after_completion_conflicts(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        drive_auto(client, session)
        r = client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        assert r.status_code == 409
        assert r.json()["code"] == "session-complete"

    def test_undo_reopens_completed_session(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        final = drive_auto(client, session)
        undo = client.post(f"/sessions/{session}/undo").json()
        assert undo["done"] is False
        assert len(undo["shots"]) == len(final["shots"]) - 1
        redo = client.post(f"/sessions/{session}/step", json={"choice": "auto"}).json()
        assert redo["shots"] == final["shots"]

    def test_steps_taken_counts_history(self, client):
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        path = client.get(f"/sessions/{session}/path").json()
        assert path["steps_taken"] == 2
        client.post(f"/sessions/{session}/undo")
        path = client.get(f"/sessions/{session}/path").json()
        assert path["steps_taken"] == 1


class TestBacktrack:
    @pytest.fixture
    def stuck_client(self, tmp_path):
        # seed 0 produces a walk whose head runs out of continuations while
        # the previous shot still has some: the backtrack case.
        d = tmp_path / "bundles"
        d.mkdir()
        save_bundle(full_bundle(m=24, seed=0, movie_id="twisty"), d / "twisty.json")
        return TestClient(create_app(ServiceConfig(bundle_dir=str(d))))

    def _drive_to_backtrack(self, client):
        session = client.post("/sessions", json={"movie_id": "twisty"}).json()["session_id"]
        for _ in range(64):
            body = client.get(f"/sessions/{session}/candidates").json()
            if body.get("kind") == "backtrack":
                return session, body
            client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        raise AssertionError("walk never hit a backtrack state")

    def test_backtrack_candidates_offer_previous_shots_options(self, stuck_client):
        session, body = self._drive_to_backtrack(stuck_client)
        path = stuck_client.get(f"/sessions/{session}/path").json()
        assert body["dropping"] == path["shots"][-1]
        assert body["resume_at"] == path["shots"][-2]
        assert body["candidates"]
        offered = [c["shot"] for c in body["candidates"]]
        assert all(shot > body["resume_at"] for shot in offered)

    def test_stepping_through_backtrack_drops_the_head(self, stuck_client):
        session, body = self._drive_to_backtrack(stuck_client)
        before = stuck_client.get(f"/sessions/{session}/path").json()["shots"]
        choice = body["candidates"][0]["shot"]
        after = stuck_client.post(
            f"/sessions/{session}/step", json={"choice": choice}
        ).json()["shots"]
        assert after == before[:-1] + [choice]
        # the dropped shot stays visited: it is never offered again
        r = stuck_client.get(f"/sessions/{session}/candidates").json()
        assert before[-1] not in [c["shot"] for c in r.get("candidates", [])]

    def test_illegal_choice_in_backtrack_state(self, stuck_client):
        session, body = self._drive_to_backtrack(stuck_client)
        dead_head = stuck_client.get(f"/sessions/{session}/path").json()["shots"][-1]
        r = stuck_client.post(f"/sessions/{session}/step", json={"choice": dead_head})
        assert r.status_code == 422
        assert r.json()["code"] == "illegal-choice"

    def test_undo_restores_the_dropped_head(self, stuck_client):
        session, body = self._drive_to_backtrack(stuck_client)
        before = stuck_client.get(f"/sessions/{session}/path").json()
        stuck_client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        stuck_client.post(f"/sessions/{session}/undo")
        after = stuck_client.get(f"/sessions/{session}/path").json()
        assert json.dumps(before, sort_keys=True) == json.dumps(after, sort_keys=True)

    def test_all_auto_through_backtrack_equals_batch(self, stuck_client):
        create = stuck_client.post("/sessions", json={"movie_id": "twisty"}).json()
        final = drive_auto(stuck_client, create["session_id"])
        bundle = full_bundle(m=24, seed=0, movie_id="twisty")
        config = default_config()
        inputs = prepare(bundle, config)
        expected = traverse(
            inputs.graph,
            inputs.tp_sets,
            inputs.intensities,
            config.traversal(),
            create["candidates"][0]["shot"],
        )
        assert tuple(final["shots"]) == expected.shot_ids
        assert final["terminated"] == expected.terminated_reason


class TestDeadEnd:
    def test_dead_end_conflict_with_hint(self, bundle_dir, tmp_path):
        # 4-shot movie, default budget 10: the walk runs out of forward
        # moves long before the budget and cannot backtrack out.
        save_bundle(full_bundle(m=4, seed=7, movie_id="short"), bundle_dir / "short.json")
        client = TestClient(create_app(ServiceConfig(bundle_dir=str(bundle_dir))))
        session = client.post("/sessions", json={"movie_id": "short"}).json()["session_id"]
        body = drive_auto(client, session)
        assert body["terminated"] == "dead-end"
        r = client.get(f"/sessions/{session}/candidates")
        assert r.status_code == 409
        assert r.json()["code"] == "dead-end"
        assert "undo" in r.json()["message"]


class TestConcurrentSessions:
    def test_interleaved_sessions_do_not_interfere(self, client):
        a = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        b = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        solo = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        reference = drive_auto(client, solo)
        done = {a: None, b: None}
        while any(v is None for v in done.values()):
            for sid in (a, b):
                if done[sid] is None:
                    body = client.post(f"/sessions/{sid}/step", json={"choice": "auto"}).json()
                    if body["done"]:
                        done[sid] = body
        assert done[a]["shots"] == reference["shots"]
        assert done[b]["shots"] == reference["shots"]

    def test_config_is_per_session(self, client):
        from dataclasses import replace

        short = client.post(
            "/sessions", json={"movie_id": "demo", "config": {"budget": 4}}
        ).json()
        long = client.post("/sessions", json={"movie_id": "demo"}).json()
        short_final = drive_auto(client, short["session_id"])
        long_final = drive_auto(client, long["session_id"])

        bundle = full_bundle(m=24, seed=3, movie_id="demo")
        for create, final, config in (
            (short, short_final, replace(default_config(), budget=4)),
            (long, long_final, default_config()),
        ):
            inputs = prepare(bundle, config)
            expected = traverse(
                inputs.graph,
                inputs.tp_sets,
                inputs.intensities,
                config.traversal(),
                create["candidates"][0]["shot"],
            )
            assert tuple(final["shots"]) == expected.shot_ids
            assert final["terminated"] == expected.terminated_reason
        assert len(short_final["shots"]) == 4
        assert short_final["terminated"] == "budget"


class TestJournal:
    def test_replay_restores_sessions(self, bundle_dir, tmp_path):
        journal = tmp_path / "journal.jsonl"
        config = ServiceConfig(bundle_dir=str(bundle_dir), journal_path=str(journal))
        client = TestClient(create_app(config))
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        client.post(f"/sessions/{session}/undo")
        client.post(f"/sessions/{session}/step", json={"choice": "auto"})
        before = client.get(f"/sessions/{session}/path").json()

        revived = TestClient(create_app(config))
        after = revived.get(f"/sessions/{session}/path").json()
        assert json.dumps(before, sort_keys=True) == json.dumps(after, sort_keys=True)

    def test_no_journal_no_replay(self, bundle_dir):
        config = ServiceConfig(bundle_dir=str(bundle_dir))
        client = TestClient(create_app(config))
        session = client.post("/sessions", json={"movie_id": "demo"}).json()["session_id"]
        fresh = TestClient(create_app(config))
        r = fresh.get(f"/sessions/{session}/path")
        assert r.status_code == 404
