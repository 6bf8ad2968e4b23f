import json

import pytest
from fastapi.testclient import TestClient

from conftest import make_pairs
from cspairs.errors import DataError
from cspairs.judge import (DuplicateJudgment, JudgmentLog, Plan,
                           export_judgments, plan_assignments,
                           presentation_position)
from cspairs.judge.service import create_app, pair_view
from cspairs.judge.store import new_judgment
from cspairs.stats import fleiss_kappa, judgments_to_matrix


def pair_ids(n):
    return [f"de-en-{i + 1:05d}" for i in range(n)]


def test_plan_335_pairs_pool_5_k_3():
    plan = plan_assignments(pair_ids(335), ["a1", "a2", "a3", "a4", "a5"],
                            k=3, seed=11)
    for annotator in plan.annotators:
        pairs = plan.annotator_pairs(annotator)
        assert len(pairs) == 201
        assert [len(b) for b in plan.batches[annotator]] == [67, 67, 67]
        assert len(set(pairs)) == 201
    for assignment in plan.assignments:
        assert len(set(assignment.annotators)) == 3


def test_plan_single_annotator_batches():
    plan = plan_assignments(pair_ids(201), ["solo"], k=1, seed=0)
    assert [len(b) for b in plan.batches["solo"]] == [67, 67, 67]


def test_plan_final_batch_smaller():
    plan = plan_assignments(pair_ids(150), ["solo"], k=1, seed=0)
    assert [len(b) for b in plan.batches["solo"]] == [67, 67, 16]


def test_plan_pool_too_small():
    with pytest.raises(DataError):
        plan_assignments(pair_ids(10), ["a", "b"], k=3, seed=0)


def test_plan_balanced_within_one():
    plan = plan_assignments(pair_ids(100), ["a", "b", "c"], k=2, seed=5)
    loads = [len(plan.annotator_pairs(a)) for a in plan.annotators]
    assert max(loads) - min(loads) <= 1
    assert sum(loads) == 200


def test_plan_deterministic():
    one = plan_assignments(pair_ids(50), ["a", "b", "c"], k=2, seed=9)
    two = plan_assignments(pair_ids(50), ["a", "b", "c"], k=2, seed=9)
    assert one.to_record() == two.to_record()


def test_presentation_pure_function_of_inputs():
    assert presentation_position(3, "p1", "ann") == presentation_position(3, "p1", "ann")
    sides = {presentation_position(3, f"p{i}", "ann") for i in range(40)}
    assert sides == {"A", "B"}


def test_plan_round_trip(tmp_path):
    plan = plan_assignments(pair_ids(20), ["a", "b"], k=1, seed=2)
    plan.save(tmp_path / "plan.json")
    loaded = Plan.load(tmp_path / "plan.json")
    assert loaded.to_record() == plan.to_record()


def test_log_append_and_reopen(tmp_path):
    path = tmp_path / "log.ndjson"
    log = JudgmentLog(path)
    rec = new_judgment("a1", "p1", "A", "A", 0)
    log.append(rec)
    reopened = JudgmentLog(path)
    assert [r.pair_id for r in reopened.records()] == ["p1"]
    assert reopened.get("a1", "p1").resolved_choice == "observed"


def test_log_duplicate_rejected(tmp_path):
    log = JudgmentLog(tmp_path / "log.ndjson")
    log.append(new_judgment("a1", "p1", "A", "A", 0))
    with pytest.raises(DuplicateJudgment) as err:
        log.append(new_judgment("a1", "p1", "B", "A", 0))
    assert err.value.original.choice == "A"
    assert len(log) == 1


def test_log_truncates_torn_tail(tmp_path):
    path = tmp_path / "log.ndjson"
    log = JudgmentLog(path)
    log.append(new_judgment("a1", "p1", "A", "A", 0))
    with open(path, "a", encoding="utf-8") as fh:
        fh.write('{"annotator_id": "a1", "pair_id": "p2", "cho')
    reopened = JudgmentLog(path)
    assert [r.pair_id for r in reopened.records()] == ["p1"]
    reopened.append(new_judgment("a1", "p2", "B", "B", 0))
    third = JudgmentLog(path)
    assert [r.pair_id for r in third.records()] == ["p1", "p2"]


def test_log_crash_recovery_loop(tmp_path):
    path = tmp_path / "log.ndjson"
    acked = []
    for i in range(30):
        log = JudgmentLog(path, snapshot_every=7)
        rec = new_judgment(f"a{i % 3}", f"p{i}", "A", "A", i // 10)
        log.append(rec)
        acked.append((rec.annotator_id, rec.pair_id))
        del log  # simulate the process dying right after the ack
        survivors = {(r.annotator_id, r.pair_id)
                     for r in JudgmentLog(path, snapshot_every=7).records()}
        assert set(acked) <= survivors


def test_export_order_and_fields(tmp_path):
    log = JudgmentLog(tmp_path / "log.ndjson")
    log.append(new_judgment("b", "p2", "A", "B", 1))
    log.append(new_judgment("a", "p9", "B", "B", 0))
    log.append(new_judgment("a", "p1", "A", "A", 0))
    rows = export_judgments(log)
    assert [(r["annotator_id"], r["pair_id"]) for r in rows] == \
        [("a", "p1"), ("a", "p9"), ("b", "p2")]
    assert rows[0]["resolved_choice"] == "observed"
    assert rows[1]["resolved_choice"] == "observed"
    assert rows[2]["resolved_choice"] == "manipulated"


def test_export_complete_batches_only(tmp_path):
    plan = plan_assignments(["p1", "p2", "p3", "p4"], ["a"], k=1, seed=0,
                            batch_size=2)
    log = JudgmentLog(tmp_path / "log.ndjson")
    batches = plan.batches["a"]
    for pid in batches[0]:
        log.append(new_judgment("a", pid, "A", plan.observed_position(pid, "a"), 0))
    log.append(new_judgment("a", batches[1][0], "A",
                            plan.observed_position(batches[1][0], "a"), 1))
    rows = export_judgments(log, plan=plan, complete_batches_only=True)
    assert [r["pair_id"] for r in rows] == sorted(batches[0])
    assert len(export_judgments(log)) == 3


def test_full_study_export_count(tmp_path):
    plan = plan_assignments(pair_ids(335), ["a1", "a2", "a3", "a4", "a5"],
                            k=3, seed=1)
    log = JudgmentLog(tmp_path / "log.ndjson", snapshot_every=300)
    for assignment in plan.assignments:
        for annotator in assignment.annotators:
            position = plan.observed_position(assignment.pair_id, annotator)
            log.append(new_judgment(annotator, assignment.pair_id, "A", position,
                                    plan.batch_index_of(annotator, assignment.pair_id)))
    rows = export_judgments(log)
    assert len(rows) == 335 * 3
    from cspairs.stats import resolve_choice

    for row in rows:
        assert resolve_choice(row["choice"], row["observed_position"]) == \
            row["resolved_choice"]


def test_export_feeds_agreement_stats(tmp_path):
    plan = plan_assignments(["p1", "p2"], ["a", "b"], k=2, seed=1)
    log = JudgmentLog(tmp_path / "log.ndjson")
    for annotator in ("a", "b"):
        for pid in ("p1", "p2"):
            position = plan.observed_position(pid, annotator)
            log.append(new_judgment(annotator, pid, position, position, 0))
    rows = export_judgments(log)
    assert fleiss_kappa(judgments_to_matrix(rows)) == 1.0


@pytest.fixture
def service(tmp_path):
    pairs = make_pairs(8)
    views = {p.pair_id: pair_view(p) for p in pairs}
    plan = plan_assignments(sorted(views), ["ann1", "ann2"], k=1, seed=21,
                            batch_size=3)
    log = JudgmentLog(tmp_path / "judgments.ndjson")
    app = create_app(views, plan=plan, log=log)
    client = TestClient(app)
    return client, plan, log, views, tmp_path


def test_service_open_session(service):
    client, plan, _, _, _ = service
    token = plan.tokens["ann1"]
    resp = client.post("/session/open", json={"token": token})
    assert resp.status_code == 200
    body = resp.json()
    assert body["annotator_id"] == "ann1"
    assert body["progress"]["judged"] == 0
    assert client.post("/session/open", json={"token": "bogus"}).status_code == 403


def test_service_next_item_idempotent_and_blind(service):
    client, plan, _, views, _ = service
    token = plan.tokens["ann1"]
    first = client.get(f"/session/{token}/next").json()
    second = client.get(f"/session/{token}/next").json()
    assert first == second
    assert first["status"] == "item"
    assert set(first) <= {"status", "pair_id", "sentence_a", "sentence_b",
                          "span_a", "span_b", "progress"}
    payload_text = json.dumps(first)
    assert "observed" not in payload_text and "manipulated" not in payload_text
    view = views[first["pair_id"]]
    shown = {first["sentence_a"], first["sentence_b"]}
    assert shown == {view.observed_text, view.manipulated_text}


def test_service_spans_cover_difference(service):
    client, plan, _, views, _ = service
    token = plan.tokens["ann1"]
    item = client.get(f"/session/{token}/next").json()
    a = item["sentence_a"][item["span_a"][0]:item["span_a"][1]]
    b = item["sentence_b"][item["span_b"][0]:item["span_b"][1]]
    assert a and b and a != b


def test_service_submit_resolves_and_advances(service):
    client, plan, log, views, _ = service
    token = plan.tokens["ann1"]
    item = client.get(f"/session/{token}/next").json()
    pid = item["pair_id"]
    resp = client.post(f"/session/{token}/submit",
                       json={"pair_id": pid, "choice": "A"})
    assert resp.status_code == 200
    assert resp.json()["progress"]["judged"] == 1
    rec = log.get("ann1", pid)
    expected = "observed" if plan.observed_position(pid, "ann1") == "A" \
        else "manipulated"
    assert rec.resolved_choice == expected
    assert client.get(f"/session/{token}/next").json()["pair_id"] != pid


def test_service_duplicate_submission_rejected(service):
    client, plan, _, _, _ = service
    token = plan.tokens["ann1"]
    pid = client.get(f"/session/{token}/next").json()["pair_id"]
    assert client.post(f"/session/{token}/submit",
                       json={"pair_id": pid, "choice": "A"}).status_code == 200
    dup = client.post(f"/session/{token}/submit",
                      json={"pair_id": pid, "choice": "B"})
    assert dup.status_code == 409
    assert dup.json()["detail"]["original"]["choice"] == "A"


def test_service_foreign_pair_rejected(service):
    client, plan, _, _, _ = service
    token = plan.tokens["ann1"]
    other = next(pid for pid in sorted(plan.tokens and plan.batches["ann2"][0]))
    resp = client.post(f"/session/{token}/submit",
                       json={"pair_id": other, "choice": "A"})
    assert resp.status_code == 404


def test_service_completion_and_export(service):
    client, plan, _, _, _ = service
    token = plan.tokens["ann1"]
    while True:
        item = client.get(f"/session/{token}/next").json()
        if item["status"] == "complete":
            break
        client.post(f"/session/{token}/submit",
                    json={"pair_id": item["pair_id"], "choice": "B"})
    progress = client.get(f"/session/{token}/progress").json()
    assert progress["judged"] == progress["total"] == 4
    rows = client.get("/export").json()["records"]
    assert len(rows) == 4
    assert all(r["annotator_id"] == "ann1" for r in rows)


def test_service_presentation_stable_across_restart(service):
    client, plan, log, views, tmp_path = service
    token = plan.tokens["ann2"]
    before = client.get(f"/session/{token}/next").json()
    plan2 = Plan.from_record(plan.to_record())
    log2 = JudgmentLog(tmp_path / "judgments.ndjson")
    client2 = TestClient(create_app(views, plan=plan2, log=log2))
    after = client2.get(f"/session/{token}/next").json()
    assert before == after


def test_service_create_plan_endpoint(tmp_path):
    pairs = make_pairs(6)
    views = {p.pair_id: pair_view(p) for p in pairs}
    log = JudgmentLog(tmp_path / "log.ndjson")
    client = TestClient(create_app(views, plan=None, log=log,
                                   plan_path=tmp_path / "plan.json"))
    req = {"pool": ["x", "y"], "k": 1, "seed": 4, "batch_size": 3}
    resp = client.post("/plan", json=req)
    assert resp.status_code == 200
    body = resp.json()
    assert body["n_pairs"] == 6
    assert {a["annotator_id"] for a in body["annotators"]} == {"x", "y"}
    assert (tmp_path / "plan.json").exists()
    again = client.post("/plan", json=req)
    assert again.json() == body
    conflict = client.post("/plan", json={"pool": ["x"], "k": 1, "seed": 9,
                                          "batch_size": 3})
    assert conflict.status_code == 409
