"""
API测试模块
"""


def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["name"]


def test_list_stages(client):
    """列出全部阶段"""
    response = client.get("/api/v1/stages")
    assert response.status_code == 200
    names = {stage["name"] for stage in response.json()}
    assert {"tabulate", "certify", "extract", "pipeline"} <= names


def test_execute_stage(client, tmp_path):
    response = client.post(
        "/api/v1/stages/execute",
        json={"name": "tabulate", "config": {"out": str(tmp_path), "config": "II"}},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["success"]
    assert body["output"]["table"]["d"] == 7
    assert (tmp_path / "table.json").is_file()


def test_execute_unknown_stage(client):
    response = client.post("/api/v1/stages/execute", json={"name": "nonexistent"})
    assert response.status_code == 404


def test_execute_stage_bad_config(client):
    response = client.post("/api/v1/stages/execute", json={"name": "tabulate", "config": {"colour": "blue"}})
    assert response.status_code == 422
    assert response.json()["detail"]["type"] == "FormatError"


def test_certify_and_reuse(client, config1_table):
    """认证一张表, 再用返回的证书给同一张表定界"""
    table = config1_table.to_dict()
    response = client.post("/api/v1/certify", json={"table": table, "mu": 0.18, "slack_sigma": 0.0})
    assert response.status_code == 200
    body = response.json()
    assert body["certified"]
    assert 0.2 < body["result"]["h_min"] < 0.3
    assert body["certificate"]["version"] == 1

    response = client.post(
        "/api/v1/certificates/evaluate",
        json={"table": table, "certificate": body["certificate"], "slack_sigma": 0.0},
    )
    assert response.status_code == 200
    reused = response.json()
    assert reused["certified"]
    assert abs(reused["result"]["h_min"] - body["result"]["h_min"]) < 1e-9


def test_certify_fails_closed(client):
    """μ=0 时各行不同的表不可行, 报告零熵"""
    table = {"n": 2, "d": 2, "p": [[0.7, 0.3], [0.3, 0.7]]}
    response = client.post("/api/v1/certify", json={"table": table, "mu": 0.0, "slack_sigma": 0.0})
    assert response.status_code == 200
    body = response.json()
    assert not body["certified"]
    assert body["result"]["h_min"] == 0.0
    assert body["certificate"] is None


def test_certify_invalid_table(client):
    table = {"n": 2, "d": 2, "p": [[0.7, 0.7], [0.3, 0.7]]}
    response = client.post("/api/v1/certify", json={"table": table, "mu": 0.1})
    assert response.status_code == 422


def test_evaluate_invalid_certificate(client, binary_table):
    certificate = {"version": 1, "n": 2, "d": 2, "nu": [0.0] * 4}
    response = client.post(
        "/api/v1/certificates/evaluate",
        json={"table": binary_table.to_dict(), "certificate": certificate},
    )
    assert response.status_code == 422


def test_energy_check(client):
    response = client.post(
        "/api/v1/energy/check",
        json={"mu": 0.18, "records": [{"x": 0, "mu_estimate": 0.17}, {"x": 1, "mu_estimate": 0.2}]},
    )
    assert response.status_code == 200
    body = response.json()
    assert not body["passed"]
    assert body["offending"] == [1]

    response = client.post("/api/v1/energy/check", json={"mu": 0.18, "records": []})
    assert response.status_code == 422


def test_pipeline_records(client, tmp_path):
    response = client.post(
        "/api/v1/stages/execute",
        json={"name": "pipeline", "config": {"out": str(tmp_path), "trials": 20000, "seed": 6, "eps": 1e-3}},
    )
    assert response.status_code == 200
    run_id = response.json()["output"]["run_id"]

    response = client.get("/api/v1/pipelines")
    assert run_id in {run["id"] for run in response.json()}
    response = client.get(f"/api/v1/pipelines/{run_id}")
    assert response.status_code == 200
    assert [s["stage_name"] for s in response.json()["steps"]] == ["simulate", "certify", "extract"]

    assert client.delete(f"/api/v1/pipelines/{run_id}").status_code == 200
    assert client.get(f"/api/v1/pipelines/{run_id}").status_code == 404
    assert client.delete(f"/api/v1/pipelines/{run_id}").status_code == 404
