from tests.conftest import fixture_data


def test_split(client, mult2d_body):
    response = client.post("api/split/", json=mult2d_body)
    assert response.status_code == 200, response.text
    data = response.json()
    assert len(data["before"]["roots"]) == 2
    assert len(data["after"]["roots"]) == 4
    assert data["conservation"] is None
    assert data["strays"] == []
    assert data["deformation"]["magnitude"] == 0.5


def test_split_magnitude_override(client, mult2d_body):
    response = client.post("api/split/", params={"t": 0.025}, json=mult2d_body)
    assert response.status_code == 200, response.text
    data = response.json()
    assert data["deformation"]["magnitude"] == 0.025
    assert len(data["after"]["roots"]) == 4


def test_split_with_probe(client):
    response = client.post("api/split/", params={"probe": True}, json=fixture_data("fold1d"))
    assert response.status_code == 200, response.text
    data = response.json()
    assert data["expected"] == 3
    assert data["conservation"] is True
    assert data["probes"][0]["count"] == 3


def test_split_without_multiple_root(client, kearfott_body):
    kearfott_body["deformation"] = {"H": ["t*x1", "t*x2"], "t": 0.01}
    response = client.post("api/split/", json=kearfott_body)
    assert response.status_code == 422, response.text


def test_kov(client):
    response = client.post("api/split/kov", params={"samples": 1000}, json=fixture_data("kov"))
    assert response.status_code == 200, response.text
    data = response.json()
    assert data["passed"] is True
    assert data["roots_in_ball"] == 1
    assert data["samples"] == 1000
    assert data["eps"] < data["boundary_distance"]


def test_kov_large_shift(client):
    body = fixture_data("kov")
    body["target"][0] = "x1 + 9.5 + 0.1*x2**2"
    response = client.post("api/split/kov", params={"samples": 1000}, json=body)
    assert response.status_code == 200, response.text
    assert response.json()["passed"] is False


def test_kov_without_target(client, kearfott_body):
    response = client.post("api/split/kov", params={"r": 1.0}, json=kearfott_body)
    assert response.status_code == 400, response.text


def test_kov_without_radius(client):
    body = fixture_data("kov")
    del body["ball"]
    response = client.post("api/split/kov", json=body)
    assert response.status_code == 400, response.text


def test_kov_singular(client):
    body = {"n": 2, "polynomials": ["x1 + x2", "x1 + x2 - 1"], "target": ["x1 + x2", "x1 + x2 - 2"]}
    response = client.post("api/split/kov", params={"r": 1.0, "samples": 100}, json=body)
    assert response.status_code == 422, response.text
