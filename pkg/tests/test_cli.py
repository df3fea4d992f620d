"""CLI: instance files, subcommands, reports, exit codes."""

import json
import math

import pytest

from costshare import corpus
from costshare.cli import (
    instance_digest,
    instance_from_dict,
    instance_to_dict,
    main,
    validate_instance_dict,
)
from costshare.core import harmonic
from costshare.ssrob import SSRoBInstance


def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True))
    return str(path)


@pytest.fixture
def colocated3_file(tmp_path):
    return write_json(tmp_path / "colocated3.json", instance_to_dict(corpus.colocated_facility(3)))


@pytest.fixture
def valuations_file(tmp_path):
    return write_json(tmp_path / "vals.json", {"values": [1 / 3 + 0.01] * 3})


# ---------------------------------------------------------------------------
# serialization

@pytest.mark.parametrize(
    "instance",
    [
        corpus.colocated_facility(3),
        corpus.two_distance_facility(),
        corpus.path_steiner(3),
        SSRoBInstance(2, ((0, 1, 2.0),), 0, (1,), 2.0),
        corpus.three_set_cover(),
    ],
    ids=["colocated", "two-distance", "path", "ssrob", "set-cover"],
)
def test_instance_round_trip(instance):
    doc = instance_to_dict(instance)
    again = instance_from_dict(doc)
    assert again == instance
    assert instance_digest(instance_to_dict(again)) == instance_digest(doc)


def test_lower_bound_spec_loads_as_instance():
    doc = {"format_version": "1", "kind": "lower-bound-spec",
           "body": {"k": 4, "beta": 2.0, "m": 2}}
    inst = instance_from_dict(doc)
    assert inst.n_players == 6
    assert validate_instance_dict(doc) == []


def test_validate_reports_named_field():
    doc = {"format_version": "1", "kind": "facility-location",
           "body": {"n_players": 1, "opening_costs": [1.0],
                    "metric": [[0.0, 1.0], [2.0, 0.0]]}}
    diags = validate_instance_dict(doc)
    assert diags and "metric" in diags[0]["field"]


def test_validate_reports_uncoverable_player():
    doc = {"format_version": "1", "kind": "set-cover",
           "body": {"n_players": 2, "sets": [{"cost": 1.0, "members": [0]}]}}
    diags = validate_instance_dict(doc)
    assert diags and "covered" in diags[0]["message"]


def test_unknown_kind_rejected():
    diags = validate_instance_dict({"format_version": "1", "kind": "knapsack", "body": {}})
    assert diags


# ---------------------------------------------------------------------------
# subcommands

def test_run_moulin_pt_report(colocated3_file, valuations_file, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main([
        "run", "--mechanism", "moulin-pt", "--instance", colocated3_file,
        "--valuations", valuations_file, "--truthful", "--output", str(out),
    ])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["served"] == [0, 1, 2]
    assert report["prices"] == [pytest.approx(1 / 3)] * 3
    assert report["price_sum"] == pytest.approx(report["budget_balance_recovery"] * report["incurred_cost"])
    assert report["social_cost"] == pytest.approx(report["social_cost_ratio"] * report["optimal_social_cost"])


def test_run_reports_are_byte_identical(colocated3_file, valuations_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main([
            "run", "--mechanism", "moulin-pt", "--instance", colocated3_file,
            "--valuations", valuations_file, "--output", str(out),
        ]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_with_bids_file(colocated3_file, tmp_path):
    vals = write_json(tmp_path / "v.json", {"values": [0.5, 0.5, 0.5]})
    bids = write_json(tmp_path / "b.json", {"values": [0.5, 0.5, 0.2]})
    out = tmp_path / "r.json"
    assert main([
        "run", "--mechanism", "moulin-pt", "--instance", colocated3_file,
        "--valuations", vals, "--bids", bids, "--output", str(out),
    ]) == 0
    report = json.loads(out.read_text())
    assert report["served"] == [0, 1]
    assert report["prices"][2] == 0.0


def test_run_csv_row(colocated3_file, valuations_file, tmp_path):
    csv_path = tmp_path / "sweep.csv"
    for _ in range(2):
        assert main([
            "run", "--mechanism", "moulin-pt", "--instance", colocated3_file,
            "--valuations", valuations_file, "--output", str(tmp_path / "r.json"),
            "--csv", str(csv_path),
        ]) == 0
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("mechanism,")


def test_summability_exhaustive(tmp_path, capsys):
    inst = write_json(tmp_path / "c4.json", instance_to_dict(corpus.colocated_facility(4)))
    assert main(["summability", "--method", "pt", "--instance", inst, "--exhaustive"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ratio"] == pytest.approx(harmonic(4), abs=1e-9)


def test_summability_fixed_needs_set_and_order(tmp_path, capsys):
    inst = write_json(tmp_path / "c3.json", instance_to_dict(corpus.colocated_facility(3)))
    assert main(["summability", "--method", "pt", "--instance", inst]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "invalid-input"
    assert main([
        "summability", "--method", "pt", "--instance", inst,
        "--set", "0,1", "--order", "1,0",
    ]) == 0


def test_validate_reports_missing_field():
    doc = {"format_version": "1", "kind": "ssrob",
           "body": {"n_vertices": 2, "edges": [[0, 1, 1.0]], "root": 0,
                    "player_vertices": [1]}}
    diags = validate_instance_dict(doc)
    assert diags and diags[0]["field"] == "body.M"


def test_random_summability_reports_are_byte_identical(tmp_path):
    inst = write_json(tmp_path / "p3.json", instance_to_dict(corpus.path_steiner(3)))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main([
            "summability", "--method", "jv", "--instance", inst,
            "--random", "--trials", "40", "--seed", "9", "--output", str(out),
        ]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_lowerbound_report(capsys):
    assert main(["lowerbound", "--k", "4", "--beta", "2", "--m", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["p"] == 1
    assert report["level_edge_counts"] == [1, 6]
    assert report["complete"] is True
    assert report["analysis_scale_m"] == predicted_m_reference(4, 2)


def predicted_m_reference(k, beta):
    return math.ceil(8 * beta * math.isqrt(k) * (2 * beta) ** math.isqrt(k))


def test_lowerbound_capacity_exit_code(capsys):
    assert main(["lowerbound", "--k", "16", "--beta", "2"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "capacity"
    assert "16384" in err["error"]["message"]


def test_verify_sp_and_cross_monotonic(tmp_path, capsys):
    inst = write_json(tmp_path / "c3.json", instance_to_dict(corpus.colocated_facility(3)))
    vals = write_json(tmp_path / "v.json", {"values": [0.5, 0.4, 0.3]})
    assert main([
        "verify", "--check", "sp", "--instance", inst,
        "--mechanism", "moulin-pt", "--valuations", vals,
    ]) == 0
    assert json.loads(capsys.readouterr().out)["violations"] == []
    assert main([
        "verify", "--check", "cross-monotonic", "--instance", inst, "--method", "pt",
    ]) == 0
    assert json.loads(capsys.readouterr().out)["violations"] == []


def test_verify_core(tmp_path, capsys):
    inst = write_json(tmp_path / "sc.json", instance_to_dict(corpus.three_set_cover()))
    vals = write_json(tmp_path / "v.json", {"values": [0.6, 0.6]})
    assert main([
        "verify", "--check", "weak-gsp", "--instance", inst,
        "--mechanism", "dmv-sc", "--valuations", vals, "--max-coalition", "2",
    ]) == 0
    assert json.loads(capsys.readouterr().out)["violations"] == []


def test_oracle_subcommand(tmp_path, capsys):
    inst = write_json(tmp_path / "two.json", instance_to_dict(corpus.two_distance_facility()))
    vals = write_json(tmp_path / "v.json", {"values": [1.0, 1.0]})
    assert main([
        "oracle", "--instance", inst, "--subset", "0,1", "--valuations", vals,
    ]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["cost"] == pytest.approx(1.6)
    assert report["optimal_social_cost"] == pytest.approx(1.6)


def test_validate_subcommand_exit_codes(tmp_path, capsys):
    good = write_json(tmp_path / "ok.json", instance_to_dict(corpus.colocated_facility(2)))
    assert main(["validate", "--instance", good]) == 0
    assert json.loads(capsys.readouterr().out)["diagnostics"] == []
    bad = write_json(tmp_path / "bad.json", {
        "format_version": "1", "kind": "facility-location",
        "body": {"n_players": 1, "opening_costs": [1.0],
                 "metric": [[0.0, 1.0], [2.0, 0.0]]},
    })
    assert main(["validate", "--instance", bad]) == 1
    assert json.loads(capsys.readouterr().out)["diagnostics"]


def test_missing_instance_file_is_validation_error(capsys):
    assert main(["oracle", "--instance", "/nonexistent.json"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "invalid-input"


def test_caps_env_parsing(monkeypatch):
    from costshare.core import caps_from_env

    assert caps_from_env({}).subsets == 16
    caps = caps_from_env({"COSTSHARE_CAPS": "subsets=20, orderings=9"})
    assert caps.subsets == 20 and caps.orderings == 9 and caps.terminals == 12
    with pytest.raises(Exception):
        caps_from_env({"COSTSHARE_CAPS": "submarines=3"})


def test_mechanism_instance_kind_mismatch(tmp_path, capsys):
    inst = write_json(tmp_path / "sc.json", instance_to_dict(corpus.three_set_cover()))
    vals = write_json(tmp_path / "v.json", {"values": [0.6, 0.6]})
    assert main([
        "run", "--mechanism", "moulin-pt", "--instance", inst, "--valuations", vals,
    ]) == 1
