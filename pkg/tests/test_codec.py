"""JSON documents, loop parsing, CSV dumps and text reports."""

import json
from pathlib import Path

import pytest

from src.codec import (
    dumps,
    load_generating_function,
    loads,
    monodromy_report,
    parse_loop,
    read_json,
    verification_report,
    wall_report,
    write_caustic_csv,
    write_json,
    write_mirror_csv,
    write_trajectory_csv,
)
from src.errors import InvalidLoop, InvalidPerturbation
from src.family import elliptic_umbilic
from src.fixtures import fixture
from src.models import Caustic, Crossing, Loop, MirrorSample, RegionGraph, Trajectory, Undecided
from src.monodromy import NO_TWIST, compose_loop, verify_fixture_suite


def test_graph_documents_round_trip_byte_identically(global_graph: RegionGraph, tmp_path: Path) -> None:
    path = write_json(tmp_path / "graph.json", global_graph)

    restored = read_json(RegionGraph, path)

    assert restored == global_graph
    assert dumps(restored) == path.read_text(encoding="utf-8")


def test_json_keys_are_sorted() -> None:
    text = dumps(Loop(base=0, crossings=(Crossing(wall="b1"),)))
    assert text.index('"base"') < text.index('"crossings"')
    assert text.endswith("}\n")
    assert loads(Loop, text).crossings[0].direction == 1


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ('{"ring": -1}', -1),
        ('{"ring": 3}', 3),
        (
            '{"base": 0, "crossings": [{"wall": "b1", "direction": 1}, {"wall": "b1", "direction": -1}]}',
            Loop(base=0, crossings=(Crossing(wall="b1", direction=1), Crossing(wall="b1", direction=-1))),
        ),
    ],
)
def test_parse_loop_accepts_rings_and_loops(text: str, expected: Loop | int) -> None:
    assert parse_loop(text) == expected


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ('{"ring": true}', "ring must be an integer"),
        ('{"ring": "outer"}', "ring must be an integer"),
        ("{base: 0", "not valid JSON"),
        ('{"base": 0, "crossings": [{"wall": "b1", "direction": 2}]}', "malformed loop"),
    ],
)
def test_parse_loop_rejects_bad_documents(text: str, message: str) -> None:
    with pytest.raises(InvalidLoop, match=message):
        parse_loop(text)


def test_generating_function_file(tmp_path: Path) -> None:
    path = tmp_path / "f.json"
    path.write_text(json.dumps(elliptic_umbilic().model_dump(mode="json")), encoding="utf-8")
    assert load_generating_function(path) == elliptic_umbilic()

    broken = tmp_path / "broken.json"
    broken.write_text('{"monomials": [{"i": "x"}]}', encoding="utf-8")
    with pytest.raises(InvalidPerturbation, match="not a valid generating function"):
        load_generating_function(broken)


def test_caustic_csv_has_one_row_per_point(tmp_path: Path) -> None:
    caustic = Caustic(
        degenerate=False,
        center=(0.0, 0.0),
        points=((0.1, 0.0), (0.0, 0.1)),
        preimages=((0.3, 0.0), (0.0, 0.3)),
    )
    lines = write_caustic_csv(tmp_path / "caustic.csv", caustic).read_text(encoding="utf-8").splitlines()
    assert lines[0] == "index,x1,x2,y1,y2"
    assert lines[2] == "1,0.0,0.1,0.0,0.3"


def test_mirror_csv_header(tmp_path: Path) -> None:
    sample = MirrorSample(x1=1.0, x2=0.0, sheet="p1", y1=1.0, y2=0.0, h=0.5, weight_real=1.0, weight_imag=0.0)
    lines = write_mirror_csv(tmp_path / "mirror.csv", [sample]).read_text(encoding="utf-8").splitlines()
    assert lines == ["x1,x2,sheet,y1,y2,h,re,im", "1.0,0.0,p1,1.0,0.0,0.5,1.0,0.0"]


def test_trajectory_csv_pairs_times_with_samples(tmp_path: Path) -> None:
    trajectory = Trajectory(
        samples=((0.5, 0.0), (0.6, 0.1)),
        times=(0.0, 0.25),
        terminal=Undecided(),
        direction="forward",
    )
    lines = write_trajectory_csv(tmp_path / "branch.csv", trajectory).read_text(encoding="utf-8").splitlines()
    assert lines == ["t,y1,y2", "0.0,0.5,0.0", "0.25,0.6,0.1"]


def test_wall_report_lists_every_wall(global_graph: RegionGraph) -> None:
    report = wall_report(global_graph)
    assert "b1 (bifurcation) R0 -> R1 s2->s1 tau=-1 dying s3" in report
    assert "twist-0 (twist_line) R1 -> R2" in report
    assert "homology:" in report


def test_wall_report_marks_unresolved_walls() -> None:
    report = wall_report(fixture("intersection-c").graph)
    assert "unavailable: tau of wall w3 is unresolved" in report


def test_monodromy_report_states_the_verdict(global_graph: RegionGraph) -> None:
    loop = fixture("global-tricuspoid").loop

    assert monodromy_report(compose_loop(global_graph, loop)).endswith("identity: yes\n")
    bare = monodromy_report(compose_loop(global_graph, loop, NO_TWIST))
    assert bare.startswith("loop based at R0:\n  +b1")
    assert "identity: no" in bare


def test_verification_report_summary() -> None:
    report = verify_fixture_suite([fixture("intersection-a")])
    text = verification_report(report)
    assert text.splitlines()[0].startswith("PASS  intersection-a")
    assert text.endswith(f"{report.summary.total}/{report.summary.total} passed, 0 failed (fixtures)\n")
