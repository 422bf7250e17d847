"""End-to-end tests for the dpgcnn command line."""

import json
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from dpgcnn import cli
from dpgcnn.autodiff import ops
from dpgcnn.autodiff.tensor import Parameter, Tape, Tensor
from dpgcnn.errors import GradcheckFailed, SweepRunError, exit_code_for
from dpgcnn.layers.models import build_vertex_model
from dpgcnn.training import suites

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SMOKE = str(CONFIGS / "smoke_two_cluster.json")


def _edges(tmp_path: Path, pairs, name: str = "g.tsv") -> str:
    path = tmp_path / name
    path.write_text("".join(f"{a}\t{b}\n" for a, b in pairs), encoding="utf-8")
    return str(path)


def _stdout_json(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


# ---------------------------------------------------------------------------
# dualize
# ---------------------------------------------------------------------------


def test_dualize_triangle_classic(tmp_path, capsys) -> None:
    edges = _edges(tmp_path, [(0, 1), (1, 2), (2, 0)])
    out = tmp_path / "dual.tsv"
    code = cli.main(["dualize", edges, "--mode", "classic_line_graph", "--out", str(out)])
    assert code == 0
    stats = _stdout_json(capsys)
    assert stats["mode"] == "classic_line_graph"
    assert stats["report"]["dual_vertex_count"] == 3
    assert stats["report"]["dual_edge_count_actual"] == 3
    assert stats["report"]["formulas_agree"] is True
    assert stats["dual_connected"] is True
    assert len(out.read_text().splitlines()) == 3


def test_dualize_directed_cycle_chain(tmp_path, capsys) -> None:
    """The closed form undercounts chain duals; that is reported, not an error."""
    edges = _edges(tmp_path, [(0, 1), (1, 2), (2, 0)])
    stats_path = tmp_path / "stats.json"
    code = cli.main(
        ["dualize", edges, "--out", str(tmp_path / "d.tsv"), "--stats", str(stats_path)]
    )
    assert code == 0
    stats = json.loads(stats_path.read_text())
    assert stats["mode"] == "chain"
    assert stats["report"]["formulas_agree"] is False
    assert stats["report"]["dual_edge_count_actual"] == 3
    assert capsys.readouterr().out == ""


def test_dualize_writes_labels_and_id_map(tmp_path, capsys) -> None:
    edges = _edges(tmp_path, [("a", "b"), ("b", "c")])
    out = tmp_path / "d.tsv"
    assert cli.main(["dualize", edges, "--out", str(out)]) == 0
    assert out.read_text() == "a:b\tb:c\n"
    assert json.loads((tmp_path / "d.ids.json").read_text()) == {"a": 0, "b": 1, "c": 2}


def test_dualize_sparsify(tmp_path, capsys) -> None:
    pairs = [(0, i) for i in range(1, 8)]
    edges = _edges(tmp_path, pairs)
    args = ["dualize", edges, "--undirected", "--out", str(tmp_path / "d.tsv")]
    assert cli.main(args + ["--sparsify", "2", "--seed", "3"]) == 0
    stats = _stdout_json(capsys)
    assert stats["sparsified_k"] == 2


def test_dualize_missing_file(tmp_path, capsys) -> None:
    code = cli.main(["dualize", str(tmp_path / "nope.tsv"), "--out", str(tmp_path / "d.tsv")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_dualize_classic_with_self_loops(tmp_path, capsys) -> None:
    edges = _edges(tmp_path, [(0, 1), (1, 2)])
    args = ["dualize", edges, "--mode", "classic_line_graph", "--self-loops"]
    assert cli.main(args + ["--out", str(tmp_path / "d.tsv")]) == 3


def test_dualize_requires_out(tmp_path) -> None:
    edges = _edges(tmp_path, [(0, 1)])
    with pytest.raises(SystemExit) as info:
        cli.main(["dualize", edges])
    assert info.value.code == 2


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------


def test_train_output_is_byte_stable(tmp_path, capsys) -> None:
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        args = ["train", SMOKE, "--seeds", "1,0", "--epochs", "15", "--no-timestamps"]
        assert cli.main(args + ["-o", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]
    assert sorted(outputs[0]) == ["run_0.json", "run_1.json", "summary.json"]
    summary = json.loads(outputs[0]["summary.json"])
    assert [r["seed"] for r in summary["runs"]] == [0, 1]
    assert "test accuracy" in capsys.readouterr().out


def test_train_config_errors(tmp_path) -> None:
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "colour": "blue"}', encoding="utf-8")
    assert cli.main(["train", str(bad)]) == 2
    assert cli.main(["train", str(tmp_path / "missing.json")]) == 2


def test_eval_untrained(tmp_path, capsys) -> None:
    assert cli.main(["eval", SMOKE, "--untrained", "--seed", "2"]) == 0
    result = _stdout_json(capsys)
    assert result["trained"] is False
    assert result["best_epoch"] == 0
    assert 0.0 <= result["test_acc"] <= 1.0


def test_eval_reproduces_training_run(tmp_path, capsys) -> None:
    out = tmp_path / "runs"
    assert cli.main(["train", SMOKE, "--seeds", "0", "--no-timestamps", "-o", str(out)]) == 0
    trained = json.loads((out / "run_0.json").read_text())
    capsys.readouterr()

    assert cli.main(["eval", SMOKE, "--seed", "0"]) == 0
    result = _stdout_json(capsys)
    assert result["test_acc"] == trained["test_acc"]
    assert result["best_epoch"] == trained["best_epoch"]


def test_eval_rejects_mismatched_model(tmp_path) -> None:
    model = tmp_path / "model.json"
    build_vertex_model(9, 2, heads=2, hidden=4, dual_out=4).to_json(model)
    assert cli.main(["eval", SMOKE, "--model", str(model), "--untrained"]) == 3


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def test_gradcheck_passes(tmp_path) -> None:
    out = tmp_path / "grad.json"
    assert cli.main(["gradcheck", "--scope", "ops", "--cases", "1", "-o", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert report["suites"][0]["scope"] == "ops"


def _broken_case(seed: int):
    w = Parameter("w", np.array([[0.5, -1.5]]))

    def fn(tape: Tape) -> Tensor:
        x = tape.watch(w)
        squared = ops._record("bad_square", x.value**2, (x,), lambda g: (g * x.value,))
        return ops.sum_all(squared)

    return fn, [w]


def test_gradcheck_failure_exit_code(tmp_path, capsys) -> None:
    with patch.dict(suites.SUITES["ops"], {"broken": _broken_case}):
        code = cli.main(["gradcheck", "--scope", "ops", "--cases", "1"])
    assert code == 5
    captured = capsys.readouterr()
    assert json.loads(captured.out)["passed"] is False
    assert "gradcheck failed for ops" in captured.err


def test_gradcheck_failed_maps_to_exit_code_five() -> None:
    error = GradcheckFailed(["layers", "model"])
    assert error.scopes == ["layers", "model"]
    assert exit_code_for(error) == 5
    assert exit_code_for(SweepRunError(0, error)) == 5


# ---------------------------------------------------------------------------
# info
# ---------------------------------------------------------------------------


def test_info_edges(tmp_path, capsys) -> None:
    edges = _edges(tmp_path, [(0, 1), (1, 2), (2, 0), (0, 1), (3, 3)])
    assert cli.main(["info", "--edges", edges]) == 0
    stats = _stdout_json(capsys)
    assert stats["vertices"] == 4
    assert stats["arcs"] == 4
    assert stats["self_loops"] == 1
    assert stats["duplicates"] == 1
    assert stats["bidirected"] is False
    assert stats["weak_components"] == 2


def test_info_citation_files(citation_files, capsys) -> None:
    args = ["info", "--content", str(citation_files["content"])]
    assert cli.main(args + ["--cites", str(citation_files["cites"])]) == 0
    stats = _stdout_json(capsys)
    assert stats["classes"] == ["db", "ml"]
    assert stats["feature_width"] == 4
    assert stats["cites"]["skipped_unknown"] == 1
    assert stats["arcs"] == 7


def test_info_needs_an_input() -> None:
    assert cli.main(["info"]) == 2
