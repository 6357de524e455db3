import json

import pytest

from causalcalc.cli import main
from causalcalc.formats import dumps_canonical, machine_to_json, model_to_json


@pytest.fixture
def parity_file(tmp_path, parity_spec):
    path = tmp_path / "parity.json"
    path.write_text(dumps_canonical(machine_to_json(parity_spec)))
    return str(path)


@pytest.fixture
def tm_file(tmp_path, tm_spec):
    path = tmp_path / "tm.json"
    path.write_text(dumps_canonical(machine_to_json(tm_spec)))
    return str(path)


@pytest.fixture
def parity_model_file(tmp_path, parity_file):
    path = tmp_path / "parity_model.json"
    assert main(["compile", parity_file, "--tape-len", "2", "--out", str(path)]) == 0
    return str(path)


@pytest.fixture
def counter_file(tmp_path, counter):
    path = tmp_path / "counter.json"
    path.write_text(dumps_canonical(model_to_json(counter)))
    return str(path)


@pytest.fixture
def constant_one_file(tmp_path, constant_one):
    path = tmp_path / "one.json"
    path.write_text(dumps_canonical(model_to_json(constant_one)))
    return str(path)


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


# ---------------------------------------------------------- compile

def test_compile_writes_a_loadable_model(capsys, parity_file):
    code, data = run_json(capsys, ["compile", parity_file, "--tape-len", "2"])
    assert code == 0
    assert data["meta"]["kind"] == "lba"
    assert data["equations"]["X"] == {"builtin": "lba_window_step"}


def test_compile_monolithic_and_tm(capsys, parity_file, tm_file):
    code, data = run_json(
        capsys, ["compile", parity_file, "--tape-len", "2", "--monolithic"]
    )
    assert code == 0 and data["meta"]["kind"] == "lba_mono"
    code, data = run_json(capsys, ["compile", tm_file])
    assert code == 0 and data["meta"]["kind"] == "tm"


def test_compile_lba_requires_tape_len(capsys, parity_file):
    assert main(["compile", parity_file]) == 1
    assert "tape-len" in capsys.readouterr().err


# ---------------------------------------------------------- run

def test_run_compiled_model_by_input(capsys, parity_model_file):
    code, data = run_json(
        capsys, ["run", parity_model_file, "--input", "1", "--depth", "2"]
    )
    assert code == 0
    assert not data["truncated"]
    assert [n["id"] for n in data["nodes"]] == [0, 1, 2]
    assert [e["label"] for e in data["edges"]] == [1, 1]


def test_run_plain_model_by_root(capsys, counter_file):
    code, data = run_json(
        capsys, ["run", counter_file, "--root", '{"X": 8}', "--depth", "2"]
    )
    assert code == 0
    assert len(data["nodes"]) == 6
    assert data["nodes"][0]["assign"] == {"X": 8}


def test_run_requires_some_root(capsys, counter_file):
    assert main(["run", counter_file, "--depth", "2"]) == 1
    assert main(["run", counter_file, "--input", "1", "--depth", "2"]) == 1
    err = capsys.readouterr().err
    assert "--root" in err


def test_out_file_replaces_stdout(capsys, tmp_path, counter_file):
    out = tmp_path / "tree.json"
    code = main(
        ["run", counter_file, "--root", '{"X": 9}', "--depth", "3", "--out", str(out)]
    )
    assert code == 0
    assert capsys.readouterr().out == ""
    assert len(json.loads(out.read_text())["nodes"]) == 4


def test_node_cap_env_var(capsys, monkeypatch, counter_file):
    monkeypatch.setenv("CAUSAL_CALC_NODE_CAP", "3")
    code, data = run_json(
        capsys, ["run", counter_file, "--root", '{"X": 8}', "--depth", "10"]
    )
    assert code == 3
    assert data["truncated"]
    assert len(data["nodes"]) == 3


def test_node_cap_flag_beats_env(monkeypatch, capsys, counter_file):
    monkeypatch.setenv("CAUSAL_CALC_NODE_CAP", "3")
    code = main(
        [
            "run", counter_file,
            "--root", '{"X": 8}',
            "--depth", "2",
            "--node-cap", "1000",
        ]
    )
    assert code == 0
    monkeypatch.setenv("CAUSAL_CALC_NODE_CAP", "three")
    assert main(["run", counter_file, "--root", '{"X": 8}', "--depth", "2"]) == 1


# ---------------------------------------------------------- accepts

def test_accepts_machine_and_model_routes(capsys, parity_file, parity_model_file):
    code, data = run_json(
        capsys,
        ["accepts", parity_file, "--input", "11", "--budget", "30", "--tape-len", "2"],
    )
    assert code == 0 and data["verdict"] == "ACCEPT"
    code, data = run_json(
        capsys, ["accepts", parity_model_file, "--input", "11", "--budget", "30"]
    )
    assert code == 0 and data["verdict"] == "ACCEPT"
    code, data = run_json(
        capsys, ["accepts", parity_model_file, "--input", "1", "--budget", "30"]
    )
    assert data["verdict"] == "REJECT_EXHAUSTED"


def test_accepts_rejects_plain_models(capsys, counter_file):
    assert main(["accepts", counter_file, "--input", "1", "--budget", "5"]) == 1
    assert "compiled" in capsys.readouterr().err


# ---------------------------------------------------------- bisim

def test_bisim_single_input(capsys, parity_file, parity_model_file):
    code, data = run_json(
        capsys, ["bisim", parity_file, parity_model_file, "--input", "1", "--depth", "6"]
    )
    assert code == 0
    assert data["equivalent"] is True
    assert data["counterexample"] is None


def test_bisim_matrix_table(capsys, tmp_path, parity_file, parity_model_file):
    out = tmp_path / "matrix.json"
    code = main(
        [
            "bisim", parity_file, parity_model_file,
            "--inputs", ",1,11,10",
            "--budget", "30",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("<empty>\t")
    assert lines[-1] == "all_agree\tTrue"
    assert all("\tagree" in line for line in lines[1:-1])
    data = json.loads(out.read_text())
    assert data["all_agree"] and len(data["rows"]) == 4


def test_bisim_input_flags_are_exclusive(capsys, parity_file, parity_model_file):
    assert main(["bisim", parity_file, parity_model_file, "--depth", "3"]) == 1
    assert (
        main(
            [
                "bisim", parity_file, parity_model_file,
                "--input", "1", "--inputs", "1,11",
                "--depth", "3", "--budget", "5",
            ]
        )
        == 1
    )
    assert main(["bisim", parity_file, parity_model_file, "--input", "1"]) == 1
    assert main(["bisim", parity_file, parity_model_file, "--inputs", "1"]) == 1


# ---------------------------------------------------------- intervene

def test_intervene_do(capsys, counter_file):
    code, data = run_json(
        capsys,
        [
            "intervene", counter_file,
            "--root", '{"X": 8}',
            "--depth", "2",
            "--do", "X@1=5",
        ],
    )
    assert code == 0
    assert [n["assign"]["X"] for n in data["nodes"]] == [8, 5, 0, 6]


def test_intervene_rewrite(capsys, constant_one_file):
    code, data = run_json(
        capsys,
        [
            "intervene", constant_one_file,
            "--root", '{"X": 1}',
            "--depth", "6",
            "--rewrite", "X@3(X=1)=0,X@3(X=0)=0",
        ],
    )
    assert code == 0
    assert [n["assign"]["X"] for n in data["nodes"]] == [1, 1, 1, 1, 0, 0, 0]


def test_intervene_needs_exactly_one_mode(capsys, counter_file):
    base = ["intervene", counter_file, "--root", '{"X": 8}', "--depth", "2"]
    assert main(base) == 1
    assert main(base + ["--do", "X@1=5", "--rewrite", "X@1(X=0)=1"]) == 1


# ---------------------------------------------------------- cause and sweep

def test_cause_query(capsys, counter_file):
    code, data = run_json(
        capsys,
        [
            "cause", counter_file,
            "--root", '{"X": 8}',
            "--candidate", "X@0=8",
            "--outcome", "X@2=9",
        ],
    )
    assert code == 0
    assert data == {
        "is_cause": True,
        "failing_condition": None,
        "witness": {"preventing": {"X@0=8": "0"}, "actual_branch": [0, 2, 5]},
    }


def test_split_actual_flag_changes_the_verdict(capsys, counter_file):
    base = [
        "cause", counter_file,
        "--root", '{"X": 8}',
        "--candidate", "X@1=0",
        "--outcome", "X@2=9",
    ]
    _, strict = run_json(capsys, base)
    assert strict["is_cause"] is False and strict["failing_condition"] == 1
    _, loose = run_json(capsys, base + ["--split-actual"])
    assert loose["is_cause"] is True


def test_sweep_table_and_json(capsys, tmp_path, counter_file):
    out = tmp_path / "sweep.json"
    code = main(
        [
            "sweep", counter_file,
            "--root", '{"X": 8}',
            "--vars", "X",
            "--steps", "0..1",
            "--outcome", "X@2=9",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "baseline\tholds\tmode=some"
    assert lines[-1] == "var\tX\tcritical"
    assert len(lines) == 22  # baseline + 20 rows + the per-variable line
    data = json.loads(out.read_text())
    assert len(data["rows"]) == 20
    assert data["by_var"] == {"X": "critical"}


def test_sweep_truncation_exits_three(capsys, counter_file):
    code = main(
        [
            "sweep", counter_file,
            "--root", '{"X": 9}',
            "--vars", "X",
            "--steps", "0",
            "--outcome", "X@2=9",
            "--node-cap", "6",
        ]
    )
    assert code == 3
    assert "truncated\ttrue" in capsys.readouterr().out


# ---------------------------------------------------------- failure modes

def test_exit_codes_for_bad_requests(capsys, tmp_path, counter_file):
    # semantic problem: value outside the variable's range
    assert (
        main(
            [
                "intervene", counter_file,
                "--root", '{"X": 8}',
                "--depth", "2",
                "--do", "X@1=77",
            ]
        )
        == 2
    )
    # syntax problem, reported with its offset
    assert (
        main(
            [
                "intervene", counter_file,
                "--root", '{"X": 8}',
                "--depth", "2",
                "--do", "X@@1=5",
            ]
        )
        == 1
    )
    assert "offset 2" in capsys.readouterr().err

    assert main(["frobnicate", counter_file]) == 1
    assert main(["run", str(tmp_path / "missing.json"), "--depth", "1"]) == 1

    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    assert main(["run", str(garbled), "--depth", "1"]) == 1


def test_defective_model_file_exits_two(capsys, tmp_path, counter):
    data = model_to_json(counter)
    data["equations"]["X"]["table"] = data["equations"]["X"]["table"][1:]
    path = tmp_path / "broken.json"
    path.write_text(dumps_canonical(data))
    assert main(["run", str(path), "--root", '{"X": 8}', "--depth", "1"]) == 2
    assert "MissingRow" in capsys.readouterr().err
