import json

from bilogic.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_prove_exit_codes(capsys):
    code, out, _ = run(capsys, "prove", "--system", "slbi", "--depth", "6",
                       "p ; @a ; p -> q |- q")
    assert code == 0 and "proved" in out
    code, out, _ = run(capsys, "prove", "--depth", "12", "@m |- p \\/ (p -> F)")
    assert code == 1 and "unproven" in out
    code, _, err = run(capsys, "prove", "p |- (")
    assert code == 2 and "syntax error" in err


def test_prove_emit_and_check(capsys, tmp_path):
    proof = tmp_path / "p.biproof.json"
    code, _, _ = run(capsys, "prove", "--emit", str(proof), "p , p -* q |- q")
    assert code == 0 and proof.exists()
    code, out, _ = run(capsys, "check-proof", str(proof))
    assert code == 0 and "valid" in out
    data = json.loads(proof.read_text())
    data["children"][0]["sequent"] = "q |- p"
    proof.write_text(json.dumps(data))
    code, out, _ = run(capsys, "check-proof", str(proof))
    assert code == 1


def test_vbi_emit_and_meta_check(capsys, tmp_path):
    deriv = tmp_path / "d.bideriv.json"
    code, _, _ = run(capsys, "prove", "--system", "vbi", "--emit", str(deriv),
                     "p , q |- p * q")
    assert code == 0 and deriv.exists()
    code, out, _ = run(capsys, "meta-check", str(deriv))
    assert code == 0 and "valid" in out


def test_countermodel_and_eval(capsys, tmp_path):
    model = tmp_path / "m.json"
    code, _, _ = run(capsys, "countermodel", "--max-size", "4",
                     "--emit", str(model), "p /\\ q |- p * q")
    assert code == 0 and model.exists()
    code, out, _ = run(capsys, "eval", "--model", str(model), "p /\\ q |- p * q")
    assert code == 1 and "refuted" in out
    code, out, _ = run(capsys, "eval", "--model", str(model), "p |- p")
    assert code == 0 and "valid" in out
    code, _, _ = run(capsys, "countermodel", "p |- p")
    assert code == 1


def test_space_outputs(capsys, tmp_path):
    dot = tmp_path / "s.dot"
    png = tmp_path / "s.png"
    code, _, _ = run(capsys, "space", "--depth", "2", "--dot", str(dot),
                     "--png", str(png), "p |- p /\\ q")
    assert code == 0
    assert "digraph" in dot.read_text()
    assert png.stat().st_size > 0


def test_bisim_exit(capsys):
    code, out, _ = run(capsys, "bisim", "--depth", "4", "p /\\ q |- q /\\ p")
    assert code == 0 and "bisimilar" in out


def test_json_outputs_are_stable(capsys):
    code1, out1, _ = run(capsys, "prove", "--json", "--depth", "6", "p , q |- q * p")
    code2, out2, _ = run(capsys, "prove", "--json", "--depth", "6", "p , q |- q * p")
    assert code1 == code2 == 0 and out1 == out2
    payload = json.loads(out1)
    assert payload["status"] == "proved"
    code, out, _ = run(capsys, "countermodel", "--json", "p |- p * p")
    assert code == 0 and json.loads(out)["status"] == "found"
