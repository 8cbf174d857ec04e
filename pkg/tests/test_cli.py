import json

import numpy as np
import pytest

from spinsampler import cli, linalg


def run_cli(args):
    return cli.main([str(a) for a in args])


def test_haar_writes_matrix_and_manifest(tmp_path):
    out = tmp_path / "u.json"
    assert run_cli(["haar", "--dim", 4, "--kind", "unitary", "--seed", 3, "--out", out]) == 0
    u = linalg.load_matrix(out)
    assert linalg.unitarity_residual(u) <= 1e-10
    assert cli.verify_manifest(str(out) + ".manifest.json")


def test_haar_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli(["haar", "--dim", 5, "--kind", "orthogonal", "--seed", 11, "--out", a])
    run_cli(["haar", "--dim", 5, "--kind", "orthogonal", "--seed", 11, "--out", b])
    assert a.read_bytes() == b.read_bytes()


def test_decompose_identity_and_mesh_eval(tmp_path):
    u_path = tmp_path / "id.json"
    mesh_path = tmp_path / "mesh.json"
    rec_path = tmp_path / "rec.json"
    linalg.save_matrix(u_path, np.eye(4))
    assert run_cli(["decompose", "--in", u_path, "--out", mesh_path]) == 0
    assert run_cli(["mesh-eval", "--mesh", mesh_path, "--nu", 1.0, "--out", rec_path]) == 0
    rec = linalg.load_matrix(rec_path)
    assert np.max(np.abs(rec - np.eye(4))) <= 1e-12


def test_compile_couplings_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4))
    j = a + a.T
    j_path = tmp_path / "j.json"
    out = tmp_path / "u.json"
    linalg.save_matrix(j_path, j)
    assert run_cli(["compile-couplings", "--in", j_path, "--out", out]) == 0
    with open(out) as fh:
        obj = json.load(fh)
    u = linalg.matrix_from_json(obj["unitary"])
    assert np.max(np.abs(u.real * obj["delta"] - j)) <= 1e-10


def test_dark_decay_row_count_and_header(tmp_path):
    out = tmp_path / "decay.csv"
    assert (
        run_cli(
            ["dark-decay", "--m-list", "10,20,30", "--n-list", "2,3,4,5",
             "--samples", 3, "--seed", 7, "--out", out]
        )
        == 0
    )
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "M,N,samples,gamma_mc_mean,gamma_mc_stderr,gamma_analytic"
    assert len(lines) == 1 + 12
    assert cli.verify_manifest(str(out) + ".manifest.json")


def test_dark_decay_determinism_across_threads(tmp_path):
    outs = []
    for threads in (1, 4, 8):
        out = tmp_path / f"decay_{threads}.csv"
        run_cli(
            ["dark-decay", "--m-list", "10", "--n-list", "2,3", "--samples", 10,
             "--seed", 5, "--threads", threads, "--out", out]
        )
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_dark_decay_large_flag_unlocks_full_grid(tmp_path):
    out = tmp_path / "large.csv"
    # M = 50 exceeds the default budget; --large admits it
    code = run_cli(["dark-decay", "--m-list", "50", "--n-list", "2", "--samples", 2,
                    "--seed", 3, "--out", out])
    assert code == 2
    code = run_cli(["dark-decay", "--m-list", "50", "--n-list", "2", "--samples", 2,
                    "--seed", 3, "--large", "--out", out])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[1].startswith("50,2,2,")


def test_dark_decay_rejects_invalid_filling(tmp_path, capsys):
    out = tmp_path / "x.csv"
    code = run_cli(["dark-decay", "--m-list", "4", "--n-list", "5", "--samples", 2,
                    "--seed", 0, "--out", out])
    assert code == 2
    report = json.loads(capsys.readouterr().err)
    assert any(v["constraint"] == "invalid-filling" for v in report["violations"])


def test_validate_config_negative_samples():
    violations = cli.validate_config(
        "dark-decay", {"m_list": [10], "n_list": [2], "samples": -1}
    )
    assert len(violations) == 1
    assert violations[0]["field"] == "samples"


def test_validate_config_clean():
    violations = cli.validate_config(
        "dark-decay", {"m_list": [10], "n_list": [2], "samples": 5}
    )
    assert violations == []


def test_adiabatic_bs_fidelity_in_range(tmp_path):
    out = tmp_path / "sweep.json"
    assert (
        run_cli(["adiabatic-bs", "--m", 3, "--n", 1, "--time", 30, "--eps", 10,
                 "--seed", 1, "--out", out])
        == 0
    )
    with open(out) as fh:
        obj = json.load(fh)
    assert set(obj) >= {"M", "N", "T", "epsilon", "fidelity", "distance"}
    assert 0.0 <= obj["fidelity"] <= 1.0


def test_adiabatic_bs_boson_kind_with_state_dump(tmp_path):
    out = tmp_path / "sweep_b.json"
    assert (
        run_cli(["adiabatic-bs", "--m", 3, "--n", 1, "--time", 30, "--eps", 10,
                 "--kind", "boson", "--seed", 1, "--dump-state", "--out", out])
        == 0
    )
    with open(out) as fh:
        obj = json.load(fh)
    assert 0.0 <= obj["fidelity"] <= 1.0
    amps = np.array([complex(re, im) for re, im in obj["final_state"]])
    assert np.linalg.norm(amps) == pytest.approx(1.0, abs=1e-7)
    # single excitation: the qubit and boson sweeps coincide
    assert obj["distance"] <= 1e-7


def test_mesh_eval_to_stdout(tmp_path, capsys):
    u_path = tmp_path / "u.json"
    mesh_path = tmp_path / "mesh.json"
    linalg.save_matrix(u_path, np.eye(3))
    run_cli(["decompose", "--in", u_path, "--out", mesh_path])
    assert run_cli(["mesh-eval", "--mesh", mesh_path, "--nu", 0.5]) == 0
    obj = json.loads(capsys.readouterr().out)
    m = linalg.matrix_from_json(obj)
    assert linalg.unitarity_residual(m) <= 1e-10


def test_effective_open_model(tmp_path):
    u_path = tmp_path / "u.json"
    linalg.save_matrix(u_path, np.array([[1j]]))
    cfg = tmp_path / "open.toml"
    cfg.write_text(
        "[effective]\n"
        'kind = "open"\n'
        f'unitary = "{u_path}"\n'
        "resonant_amplitude = 0.5\n"
        "density_of_states = 2.0\n"
    )
    out = tmp_path / "open.json"
    assert run_cli(["effective", "--config", cfg, "--out", out]) == 0
    with open(out) as fh:
        obj = json.load(fh)
    assert obj["kind"] == "lindbladian"
    assert obj["gamma"] == pytest.approx(2 * 0.5**2 * 2.0)
    h_eff = linalg.matrix_from_json(obj["h_eff"])
    assert h_eff[0, 0] == pytest.approx(obj["gamma"] * 1.0)  # gamma * Im[U]


def test_verify_manifest_detects_tampering(tmp_path):
    out = tmp_path / "u.json"
    run_cli(["haar", "--dim", 2, "--seed", 0, "--out", out])
    manifest = str(out) + ".manifest.json"
    assert cli.verify_manifest(manifest)
    out.write_text(out.read_text().replace("0", "1", 1))
    assert not cli.verify_manifest(manifest)


def test_spin_sampling_output(tmp_path):
    out = tmp_path / "ss.json"
    assert run_cli(["spin-sampling", "--m", 3, "--n", 1, "--seed", 2, "--out", out]) == 0
    with open(out) as fh:
        obj = json.load(fh)
    total = sum(p["conditional"] for p in obj["patterns"])
    assert total == pytest.approx(1.0, abs=1e-9)
    assert 0.0 <= obj["transfer_probability"] <= 1.0 + 1e-12


def test_repro_fig2_small(tmp_path):
    out = tmp_path / "fig2.csv"
    assert run_cli(["repro", "fig2", "--samples", 2, "--seed", 1, "--out", out]) == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 1 + 3 * 4  # M in {10,20,30} x N in {2..5}


def test_effective_and_evolve_configs(tmp_path):
    u_path = tmp_path / "u.json"
    linalg.save_matrix(u_path, np.eye(2))
    eff_cfg = tmp_path / "eff.toml"
    eff_cfg.write_text(
        "[effective]\n"
        'kind = "resonator"\n'
        "delta = 5.0\n"
        'circuit = "identity"\n'
        "ports = 2\n"
        "modes = [{omega = 4.0, g = 0.3}]\n"
    )
    eff_out = tmp_path / "eff.json"
    assert run_cli(["effective", "--config", eff_cfg, "--out", eff_out]) == 0
    with open(eff_out) as fh:
        obj = json.load(fh)
    assert obj["kind"] == "spin_hamiltonian"
    assert obj["delta_tilde"] == pytest.approx(5.0 + 0.09)

    j_path = tmp_path / "j.json"
    linalg.save_matrix(j_path, np.array([[0.5]]))
    ev_cfg = tmp_path / "ev.toml"
    ev_cfg.write_text(
        "[evolve]\n"
        'kind = "schrodinger"\n'
        f'j = "{j_path}"\n'
        "initial_sites = [0]\n"
        "t_end = 2.0\n"
        "dt = 0.001\n"
    )
    ev_out = tmp_path / "traj.csv"
    assert run_cli(["evolve", "--config", ev_cfg, "--out", ev_out]) == 0
    lines = ev_out.read_text().strip().split("\n")
    assert lines[0] == "t,occ_in_0,occ_out_0,norm"
    last = [float(x) for x in lines[-1].split(",")]
    assert last[2] == pytest.approx(np.sin(0.5 * 2.0) ** 2, abs=1e-7)

    lv_cfg = tmp_path / "lv.toml"
    dump_path = tmp_path / "final.json"
    lv_cfg.write_text(
        "[evolve]\n"
        'kind = "lindblad"\n'
        f'unitary = "{u_path}"\n'
        "gamma = 1.0\n"
        "initial_sites = [0]\n"
        "n_max = 1\n"
        "t_end = 1.0\n"
        f'dump_state = "{dump_path}"\n'
    )
    lv_out = tmp_path / "lind.csv"
    assert run_cli(["evolve", "--config", lv_cfg, "--out", lv_out]) == 0
    lines = lv_out.read_text().strip().split("\n")
    assert lines[0] == "t,occ_in_0,occ_in_1,occ_out_0,occ_out_1,trace"
    last = [float(x) for x in lines[-1].split(",")]
    assert last[-1] == pytest.approx(1.0, abs=1e-9)
    with open(dump_path) as fh:
        final = json.load(fh)
    rho = linalg.matrix_from_json(final["matrix"])
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-9)


def test_bad_config_reports_parse_error(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[evolve\nkind = ???\n")
    code = run_cli(["evolve", "--config", cfg, "--out", tmp_path / "x.csv"])
    assert code == 2
    report = json.loads(capsys.readouterr().err)
    assert report["error"] == "config"


HELP_FLAGS = {
    "haar": ["--dim", "--kind", "--seed", "--stream", "--out"],
    "decompose": ["--in", "--out"],
    "mesh-eval": ["--mesh", "--nu", "--out"],
    "compile-couplings": ["--in", "--out"],
    "effective": ["--config", "--out"],
    "evolve": ["--config", "--out"],
    "dark-decay": ["--m-list", "--n-list", "--samples", "--seed", "--threads",
                   "--out", "--large", "--channel-agg"],
    "adiabatic-bs": ["--m", "--n", "--time", "--eps", "--schedule", "--kind",
                     "--seed", "--dump-state", "--out"],
    "spin-sampling": ["--m", "--n", "--time", "--seed", "--out"],
    "repro": ["--samples", "--seed", "--threads", "--large", "--out"],
}


@pytest.mark.parametrize("command", sorted(HELP_FLAGS))
def test_help_lists_every_flag(command, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in HELP_FLAGS[command]:
        assert flag in text


def test_threads_env_default(monkeypatch):
    monkeypatch.setenv("SPINSAMPLER_THREADS", "6")
    parser = cli.build_parser()
    args = parser.parse_args(["dark-decay", "--m-list", "10", "--n-list", "2", "--out", "x"])
    assert args.threads == 6
