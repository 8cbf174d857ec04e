"""Command-line front end: deterministic experiment runs with manifests.

Every subcommand that writes a data file also writes ``<out>.manifest.json``
carrying the tool version, the echoed configuration, the seed, wall-clock
time, and a sha256 checksum per output. Data files are byte-identical for a
fixed (configuration, seed) regardless of worker count; only the manifest's
wall-clock field varies between runs.

Units: dissipative outputs are reported in units of the per-qubit emission
rate gamma, coherent outputs in units of the coupling scale delta; the
manifest records which under the ``units`` key.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, bosonsampling, darkstates, dynamics, effective, interferometer, linalg
from .errors import ConfigError, SpinSamplerError

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")


def _sha256(path: str) -> tuple[str, int]:
    h = hashlib.sha256()
    size = 0
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
            size += len(chunk)
    return h.hexdigest(), size


def write_manifest(out_paths, command: str, config: dict, seed, units: str, t0: float) -> str:
    main = out_paths[0]
    manifest = {
        "tool": "spinsampler",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "units": units,
        "wall_clock_s": time.time() - t0,
        "outputs": {},
    }
    for p in out_paths:
        digest, size = _sha256(p)
        manifest["outputs"][os.path.basename(p)] = {"sha256": digest, "bytes": size}
    path = main + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def verify_manifest(manifest_path: str) -> bool:
    """Re-hash the outputs listed in a manifest; True iff all checksums match."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = os.path.dirname(manifest_path)
    for name, entry in manifest["outputs"].items():
        digest, size = _sha256(os.path.join(base, name))
        if digest != entry["sha256"] or size != entry["bytes"]:
            return False
    return True


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- validation -----------------------------------------------------------------


def validate_config(kind: str, cfg: dict) -> list[dict]:
    """Collect violations (field, constraint, message) without running anything."""
    violations = []

    def bad(field, constraint, message):
        violations.append({"field": field, "constraint": constraint, "message": message})

    if kind == "dark-decay":
        m_list = cfg.get("m_list", [])
        n_list = cfg.get("n_list", [])
        if not m_list:
            bad("m_list", "non-empty", "at least one circuit size required")
        if not n_list:
            bad("n_list", "non-empty", "at least one filling required")
        cap = darkstates.LARGE_MAX_PORTS if cfg.get("large") else darkstates.DEFAULT_MAX_PORTS
        for m in m_list:
            if m < 1:
                bad("m_list", "positive", f"M = {m} is not positive")
            elif m > cap:
                bad("m_list", "size-limit", f"M = {m} exceeds the budget of {cap}")
        for n in n_list:
            if n < 1:
                bad("n_list", "positive", f"N = {n} is not positive")
            elif n > darkstates.MAX_QUASIPARTICLES:
                bad("n_list", "size-limit", f"N = {n} exceeds the budget of 5")
            elif m_list and n > max(m_list):
                bad("n_list", "invalid-filling", f"N = {n} exceeds every listed M")
        if cfg.get("samples", 1) < 1:
            bad("samples", "positive", f"samples = {cfg.get('samples')} must be >= 1")
        if cfg.get("channel_agg", "mean") not in ("mean", "sum"):
            bad("channel_agg", "one-of mean|sum", f"got {cfg.get('channel_agg')!r}")
    elif kind in ("adiabatic-bs", "spin-sampling"):
        m = cfg.get("m", 0)
        n = cfg.get("n", 0)
        if m < 1:
            bad("m", "positive", f"M = {m} is not positive")
        if n < 1:
            bad("n", "positive", f"N = {n} is not positive")
        if 0 < m < n:
            bad("n", "invalid-filling", f"N = {n} exceeds M = {m}")
        if kind == "adiabatic-bs":
            if cfg.get("time", 1.0) <= 0:
                bad("time", "positive", "sweep time must be positive")
            if cfg.get("eps", 1.0) <= 0:
                bad("eps", "positive", "detuning must be positive")
            if cfg.get("schedule", "smoothstep") != "smoothstep":
                bad("schedule", "one-of smoothstep", f"got {cfg.get('schedule')!r}")
    for field in ("in_path", "mesh_path", "config_path", "unitary_path"):
        p = cfg.get(field)
        if p is not None and not os.path.exists(p):
            bad(field, "file-exists", f"{p} does not exist")
    return violations


def _require_valid(kind: str, cfg: dict) -> None:
    violations = validate_config(kind, cfg)
    if violations:
        raise ConfigError(json.dumps({"violations": violations}))


# -- subcommand implementations ---------------------------------------------------


def _cmd_haar(args) -> int:
    t0 = time.time()
    rng = linalg.RngStream(args.seed, args.stream)
    if args.kind == "unitary":
        m = linalg.haar_unitary(args.dim, rng)
    else:
        m = linalg.haar_orthogonal(args.dim, rng)
    linalg.save_matrix(args.out, np.asarray(m))
    write_manifest([args.out], "haar", vars_of(args), args.seed, "dimensionless", t0)
    return 0


def _cmd_decompose(args) -> int:
    t0 = time.time()
    cfg = {"in_path": args.in_path}
    _require_valid("decompose", cfg)
    u = linalg.load_matrix(args.in_path)
    mesh = interferometer.decompose(u)
    interferometer.save_mesh(args.out, mesh)
    write_manifest([args.out], "decompose", vars_of(args), None, "radians", t0)
    return 0


def _cmd_mesh_eval(args) -> int:
    t0 = time.time()
    cfg = {"mesh_path": args.mesh}
    _require_valid("mesh-eval", cfg)
    mesh = interferometer.load_mesh(args.mesh)
    u = interferometer.mesh_unitary(mesh, args.nu)
    obj = linalg.matrix_to_json(np.asarray(u))
    if args.out:
        _write_json(args.out, obj)
        write_manifest([args.out], "mesh-eval", vars_of(args), None, "dimensionless", t0)
    else:
        json.dump(obj, sys.stdout)
        sys.stdout.write("\n")
    return 0


def _cmd_compile_couplings(args) -> int:
    t0 = time.time()
    cfg = {"in_path": args.in_path}
    _require_valid("compile-couplings", cfg)
    j = linalg.load_matrix(args.in_path).real
    u, delta = effective.unitary_from_couplings(j)
    _write_json(args.out, {"delta": delta, "unitary": linalg.matrix_to_json(np.asarray(u))})
    write_manifest([args.out], "compile-couplings", vars_of(args), None, "input J units", t0)
    return 0


def _load_circuit(spec, ports=None):
    if spec in (None, "identity"):
        if ports is None:
            raise ConfigError("identity circuit requires a 'ports' entry")
        return np.eye(int(ports))
    if str(spec).endswith(".json"):
        with open(spec) as fh:
            obj = json.load(fh)
        if "cells" in obj:
            return interferometer.mesh_from_json(obj)
        return linalg.matrix_from_json(obj)
    raise ConfigError(f"cannot interpret circuit spec {spec!r}")


def _cmd_effective(args) -> int:
    t0 = time.time()
    cfg = _load_toml(args.config)
    section = cfg.get("effective", {})
    out = args.out or section.get("out")
    if not out:
        raise ConfigError("no output path: pass --out or set effective.out in the config")
    kind = section.get("kind", "resonator")
    if kind == "resonator":
        coupling = effective.CouplingConfig(
            delta=section["delta"],
            modes=tuple((m["omega"], m["g"]) for m in section.get("modes", [])),
        )
        circuit = _load_circuit(section.get("circuit"), section.get("ports"))
        ham = effective.resonator_couplings(coupling, circuit)
        _write_json(
            out,
            {
                "kind": "spin_hamiltonian",
                "m": ham.m,
                "delta_tilde": ham.delta_tilde,
                "j": linalg.matrix_to_json(ham.j),
            },
        )
        units = "input frequency units"
    elif kind == "open":
        u = linalg.load_matrix(section["unitary"])
        gamma = section.get("gamma")
        if gamma is None:
            gamma = effective.emission_rate(
                section["resonant_amplitude"], section["density_of_states"]
            )
        lind = effective.build_lindbladian(u, gamma)
        _write_json(
            out,
            {
                "kind": "lindbladian",
                "m": lind.m,
                "gamma": lind.gamma,
                "h_eff": linalg.matrix_to_json(lind.h_eff_coefficients()),
                "coefficient_matrix": linalg.matrix_to_json(lind.coefficient_matrix()),
            },
        )
        units = "Gamma"
    else:
        raise ConfigError(f"unknown effective.kind {kind!r}")
    write_manifest([out], "effective", {"config": cfg}, None, units, t0)
    return 0


def _cmd_evolve(args) -> int:
    t0 = time.time()
    cfg = _load_toml(args.config)
    section = cfg.get("evolve", {})
    kind = section.get("kind", "schrodinger")
    rows = []
    if kind == "schrodinger":
        j = linalg.load_matrix(section["j"]).real
        m = j.shape[0]
        initial = [int(s) for s in section.get("initial_sites", list(range(1)))]
        basis = dynamics.enumerate_sector(2 * m, len(initial))
        psi0 = dynamics.basis_state(basis, initial)
        h = dynamics.bipartite_xy_matrix(basis, j)
        traj = dynamics.evolve_schrodinger(
            h, psi0, section["t_end"], dt=section.get("dt"), record_every=section.get("record_every")
        )
        for t, vec in zip(traj.times, traj.states):
            probs = np.abs(vec) ** 2
            occ = [
                float(np.sum(probs * ((basis.masks >> s) & 1))) for s in range(2 * m)
            ]
            rows.append([t] + occ + [float(np.linalg.norm(vec))])
        header = (
            ["t"]
            + [f"occ_in_{i}" for i in range(m)]
            + [f"occ_out_{i}" for i in range(m)]
            + ["norm"]
        )
        units = "delta"
    elif kind == "lindblad":
        u = linalg.load_matrix(section["unitary"])
        gamma = section.get("gamma", 1.0)
        m = u.shape[0]
        initial = [int(s) for s in section.get("initial_sites", [0])]
        n_max = int(section.get("n_max", len(initial)))
        space = dynamics.truncated_space(2 * m, n_max)
        basis = space.sectors[len(initial)]
        rho0 = dynamics.DensityMatrix.from_pure(space, dynamics.basis_state(basis, initial))
        lind = effective.build_lindbladian(u, gamma)
        traj = dynamics.evolve_lindblad(
            lind, rho0, section["t_end"], dt=section.get("dt"), record_every=section.get("record_every")
        )
        for t, rho in zip(traj.times, traj.rhos):
            pops = np.real(np.diag(rho))
            occ = [
                float(np.sum(pops * dynamics.space_occupation_diagonal(space, [s])))
                for s in range(2 * m)
            ]
            rows.append([t] + occ + [float(np.real(np.trace(rho)))])
        header = (
            ["t"]
            + [f"occ_in_{i}" for i in range(m)]
            + [f"occ_out_{i}" for i in range(m)]
            + ["trace"]
        )
        units = "Gamma"
    else:
        raise ConfigError(f"unknown evolve.kind {kind!r}")
    with open(args.out, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    outputs = [args.out]
    dump = section.get("dump_state")
    if dump:
        if kind == "schrodinger":
            final = {"kind": "sector_state", "t": float(traj.times[-1]),
                     "amplitudes": [[float(a.real), float(a.imag)] for a in traj.final]}
        else:
            final = {"kind": "density_matrix", "t": float(traj.times[-1]),
                     "matrix": linalg.matrix_to_json(traj.final)}
        _write_json(dump, final)
        outputs.append(dump)
    write_manifest(outputs, "evolve", {"config": cfg}, None, units, t0)
    return 0


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _cmd_dark_decay(args) -> int:
    t0 = time.time()
    m_list = _parse_int_list(args.m_list)
    n_list = _parse_int_list(args.n_list)
    cfg = {
        "m_list": m_list,
        "n_list": n_list,
        "samples": args.samples,
        "large": args.large,
        "channel_agg": args.channel_agg,
    }
    _require_valid("dark-decay", cfg)
    rows = []
    point = 0
    for m in m_list:
        for n in n_list:
            if n > m:
                raise ConfigError(f"invalid-filling: N = {n} > M = {m}")
            est = darkstates.monte_carlo_decay(
                m,
                n,
                args.samples,
                linalg.RngStream(args.seed, point),
                channel_agg=args.channel_agg,
                large=args.large,
                workers=args.threads,
            )
            rows.append(est)
            point += 1
    with open(args.out, "w") as fh:
        fh.write("M,N,samples,gamma_mc_mean,gamma_mc_stderr,gamma_analytic\n")
        for est in rows:
            fh.write(
                f"{est.m},{est.n},{est.samples},{_fmt(est.mean)},{_fmt(est.stderr)},{_fmt(est.analytic)}\n"
            )
    write_manifest([args.out], "dark-decay", dict(cfg, seed=args.seed), args.seed, "Gamma", t0)
    return 0


def _cmd_adiabatic_bs(args) -> int:
    t0 = time.time()
    cfg = {"m": args.m, "n": args.n, "time": args.time, "eps": args.eps, "schedule": args.schedule}
    _require_valid("adiabatic-bs", cfg)
    delta = 1.0
    schedule = bosonsampling.SweepSchedule(
        epsilon=args.eps * delta, total_time=args.time / delta, profile=args.schedule
    )
    o = np.asarray(linalg.haar_orthogonal(args.m, linalg.RngStream(args.seed)))
    spin = bosonsampling.adiabatic_sweep_spin(o, args.n, schedule, delta)
    boson = bosonsampling.adiabatic_sweep_boson(o, args.n, schedule, delta)
    proj, weight = bosonsampling.boson_to_hardcore(boson.final_state)
    dist, _ = bosonsampling.state_distance(proj.amplitudes, spin.final_state.amplitudes)
    fidelity = spin.fidelity if args.kind == "spin" else boson.fidelity
    result = {
        "M": args.m,
        "N": args.n,
        "T": args.time,
        "epsilon": args.eps,
        "fidelity": fidelity,
        "distance": dist,
        "collision_weight": 1.0 - weight,
    }
    if args.dump_state:
        amps = spin.final_state.amplitudes if args.kind == "spin" else boson.final_state.amplitudes
        result["final_state"] = [[float(a.real), float(a.imag)] for a in amps]
    _write_json(args.out, result)
    write_manifest([args.out], "adiabatic-bs", dict(cfg, seed=args.seed, kind=args.kind),
                   args.seed, "delta", t0)
    return 0


def _cmd_spin_sampling(args) -> int:
    t0 = time.time()
    cfg = {"m": args.m, "n": args.n}
    _require_valid("spin-sampling", cfg)
    o = np.asarray(linalg.haar_orthogonal(args.m, linalg.RngStream(args.seed)))
    res = dynamics.spin_sampling_run(o, args.n, probe_time=args.time)
    patterns = [
        {
            "pattern": list(p),
            "probability": res.pattern_probs[p],
            "conditional": res.conditional_probs[p],
        }
        for p in sorted(res.pattern_probs)
    ]
    _write_json(
        args.out,
        {
            "m": args.m,
            "n": args.n,
            "probe_time": res.probe_time,
            "coupling_scale": res.coupling_scale,
            "transfer_probability": res.transfer_probability,
            "patterns": patterns,
        },
    )
    write_manifest([args.out], "spin-sampling", dict(cfg, seed=args.seed, time=args.time),
                   args.seed, "delta", t0)
    return 0


def _cmd_repro(args) -> int:
    if args.target != "fig2":
        raise ConfigError(f"unknown repro target {args.target!r} (only 'fig2')")
    ns = argparse.Namespace(
        m_list=("10,20,30,40,50" if args.large else "10,20,30"),
        n_list="2,3,4,5",
        samples=args.samples,
        seed=args.seed,
        threads=args.threads,
        out=args.out,
        large=args.large,
        channel_agg="mean",
    )
    return _cmd_dark_decay(ns)


def vars_of(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# -- parser -----------------------------------------------------------------------


def _default_threads() -> int:
    env = os.environ.get("SPINSAMPLER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinsampler",
        description="Simulate matter qubits interacting through a multiport optical circuit.",
    )
    parser.add_argument("--version", action="version", version=f"spinsampler {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("haar", help="sample a Haar-random unitary or orthogonal matrix")
    p.add_argument("--dim", type=int, required=True, help="matrix dimension")
    p.add_argument("--kind", choices=("unitary", "orthogonal"), default="unitary",
                   help="matrix ensemble")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--stream", type=int, default=0, help="stream id within the seed")
    p.add_argument("--out", required=True, help="output matrix JSON path")
    p.set_defaults(func=_cmd_haar)

    p = sub.add_parser("decompose", help="decompose a unitary into a two-port-cell mesh")
    p.add_argument("--in", dest="in_path", required=True, help="input matrix JSON")
    p.add_argument("--out", required=True, help="output mesh JSON path")
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("mesh-eval", help="evaluate a mesh at a momentum ratio")
    p.add_argument("--mesh", required=True, help="mesh JSON path")
    p.add_argument("--nu", type=float, default=1.0, help="momentum ratio (1 = resonant)")
    p.add_argument("--out", default=None, help="output matrix JSON (stdout if omitted)")
    p.set_defaults(func=_cmd_mesh_eval)

    p = sub.add_parser("compile-couplings", help="synthesize a unitary from a symmetric J")
    p.add_argument("--in", dest="in_path", required=True, help="input J matrix JSON")
    p.add_argument("--out", required=True, help="output JSON with delta and the unitary")
    p.set_defaults(func=_cmd_compile_couplings)

    p = sub.add_parser("effective", help="build the effective model from a TOML config")
    p.add_argument("--config", required=True, help="TOML configuration path")
    p.add_argument("--out", default=None, help="output path (overrides the config)")
    p.set_defaults(func=_cmd_effective)

    p = sub.add_parser("evolve", help="integrate a configured evolution, write trajectory CSV")
    p.add_argument("--config", required=True, help="TOML configuration path")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_evolve)

    p = sub.add_parser("dark-decay", help="Monte Carlo decay rates of crowded dark states")
    p.add_argument("--m-list", required=True, help="comma-separated circuit sizes")
    p.add_argument("--n-list", required=True, help="comma-separated quasiparticle numbers")
    p.add_argument("--samples", type=int, default=200, help="Haar draws per grid point")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="worker processes (default from SPINSAMPLER_THREADS)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--large", action="store_true", help="allow the full grid up to M = 50")
    p.add_argument("--channel-agg", choices=("mean", "sum"), default="mean",
                   help="aggregate per-channel rates by mean (default) or sum")
    p.set_defaults(func=_cmd_dark_decay)

    p = sub.add_parser("adiabatic-bs", help="adiabatic preparation sweep and its fidelity")
    p.add_argument("--m", type=int, required=True, help="number of circuit ports")
    p.add_argument("--n", type=int, required=True, help="number of excitations")
    p.add_argument("--time", type=float, default=100.0, help="sweep time in units of 1/delta")
    p.add_argument("--eps", type=float, default=10.0, help="detuning in units of delta")
    p.add_argument("--schedule", default="smoothstep", help="switching profile name")
    p.add_argument("--kind", choices=("spin", "boson"), default="spin",
                   help="which sweep's fidelity to report")
    p.add_argument("--seed", type=int, default=0, help="seed for the Haar orthogonal circuit")
    p.add_argument("--dump-state", action="store_true", help="include final amplitudes")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_adiabatic_bs)

    p = sub.add_parser("spin-sampling", help="excitation-transfer run and output patterns")
    p.add_argument("--m", type=int, required=True, help="number of circuit ports")
    p.add_argument("--n", type=int, required=True, help="number of excitations")
    p.add_argument("--time", type=float, default=None,
                   help="probe time (default pi/(2 delta))")
    p.add_argument("--seed", type=int, default=0, help="seed for the Haar orthogonal circuit")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_spin_sampling)

    p = sub.add_parser("repro", help="rebuild a bundled figure dataset")
    p.add_argument("target", help="dataset name (fig2)")
    p.add_argument("--samples", type=int, default=200, help="Haar draws per grid point")
    p.add_argument("--seed", type=int, default=7, help="random seed")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="worker processes (default from SPINSAMPLER_THREADS)")
    p.add_argument("--large", action="store_true", help="extend the grid to M = 50")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        msg = str(exc)
        try:
            report = json.loads(msg)
        except json.JSONDecodeError:
            report = {"error": "config", "message": msg}
        json.dump(report, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except SpinSamplerError as exc:
        json.dump({"error": exc.kind, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
