"""Acceptance checks. Each test prints one verdict line (visible with -s
or in the failure report) and asserts the same condition, so a -v run
shows exactly one PASSED/FAILED per criterion."""

import pathlib

import numpy as np

from qlyap import (
    ControlLaw,
    SystemModel,
    bundled_fixture,
    check_assumptions,
    closed_loop_generator,
    control_signals,
    escape_matrix,
    invariance_probe,
    invariant_set_slice,
    lyapunov_generator,
    lyapunov_increment,
    lyapunov_value,
    min_lyapunov_at_distance,
    run_ensemble,
    shifted_controls_independent,
    simulate_trajectory,
    stability_bound_test,
    supermartingale_test,
    write_trajectory_csv,
)
from qlyap.dynamics import euler_maruyama_step_many

from conftest import (
    four_level_deficient_model,
    four_level_model,
    qubit_model,
    qutrit_model,
    random_state,
)

GOLDEN = pathlib.Path(__file__).parent / "golden" / "qubit_seed7.csv"


def _verdict(num, ok, detail):
    line = f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line, flush=True)
    assert ok, line


def test_criterion_01_exact_increment_identity():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        target = random_state(rng, n)
        psi = random_state(rng, n)
        scale = 10.0 ** rng.uniform(-3, 1)
        delta = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        predicted = lyapunov_increment(psi, delta, target)
        actual = lyapunov_value(psi + delta, target) - lyapunov_value(psi, target)
        worst = max(worst, abs(predicted - actual))
    _verdict(1, worst <= 1e-12, f"max |predicted - actual| = {worst:.3e} over 1000 pairs")


def _fixture_models():
    return (
        (qubit_model(), ControlLaw(gains=(1.0,))),
        (qutrit_model(), ControlLaw(gains=(1.0, 1.0))),
        (four_level_model(), ControlLaw(gains=(1.0, 1.0, 1.0))),
    )


def test_criterion_02_closed_loop_drift_nonpositive():
    rng = np.random.default_rng(102)
    worst = -np.inf
    for model, law in _fixture_models():
        for _ in range(3334):
            drift = closed_loop_generator(model, law, random_state(rng, model.n))
            worst = max(worst, drift)
    _verdict(2, worst <= 1e-12, f"max closed-loop drift = {worst:.3e} over 10002 states")


def test_criterion_03_general_equals_reduced_generator():
    rng = np.random.default_rng(103)
    worst = 0.0
    for model, law in _fixture_models():
        for _ in range(3334):
            psi = random_state(rng, model.n)
            u = control_signals(model, law, psi)
            general = lyapunov_generator(model, u, psi).drift
            reduced = closed_loop_generator(model, law, psi)
            worst = max(worst, abs(general - reduced))
    _verdict(3, worst <= 1e-12, f"max |general - reduced| = {worst:.3e} over 10002 states")


def test_criterion_04_generator_matches_one_step_statistics():
    model = qutrit_model()
    law = ControlLaw(gains=(1.0, 1.0))
    psi0 = np.array([0.36 + 0.48j, 0.8, 0.0], dtype=complex)
    terms = lyapunov_generator(model, control_signals(model, law, psi0), psi0)

    h = 1e-4
    pairs = 100_000
    rng = np.random.Generator(np.random.Philox(2024))
    dw = rng.normal(0.0, np.sqrt(h), size=pairs)
    v0 = lyapunov_value(psi0, model.target)

    def one_step_v(increments):
        rows = np.tile(psi0, (increments.size, 1))
        stepped = euler_maruyama_step_many(model, law, rows, h, increments)
        overlap = stepped @ model.target.conj()
        return 0.5 * (1.0 - np.abs(overlap) ** 2)

    # antithetic pairing cancels the O(sqrt(h)) noise term, so the pair
    # means estimate the drift with O(h) residual variance
    dv_pairs = 0.5 * ((one_step_v(dw) - v0) + (one_step_v(-dw) - v0)) / h
    mean = float(np.mean(dv_pairs))
    stderr = float(np.std(dv_pairs, ddof=1) / np.sqrt(pairs))
    gap = abs(mean - terms.drift)
    band = 3.0 * stderr + 1e-3
    _verdict(
        4,
        gap <= band,
        f"one-step mean dV/h = {mean:.6f} vs drift {terms.drift:.6f}, "
        f"gap {gap:.2e} <= {band:.2e}",
    )


def test_criterion_05_qubit_ensemble_mean_decrease():
    model, law, params = bundled_fixture("qubit")
    summary = run_ensemble(
        model,
        law,
        params.initial_state,
        params.dt,
        params.t_final,
        params.trials,
        params.seed,
        r_list=params.r_list,
    )
    gate = supermartingale_test(summary)
    ok = (
        gate.passes
        and summary.included == 2000
        and summary.mean_V[-1] < summary.mean_V[0]
    )
    _verdict(
        5,
        ok,
        f"2000 trajectories, mean V {summary.mean_V[0]:.4f} -> {summary.mean_V[-1]:.4f}, "
        f"worst rise {gate.worst_violation_sigma:.2f} sigma over {gate.pairs} pairs",
    )


def test_criterion_06_stability_exceedance_bound():
    model, law, _ = bundled_fixture("qubit")
    details = []
    ok = True
    for i, radius in enumerate((0.3, 0.5, 1.0)):
        report = stability_bound_test(
            model,
            law,
            radius,
            perturbation_sizes=(0.03, 0.1, 0.3),
            trials=400,
            dt=0.002,
            t_final=5.0,
            base_seed=6000 + 10_000 * i,
        )
        ok = ok and report.passes
        worst_row = max(
            report.rows, key=lambda r: r.empirical_p - r.bound if r.bound < 1 else -1
        )
        details.append(
            f"R={radius:g}: p<=bound for all sizes "
            f"(tightest {worst_row.empirical_p:.4f} vs {min(worst_row.bound, 1.0):.4f})"
        )
    _verdict(6, ok, "; ".join(details))


def test_criterion_07_measurement_collapse_statistics():
    model = SystemModel(
        free_hamiltonian=np.zeros((2, 2), dtype=complex),
        controls=(),
        observable=np.diag([1.0, -1.0]).astype(complex),
        target=np.array([1.0, 0.0], dtype=complex),
        measurement_strength=50.0,
    )
    law = ControlLaw(gains=())
    psi0 = np.array([0.8, 0.6], dtype=complex)
    summary = run_ensemble(model, law, psi0, 1e-4, 0.5, trials=2000, base_seed=2025)
    counts, _ = summary.final_fidelity_histogram
    included = summary.included
    settled = (counts[0] + counts[-1]) / included
    born = counts[-1] / included
    sigma = np.sqrt(0.64 * 0.36 / included)
    x_gap = abs(summary.mean_X[-1] - summary.mean_X[0])
    x_band = 3.0 * summary.stderr_X[-1]
    ok = (
        settled >= 0.99
        and abs(born - 0.64) <= 3.0 * sigma
        and x_gap <= x_band
    )
    _verdict(
        7,
        ok,
        f"settled {settled:.3f}, up fraction {born:.4f} vs 0.64 (3 sigma = {3 * sigma:.4f}), "
        f"mean X drift {x_gap:.4f} <= {x_band:.4f}",
    )


def test_criterion_08_invariant_slice_dimensions():
    rng = np.random.default_rng(108)
    ok = True
    for model, draws in ((qutrit_model(), 200), (four_level_model(), 100)):
        for _ in range(draws):
            shifts = rng.uniform(-3.0, 3.0, size=model.m)
            result = invariant_set_slice(model, shifts)
            ok = ok and result.dimension == 1
        canonical = np.array(
            [float(np.real(np.vdot(model.target, hk @ model.target))) for hk in model.controls]
        )
        at_canon = invariant_set_slice(model, canonical)
        ok = ok and at_canon.dimension == 1 and at_canon.contains_target
    _verdict(8, ok, "300 random shift draws all give a single ray; canonical slice holds the target")


def test_criterion_09_escape_rank_and_growth():
    ranks = {
        "qubit": escape_matrix(qubit_model()),
        "qutrit": escape_matrix(qutrit_model()),
        "four_level": escape_matrix(four_level_model()),
        "deficient": escape_matrix(four_level_deficient_model()),
    }
    rank_ok = (
        ranks["qubit"].full_rank
        and ranks["qutrit"].full_rank
        and ranks["four_level"].full_rank
        and not ranks["deficient"].full_rank
        and ranks["deficient"].rank == 2
    )

    model = four_level_model()
    law = ControlLaw(gains=(1.0, 1.0, 1.0))
    driven = 1j * np.array([0.0, 1.0, 0.0, 0.0], dtype=complex)
    (escaping,) = invariance_probe(
        model, law, [driven], dt=0.002, t_probe=0.3, trials=500, base_seed=901
    )
    growth_sigmas = escaping.mean_drift_fidelity / max(escaping.stderr_drift_fidelity, 1e-300)

    deficient = four_level_deficient_model()
    stuck = np.array([0.0, 0.0, 0.0, 1.0], dtype=complex)
    (flat,) = invariance_probe(
        deficient, law, [stuck], dt=0.002, t_probe=0.3, trials=200, base_seed=902
    )
    ok = rank_ok and growth_sigmas > 3.0 and abs(flat.mean_drift_fidelity) < 1e-12
    _verdict(
        9,
        ok,
        f"ranks 1/2/3 full, deficient 2 of 3; driven fidelity growth {growth_sigmas:.1f} sigma, "
        f"stuck drift {flat.mean_drift_fidelity:.1e}",
    )


def test_criterion_10_invariance_probe_classification():
    qubit = qubit_model()
    law1 = ControlLaw(gains=(1.0,))
    on_target, antipode = invariance_probe(
        qubit,
        law1,
        [qubit.target, np.array([1.0, 0.0], dtype=complex)],
        dt=0.002,
        t_probe=0.5,
        trials=300,
        base_seed=1001,
    )
    qutrit = qutrit_model()
    law2 = ControlLaw(gains=(1.0, 1.0))
    (perp,) = invariance_probe(
        qutrit,
        law2,
        [np.array([0.0, 1.0, 0.0], dtype=complex)],
        dt=0.002,
        t_probe=0.5,
        trials=300,
        base_seed=1002,
    )
    deficient = four_level_deficient_model()
    law3 = ControlLaw(gains=(1.0, 1.0, 1.0))
    (stuck,) = invariance_probe(
        deficient,
        law3,
        [np.array([0.0, 0.0, 0.0, 1.0], dtype=complex)],
        dt=0.002,
        t_probe=0.5,
        trials=100,
        base_seed=1003,
    )
    ok = (
        on_target.stationary
        and stuck.stationary
        and not antipode.stationary
        and not perp.stationary
        and antipode.mean_drift_fidelity > 0.0
        and perp.mean_drift_fidelity > 0.0
    )
    _verdict(
        10,
        ok,
        f"target/stuck stationary, escapers grow fidelity by "
        f"{antipode.mean_drift_fidelity:.3f} and {perp.mean_drift_fidelity:.3f}",
    )


def test_criterion_11_shifted_control_independence():
    rng = np.random.default_rng(111)
    model = qutrit_model()
    generic_ok = all(
        shifted_controls_independent(model, rng.uniform(-3.0, 3.0, size=2))
        for _ in range(100)
    )
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    pair = SystemModel(
        free_hamiltonian=np.diag([1.0, -1.0]).astype(complex),
        controls=(sx, 2.0 * sx),
        observable=np.diag([1.0, -1.0]).astype(complex),
        target=np.array([0.0, 1.0], dtype=complex),
        measurement_strength=1.0,
    )
    collapse_caught = not shifted_controls_independent(pair, np.array([0.5, 1.0]))
    still_generic = shifted_controls_independent(pair, np.array([0.5, 0.7]))
    ok = generic_ok and collapse_caught and still_generic
    _verdict(
        11,
        ok,
        "100 generic shift draws independent; doubled-shift collapse detected",
    )


def test_criterion_12_golden_trajectory_bytes(tmp_path):
    model, law, params = bundled_fixture("qubit")
    fresh = []
    for name in ("one.csv", "two.csv"):
        record = simulate_trajectory(model, law, params.initial_state, 0.01, 2.0, seed=7)
        path = tmp_path / name
        write_trajectory_csv(path, record, model, law)
        fresh.append(path.read_bytes())
    golden = GOLDEN.read_bytes()
    ok = fresh[0] == golden and fresh[1] == golden
    _verdict(12, ok, f"two fresh runs byte-identical to the committed file ({len(golden)} bytes)")
