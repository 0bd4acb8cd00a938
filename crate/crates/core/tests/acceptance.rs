//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Reference values come from the small dense oracles below, which build
//! every operator from explicit Kronecker products rather than the library's
//! Pauli and projector code paths.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng;

use qamsim::densesim::{
    random_mixed_state, random_povm_element, random_pure_state, ObservableElement, QuantumState,
};
use qamsim::graphstate::{connect_witness, graph_stabilizers, ConnectedSystem, Graph};
use qamsim::hstab::{h_stab, h_stab_sampling_oracle, qma_params, qma_soundness_check, random_no_instance, HstabInstance};
use qamsim::linalg::{CMatrix, C64};
use qamsim::mbqc::{pattern_vs_circuit, MeasurementPattern};
use qamsim::par::{stream_rng, Execution, SimRng};
use qamsim::pauli::{PauliString, StabilizerGroup};
use qamsim::protocol::{
    make_params, toy_instance, CircuitSpec, GateSpec, MerlinStrategy, Mode, QamSingle, VerifierCircuit,
};
use qamsim::stabtest::{
    closeness_bounds, exact_pass_probability, gentle_measurement_check, pass_probability_enumerated,
};

const TOL: f64 = 1e-9;
const SIGMAS: f64 = 4.0;

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

// ---------------------------------------------------------------------------
// Oracles

fn letter_matrix(ch: char) -> CMatrix {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let rows = match ch {
        'I' => vec![vec![o, z], vec![z, o]],
        'X' => vec![vec![z, o], vec![o, z]],
        'Y' => vec![vec![z, c(0.0, -1.0)], vec![c(0.0, 1.0), z]],
        'Z' => vec![vec![o, z], vec![z, -o]],
        other => panic!("bad letter {other}"),
    };
    CMatrix::from_rows(rows).unwrap()
}

/// Dense matrix of a signed label such as `-XZY`, qubit 0 leftmost.
fn dense_label(label: &str) -> CMatrix {
    let (sign, letters) = match label.as_bytes()[0] {
        b'+' => (1.0, &label[1..]),
        b'-' => (-1.0, &label[1..]),
        _ => (1.0, label),
    };
    letters.chars().map(letter_matrix).fold(CMatrix::identity(1), |acc, m| acc.kron(&m)).scale_real(sign)
}

fn labels(g: &StabilizerGroup) -> Vec<String> {
    g.generators().iter().map(|p| p.to_string()).collect()
}

/// `prod_j (I + g_j) / 2`
fn oracle_lambda(labels: &[String]) -> CMatrix {
    let mats: Vec<CMatrix> = labels.iter().map(|l| dense_label(l)).collect();
    let d = mats[0].dim();
    mats.iter().fold(CMatrix::identity(d), |acc, g| acc.matmul(&(&CMatrix::identity(d) + g).scale_real(0.5)))
}

/// `2^{-k} sum_S (1 + Tr(prod_{j in S} g_j ρ)) / 2`
fn oracle_enumerated_pass(labels: &[String], rho: &CMatrix) -> f64 {
    let mats: Vec<CMatrix> = labels.iter().map(|l| dense_label(l)).collect();
    let d = mats[0].dim();
    let k = mats.len();
    let mut total = 0.0;
    for bits in 0..(1u64 << k) {
        let s = (0..k).filter(|j| bits >> j & 1 == 1).fold(CMatrix::identity(d), |acc, j| acc.matmul(&mats[j]));
        total += (1.0 + tr(&s, rho)) / 2.0;
    }
    total / (1u64 << k) as f64
}

fn tr(a: &CMatrix, rho: &CMatrix) -> f64 {
    a.matmul(rho).trace().re
}

/// Largest eigenvalue of a Hermitian matrix: `B = A + sI` is positive, and
/// repeated squaring of `B / Tr B` converges to the normalized projector on
/// the top eigenspace `P`, so `λ_max = Tr(A P)`.
fn power_max_eig(a: &CMatrix) -> f64 {
    let d = a.dim();
    let shift: f64 = (0..d).map(|i| a.row(i).iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let mut b = a + &CMatrix::identity(d).scale_real(shift);
    for _ in 0..64 {
        let t = b.trace().re;
        b = b.scale_real(1.0 / t);
        b = b.matmul(&b);
    }
    let b = b.scale_real(1.0 / b.trace().re);
    tr(a, &b)
}

/// Trace norm of a Hermitian matrix from its (library) spectrum.
fn trace_norm(a: &CMatrix) -> f64 {
    a.eigvalsh().iter().map(|v| v.abs()).sum()
}

/// `J(θ) = (1/√2) [[1, e^{-iθ}], [1, -e^{-iθ}]]`
fn oracle_j(theta: f64) -> CMatrix {
    let h = 1.0 / 2f64.sqrt();
    let e = C64::from_polar(h, -theta);
    CMatrix::from_rows(vec![vec![c(h, 0.0), e], vec![c(h, 0.0), -e]]).unwrap()
}

fn random_group(rng: &mut SimRng, n: usize) -> StabilizerGroup {
    let full = graph_stabilizers(&Graph::random(n, 0.5, rng)).unwrap();
    let mut gens: Vec<PauliString> = full.generators().iter().filter(|_| rng.random::<f64>() < 0.75).cloned().collect();
    if gens.is_empty() {
        gens.push(full.generators()[rng.random_range(0..n)].clone());
    }
    StabilizerGroup::new(gens.into_iter().map(|p| if rng.random::<bool>() { p.negate() } else { p }).collect())
        .unwrap()
}

fn random_codespace_state(lambda: &CMatrix, rng: &mut SimRng) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..lambda.dim()).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let p = lambda.mul_vec(&v);
        let n = p.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-6 {
            return p.into_iter().map(|x| x / n).collect();
        }
    }
}

fn random_state(rng: &mut SimRng, n: usize) -> QuantumState {
    if rng.random::<bool>() {
        random_pure_state(n, rng).unwrap()
    } else {
        random_mixed_state(n, rng).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Criteria

fn criterion_1() -> Check {
    let mut rng = stream_rng(1001, 0);
    let mut worst_identity = 0.0f64;
    let mut worst_enum = 0.0f64;
    let cases = 600;
    for i in 0..cases {
        // Mostly N <= 5; a tail up to 8 qubits exercises enumeration at larger n.
        let n = if i < 560 { rng.random_range(1..=5) } else { rng.random_range(6..=8) };
        let g = random_group(&mut rng, n);
        let rho = random_state(&mut rng, n);
        let dens = rho.density();
        let labels = labels(&g);
        let identity = (1.0 + tr(&oracle_lambda(&labels), &dens)) / 2.0;
        let exact = exact_pass_probability(&rho, &g).map_err(|e| e.to_string())?;
        worst_identity = worst_identity.max((exact - identity).abs());
        let enumerated = pass_probability_enumerated(&rho, &g).map_err(|e| e.to_string())?;
        worst_enum = worst_enum.max((enumerated - identity).abs());
        if n <= 5 {
            worst_enum = worst_enum.max((oracle_enumerated_pass(&labels, &dens) - identity).abs());
        }
    }
    ensure(worst_identity <= TOL && worst_enum <= TOL, || {
        format!("max |Δ| identity {worst_identity:e}, enumeration {worst_enum:e}")
    })?;
    Ok(format!("{cases} cases, max |Δ| identity {worst_identity:.1e}, enumeration {worst_enum:.1e}"))
}

fn criterion_2() -> Check {
    let mut rng = stream_rng(1002, 0);
    let mut violations = 0;
    let mut oracle_violations = 0;
    let mut tight = 0.0f64;
    let cases = 1200;
    for i in 0..cases {
        let n = rng.random_range(1..=4);
        let g = random_group(&mut rng, n);
        let lam = oracle_lambda(&labels(&g));
        // Half the cases sit close to the codespace, where the bound bites.
        let rho = if i % 2 == 0 {
            let phi = QuantumState::pure(random_codespace_state(&lam, &mut rng)).unwrap();
            phi.mix(&random_state(&mut rng, n), rng.random_range(0.0..0.3)).unwrap()
        } else {
            random_state(&mut rng, n)
        };
        let check = gentle_measurement_check(&rho, &g).map_err(|e| e.to_string())?;
        violations += !check.holds as usize;
        let dens = rho.density();
        let lhs = trace_norm(&(&dens - &lam.matmul(&dens).matmul(&lam)));
        let rhs = 2.0 * (1.0 - tr(&lam, &dens)).max(0.0).sqrt();
        oracle_violations += (lhs > rhs + TOL) as usize;
        if rhs > 0.0 {
            tight = tight.max(lhs / rhs);
        }
    }
    ensure(violations == 0 && oracle_violations == 0, || {
        format!("{violations} library / {oracle_violations} oracle violations")
    })?;
    Ok(format!("{cases} cases, 0 violations, max lhs/rhs {tight:.3}"))
}

fn criterion_3() -> Check {
    let mut rng = stream_rng(1003, 0);
    let mut violations = 0;
    let mut oracle_violations = 0;
    let cases = 1200;
    for _ in 0..cases {
        let n = rng.random_range(1..=4);
        let g = random_group(&mut rng, n);
        let lam = oracle_lambda(&labels(&g));
        let phi = QuantumState::pure(random_codespace_state(&lam, &mut rng)).unwrap();
        let rho = phi.mix(&random_state(&mut rng, n), rng.random_range(0.0..0.4)).unwrap();
        let m = random_povm_element(n, &mut rng).unwrap();
        let dens = rho.density();
        let p_pass = (1.0 + tr(&lam, &dens)) / 2.0;
        let eps = (1.0 - p_pass + rng.random_range(0.0..0.05)).min(0.5);
        let report = closeness_bounds(&rho, &g, &m, eps).map_err(|e| e.to_string())?;
        violations += !report.holds as usize;
        let overlap = tr(&lam, &dens);
        let sigma = lam.matmul(&dens).matmul(&lam).scale_real(1.0 / overlap);
        let sv = tr(m.matrix(), &sigma);
        let actual = tr(m.matrix(), &dens);
        let slack = 2.0 * (2.0 * eps).sqrt();
        let ok = sv * (1.0 - 2.0 * eps) - slack <= actual + TOL && actual <= sv + slack + TOL;
        oracle_violations += !ok as usize;
    }
    ensure(violations == 0 && oracle_violations == 0, || {
        format!("{violations} library / {oracle_violations} oracle violations")
    })?;
    Ok(format!("{cases} cases with p_pass >= 1 - ε, 0 violations"))
}

fn criterion_4() -> Check {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let p = make_params(1, 2.0 / 3.0, 1.0 / 3.0).map_err(|e| e.to_string())?;
    ensure(close(p.epsilon, 1.0 / 128.0), || format!("ε = {}", p.epsilon))?;
    ensure(close(p.delta, 0.25), || format!("δ = {}", p.delta))?;
    ensure(close(p.q, 1.0 / 97.0), || format!("q = {}", p.q))?;
    ensure(close(p.gap, 1.0 / 1164.0), || format!("gap = {}", p.gap))?;
    let printed = 1.0 / (12.0 * 129.0);
    ensure(close(printed, 1.0 / 1548.0), || "printed bound arithmetic".into())?;
    ensure(p.gap >= printed, || format!("gap {} < printed {printed}", p.gap))?;
    ensure(close(p.printed_gap_bound().unwrap_or(f64::NAN), printed), || "printed bound".into())?;
    let qp = qma_params(2.0 / 3.0, 1.0 / 3.0).map_err(|e| e.to_string())?;
    ensure(close(qp.delta2, 1.0 / 870.0), || format!("Δ2 = {}", qp.delta2))?;
    ensure(close((1.0f64 / 3.0).powi(3) / 128.0, 1.0 / 3456.0), || "Δ2 bound arithmetic".into())?;
    ensure(qp.delta2 >= 1.0 / 3456.0, || "Δ2 below bound".into())?;
    Ok(format!(
        "ε=1/128 δ=1/4 q=1/97 gap=1/{:.0} >= 1/1548; Δ2=1/{:.0} >= 1/3456",
        1.0 / p.gap,
        1.0 / qp.delta2
    ))
}

const TOY_ANGLES: [[f64; 2]; 2] = [[0.4, 1.3], [-0.9, 2.2]];

/// Honest witnesses with circuit acceptance 0.8 on each challenge.
fn toy_witnesses() -> [QuantumState; 2] {
    TOY_ANGLES.map(|[t1, t2]| {
        let u = oracle_j(t2).matmul(&oracle_j(t1));
        let target = [c(0.2f64.sqrt(), 0.0), c(0.8f64.sqrt(), 0.0)];
        QuantumState::pure(u.adjoint().mul_vec(&target)).unwrap()
    })
}

fn oracle_toy_circuit_acceptance() -> f64 {
    let ws = toy_witnesses();
    let total: f64 = TOY_ANGLES
        .iter()
        .zip(&ws)
        .map(|([t1, t2], w)| oracle_j(*t2).matmul(&oracle_j(*t1)).mul_vec(w.amplitudes().unwrap())[1].norm_sqr())
        .sum();
    total / 2.0
}

fn criterion_5() -> Check {
    let inst = toy_instance(TOY_ANGLES, Some(toy_witnesses())).map_err(|e| e.to_string())?;
    let p = *inst.params();
    let p_circuit = oracle_toy_circuit_acceptance();
    let exact = p.q * p_circuit + 1.0 - p.q;
    let lib = inst.soundness_breakdown(&MerlinStrategy::Honest).map_err(|e| e.to_string())?;
    ensure((lib.p_acc - exact).abs() <= 1e-12, || format!("library exact {} vs oracle {exact}", lib.p_acc))?;
    ensure(p_circuit < p.a || exact >= p.alpha - 1e-12, || format!("exact {exact} < α {}", p.alpha))?;
    ensure(p_circuit >= p.a, || format!("toy circuit acceptance {p_circuit} below a"))?;
    let rounds = 100_000;
    let mc = inst.simulate(&MerlinStrategy::Honest, Mode::Direct, rounds, 55, Execution::Auto).map_err(|e| e.to_string())?;
    let rate = mc.rate.unwrap();
    let se = (exact * (1.0 - exact) / rounds as f64).sqrt();
    ensure((rate - exact).abs() <= SIGMAS * se, || format!("rate {rate} vs exact {exact}, σ {se:e}"))?;
    ensure(mc.test_accepts == mc.test_rounds, || "honest test branch rejected".into())?;
    Ok(format!(
        "exact {exact:.9} (α {:.9}), Monte Carlo {rate:.6} at {rounds} rounds, {:.2}σ",
        p.alpha,
        (rate - exact).abs() / se
    ))
}

/// Controlled-RY(φ): witness qubit 0 controls ancilla qubit 1.
fn controlled_ry(phi: f64) -> Vec<Vec<[f64; 2]>> {
    let (cs, sn) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    vec![
        vec![[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        vec![[0.0, 0.0], [0.0, 0.0], [cs, 0.0], [-sn, 0.0]],
        vec![[0.0, 0.0], [0.0, 0.0], [sn, 0.0], [cs, 0.0]],
    ]
}

const NO_BEST: [f64; 2] = [0.3, 0.2];

/// Edge graph, one witness qubit, one ancilla. The ancilla is rotated to
/// `|0>` and then conditionally rotated by the witness, so the best witness
/// `|1>` is accepted with probability `NO_BEST[y]`.
fn no_instance() -> QamSingle {
    let mut gates = vec![GateSpec::new("h", &[1])];
    for (y, b) in NO_BEST.iter().enumerate() {
        let mut g = GateSpec::new("matrix", &[0, 1]).when(0, y as u8);
        g.matrix = Some(controlled_ry(2.0 * b.sqrt().asin()));
        gates.push(g);
    }
    let circuit = VerifierCircuit::new(CircuitSpec { s: 1, m: 1, v: 1, output: 1, gates }).unwrap();
    let system = ConnectedSystem::new(Graph::path(2), 1, &[(0, 0)]).unwrap();
    QamSingle::new(make_params(1, 2.0 / 3.0, 1.0 / 3.0).unwrap(), system, circuit).unwrap()
}

/// `C (I ⊗ diag(0, b_y)) C + (1 - q)(I + Λ)/2` built from explicit matrices.
fn oracle_no_operator(q: f64, y: usize) -> CMatrix {
    let lam = oracle_lambda(&["+XZZ".to_string(), "+ZXI".to_string()]);
    let ew = CMatrix::diagonal(&[c(0.0, 0.0), c(NO_BEST[y], 0.0)]);
    let full = CMatrix::identity(4).kron(&ew);
    // CZ(0, 2) = (I + Z_0 + Z_2 - Z_0 Z_2) / 2
    let z0 = dense_label("+ZII");
    let z2 = dense_label("+IIZ");
    let czm = (&(&(&CMatrix::identity(8) + &z0) + &z2) - &z0.matmul(&z2)).scale_real(0.5);
    let comp = czm.matmul(&full).matmul(&czm);
    let test = (&CMatrix::identity(8) + &lam).scale_real(0.5);
    &comp.scale_real(q) + &test.scale_real(1.0 - q)
}

fn criterion_6() -> Check {
    let inst = no_instance();
    let p = *inst.params();
    let b_exact = (NO_BEST[0] + NO_BEST[1]) / 2.0;
    let lib_b = inst.circuit().exact_best_acceptance().map_err(|e| e.to_string())?;
    ensure((lib_b - b_exact).abs() <= 1e-12, || format!("b_exact {lib_b} vs {b_exact}"))?;
    let bound = p.q * (b_exact + p.delta) + 1.0 - p.q;
    let mut optima = [0.0; 2];
    for (y, slot) in optima.iter_mut().enumerate() {
        let (lib, _) = inst.optimal_cheat(y as u64).map_err(|e| e.to_string())?;
        let oracle = power_max_eig(&oracle_no_operator(p.q, y));
        ensure((lib - oracle).abs() <= 1e-8, || format!("y={y}: spectral {lib} vs oracle {oracle}"))?;
        *slot = lib;
    }
    let optimum = (optima[0] + optima[1]) / 2.0;
    ensure(optimum <= bound + TOL, || format!("optimum {optimum} > β {bound}"))?;

    let mut rng = stream_rng(1006, 0);
    let fixed = random_mixed_state(3, &mut rng).unwrap();
    let strategies = [
        MerlinStrategy::Honest,
        MerlinStrategy::Depolarizing(0.3),
        MerlinStrategy::Fixed(fixed),
        MerlinStrategy::Optimal,
    ];
    let rounds = 100_000;
    let mut worst = f64::NEG_INFINITY;
    for (i, s) in strategies.iter().enumerate() {
        let mc = inst.simulate(s, Mode::Direct, rounds, 600 + i as u64, Execution::Auto).map_err(|e| e.to_string())?;
        let rate = mc.rate.unwrap();
        let se = (optimum * (1.0 - optimum) / rounds as f64).sqrt().max(mc.std_error);
        ensure(rate <= optimum + SIGMAS * se, || format!("{}: rate {rate} > optimum {optimum} + 4σ", s.name()))?;
        worst = worst.max((rate - optimum) / se);
    }
    Ok(format!(
        "b_exact {b_exact}, optimum {optimum:.9} <= β {bound:.9}; 4 adversaries, max (rate - opt)/σ = {worst:.2}"
    ))
}

fn criterion_7() -> Check {
    let mut rng = stream_rng(1007, 0);
    let angles = [0.3, -1.2, 2.5];
    let chain = MeasurementPattern::chain(&angles);
    let target = angles.iter().fold(CMatrix::identity(2), |acc, &t| oracle_j(t).matmul(&acc));
    let chain_resource = |psi: &QuantumState| {
        let mut s = psi.tensor(&qamsim::densesim::plus_state(3)?)?;
        for q in 0..3 {
            s = qamsim::densesim::apply_cz(&s, q, q + 1)?;
        }
        Ok(s)
    };
    let d_chain = pattern_vs_circuit(&chain, chain_resource, &target, 1, 120, &mut rng).map_err(|e| e.to_string())?;
    ensure(d_chain <= TOL, || format!("chain fidelity deficit {d_chain:e}"))?;

    let inst = toy_instance(TOY_ANGLES, Some(toy_witnesses())).map_err(|e| e.to_string())?;
    let mut d_toy = 0.0f64;
    for (y, [t1, t2]) in TOY_ANGLES.iter().enumerate() {
        let text = serde_json::json!({
            "steps": [{"qubit": 2, "plane": "XY", "angle": t1}, {"qubit": 0, "plane": "XY", "angle": t2, "deps": [0]}],
            "outputs": [1],
            "byproduct": {"1": {"x": [1], "z": [0]}}
        });
        let pat = MeasurementPattern::from_json(&text.to_string()).map_err(|e| e.to_string())?;
        let target = oracle_j(*t2).matmul(&oracle_j(*t1));
        let d = pattern_vs_circuit(&pat, |w| connect_witness(w, inst.system()), &target, 1, 120, &mut rng)
            .map_err(|e| e.to_string())?;
        ensure(d <= TOL, || format!("toy pattern y={y}: deficit {d:e}"))?;
        d_toy = d_toy.max(d);
    }

    let rounds = 100_000;
    let mut detail = Vec::new();
    for (label, q) in [("q", inst.params().q), ("q=1/2", 0.5)] {
        let inst = inst.with_q(q).map_err(|e| e.to_string())?;
        for strategy in [MerlinStrategy::Honest, MerlinStrategy::Depolarizing(0.4)] {
            let a = inst.simulate(&strategy, Mode::Direct, rounds, 71, Execution::Auto).map_err(|e| e.to_string())?;
            let b = inst.simulate(&strategy, Mode::Mbqc, rounds, 72, Execution::Auto).map_err(|e| e.to_string())?;
            let (ra, rb) = (a.rate.unwrap(), b.rate.unwrap());
            let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt().max(1.0 / rounds as f64);
            ensure((ra - rb).abs() <= SIGMAS * se, || {
                format!("{label} {}: direct {ra} vs mbqc {rb}, σ {se:e}", strategy.name())
            })?;
            detail.push(format!("{:.2}σ", (ra - rb).abs() / se));
        }
    }
    Ok(format!(
        "chain deficit {d_chain:.1e}, toy patterns {d_toy:.1e}; direct vs mbqc at {rounds} rounds: {}",
        detail.join(", ")
    ))
}

fn criterion_8() -> Check {
    let bell = StabilizerGroup::new(vec!["+XX".parse().unwrap(), "+ZZ".parse().unwrap()]).unwrap();
    let mut e00 = vec![c(0.0, 0.0); 4];
    e00[0] = c(1.0, 0.0);
    let inst = HstabInstance::new(bell, ObservableElement::projector(&e00).unwrap(), 0.9, 0.1).unwrap();
    let h = h_stab(&inst);
    ensure((h - 0.5).abs() <= TOL, || format!("Bell/|00> h = {h}"))?;

    let mut rng = stream_rng(1008, 0);
    let mut worst_gap = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut by_dim = [0usize; 5];
    let cases = 36;
    for i in 0..cases {
        let (n, k) = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)][i % 6];
        let full = graph_stabilizers(&Graph::random(n, 0.5, &mut rng)).unwrap();
        let gens: Vec<PauliString> = full.generators()[..k].to_vec();
        let group = StabilizerGroup::new(gens).unwrap();
        let m = random_povm_element(n, &mut rng).unwrap();
        let inst = HstabInstance::new(group.clone(), m.clone(), 0.9, 0.1).unwrap();
        let exact = h_stab(&inst);
        let lam = oracle_lambda(&labels(&group));
        let oracle = power_max_eig(&lam.matmul(m.matrix()).matmul(&lam));
        worst_oracle = worst_oracle.max((exact - oracle).abs());
        let sampled = h_stab_sampling_oracle(&inst, 10_000, &mut rng).map_err(|e| e.to_string())?;
        ensure(sampled <= exact + TOL, || format!("sampling {sampled} exceeds exact {exact}"))?;
        let gap = exact - sampled;
        ensure(gap <= 0.01, || format!("dim {} codespace: sampled {sampled} vs exact {exact}", 1 << (n - k)))?;
        worst_gap = worst_gap.max(gap);
        by_dim[1 << (n - k)] += 1;
    }
    ensure(worst_oracle <= 1e-8, || format!("eigen-solve vs power iteration {worst_oracle:e}"))?;
    Ok(format!(
        "Bell/|00> h = {h:.6}; {cases} instances (codespace dims 1/2/4: {}/{}/{}), max exact - sampled {worst_gap:.2e}",
        by_dim[1], by_dim[2], by_dim[4]
    ))
}

fn criterion_9() -> Check {
    let mut rng = stream_rng(1009, 0);
    let cases = 240;
    let mut worst_margin = f64::NEG_INFINITY;
    for i in 0..cases {
        let n = 1 + i % 4;
        let inst = random_no_instance(n, &mut rng).map_err(|e| e.to_string())?;
        let p = qma_params(inst.a(), inst.b()).map_err(|e| e.to_string())?;
        let report = qma_soundness_check(&inst, &p).map_err(|e| e.to_string())?;
        let lam = oracle_lambda(&labels(inst.group()));
        let d = lam.dim();
        let op = &inst.observable().matrix().scale_real(p.q) + &(&CMatrix::identity(d) + &lam).scale_real((1.0 - p.q) / 2.0);
        let oracle = power_max_eig(&op);
        let eps = (inst.a() - inst.b()).powi(2) / 32.0;
        let delta = 2.0 * (2.0 * eps).sqrt();
        let q = eps / (1.0 + eps - inst.b() - delta);
        let beta1 = q + (1.0 - q) * (1.0 - eps);
        let beta2 = q * (inst.b() + delta) + 1.0 - q;
        let bound = beta1.max(beta2);
        ensure(report.holds && oracle <= bound + TOL, || {
            format!("case {i}: optimum {} / oracle {oracle} > max(β1, β2) = {bound}", report.optimal_value)
        })?;
        ensure((oracle - report.optimal_value).abs() <= 1e-8, || {
            format!("case {i}: spectral {} vs oracle {oracle}", report.optimal_value)
        })?;
        worst_margin = worst_margin.max(oracle - bound);
    }
    Ok(format!("{cases} no-instances (n <= 4), 0 violations, max optimum - bound {worst_margin:.2e}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "pass-probability identity", criterion_1),
        (2, "gentle-measurement inequality", criterion_2),
        (3, "closeness sandwich", criterion_3),
        (4, "parameter arithmetic", criterion_4),
        (5, "protocol completeness", criterion_5),
        (6, "protocol soundness", criterion_6),
        (7, "MBQC equivalence", criterion_7),
        (8, "h_stab oracle equivalence", criterion_8),
        (9, "QMA soundness sweep", criterion_9),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {id} ({name}): {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {id} ({name}): {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
