//! Acceptance suite: every headline property of the laboratory, one test per
//! criterion, each printing a pass line with its runtime. Expected values
//! come from closed-form oracles computed independently of the code paths
//! they check.

use degenlab::collapse::{self, ModulusFamily};
use degenlab::modulus::{DegeneracyLaw, DiniVerdict, Modulus};
use degenlab::pde::{self, GridSolution, ProblemSpec, SolveOptions};
use degenlab::renorm::{self, Branch, RenormParams};
use degenlab::sequences::{self, SummableSequence, VanishingSequence};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const BENCH_C: f64 = 0.9428090415820634; // 2 sqrt(2) / 3

fn identity_law() -> DegeneracyLaw {
    DegeneracyLaw::normalized(Modulus::power(1.0, f64::INFINITY).unwrap()).unwrap()
}

fn pass(name: &str, started: Instant, budget_secs: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < budget_secs,
        "{name}: runtime {elapsed:.2}s exceeds the {budget_secs}s budget"
    );
    println!("acceptance {name}: PASS ({elapsed:.2}s)");
}

/// Random l1 inputs: positive mixtures of geometric and power decays.
fn random_sequence(rng: &mut ChaCha8Rng) -> SummableSequence {
    let parts = rng.gen_range(1..=3);
    let mut mix = Vec::new();
    for _ in 0..parts {
        let weight = rng.gen_range(0.1..10.0);
        if rng.gen_bool(0.6) {
            let ratio = rng.gen_range(0.05..0.9);
            mix.push((weight, SummableSequence::geometric(ratio).unwrap()));
        } else {
            let p = rng.gen_range(2.0..4.0);
            mix.push((weight, SummableSequence::power_decay(p).unwrap()));
        }
    }
    SummableSequence::weighted(mix).unwrap()
}

#[test]
fn acceptance_1_modulator_bounds() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let sequences: Vec<SummableSequence> = (0..1000).map(|_| random_sequence(&mut rng)).collect();
    let slack = 1e-9;
    for &epsilon in &[0.5, 1.0] {
        for &delta in &[0.05, 0.09] {
            for (i, a) in sequences.iter().enumerate() {
                let res = sequences::modulator(a, epsilon, delta)
                    .unwrap_or_else(|e| panic!("sequence {i}, eps={epsilon}, delta={delta}: {e}"));
                // c0 bound
                assert!(
                    res.modulator.max_c() <= 1.0 / epsilon + 1e-12,
                    "sequence {i}: max c exceeds 1/eps"
                );
                // certified norm bounds eps(1-delta/2)||a|| <= ||b|| <= eps(1+delta)||a||
                let (lo_bound, hi_bound) = res.b_norm_bounds;
                assert!(
                    res.b_norm.lo() >= lo_bound * (1.0 - slack) - 1e-15,
                    "sequence {i} eps={epsilon} delta={delta}: ||b|| lower bound violated: {:?} vs {lo_bound}",
                    res.b_norm
                );
                assert!(
                    res.b_norm.hi() <= hi_bound * (1.0 + slack) + 1e-15,
                    "sequence {i} eps={epsilon} delta={delta}: ||b|| upper bound violated: {:?} vs {hi_bound}",
                    res.b_norm
                );
                // per-block certificates: tail(n_j) under its threshold, and
                // the direct block sums where cheap enough to enumerate
                let starts = res.modulator.block_starts();
                for (idx, w) in starts.windows(2).enumerate() {
                    let j = idx + 1;
                    let threshold = delta * res.a_norm.lo() / 2f64.powi(2 * j as i32 - 1);
                    let tail = a.tail(w[0]).unwrap();
                    assert!(
                        tail < threshold,
                        "sequence {i} block {j}: tail {tail} not under threshold {threshold}"
                    );
                    if w[1] <= 2000 {
                        let mut s = 0.0;
                        for k in w[0]..w[1] {
                            s += a.term(k).unwrap() / res.modulator.c(k).unwrap();
                        }
                        let bound = epsilon * delta * res.a_norm.hi() / 2f64.powi(j as i32);
                        assert!(
                            s < bound * (1.0 + slack),
                            "sequence {i} block {j}: block sum {s} exceeds {bound}"
                        );
                    }
                }
            }
        }
    }
    pass("1 (modulator norm bounds, 1000 seeded sequences)", started, 10.0);
}

#[test]
fn acceptance_2_adversarial_construction() {
    let started = Instant::now();
    let cases: Vec<(&str, VanishingSequence)> = vec![
        ("1/j", VanishingSequence::reciprocal()),
        ("2^-j", VanishingSequence::geometric(0.5)),
        ("1/log(j+1)", VanishingSequence::reciprocal_log()),
    ];
    for (name, c) in cases {
        let res = sequences::adversarial_for(&c, 1e3).unwrap_or_else(|e| panic!("{name}: {e}"));
        // unit norm
        let norm = res.sequence.l1_norm_best_effort().unwrap();
        assert!(
            (norm.value - 1.0).abs() <= 1e-10,
            "{name}: ||a|| = {} off unity",
            norm.value
        );
        // monotone over the representable range
        let queryable = res
            .blocks
            .iter()
            .filter(|b| b.ln_end < 30.0)
            .map(|b| b.ln_end.exp() as u64)
            .max()
            .unwrap_or(64)
            .min(600_000);
        let mut prev = f64::INFINITY;
        for j in 1..queryable {
            let t = res.sequence.term(j).unwrap();
            assert!(t <= prev * (1.0 + 1e-12), "{name}: a not monotone at {j}");
            prev = t;
        }
        // divergence past the target at the returned index
        assert!(
            res.certified_partial_sum > 1e3,
            "{name}: certified sum {} below target",
            res.certified_partial_sum
        );
        match res.divergence_index {
            Some(idx) => {
                // small enough to verify by direct summation
                let mut s = 0.0;
                for j in 1..=idx {
                    s += res.sequence.term(j).unwrap() / c.value(j as f64);
                }
                assert!(s > 1e3, "{name}: direct partial sum {s} at {idx}");
            }
            None => {
                // astronomically indexed: verify each block certificate
                // against the c-threshold that defines it
                for b in &res.blocks {
                    assert_eq!(b.divergence_contribution, 2f64.powi(b.k as i32 + 2));
                    if b.ln_start < 700.0 {
                        let c_at_start = c.value(b.ln_start.exp());
                        let eps = 2f64.powi(-(2 * b.k as i32 + 3));
                        assert!(
                            c_at_start < eps,
                            "{name} block {}: c = {c_at_start} not under {eps}",
                            b.k
                        );
                    }
                }
            }
        }
    }
    pass("2 (adversarial unit-norm divergence)", started, 5.0);
}

#[test]
fn acceptance_3_dini_certification() {
    let started = Instant::now();
    // power laws: integral of t^alpha / t over (0, 1] is exactly 1/alpha
    for &alpha in &[0.25, 0.5, 1.0, 2.0] {
        let m = Modulus::power(alpha, 1.0).unwrap();
        let exact = 1.0 / alpha;
        for &theta in &[0.1, 0.5, 0.9] {
            let cert = m.dini_integral(1.0, theta, 1e6, 1e-6).unwrap();
            assert_eq!(cert.verdict, DiniVerdict::Dini, "power {alpha} theta {theta}");
            assert!(cert.tail_estimate <= 1e-6);
            assert!(
                cert.lower_bound <= exact && exact <= cert.upper_bound,
                "power {alpha} theta {theta}: {exact} outside [{}, {}]",
                cert.lower_bound,
                cert.upper_bound
            );
        }
    }
    // log-power alpha = 2: substitution u = 1 - ln t gives exactly 1
    let m = Modulus::log_power(2.0, 1.0).unwrap();
    for &theta in &[0.1, 0.5, 0.9] {
        let cert = m.dini_integral(1.0, theta, 1e6, 1e-6).unwrap();
        assert_eq!(cert.verdict, DiniVerdict::Dini, "log-power theta {theta}");
        assert!(cert.tail_estimate <= 1e-6);
        assert!(
            cert.lower_bound <= 1.0 && 1.0 <= cert.upper_bound,
            "log-power theta {theta}: bracket [{}, {}]",
            cert.lower_bound,
            cert.upper_bound
        );
    }
    // log-power alpha = 1 diverges, certified past the cap
    let m = Modulus::log_power(1.0, 1.0).unwrap();
    let cert = m.dini_integral(1.0, 0.5, 1e6, 1e-6).unwrap();
    assert_eq!(cert.verdict, DiniVerdict::Divergent);
    assert!(cert.lower_bound > 1e6, "divergent lower bound {}", cert.lower_bound);
    pass("3 (Dini brackets and divergence)", started, 5.0);
}

#[test]
fn acceptance_4_renormalization_trace() {
    let started = Instant::now();
    let params = RenormParams::new(identity_law(), 2.0, 0.75, 0.375, 1.0 / 20.0, 40).unwrap();
    let trace = renorm::run_shoring_algorithm(&params).unwrap();

    // pinned initial scale: 2L r^beta = omega(r) solves to r = 4^-4
    assert!((trace.scale.r - 1.0 / 256.0).abs() <= 1e-12, "r = {}", trace.scale.r);
    assert!((trace.scale.mu1 - 1.0 / 16.0).abs() <= 1e-12, "mu1 = {}", trace.scale.mu1);
    assert!((trace.scale.theta - 1.0 / 16.0).abs() <= 1e-12, "theta = {}", trace.scale.theta);
    assert!(
        (trace.scale.sigma1_at_one - 1.0).abs() <= 1e-10,
        "sigma_1(1) = {}",
        trace.scale.sigma1_at_one
    );
    assert_eq!(trace.clamp_count, 0, "clamped branches must not occur");
    assert_eq!(trace.depth(), 40);

    // pinned law values and strict product decay
    let mut prev_tau = f64::INFINITY;
    for s in &trace.steps {
        if s.k >= 2 {
            assert!(s.sigma_at_c >= 1.0 - 1e-9, "step {}: sigma_k(c_k) = {}", s.k, s.sigma_at_c);
        }
        assert!(s.tau < prev_tau, "tau not strictly decreasing at {}", s.k);
        prev_tau = s.tau;
    }

    // raised-step inequality tau_k <= sigma^{-1}(theta^k)/c_k, per step and
    // summed over the raised steps (the kept steps sit below their
    // predecessors instead, so the comparison is scoped to raises)
    let mut raised_tau = 0.0;
    let mut raised_bound = 0.0;
    let mut raised_count = 0;
    for s in &trace.steps {
        if s.branch == Branch::Raised {
            let b = trace.theta_sequence().term(s.k as u64).unwrap() / s.c;
            assert!(s.tau <= b * (1.0 + 1e-9), "raised step {}: tau {} > {b}", s.k, s.tau);
            raised_tau += s.tau;
            raised_bound += b;
            raised_count += 1;
        }
    }
    assert!(raised_count > 0, "the identity law must raise scales");
    assert!(raised_tau <= raised_bound * (1.0 + 1e-9));

    // the modulator comparison behind the construction, with eps(1+delta) = 1:
    // eps(1-delta/2)||a|| <= ||a/c|| <= ||a||
    let m = trace.modulator();
    let eps = 1.0 / (1.0 + params.delta);
    assert!((m.epsilon - eps).abs() < 1e-15);
    assert!(m.b_norm.lo() >= eps * (1.0 - params.delta / 2.0) * m.a_norm.value * (1.0 - 1e-9));
    assert!(m.b_norm.hi() <= m.a_norm.value * (1.0 + 1e-9));

    trace.verify(1e-9).unwrap();
    pass("4 (renormalization trace, identity law)", started, 5.0);
}

#[test]
fn acceptance_5_shoring_and_collapse() {
    let started = Instant::now();
    // the renormalized family is shored up at its own pin points
    let params = RenormParams::new(identity_law(), 2.0, 0.75, 0.375, 1.0 / 20.0, 40).unwrap();
    let trace = renorm::run_shoring_algorithm(&params).unwrap();
    let gammas = trace.shoring_points();
    let report = collapse::is_shored_up(
        |n, t| {
            trace
                .renormalized_sigma_eval(n, t)
                .map_err(|e| collapse::CollapseError::Invalid(e.to_string()))
        },
        &gammas,
        1.0 - 1e-9,
    )
    .unwrap();
    assert!(
        report.shored_up,
        "trace family not shored up: min {} at {}",
        report.min_value, report.witness
    );

    // the power ladder collapses towards the whole interval: at budget 200
    // the infimum at s is s^200, so a 1/2 threshold detects collapse out to
    // 2^(-1/200) = 0.9965
    let grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
    let ladder = ModulusFamily::power_ladder(200).unwrap();
    let r = collapse::collapsing_measure_estimate(&ladder, &grid, 200, 0.5).unwrap();
    assert!(r.mu_estimate >= 0.99, "ladder mu = {}", r.mu_estimate);

    // a finite pair never collapses: at the 1e-12 threshold no grid value of
    // min(s, s^2) = s^2 >= 1e-6 qualifies
    let pair = ModulusFamily::finite(vec![
        Modulus::power(1.0, 1.0).unwrap(),
        Modulus::power(2.0, 1.0).unwrap(),
    ])
    .unwrap();
    let r = collapse::collapsing_measure_estimate(&pair, &grid, 10, 1e-12).unwrap();
    assert_eq!(r.mu_estimate, 0.0, "finite pair mu = {}", r.mu_estimate);
    pass("5 (shoring check and collapsing measure)", started, 10.0);
}

#[test]
fn acceptance_6_pde_benchmark() {
    let started = Instant::now();
    let exact = |x: f64| BENCH_C * x.abs().powf(1.5);
    let opts = SolveOptions::default();

    // |u'| u'' = 1 with boundary 2 sqrt(2)/3: solution c |x|^{3/2}
    let solve_at = |h: f64| -> GridSolution {
        let p = ProblemSpec::one_d(identity_law(), |_| 1.0, 0.0, BENCH_C, BENCH_C, h).unwrap();
        pde::solve(&p, &opts).unwrap()
    };
    let sol = solve_at(1e-3);
    let err = sol.max_error(|x| exact(x[0]));
    assert!(err <= 5e-3, "max grid error {err}");

    // halving the mesh improves the error by at least 1.8
    let coarse = solve_at(2e-3).max_error(|x| exact(x[0]));
    assert!(coarse / err >= 1.8, "refinement ratio {}", coarse / err);

    // tangent-plane decay at the degenerate point, measured on a fine
    // sampling of the benchmark profile so all six scales hold >= 5 points
    let fine = GridSolution::sample_1d(exact, 2e-5);
    let report = pde::fit_tangent_planes(&fine, &[0.0], 0.25, 6, None).unwrap();
    assert_eq!(report.scales.len(), 6, "six scales at ratio 1/4");
    let exponent = report.holder_exponent.unwrap();
    assert!((exponent - 0.5).abs() <= 0.05, "gradient exponent {exponent}");
    let mut prev = f64::INFINITY;
    for s in &report.scales {
        let ratio = s.e / s.radius;
        assert!(ratio < prev, "E_n/r^n not monotone at n = {}", s.n);
        prev = ratio;
    }
    assert!(prev < 0.05 * report.scales[0].e / report.scales[0].radius);

    // the same instrumentation on the solver output, to its feasible depth
    let solver_report = pde::fit_tangent_planes(&sol, &[0.0], 0.25, 6, None).unwrap();
    assert!(solver_report.truncated, "h = 1e-3 cannot resolve six scales");
    assert!(solver_report.scales.len() >= 3);
    let mut prev = f64::INFINITY;
    for s in &solver_report.scales {
        let ratio = s.e / s.radius;
        assert!(ratio < prev, "solver E_n/r^n not monotone at n = {}", s.n);
        prev = ratio;
    }
    pass("6 (degenerate benchmark and C1 decay)", started, 60.0);
}

#[test]
fn acceptance_7_xi_uniformity() {
    let started = Instant::now();
    // steep boundary keeps the law's argument in a stable range, so the
    // Holder estimate's xi-independence is visible as near-equal seminorms
    let opts = SolveOptions::default();
    let mut seminorms = Vec::new();
    let mut fitted_gamma = None;
    for &xi in &[0.0, 10.0, 100.0] {
        let p = ProblemSpec::one_d(identity_law(), |_| 1.0, xi, -4.0, 4.0, 1e-3).unwrap();
        let sol = pde::solve(&p, &opts).unwrap();
        if xi == 0.0 {
            let rep = pde::fit_tangent_planes(&sol, &[0.3], 0.25, 4, None).unwrap();
            let g = rep.holder_exponent.unwrap().clamp(0.05, 1.0);
            fitted_gamma = Some(g);
        }
        let gamma = fitted_gamma.unwrap();
        let s = pde::holder_seminorm(&sol, &[0.0], 0.5, gamma).unwrap();
        seminorms.push(s);
    }
    let max = seminorms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = seminorms.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        max <= 1.1 * min,
        "seminorms spread beyond 10%: {seminorms:?} (gamma = {:?})",
        fitted_gamma
    );
    pass("7 (xi-uniform Holder seminorms)", started, 120.0);
}

#[test]
fn acceptance_8_determinism() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mk = |out: &str| {
        degenlab::experiment::ExperimentConfig::from_json(&format!(
            r#"{{
                "command": "pipeline",
                "seed": 20240801,
                "output_dir": "{out}",
                "threads": 2,
                "modulus": {{"family": "power", "alpha": 1.0, "domain_end": 1e300}},
                "renorm": {{"beta": 0.75, "depth": 30}},
                "pde": {{
                    "mesh": 0.004,
                    "boundary": {{"offset": 0.9428090415820634}},
                    "xi_sweep": [0.0, 5.0],
                    "fit_depth": 3
                }}
            }}"#
        ))
        .unwrap()
    };
    degenlab::experiment::run(&mk("first"), tmp.path()).unwrap();
    degenlab::experiment::run(&mk("second"), tmp.path()).unwrap();
    let mut compared = 0;
    for entry in std::fs::read_dir(tmp.path().join("first")).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_string_lossy().to_string();
        if name.ends_with(".csv") {
            let a = std::fs::read(tmp.path().join("first").join(&name)).unwrap();
            let b = std::fs::read(tmp.path().join("second").join(&name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
            compared += 1;
        }
    }
    assert!(compared >= 5, "expected several CSV artifacts, compared {compared}");
    pass("8 (byte-identical reruns)", started, 120.0);
}
