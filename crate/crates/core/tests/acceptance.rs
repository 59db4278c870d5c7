//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with its elapsed time. Run with `--nocapture` to see them.

use std::time::Instant;

use poisar::classify::BOUNDARY_TOL;
use poisar::kernel::{DEFAULT_DEFECT_BUDGET, DEFAULT_MAX_ITERATIONS};
use poisar::transience::{
    DEFAULT_ESCAPE_LEVEL, DEFAULT_HORIZON, DEFAULT_RATIO_EPS, DEFAULT_RATIO_THRESHOLD,
};
use poisar::{
    axis_cycle_check, certify, choose_eps_t2b, choose_r, classify, critical_b, dominant_eigenvalue,
    geometric_rate, irreducibility, p2_closed_form, pn_closed_form, simulate, simulate_stream,
    stationary, transience_ensemble, transition_prob, tv_distance, Distribution, DriftFunction,
    IrreducibilityVerdict, Params, Phase, State, Sublabel, TruncatedKernel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(a: f64, b: f64) -> Params {
    Params::new(a, b, 1.0).unwrap()
}

fn budget(start: Instant, seconds: f64, criterion: &str) {
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < seconds,
        "{criterion} took {elapsed:.2}s, budget {seconds}s"
    );
}

#[test]
fn criterion_1_phase_classification() {
    let start = Instant::now();
    let grid = 400;
    for gi in 0..grid {
        for gj in 0..grid {
            let a = -4.0 + 8.0 * gi as f64 / (grid - 1) as f64;
            let b = -4.0 + 8.0 * gj as f64 / (grid - 1) as f64;
            let label = classify(&params(a, b), BOUNDARY_TOL);
            let gap = b - critical_b(a);
            if gap.abs() <= BOUNDARY_TOL {
                assert_eq!(label.phase, Phase::Boundary, "at ({a}, {b})");
                continue;
            }
            let expected = if gap < 0.0 {
                Phase::Recurrent
            } else {
                Phase::Transient
            };
            assert_eq!(label.phase, expected, "at ({a}, {b})");
            assert!(!label.sublabels.is_empty(), "uncovered point ({a}, {b})");
        }
    }

    // the four showcase parameter sets, one per quadrant of behavior
    assert_eq!(
        classify(&params(0.6, 0.3), BOUNDARY_TOL).sublabels,
        vec![Sublabel::R1]
    );
    assert_eq!(
        classify(&params(3.0, -2.5), BOUNDARY_TOL).sublabels,
        vec![Sublabel::R2]
    );
    assert_eq!(
        classify(&params(-0.3, 1.2), BOUNDARY_TOL).sublabels,
        vec![Sublabel::T1]
    );
    let t2 = classify(&params(1.5, -0.3), BOUNDARY_TOL);
    assert_eq!(t2.phase, Phase::Transient);
    assert!(t2.has(Sublabel::T2b));

    // inhibition after excitation stabilizes; the reverse order does not
    assert_eq!(
        classify(&params(1.4, -0.5), BOUNDARY_TOL).phase,
        Phase::Recurrent
    );
    assert_eq!(
        classify(&params(-0.5, 1.4), BOUNDARY_TOL).phase,
        Phase::Transient
    );

    budget(start, 1.0, "criterion 1");
    println!(
        "[acceptance] criterion 1 PASS: phase diagram exact on a 400x400 grid ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_2_drift_certificates() {
    let start = Instant::now();

    for (a, b) in [(0.6, 0.3), (3.0, -2.5), (1.2, -0.3)] {
        let p = params(a, b);
        let report = certify(&p).unwrap();
        assert!(
            report.verify(&p),
            "certificate fails re-verification at ({a}, {b})"
        );
        assert!(report.boundary_margin < 0.0, "shell margin at ({a}, {b})");
        assert!(report.epsilon > 0.0 && report.epsilon < 1.0);
        assert!(report.k >= 1.0);

        // the selected parameters satisfy their defining inequalities
        let eps = report.epsilon;
        match report.function {
            DriftFunction::Linear { alpha, beta } => {
                assert_eq!(alpha, 1.0);
                assert!(beta > 0.0);
                assert!(beta < (1.0 - a - eps).min(1.0 - eps));
                if b > 0.0 {
                    assert!(beta > b / (1.0 - eps));
                }
            }
            DriftFunction::Angular => {
                assert!(a * a / 4.0 + b < b * eps && b * eps < 0.0);
                assert!(a * a + 4.0 * b * (1.0 - eps) < 0.0);
            }
            DriftFunction::Quadratic { a: qa, b: qb } => {
                assert_eq!((qa, qb), (a, b));
                let lead_i = (b * b - 1.0) / 2.0 + eps;
                let lead_j = (b * b * (1.0 + eps) + eps - 1.0) / 2.0;
                let cross = a * (b + 1.0 - eps);
                assert!(lead_i < 0.0);
                assert!(lead_i * lead_j - cross * cross / 4.0 > 0.0);
            }
        }
    }

    budget(start, 30.0, "criterion 2");
    println!(
        "[acceptance] criterion 2 PASS: drift certificates verified exhaustively ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_3_kernel_oracle_equivalence() {
    let start = Instant::now();
    let p = params(0.6, 0.3);
    let n_box = 50;
    let kernel = TruncatedKernel::build(&p, n_box);
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    // closed-form two-step probabilities against the squared kernel
    for _ in 0..20 {
        let from = State::new(rng.random_range(0..=15), rng.random_range(0..=15));
        let to = State::new(rng.random_range(0..=15), rng.random_range(0..=15));
        let mid = State::new(to.j, from.i);
        let slack = kernel.row_defect(from) + kernel.row_defect(mid);
        assert!(
            slack < 1e-10,
            "defect slack {slack} too large for the check"
        );
        let squared = kernel
            .apply(&kernel.apply(&Distribution::point_mass(n_box, from)))
            .weight(to);
        let closed = p2_closed_form(&p, from, to);
        assert!(closed >= squared - 1e-13);
        assert!(closed - squared <= slack + 1e-12, "{closed} vs {squared}");
    }

    // truncated path sums against matrix powers for n = 3, 4
    for n_steps in [3usize, 4] {
        for _ in 0..10 {
            let from = State::new(rng.random_range(0..=15), rng.random_range(0..=15));
            let to = State::new(rng.random_range(0..=15), rng.random_range(0..=15));
            let mut law = Distribution::point_mass(n_box, from);
            for _ in 0..n_steps {
                law = kernel.apply(&law);
            }
            let power = law.weight(to);
            let closed = pn_closed_form(&p, from, to, n_steps, n_box);
            assert!(
                closed >= power - 1e-13,
                "path sum fell below the kernel power"
            );
            assert!(closed - power <= (1.0 - law.mass()) + 1e-12);
        }
    }

    budget(start, 10.0, "criterion 3");
    println!(
        "[acceptance] criterion 3 PASS: closed forms match kernel powers within defect ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_4_stationarity_and_geometric_decay() {
    let start = Instant::now();
    let p = params(0.6, 0.3);
    let kernel = TruncatedKernel::build(&p, 50);

    let pi = stationary(
        &kernel,
        1e-10,
        DEFAULT_DEFECT_BUDGET,
        DEFAULT_MAX_ITERATIONS,
    )
    .unwrap();
    assert!(pi.residual < 1e-8, "residual {}", pi.residual);

    let rate = geometric_rate(&kernel, State::ORIGIN, 60, &pi).unwrap();
    assert!(rate.beta_hat > 1.0, "beta_hat {}", rate.beta_hat);
    assert!(rate.r_squared > 0.99, "r^2 {}", rate.r_squared);

    // occupation measure of a long seeded run against pi
    let trajectory = simulate(&p, State::ORIGIN, 1_000_000, 0);
    assert!(trajectory.status.is_completed());
    let burn_in = 1000;
    let occupation = Distribution::from_states(
        50,
        (burn_in..trajectory.counts.len())
            .map(|n| State::new(trajectory.counts[n], trajectory.counts[n - 1])),
    );
    let distance = tv_distance(&occupation, &pi.distribution);
    assert!(distance < 0.02, "occupation TV {distance}");

    budget(start, 60.0, "criterion 4");
    println!(
        "[acceptance] criterion 4 PASS: residual {:.2e}, beta_hat {:.4}, r^2 {:.4}, occupation TV {:.4} ({:.2}s)",
        pi.residual,
        rate.beta_hat,
        rate.r_squared,
        distance,
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_5_transience_mechanism_t2() {
    let start = Instant::now();
    let p = params(1.5, -0.3);

    let theta = dominant_eigenvalue(&p).unwrap();
    assert!((theta * theta - p.a * theta - p.b).abs() <= 1e-12);

    let r = choose_r(&p).unwrap();
    assert!(1.0 < r && r < theta);
    assert!(r * r - p.a * r - p.b < 0.0);
    let eps = choose_eps_t2b(&p, r);
    assert!(r * r - p.a * (r - eps) - p.b < 0.0);
    assert!(theta * theta - theta * eps + p.b > 0.0);

    let report = transience_ensemble(
        &p,
        100,
        DEFAULT_HORIZON,
        DEFAULT_ESCAPE_LEVEL,
        0,
        DEFAULT_RATIO_THRESHOLD,
        DEFAULT_RATIO_EPS,
    )
    .unwrap();
    assert!(report.stats.escape_fraction > 0.0);

    let log_theta = theta.ln();
    for run in report.runs.iter().filter(|r| r.escaped) {
        let slope = run
            .growth_rate
            .unwrap_or_else(|| panic!("escaped run {} has no growth rate", run.index));
        assert!(
            (slope - log_theta).abs() <= 0.1 * log_theta,
            "run {}: slope {slope} vs log theta {log_theta}",
            run.index
        );
        let ratio = run.ratio.expect("theta exists");
        assert!(
            ratio.count > 0,
            "run {}: no counts above the ratio threshold",
            run.index
        );
        assert_eq!(
            ratio.fraction, 1.0,
            "run {}: ratio fraction {}",
            run.index, ratio.fraction
        );
    }

    budget(start, 30.0, "criterion 5");
    println!(
        "[acceptance] criterion 5 PASS: escape fraction {:.2}, growth pinned to log theta ({:.2}s)",
        report.stats.escape_fraction,
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_6_transience_mechanism_t1() {
    let start = Instant::now();
    let p = params(-0.3, 1.2);

    let mut late_factors = Vec::new();
    let mut escaped_runs = 0usize;
    for index in 0..100u64 {
        let t = simulate_stream(&p, State::ORIGIN, DEFAULT_HORIZON, 0, index);
        let report = axis_cycle_check(&p, &t).unwrap();
        assert_eq!(report.threshold, 4);
        assert!(
            report.deterministic_zero_ok,
            "stray nonzero after a clamped axis state (run {index})"
        );
        let escaped = poisar::transience::escape_step(&t, DEFAULT_ESCAPE_LEVEL).is_some();
        if escaped {
            escaped_runs += 1;
            let half = report.two_step_factors.len() / 2;
            late_factors.extend_from_slice(&report.two_step_factors[half..]);
        }
    }
    assert!(escaped_runs > 0, "no run reached the escape level");
    assert!(!late_factors.is_empty());

    let mean = late_factors.iter().sum::<f64>() / late_factors.len() as f64;
    assert!(
        (mean - p.b).abs() <= 0.1 * p.b,
        "late factor mean {mean} vs b {}",
        p.b
    );
    let growing = late_factors.iter().filter(|&&f| f > 1.0).count();
    assert!(
        growing as f64 >= 0.95 * late_factors.len() as f64,
        "only {growing}/{} late factors grow",
        late_factors.len()
    );

    budget(start, 30.0, "criterion 6");
    println!(
        "[acceptance] criterion 6 PASS: deterministic zeros on all runs, late factor mean {:.3} ({:.2}s)",
        mean,
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_7_irreducibility() {
    let start = Instant::now();

    use IrreducibilityVerdict::*;
    let cases: [(f64, f64, IrreducibilityVerdict); 9] = [
        (0.5, -10.0, StronglyIrreducible),    // a >= 0
        (0.5, 0.3, StronglyIrreducible),      // a >= 0
        (0.0, -1.0, StronglyIrreducible),     // a = 0 boundary of the first branch
        (-0.5, 0.7, StronglyIrreducible),     // a > -lambda and a + b >= 0
        (-0.5, 0.5, StronglyIrreducible),     // a + b = 0 exactly
        (-2.0, 0.5, ClassOfOriginIsS),        // a < -lambda
        (-1.0, -1.0, ClassOfOriginIsS),       // a = -lambda exactly
        (-0.5, -0.2, NotStronglyIrreducible), // b <= 0 witness branch
        (-0.5, 0.25, NotStronglyIrreducible), // b > 0 witness branch
    ];
    for (a, b, expected) in cases {
        let report = irreducibility(&params(a, b));
        assert_eq!(report.verdict, expected, "at ({a}, {b})");
        assert_eq!(report.witness.is_some(), expected == NotStronglyIrreducible);
        assert_eq!(
            report.origin_class_identified,
            expected != NotStronglyIrreducible
        );
    }

    // the unreachable witness at (-0.5, -0.2): no path of length <= 6 hits it
    let p = params(-0.5, -0.2);
    let report = irreducibility(&p);
    let witness = report.witness.unwrap();
    assert_eq!(witness, State::new(1, 2));
    assert_eq!(transition_prob(&p, State::ORIGIN, witness), 0.0);
    assert_eq!(p2_closed_form(&p, State::ORIGIN, witness), 0.0);
    for n in 3..=6 {
        assert_eq!(
            pn_closed_form(&p, State::ORIGIN, witness, n, 50),
            0.0,
            "positive probability path of length {n}"
        );
    }

    budget(start, 20.0, "criterion 7");
    println!(
        "[acceptance] criterion 7 PASS: nine-case verdict grid and unreachable witness ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_8_determinism() {
    let start = Instant::now();

    // trajectory artifacts
    let p = params(1.5, -0.3);
    let first = simulate(&p, State::ORIGIN, 400, 12345);
    let second = simulate(&p, State::ORIGIN, 400, 12345);
    assert_eq!(first.to_csv(), second.to_csv());
    assert_eq!(
        serde_json::to_string(&first).unwrap(),
        serde_json::to_string(&second).unwrap()
    );

    // parallel ensembles are bit-identical across runs
    let run_a = transience_ensemble(
        &p,
        100,
        300,
        DEFAULT_ESCAPE_LEVEL,
        7,
        DEFAULT_RATIO_THRESHOLD,
        DEFAULT_RATIO_EPS,
    )
    .unwrap();
    let run_b = transience_ensemble(
        &p,
        100,
        300,
        DEFAULT_ESCAPE_LEVEL,
        7,
        DEFAULT_RATIO_THRESHOLD,
        DEFAULT_RATIO_EPS,
    )
    .unwrap();
    assert_eq!(
        serde_json::to_string(&run_a).unwrap(),
        serde_json::to_string(&run_b).unwrap()
    );

    // stationary weights serialize identically
    let recurrent = params(0.6, 0.3);
    let kernel = TruncatedKernel::build(&recurrent, 40);
    let pi_a = stationary(
        &kernel,
        1e-10,
        DEFAULT_DEFECT_BUDGET,
        DEFAULT_MAX_ITERATIONS,
    )
    .unwrap();
    let pi_b = stationary(
        &kernel,
        1e-10,
        DEFAULT_DEFECT_BUDGET,
        DEFAULT_MAX_ITERATIONS,
    )
    .unwrap();
    assert_eq!(
        serde_json::to_string(&pi_a.distribution).unwrap(),
        serde_json::to_string(&pi_b.distribution).unwrap()
    );

    println!(
        "[acceptance] criterion 8 PASS: byte-identical artifacts under a fixed seed ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}
