//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdlab::algebra::DEFAULT_EPSILON as EPS;
use tdlab::analysis::{check_bound, VarianceConfig};
use tdlab::operator::empirical_modulus;
use tdlab::sweep::{sparse_preset, truncated_preset, SweepRow};
use tdlab::td::{backward_tdlambda_offline, offline_episode_backup};
use tdlab::{
    apply_operator, apply_operator_nstep_form, c_to_h, check_offpolicy_condition, contraction_modulus, h_to_c, iterate,
    run_sweep, weak_recency, IterateConfig, Mrp, NStepWeights, OffPolicyTrace, ReturnSpec, SweepConfig, SweepResult,
    TdWeights, ValueFunction, Verdict, WeightSeq,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
        }
        o.detail = format!("{}; {:.2}s (limit {}s)", o.detail, took.as_secs_f64(), limit.as_secs());
    }
    o
}

fn counterexample() -> Outcome {
    let m = Mrp::two_state(0.4, 0.9).unwrap();
    let h = ReturnSpec::DelayedPulse(1).impulse();
    let cfg = IterateConfig::default();
    let off = iterate(&m, &h, &ValueFunction::new(vec![1.0, -1.0]), &cfg).unwrap();
    let diag = iterate(&m, &h, &ValueFunction::new(vec![1.0, 1.0]), &cfg).unwrap();
    let worst =
        |t: &tdlab::IterationTrace, want: f64| t.growth_ratios().iter().map(|r| (r - want).abs()).fold(0.0, f64::max);
    let (e_off, e_diag) = (worst(&off, 1.2124), worst(&diag, 0.91));
    let pass = matches!(off.verdict, Verdict::Diverged(_))
        && matches!(diag.verdict, Verdict::Converged(_))
        && e_off <= 1e-6
        && e_diag <= 1e-6;
    outcome(
        pass,
        format!(
            "off-diagonal {:?} ratio err {e_off:.1e}, diagonal {:?} ratio err {e_diag:.1e}",
            off.verdict, diag.verdict
        ),
    )
}

fn random_mrp(rng: &mut ChaCha8Rng) -> Mrp {
    let n = rng.random_range(2..=6);
    let term: Vec<bool> = (0..n).map(|_| rng.random_bool(0.25)).collect();
    let rows = (0..n)
        .map(|i| {
            if term[i] {
                (0..n).map(|j| f64::from(u8::from(i == j))).collect()
            } else {
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|x| x / s).collect();
                let fix = 1.0 - row.iter().sum::<f64>();
                row[0] += fix;
                row
            }
        })
        .collect();
    let r = (0..n)
        .map(|i| if term[i] { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect();
    Mrp::new(rows, r, rng.random_range(0.0..0.99), term).unwrap()
}

fn random_spec(rng: &mut ChaCha8Rng, k: usize) -> ReturnSpec {
    match k % 5 {
        0 => ReturnSpec::Lambda(rng.random_range(0.0..1.0)),
        1 => ReturnSpec::NStep(rng.random_range(1..8)),
        2 => ReturnSpec::SparseLambda {
            lambda: rng.random_range(0.0..1.0),
            period: rng.random_range(1..6),
        },
        3 => ReturnSpec::TruncatedLambda {
            lambda: rng.random_range(0.0..1.0),
            len: Some(rng.random_range(1..12)),
        },
        _ => ReturnSpec::DelayedPulse(rng.random_range(0..5)),
    }
}

fn operator_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let m = random_mrp(&mut rng);
        let spec = random_spec(&mut rng, k);
        let v = ValueFunction::new((0..m.n_states()).map(|_| rng.random_range(-2.0..2.0)).collect());
        let h = spec.impulse();
        let a = apply_operator(&m, &h, &v).unwrap();
        let b = apply_operator_nstep_form(&m, &h_to_c(&h).unwrap(), &v).unwrap();
        worst = worst.max(a.linf_distance(&b));
    }
    outcome(
        worst <= 1e-10,
        format!("100 triples, max |TD form - n-step form| = {worst:.1e}"),
    )
}

fn recency_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut disagreements = 0;
    let mut negative = 0;
    for k in 0..1000 {
        let len = rng.random_range(1..12);
        let lo = if k % 2 == 0 { 0.0 } else { -0.6 };
        let c = loop {
            let c: Vec<f64> = (0..len).map(|_| rng.random_range(lo..1.0)).collect();
            let s: f64 = c.iter().sum();
            if s.abs() > 0.05 {
                break c.iter().map(|x| x / s).collect::<Vec<f64>>();
            }
        };
        let nonneg = c.iter().all(|&x| x >= -EPS);
        negative += usize::from(!nonneg);
        let h = c_to_h(&NStepWeights::finite(c)).unwrap();
        disagreements += usize::from(weak_recency(&h, EPS) != nonneg);
    }
    outcome(
        disagreements == 0,
        format!("1000 affine weightings ({negative} with a negative weight), {disagreements} disagreements"),
    )
}

fn spread(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::MIN, f64::max) - xs.iter().copied().fold(f64::MAX, f64::min)
}

fn closed_forms() -> Outcome {
    let mut pass = true;
    let mut notes = vec![];
    for (set, quotes, tol) in [
        (sparse_preset(), [0.9083, 0.9090, 0.9074], 5e-5),
        (truncated_preset(), [0.909, 0.898, 0.908], 1e-3),
    ] {
        let mut vals = vec![];
        for (spec, q) in set.iter().zip(quotes) {
            let closed = spec.modulus_closed_form(0.99).unwrap();
            let generic = contraction_modulus(&h_to_c(&spec.impulse()).unwrap(), 0.99);
            pass &= (closed - generic).abs() <= 1e-12 && (closed - q).abs() < tol;
            notes.push(format!("{spec}={closed:.6}"));
            vals.push(closed);
        }
        let s = spread(&vals);
        pass &= s <= 0.012;
        notes.push(format!("spread {s:.4}"));
    }
    outcome(pass, notes.join(" "))
}

fn walk_sweep(specs: Vec<ReturnSpec>, threads: Option<usize>) -> SweepResult {
    let m = Mrp::random_walk(19, 0.99).unwrap();
    let mut cfg = SweepConfig::new(specs, tdlab::sweep::default_alphas(), Mrp::random_walk_center(19));
    cfg.seed = 0;
    cfg.threads = threads;
    run_sweep(&m, &cfg).unwrap()
}

fn rows_at<'a>(r: &'a SweepResult, specs: &[ReturnSpec], alpha: f64) -> Vec<&'a SweepRow> {
    specs
        .iter()
        .map(|s| r.row(&s.to_string(), alpha).expect("row present"))
        .collect()
}

fn rel_spread(xs: &[f64]) -> f64 {
    let lo = xs.iter().copied().fold(f64::MAX, f64::min);
    spread(xs) / lo
}

fn sparse_sweep(r: &SweepResult) -> Outcome {
    let specs = sparse_preset();
    let mut pass = true;
    let mut notes = vec![];
    for a in [0.05, 0.1, 0.2] {
        let means: Vec<f64> = rows_at(r, &specs, a).iter().map(|x| x.mean_error).collect();
        let rs = rel_spread(&means);
        pass &= rs <= 0.03;
        notes.push(format!("α={a} spread {:.2}%", 100.0 * rs));
    }
    for a in [0.7, 0.8, 0.9] {
        // Rows are m = 1, 3, 5; the ordering asks m=5 ≤ m=3 ≤ m=1.
        let rows = rows_at(r, &specs, a);
        for (hi, lo) in [(0, 1), (1, 2)] {
            let (big, small) = (rows[hi], rows[lo]);
            let holds = small.mean_error <= big.mean_error;
            let overlap = small.mean_error + small.ci95_half >= big.mean_error - big.ci95_half;
            pass &= holds;
            let tag = match (holds, overlap) {
                (true, false) => "separated",
                (true, true) => "inconclusive",
                (false, _) => "violated",
            };
            notes.push(format!("α={a} {} ≤ {} {tag}", small.spec, big.spec));
        }
    }
    let minima: Vec<f64> = r.best.iter().map(|b| b.mean_error).collect();
    let rs = rel_spread(&minima);
    pass &= rs <= 0.05;
    notes.push(format!("minima spread {:.2}%", 100.0 * rs));
    outcome(pass, notes.join("; "))
}

fn trunc_sweep(r: &SweepResult) -> Outcome {
    let specs = truncated_preset();
    let mut pass = true;
    let mut notes = vec![];
    for a in [0.7, 0.8, 0.9] {
        let rows = rows_at(r, &specs, a);
        let full = rows[2].mean_error;
        let ok = full <= rows[0].mean_error && full <= rows[1].mean_error;
        pass &= ok;
        notes.push(format!(
            "α={a} full {full:.4} vs {:.4}, {:.4}",
            rows[0].mean_error, rows[1].mean_error
        ));
    }
    outcome(pass, notes.join("; "))
}

fn forward_backward() -> Outcome {
    let m = Mrp::random_walk(19, 0.99).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in 0..1000u64 {
        let traj = m.sample_trajectory(10, k, 100_000).unwrap();
        let mut v: Vec<f64> = (0..21).map(|_| rng.random_range(-1.0..1.0)).collect();
        v[0] = 0.0;
        v[20] = 0.0;
        let v = ValueFunction::new(v);
        let lambda = rng.random_range(0.0..=1.0);
        let alpha = rng.random_range(0.01..=1.0);
        let back = backward_tdlambda_offline(&traj, &v, lambda, 0.99, alpha).unwrap();
        let fwd = offline_episode_backup(&traj, &v, &ReturnSpec::Lambda(lambda).impulse(), 0.99, alpha).unwrap();
        worst = worst.max(back.linf_distance(&fwd));
    }
    outcome(worst <= 1e-10, format!("1000 episodes, max difference {worst:.1e}"))
}

fn variance_bound() -> Outcome {
    let m = Mrp::random_walk(19, 0.99).unwrap();
    let v = ValueFunction::zeros(21);
    let cfg = VarianceConfig {
        samples: 100_000,
        ..VarianceConfig::default()
    };
    let mut pass = true;
    let mut notes = vec![];
    for s in ["lambda:0.9", "sparse:0.75:3", "trunc:0.93:20", "nstep:10"] {
        let spec = ReturnSpec::parse(s).unwrap();
        let r = check_bound(&m, &spec, &v, Mrp::random_walk_center(19), &cfg).unwrap();
        let ok = r.empirical_variance <= r.bound * 1.05;
        pass &= ok;
        notes.push(format!("{s} var {:.4} bound {:.4}", r.empirical_variance, r.bound));
    }
    outcome(pass, notes.join("; "))
}

fn offpolicy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut disagreements = 0;
    for k in 0..500 {
        let len = rng.random_range(0..20);
        let mut h: Vec<f64> = (0..len).map(|_| rng.random_range(-0.2..1.0)).collect();
        if k % 2 == 0 {
            h.sort_by(|a, b| b.total_cmp(a));
        }
        let pass = check_offpolicy_condition(&OffPolicyTrace::on_policy(h.clone()), EPS).is_none();
        let weak = weak_recency(&TdWeights::new(WeightSeq::finite(h)), EPS);
        disagreements += usize::from(pass != weak);
    }

    let m = Mrp::two_state(0.9, 0.5).unwrap();
    let h = ReturnSpec::DelayedPulse(1).impulse();
    let emp = empirical_modulus(&m, &h, 1000, 0).unwrap();
    let gate = emp < 1.0;
    let converged = gate
        && matches!(
            iterate(&m, &h, &ValueFunction::new(vec![1.0, -1.0]), &IterateConfig::default())
                .unwrap()
                .verdict,
            Verdict::Converged(_)
        );
    let fails_condition = check_offpolicy_condition(&OffPolicyTrace::on_policy(h.seq().head(2)), EPS).is_some();
    outcome(
        disagreements == 0 && gate && converged && fails_condition,
        format!(
            "500 sequences, {disagreements} disagreements; witness modulus {emp:.4}, converged {converged}, condition fails {fails_condition}"
        ),
    )
}

fn main() -> ExitCode {
    let sec = Duration::from_secs;
    let mut results: Vec<(&str, Outcome)> = vec![
        ("counterexample reproduction", timed(Some(sec(1)), counterexample)),
        ("operator form equivalence", timed(Some(sec(10)), operator_equivalence)),
        ("weak recency iff nonnegative weights", timed(None, recency_equivalence)),
        ("modulus closed forms", timed(None, closed_forms)),
    ];

    let start = Instant::now();
    let sparse = walk_sweep(sparse_preset(), None);
    let sparse_time = start.elapsed();
    results.push(("sparse sweep", timed(None, || sparse_sweep(&sparse))));
    let start = Instant::now();
    let trunc = walk_sweep(truncated_preset(), None);
    let trunc_time = start.elapsed();
    results.push(("truncated sweep", timed(None, || trunc_sweep(&trunc))));
    for (i, t) in [(4, sparse_time), (5, trunc_time)] {
        let o = &mut results[i].1;
        o.pass &= t <= sec(120);
        o.detail = format!("{}; sweep {:.2}s (limit 120s)", o.detail, t.as_secs_f64());
    }

    results.push(("forward-backward equivalence", timed(None, forward_backward)));
    results.push(("variance bound", timed(None, variance_bound)));
    results.push(("off-policy checker", timed(None, offpolicy)));
    results.push((
        "sweep determinism",
        timed(None, || {
            let base = sparse.to_csv();
            let same: Vec<bool> = [Some(1), Some(4)]
                .into_iter()
                .map(|t| walk_sweep(sparse_preset(), t).to_csv() == base)
                .collect();
            outcome(
                same.iter().all(|&x| x),
                format!("threads 1 and 4 vs default pool identical: {same:?}"),
            )
        }),
    ));

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
