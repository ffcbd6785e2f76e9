//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line, captured or not.
//!
//! Reference values come from closures written here in plain `f64`
//! arithmetic (closed forms where they exist, a local bisection otherwise),
//! never from the crate's own expression trees.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transolve::autodiff::derivative;
use transolve::domains::{
    build_residual, generate_dataset, oracle_root, scaled_residual, DatasetCounts, DomainId, DomainParams,
    DomainProblem, BOLTZMANN, PLANCK, SPEED_OF_LIGHT,
};
use transolve::eval::{convergence_buckets, improvement, mean_relative_error, PredictionRecord, RecordStatus};
use transolve::expr::{parse, render, BinOp, Expr, Func};
use transolve::harness::{run_assisted, run_direct, MockBackend, RunOptions};
use transolve::solver::{bisection_oracle, newton_raphson, round_to, SolveStatus, SolverConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- references

/// Plain bisection to machine precision on a sign-changing bracket.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    assert!(f_lo * f(hi) <= 0.0, "reference bracket [{lo}, {hi}] has no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest real root of a*v^3 + b*v^2 + c*v + d (trigonometric / Cardano form).
fn largest_cubic_root(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let t = if disc > 0.0 {
        let s = disc.sqrt();
        (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()
    } else {
        let r = (-p / 3.0).sqrt();
        let phi = ((3.0 * q) / (2.0 * p * r)).clamp(-1.0, 1.0).acos() / 3.0;
        2.0 * r * phi.cos()
    };
    t - b / 3.0
}

/// Root of w = 5 (1 - e^-w), the blackbody peak constant, by fixed point.
fn wien_constant() -> f64 {
    let mut w: f64 = 5.0;
    for _ in 0..200 {
        w = 5.0 * (1.0 - (-w).exp());
    }
    w
}

/// Independent solution of the domain problem.
fn reference_root(params: &DomainParams) -> f64 {
    match *params {
        DomainParams::Fluid(p) => {
            let rr = p.roughness_m / p.diameter_m;
            let f = |x: f64| 1.0 / x.sqrt() + 2.0 * (rr / 3.7 + 2.51 / (p.reynolds * x.sqrt())).log10();
            bisect(f, 1e-3, 0.2)
        }
        DomainParams::Orbital(p) => {
            let (e, m) = (p.eccentricity, p.mean_anomaly_rad);
            bisect(|x: f64| x - e * x.sin() - m, -1.0, PI + 1.0)
        }
        DomainParams::Electronics(p) => {
            let f = |v: f64| {
                v + p.resistance_ohm * p.saturation_current_a * ((v / p.thermal_voltage_v).exp() - 1.0)
                    - p.source_voltage_v
            };
            bisect(f, 0.0, p.source_voltage_v)
        }
        DomainParams::Thermo(p) => {
            // P v^3 - (P b + R T) v^2 + a v - a b = 0
            let rt = p.gas_constant * p.temperature_k;
            largest_cubic_root(p.pressure_atm, -(p.pressure_atm * p.b + rt), p.a, -p.a * p.b)
        }
        DomainParams::Heat(p) => {
            PLANCK * SPEED_OF_LIGHT / (p.peak_wavelength_um * 1e-6 * BOLTZMANN * wien_constant())
        }
        DomainParams::Structural(p) => bisect(|x: f64| x * x.exp() - p.k, 0.0, p.k.max(1.0)),
        DomainParams::Chemical(p) => {
            let (c, r, v) = (p.bet_constant, p.relative_pressure, p.adsorbed_volume);
            v * (1.0 - r) * (1.0 + (c - 1.0) * r) / (c * r)
        }
    }
}

fn draws(domain: DomainId, n: usize, seed: u64) -> Vec<DomainProblem> {
    let mut counts = DatasetCounts::zeros();
    counts.set(domain, n);
    generate_dataset(seed, &counts).expect("dataset generation")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- criteria

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let config = SolverConfig::residual(1e-10);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut worst_ref = 0.0f64;
    let mut failures = Vec::new();
    for domain in DomainId::ALL {
        for problem in draws(domain, 100, 0xACCE) {
            let params = problem.params.expect("generated problems carry params");
            let r = build_residual(&params).expect("residual");
            let fprime = derivative(&r.expr);
            let oracle = bisection_oracle(&r.expr, r.bracket, 1e-10).expect("oracle");
            let outcome = newton_raphson(&r.expr, &fprime, r.x0, &config, None).expect("newton");
            let Some(root) = outcome.unrounded.filter(|_| outcome.status == SolveStatus::Converged) else {
                failures.push(format!("{domain} #{}: {:?}", problem.id, outcome.status));
                continue;
            };
            let e = rel(root, oracle);
            if e > worst.0 {
                worst = (e, format!("{domain} #{}", problem.id));
            }
            worst_ref = worst_ref.max(rel(root, reference_root(&params)));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && worst.0 <= 1e-6 && worst_ref <= 1e-6 && elapsed < Duration::from_secs(10);
    verdict(
        pass,
        format!(
            "700 draws; max rel err vs bisection {:.1e} ({}), vs closed-form/reference {:.1e}; {} non-converged; {:.2?}{}",
            worst.0,
            worst.1,
            worst_ref,
            failures.len(),
            elapsed,
            if failures.is_empty() { String::new() } else { format!(" [{}]", failures.join("; ")) }
        ),
    )
}

fn derivative_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1FF);
    let (mut checked, mut skipped, mut bad) = (0usize, 0usize, Vec::new());
    let mut per_domain = Vec::new();
    for domain in DomainId::ALL {
        let problems = draws(domain, 100, 0xD1FF);
        let mut skipped_here = 0;
        for problem in &problems {
            let r = build_residual(problem.params.as_ref().unwrap()).unwrap();
            let d = derivative(&r.expr);
            let x = rng.gen_range(r.bracket.lo..=r.bracket.hi);
            let h = 6e-6 * if x == 0.0 { 1.0 } else { x.abs() };
            let fd = (r.expr.eval(x + h) - r.expr.eval(x - h)) / (2.0 * h);
            let analytic = d.eval(x);
            if !fd.is_finite() || !analytic.is_finite() {
                skipped_here += 1;
                continue;
            }
            checked += 1;
            if (analytic - fd).abs() > 1e-5 * (1.0 + fd.abs()) {
                bad.push(format!("{domain} x={x}: {analytic} vs {fd}"));
            }
        }
        skipped += skipped_here;
        per_domain.push(format!("{}={}", domain.as_str(), skipped_here));
    }
    let total = checked + skipped;
    verdict(
        bad.is_empty() && checked > 0,
        format!(
            "{checked}/{total} points checked, skip rate {:.1}% ({}); {} mismatches{}",
            100.0 * skipped as f64 / total as f64,
            per_domain.join(", "),
            bad.len(),
            bad.first().map(|b| format!(", first: {b}")).unwrap_or_default()
        ),
    )
}

/// Line-by-line Newton loop with the replication criterion, for comparison.
fn reference_trace(f: impl Fn(f64) -> f64, fp: impl Fn(f64) -> f64, x0: f64, gt: f64) -> (&'static str, u32, f64) {
    let mut x = x0;
    for i in 1..=1000u32 {
        let d = fp(x);
        if d == 0.0 {
            return ("derivative_vanished", i, x);
        }
        let x_new = x - f(x) / d;
        if (x_new - gt).abs() < 1e-4 {
            return ("converged", i, x_new);
        }
        x = x_new;
    }
    ("max_iterations", 1000, x)
}

fn algorithm_fidelity() -> Verdict {
    let cfg = SolverConfig::replication();
    let mut notes = Vec::new();
    let mut pass = true;

    let f = parse("x**2 - 4").unwrap();
    let o = newton_raphson(&f, &derivative(&f), 3.0, &cfg, Some(2.0)).unwrap();
    let r = reference_trace(|x| x * x - 4.0, |x| 2.0 * x, 3.0, 2.0);
    let x = o.unrounded.unwrap_or(f64::NAN);
    let ok = o.status == SolveStatus::Converged && (x - 2.0).abs() < 1e-4 && o.iterations <= 6 && r.1 == o.iterations;
    pass &= ok;
    notes.push(format!("x^2-4: {} in {} iter (ref {})", o.status.as_str(), o.iterations, r.1));

    let f = parse("x**2").unwrap();
    let o = newton_raphson(&f, &derivative(&f), 0.0, &cfg, Some(0.0)).unwrap();
    let ok = o.status == SolveStatus::DerivativeVanished && o.iterations == 1;
    pass &= ok;
    notes.push(format!("x^2 at 0: {} at iter {}", o.status.as_str(), o.iterations));

    // Newton on x^3 - 2x + 2 from 0 cycles 0 -> 1 -> 0 forever.
    let f = parse("x**3 - 2*x + 2").unwrap();
    let gt = bisect(|x| x * x * x - 2.0 * x + 2.0, -3.0, -1.0);
    let o = newton_raphson(&f, &derivative(&f), 0.0, &cfg, Some(gt)).unwrap();
    let r = reference_trace(|x| x * x * x - 2.0 * x + 2.0, |x| 3.0 * x * x - 2.0, 0.0, gt);
    let ok = o.status == SolveStatus::MaxIterations && o.iterations == 1000 && r.0 == "max_iterations";
    pass &= ok;
    notes.push(format!("x^3-2x+2 from 0: {} after {}", o.status.as_str(), o.iterations));

    verdict(pass, notes.join("; "))
}

fn table_improvements() -> Verdict {
    let a = improvement(1.237, 0.225).unwrap();
    let b = improvement(1.155, 0.250).unwrap();
    let c = improvement(0.765, 0.246).unwrap();
    let pass = (a - 81.8).abs() <= 0.05 && (b - 78.4).abs() <= 0.05 && (c - 67.9).abs() <= 0.2;
    verdict(pass, format!("{a:.3}% (81.8), {b:.3}% (78.4), {c:.3}% (67.9 +-0.2)"))
}

fn table_means() -> Verdict {
    let direct = [0.765, 0.891, 0.865, 1.237, 1.085, 1.155];
    let assisted = [0.246, 0.262, 0.258, 0.225, 0.301, 0.250];
    let md = direct.iter().sum::<f64>() / 6.0;
    let ma = assisted.iter().sum::<f64>() / 6.0;
    let pass = (md - 1.000).abs() <= 0.005 && (ma - 0.257).abs() <= 0.005;
    verdict(pass, format!("direct mean {md:.4} (1.000), assisted mean {ma:.4} (0.257)"))
}

fn dataset_shape() -> Verdict {
    let expected = [
        (DomainId::FluidMechanics, 16),
        (DomainId::OrbitalMechanics, 16),
        (DomainId::Electronics, 16),
        (DomainId::Thermodynamics, 16),
        (DomainId::HeatTransfer, 11),
        (DomainId::Structural, 13),
        (DomainId::Chemical, 12),
    ];
    let mut pass = true;
    let (mut worst_cert, mut worst_gt) = (0.0f64, 0.0f64);
    for seed in [0u64, 1, 2024] {
        let ds = generate_dataset(seed, &DatasetCounts::default()).unwrap();
        pass &= ds.len() == 100;
        for (domain, n) in expected {
            pass &= ds.iter().filter(|p| p.domain == domain).count() == n;
        }
        for p in &ds {
            let params = p.params.as_ref().unwrap();
            let r = build_residual(params).unwrap();
            let root = oracle_root(params).unwrap();
            worst_cert = worst_cert.max(scaled_residual(&r.expr, &derivative(&r.expr), root));
            // the ground truth is the reference root to three decimals
            worst_gt = worst_gt.max((p.ground_truth - reference_root(params)).abs());
            pass &= p.ground_truth == round_to(root, 3);
        }
    }
    pass &= worst_cert <= 1e-8 && worst_gt <= 5e-4 + 1e-9;
    verdict(
        pass,
        format!("3 seeds x 100 problems, counts 16/16/16/16/11/13/12; max scaled residual {worst_cert:.1e}; max |gt - reference| {worst_gt:.1e}"),
    )
}

fn end_to_end() -> Verdict {
    let start = Instant::now();
    let ds = generate_dataset(0, &DatasetCounts::default()).unwrap();
    let mock = MockBackend::new(&ds);
    let assisted = run_assisted(&ds, &mock, &SolverConfig::default(), &RunOptions::default()).unwrap();
    let direct = run_direct(&ds, &mock, &RunOptions::default()).unwrap();
    let mre_a = mean_relative_error(&assisted.records);
    let mre_d = mean_relative_error(&direct.records);
    let failed = convergence_buckets(&assisted.records).failed;
    let elapsed = start.elapsed();
    let pass = assisted.records.len() == 100
        && direct.records.len() == 100
        && format!("{mre_a:.3}") == "0.000"
        && format!("{mre_d:.3}") == "0.000"
        && failed == 0
        && elapsed < Duration::from_secs(30);
    verdict(
        pass,
        format!("assisted MRE {mre_a:.2e}, {failed} failed; direct MRE {mre_d:.2e}; {elapsed:.2?}"),
    )
}

fn bucketing() -> Verdict {
    let rec = |n, status| PredictionRecord::assisted(1, DomainId::Structural, 1.0, 1.0, n, status);
    let records = [
        rec(5, RecordStatus::Converged),
        rec(15, RecordStatus::Converged),
        rec(16, RecordStatus::Converged),
        rec(100, RecordStatus::Converged),
        rec(101, RecordStatus::Converged),
        rec(1000, RecordStatus::MaxIterations),
        rec(1, RecordStatus::DerivativeVanished),
    ];
    let t = convergence_buckets(&records);
    let pass = (t.fast, t.slow, t.very_slow, t.failed) == (2, 2, 2, 1);
    verdict(pass, format!("fast={} slow={} very_slow={} failed={}", t.fast, t.slow, t.very_slow, t.failed))
}

fn kepler() -> Verdict {
    let config = SolverConfig::residual(1e-10);
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut zero_exact = true;
    for e in [0.1, 0.5, 0.9] {
        for m in [0.0, PI / 4.0, PI / 2.0, PI] {
            let r = build_residual(&DomainParams::orbital(e, m)).unwrap();
            let o = newton_raphson(&r.expr, &derivative(&r.expr), r.x0, &config, None).unwrap();
            let Some(big_e) = o.unrounded.filter(|_| o.status == SolveStatus::Converged) else {
                pass = false;
                continue;
            };
            let res = (big_e - e * big_e.sin() - m).abs();
            worst = worst.max(res);
            pass &= res < 1e-9;
            pass &= (big_e - reference_root(&DomainParams::orbital(e, m))).abs() < 1e-8;
            if m == 0.0 {
                zero_exact &= big_e == 0.0;
            }
        }
    }
    pass &= zero_exact;
    verdict(pass, format!("12 cases, max |E - e sin E - M| {worst:.1e}; M=0 gives E=0 exactly: {zero_exact}"))
}

fn random_tree(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..5) {
            0 | 1 => Expr::Var,
            2 => Expr::Const(rng.gen_range(0..20) as f64),
            3 => Expr::Const(rng.gen_range(0.0..100.0)),
            _ => Expr::Const(10f64.powi(rng.gen_range(-12..=20)) * rng.gen_range(1.0..10.0)),
        };
    }
    match rng.gen_range(0..10) {
        0 => Expr::Neg(Box::new(random_tree(rng, depth - 1))),
        1 | 2 => {
            let f = Func::ALL[rng.gen_range(0..Func::ALL.len())];
            Expr::Call(f, Box::new(random_tree(rng, depth - 1)))
        }
        _ => {
            let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];
            let op = ops[rng.gen_range(0..ops.len())];
            Expr::Binary(op, Box::new(random_tree(rng, depth - 1)), Box::new(random_tree(rng, depth - 1)))
        }
    }
}

fn parser_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let (mut full_bad, mut compact_bad, mut max_depth) = (0, 0, 0);
    let mut first = None;
    for _ in 0..1000 {
        let tree = random_tree(&mut rng, 7);
        max_depth = max_depth.max(tree.depth());
        if parse(&render(&tree)).ok().as_ref() != Some(&tree) {
            full_bad += 1;
            first.get_or_insert_with(|| render(&tree));
        }
        if parse(&tree.to_string()).ok().as_ref() != Some(&tree) {
            compact_bad += 1;
            first.get_or_insert_with(|| tree.to_string());
        }
    }

    let colebrook = "1/sqrt(x) + 2.0*log10((0.000045/0.15)/3.7 + 2.51/(100000*sqrt(x)))";
    let f = parse(colebrook).unwrap();
    let o = newton_raphson(&f, &derivative(&f), 0.02, &SolverConfig::residual(1e-10), None).unwrap();
    let params = DomainParams::fluid(1e5, 0.000045, 0.15);
    let oracle = oracle_root(&params).unwrap();
    let root = o.unrounded.unwrap_or(f64::NAN);
    let e_oracle = rel(root, oracle);
    let e_ref = rel(root, reference_root(&params));

    let pass = full_bad == 0
        && compact_bad == 0
        && o.status == SolveStatus::Converged
        && e_oracle <= 1e-6
        && e_ref <= 1e-6;
    verdict(
        pass,
        format!(
            "1000 trees (depth <= {max_depth}): {full_bad} full / {compact_bad} compact round-trip failures{}; Colebrook root {root:.9} vs oracle {oracle:.9} (rel {e_oracle:.1e}, reference rel {e_ref:.1e})",
            first.map(|t| format!(" e.g. {t}")).unwrap_or_default()
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("derivative correctness", derivative_correctness),
        ("newton loop fidelity", algorithm_fidelity),
        ("improvement arithmetic", table_improvements),
        ("table means", table_means),
        ("dataset shape", dataset_shape),
        ("end-to-end offline", end_to_end),
        ("convergence bucketing", bucketing),
        ("kepler physics", kepler),
        ("parser properties", parser_properties),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!("criterion {:>2} [{}] {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
