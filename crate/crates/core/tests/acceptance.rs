use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use neckscope::app::{
    neck_distance_agreement, pohozaev_worst, pullback_identity_error, run_suite, saturation_error, volume_ratio,
    ode_sweep, RunOptions, Setup, Suite, DEFAULT_SEED, ODE_DRAWS, VOLUME_CONSTANT, VOLUME_DELTAS,
};
use neckscope::config::parse_config;
use neckscope::decomposition::PieceKind;
use neckscope::distance::annulus_distance;
use neckscope::family::{image_separation, verify_decay};
use neckscope::metrics::compare_metrics;
use neckscope::neck_ode::{
    chain_constant, chain_decay_check, generalized_three_circle_check, neck_profile, neck_slopes, ode_solve,
    RegionLadder, PROFILE_DT,
};
use neckscope::report::Status;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURES: [&str; 4] = ["single_bubble", "two_bubbles", "three_bubbles", "nested_chain"];

fn fixture(name: &str) -> Setup {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"));
    Setup::new(parse_config(p).unwrap()).unwrap()
}

/// Outcome of one criterion: the measured verdict and whether it matches the
/// analysed expectation.
struct Line {
    n: usize,
    pass: bool,
    expected_pass: bool,
    secs: f64,
    limit: f64,
    detail: String,
}

impl Line {
    fn print(&self) {
        let verdict = if self.pass { "pass" } else { "fail" };
        let timing = if self.secs <= self.limit { "in budget" } else { "over budget" };
        println!(
            "criterion {:>2}: {verdict} ({:.2} s, {timing} {} s) {}",
            self.n, self.secs, self.limit, self.detail
        );
    }

    fn as_expected(&self) -> bool {
        self.pass == self.expected_pass
    }
}

fn timed(n: usize, limit: f64, expected_pass: bool, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (pass, detail) = f();
    Line { n, pass, expected_pass, secs: start.elapsed().as_secs_f64(), limit, detail }
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

fn pullback() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for name in FIXTURES {
        let s = fixture(name);
        for t in s.valid_t(&[10.0, 20.0, 40.0]) {
            worst = worst.max(pullback_identity_error(&s, t, 10_000, DEFAULT_SEED).unwrap());
        }
    }
    (worst <= 1e-12, format!("max relative error {worst:.3e}"))
}

fn saturation() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut skipped = Vec::new();
    for name in FIXTURES {
        let s = fixture(name);
        let ts = [10.0, 20.0, 40.0, 80.0];
        let valid = s.valid_t(&ts);
        skipped.extend(ts.iter().filter(|t| !valid.contains(t)).map(|t| format!("{name}@{t}")));
        for t in valid {
            worst = worst.max(saturation_error(&s, t, 32).unwrap());
        }
    }
    (worst <= 1e-12, format!("max |norm - sqrt2| {worst:.3e}; invalid indices skipped [{}]", skipped.join(", ")))
}

fn decay() -> (bool, String) {
    let s = fixture("two_bubbles");
    let mut sups = Vec::new();
    let mut flats = Vec::new();
    for t in [10.0, 20.0, 40.0] {
        let d = verify_decay(&s.family, &s.graph, t, 512, s.kappa()).unwrap();
        sups.push(d.sup);
        flats.push(d.sup_flat);
    }
    let v = spread(&sups);
    let grow = flats[2] / flats[0];
    (v < 1.5 && grow > 5.0, format!("weighted sup variation {v:.4}, control growth {grow:.3e}"))
}

fn metric_drift() -> (bool, String) {
    let mut worst: f64 = 1.0;
    let mut finite = true;
    for name in FIXTURES {
        let s = fixture(name);
        let mut sups = Vec::new();
        let mut infs = Vec::new();
        for t in s.valid_t(&[10.0, 20.0, 40.0]) {
            let m = compare_metrics(&s.graph, t, 4000, s.kappa(), DEFAULT_SEED).unwrap();
            finite &= m.sup_ratio.is_finite() && m.inf_ratio > 0.0;
            sups.push(m.sup_ratio);
            infs.push(m.inf_ratio);
        }
        worst = worst.max(spread(&sups)).max(spread(&infs));
    }
    (finite && worst < 2.0, format!("ratios finite {finite}, worst drift {worst:.6}"))
}

fn distance_oracle() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut necks = 0;
    for name in FIXTURES {
        let s = fixture(name);
        let t = s.valid_t(&[20.0, 10.0])[0];
        for p in s.graph.pieces().iter().filter(|p| p.kind == PieceKind::SimpleNeck) {
            worst = worst.max(neck_distance_agreement(&s, p.id, t, 512).unwrap());
            necks += 1;
        }
    }
    let o = Complex64::new(0.0, 0.0);
    let log10 = annulus_distance(Complex64::new(0.1, 0.0), o, 1e-3, 1.0).unwrap();
    let closed = (log10 - 10f64.ln()).abs();
    (
        worst <= 1.0 && closed <= 1e-12,
        format!("{necks} necks, worst error / tolerance {worst:.3}; annulus log 10 error {closed:.1e}"),
    )
}

/// Classical RK4 on `g'' = gamma^2 g` from the closed-form initial data.
fn rk4(a: f64, da: f64, gamma: f64, big_t: f64, steps: usize) -> Vec<f64> {
    let h = big_t / steps as f64;
    let k2 = gamma * gamma;
    let (mut y, mut v) = (a, da);
    let mut out = vec![y];
    for _ in 0..steps {
        let (y1, v1) = (v, k2 * y);
        let (y2, v2) = (v + 0.5 * h * v1, k2 * (y + 0.5 * h * y1));
        let (y3, v3) = (v + 0.5 * h * v2, k2 * (y + 0.5 * h * y2));
        let (y4, v4) = (v + h * v3, k2 * (y + h * y3));
        y += h / 6.0 * (y1 + 2.0 * y2 + 2.0 * y3 + y4);
        v += h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
        out.push(y);
    }
    out
}

fn ode() -> (bool, String) {
    let sw = ode_sweep(DEFAULT_SEED, ODE_DRAWS).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut rk_err: f64 = 0.0;
    for _ in 0..20 {
        let gamma = rng.gen_range(0.5..2.0);
        let big_t = rng.gen_range(5.5..12.0);
        let a = rng.gen_range(0.1..10.0);
        let b = a * rng.gen_range(1.0..1e4);
        let sol = ode_solve(a, b, gamma, big_t).unwrap();
        let steps = 20_000;
        for (k, y) in rk4(a, sol.dg(0.0), gamma, big_t, steps).iter().enumerate().step_by(500) {
            let g = sol.g(big_t * k as f64 / steps as f64);
            rk_err = rk_err.max((y - g).abs() / g);
        }
    }
    (
        sw.passed == sw.draws && rk_err <= 1e-8,
        format!(
            "{}/{} draws meet both bounds ({}/{} meet the sup bound, worst (a / inf g) / gamma {:.3e}); RK4 vs closed form {rk_err:.1e}",
            sw.passed, sw.draws, sw.sup_passed, sw.draws, sw.worst_left_over_gamma
        ),
    )
}

fn sharp_rate() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut necks = 0;
    for name in FIXTURES {
        let s = fixture(name);
        let t = s.valid_t(&[20.0, 10.0])[0];
        for p in s.graph.pieces().iter().filter(|p| p.kind == PieceKind::SimpleNeck) {
            let prof = neck_profile(&s.family, &s.graph, p.id, t, PROFILE_DT).unwrap();
            for k in neck_slopes(&prof, 1.0) {
                worst = worst.max((k.abs() - 2.0).abs() / 2.0);
            }
            necks += 1;
        }
    }
    let mut chains = 0;
    let mut chains_ok = true;
    for l in [0.5, 1.0, 2.0, 3.0] {
        for m in 5..12 {
            let energies: Vec<f64> = (0..m).map(|i| (2.0 * l * i as f64).exp()).collect();
            let r = chain_decay_check(&energies, l).unwrap();
            let exact = (-2.0 * l * (m - 1) as f64).exp();
            chains_ok &= r.status == Status::Pass && (r.ratio / exact - 1.0).abs() < 1e-12;
            chains_ok &= (r.bound / (chain_constant(l) * (-2.0 * l * m as f64).exp()) - 1.0).abs() < 1e-12;
            chains += 1;
        }
    }
    (
        worst <= 0.05 && chains_ok,
        format!("{necks} necks, worst slope deviation {:.3}%; {chains} synthetic chains pass {chains_ok}", 100.0 * worst),
    )
}

fn generalized() -> (bool, String) {
    let s = fixture("two_bubbles");
    let p = &s.config.parameters;
    let ladder = RegionLadder::new((-3f64).exp()).unwrap();
    let g = generalized_three_circle_check(&s.family, &s.graph, ladder, 20.0, 0.5, p.epsilon1).unwrap();
    (g.beta <= 0.5, format!("E(level 2) / E(level 3 minus level 2) = {:.4e}", g.beta))
}

fn pohozaev() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for name in FIXTURES {
        let s = fixture(name);
        for t in s.valid_t(&[10.0, 20.0, 40.0]) {
            worst = worst.max(pohozaev_worst(&s, t).unwrap());
        }
    }
    (worst <= 1e-8, format!("max |P| / E {worst:.3e}"))
}

fn volume_and_separation() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in FIXTURES {
        let s = fixture(name);
        let t = s.valid_t(&[10.0, 20.0])[0];
        let ratios: Vec<f64> = VOLUME_DELTAS.iter().map(|&d| volume_ratio(&s, d, t).unwrap()).collect();
        ok &= ratios.iter().all(|&v| v <= VOLUME_CONSTANT);
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let sep = image_separation(&s.family, &s.graph, 20.0, 0.1, 256).unwrap();
        ok &= sep.passed;
        parts.push(format!("{name} vol/delta^2 {:.4} (= {:.3} pi) separation {:.3e}", max, max / std::f64::consts::PI, sep.distance));
    }
    (ok, parts.join("; "))
}

fn determinism() -> (bool, String) {
    let mut ok = true;
    for name in ["two_bubbles", "nested_chain"] {
        let s = fixture(name);
        let opts = RunOptions::from_config(&s.config);
        let renders: Vec<String> = [1, 3, 8]
            .iter()
            .map(|&n| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
                pool.install(|| run_suite(&s, Suite::All, &opts).unwrap().render())
            })
            .collect();
        ok &= renders.windows(2).all(|w| w[0] == w[1]);
    }
    (ok, "verify all reports byte-identical across 1, 3 and 8 threads".to_string())
}

fn main() -> ExitCode {
    // the left bound with constant 4 gamma fails above gamma ~ 2.15 and the
    // volume of the root neck region is (N + 1) pi delta^2 for N bubbles
    let lines = [
        timed(1, 1.0, true, pullback),
        timed(2, 5.0, true, saturation),
        timed(3, 60.0, true, decay),
        timed(4, 60.0, true, metric_drift),
        timed(5, 30.0, true, distance_oracle),
        timed(6, 1.0, false, ode),
        timed(7, 10.0, true, sharp_rate),
        timed(8, 120.0, true, generalized),
        timed(9, 5.0, true, pohozaev),
        timed(10, 30.0, false, volume_and_separation),
        timed(11, f64::INFINITY, true, determinism),
    ];
    let mut unexpected = 0;
    for l in &lines {
        l.print();
        if !l.as_expected() {
            println!("  unexpected outcome for criterion {}", l.n);
            unexpected += 1;
        }
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected", lines.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
