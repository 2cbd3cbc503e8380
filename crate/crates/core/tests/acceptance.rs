//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and fails
//! if any evaluated criterion fails.
//!
//! Criteria that need full-resolution cone solves (5, 6, 7b, 8, 9c) take
//! hours on one core and only run with `NANOCONE_ACCEPTANCE=full`. A
//! measured emission spectrum for 7a can be supplied through
//! `NANOCONE_SNV_SPECTRUM`.

use std::collections::BTreeMap;
use std::io::Write;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use nanocone::farfield::near_to_far;
use nanocone::fiber::{solve_mode, FiberSpec};
use nanocone::geometry::{make_inc, DipoleSource, IncGeometry, IndexSet, Scene, N_DIAMOND};
use nanocone::io::{load_spectrum, synthetic_snv};
use nanocone::merit::{broadband_average, wavelength_grid, MeritReport, Metric, Pipeline, SPECTRAL_WINDOW};
use nanocone::optimizer::{
    nelder_mead, optimize, BoundsSpec, Dimension, Evaluation, IncSpace, OptimizationTrace, OptimizerSettings, ParameterSpace,
};
use nanocone::solver::{analytic_dipole_power, purcell_factor, purcell_from_fields, simulate, SolverSettings};

const TABLE_PPW: f64 = 18.0;

struct Ledger {
    lines: Vec<String>,
    failed: Vec<String>,
}

impl Ledger {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        let line = format!("criterion {id:<3} {}  {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        if !pass {
            self.failed.push(id.to_string());
        }
        self.lines.push(line);
    }

    fn skip(&mut self, id: &str, why: &str) {
        let line = format!("criterion {id:<3} NOT EVALUATED  {why}");
        println!("{line}");
        self.lines.push(line);
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

// ---------------------------------------------------------------------------
// 1. vacuum dipole

fn criterion_1(l: &mut Ledger) {
    let t = Instant::now();
    let d = DipoleSource::horizontal(0.0);
    let s = SolverSettings::default().with_resolution(15.0);
    let f = simulate(&Scene::vacuum(), &d, &s).unwrap();
    let ff = near_to_far(&f).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let exact = analytic_dipole_power(619.0, 1.0, 1.0);
    let ratio = f.emitted_power / exact;
    // |p × r̂|² = 1 - sin²θ cos²φ for an x dipole.
    let peak = (0..ff.n_theta()).flat_map(|i| (0..ff.n_phi()).map(move |j| (i, j))).map(|(i, j)| ff.intensity(i, j)).fold(0.0, f64::max);
    let mut dev: f64 = 0.0;
    for (i, th) in ff.grid.theta.iter().enumerate() {
        for (j, ph) in ff.grid.phi.iter().enumerate() {
            let model = 1.0 - (th.sin() * ph.cos()).powi(2);
            dev = dev.max((ff.intensity(i, j) / peak - model).abs());
        }
    }
    l.record(
        "1",
        within(ratio, 1.0, 0.05) && dev < 0.03 && elapsed < 60.0,
        format!("vacuum dipole at 15 ppw: P/P_exact = {ratio:.4} (±0.05), max pattern deviation {:.2}% (<3%), {elapsed:.1} s (<60 s)", 100.0 * dev),
    );
}

// ---------------------------------------------------------------------------
// 2. homogeneous diamond

fn criterion_2(l: &mut Ledger) {
    let d = DipoleSource::horizontal(0.0);
    let s = SolverSettings { farfield: false, ..SolverSettings::default().with_resolution(15.0) };
    let diamond = Scene::Homogeneous { index: N_DIAMOND };
    let f = purcell_factor(&diamond, &d, &s).unwrap().factor;
    let p_d = simulate(&diamond, &d, &s).unwrap().emitted_power;
    let p_v = simulate(&Scene::vacuum(), &d, &s).unwrap().emitted_power;
    let ratio = p_d / p_v;
    l.record(
        "2",
        within(f, 1.0, 0.05) && within(ratio / N_DIAMOND, 1.0, 0.05),
        format!("uniform diamond: F = {f:.4} (1 ± 0.05), P_diamond/P_vacuum = {ratio:.4} (2.41 ± 5%)"),
    );
}

// ---------------------------------------------------------------------------
// 3. flat diamond surface

/// Upward air intensity of an x dipole in a half-space of index `n`, per
/// unit bulk power: the direct upgoing plane waves times the Fresnel
/// power transmittance, mapped through Snell's law.
fn fresnel_air_intensity(n: f64, theta_air: f64, phi: f64) -> f64 {
    let t2 = theta_air;
    let t1 = (t2.sin() / n).asin();
    let (c1, c2) = (t1.cos(), t2.cos());
    let rs = (n * c1 - c2) / (n * c1 + c2);
    let rp = (c1 - n * c2) / (c1 + n * c2);
    let (ts, tp) = (1.0 - rs * rs, 1.0 - rp * rp);
    let bulk = 3.0 / (8.0 * PI);
    let p_theta = c1 * phi.cos();
    let p_phi = -phi.sin();
    bulk * (tp * p_theta * p_theta + ts * p_phi * p_phi) * c2 / (n * n * c1)
}

/// Total power of an x dipole at `depth` below a half-space of index `n`
/// over vacuum, relative to the same dipole in bulk, from the plane-wave
/// expansion of the reflected field. Only propagating waves in the host
/// contribute for lossless media; the integral runs over `s_z = cos θ`.
fn planar_power_ratio(n: f64, depth_over_lambda: f64) -> f64 {
    use num_complex::Complex64 as C;
    let k1d = 2.0 * PI * n * depth_over_lambda;
    let m = 200_000;
    let eps = n * n;
    let sum: f64 = (0..m)
        .map(|i| {
            let sz = (i as f64 + 0.5) / m as f64;
            let kz1 = C::new(sz, 0.0);
            let kz2 = C::new(1.0 / eps - (1.0 - sz * sz), 0.0).sqrt();
            let rs = (kz1 - kz2) / (kz1 + kz2);
            let rp = (kz1 - eps * kz2) / (kz1 + eps * kz2);
            ((rs - rp * sz * sz) * C::from_polar(1.0, 2.0 * k1d * sz)).re
        })
        .sum();
    1.0 + 0.75 * sum / m as f64
}

fn criterion_3(l: &mut Ledger) {
    let n = N_DIAMOND;
    let depth = 100.0;
    let d = DipoleSource::horizontal(depth);
    let scene = Scene::FlatSubstrate { substrate_index: n, ambient_index: 1.0 };
    // The interface is unbounded, so the far-field box needs a wide aperture.
    let s = SolverSettings { padding: 2000.0, ..SolverSettings::default().with_resolution(15.0) };
    let f = simulate(&scene, &d, &s).unwrap();
    let purcell = purcell_from_fields(&f, &scene, &d, &s).unwrap().factor;
    let ff = near_to_far(&f).unwrap();
    let up = ff.hemisphere_power() / ff.total_emitted_power;
    let air = up * purcell;

    // Everything reaching the air left the diamond inside the escape cone.
    let m = 400;
    let mut cone = 0.0;
    for i in 0..m {
        let th = (i as f64 + 0.5) * (PI / 2.0) / m as f64;
        for j in 0..m {
            let ph = (j as f64 + 0.5) * 2.0 * PI / m as f64;
            cone += fresnel_air_intensity(n, th, ph) * th.sin() * (PI / 2.0 / m as f64) * (2.0 * PI / m as f64);
        }
    }
    let exact_purcell = planar_power_ratio(n, depth / 619.0);
    let exact_up = cone / exact_purcell;

    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..ff.n_theta() {
        let w = ff.grid.theta[i].sin();
        for j in 0..ff.n_phi() {
            let model = fresnel_air_intensity(n, ff.grid.theta[i], ff.grid.phi[j]);
            let numeric = ff.intensity(i, j) / ff.total_emitted_power * purcell;
            num += w * (numeric - model).powi(2);
            den += w * model * model;
        }
    }
    let rms = (num / den).sqrt();
    let critical = (1.0 / n).asin().to_degrees();
    l.record(
        "3",
        within(up, 0.04, 0.02)
            && within(air / cone, 1.0, 0.05)
            && within(up / exact_up, 1.0, 0.05)
            && within(purcell / exact_purcell, 1.0, 0.02)
            && rms < 0.10,
        format!(
            "flat diamond, d_z = {depth} nm: upward fraction {up:.4} (0.04 ± 0.02; planar-interface exact {exact_up:.4} ± 5%); \
             air power / bulk power {air:.4} vs {critical:.2}° escape cone {cone:.4} (± 5%); \
             F = {purcell:.4} vs exact {exact_purcell:.4} (± 2%); rms air-pattern deviation {:.1}% (<10%)",
            100.0 * rms
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. fiber mode

fn criterion_4(l: &mut Ledger) {
    let m = solve_mode(&FiberSpec::visible_single_mode(619.0)).unwrap();
    let overlap = m.overlap_numeric(&m, 400);
    l.record(
        "4",
        within(m.v, 2.31, 0.01) && m.v < 2.405 && within(overlap, 1.0, 1e-6),
        format!("fiber: V = {:.4} (2.31 ± 0.01, single mode), self-overlap = {overlap:.9} (1 ± 1e-6)", m.v),
    );
}

// ---------------------------------------------------------------------------
// 5, 6, 8: the five reference designs

#[derive(Clone, Copy)]
struct Design {
    name: &'static str,
    geometry: IncGeometry,
    dipole: DipoleSource,
}

fn designs() -> Vec<Design> {
    let cone = |h, rt| make_inc(h, rt, 1.0, 0.0, IndexSet::diamond_only()).unwrap();
    vec![
        Design { name: "Fib", geometry: cone(635.0, 391.0), dipole: DipoleSource::horizontal(507.0) },
        Design { name: "FS", geometry: cone(511.0, 848.0), dipole: DipoleSource::horizontal(82.0) },
        Design { name: "RE", geometry: cone(1599.0, 914.0), dipole: DipoleSource::horizontal(1286.0) },
        Design { name: "TD", geometry: cone(1375.0, 953.0), dipole: DipoleSource::tetrahedral(1261.0) },
        Design {
            name: "Hyb",
            geometry: make_inc(1462.0, 624.0, 1.0, 607.0, IndexSet::hybrid()).unwrap(),
            dipole: DipoleSource::horizontal(1295.0),
        },
    ]
}

fn pipeline(ppw: f64) -> Pipeline {
    Pipeline { solver: SolverSettings::default().with_resolution(ppw), ..Pipeline::default() }
}

fn evaluate_designs() -> BTreeMap<&'static str, MeritReport> {
    let p = pipeline(TABLE_PPW);
    designs()
        .into_iter()
        .map(|d| {
            let t = Instant::now();
            let r = p.evaluate(&d.geometry, &d.dipole).unwrap();
            println!(
                "  {:<4} eta_fs {:.4}  eta_fib {:.4} ({:?}, M {:.1})  F {:.4}  R {:.4}  [{} steps, {:.0} s]",
                d.name,
                r.eta_fs,
                r.eta_fib,
                r.polarization,
                r.magnification,
                r.purcell_factor,
                r.rate_enhancement,
                r.numerics.steps,
                t.elapsed().as_secs_f64()
            );
            (d.name, r)
        })
        .collect()
}

fn criterion_5(l: &mut Ledger, r: &BTreeMap<&str, MeritReport>) {
    let checks = [
        ("5a", "eta_fib(Fib)", r["Fib"].eta_fib, 0.66, 0.08),
        ("5b", "eta_fs(FS)", r["FS"].eta_fs, 0.83, 0.08),
        ("5c", "F(RE)", r["RE"].purcell_factor, 2.34, 0.5),
        ("5d", "eta_fib(TD)", r["TD"].eta_fib, 0.47, 0.10),
        ("5e", "eta_fib(Hyb)", r["Hyb"].eta_fib, 0.71, 0.08),
    ];
    for (id, what, value, target, tol) in checks {
        if id == "5c" {
            let rate = r["RE"].rate_enhancement;
            l.record(
                id,
                within(value, target, tol) && rate >= 0.55,
                format!("{what} = {value:.4} ({target} ± {tol}), R(RE) = {rate:.4} (>= 0.55) at {TABLE_PPW} ppw"),
            );
        } else {
            l.record(id, within(value, target, tol), format!("{what} = {value:.4} ({target} ± {tol}) at {TABLE_PPW} ppw"));
        }
    }
}

fn criterion_6(l: &mut Ledger, r: &BTreeMap<&str, MeritReport>, s_fib: f64, s_re: f64) {
    let fs = |n: &str| r[n].eta_fs;
    let fib = |n: &str| r[n].eta_fib;
    let f = |n: &str| r[n].purcell_factor;
    l.record(
        "6a",
        fs("FS") > fs("Fib") && fs("Fib") > fs("RE"),
        format!("eta_fs: FS {:.3} > Fib {:.3} > RE {:.3}", fs("FS"), fs("Fib"), fs("RE")),
    );
    l.record(
        "6b",
        fib("Fib") > fib("TD") && fib("TD") > fib("FS"),
        format!("eta_fib: Fib {:.3} > TD {:.3} > FS {:.3}", fib("Fib"), fib("TD"), fib("FS")),
    );
    l.record(
        "6c",
        f("RE") > f("FS") && f("FS") > 1.0 && 1.0 > f("Fib"),
        format!("F: RE {:.3} > FS {:.3} > 1 > Fib {:.3}", f("RE"), f("FS"), f("Fib")),
    );
    l.record("6d", s_fib > 3.0 * s_re, format!("S(eta_fib, Fib) = {s_fib:.3} > 3 x S(R, RE) = {:.3}", 3.0 * s_re));
    let worst = r.iter().map(|(n, m)| (m.eta_fs - m.eta_fib, *n)).fold((f64::MAX, ""), |a, b| if b.0 < a.0 { b } else { a });
    l.record(
        "6e",
        r.values().all(|m| m.eta_fib <= m.eta_fs),
        format!("eta_fib <= eta_fs for all {} designs (smallest margin {:.3} for {})", r.len(), worst.0, worst.1),
    );
}

fn sensitivities() -> (f64, f64) {
    let d = designs();
    let p = pipeline(TABLE_PPW);
    let t = Instant::now();
    let fib = p.sensitivity(Metric::EtaFib, &d[0].geometry, &d[0].dipole, 10.0, 5).unwrap();
    println!("  S(eta_fib, Fib) = {:.4} [{:.0} s]", fib.score, t.elapsed().as_secs_f64());
    for c in &fib.curves {
        println!("    {:<8} {:?}", c.parameter.name(), c.samples.iter().map(|s| (s.0, (s.1 * 1e4).round() / 1e4)).collect::<Vec<_>>());
    }
    let t = Instant::now();
    let re = p.sensitivity(Metric::Rate, &d[2].geometry, &d[2].dipole, 10.0, 5).unwrap();
    println!("  S(R, RE) = {:.4} [{:.0} s]", re.score, t.elapsed().as_secs_f64());
    for c in &re.curves {
        println!("    {:<8} {:?}", c.parameter.name(), c.samples.iter().map(|s| (s.0, (s.1 * 1e4).round() / 1e4)).collect::<Vec<_>>());
    }
    (fib.score, re.score)
}

fn criterion_8(l: &mut Ledger, s_fib: f64, s_re: f64) {
    l.record("8", s_fib >= 0.8 && s_re <= 0.5, format!("S(eta_fib, Fib) = {s_fib:.3} (>= 0.8), S(R, RE) = {s_re:.3} (<= 0.5), ±10 nm, 5-point sweeps"));
}

// ---------------------------------------------------------------------------
// 7. broadband

fn criterion_7a(l: &mut Ledger, full: bool) {
    let Ok(path) = std::env::var("NANOCONE_SNV_SPECTRUM") else {
        l.skip("7a", "<eta_fib>(Fib) = 0.55 ± 0.08 needs a measured spectrum (set NANOCONE_SNV_SPECTRUM); none is bundled");
        return;
    };
    let spectrum = load_spectrum(Path::new(&path), SPECTRAL_WINDOW).unwrap();
    if !full {
        l.skip("7a", "spectrum supplied, but the spectral sweep runs only with NANOCONE_ACCEPTANCE=full");
        return;
    }
    let d = &designs()[0];
    let curve = pipeline(TABLE_PPW)
        .spectral_curve(Metric::EtaFib, &d.geometry, &d.dipole, &wavelength_grid(SPECTRAL_WINDOW.0, SPECTRAL_WINDOW.1, 18))
        .unwrap();
    let avg = broadband_average(&curve, &spectrum).unwrap();
    l.record("7a", within(avg, 0.55, 0.08), format!("<eta_fib>(Fib) over {path} = {avg:.4} (0.55 ± 0.08)"));
}

fn criterion_7b(l: &mut Ledger) {
    let spectrum = synthetic_snv();
    let d = designs();
    let wl = wavelength_grid(SPECTRAL_WINDOW.0, SPECTRAL_WINDOW.1, 18);
    let p = pipeline(TABLE_PPW);
    let t = Instant::now();
    let fs_curve = p.spectral_curve(Metric::EtaFs, &d[1].geometry, &d[1].dipole, &wl).unwrap();
    let fib_curve = p.spectral_curve(Metric::EtaFib, &d[0].geometry, &d[0].dipole, &wl).unwrap();
    let a = broadband_average(&fs_curve, &spectrum).unwrap();
    let b = broadband_average(&fib_curve, &spectrum).unwrap();
    println!("  eta_fs(FS, λ)   {:?}", fs_curve.iter().map(|c| (c.0.round(), (c.1 * 1e3).round() / 1e3)).collect::<Vec<_>>());
    println!("  eta_fib(Fib, λ) {:?}", fib_curve.iter().map(|c| (c.0.round(), (c.1 * 1e3).round() / 1e3)).collect::<Vec<_>>());
    l.record(
        "7b",
        a > b,
        format!("synthetic spectrum: <eta_fs>(FS) = {a:.4} > <eta_fib>(Fib) = {b:.4} [{:.0} s]", t.elapsed().as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// 9. optimizer

fn branin(x: &[f64]) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x[1] - b * x[0] * x[0] + c * x[0] - 6.0).powi(2) + 10.0 * (1.0 - t) * x[0].cos() + 10.0
}

fn branin_space() -> ParameterSpace {
    ParameterSpace::new(
        vec![Dimension { name: "x1".into(), lo: -5.0, hi: 10.0 }, Dimension { name: "x2".into(), lo: 0.0, hi: 15.0 }],
        vec![],
    )
    .unwrap()
}

/// Grid search over the box followed by simplex polishing of the best cells.
fn brute_force_branin_max() -> f64 {
    let n = 1500;
    let mut cells: Vec<(f64, [f64; 2])> = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            let x = [-5.0 + 15.0 * i as f64 / n as f64, 15.0 * j as f64 / n as f64];
            cells.push((-branin(&x), x));
        }
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    cells
        .iter()
        .take(20)
        .map(|(v, x)| {
            let (_, f) = nelder_mead(|y| branin(y), x, 0.01, 4000, 1e-15);
            v.max(-f)
        })
        .fold(f64::MIN, f64::max)
}

fn neg_branin(x: &[f64]) -> Result<Evaluation, String> {
    Ok(Evaluation { value: -branin(x), info: serde_json::Value::Null })
}

fn criterion_9a(l: &mut Ledger) {
    let optimum = brute_force_branin_max();
    let space = branin_space();
    let mut hits = 0;
    let mut values = vec![];
    for seed in [1, 2, 3, 4, 5] {
        let s = OptimizerSettings { budget: 60, seed, ..Default::default() };
        let trace = optimize("neg_branin", &space, neg_branin, &s, None, None).unwrap();
        let best = trace.best().unwrap().value.unwrap();
        values.push(format!("{best:.4}"));
        if (best - optimum).abs() <= 0.05 {
            hits += 1;
        }
    }
    l.record(
        "9a",
        hits >= 4,
        format!("negated Branin, budget 60: {hits}/5 seeds within 0.05 of {optimum:.5} (best values {})", values.join(", ")),
    );
}

fn criterion_9b(l: &mut Ledger) {
    let dir = tempfile::tempdir().unwrap();
    let space = branin_space();
    let s = OptimizerSettings { budget: 25, seed: 9, ..Default::default() };
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    optimize("neg_branin", &space, neg_branin, &s, Some(&a), None).unwrap();
    optimize("neg_branin", &space, neg_branin, &s, Some(&b), None).unwrap();
    let first = std::fs::read(&a).unwrap();
    let second = std::fs::read(&b).unwrap();

    // Cut the trace after 15 observations and let the optimizer finish it.
    let text = String::from_utf8(first.clone()).unwrap();
    let head: String = text.lines().take(16).map(|l| format!("{l}\n")).collect();
    let cut = dir.path().join("cut.jsonl");
    std::fs::write(&cut, head).unwrap();
    let c = dir.path().join("c.jsonl");
    optimize("neg_branin", &space, neg_branin, &s, Some(&c), Some(OptimizationTrace::read(&cut).unwrap())).unwrap();
    let resumed = std::fs::read(&c).unwrap();
    l.record(
        "9b",
        first == second && first == resumed,
        format!(
            "trace replay: repeat run byte-identical = {}, resumed-from-15 run byte-identical = {} ({} bytes)",
            first == second,
            first == resumed,
            first.len()
        ),
    );
}

fn criterion_9c(l: &mut Ledger) {
    let template = make_inc(1000.0, 500.0, 1.0, 0.0, IndexSet::diamond_only()).unwrap();
    let space = IncSpace::new(template, DipoleSource::horizontal(800.0), &BoundsSpec::default()).unwrap();
    let p = pipeline(12.0);
    let s = OptimizerSettings { budget: 40, seed: 2024, ..Default::default() };
    let t = Instant::now();
    let objective = |x: &[f64]| {
        let (g, d) = space.design(x);
        p.metric(Metric::EtaFib, &g, &d).map(|value| Evaluation { value, info: serde_json::Value::Null }).map_err(|e| e.to_string())
    };
    let trace = optimize("inc:fib", &space.space, objective, &s, None, None).unwrap();
    let best = trace.best().unwrap();
    let v = best.value.unwrap();
    l.record(
        "9c",
        v >= 0.5,
        format!(
            "cone optimization, budget 40 at 12 ppw: best eta_fib = {v:.4} (>= 0.5) at h {:.0}, r_t {:.0}, d_z {:.0} nm; {} failed; {:.0} min",
            best.params[0],
            best.params[1],
            best.params[2],
            trace.failures(),
            t.elapsed().as_secs_f64() / 60.0
        ),
    );
}

#[test]
fn acceptance() {
    let full = std::env::var("NANOCONE_ACCEPTANCE").is_ok_and(|v| v == "full");
    let mut l = Ledger { lines: vec![], failed: vec![] };
    criterion_1(&mut l);
    criterion_2(&mut l);
    criterion_3(&mut l);
    criterion_4(&mut l);
    if full {
        let reports = evaluate_designs();
        criterion_5(&mut l, &reports);
        let (s_fib, s_re) = sensitivities();
        criterion_6(&mut l, &reports, s_fib, s_re);
        criterion_7a(&mut l, full);
        criterion_7b(&mut l);
        criterion_8(&mut l, s_fib, s_re);
    } else {
        let why = "full-resolution cone solves; run with NANOCONE_ACCEPTANCE=full";
        for id in ["5", "6"] {
            l.skip(id, why);
        }
        criterion_7a(&mut l, full);
        l.skip("7b", why);
        l.skip("8", why);
    }
    criterion_9a(&mut l);
    criterion_9b(&mut l);
    if full {
        criterion_9c(&mut l);
    } else {
        l.skip("9c", "40 cone solves at 12 ppw; run with NANOCONE_ACCEPTANCE=full");
    }
    // Straight to the handle so the summary survives output capture.
    let mut out = std::io::stdout().lock();
    writeln!(out, "\n{}", l.lines.join("\n")).unwrap();
    out.flush().unwrap();
    drop(out);
    assert!(l.failed.is_empty(), "failed criteria: {:?}", l.failed);
}
