//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! and fails when the criterion is not met.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rangevol::asymptotics::{avar_constant, constants_csv, figure_constants};
use rangevol::estimators::{
    block_ranges, return_multipower, rmv, rmv_from_ranges, PowerVector, SampledGrid,
};
use rangevol::fmt::fmt_sig17;
use rangevol::lambda::{mu_abs_moment, simulate_lambda, LambdaEntry, LambdaTable, EQUIDISTANT_ID};
use rangevol::rng::{stream, StreamRole};
use rangevol::simulator::{
    rtv_rmse_by_n, run_study, simulate_irregular_grid_study, single_jump_study, Design,
    IrregularScheme, IrregularStudyConfig, SimScenario, StudyConfig, StudyReport,
};
use rangevol::EstimatorId;

fn verdict(id: u32, pass: bool, detail: String) {
    println!(
        "criterion {id}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

const SEED: u64 = 20_111_001;

// criterion 1

fn lambda_anchor_table() -> LambdaTable {
    simulate_lambda(&[2.0 / 3.0, 1.0, 4.0 / 3.0, 2.0, 4.0], 1, 1_000_000, SEED).unwrap()
}

#[test]
fn c01_lambda_closed_form_anchor() {
    let start = Instant::now();
    let t = lambda_anchor_table();
    let secs = start.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    for e in t.entries() {
        worst = worst.max((e.value - mu_abs_moment(e.r).unwrap()).abs() / e.std_error);
    }
    verdict(
        1,
        worst < 3.0 && secs < 10.0,
        format!("max |z| = {worst:.2}, {secs:.1} s"),
    );
}

// criterion 2

/// lambda(2, m) from Box-Muller normals on streams disjoint from the table's.
fn oracle_lambda2(m: usize, replications: u64) -> (f64, f64) {
    let sd = (1.0 / m as f64).sqrt();
    let (mut s, mut ss) = (0.0, 0.0);
    for rep in 0..replications {
        let mut rng = stream(SEED, StreamRole::Oracle, rep);
        let (mut x, mut hi, mut lo) = (0.0_f64, 0.0_f64, 0.0_f64);
        let mut spare = None;
        for _ in 0..m {
            let z = match spare.take() {
                Some(z) => z,
                None => {
                    let u1: f64 = 1.0 - rng.random::<f64>();
                    let u2: f64 = rng.random::<f64>();
                    let r = (-2.0 * u1.ln()).sqrt();
                    let a = std::f64::consts::TAU * u2;
                    spare = Some(r * a.sin());
                    r * a.cos()
                }
            };
            x += sd * z;
            hi = hi.max(x);
            lo = lo.min(x);
        }
        let v = (hi - lo).powi(2);
        s += v;
        ss += v * v;
    }
    let n = replications as f64;
    let mean = s / n;
    (mean, ((ss - s * mean) / (n - 1.0) / n).sqrt())
}

const ORACLE_REPS: u64 = 200_000;

#[test]
fn c02_parkinson_bound() {
    let start = Instant::now();
    let t = LambdaTable::shipped();
    let e = t.entry(2.0, 1000, EQUIDISTANT_ID).unwrap();
    let (oracle, ose) = oracle_lambda2(1000, ORACLE_REPS);
    let secs = start.elapsed().as_secs_f64();
    let bound = 4.0 * 2f64.ln();
    let z = (e.value - oracle) / (e.std_error.powi(2) + ose * ose).sqrt();
    let pass = (2.70..=bound).contains(&e.value) && z.abs() < 3.0 && secs < 60.0;
    verdict(
        2,
        pass,
        format!("lambda(2,1000) = {:.4} (se {:.1e}), oracle {oracle:.4} (se {ose:.1e}), z = {z:.2}, bound [2.70, {bound:.4}], {secs:.1} s", e.value, e.std_error),
    );
}

// criterion 3

fn m1_constants() -> [f64; 3] {
    let t = LambdaTable::new();
    [
        PowerVector::variance(),
        PowerVector::bipower(),
        PowerVector::tripower(),
    ]
    .map(|q| avar_constant(&q, 1, &t).unwrap().value)
}

#[test]
fn c03_return_based_constants() {
    let [rv, bv, tv] = m1_constants();
    let pass = rv == 2.0 && (2.60..=2.62).contains(&bv) && (3.0..=3.12).contains(&tv);
    verdict(3, pass, format!("RV {rv}, BV {bv:.5}, TV {tv:.5}"));
}

// criterion 4

#[test]
fn c04_figure1_ordering() {
    let t = LambdaTable::shipped();
    let ms: Vec<usize> = (1..=30).chain([1000]).collect();
    let rows = figure_constants(&ms, &t).unwrap();
    let mut bad = Vec::new();
    for &(m, b, bv, tv) in &rows {
        if m <= 3 && !(b < bv && b < tv) {
            bad.push(format!("m={m}: RRVb not smallest"));
        }
        if (4..=30).contains(&m) && !(tv < bv && bv < b) {
            bad.push(format!("m={m}: not RTV < RBV < RRVb"));
        }
    }
    let big = rows.last().unwrap().1;
    if !(0.35..=0.45).contains(&big) {
        bad.push(format!("RRVb(1000) = {big:.4}"));
    }
    verdict(
        4,
        bad.is_empty(),
        if bad.is_empty() {
            format!("RRVb(1000) = {big:.4}")
        } else {
            bad.join("; ")
        },
    );
}

// criterion 5

fn jump_law() -> rangevol::simulator::JumpLawSummary {
    let sc = SimScenario {
        fine_steps: 60_000,
        observed: 6_000,
        seed: SEED,
        ..SimScenario::default()
    };
    single_jump_study(&sc, Design::new(200, 30), 0.5, 500, &LambdaTable::shipped()).unwrap()
}

#[test]
fn c05_theorem1_jump_law() {
    let s = jump_law();
    let pass =
        s.scaled_mean.abs() < 3.0 * s.scaled_se && s.unscaled_mean + 3.0 * s.unscaled_se < 0.0;
    verdict(
        5,
        pass,
        format!(
            "scaled mean {:.4} (se {:.4}), unscaled mean {:.4} (se {:.4}), relative to IV",
            s.scaled_mean, s.scaled_se, s.unscaled_mean, s.unscaled_se
        ),
    );
}

// criteria 6 to 8

fn table1_study() -> StudyReport {
    let mut cfg = StudyConfig::new(
        SimScenario {
            seed: SEED,
            ..SimScenario::default()
        },
        2_000,
    );
    cfg.designs = vec![Design::new(78, 30)];
    cfg.noise_gamma = Some(0.5);
    run_study(&cfg, &LambdaTable::shipped()).unwrap()
}

const D: Design = Design { n: 78, m: 30 };

#[test]
fn c06_to_c08_table1() {
    let start = Instant::now();
    let rep = table1_study();
    let secs = start.elapsed().as_secs_f64();
    let row = |noise, e| rep.row(noise, D, e).unwrap();

    let printed = [
        (EstimatorId::Rrv, 1.011),
        (EstimatorId::Rbv, 1.019),
        (EstimatorId::Rtv, 1.010),
        (EstimatorId::Srv, 0.999),
        (EstimatorId::Sbv, 1.034),
        (EstimatorId::Stv, 1.021),
    ];
    let mut detail = Vec::new();
    let mut ok6 = secs < 900.0;
    for (e, p) in printed {
        let b = row(false, e).rel_bias;
        ok6 &= (b - p).abs() <= 0.015;
        detail.push(format!("{e} {b:.4} vs {p}"));
    }
    for (range, ret) in [
        (EstimatorId::Rrv, EstimatorId::Srv),
        (EstimatorId::Rbv, EstimatorId::Sbv),
        (EstimatorId::Rtv, EstimatorId::Stv),
    ] {
        let (a, b) = (row(false, range).rmse_x1000, row(false, ret).rmse_x1000);
        ok6 &= a < b;
        detail.push(format!("rmse {range} {a:.4} < {ret} {b:.4}"));
    }
    let r6 = (ok6, format!("{}; {secs:.0} s", detail.join(", ")));

    let shift = row(true, EstimatorId::Rtv).rel_bias - row(false, EstimatorId::Rtv).rel_bias;
    let srv_noisy = row(true, EstimatorId::Srv).rel_bias;
    let r7 = (
        (0.008..=0.016).contains(&shift) && (srv_noisy - 1.0).abs() <= 0.005,
        format!("RTV shift {shift:.4}, noisy SRV {srv_noisy:.4}"),
    );

    let cov = |e| {
        let r = row(false, e);
        (r.coverage95.unwrap(), r.coverage99.unwrap())
    };
    let (r95, r99) = cov(EstimatorId::Rtv);
    let (s95, s99) = cov(EstimatorId::Stv);
    let in95 = |c: f64| (0.92..=0.955).contains(&c);
    let in99 = |c: f64| (0.975..=0.995).contains(&c);
    let r8 = (
        in95(r95) && in95(s95) && in99(r99) && in99(s99),
        format!(
            "RTV {:.2}% / {:.2}%, STV {:.2}% / {:.2}%",
            100.0 * r95,
            100.0 * r99,
            100.0 * s95,
            100.0 * s99
        ),
    );

    for (id, (pass, d)) in [(6, &r6), (7, &r7), (8, &r8)] {
        println!(
            "criterion {id}: {} ({d})",
            if *pass { "PASS" } else { "FAIL" }
        );
    }
    assert!(
        r6.0 && r7.0 && r8.0,
        "criteria 6-8: {} / {} / {}",
        r6.1,
        r7.1,
        r8.1
    );
}

// criterion 9

fn irregular(scheme: IrregularScheme) -> rangevol::simulator::IrregularReport {
    let cfg = IrregularStudyConfig::new(scheme, 10_000, SEED);
    simulate_irregular_grid_study(&cfg, &LambdaTable::shipped()).unwrap()
}

#[test]
fn c09_table2_irregular() {
    let uni = irregular(IrregularScheme::UniformWithoutReplacement);
    let pt = irregular(IrregularScheme::PreviousTick { draws: 11_700 });
    let b = |r: &rangevol::simulator::IrregularReport, e| r.row(e).unwrap().rel_bias;
    let (u_rrvb, u_rrv, u_rtv) = (
        b(&uni, EstimatorId::RrvB),
        b(&uni, EstimatorId::Rrv),
        b(&uni, EstimatorId::Rtv),
    );
    let (p_rrvb, p_rrv, p_rtv) = (
        b(&pt, EstimatorId::RrvB),
        b(&pt, EstimatorId::Rrv),
        b(&pt, EstimatorId::Rtv),
    );
    let pass = (u_rrvb - 0.965).abs() <= 0.01
        && (u_rtv - 0.947).abs() <= 0.01
        && [p_rrvb, p_rrv, p_rtv]
            .iter()
            .all(|x| (x - 1.0).abs() <= 0.005);
    verdict(
        9,
        pass,
        format!(
            "uniform RRVb {u_rrvb:.4}, RTV {u_rtv:.4} (hybrid RRV {u_rrv:.4}); \
             previous-tick RRVb {p_rrvb:.4}, RRV {p_rrv:.4}, RTV {p_rtv:.4}"
        ),
    );
}

// criterion 10

/// Eq. (19) transcribed term by term, with the range as the largest
/// `p_t - p_s` over all pairs of the block.
fn literal_rmv(p: &[f64], n: usize, m: usize, q: &[f64], lambda: impl Fn(f64) -> f64) -> f64 {
    let k = q.len();
    let s = |i: usize| {
        let mut best = f64::NEG_INFINITY;
        for a in 0..=m {
            for b in 0..=m {
                best = best.max(p[i * m + a] - p[i * m + b]);
            }
        }
        best
    };
    let q_plus: f64 = q.iter().sum();
    let mut sum = 0.0;
    for i in 1..=n - k + 1 {
        let mut prod = 1.0;
        for j in 1..=k {
            prod *= s(i + j - 2).powf(q[j - 1]) / lambda(q[j - 1]);
        }
        sum += prod;
    }
    n as f64 / (n - k + 1) as f64 * (n as f64).powf(q_plus / 2.0 - 1.0) * sum
}

#[test]
fn c10_oracle_equivalence() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(SEED);
    let powers = [2.0 / 3.0, 1.0, 4.0 / 3.0, 2.0];
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=4usize);
        let m = rng.random_range(1..=3usize);
        let k = rng.random_range(1..=n);
        let q: Vec<f64> = (0..k)
            .map(|_| powers[rng.random_range(0..powers.len())])
            .collect();
        let p: Vec<f64> = (0..=n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut t = LambdaTable::new();
        if m > 1 {
            for &r in &powers {
                let value = 0.5 + rng.random::<f64>();
                t.insert(LambdaEntry {
                    r,
                    m,
                    grid_id: EQUIDISTANT_ID.into(),
                    value,
                    std_error: 0.0,
                    replications: 1,
                    seed: 0,
                });
            }
        }
        let grid = SampledGrid::new(p.clone(), n, m).unwrap();
        let qv = PowerVector::new(q.clone()).unwrap();
        let ours = rmv(&grid, &qv, &t).unwrap();
        let lit = literal_rmv(&p, n, m, &q, |r| t.get(r, m).unwrap());
        worst = worst.max((ours - lit).abs() / lit.abs().max(1e-300));
        let via_ranges = rmv_from_ranges(&block_ranges(&grid), &qv, &t, 1).unwrap();
        worst = worst.max((via_ranges - lit).abs() / lit.abs().max(1e-300));
        if m == 1 {
            let ret = return_multipower(&grid.returns(0).unwrap(), &qv).unwrap();
            worst = worst.max((ours - ret).abs() / ret.abs().max(1e-300));
        }
    }
    verdict(10, worst < 1e-12, format!("max relative error {worst:.2e}"));
}

// criterion 11

#[test]
fn c11_rate() {
    let ns = [26, 52, 104, 208];
    let rmse = rtv_rmse_by_n(&ns, 30, 1_000, SEED, &LambdaTable::shipped()).unwrap();
    let xs: Vec<f64> = rmse.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = rmse.iter().map(|(_, e)| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    verdict(11, (slope + 0.5).abs() <= 0.1, format!("slope {slope:.3}"));
}

// criterion 12

/// The report files of criteria 1 to 9.
fn reports() -> Vec<(&'static str, String)> {
    let shipped = LambdaTable::shipped();
    let (oracle, ose) = oracle_lambda2(1000, ORACLE_REPS);
    let ms: Vec<usize> = (1..=30).chain([1000]).collect();
    vec![
        ("c1", lambda_anchor_table().to_csv()),
        ("c2", format!("{},{}", fmt_sig17(oracle), fmt_sig17(ose))),
        ("c3", m1_constants().map(fmt_sig17).join(",")),
        ("c4", constants_csv(&ms, &shipped).unwrap()),
        ("c5", serde_json::to_string(&jump_law()).unwrap()),
        ("c6-8", table1_study().to_csv()),
        (
            "c9u",
            irregular(IrregularScheme::UniformWithoutReplacement).to_csv(),
        ),
        (
            "c9p",
            irregular(IrregularScheme::PreviousTick { draws: 11_700 }).to_csv(),
        ),
    ]
}

#[test]
fn c12_determinism_across_thread_counts() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(reports)
    };
    let base = run(1);
    let mut differing = Vec::new();
    for threads in [4, 16] {
        for ((name, a), (_, b)) in base.iter().zip(run(threads)) {
            if *a != b {
                differing.push(format!("{name} at {threads} threads"));
            }
        }
    }
    verdict(
        12,
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} reports identical under 1, 4, 16 threads", base.len())
        } else {
            differing.join(", ")
        },
    );
}
