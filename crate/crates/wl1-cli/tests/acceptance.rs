//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any fails.

use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wl1::specfn::{half_normal_cgf, half_normal_cgf_deriv};
use wl1::*;

#[derive(Clone, Default)]
struct Buf(Arc<Mutex<Vec<u8>>>);

impl Write for Buf {
    fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(b);
        Ok(b.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn cli(args: &[&str]) -> String {
    let buf = Buf::default();
    let argv = std::iter::once("wl1").chain(args.iter().copied());
    wl1_cli::run(argv, Box::new(buf.clone())).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    let bytes = buf.0.lock().unwrap().clone();
    String::from_utf8(bytes).unwrap()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Table {
        let mut rd = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rd.headers().unwrap().iter().map(String::from).collect();
        let rows = rd
            .records()
            .map(|r| r.unwrap().iter().map(String::from).collect())
            .collect();
        Table { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }

    fn f64s(&self, name: &str) -> Vec<f64> {
        let j = self.col(name);
        self.rows.iter().map(|r| r[j].parse().unwrap()).collect()
    }
}

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bound_trend() -> Outcome {
    let t = Table::parse(&cli(&[
        "bound-vs-r",
        "--alpha",
        "0.5",
        "--rho",
        "1",
        "--r",
        "5,10,20,30",
        "--omit-timing",
    ]));
    let d = t.f64s("delta_bar");
    let monotone = d.windows(2).all(|w| w[1] >= w[0]);
    let rel = (d[3] - d[2]) / d[3];
    check(
        monotone && rel < 0.05,
        format!(
            "delta_bar(5,10,20,30) = {d:.4?}, last step {:.2}%",
            100.0 * rel
        ),
    )
}

const TABLE_C: [f64; 4] = [0.0, 0.16, 0.26, 0.36];
const EXPECTED_RHO: [f64; 4] = [0.0, 0.6, 1.0, 1.8];

fn table_one(rho_36: &mut Option<f64>) -> Outcome {
    let t = Table::parse(&cli(&[
        "bound-vs-rho",
        "--mode",
        "typical",
        "--alpha",
        "0.5",
        "--r",
        "60",
        "--rho",
        "0:0.2:3",
        "--c",
        "0,0.16,0.26,0.36",
        "--delta-tol",
        "1e-5",
    ]));
    let (kind, c, rho, d) = (t.col("kind"), t.col("c"), t.col("rho"), t.col("delta_bar"));
    let opt: Vec<(f64, f64, f64)> = t
        .rows
        .iter()
        .filter(|r| r[kind] == "optimum")
        .map(|r| {
            (
                r[c].parse().unwrap(),
                r[rho].parse().unwrap(),
                r[d].parse().unwrap(),
            )
        })
        .collect();
    if opt.len() != 4 {
        return Err(format!("expected 4 optimum rows, got {}", opt.len()));
    }
    *rho_36 = Some(opt[3].1);
    let mut ok = true;
    for (i, &(cv, r, _)) in opt.iter().enumerate() {
        ok &= (cv - TABLE_C[i]).abs() < 1e-12;
        let tol = if i == 0 { 1e-12 } else { 0.4 + 1e-9 };
        ok &= (r - EXPECTED_RHO[i]).abs() <= tol;
    }
    ok &= opt.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].2 >= w[0].2);
    let stars: Vec<f64> = opt.iter().map(|o| o.1).collect();
    let bars: Vec<f64> = opt.iter().map(|o| o.2).collect();
    check(
        ok,
        format!("rho* = {stars:?} (expected {EXPECTED_RHO:?} +-0.4), delta_bar(rho*) = {bars:.4?}"),
    )
}

// binomial standard error of a rate
fn se(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

fn phase_transition() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for rho in ["0", "1"] {
        let b = Table::parse(&cli(&[
            "bound-vs-r",
            "--alpha",
            "0.5",
            "--rho",
            rho,
            "--r",
            "30",
            "--omit-timing",
        ]));
        let bar = b.f64s("delta_bar")[0];
        let factors = [0.6, 0.8, 1.0, 1.2, 1.4, 1.6];
        let deltas: Vec<String> = factors.iter().map(|f| format!("{}", f * bar)).collect();
        let t = Table::parse(&cli(&[
            "empirical",
            "--mode",
            "leading",
            "--m",
            "100",
            "--n",
            "200",
            "--rho",
            rho,
            "--trials",
            "200",
            "--seed",
            "3",
            "--delta",
            &deltas.join(","),
        ]));
        let fail = t.f64s("failure_rate");
        ok &= fail[1] <= 0.10 && fail[5] >= 0.90;
        ok &= fail.windows(2).all(|w| {
            w[1] >= w[0] - 2.0 * (se(w[0], 200.0).powi(2) + se(w[1], 200.0).powi(2)).sqrt()
        });
        details.push(format!(
            "rho={rho}: delta_bar={bar:.4}, failure at (0.6..1.6)x = {fail:.3?}"
        ));
    }
    check(ok, details.join("; "))
}

fn tilt_trend(rho_36: f64) -> Outcome {
    let rho_list = format!("0,{rho_36}");
    let t = Table::parse(&cli(&[
        "empirical",
        "--mode",
        "typical",
        "--m",
        "200",
        "--n",
        "400",
        "--delta",
        "0.185",
        "--c",
        "0,0.36",
        "--rho",
        &rho_list,
        "--trials",
        "200",
        "--seed",
        "5",
    ]));
    let (c, rho) = (t.f64s("c"), t.f64s("rho"));
    let fail = t.f64s("failure_rate");
    let at = |cv: f64, rv: f64| {
        (0..fail.len())
            .find(|&i| c[i] == cv && rho[i] == rv)
            .map(|i| fail[i])
            .unwrap()
    };
    let (std0, std36, w36) = (at(0.0, 0.0), at(0.36, 0.0), at(0.36, rho_36));
    check(
        std36 - w36 >= 0.10 && (std0 - std36).abs() <= 0.10,
        format!("standard c=0: {std0:.3}, standard c=0.36: {std36:.3}, weighted rho={rho_36} c=0.36: {w36:.3}"),
    )
}

fn angle_oracles() -> Outcome {
    let t = Table::parse(&cli(&[
        "angle-oracle",
        "--n",
        "200,400,800",
        "--kind",
        "both",
        "--seed",
        "7",
    ]));
    let (kind, slack) = (t.col("kind"), t.f64s("slack"));
    let mut ok = slack.iter().all(|&s| s >= -0.02);
    let mut details = Vec::new();
    for k in ["internal", "external"] {
        let s: Vec<f64> = (0..t.rows.len())
            .filter(|&i| t.rows[i][kind] == k)
            .map(|i| slack[i])
            .collect();
        ok &= s.len() == 3 && s[2].abs() < s[0].abs();
        details.push(format!("{k} slack(200,400,800) = {s:.5?}"));
    }
    check(ok, details.join("; "))
}

// ----- property suites -----

fn concavity(rng: &mut ChaCha8Rng) -> bool {
    for _ in 0..1000 {
        let r = rng.random_range(1..7);
        let mut g: Vec<f64> = (0..r).map(|_| rng.random_range(0.0..0.9)).collect();
        g[0] = g[0].max(0.05);
        let f = ShapeFunction::linear_weight(rng.random_range(0.0..2.0)).unwrap();
        let face = FaceClass::from_profile(&f, &FaceProfile::new(g.clone()).unwrap()).unwrap();
        let draw = |rng: &mut ChaCha8Rng| {
            g.iter()
                .map(|gi| (1.0 - gi) * rng.random::<f64>())
                .collect::<Vec<f64>>()
        };
        let (h1, h2) = (draw(rng), draw(rng));
        let mid: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| 0.5 * (a + b)).collect();
        let hs = [h1, h2, mid].map(|h| OvercountProfile::new(&face, h).unwrap());
        let (x, y) = (rng.random_range(0.05..3.0), rng.random_range(0.01..0.79));
        let evals: [Box<dyn Fn(&Overcount) -> f64>; 3] = [
            Box::new(|h| combinatorial_exponent(&face, h).unwrap()),
            Box::new(|h| internal_exponent(&face, h, y).unwrap()),
            Box::new(|h| external_exponent(&face, h, x).unwrap()),
        ];
        for e in &evals {
            if e(&hs[2]) < 0.5 * (e(&hs[0]) + e(&hs[1])) - 1e-9 {
                return false;
            }
        }
    }
    true
}

fn paired_oracles() -> bool {
    let light = [1.0, 1.0, 1.0, 1.0, 1.0];
    let heavy = [1.0, 1.0, 1.0, 1.0, 3.0];
    let a = internal_angle_oracle(&light, 2, 100_000, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let b = internal_angle_oracle(&heavy, 2, 100_000, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let se = (a.rel_se.powi(2) + b.rel_se.powi(2)).sqrt();
    b.log_beta < a.log_beta - 3.0 * se
}

fn cgf_differences() -> bool {
    (0..=3500).all(|i| {
        let s = -30.0 + i as f64 * 0.01;
        let h = 1e-6;
        let fd = (half_normal_cgf(s + h) - half_normal_cgf(s - h)) / (2.0 * h);
        let d = half_normal_cgf_deriv(s);
        (d - fd).abs() <= 1e-6 * (1.0 + d.abs())
    })
}

fn kl_grid() -> bool {
    (0..100).all(|i| {
        (0..100).all(|j| {
            let (q, p) = ((i as f64 + 0.5) / 100.0, (j as f64 + 0.5) / 100.0);
            let d = shapes::bernoulli_kl(q, p).unwrap();
            if i == j {
                d == 0.0
            } else {
                d > 0.0
            }
        })
    })
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        x[r] = (b[r] - (r + 1..n).map(|c| a[r][c] * x[c]).sum::<f64>()) / a[r][r];
    }
    Some(x)
}

fn lp_vs_enumeration(rng: &mut ChaCha8Rng) -> bool {
    for case in 0..200u64 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..=n.min(6));
        let a = MeasurementEnsemble::new(m, n, case).matrix();
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let rep = solve_weighted_l1(&a, &y, &w, &SolverOptions::default());
        let mut best = (f64::INFINITY, vec![0.0; n]);
        for mask in 0u32..1 << n {
            if mask.count_ones() as usize != m {
                continue;
            }
            let s: Vec<usize> = (0..n).filter(|&j| mask >> j & 1 == 1).collect();
            let sub = (0..m)
                .map(|i| s.iter().map(|&j| a[(i, j)]).collect())
                .collect();
            if let Some(xs) = solve_square(sub, y.clone()) {
                let obj: f64 = s.iter().zip(&xs).map(|(&j, v)| w[j] * v.abs()).sum();
                if obj < best.0 {
                    let mut x = vec![0.0; n];
                    s.iter().zip(&xs).for_each(|(&j, &v)| x[j] = v);
                    best = (obj, x);
                }
            }
        }
        let err = rep
            .minimizer
            .iter()
            .zip(&best.1)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        if (rep.objective - best.0).abs() > 1e-6 * (1.0 + best.0) || err > 1e-6 * (1.0 + best.0) {
            return false;
        }
    }
    true
}

fn scaling_invariance(rng: &mut ChaCha8Rng) -> bool {
    (0..20u64).all(|case| {
        let (m, n) = (15, 40);
        let a = MeasurementEnsemble::new(m, n, 100 + case).matrix();
        let x0 = leading_face_signal(4, n, rng).unwrap().dense();
        let y = a.mul_vec(&x0);
        let w: Vec<f64> = (0..n).map(|j| 1.0 + j as f64 / n as f64).collect();
        let opts = SolverOptions::default();
        let base = solve_weighted_l1(&a, &y, &w, &opts).minimizer;
        let ys = solve_weighted_l1(
            &a,
            &y.iter().map(|v| 3.5 * v).collect::<Vec<_>>(),
            &w,
            &opts,
        )
        .minimizer;
        let ws = solve_weighted_l1(
            &a,
            &y,
            &w.iter().map(|v| 0.25 * v).collect::<Vec<_>>(),
            &opts,
        )
        .minimizer;
        let scale = base.iter().map(|v| v.abs()).fold(1.0, f64::max);
        (0..n).all(|j| {
            (ys[j] / 3.5 - base[j]).abs() <= 1e-8 * scale && (ws[j] - base[j]).abs() <= 1e-8 * scale
        })
    })
}

fn worker_invariance() -> bool {
    let runs = |w: &str| {
        let e = cli(&[
            "empirical",
            "--mode",
            "typical",
            "--m",
            "30",
            "--n",
            "60",
            "--delta",
            "0.2",
            "--c",
            "0,0.3",
            "--rho",
            "0,1",
            "--trials",
            "40",
            "--seed",
            "11",
            "--workers",
            w,
        ]);
        let b = cli(&["bound-vs-r", "--r", "3,8", "--omit-timing", "--workers", w]);
        let a = cli(&[
            "angle-oracle",
            "--n",
            "100,200",
            "--samples",
            "4000",
            "--workers",
            w,
        ]);
        (e, b, a)
    };
    runs("1") == runs("8")
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let results = [
        ("concavity", concavity(&mut rng)),
        ("paired-oracle", paired_oracles()),
        ("cgf-fd", cgf_differences()),
        ("kl-grid", kl_grid()),
        ("lp-enumeration", lp_vs_enumeration(&mut rng)),
        ("scaling", scaling_invariance(&mut rng)),
        ("workers-1-vs-8", worker_invariance()),
    ];
    let failed: Vec<&str> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    check(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} suites ok", results.len())
        } else {
            format!("failed: {failed:?}")
        },
    )
}

fn main() {
    let mut rho_36 = None;
    let mut failures = 0;
    let mut report = |no: usize, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let res = f();
        let el = t.elapsed();
        let (ok, detail) = match res {
            Ok(d) if el <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {}s budget", limit.as_secs())),
            Err(d) => (false, d),
        };
        failures += usize::from(!ok);
        println!(
            "criterion {no} {name}: {} ({:.1}s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            el.as_secs_f64()
        );
    };
    let min = |m: u64| Duration::from_secs(60 * m);
    report(1, "bound-saturates-in-r", min(5), &mut bound_trend);
    report(2, "optimal-tilt-table", min(30), &mut || {
        table_one(&mut rho_36)
    });
    report(3, "phase-transition", min(20), &mut phase_transition);
    let rho = rho_36.unwrap_or(1.8);
    report(4, "tilt-trend", min(20), &mut || tilt_trend(rho));
    report(5, "angle-oracles", min(10), &mut angle_oracles);
    report(6, "property-suites", min(5), &mut property_suites);
    if failures > 0 {
        println!("acceptance: {failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
