use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use wl1::recovery::{trial_seed, weight_vector};
use wl1::{
    delta_range, external_angle_oracle_log, guaranteed_delta_bound, internal_angle_oracle,
    optimal_rho, optimized_external_exponent, optimized_internal_exponent, run_trials,
    BoundOptions, DeltaFamily, FaceClass, OvercountProfile, Role, ShapeFunction, SignalModel,
    SolverOptions, ThresholdRule, TrialConfig, TrialRecord,
};

use crate::config::{parse_rho_choices, shape, RhoChoice, Settings};
use crate::output::{num, opt, CsvSink};
use crate::CliError;

type Out = Box<dyn Write + Send>;

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Leading,
    Typical,
}

fn mode(s: &Settings) -> Result<Mode, CliError> {
    match s.str_or("mode", "leading").as_str() {
        "leading" => Ok(Mode::Leading),
        "typical" => Ok(Mode::Typical),
        other => config_err(format!("--mode must be leading or typical, got `{other}`")),
    }
}

fn bound_options(s: &Settings) -> Result<BoundOptions, CliError> {
    let rule = match s.str_or("criterion", "calibrated").as_str() {
        "calibrated" => ThresholdRule::Calibrated,
        "raw" => ThresholdRule::Raw,
        other => {
            return config_err(format!(
                "--criterion must be calibrated or raw, got `{other}`"
            ))
        }
    };
    let defaults = BoundOptions::default();
    let x_grid: usize = s.parse("x-grid", Some(&defaults.x_grid.to_string()))?;
    let delta_tol: f64 = s.parse("delta-tol", Some(&defaults.delta_tol.to_string()))?;
    if x_grid < 4 || !(delta_tol > 0.0) {
        return config_err("--x-grid must be at least 4 and --delta-tol positive");
    }
    Ok(BoundOptions {
        x_grid,
        delta_tol,
        rule,
        ..defaults
    })
}

/// `--weight` if given, otherwise f(u) = 1 + ρu with a single `--rho`.
fn single_weight(s: &Settings, default_rho: &str) -> Result<ShapeFunction<f64>, CliError> {
    if s.has("weight") && s.has("rho") {
        return config_err("give either --weight or --rho, not both");
    }
    match shape(s, "weight", Role::Weight)? {
        Some(f) => Ok(f),
        None => Ok(ShapeFunction::linear_weight(
            s.parse::<f64>("rho", Some(default_rho))?,
        )?),
    }
}

fn family(s: &Settings, mode: Mode) -> Result<DeltaFamily<f64>, CliError> {
    if s.has("prob") {
        return config_err(
            "bound searches run over p(u) = delta - c(u - 1/2); use --c instead of --prob",
        );
    }
    Ok(match mode {
        Mode::Leading => DeltaFamily::Leading,
        Mode::Typical => DeltaFamily::Tilted {
            c: s.parse("c", None)?,
        },
    })
}

fn elapsed_ms(t: Instant, omit: bool) -> String {
    if omit {
        String::new()
    } else {
        format!("{:.3}", t.elapsed().as_secs_f64() * 1e3)
    }
}

pub fn bound_vs_r(s: &Settings, out: Out) -> Result<(), CliError> {
    let alpha: f64 = s.parse("alpha", Some("0.5"))?;
    let rs = s.usize_list("r", None)?;
    if rs.is_empty() {
        return config_err("--r needs at least one value");
    }
    let fam = family(s, mode(s)?)?;
    let f = single_weight(s, "1")?;
    let opts = bound_options(s)?;
    let omit = s.flag("omit-timing")?;
    let mut sink = CsvSink::new(
        out,
        "bound-vs-r",
        &s.echo(),
        &["r", "delta_bar", "psi_tot_at_bound", "wall_ms"],
    )?;
    for r in rs {
        let t = Instant::now();
        match guaranteed_delta_bound(alpha, &f, fam, r, &opts) {
            Ok(b) => sink.row(&[
                r.to_string(),
                num(b.delta_bar),
                num(b.at_bound.psi_tot),
                elapsed_ms(t, omit),
            ])?,
            Err(wl1::Error::NoSignChange(_)) => sink.row(&[
                r.to_string(),
                String::new(),
                String::new(),
                elapsed_ms(t, omit),
            ])?,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

pub fn bound_vs_rho(s: &Settings, out: Out) -> Result<(), CliError> {
    let alpha: f64 = s.parse("alpha", Some("0.5"))?;
    let mode = mode(s)?;
    let grid = s.f64_list("rho", Some("0:0.2:2"))?;
    if grid.is_empty() {
        return config_err("--rho needs at least one value");
    }
    if s.has("weight") {
        return config_err("bound-vs-rho sweeps f(u) = 1 + rho u; --weight does not apply");
    }
    let r: usize = s.parse("r", Some(if mode == Mode::Typical { "60" } else { "30" }))?;
    let opts = bound_options(s)?;
    let header = ["kind", "c", "rho", "delta_bar"];
    match mode {
        Mode::Leading => {
            family(s, mode)?;
            let mut sink = CsvSink::new(out, "bound-vs-rho", &s.echo(), &header)?;
            let curve: Vec<Option<f64>> = grid
                .par_iter()
                .map(|&rho| {
                    let f = ShapeFunction::linear_weight(rho)?;
                    match guaranteed_delta_bound(alpha, &f, DeltaFamily::Leading, r, &opts) {
                        Ok(b) => Ok(Some(b.delta_bar)),
                        Err(wl1::Error::NoSignChange(_)) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<wl1::Result<_>>()?;
            for (rho, d) in grid.iter().zip(curve) {
                sink.row(&["grid".into(), String::new(), num(*rho), opt(d)])?;
            }
        }
        Mode::Typical => {
            if s.has("prob") {
                return config_err(
                    "bound searches run over p(u) = delta - c(u - 1/2); use --c instead of --prob",
                );
            }
            let cs = s.f64_list("c", None)?;
            if cs.is_empty() {
                return config_err("--c needs at least one value");
            }
            for &c in &cs {
                let (lo, hi) = delta_range(alpha, DeltaFamily::Tilted { c });
                if !(c >= 0.0 && lo < hi) {
                    return config_err(format!("c = {c} leaves no valid delta: p(u) = delta - c(u - 1/2) must stay in [0, 1]"));
                }
            }
            let mut sink = CsvSink::new(out, "bound-vs-rho", &s.echo(), &header)?;
            for c in cs {
                match optimal_rho(c, alpha, r, &grid, &opts) {
                    Ok(curve) => {
                        for (rho, d) in &curve.curve {
                            sink.row(&["grid".into(), num(c), num(*rho), opt(*d)])?;
                        }
                        sink.row(&[
                            "optimum".into(),
                            num(c),
                            num(curve.rho_star),
                            num(curve.delta_bar_star),
                        ])?;
                    }
                    Err(wl1::Error::NoSignChange(_)) => {
                        for rho in &grid {
                            sink.row(&["grid".into(), num(c), num(*rho), String::new()])?;
                        }
                        sink.row(&["optimum".into(), num(c), String::new(), String::new()])?;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(())
}

struct Point {
    m: usize,
    delta: Option<f64>,
    c: Option<f64>,
    rho: Option<f64>,
    weight: ShapeFunction<f64>,
    model: SignalModel,
}

fn write_records(
    dir: &Path,
    index: usize,
    echo: &[(String, String)],
    point: &Point,
    records: &[TrialRecord],
) -> Result<(), CliError> {
    let file = std::fs::File::create(dir.join(format!("point-{index:03}.csv")))?;
    let mut echo = echo.to_vec();
    echo.push(("point".into(), index.to_string()));
    echo.push(("point.m".into(), point.m.to_string()));
    echo.push(("point.delta".into(), opt(point.delta)));
    echo.push(("point.c".into(), opt(point.c)));
    echo.push(("point.weight".into(), point.weight.to_string()));
    let mut sink = CsvSink::new(
        Box::new(std::io::BufWriter::new(file)),
        "empirical",
        &echo,
        &TrialRecord::CSV_HEADER,
    )?;
    for r in records {
        sink.row(&r.csv_fields())?;
    }
    Ok(())
}

pub fn empirical(s: &Settings, out: Out) -> Result<(), CliError> {
    let mode = mode(s)?;
    let n: usize = s.parse("n", None)?;
    let ms = s.usize_list("m", None)?;
    let trials: usize = s.parse("trials", Some("100"))?;
    let seed: u64 = s.parse("seed", Some("0"))?;
    if ms.is_empty() {
        return config_err("--m needs at least one value");
    }
    if trials == 0 {
        return config_err("--trials must be at least 1");
    }
    if let Some(&m) = ms.iter().find(|&&m| m == 0 || m >= n) {
        return config_err(format!("need 0 < m < n, got m={m}, n={n}"));
    }
    let prior = if mode == Mode::Typical {
        shape(s, "prob", Role::Probability)?
    } else {
        None
    };
    if mode == Mode::Leading && s.has("prob") {
        return config_err("--prob applies to typical mode only");
    }
    if prior.is_some() && (s.has("delta") || s.has("c")) {
        return config_err("--prob replaces --delta and --c");
    }
    let deltas = if prior.is_some() {
        vec![f64::NAN]
    } else {
        s.f64_list("delta", None)?
    };
    let cs = match (mode, &prior) {
        (Mode::Typical, None) => s.f64_list("c", Some("0"))?,
        _ => vec![f64::NAN],
    };
    if deltas.is_empty() || cs.is_empty() {
        return config_err("--delta and --c need at least one value");
    }

    // weights: --weight, or a list of ρ values that may include `auto`
    let fixed_weight = if s.has("weight") {
        if s.has("rho") {
            return config_err("give either --weight or --rho, not both");
        }
        shape(s, "weight", Role::Weight)?
    } else {
        None
    };
    let rhos = if fixed_weight.is_some() {
        vec![]
    } else {
        let text = s.str_or("rho", "0");
        parse_rho_choices(&text).map_err(|e| CliError::Config(format!("--rho: {e}")))?
    };
    if fixed_weight.is_none() && rhos.is_empty() {
        return config_err("--rho needs at least one value");
    }
    let needs_auto = rhos.contains(&RhoChoice::Auto);
    if needs_auto && (mode != Mode::Typical || prior.is_some()) {
        return config_err("--rho auto needs typical mode with --delta and --c");
    }
    let (r_auto, rho_grid, opts) = if needs_auto {
        let grid = s.f64_list("rho-grid", Some("0:0.2:3"))?;
        if grid.is_empty() {
            return config_err("--rho-grid needs at least one value");
        }
        (s.parse::<usize>("r", Some("30"))?, grid, bound_options(s)?)
    } else {
        (0, vec![], BoundOptions::default())
    };
    let records_dir = s.get("records");

    let mut points = Vec::new();
    let mut auto_cache: HashMap<(usize, u64), f64> = HashMap::new();
    for &m in &ms {
        for &delta in &deltas {
            for &c in &cs {
                let model = match (mode, &prior) {
                    (Mode::Leading, _) => {
                        if !(0.0..=1.0).contains(&delta) {
                            return config_err(format!("--delta must lie in [0, 1], got {delta}"));
                        }
                        SignalModel::LeadingFace {
                            k: (delta * n as f64).round() as usize,
                        }
                    }
                    (Mode::Typical, Some(p)) => SignalModel::Prior(p.clone()),
                    (Mode::Typical, None) => {
                        SignalModel::Prior(ShapeFunction::linear_probability(delta, c)?)
                    }
                };
                let delta = (!delta.is_nan()).then_some(delta);
                let c = (!c.is_nan()).then_some(c);
                let mut weights: Vec<(Option<f64>, ShapeFunction<f64>)> = Vec::new();
                if let Some(f) = &fixed_weight {
                    weights.push((None, f.clone()));
                }
                for choice in &rhos {
                    let rho = match *choice {
                        RhoChoice::Value(v) => v,
                        RhoChoice::Auto => {
                            let cv = c.expect("auto needs c");
                            let key = (m, cv.to_bits());
                            match auto_cache.get(&key) {
                                Some(&v) => v,
                                None => {
                                    let alpha = m as f64 / n as f64;
                                    let v =
                                        optimal_rho(cv, alpha, r_auto, &rho_grid, &opts)?.rho_star;
                                    auto_cache.insert(key, v);
                                    v
                                }
                            }
                        }
                    };
                    weights.push((Some(rho), ShapeFunction::linear_weight(rho)?));
                }
                for (rho, weight) in weights {
                    points.push(Point {
                        m,
                        delta,
                        c,
                        rho,
                        weight,
                        model: model.clone(),
                    });
                }
            }
        }
    }

    if let Some(dir) = &records_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {dir}: {e}")))?;
    }
    let echo = s.echo();
    let header = [
        "mode",
        "m",
        "n",
        "delta",
        "c",
        "rho",
        "weight",
        "trials",
        "failures",
        "indeterminate",
        "failure_rate",
        "ci_low",
        "ci_high",
    ];
    let mut sink = CsvSink::new(out, "empirical", &echo, &header)?;
    let mode_name = if mode == Mode::Leading {
        "leading"
    } else {
        "typical"
    };
    for (i, p) in points.iter().enumerate() {
        // every point reuses the master seed: sweeps and weight comparisons are paired
        let cfg = TrialConfig {
            model: p.model.clone(),
            weight: p.weight.clone(),
            m: p.m,
            n,
            trials,
            master_seed: seed,
            solver: SolverOptions::default(),
        };
        let summary = run_trials(&cfg)?;
        if let Some(dir) = &records_dir {
            write_records(Path::new(dir), i, &echo, p, &summary.records)?;
        }
        let (lo, hi) = summary.wilson();
        sink.row(&[
            mode_name.to_string(),
            p.m.to_string(),
            n.to_string(),
            opt(p.delta),
            opt(p.c),
            opt(p.rho),
            p.weight.to_string(),
            trials.to_string(),
            summary.failures.to_string(),
            summary.indeterminate.to_string(),
            num(summary.failure_rate()),
            num(lo),
            num(hi),
        ])?;
    }
    Ok(())
}

/// Overcount profile covering [δ, τ] on a leading-face grid over [δ, 1].
fn covering_profile(
    face: &FaceClass<f64>,
    delta: f64,
    tau: f64,
) -> wl1::Result<OvercountProfile<f64>> {
    let w = face.width();
    let h = (0..face.r())
        .map(|i| ((tau - delta - i as f64 * w) / w).clamp(0.0, 1.0))
        .collect();
    OvercountProfile::new(face, h)
}

pub fn angle_oracle(s: &Settings, out: Out) -> Result<(), CliError> {
    let ns = s.usize_list("n", Some("200,400,800"))?;
    if ns.is_empty() {
        return config_err("--n needs at least one value");
    }
    let delta: f64 = s.parse("delta", Some("0.1"))?;
    let tau: f64 = s.parse("tau", Some("0.4"))?;
    if !(0.0 < delta && delta < tau && tau < 1.0) {
        return config_err(format!(
            "need 0 < delta < tau < 1, got delta={delta}, tau={tau}"
        ));
    }
    let kinds: Vec<&str> = match s.str_or("kind", "both").as_str() {
        "internal" => vec!["internal"],
        "external" => vec!["external"],
        "both" => vec!["internal", "external"],
        other => {
            return config_err(format!(
                "--kind must be internal, external or both, got `{other}`"
            ))
        }
    };
    let samples: usize = s.parse("samples", Some("20000"))?;
    let quad: usize = s.parse("quad-points", Some("2048"))?;
    let seed: u64 = s.parse("seed", Some("0"))?;
    let r: usize = s.parse("r", Some("30"))?;
    if samples == 0 || quad < 16 || r == 0 {
        return config_err("--samples, --quad-points and --r must be positive (quad-points >= 16)");
    }
    let f = if s.has("weight") || s.has("rho") {
        single_weight(s, "0")?
    } else {
        ShapeFunction::constant(1.0, Role::Weight)?
    };
    if ns
        .iter()
        .any(|&n| ((delta * n as f64).round() as usize) < 1)
    {
        return config_err("every n must give at least one face vertex (delta * n >= 1)");
    }

    let face = FaceClass::leading(&f, delta, r)?;
    let h = covering_profile(&face, delta, tau)?;
    let e_int = optimized_internal_exponent(&face, &h)?.value;
    let e_ext = optimized_external_exponent(&face, &h)?.value;

    let jobs: Vec<(usize, usize, &str)> = ns
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| kinds.iter().map(move |&k| (i, n, k)))
        .collect();
    let rows: Vec<[String; 5]> = jobs
        .par_iter()
        .map(|&(i, n, kind)| -> wl1::Result<[String; 5]> {
            let w = weight_vector(&f, n);
            let k = (delta * n as f64).round() as usize;
            let l = (tau * n as f64).round() as usize;
            let (value, bound) = if kind == "internal" {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i));
                (
                    internal_angle_oracle(&w[..l], k, samples, &mut rng)?.log_beta / n as f64,
                    e_int,
                )
            } else {
                (external_angle_oracle_log(&w, l, quad)? / n as f64, e_ext)
            };
            Ok([
                n.to_string(),
                kind.to_string(),
                num(value),
                num(bound),
                num(bound - value),
            ])
        })
        .collect::<wl1::Result<_>>()?;
    let mut sink = CsvSink::new(
        out,
        "angle-oracle",
        &s.echo(),
        &["n", "kind", "log_angle_over_n", "exponent_bound", "slack"],
    )?;
    for row in rows {
        sink.row(&row)?;
    }
    Ok(())
}
