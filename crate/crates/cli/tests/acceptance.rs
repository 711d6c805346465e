//! Acceptance checks, one PASS/FAIL line each. Exits non-zero on any FAIL.
//!
//! The optional real-data check runs only when `PYROSEASON_MCD14ML` names a
//! detection CSV or a directory of them; otherwise it prints SKIP.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pyroseason::evaluate::{mae, mase_nonseasonal, mase_seasonal};
use pyroseason::forecast::{self, mlp, FitConfig, Fitted, ForecastError, ForecastModel, Method};
use pyroseason::hexgrid::{cell_count, GeoPoint, HexGrid, AUTHALIC_RADIUS_KM};
use pyroseason::season::{estimate_season_lengths, peak_month};
use pyroseason::synth::{self, SynthConfig};
use pyroseason::transform::{boxcox, inv_boxcox, BoxCoxParams};
use pyroseason_cli::output::Rows;
use pyroseason_cli::run::run_pipeline;
use pyroseason_cli::stages::evaluate::REPORT_COLUMNS;
use pyroseason_cli::PipelineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(checks: &[(bool, String)]) -> Self {
        Self {
            pass: checks.iter().all(|(ok, _)| *ok),
            detail: checks
                .iter()
                .map(|(ok, d)| if *ok { d.clone() } else { format!("[failed] {d}") })
                .collect::<Vec<_>>()
                .join("; "),
        }
    }
}

fn grid_fidelity() -> Outcome {
    let count = cell_count(8).unwrap();
    let g = HexGrid::new(8).unwrap();
    let (mut total, mut hex_sum, mut hexes, mut pentagons) = (0.0, 0.0, 0usize, 0usize);
    for c in g.cells() {
        let a = g.cell_geometry(c).unwrap().area_km2;
        total += a;
        if c.is_pentagon() {
            pentagons += 1;
        } else {
            hex_sum += a;
            hexes += 1;
        }
    }
    let mean_hex = hex_sum / hexes as f64;
    let sphere = 4.0 * PI * AUTHALIC_RADIUS_KM * AUTHALIC_RADIUS_KM;
    let area_err = (mean_hex / 7774.0 - 1.0).abs();
    let sum_err = (total / sphere - 1.0).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<GeoPoint> = (0..1_000_000)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..=1.0);
            let lon: f64 = rng.random_range(-180.0..180.0);
            GeoPoint::new(z.asin().to_degrees(), lon).unwrap()
        })
        .collect();
    let t = Instant::now();
    let mut checksum = 0u64;
    for p in &points {
        checksum = checksum.wrapping_add(g.latlon_to_cell(*p).index());
    }
    let elapsed = t.elapsed();
    std::hint::black_box(checksum);

    Outcome::new(&[
        (count == 65_612, format!("cell_count(8) = {count}")),
        (area_err <= 0.01, format!("mean hexagon area {mean_hex:.1} km² ({:+.3}%)", (mean_hex / 7774.0 - 1.0) * 100.0)),
        (sum_err <= 0.001, format!("area sum vs sphere {:.2e}", sum_err)),
        (pentagons == 12, format!("{pentagons} pentagons")),
        (elapsed < Duration::from_secs(10), format!("10^6 points in {:.2} s", elapsed.as_secs_f64())),
    ])
}

fn season_recovery() -> Outcome {
    let config = SynthConfig { cells: 500, seed: 2024, ..SynthConfig::default() };
    let g = HexGrid::new(i64::from(config.resolution)).unwrap();
    let cells = synth::generate(&config, &g).unwrap();
    let (mut length_ok, mut peak_ok, mut worst) = (0usize, 0usize, 0.0f64);
    for c in &cells {
        let est = estimate_season_lengths(&c.series).unwrap();
        assert_eq!(est.len(), c.active_days.len());
        let mean = |v: &[u32]| v.iter().map(|&x| f64::from(x)).sum::<f64>() / v.len() as f64;
        let diff = (mean(&est) - mean(&c.active_days)).abs();
        worst = worst.max(diff);
        if diff <= 6.0 + 1e-9 {
            length_ok += 1;
        }
        if peak_month(&c.series).unwrap() == c.peak_month {
            peak_ok += 1;
        }
    }
    let n = cells.len() as f64;
    let (lf, pf) = (length_ok as f64 / n, peak_ok as f64 / n);
    Outcome::new(&[
        (lf >= 0.99, format!("length within ±6 d in {length_ok}/{} cells (worst {worst:.2} d)", cells.len())),
        (pf >= 0.99, format!("peak month exact in {peak_ok}/{}", cells.len())),
    ])
}

fn oracle_mase(y: &[f64], f: &[f64], train: &[f64], m: usize) -> f64 {
    let mut denom = 0.0;
    for t in m..train.len() {
        denom += (train[t] - train[t - m]).abs();
    }
    denom /= (train.len() - m) as f64;
    let mut q = 0.0;
    for i in 0..y.len() {
        q += ((y[i] - f[i]) / denom).abs();
    }
    q / y.len() as f64
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let m = rng.random_range(1..12);
        let len = m + rng.random_range(1..60);
        let mut draw = |k: usize| (0..k).map(|_| rng.random_range(-50.0..150.0)).collect::<Vec<f64>>();
        let (train, y, f) = (draw(len), draw(n), draw(n));
        let direct_mae = y.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
        worst = worst
            .max(rel_err(mae(&y, &f).unwrap(), direct_mae))
            .max(rel_err(mase_nonseasonal(&y, &f, &train).unwrap(), oracle_mase(&y, &f, &train, 1)))
            .max(rel_err(mase_seasonal(&y, &f, &train, m).unwrap(), oracle_mase(&y, &f, &train, m)));
    }

    let season = [4.0, 9.0, 1.0, 0.0, 7.0, 3.0, 5.0];
    let series: Vec<f64> = (0..91).map(|t| season[t % 7] + if t < 7 { 2.0 } else { 0.0 }).collect();
    let model = forecast::fit_snaive(&series[..70], 7).unwrap();
    let snaive_mase = mase_seasonal(&series[70..], &model.predict(21), &series[..70], 7).unwrap();

    let mut round = 0.0f64;
    for _ in 0..10_000 {
        let lambda = f64::from(rng.random_range(-100i32..=200)) / 100.0;
        let p = BoxCoxParams::new(lambda, 1.0).unwrap();
        let x: f64 = rng.random_range(0.0..5000.0);
        round = round.max((inv_boxcox(boxcox(x, &p).unwrap(), &p).unwrap() - x).abs() / x.max(1.0));
    }
    Outcome::new(&[
        (worst <= 1e-12, format!("MAE/MASE vs direct sums on 1000 instances, max rel err {worst:.1e}")),
        (snaive_mase == 0.0, format!("snaive MASE on periodic series = {snaive_mase}")),
        (round <= 1e-9, format!("Box-Cox round trip max rel err {round:.1e}")),
    ])
}

fn fitted(m: Method, train: &[f64]) -> ForecastModel {
    match forecast::fit(m, train, 7, &FitConfig::default()) {
        Ok(model) => model,
        Err(ForecastError::NotConverged { best, .. }) => *best,
        Err(e) => panic!("{m}: {e}"),
    }
}

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn optimizers() -> Outcome {
    let z = gaussian(60, 3);
    let (x, t) = mlp::training_pairs(&z);
    let w = mlp::initial_weights(5, 99);
    let (_, g) = mlp::sse_and_gradient(&w, 5, &x, &t);
    let eps = 1e-5;
    let mut grad_err = 0.0f64;
    for i in 0..w.len() {
        let (mut up, mut down) = (w.clone(), w.clone());
        up[i] += eps;
        down[i] -= eps;
        let fd = (mlp::sse_and_gradient(&up, 5, &x, &t).0 - mlp::sse_and_gradient(&down, 5, &x, &t).0) / (2.0 * eps);
        grad_err = grad_err.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8));
    }

    let profile = [-3.0, -1.0, 2.5, 4.0, 1.5, -1.5, -2.5];
    let y: Vec<f64> = (0..91).map(|t| 10.0 + profile[t % 7]).collect();
    let ets = fitted(Method::Ets, &y[..70]);
    let ets_mae = mae(&y[70..], &ets.predict(21)).unwrap();

    let e = gaussian(600, 2024);
    let mut ar = vec![0.0; 600];
    for t in 1..600 {
        ar[t] = 0.5 * ar[t - 1] + e[t];
    }
    let arima = fitted(Method::Arima, &ar[100..]);
    let phi = match arima.fitted() {
        Fitted::Arima(f) => f.coefficients.ar.first().copied().unwrap_or(0.0),
        _ => f64::NAN,
    };

    let tsglm = fitted(Method::Tsglm, &[12.0; 70]);
    let tsglm_err = tsglm.predict(21).iter().fold(0.0f64, |m, v| m.max((v - 12.0).abs() / 12.0));

    Outcome::new(&[
        (grad_err <= 1e-4, format!("MLP gradient max rel err {grad_err:.1e}")),
        (ets_mae <= 1e-3 * 10.0, format!("ETS periodic test MAE {ets_mae:.1e} (mean 10)")),
        ((phi - 0.5).abs() <= 0.1, format!("ARIMA AR(1) φ = {phi:.3} ({})", arima.describe())),
        (tsglm_err <= 0.02, format!("TSGLM constant series max rel err {tsglm_err:.1e}")),
    ])
}

/// Every file under `root`, keyed by relative path.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_with_threads(config: &PipelineConfig, threads: usize) -> Duration {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let t = Instant::now();
    pool.install(|| run_pipeline(config)).unwrap();
    t.elapsed()
}

fn end_to_end(dir: &Path) -> (Outcome, Outcome) {
    let synth_config = SynthConfig::default();
    let g = HexGrid::new(i64::from(synth_config.resolution)).unwrap();
    let (_, records) = synth::dataset(&synth_config, &g).unwrap();
    let input = dir.join("detections.csv");
    synth::write_csv(&records, fs::File::create(&input).unwrap()).unwrap();

    let mut config = PipelineConfig { inputs: vec![input], out_dir: dir.join("a"), ..PipelineConfig::default() };
    let elapsed = run_with_threads(&config, 4);

    let rows = Rows::parse("acceptance", &config.out_dir.join("report.csv"), &REPORT_COLUMNS).unwrap();
    let (mut cells, mut mase_ok, mut nmae_ok) = (0usize, 0usize, 0usize);
    for r in rows.iter().filter(|r| r.get("best") == "true") {
        cells += 1;
        if r.parse_opt("acceptance", "mase_monthly").unwrap().is_some_and(|v| v < 1.0) {
            mase_ok += 1;
        }
        if r.parse_opt("acceptance", "nmae_fss").unwrap().is_some_and(|v| v < 1.0) {
            nmae_ok += 1;
        }
    }
    let frac = |k: usize| k as f64 / cells.max(1) as f64;
    let e2e = Outcome::new(&[
        (cells == synth_config.cells, format!("{cells} cells evaluated")),
        (elapsed < Duration::from_secs(300), format!("run took {:.1} s", elapsed.as_secs_f64())),
        (frac(mase_ok) >= 0.75, format!("best-method MASE < 1 in {mase_ok}/{cells}")),
        (frac(nmae_ok) >= 0.95, format!("normalised FSS MAE < 1 in {nmae_ok}/{cells}")),
    ]);

    config.out_dir = dir.join("b");
    run_with_threads(&config, 1);
    let (a, b) = (tree(&dir.join("a")), tree(&dir.join("b")));
    let differing: Vec<String> =
        a.keys().filter(|k| a.get(*k) != b.get(*k)).map(|k| k.display().to_string()).collect();
    let determinism = Outcome::new(&[
        (a.len() == b.len(), format!("{} files per run", a.len())),
        (differing.is_empty(), format!("differing files (4 vs 1 threads): {differing:?}")),
    ]);
    (e2e, determinism)
}

fn real_data(path: &Path) -> Outcome {
    let inputs: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let config = PipelineConfig::default();
    let g = HexGrid::new(i64::from(config.resolution)).unwrap();
    let range = pyroseason_cli::run::date_range(&config).unwrap();
    let (store, _) =
        pyroseason_cli::stages::ingest::ingest(&inputs, &g, config.min_confidence, range, false).unwrap();
    let s = pyroseason_cli::stages::seasons::seasons(&store, config.length_percentile).unwrap();
    let retained = s.profiles.len() as f64;
    Outcome::new(&[
        ((retained / 6486.0 - 1.0).abs() <= 0.02, format!("{retained} cells retained")),
        (s.global_months == 7, format!("global season length {} months", s.global_months)),
    ])
}

fn main() {
    let tmp = tempfile::TempDir::new().unwrap();
    let (e2e, determinism) = end_to_end(tmp.path());
    let results = [
        ("1 grid fidelity", grid_fidelity()),
        ("2 season recovery", season_recovery()),
        ("3 metric oracles", metric_oracles()),
        ("4 optimizer correctness", optimizers()),
        ("5 end-to-end desk run", e2e),
        ("6 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    match std::env::var_os("PYROSEASON_MCD14ML") {
        Some(p) => {
            let o = real_data(Path::new(&p));
            println!("{} 7 real-data integration (not gating): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        }
        None => println!("SKIP 7 real-data integration (not gating): set PYROSEASON_MCD14ML to run"),
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
