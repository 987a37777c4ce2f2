use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use spiked_fisher::detector::{detect_with_diagnostics, DetectorConfig, DnRule};
use spiked_fisher::experiments::summary::{ks_distance, mean, variance};
use spiked_fisher::experiments::{
    kde_1d, kde_2d, linspace, run_clt_study, run_detection_study, with_threads, CltStudy, CltStudyConfig,
    DetectionStudyConfig, FrequencyTable, ModelFamily, FREQUENCY_BINS,
};
use spiked_fisher::fisher_sampler::{EntryDistribution, ModelDims};
use spiked_fisher::seeding::{replicate_rng, StreamDomain};
use spiked_fisher::spike_theory::critical_interval;
use spiked_fisher::wachter_law::{density, mass_at_zero, support_edges, FisherParams};

use crate::matrix_io::{format_matrix, read_matrix};
use crate::output::{ensure_dir, fmt_f64, write_file, write_json, Clock, Csv, MANIFEST_FILE};
use crate::{CliError, Common};

const KDE_POINTS: usize = 201;
const KDE_2D_POINTS: usize = 41;
const TOP_EIGENVALUES: usize = 10;

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn law(c: f64, y: f64, from: Option<f64>, to: Option<f64>, points: usize, out_dir: &Path) -> Result<(), CliError> {
    let clock = Clock::start();
    let params = FisherParams::new(c, y)?;
    let edges = support_edges(&params);
    let (lo, hi) = (from.unwrap_or(edges.b1), to.unwrap_or(edges.b));
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::Config(format!("grid range [{lo}, {hi}] is empty or not finite")));
    }
    ensure_dir(out_dir)?;
    let mut csv = Csv::new(&["x", "density"]);
    for x in linspace(lo, hi, points) {
        csv.float_row(&[x, density(&params, x)]);
    }
    csv.write(&out_dir.join("law.csv"))?;
    let (critical_low, critical_high) = critical_interval(&params);
    write_json(
        &out_dir.join("summary.json"),
        &json!({
            "c": c,
            "y": y,
            "b1": edges.b1,
            "b": edges.b,
            "mass_at_zero": mass_at_zero(&params),
            "critical_low": critical_low,
            "critical_high": critical_high,
        }),
    )?;
    let config = json!({ "c": c, "y": y, "from": lo, "to": hi, "points": points });
    write_json(&out_dir.join(MANIFEST_FILE), &clock.manifest("law", &config, None, out_dir)?)
}

fn packet_columns(study: &CltStudy) -> Vec<(usize, usize)> {
    study
        .config
        .spec
        .spikes()
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.multiplicity).map(move |j| (i, j)))
        .collect()
}

fn packet_table(study: &CltStudy, columns: &[(usize, usize)], limit: bool) -> Csv {
    let mut header = vec!["replicate".to_string()];
    header.extend(columns.iter().map(|(i, j)| format!("spike{}_{}", i + 1, j + 1)));
    let mut csv = Csv::new(&header);
    for r in 0..study.records.len() {
        let mut cells = vec![r.to_string()];
        cells.extend(columns.iter().map(|&(i, j)| {
            fmt_f64(if limit {
                study.limit_draws[r].blocks[i][j]
            } else {
                study.records[r].packets[i][j]
            })
        }));
        csv.row(&cells);
    }
    csv
}

fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn normal_cdf(x: f64, var: f64) -> f64 {
    Normal::new(0.0, var.sqrt()).map_or(f64::NAN, |n| n.cdf(x))
}

#[derive(Serialize)]
struct EntrySummary {
    entry: usize,
    empirical_mean: f64,
    empirical_variance: f64,
    limit_draw_variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_distance: Option<f64>,
}

#[derive(Serialize)]
struct PacketSummary {
    spike: f64,
    multiplicity: usize,
    lambda: f64,
    limit_variance: Option<f64>,
    entries: Vec<EntrySummary>,
}

fn write_kdes(study: &CltStudy, out_dir: &Path) -> Result<(), CliError> {
    for (i, spike) in study.config.spec.spikes().iter().enumerate() {
        for j in 0..spike.multiplicity {
            let emp = study.empirical(i, j);
            let lim = study.limit(i, j);
            let sd = variance(&lim).sqrt();
            let centre = mean(&lim);
            let grid = linspace(centre - 4.0 * sd, centre + 4.0 * sd, KDE_POINTS);
            let fe = kde_1d(&emp, &grid)?;
            let fl = kde_1d(&lim, &grid)?;
            let simple = study.limit_variances[i];
            let mut header = vec!["x", "empirical", "limit_draws"];
            if simple.is_some() {
                header.push("gaussian_limit");
            }
            let mut csv = Csv::new(&header);
            for k in 0..grid.len() {
                let mut row = vec![grid[k], fe[k], fl[k]];
                if let Some(v) = simple {
                    row.push(normal_pdf(grid[k], v));
                }
                csv.float_row(&row);
            }
            csv.write(&out_dir.join(format!("kde_spike{}_{}.csv", i + 1, j + 1)))?;
        }
        if spike.multiplicity == 2 {
            let pairs = |f: &dyn Fn(usize) -> Vec<f64>| -> Vec<(f64, f64)> { f(0).into_iter().zip(f(1)).collect() };
            let emp = pairs(&|j| study.empirical(i, j));
            let lim = pairs(&|j| study.limit(i, j));
            let axis = |j: usize| {
                let v = study.limit(i, j);
                let (m, s) = (mean(&v), variance(&v).sqrt());
                linspace(m - 4.0 * s, m + 4.0 * s, KDE_2D_POINTS)
            };
            let (xs, ys) = (axis(0), axis(1));
            let ge = kde_2d(&emp, &xs, &ys)?;
            let gl = kde_2d(&lim, &xs, &ys)?;
            let mut csv = Csv::new(&["x", "y", "empirical", "limit_draws"]);
            for (a, x) in xs.iter().enumerate() {
                for (b, y) in ys.iter().enumerate() {
                    csv.float_row(&[*x, *y, ge.values[a][b], gl.values[a][b]]);
                }
            }
            csv.write(&out_dir.join(format!("kde2d_spike{}.csv", i + 1)))?;
        }
    }
    Ok(())
}

pub fn simulate_clt(config_path: &Path, seed: Option<u64>, common: &Common) -> Result<(), CliError> {
    let clock = Clock::start();
    let mut config: CltStudyConfig = read_config(config_path)?;
    if let Some(s) = seed {
        config.master_seed = s;
    }
    if config.replicates < 2 {
        return Err(CliError::Config(format!(
            "replicates must be at least 2 for summaries and density estimates, got {}",
            config.replicates
        )));
    }
    let study = with_threads(common.threads, || run_clt_study(&config))??;
    let out_dir = &common.out_dir;
    ensure_dir(out_dir)?;
    let columns = packet_columns(&study);
    packet_table(&study, &columns, false).write(&out_dir.join("replicates.csv"))?;
    packet_table(&study, &columns, true).write(&out_dir.join("limit_draws.csv"))?;
    write_kdes(&study, out_dir)?;

    let packets: Vec<PacketSummary> = study
        .config
        .spec
        .spikes()
        .iter()
        .enumerate()
        .map(|(i, s)| PacketSummary {
            spike: s.value,
            multiplicity: s.multiplicity,
            lambda: study.lambdas[i],
            limit_variance: study.limit_variances[i],
            entries: (0..s.multiplicity)
                .map(|j| {
                    let emp = study.empirical(i, j);
                    EntrySummary {
                        entry: j + 1,
                        empirical_mean: mean(&emp),
                        empirical_variance: variance(&emp),
                        limit_draw_variance: variance(&study.limit(i, j)),
                        ks_distance: study.limit_variances[i].map(|v| ks_distance(&emp, |x| normal_cdf(x, v))),
                    }
                })
                .collect(),
        })
        .collect();
    write_json(
        &out_dir.join("summary.json"),
        &json!({ "replicates": study.records.len(), "packets": packets }),
    )?;
    write_json(
        &out_dir.join(MANIFEST_FILE),
        &clock.manifest("simulate-clt", &config, Some(config.master_seed), out_dir)?,
    )
}

fn frequency_csv(table: &FrequencyTable) -> Csv {
    let mut header = vec!["quantity".to_string()];
    header.extend((1..=table.columns.len()).map(|i| format!("entry_{i}")));
    let mut csv = Csv::new(&header);
    for (k, name) in ["p", "n", "T"].into_iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(table.columns.iter().map(|d| [d.p(), d.n(), d.t()][k].to_string()));
        csv.row(&row);
    }
    for bin in 0..FREQUENCY_BINS {
        let mut row = vec![FrequencyTable::bin_label(bin)];
        row.extend((0..table.columns.len()).map(|c| fmt_f64(table.frequency(c, bin))));
        csv.row(&row);
    }
    csv
}

pub fn detect_study(
    config_path: &Path,
    seed: Option<u64>,
    dn_override: Option<f64>,
    common: &Common,
) -> Result<(), CliError> {
    let clock = Clock::start();
    let mut config: DetectionStudyConfig = read_config(config_path)?;
    if let Some(s) = seed {
        config.master_seed = s;
    }
    if let Some(d) = dn_override {
        config.detector.dn = DnRule::Fixed(d);
    }
    let study = with_threads(common.threads, || run_detection_study(&config))??;
    let out_dir = &common.out_dir;
    ensure_dir(out_dir)?;
    frequency_csv(&study.table).write(&out_dir.join("frequency_table.csv"))?;

    let mut header = vec!["replicate".to_string()];
    header.extend(config.ladder.iter().map(|d| format!("p{}_n{}_T{}", d.p(), d.n(), d.t())));
    let mut csv = Csv::new(&header);
    for r in 0..config.replicates {
        let mut row = vec![r.to_string()];
        row.extend(study.k_hats.iter().map(|col| col[r].to_string()));
        csv.row(&row);
    }
    csv.write(&out_dir.join("k_hat.csv"))?;
    write_json(
        &out_dir.join(MANIFEST_FILE),
        &clock.manifest("detect-study", &config, Some(config.master_seed), out_dir)?,
    )
}

pub fn detect(
    x_path: &Path,
    z_path: &Path,
    dn_override: Option<f64>,
    center: bool,
    out_dir: Option<&Path>,
) -> Result<(), CliError> {
    let clock = Clock::start();
    let x = read_matrix(x_path)?;
    let z = read_matrix(z_path)?;
    let config = DetectorConfig {
        dn: dn_override.map_or(DnRule::LogLog, DnRule::Fixed),
        center,
    };
    let d = detect_with_diagnostics(&x, &z, &config)?;
    let result = json!({
        "k_hat": d.k_hat,
        "b": d.b,
        "d_n": d.d_n,
        "threshold": d.b + d.d_n,
        "c": d.params.c(),
        "y": d.params.y(),
        "top_eigenvalues": d.eigenvalues.iter().take(TOP_EIGENVALUES).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&result).map_err(|e| CliError::Internal(e.to_string()))?);
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join("detection.json"), &result)?;
        let cfg = json!({ "x": x_path, "z": z_path, "detector": config });
        write_json(&dir.join(MANIFEST_FILE), &clock.manifest("detect", &cfg, None, dir)?)?;
    }
    Ok(())
}

/// Configuration of `simulate-records`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RecordsConfig {
    pub dims: ModelDims,
    pub model: ModelFamily,
    pub distribution: EntryDistribution,
    pub master_seed: u64,
}

pub fn simulate_records(config_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<(), CliError> {
    let clock = Clock::start();
    let mut config: RecordsConfig = read_config(config_path)?;
    if let Some(s) = seed {
        config.master_seed = s;
    }
    let model = config.model.build(config.dims)?;
    let mut rng = replicate_rng(config.master_seed, StreamDomain::Detection(0), 0);
    let (x, z) = model.draw_records(&mut rng, config.distribution)?;
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("x.csv"), &format_matrix(&x))?;
    write_file(&out_dir.join("z.csv"), &format_matrix(&z))?;
    write_json(
        &out_dir.join(MANIFEST_FILE),
        &clock.manifest("simulate-records", &config, Some(config.master_seed), out_dir)?,
    )
}
