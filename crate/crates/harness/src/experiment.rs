//! Parameter sweeps over an instance ensemble, with CSV/SVG persistence.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use rsg_core::analysis::{check_conditions, delta_metrics, ConditionReport, DeltaMetrics};
use rsg_core::budget::activity_threshold;
use rsg_core::equilibria::{solve_nse_with, solve_rse1_with, solve_rse2_with};
use rsg_core::{overlap_stats, EquilibriumKind, EquilibriumResult, GameSpec, UncertaintySpec};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{HarnessError, Result};
use crate::montecarlo::CdfReport;
use crate::plot::{line_chart, Series};

pub const SWEEP_SCHEMA: &str = "rsg-sweep/1";
pub const CDF_SCHEMA: &str = "rsg-cdf/1";

/// Everything computed for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub instance: u64,
    pub gains: Vec<Vec<Vec<f64>>>,
    pub nse: EquilibriumResult,
    /// One entry per nonzero radius of the grid.
    pub rse1: Vec<(f64, EquilibriumResult)>,
    pub rse2: Vec<(f64, EquilibriumResult)>,
    /// Evaluated at the NSE; `d_metrics` holds one entry per robust result, RSE1 first.
    pub conditions: ConditionReport,
    /// Dimensions shared by the leader and the first follower per row, budgeted games only.
    pub common: Option<Vec<usize>>,
}

impl EnsembleRecord {
    fn rows(&self) -> impl Iterator<Item = (f64, f64, &EquilibriumResult)> {
        std::iter::once((0.0, 0.0, &self.nse))
            .chain(self.rse1.iter().map(|(e, r)| (*e, 0.0, r)))
            .chain(self.rse2.iter().map(|(d, r)| (0.0, *d, r)))
    }
}

fn better_for(leader: usize, a: EquilibriumResult, b: EquilibriumResult) -> EquilibriumResult {
    if b.utilities[leader] > a.utilities[leader] {
        b
    } else {
        a
    }
}

/// Solves every grid point of one instance.
pub fn solve_instance(
    config: &ExperimentConfig,
    instance: u64,
    spec: &GameSpec,
) -> Result<EnsembleRecord> {
    let opts = &config.solver;
    let leader = spec.leaders()[0];
    let mut nse = solve_nse_with(spec, opts, None)?;
    let eps: Vec<f64> = config
        .eps_grid
        .iter()
        .copied()
        .filter(|e| *e > 0.0)
        .collect();
    let deltas: Vec<f64> = config
        .delta_grid
        .iter()
        .copied()
        .filter(|d| *d > 0.0)
        .collect();
    let rse1_at = |e: f64, hint: &EquilibriumResult| {
        solve_rse1_with(
            spec,
            &UncertaintySpec::uniform(spec, e, 0.0),
            opts,
            Some(&hint.profile),
        )
    };
    let mut rse1 = eps
        .iter()
        .map(|&e| Ok((e, rse1_at(e, &nse)?)))
        .collect::<Result<Vec<_>>>()?;
    if spec.is_budgeted() {
        // the budgeted leader problem is multimodal: share the best basin
        let mut improved = false;
        for (_, r) in &rse1 {
            let again = solve_nse_with(spec, opts, Some(&r.profile))?;
            if again.utilities[leader] > nse.utilities[leader] {
                nse = again;
                improved = true;
            }
        }
        if improved {
            for (e, r) in rse1.iter_mut() {
                let again = rse1_at(*e, &nse)?;
                *r = better_for(leader, r.clone(), again);
            }
        }
    }
    let rse2 = deltas
        .iter()
        .map(|&d| {
            let u = UncertaintySpec::uniform(spec, 0.0, d);
            Ok((d, solve_rse2_with(spec, &u, opts, Some(&nse.profile))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut conditions = check_conditions(spec, &nse)?;
    conditions.d_metrics = rse1
        .iter()
        .chain(&rse2)
        .map(|(_, r)| delta_metrics(&nse, r))
        .collect::<rsg_core::Result<Vec<_>>>()?;
    let mut record = EnsembleRecord {
        instance,
        gains: spec.cross_gain.clone(),
        nse,
        rse1,
        rse2,
        conditions,
        common: None,
    };
    if let Some(p) = spec.budget(leader) {
        let threshold = activity_threshold(p, spec.n_dims());
        let follower = spec.followers()[0];
        record.common = Some(
            record
                .rows()
                .map(|(_, _, r)| {
                    Ok(overlap_stats(&r.profile, threshold)?.common_count(leader, follower))
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(record)
}

/// Aggregate rates over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub instances: usize,
    pub failed: usize,
    /// RSE1 cells where the leader did not lose and no follower gained.
    pub rse1_order: (usize, usize),
    /// RSE2 cells where the leader did not gain and no follower lost.
    pub rse2_order: (usize, usize),
    /// Instances where the gain predicted by C1-C2 (or C5-C6) materialised at the first radius.
    pub case1_agreement: (usize, usize),
    pub case2_agreement: (usize, usize),
}

fn rate((a, b): (usize, usize)) -> String {
    if b == 0 {
        "n/a".into()
    } else {
        format!("{a}/{b} ({:.1}%)", 100.0 * a as f64 / b as f64)
    }
}

impl Summary {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<40} {}", "instances solved", self.instances);
        let _ = writeln!(s, "{:<40} {}", "instances failed", self.failed);
        let _ = writeln!(
            s,
            "{:<40} {}",
            "RSE1 ordering (leader up, others down)",
            rate(self.rse1_order)
        );
        let _ = writeln!(
            s,
            "{:<40} {}",
            "RSE2 ordering (leader down, others up)",
            rate(self.rse2_order)
        );
        let _ = writeln!(
            s,
            "{:<40} {}",
            "case-1 prediction agreement",
            rate(self.case1_agreement)
        );
        let _ = writeln!(
            s,
            "{:<40} {}",
            "case-2 prediction agreement",
            rate(self.case2_agreement)
        );
        s
    }

    fn add(&mut self, r: &EnsembleRecord) {
        const TOL: f64 = 1e-9;
        // templates put the single leader first
        let leader = 0;
        let n = r.nse.utilities.len();
        let others: Vec<usize> = (0..n).filter(|&p| p != leader).collect();
        self.instances += 1;
        for (_, x) in &r.rse1 {
            self.rse1_order.1 += 1;
            let ok = x.utilities[leader] >= r.nse.utilities[leader] - TOL
                && others
                    .iter()
                    .all(|&p| x.utilities[p] <= r.nse.utilities[p] + TOL);
            self.rse1_order.0 += ok as usize;
        }
        for (_, x) in &r.rse2 {
            self.rse2_order.1 += 1;
            let ok = x.utilities[leader] <= r.nse.utilities[leader] + TOL
                && others
                    .iter()
                    .all(|&p| x.utilities[p] >= r.nse.utilities[p] - TOL);
            self.rse2_order.0 += ok as usize;
        }
        let d = &r.conditions.d_metrics;
        if let Some(first) = d.first().filter(|_| !r.rse1.is_empty()) {
            if r.conditions.case1_predicts_gain() {
                self.case1_agreement.1 += 1;
                self.case1_agreement.0 += (first.social >= -TOL) as usize;
            }
        }
        if let Some(first) = d.get(r.rse1.len()) {
            if r.conditions.case2_predicts_gain() {
                self.case2_agreement.1 += 1;
                self.case2_agreement.0 += (first.social >= -TOL) as usize;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<EnsembleRecord>,
    pub summary: Summary,
    pub csv: PathBuf,
    pub svg: Vec<PathBuf>,
}

/// Solves every instance at every grid point, writes `sweep.csv` (and plots)
/// into the configured directory and returns the records and summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    if config.spec.n_leaders != 1 {
        return Err(HarnessError::Config(
            "sweeps need exactly one leader; use the leader-selection protocol for several".into(),
        ));
    }
    let mut records = Vec::new();
    let mut summary = Summary::default();
    for index in 0..config.ensemble_size as u64 {
        let spec = config.instance(index)?;
        match solve_instance(config, index, &spec) {
            Ok(r) => {
                summary.add(&r);
                records.push(r);
            }
            Err(e) => {
                warn!("instance {index} skipped: {e}");
                summary.failed += 1;
            }
        }
    }
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let csv = dir.join("sweep.csv");
    write_sweep_csv(&csv, config, &records)?;
    let mut svg = Vec::new();
    if config.output.format == OutputFormat::CsvSvg {
        for (name, body) in sweep_plots(config, &records) {
            let path = dir.join(name);
            fs::write(&path, body)?;
            svg.push(path);
        }
    }
    Ok(ExperimentOutput {
        records,
        summary,
        csv,
        svg,
    })
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn header_lines(schema: &str) -> String {
    format!("# schema={schema}\n# generated_unix={}\n", timestamp())
}

/// Column names of a sweep over `n` players and `k` dimensions.
pub fn sweep_columns(n: usize, k: usize) -> Vec<String> {
    let mut c: Vec<String> = ["instance", "kind", "eps", "delta"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for a in 0..n {
        for b in 0..n {
            for d in 0..k {
                c.push(format!("g_{a}_{b}_{d}"));
            }
        }
    }
    for a in 0..n {
        for d in 0..k {
            c.push(format!("a_{a}_{d}"));
        }
    }
    c.extend((0..n).map(|a| format!("u_{a}")));
    c.push("social".into());
    c.extend((0..n).map(|a| format!("d_{a}")));
    c.push("d_social".into());
    c.extend(
        [
            "residual",
            "certified",
            "c1",
            "c2",
            "c3",
            "c4",
            "c5",
            "c6",
            "c7",
            "c8",
            "common_0_1",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    c
}

fn flag(b: Option<bool>) -> String {
    match b {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}

fn write_sweep_csv(
    path: &Path,
    config: &ExperimentConfig,
    records: &[EnsembleRecord],
) -> Result<()> {
    let n = config.spec.n_players();
    let k = config.spec.n_dims;
    let mut file = fs::File::create(path)?;
    file.write_all(header_lines(SWEEP_SCHEMA).as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(sweep_columns(n, k))?;
    for r in records {
        let d_all: Vec<Option<&DeltaMetrics>> = std::iter::once(None)
            .chain(r.conditions.d_metrics.iter().map(Some))
            .collect();
        for (row, (eps, delta, res)) in r.rows().enumerate() {
            let mut f: Vec<String> = vec![
                r.instance.to_string(),
                res.kind.label().to_string(),
                num(eps),
                num(delta),
            ];
            f.extend(r.gains.iter().flatten().flatten().map(|v| num(*v)));
            f.extend(res.profile.actions.iter().flatten().map(|v| num(*v)));
            f.extend(res.utilities.iter().map(|v| num(*v)));
            f.push(num(res.social));
            match d_all[row] {
                Some(d) => {
                    f.extend(d.per_player.iter().map(|v| num(*v)));
                    f.push(num(d.social));
                }
                None => f.extend(std::iter::repeat_n(String::new(), n + 1)),
            }
            f.push(num(res.diagnostics.residual));
            f.push(flag(Some(res.diagnostics.certified)));
            let c = &r.conditions;
            let at_nse = row == 0;
            let cond = |x: Option<bool>| flag(x.filter(|_| at_nse));
            f.push(cond(c.c1.as_ref().map(|x| x.all)));
            f.push(cond(c.c2.as_ref().map(|x| x.all)));
            f.push(cond(c.c3.as_ref().map(|x| x.all)));
            f.push(cond(c.c4.as_ref().map(|x| x.all)));
            f.push(cond(Some(c.c5.all)));
            f.push(cond(Some(c.c6_all())));
            f.push(cond(Some(c.c7.all)));
            f.push(cond(Some(c.c8_all())));
            f.push(
                r.common
                    .as_ref()
                    .map(|v| v[row].to_string())
                    .unwrap_or_default(),
            );
            w.write_record(&f)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One data row of a sweep CSV, as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub instance: u64,
    pub kind: String,
    pub eps: f64,
    pub delta: f64,
    pub utilities: Vec<f64>,
    pub social: f64,
    pub d: Option<Vec<f64>>,
}

fn read_schema(path: &Path, expected: &str) -> Result<()> {
    let mut first = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut first)?;
    let found = first
        .trim()
        .strip_prefix("# schema=")
        .unwrap_or("")
        .to_string();
    if found != expected {
        return Err(HarnessError::SchemaMismatch {
            expected: expected.into(),
            found,
        });
    }
    Ok(())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| HarnessError::CorruptRecord(format!("{what}: {s:?} is not a number")))
}

/// Reads a sweep CSV back, checking the schema and that every stored relative
/// change agrees with the stored utilities.
pub fn load_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    read_schema(path, SWEEP_SCHEMA)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let n = headers.iter().filter(|h| h.starts_with("u_")).count();
    let k = headers.iter().filter(|h| h.starts_with("a_0_")).count();
    let expected = sweep_columns(n, k);
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(HarnessError::SchemaMismatch {
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let col = |name: &str| {
        expected
            .iter()
            .position(|c| c == name)
            .expect("known column")
    };
    let mut rows: Vec<SweepRow> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let instance: u64 = rec[0]
            .parse()
            .map_err(|_| HarnessError::CorruptRecord(format!("instance {:?}", &rec[0])))?;
        let utilities = (0..n)
            .map(|a| parse_f64(&rec[col(&format!("u_{a}"))], "utility"))
            .collect::<Result<Vec<_>>>()?;
        let d = if rec[col("d_social")].is_empty() {
            None
        } else {
            let mut d = (0..n)
                .map(|a| parse_f64(&rec[col(&format!("d_{a}"))], "d"))
                .collect::<Result<Vec<_>>>()?;
            d.push(parse_f64(&rec[col("d_social")], "d_social")?);
            Some(d)
        };
        rows.push(SweepRow {
            instance,
            kind: rec[1].to_string(),
            eps: parse_f64(&rec[2], "eps")?,
            delta: parse_f64(&rec[3], "delta")?,
            utilities,
            social: parse_f64(&rec[col("social")], "social")?,
            d,
        });
    }
    let mut base: Option<&SweepRow> = None;
    for row in &rows {
        if row.kind == EquilibriumKind::Nse.label() {
            base = Some(row);
            continue;
        }
        let b = base.filter(|b| b.instance == row.instance).ok_or_else(|| {
            HarnessError::CorruptRecord(format!("instance {} has no NSE row", row.instance))
        })?;
        let d = row.d.as_ref().ok_or_else(|| {
            HarnessError::CorruptRecord(format!("instance {} lacks d-metrics", row.instance))
        })?;
        let recomputed = b
            .utilities
            .iter()
            .zip(&row.utilities)
            .map(|(u0, u)| (u - u0) / u0)
            .chain(std::iter::once((row.social - b.social) / b.social));
        for (stored, fresh) in d.iter().zip(recomputed) {
            if (stored - fresh).abs() > 1e-9 * fresh.abs().max(1.0) {
                return Err(HarnessError::CorruptRecord(format!(
                    "instance {} {}: stored d {stored} but utilities give {fresh}",
                    row.instance, row.kind
                )));
            }
        }
    }
    Ok(rows)
}

/// Mean relative changes along each grid.
fn sweep_plots(config: &ExperimentConfig, records: &[EnsembleRecord]) -> Vec<(String, String)> {
    let n = config.spec.n_players();
    let mut out = Vec::new();
    for (file, label, grid, pick) in [
        (
            "sweep_rse1.svg",
            "observation radius",
            &config.eps_grid,
            0usize,
        ),
        (
            "sweep_rse2.svg",
            "information radius",
            &config.delta_grid,
            1usize,
        ),
    ] {
        let radii: Vec<f64> = grid.iter().copied().filter(|r| *r > 0.0).collect();
        if radii.is_empty() || records.is_empty() {
            continue;
        }
        let offset = if pick == 0 { 0 } else { records[0].rse1.len() };
        let series = (0..=n)
            .map(|col| {
                let mut points = vec![(0.0, 0.0)];
                for (i, r) in radii.iter().enumerate() {
                    let mean = records
                        .iter()
                        .map(|rec| {
                            let d = &rec.conditions.d_metrics[offset + i];
                            if col < n {
                                d.per_player[col]
                            } else {
                                d.social
                            }
                        })
                        .sum::<f64>()
                        / records.len() as f64;
                    points.push((*r, mean));
                }
                Series {
                    name: if col < n {
                        format!("d_{col}")
                    } else {
                        "d_social".into()
                    },
                    points,
                    steps: false,
                }
            })
            .collect::<Vec<_>>();
        let title = if pick == 0 {
            "RSE1 vs NSE"
        } else {
            "RSE2 vs NSE"
        };
        out.push((
            file.to_string(),
            line_chart(title, label, "mean relative change", &series),
        ));
    }
    out
}

/// Writes per-instance changes and the CDF of a Monte Carlo study.
pub fn write_cdf(dir: &Path, report: &CdfReport, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let path = dir.join("montecarlo.csv");
    let mut file = fs::File::create(&path)?;
    file.write_all(header_lines(CDF_SCHEMA).as_bytes())?;
    writeln!(
        file,
        "# eps={} player={} total={} excluded={} positive_fraction={}",
        num(report.eps),
        report.player,
        report.total,
        report.excluded.len(),
        num(report.positive_fraction)
    )?;
    let mut w = csv::Writer::from_writer(file);
    let n = report.outcomes.first().map(|o| o.d.len() - 1).unwrap_or(0);
    let mut head = vec!["instance".to_string()];
    head.extend((0..n).map(|a| format!("d_{a}")));
    head.extend(
        ["d_social", "common_nse", "common_rse"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&head)?;
    for o in &report.outcomes {
        let mut f = vec![o.index.to_string()];
        f.extend(o.d.iter().map(|v| num(*v)));
        f.push(o.common_nse.to_string());
        f.push(o.common_rse.to_string());
        w.write_record(&f)?;
    }
    w.flush()?;
    paths.push(path);

    let path = dir.join("cdf.csv");
    let mut file = fs::File::create(&path)?;
    file.write_all(header_lines(CDF_SCHEMA).as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["value", "cumulative_fraction"])?;
    for (v, p) in &report.cdf {
        w.write_record([num(*v), num(*p)])?;
    }
    w.flush()?;
    paths.push(path);

    if format == OutputFormat::CsvSvg {
        let path = dir.join("cdf.svg");
        let series = [Series {
            name: format!("d_{}", report.player),
            points: report.cdf.clone(),
            steps: true,
        }];
        fs::write(
            &path,
            line_chart(
                "Relative utility change at RSE1",
                "relative change",
                "CDF",
                &series,
            ),
        )?;
        paths.push(path);
    }
    Ok(paths)
}

/// File contents without the comment lines at the top.
pub fn csv_body(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect())
}
