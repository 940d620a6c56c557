//! Config parsing and the batch pipeline behind `run` and `verify`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks::{self, Check, ConservedReport, ExpansionContext};
use crate::conserved::{AdmValues, CwyValues};
use crate::error::{Error, Result};
use crate::initial_data::HarmonicAsymptotics;
use crate::sphere::SphereGrid;

pub const MIN_L_MAX: usize = 8;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub l_max: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { l_max: 16 }
    }
}

/// Either an explicit list or a geometric ladder `r0 · ratio^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiiSpec {
    List(Vec<f64>),
    Ladder { r0: f64, count: usize, ratio: f64 },
}

impl RadiiSpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match *self {
            RadiiSpec::List(ref r) => Ok(r.clone()),
            RadiiSpec::Ladder { r0, count, ratio } => {
                if !(ratio > 1.0 && ratio.is_finite()) {
                    return Err(Error::Config(format!("radii.ratio: must be finite and > 1, got {ratio}")));
                }
                Ok((0..count).map(|k| r0 * ratio.powi(k as i32)).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckToggles {
    /// Hamiltonian and momentum constraint decay.
    pub constraints: bool,
    /// The closed-form versus numeric registry on the configured data.
    pub lemmas: bool,
    /// Independence from the second-order embedding freedom.
    pub perturbation: bool,
    /// Seeded random data sets for the consistency sweep; 0 disables it.
    pub draws: usize,
}

impl Default for CheckToggles {
    fn default() -> Self {
        CheckToggles { constraints: true, lemmas: false, perturbation: false, draws: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: HarmonicAsymptotics,
    #[serde(default)]
    pub grid: GridConfig,
    pub radii: RadiiSpec,
    #[serde(default)]
    pub checks: CheckToggles,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunConfig {
    /// Parse and validate; parse errors carry serde's line and column.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.l_max < MIN_L_MAX {
            return Err(Error::Config(format!("grid.l_max: must be at least {MIN_L_MAX}, got {}", self.grid.l_max)));
        }
        let radii = self.radii.resolve()?;
        if radii.len() < 3 {
            return Err(Error::Config(format!("radii: need at least 3 radii, got {}", radii.len())));
        }
        if let Some(k) = radii.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("radii[{k}]: must be positive and finite, got {}", radii[k])));
        }
        if let Some(k) = radii.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "radii: must be strictly increasing, radii[{}] = {} follows {}",
                k + 1,
                radii[k + 1],
                radii[k]
            )));
        }
        self.data.validate().map_err(|e| Error::Config(format!("data: {e}")))
    }

    pub fn with_l_max(mut self, l_max: usize) -> Result<RunConfig> {
        self.grid.l_max = l_max;
        self.validate()?;
        Ok(self)
    }
}

/// One row of the per-radius table. `radius` is `inf` on the extrapolated row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub quantity: String,
    pub radius: f64,
    pub value: f64,
    pub closed_form: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: String,
    pub table: Vec<TableRow>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        checks::all_passed(&self.checks)
    }
}

pub fn table_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Validation(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Validation(e.to_string()))
}

fn rows_for(out: &mut Vec<TableRow>, names: &[&str], radii: &[f64], samples: &[Vec<f64>], limit: &[f64], exact: &[f64]) {
    for (q, name) in names.iter().enumerate() {
        for (r, s) in radii.iter().zip(samples) {
            out.push(TableRow {
                quantity: (*name).into(),
                radius: *r,
                value: s[q],
                closed_form: exact[q],
                abs_error: (s[q] - exact[q]).abs(),
            });
        }
        out.push(TableRow {
            quantity: (*name).into(),
            radius: f64::INFINITY,
            value: limit[q],
            closed_form: exact[q],
            abs_error: (limit[q] - exact[q]).abs(),
        });
    }
}

fn table(report: &ConservedReport) -> Vec<TableRow> {
    let mut rows = Vec::new();
    let adm = &report.adm;
    let samples: Vec<Vec<f64>> = adm.samples.iter().map(AdmValues::to_vec).collect();
    rows_for(&mut rows, &AdmValues::NAMES, &adm.radii, &samples, &adm.limit.to_vec(), &report.adm_closed.to_vec());
    let cwy = &report.cwy;
    let samples: Vec<Vec<f64>> = cwy.samples.iter().map(CwyValues::to_vec).collect();
    rows_for(&mut rows, &CwyValues::NAMES, &cwy.radii, &samples, &cwy.limit.to_vec(), &report.cwy_closed.to_vec());
    let e = &report.energy;
    let samples: Vec<Vec<f64>> = e.samples.iter().map(|v| vec![*v]).collect();
    rows_for(&mut rows, &["E_QL"], &e.radii, &samples, &[e.limit], &[report.energy_closed]);
    rows
}

fn summary_lines(out: &mut String, names: &[&str], numeric: &[f64], exact: &[f64], error: &[f64]) {
    for (q, name) in names.iter().enumerate() {
        let _ = writeln!(
            out,
            "{name:<9} closed_form={:+.12e} numeric={:+.12e} discrepancy={:.3e} error_estimate={:.3e}",
            exact[q],
            numeric[q],
            (numeric[q] - exact[q]).abs(),
            error[q]
        );
    }
}

fn render_report(config: &RunConfig, seed: u64, report: &ConservedReport, checks: &[Check]) -> String {
    let mut out = String::new();
    let d = &config.data;
    let _ = writeln!(out, "data A={} B={:?} c={:?} d={:?}", d.mass, d.momentum, d.center, d.angular);
    let _ = writeln!(out, "grid l_max={} radii={:?} seed={seed}", config.grid.l_max, report.adm.radii);
    let _ = writeln!(out, "observer a0={:.12e} a={:?}", report.observer.a0, report.observer.a);
    summary_lines(&mut out, &AdmValues::NAMES, &report.adm.limit.to_vec(), &report.adm_closed.to_vec(), &report.adm.error.to_vec());
    summary_lines(&mut out, &CwyValues::NAMES, &report.cwy.limit.to_vec(), &report.cwy_closed.to_vec(), &report.cwy.error.to_vec());
    summary_lines(&mut out, &["E_QL"], &[report.energy.limit], &[report.energy_closed], &[report.energy.error]);
    for c in checks {
        let _ = writeln!(out, "{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    let _ = writeln!(out, "checks {} passed, {failed} failed", checks.len() - failed);
    out
}

/// Every named check on the configured data, plus `draws` random data sets.
pub fn registry(ctx: &ExpansionContext, grid: &Arc<SphereGrid>, radii: &[f64], draws: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut out = checks::spectral(grid, rng);
    out.extend(checks::harmonic_expansion(&ctx.data, grid)?);
    out.extend(checks::surface_series(&ctx.data, grid)?);
    out.extend(checks::embedding(ctx));
    out.extend(checks::obstruction(ctx, rng));
    out.extend(checks::vanishing_momentum(&ctx.data, grid, radii)?);
    out.extend(checks::flat(grid, radii)?);
    if draws > 0 {
        out.extend(checks::draws(grid, radii, draws, rng)?);
    }
    Ok(out)
}

pub fn run(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    let grid = SphereGrid::new(config.grid.l_max)?;
    let radii = config.radii.resolve()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = ExpansionContext::new(&config.data, &grid)?;
    let report = checks::conserved_report(&ctx, &radii)?;
    let mut found = checks::conserved(&report);
    if config.checks.constraints {
        found.extend(checks::constraints(&config.data, &grid)?);
    }
    if config.checks.lemmas {
        found.extend(registry(&ctx, &grid, &radii, 0, &mut rng)?);
    }
    if config.checks.perturbation {
        found.extend(checks::perturbation(&ctx, &radii, &mut rng)?);
    }
    if config.checks.draws > 0 {
        found.extend(checks::draws(&grid, &radii, config.checks.draws, &mut rng)?);
    }
    Ok(RunOutput {
        report: render_report(config, seed, &report, &found),
        table: table(&report),
        checks: found,
    })
}

/// The full registry: conserved-quantity audit, constraints, every identity,
/// perturbation and the random sweep (25 draws unless the config asks for more).
pub fn verify(config: &RunConfig, seed: u64) -> Result<Vec<Check>> {
    config.validate()?;
    let grid = SphereGrid::new(config.grid.l_max)?;
    let radii = config.radii.resolve()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = ExpansionContext::new(&config.data, &grid)?;
    let mut out = checks::conserved(&checks::conserved_report(&ctx, &radii)?);
    out.extend(checks::constraints(&config.data, &grid)?);
    out.extend(checks::perturbation(&ctx, &radii, &mut rng)?);
    out.extend(registry(&ctx, &grid, &radii, config.checks.draws.max(25), &mut rng)?);
    Ok(out)
}
