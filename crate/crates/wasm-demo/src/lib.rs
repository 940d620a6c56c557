//! Browser bindings. Every export returns a JSON string, or an error message
//! the page shows verbatim; the functions are plain Rust on native targets.

use hasym::checks::{self, Check};
use hasym::conserved::{adm_closed_form, cwy_closed_form};
use hasym::embedding::optimal_expansion;
use hasym::initial_data::{complete_expansion, HarmonicAsymptotics};
use hasym::lorentz::{boost_from_observer, Observer};
use hasym::pipeline::{self, CheckToggles, GridConfig, Outputs, RadiiSpec, RunConfig, TableRow};
use hasym::sphere::SphereGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

fn vec3(name: &str, v: &[f64]) -> Result<[f64; 3], String> {
    v.try_into().map_err(|_| format!("{name}: expected 3 numbers, got {}", v.len()))
}

fn data_from(a: f64, b: &[f64], c: &[f64], d: &[f64]) -> Result<HarmonicAsymptotics, String> {
    if d.len() != 9 {
        return Err(format!("d: expected 9 numbers (row major), got {}", d.len()));
    }
    let angular = [[d[0], d[1], d[2]], [d[3], d[4], d[5]], [d[6], d[7], d[8]]];
    HarmonicAsymptotics::new(a, vec3("B", b)?, vec3("c", c)?, angular).map_err(|e| e.to_string())
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ClosedForms {
    observer: [f64; 4],
    energy: f64,
    momentum: [f64; 3],
    center_bort: [f64; 3],
    angular_adm: [f64; 3],
    center_cwy: [f64; 3],
    angular_cwy: [f64; 3],
}

/// Limiting observer and every closed-form conserved quantity.
#[wasm_bindgen]
pub fn closed_forms(a: f64, b: &[f64], c: &[f64], d: &[f64]) -> Result<String, String> {
    let data = data_from(a, b, c, d)?;
    let grid = SphereGrid::new(8).map_err(|e| e.to_string())?;
    let completion = complete_expansion(&data, &grid).map_err(|e| e.to_string())?;
    let (emb, _) = optimal_expansion(&data, &completion).map_err(|e| e.to_string())?;
    let obs: Observer = emb.observer;
    let boost = boost_from_observer(&obs).map_err(|e| e.to_string())?;
    let adm = adm_closed_form(&data);
    let cwy = cwy_closed_form(&data, &obs, &boost).map_err(|e| e.to_string())?;
    json(&ClosedForms {
        observer: obs.as_vec4(),
        energy: adm.e,
        momentum: adm.p,
        center_bort: adm.c,
        angular_adm: adm.j,
        center_cwy: cwy.c,
        angular_cwy: cwy.j,
    })
}

#[derive(Serialize)]
struct Surfaces {
    report: String,
    /// Extrapolated rows only; `radius` is dropped since it is always infinite.
    limits: Vec<LimitRow>,
    passed: bool,
}

#[derive(Serialize)]
struct LimitRow {
    quantity: String,
    value: f64,
    closed_form: f64,
    abs_error: f64,
}

/// Surface integrals on five radii `r0·2^k`, extrapolated to infinity.
#[wasm_bindgen]
pub fn surface_quantities(a: f64, b: &[f64], c: &[f64], d: &[f64], l_max: usize, r0: f64) -> Result<String, String> {
    let config = RunConfig {
        data: data_from(a, b, c, d)?,
        grid: GridConfig { l_max },
        radii: RadiiSpec::Ladder { r0, count: 5, ratio: 2.0 },
        checks: CheckToggles::default(),
        outputs: Outputs::default(),
    };
    let out = pipeline::run(&config, pipeline::DEFAULT_SEED).map_err(|e| e.to_string())?;
    let limits = out
        .table
        .iter()
        .filter(|r: &&TableRow| r.radius.is_infinite())
        .map(|r| LimitRow { quantity: r.quantity.clone(), value: r.value, closed_form: r.closed_form, abs_error: r.abs_error })
        .collect();
    json(&Surfaces { passed: out.passed(), report: out.report, limits })
}

/// Quadrature, transform and operator identities on a grid of degree `l_max`.
#[wasm_bindgen]
pub fn spectral_checks(l_max: usize, seed: u32) -> Result<String, String> {
    let grid = SphereGrid::new(l_max).map_err(|e| e.to_string())?;
    let found: Vec<Check> = checks::spectral(&grid, &mut ChaCha8Rng::seed_from_u64(seed.into()));
    json(&found)
}
