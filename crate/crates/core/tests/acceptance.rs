use std::process::ExitCode;
use std::time::Instant;

use hasym::checks::{self, Check, ExpansionContext};
use hasym::initial_data::HarmonicAsymptotics;
use hasym::sphere::SphereGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RADII: [f64; 5] = [50.0, 100.0, 200.0, 400.0, 800.0];
const SEED: u64 = 20240611;

fn generic() -> HarmonicAsymptotics {
    HarmonicAsymptotics::new(
        0.7,
        [0.3, -0.5, 0.4],
        [0.1, 0.2, -0.3],
        [[0.2, -0.4, 0.1], [0.3, 0.5, -0.2], [-0.1, 0.6, 0.3]],
    )
    .expect("admissible data")
}

fn pick(checks: Vec<Check>, names: &[&str]) -> Vec<Check> {
    checks.into_iter().filter(|c| names.iter().any(|n| c.name.starts_with(n))).collect()
}

fn criterion(id: usize, title: &str, result: hasym::Result<Vec<Check>>) -> bool {
    match result {
        Ok(checks) => {
            let ok = !checks.is_empty() && checks::all_passed(&checks);
            println!("{} criterion {id}: {title}", if ok { "PASS" } else { "FAIL" });
            for c in &checks {
                println!("    {c}");
            }
            ok
        }
        Err(e) => {
            println!("FAIL criterion {id}: {title} (error: {e})");
            false
        }
    }
}

fn main() -> ExitCode {
    match audit() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            println!("FAIL acceptance setup: {e}");
            ExitCode::FAILURE
        }
    }
}

fn audit() -> hasym::Result<bool> {
    let grid = SphereGrid::new(16)?;
    let grid12 = SphereGrid::new(12)?;
    let data = generic();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut ok = true;

    let start = Instant::now();
    let draws = checks::draws(&grid, &RADII, 25, &mut rng);
    let elapsed = start.elapsed().as_secs_f64();
    let (adm, cwy) = match draws {
        Ok(c) => (Ok(pick(c.clone(), &["adm."])), Ok(pick(c, &["thm_final."]))),
        Err(e) => (Err(hasym::Error::Validation(e.to_string())), Err(e)),
    };
    let adm = adm.map(|mut c| {
        c.push(Check::at_most("adm.runtime_seconds", elapsed, 60.0));
        c
    });
    ok &= criterion(1, "ADM quantities over 25 seeded draws, relative 1e-6", adm);
    ok &= criterion(2, "CWY numeric equals closed form over 25 draws, absolute 1e-6", cwy);

    ok &= criterion(
        3,
        "reduced integrals at l_max=12, 1e-8",
        ExpansionContext::new(&data, &grid12).map(|ctx| pick(checks::embedding(&ctx), &["evaluation_2."])),
    );
    ok &= criterion(4, "B=0: C_CWY=C_BORT and J_CWY=J_ADM, 1e-8", checks::vanishing_momentum(&data, &grid, &RADII));
    ok &= criterion(5, "flat data: rho, j and every quantity below 1e-10", checks::flat(&grid, &RADII));
    ok &= criterion(
        6,
        "l=1 obstruction vanishes at a/a0=B/4A and matches 3(4A a/a0-B).X otherwise",
        ExpansionContext::new(&data, &grid).map(|ctx| checks::obstruction(&ctx, &mut rng)),
    );
    let decay = (0..5).try_fold(checks::constraints(&data, &grid)?, |mut acc, _| {
        acc.extend(checks::constraints(&checks::draw_data(&mut rng), &grid)?);
        Ok(acc)
    });
    ok &= criterion(7, "constraint decay exponents, fixed data and 5 draws", decay);
    ok &= criterion(8, "spectral identities", Ok(checks::spectral(&grid, &mut rng)));
    ok &= criterion(
        9,
        "second-order embedding freedom leaves CWY outputs unchanged",
        ExpansionContext::new(&data, &grid).and_then(|ctx| checks::perturbation(&ctx, &RADII, &mut rng)),
    );

    Ok(ok)
}
