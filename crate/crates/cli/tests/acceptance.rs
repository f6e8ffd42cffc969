//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::flow_oracle::{self, check_flow, large_instance, small_instance};
use common::scan::{fixture, scan};
use common::{goldens, thermal_oracle as oracle};
use gshp_core::allocation::solve_transportation;
use gshp_core::climate::{self, DegreeDayProfile};
use gshp_core::geospatial::{self, PixelId, UnitKind};
use gshp_core::pipeline::{self, ParcelDesigns, Region, ScenarioSetup};
use gshp_core::scenario::ScenarioSpec;
use gshp_core::sizing::{self, FieldDesign, HpParams, SizingContext, DEPTHS, SPACINGS};
use gshp_core::thermal::{self, GroundColumn};
use gshp_core::{oracle_sim, synth};

type Outcome = Result<String, String>;

struct Synthetic {
    _dir: tempfile::TempDir,
    region: Region,
    designs: Vec<ParcelDesigns>,
}

fn synthetic() -> Synthetic {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth::generate(dir.path(), 42, 3).unwrap();
    let region = Region::load(&manifest).unwrap();
    let designs = pipeline::prepare_designs(&region).unwrap();
    Synthetic { _dir: dir, region, designs }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn resistance_oracles() -> Outcome {
    let g = GroundColumn::reference();
    let t = 50.0 * oracle::SECONDS_PER_YEAR;
    let mut worst: f64 = 0.0;
    let mut lib_time = 0.0;
    let mut timed = |f: &mut dyn FnMut() -> f64| {
        let start = Instant::now();
        let v = f();
        lib_time += start.elapsed().as_secs_f64();
        v
    };
    let mut fixtures = 0;
    for (h, golden) in goldens::LONG_TERM {
        let live = oracle::point_source_fls(g.borehole_radius, h, t, g.lambda, g.alpha);
        let lib = timed(&mut || thermal::compute_r_lt(h, &g, 50.0).unwrap());
        worst = worst.max(rel(lib, live)).max(rel(lib, golden));
        fixtures += 1;
    }
    for (h, golden) in goldens::SEASONAL {
        let live = oracle::seasonal_convolution(g.borehole_radius, h, g.lambda, g.alpha);
        let lib = timed(&mut || thermal::compute_r_seas(h, &g).unwrap());
        worst = worst.max(rel(lib, live)).max(rel(lib, golden));
        fixtures += 1;
    }
    for (b, h, golden) in goldens::FIELD_3X3 {
        let live = oracle::pairwise_field(&oracle::grid(b, 3, 3), h, t, g.lambda, g.alpha);
        let lib = timed(&mut || thermal::compute_r_field(b, h, 3, 3, &g, 50.0).unwrap());
        worst = worst.max(rel(lib, live)).max(rel(lib, golden));
        fixtures += 1;
    }
    check(
        worst < 0.01 && lib_time < 60.0,
        format!("{fixtures} fixtures, max rel err {worst:.2e}, library {lib_time:.2}s"),
    )
}

fn field_decay() -> Outcome {
    let g = GroundColumn::reference();
    let r: Vec<f64> = SPACINGS
        .iter()
        .map(|&b| thermal::compute_r_field(b, 150.0, 5, 5, &g, 50.0).unwrap())
        .collect();
    check(
        r.windows(2).all(|w| w[1] < w[0]),
        format!("R_field {:.4} at B=5 to {:.4} at B=100", r[0], r[r.len() - 1]),
    )
}

fn closed_form_scan() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut solved = 0;
    for k in 0..20 {
        let f = fixture(&mut rng);
        let got = sizing::solve_nominal_hours(&f.design, &f.ctx, f.q_inj).unwrap();
        let (want, step) = scan(&f);
        match (got, want) {
            (Some(p), Some(q)) if (p.q_max - q).abs() <= step => solved += 1,
            (None, None) => {}
            (got, want) => {
                return Err(format!("fixture {k}: solver {:?} scan {want:?} step {step:.3}", got.map(|p| p.q_max)))
            }
        }
    }
    check(solved >= 10, format!("20 fixtures agree, {solved} feasible"))
}

fn reference_designs(ground: &GroundColumn) -> Vec<FieldDesign> {
    let parcel = synth::reference_parcel();
    let mut designs = Vec::new();
    for b in SPACINGS {
        let pts = geospatial::place_boreholes(&parcel.geometry, b, 3.0).unwrap();
        for h in DEPTHS {
            designs.push(FieldDesign::evaluate(b, h, pts.clone(), ground, 50.0).unwrap());
        }
    }
    designs
}

fn reference_ctx() -> SizingContext {
    SizingContext {
        ground: GroundColumn::reference(),
        hp: HpParams::default(),
        profile: DegreeDayProfile::temperate(),
        t_nom: 1800.0,
    }
}

fn calibration(syn: &Synthetic) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    let mut record = |v: oracle_sim::Validation| {
        worst = worst.max(v.violation);
        points += 1;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let f = fixture(&mut rng);
        if let Some(o) = sizing::optimize_field(std::slice::from_ref(&f.design), &f.ctx, f.q_inj).unwrap() {
            let c = &f.ctx;
            record(oracle_sim::validate_operating_point(&o.point, &f.design, &c.ground, &c.profile, &c.hp).unwrap());
        }
    }
    let c = reference_ctx();
    let designs = reference_designs(&c.ground);
    let cap = designs
        .iter()
        .map(|d| sizing::injection_capacity(d, &c).unwrap())
        .fold(0.0, f64::max);
    for frac in [0.0, 0.5, 0.95] {
        if let Some(o) = sizing::optimize_field(&designs, &c, frac * cap).unwrap() {
            let d = designs
                .iter()
                .find(|d| d.spacing == o.spacing && d.depth == o.depth)
                .unwrap();
            record(oracle_sim::validate_operating_point(&o.point, d, &c.ground, &c.profile, &c.hp).unwrap());
        }
    }
    for label in ["NC-ND", "PC-ND-4.5", "FC-ND-8.5"] {
        let spec: ScenarioSpec = label.parse().unwrap();
        let setup = ScenarioSetup::new(&syn.region, &syn.designs, spec).unwrap();
        let run = setup.run(syn.region.cooling_runs(&spec).unwrap()[0]).unwrap();
        for (_, v) in setup.validate(&run).unwrap() {
            record(v);
        }
    }
    check(worst <= 1.5, format!("{points} operating points, worst excursion {worst:.3} K"))
}

fn regeneration(syn: &Synthetic) -> Outcome {
    let mut by_spec = BTreeMap::new();
    for s in ScenarioSpec::standard() {
        let r = pipeline::run_scenario(&syn.region, &syn.designs, s).unwrap();
        by_spec.insert(s.label(), (r.mean("q_inj"), r.mean("q_extr")));
    }
    let base = by_spec["NC-ND"];
    for c in ["2.6", "4.5", "8.5"] {
        let pc = by_spec[&format!("PC-ND-{c}")];
        let fc = by_spec[&format!("FC-ND-{c}")];
        if !(base.1 <= pc.1 && pc.1 <= fc.1) {
            return Err(format!("climate {c}: Q_extr {:.3e} {:.3e} {:.3e}", base.1, pc.1, fc.1));
        }
    }
    let n = by_spec.len() as f64;
    let (mx, my) = by_spec.values().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = by_spec
        .values()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    check(
        (0.75..=1.0).contains(&slope),
        format!("monotone NC -> PC -> FC per climate, slope {slope:.4}"),
    )
}

fn spacing_shift() -> Outcome {
    let c = reference_ctx();
    let designs = reference_designs(&c.ground);
    let cap = designs
        .iter()
        .map(|d| sizing::injection_capacity(d, &c).unwrap())
        .fold(0.0, f64::max);
    let idle = sizing::optimize_field(&designs, &c, 0.0).unwrap();
    let full = sizing::optimize_field(&designs, &c, 0.95 * cap).unwrap();
    let (Some(idle), Some(full)) = (idle, full) else {
        return Err("no feasible design".into());
    };
    check(
        (15.0..=30.0).contains(&idle.spacing) && [5.0, 7.0].contains(&full.spacing),
        format!("B = {} m idle, {} m at 95% of capacity", idle.spacing, full.spacing),
    )
}

fn transportation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..200 {
        let p = small_instance(&mut rng);
        let total: u64 = solve_transportation(&p).unwrap().iter().sum();
        let cut = flow_oracle::min_cut(&p.supply, &p.demand, &p.edges);
        let lp = flow_oracle::lp_vertices(&p.supply, &p.demand, &p.edges);
        if total != cut || (total as f64 - lp).abs() > 1e-6 {
            return Err(format!("instance {k}: {total} vs cut {cut} lp {lp}"));
        }
    }
    for seed in 0..3 {
        let p = large_instance(10_000, seed);
        let flow = solve_transportation(&p).unwrap();
        check_flow(&p, &flow).map_err(|e| format!("10k instance {seed}: {e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, format!("200 small instances optimal, 3 x 10k vertices valid, {secs:.2}s"))
}

// distance between axis-aligned rectangles [x0, y0, x1, y1]
fn rect_distance(a: [f64; 4], b: [f64; 4]) -> f64 {
    let dx = (b[0] - a[2]).max(a[0] - b[2]).max(0.0);
    let dy = (b[1] - a[3]).max(a[1] - b[3]).max(0.0);
    dx.hypot(dy)
}

fn dhc_dominance(syn: &Synthetic) -> Outcome {
    let grid = synth::grid();
    let zone: [f64; 4] = [820.0, 100.0, 1180.0, 300.0];
    let threshold = syn.region.manifest.allocation.fraction * (zone[2] - zone[0]).max(zone[3] - zone[1]);
    let mut strict = 0;
    for s in ScenarioSpec::standard() {
        let nd = pipeline::run_scenario(&syn.region, &syn.designs, s).unwrap();
        let d = pipeline::run_scenario(&syn.region, &syn.designs, s.with_dhc(true)).unwrap();
        for (k, (a, b)) in d.runs.iter().zip(&nd.runs).enumerate() {
            let (with, without) = (a.summary.useful_heat, b.summary.useful_heat);
            if with < without - 1e-9 * without {
                return Err(format!("{s} run {k}: {with:.6e} < {without:.6e}"));
            }
            let deficit = a
                .accounts
                .values()
                .any(|u| u.kind == UnitKind::Dhc && u.deficit_heat + u.imported_heat > 0.0);
            let edge = deficit
                && (0..grid.nx).any(|ix| {
                    (0..grid.ny).any(|iy| {
                        let id = PixelId { ix, iy };
                        let x0 = grid.origin[0] + ix as f64 * grid.pitch;
                        let y0 = grid.origin[1] + iy as f64 * grid.pitch;
                        let cell = [x0, y0, x0 + grid.pitch, y0 + grid.pitch];
                        a.accounts
                            .get(&id.to_string())
                            .is_some_and(|u| u.surplus_heat + u.exported_heat > 0.0)
                            && rect_distance(cell, zone) <= threshold
                    })
                });
            if edge {
                strict += 1;
                if with <= without {
                    return Err(format!("{s} run {k}: edge exists but no gain"));
                }
            }
        }
    }
    check(strict > 0, format!("7 scenario pairs, {strict} runs with edges all strictly better"))
}

fn january(t: f64) -> Vec<(NaiveDate, f64)> {
    (1..=31)
        .map(|d| (NaiveDate::from_ymd_opt(2001, 1, d).unwrap(), t))
        .collect()
}

fn appendix_examples() -> Outcome {
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64, tol: f64| {
        if (got - want).abs() > tol {
            failures.push(format!("{name}: {got} != {want}"));
        }
    };
    expect("HDD January 10 C", climate::compute_hdd(&january(10.0)).unwrap()[0], 310.0, 0.0);
    expect("HDD at 12 C", climate::heating_degrees(12.0), 8.0, 0.0);
    expect("HDD at 15 C", climate::heating_degrees(15.0), 0.0, 0.0);
    let july: Vec<_> = (1..=31)
        .map(|d| (NaiveDate::from_ymd_opt(2001, 7, d).unwrap(), 25.0))
        .collect();
    expect("CDD July 25 C", climate::compute_cdd(&july).unwrap()[6], 217.0, 0.0);
    expect("CDD at 18 C", climate::cooling_degrees(18.0), 0.0, 0.0);
    let cool = climate::compute_cdd(&january(17.9)).unwrap();
    expect("CDD below base", cool.iter().sum(), 0.0, 0.0);
    let mut m = [1690.0 / 11.0; 12];
    m[0] = 310.0;
    expect("weight max/total", climate::load_weights(&m).unwrap().w_max, 0.16275, 1e-12);
    expect("weight uniform", climate::load_weights(&[5.0; 12]).unwrap().w_max, 0.0875, 1e-12);
    let mut single = [0.0; 12];
    single[3] = 42.0;
    expect("weight single month", climate::load_weights(&single).unwrap().w_max, 1.05, 1e-12);
    expect("hours w=1.05", climate::max_operating_time(1.05, 744.0), 708.57, 5e-3);
    expect("hours w=0.0875", climate::max_operating_time(0.0875, 744.0), 8502.9, 5e-2);
    expect("hours cap", climate::max_operating_time(0.01, 744.0), 8760.0, 0.0);
    let hp = HpParams::default();
    let (heat, _) = sizing::to_useful_energy(3.5, 0.0, &hp).unwrap();
    let (_, cool) = sizing::to_useful_energy(0.0, 6.5, &hp).unwrap();
    expect("COP heating", heat, 4.5, 4.5 * f64::EPSILON);
    expect("COP cooling", cool, 5.5, 5.5 * f64::EPSILON);
    if failures.is_empty() {
        Ok("degree days, weights, operating time and COP factors exact".into())
    } else {
        Err(failures.join("; "))
    }
}

fn gshp(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gshp"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("gshp {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let key = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let region = tmp.path().join("region");
    let region_s = region.to_str().unwrap();
    gshp(&["synth", "--runs", "3", "--out-dir", region_s])?;
    let manifest = region.join("manifest.toml");
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "4"), ("c", "4")] {
        let out = tmp.path().join(name);
        gshp(&[
            "run",
            "--config",
            manifest.to_str().unwrap(),
            "--threads",
            threads,
            "--out-dir",
            out.to_str().unwrap(),
        ])?;
        outputs.push(snapshot(&out));
    }
    let files = outputs[0].len();
    if files == 0 {
        return Err("no outputs".into());
    }
    for (k, o) in outputs.iter().enumerate().skip(1) {
        if o != &outputs[0] {
            let diff = outputs[0]
                .iter()
                .find(|(p, bytes)| o.get(*p) != Some(bytes))
                .map_or("file set".to_string(), |(p, _)| p.clone());
            return Err(format!("run {k} differs at {diff}"));
        }
    }
    Ok(format!("{files} files identical across --threads 1, 4 and a repeat"))
}

fn main() -> ExitCode {
    let syn = synthetic();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("resistance oracle equivalence", Box::new(resistance_oracles)),
        ("field resistance decay", Box::new(field_decay)),
        ("closed form vs scan", Box::new(closed_form_scan)),
        ("weighting calibration", Box::new(|| calibration(&syn))),
        ("regeneration monotonicity", Box::new(|| regeneration(&syn))),
        ("optimal spacing shift", Box::new(spacing_shift)),
        ("transportation optimality", Box::new(transportation)),
        ("district network dominance", Box::new(|| dhc_dominance(&syn))),
        ("appendix examples", Box::new(appendix_examples)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:2} {name}: PASS ({msg}) [{secs:.1}s]", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:2} {name}: FAIL ({msg}) [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
