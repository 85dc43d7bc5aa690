//! Batch driver: every pipeline as a subcommand reading one validated JSON
//! config and writing machine-readable CSV/JSON artifacts.
//!
//! Exit codes: 0 all in-scope assertions passed, 1 assertion or runtime
//! failure, 2 config error.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use anosov_lab::config::RunConfig;
use anosov_lab::da::{DaMode, Deck};
use anosov_lab::dist::{grid_distance, yt_distance, DomainBox, KAPPA};
use anosov_lab::glue::{
    cross_orbit_report, delta_disjointness, good_side_coverage, pushed_foliation_angle,
    CrossOrbitParams, GluedManifoldModel, GluingMap, Pairing,
};
use anosov_lab::metric::verify_isometry;
use anosov_lab::plug::{BoundaryFoliationModel, SurfaceMesh};
use anosov_lab::qg::{
    companion_route_bound, compose_constants, fit_constants, prop_key_scan, verify_e4,
    KeyScanParams,
};
use anosov_lab::{BlownUpMetric, Point3, SolvMetric};

#[derive(Parser)]
#[command(name = "anosov-lab", about = "Numerical laboratory batch driver")]
struct Cli {
    /// Path to a JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the analysis seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the coarse grid step.
    #[arg(long = "grid-h", global = true)]
    grid_h: Option<f64>,
    /// Suppress the per-step summary lines.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the plug model and write its description.
    BuildPlug,
    /// Deck and Solv isometry residual suite.
    CheckIsometries,
    /// Distance solver spot checks against closed-form oracles.
    Distance,
    /// Scan the boundary torus: bad region, entry lengths, distance bounds.
    ScanBoundary,
    /// The yt-plane inequality suite.
    VerifyE4,
    /// The boundary scan producing the quasigeodesic constants.
    VerifyKeyprop,
    /// Envelope fit of (C, c) from orbit samples.
    FitQg,
    /// Build the two-plug gluing and check its hypotheses.
    Glue,
    /// Cross-orbit certificates on the gluing torus.
    VerifyGluing,
    /// Aggregate prior artifacts into one summary.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.analysis.seed = seed;
    }
    if let Some(h) = cli.grid_h {
        cfg.solver.grid_h = h;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("cannot create output directory: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.cmd {
        Cmd::BuildPlug => build_plug(&cfg, &cli),
        Cmd::CheckIsometries => check_isometries(&cfg, &cli),
        Cmd::Distance => distance_checks(&cfg, &cli),
        Cmd::ScanBoundary => scan_boundary(&cfg, &cli),
        Cmd::VerifyE4 => run_verify_e4(&cfg, &cli),
        Cmd::VerifyKeyprop => run_verify_keyprop(&cfg, &cli),
        Cmd::FitQg => run_fit_qg(&cfg, &cli),
        Cmd::Glue => run_glue(&cfg, &cli),
        Cmd::VerifyGluing => run_verify_gluing(&cfg, &cli),
        Cmd::Report => run_report(&cli),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn load_config(path: Option<&Path>) -> Result<RunConfig, AnyError> {
    match path {
        Some(p) => Ok(RunConfig::from_json(&fs::read_to_string(p)?)?),
        None => Ok(RunConfig::default()),
    }
}

fn say(cli: &Cli, line: &str) {
    if !cli.quiet {
        println!("{line}");
    }
}

/// CSV writer: a single timestamp comment line, then a deterministic body.
fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), AnyError> {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = format!("# generated_unix {now}\n{header}\n");
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), AnyError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn build_plug(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let plug = cfg.plug(DaMode::Source)?;
    let da = plug.da();
    let (p1, p2) = da.fixed_points()?;
    let (a0, b0) = plug.tube.semi_axes(0.0);
    let (a1, b1) = plug.tube.semi_axes(1.0);
    let value = serde_json::json!({
        "da": da.to_spec(),
        "lambda": da.lambda(),
        "r_tube": plug.tube.r_tube,
        "collar_thickness": plug.collar_thickness,
        "fixed_points": [[p1.x, p1.y], [p2.x, p2.y]],
        "tube_semi_axes": {"level0": [a0, b0], "level1": [a1, b1]},
        "boundary_metric_circumference": TAU * plug.tube.r_tube,
    });
    write_json(&cli.out.join("plug.json"), &value)?;
    say(cli, &format!("build-plug: lambda = {:.10}, fixed x* = {:.6}", da.lambda(), p1.x));
    Ok(true)
}

fn sample_points(seed: u64, n: usize) -> Vec<(Point3, Vector3<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = Point3::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-2.0..2.0),
            );
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            (p, v)
        })
        .collect()
}

fn check_isometries(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let da = cfg.da_map(DaMode::Source)?;
    let metric = BlownUpMetric::new(da.clone());
    let lambda = da.lambda();
    let solv = SolvMetric { lambda };
    let samples = sample_points(cfg.analysis.seed, 1000);
    let deck_tol = 1e-5;
    let mu_tol = 1e-6;
    let mut rows = Vec::new();
    let mut ok = true;

    for (name, g) in [("gamma", Deck::Gamma), ("e1", Deck::E1), ("e2", Deck::E2)] {
        let da2 = da.clone();
        let map = move |q: Point3| da2.deck_apply(g, q);
        let r = verify_isometry(&map, &metric, &samples);
        ok &= r < deck_tol;
        rows.push(format!("{name},,{},{r:.3e},{deck_tol:.1e},{}", samples.len(), r < deck_tol));
    }
    for a in [-1.0, 0.37, 2.0] {
        let map = move |q: Point3| Point3::new(lambda.powf(a) * q.x, lambda.powf(-a) * q.y, q.t + a);
        let r = verify_isometry(&map, &solv, &samples);
        ok &= r < mu_tol;
        rows.push(format!("mu_a,{a},{},{r:.3e},{mu_tol:.1e},{}", samples.len(), r < mu_tol));
    }
    // Diagnostic only: the shear family is not an isometry of the pulled-back
    // metric inside the blow-up slabs; the residual is reported, not gated.
    {
        let a = 0.37;
        let slab_samples: Vec<_> = sample_points(cfg.analysis.seed ^ 1, 4000)
            .into_iter()
            .filter(|(p, _)| metric.in_blowup_slab(*p))
            .take(200)
            .collect();
        if !slab_samples.is_empty() {
            let map = move |q: Point3| {
                Point3::new(lambda.powf(a) * q.x, lambda.powf(-a) * q.y, q.t + a)
            };
            let r = verify_isometry(&map, &metric, &slab_samples);
            rows.push(format!("mu_a_on_pullback,{a},{},{r:.3e},,reported", slab_samples.len()));
        }
    }
    write_csv(
        &cli.out.join("isometries.csv"),
        "map,a,samples,residual,tol,pass",
        &rows,
    )?;
    say(cli, &format!("check-isometries: pass = {ok}"));
    Ok(ok)
}

fn distance_checks(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let da = cfg.da_map(DaMode::Source)?;
    let metric = BlownUpMetric::new(da.clone());
    let h = cfg.solver.grid_h;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed);
    let mut rows = Vec::new();
    let mut ok = true;

    for id in 0..5 {
        let x = rng.gen_range(-1.0..1.0);
        let y = rng.gen_range(-1.0..1.0);
        let t0 = rng.gen_range(-1.0..0.0);
        let len = rng.gen_range(1.0..4.0);
        let p = Point3::new(x, y, t0);
        let q = Point3::new(x, y, t0 + len);
        let bbox = DomainBox::around(p, q, Point3::new(0.3, 0.3, 0.3));
        let d = grid_distance(p, q, &metric, bbox, h, None)?;
        let rel = (d.value - len).abs() / len;
        ok &= rel <= KAPPA;
        rows.push(format!(
            "v{id},vertical,{:.6},{:.6},{:.6},{h},{len:.6},{rel:.4}",
            d.value, d.lower_bound, d.upper_bound
        ));
    }
    let solv = SolvMetric { lambda: std::f64::consts::E };
    for id in 0..5 {
        let p = Point3::new(0.0, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let q = Point3::new(0.0, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let exact = yt_distance(p, q, std::f64::consts::E);
        if exact < 4.0 * h {
            continue;
        }
        let est = 0.5 * exact;
        let bbox = DomainBox::around(p, q, Point3::new(4.0 * h, 0.2, est + 0.5));
        let d = grid_distance(p, q, &solv, bbox, h, None)?;
        let rel = (d.value - exact).abs() / exact;
        ok &= rel <= KAPPA;
        rows.push(format!(
            "yt{id},yt_pair,{:.6},{:.6},{:.6},{h},{exact:.6},{rel:.4}",
            d.value, d.lower_bound, d.upper_bound
        ));
    }
    write_csv(
        &cli.out.join("distance.csv"),
        "id,kind,value,lower,upper,h,exact,rel_err",
        &rows,
    )?;
    say(cli, &format!("distance: pass = {ok} (band {KAPPA})"));
    Ok(ok)
}

fn scan_boundary(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let plug = cfg.plug(DaMode::Source)?;
    let metric = BlownUpMetric::new(plug.da().clone());
    let mesh = SurfaceMesh::build(&plug, &metric, cfg.solver.mesh_n_theta, cfg.solver.mesh_n_t);
    let mut rows = Vec::new();
    let t_fwd = 2.0;
    for j in 0..8 {
        for i in 0..16 {
            let theta = TAU * i as f64 / 16.0;
            let t = j as f64 / 8.0;
            let bad = mesh.bad_region_test(theta, t, cfg.analysis.delta);
            let b = plug.tube.surface_point(theta, t);
            let q = plug.flow(b, t_fwd);
            let ell = plug.ell(q)?;
            let (d_lo, d_up) = if theta.sin().abs() > 1e-9 {
                let d = companion_route_bound(&plug, &metric, q, cfg.solver.fine_h)?;
                (d.lower_bound, d.upper_bound)
            } else {
                (f64::NAN, f64::NAN)
            };
            rows.push(format!(
                "{theta:.6},{t:.6},{bad},{ell:.6},{d_lo:.6},{d_up:.6},{}",
                cfg.solver.fine_h
            ));
        }
    }
    write_csv(
        &cli.out.join("boundary_scan.csv"),
        "theta,t,bad_region,ell,d_lower,d_upper,h",
        &rows,
    )?;
    say(cli, &format!("scan-boundary: {} rows, max circle distance {:.4}", 16 * 8, mesh.max_circle_distance()));
    Ok(true)
}

fn run_verify_e4(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let plug = cfg.plug(DaMode::Source)?;
    let c = 2.0 * plug.tube.r_tube;
    let report = verify_e4(&plug.tube, c, &cfg.solver.e4_t_grid, cfg.solver.fine_h)?;
    let mut rows = Vec::new();
    for r in &report.rows {
        let tol = KAPPA * r.d_upper;
        rows.push(format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{tol:.6}",
            r.t_prime, r.ell, r.d_lower, r.d_upper, report.k_prime, r.residual, report.grid_h
        ));
    }
    write_csv(
        &cli.out.join("e4.csv"),
        "t_prime,ell,d_lower,d_upper,k_prime,residual,h,tol",
        &rows,
    )?;
    let ok = report.violations == 0;
    say(cli, &format!(
        "verify-e4: k_prime = {:.6}, rows = {}, violations = {}",
        report.k_prime,
        report.rows.len(),
        report.violations
    ));
    Ok(ok)
}

fn key_scan(cfg: &RunConfig, n_samples: usize) -> Result<anosov_lab::qg::QGReport, AnyError> {
    let plug = cfg.plug(DaMode::Source)?;
    let metric = BlownUpMetric::new(plug.da().clone());
    let mesh = SurfaceMesh::build(&plug, &metric, cfg.solver.mesh_n_theta, cfg.solver.mesh_n_t);
    let params = KeyScanParams {
        delta: cfg.analysis.delta,
        n_samples,
        t_grid: cfg.solver.key_t_grid.clone(),
        seed: cfg.analysis.seed,
        yt_h: cfg.solver.fine_h,
        a3: cfg.analysis.a3,
        a4: cfg.analysis.a4,
    };
    Ok(prop_key_scan(&plug, &metric, &mesh, &params)?)
}

fn run_verify_keyprop(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let report = key_scan(cfg, cfg.analysis.n_boundary_samples)?;
    write_json(
        &cli.out.join("keyprop.json"),
        &serde_json::to_value(&report)?,
    )?;
    let mut rows = Vec::new();
    for (i, s) in report.samples.iter().enumerate() {
        for r in &s.rows {
            rows.push(format!(
                "{i},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                s.boundary_point.t, r.t_prime, r.ell, r.d_lower, r.d_upper, r.residual,
                cfg.solver.fine_h
            ));
        }
    }
    write_csv(
        &cli.out.join("keyprop.csv"),
        "sample,boundary_t,t_prime,ell,d_lower,d_upper,residual,h",
        &rows,
    )?;
    say(cli, &format!(
        "verify-keyprop: C = {:.4}, c = {:.4}, samples = {}, violations = {}",
        report.big_c, report.small_c, report.n_samples, report.violations
    ));
    Ok(report.verified())
}

fn run_fit_qg(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let plug = cfg.plug(DaMode::Source)?;
    let metric = BlownUpMetric::new(plug.da().clone());
    let mut samples = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed);
    for _ in 0..24 {
        let theta = rng.gen_range(0.6..(PI - 0.6));
        let t0 = rng.gen_range(0.0..1.0);
        let t_prime = rng.gen_range(1.0..28.0);
        let b = plug.tube.surface_point(theta, t0);
        let q = plug.flow(b, t_prime);
        let ell = plug.ell(q)?;
        let d = companion_route_bound(&plug, &metric, q, cfg.solver.fine_h)?;
        samples.push((ell, d.upper_bound));
    }
    let (fit_c, fit_small) = fit_constants(&samples, cfg.solver.fine_h)?;
    let report = key_scan(cfg, 12)?;
    let (c0, c0_small) = compose_constants(
        report.big_c,
        report.small_c,
        cfg.analysis.a3,
        cfg.analysis.a4,
    )?;
    let value = serde_json::json!({
        "fitted": {"C": fit_c, "c": fit_small, "source": "envelope fit over orbit samples"},
        "composed": {"C": report.big_c, "c": report.small_c, "provenance": report.provenance},
        "glued_composed": {"C0": c0, "c0": c0_small},
        "n_fit_samples": samples.len(),
    });
    write_json(&cli.out.join("fitqg.json"), &value)?;
    say(cli, &format!(
        "fit-qg: fitted (C, c) = ({fit_c:.4}, {fit_small:.4}); composed ({:.4}, {:.4})",
        report.big_c, report.small_c
    ));
    Ok(true)
}

fn build_glued(cfg: &RunConfig) -> Result<GluedManifoldModel, AnyError> {
    let attracting = cfg.plug(DaMode::Source)?;
    let repelling = cfg.plug(DaMode::Sink)?;
    Ok(GluedManifoldModel::new(
        vec![attracting, repelling],
        vec![Pairing {
            exit_plug: 1,
            entrance_plug: 0,
            omega: GluingMap::quarter_turn(),
        }],
    )?)
}

fn run_glue(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let glued = build_glued(cfg)?;
    let attracting = &glued.plugs[0];
    let metric = BlownUpMetric::new(attracting.da().clone());
    let mesh = SurfaceMesh::build(attracting, &metric, cfg.solver.mesh_n_theta, cfg.solver.mesh_n_t);
    let fol = BoundaryFoliationModel::new(attracting);
    let field = |u: f64, _v: f64| fol.line_field(TAU * u);

    let quarter = GluingMap::quarter_turn();
    let identity = GluingMap::identity_map();
    let angle_quarter = pushed_foliation_angle(&quarter, &field, &field, 64);
    let angle_quarter_fine = pushed_foliation_angle(&quarter, &field, &field, 128);
    let angle_identity = pushed_foliation_angle(&identity, &field, &field, 64);
    let disjoint = delta_disjointness(
        &quarter,
        &mesh,
        &mesh,
        attracting.tube.r_tube,
        cfg.analysis.delta,
        cfg.analysis.delta_prime,
        96,
    );
    let coverage = good_side_coverage(
        &quarter,
        &mesh,
        &mesh,
        cfg.analysis.delta,
        cfg.analysis.delta_prime,
        96,
    );
    let floor = cfg.analysis.angle_floor;
    let quarter_ok = angle_quarter > floor;
    let identity_ok = angle_identity < floor;
    let value = serde_json::json!({
        "pairings": [{"exit": 1, "entrance": 0, "omega": quarter}],
        "angle_floor": floor,
        "quarter_turn_min_angle": angle_quarter,
        "quarter_turn_min_angle_fine_grid": angle_quarter_fine,
        "identity_min_angle": angle_identity,
        "delta_disjointness": disjoint,
        "good_side_coverage": coverage,
        "checks": {
            "quarter_turn_transversal": quarter_ok,
            "identity_control_degenerate": identity_ok,
            "bad_regions_disjoint": disjoint,
        },
    });
    write_json(&cli.out.join("glue.json"), &value)?;
    let ok = quarter_ok && identity_ok && disjoint;
    say(cli, &format!(
        "glue: quarter-turn min angle = {angle_quarter:.5}, identity = {angle_identity:.5}, disjoint = {disjoint}, pass = {ok}"
    ));
    Ok(ok)
}

fn run_verify_gluing(cfg: &RunConfig, cli: &Cli) -> Result<bool, AnyError> {
    let glued = build_glued(cfg)?;
    let attracting = &glued.plugs[0];
    let repelling = &glued.plugs[1];
    let omega = &glued.pairings[0].omega;
    let att_metric = BlownUpMetric::new(attracting.da().clone());
    let rep_metric = BlownUpMetric::new(repelling.da().clone());
    let mesh = SurfaceMesh::build(attracting, &att_metric, cfg.solver.mesh_n_theta, cfg.solver.mesh_n_t);

    let report = key_scan(cfg, 12)?;
    let (c0, c0_small) = compose_constants(
        report.big_c,
        report.small_c,
        cfg.analysis.a3,
        cfg.analysis.a4,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed ^ 0x91e5);
    let t_values = [1.0, 5.0, 10.0, 20.0];
    let mut rows = Vec::new();
    let mut ok = true;
    let mut id = 0;
    'outer: for &t_minus in &t_values {
        for &t_plus in &t_values {
            if id >= 20 {
                break 'outer;
            }
            // Crossing points away from the circle parameters on both sides:
            // the quarter turn sends v to the exit angle parameter, so both u
            // and v must sit in a good angular window.
            let u = rng.gen_range(0.18..0.32);
            let v = rng.gen_range(0.18..0.32) + if rng.gen_bool(0.5) { 0.5 } else { 0.0 };
            let params = CrossOrbitParams {
                t_minus,
                t_plus,
                yt_h: cfg.solver.fine_h,
                delta: cfg.analysis.delta,
                delta_prime: cfg.analysis.delta_prime,
                big_c0: c0,
                small_c0: c0_small,
            };
            let cert = cross_orbit_report(
                attracting,
                repelling,
                omega,
                &att_metric,
                &rep_metric,
                &mesh,
                &mesh,
                (u, v),
                &params,
            )?;
            ok &= cert.pass && cert.sandwich_ok;
            rows.push(format!(
                "{id},{:?},{:.3},{:.3},{:.6},{:.6},{:.6},{:.4},{:.4},{},{}",
                cert.case,
                cert.t_minus,
                cert.t_plus,
                cert.length,
                cert.d_lo,
                cert.d_hi,
                cert.big_c0,
                cert.small_c0,
                cert.sandwich_ok,
                cert.pass
            ));
            id += 1;
        }
    }
    write_csv(
        &cli.out.join("certificates.csv"),
        "id,case,t_minus,t_plus,length,d_lo,d_hi,C0,c0,sandwich_ok,pass",
        &rows,
    )?;
    say(cli, &format!("verify-gluing: {id} certificates, pass = {ok}"));
    Ok(ok)
}

fn run_report(cli: &Cli) -> Result<bool, AnyError> {
    let mut names: Vec<String> = Vec::new();
    let mut embedded = serde_json::Map::new();
    let mut entries: Vec<_> = fs::read_dir(&cli.out)?.filter_map(|e| e.ok()).collect();
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name().to_string_lossy().to_string();
        if name == "report.json" {
            continue;
        }
        if name.ends_with(".json") {
            let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(entry.path())?)?;
            embedded.insert(name.clone(), value);
        }
        names.push(name);
    }
    let value = serde_json::json!({"artifacts": names, "reports": embedded});
    write_json(&cli.out.join("report.json"), &value)?;
    say(cli, &format!("report: aggregated {} artifacts", names.len()));
    Ok(true)
}
