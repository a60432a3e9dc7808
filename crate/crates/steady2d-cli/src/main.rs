//! Command-line workbench for 2D steady Euler flows.

mod spec;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use steady2d::calculus::{
    bracket_residual, convergence_probe, laplacian, steady_residual, ProbeOperator,
};
use steady2d::critical::{analyze_critical_set, detect_local_radiality, innermost_loop};
use steady2d::elliptic::{solve_disk_newton, solve_radial};
use steady2d::field::FieldRef;
use steady2d::flux::{analyze_flux, fit_puiseux, verify_flux_residual, EndpointSide};
use steady2d::grid::sample_grid;
use steady2d::moving_plane::{symmetry_verdict, SweepRegion};
use steady2d::report::{run_analyze, AnalyzeOptions};
use steady2d::tube::{build_fermi_chart, export_field, solve_tube_series};

#[derive(Parser)]
#[command(
    name = "steady2d",
    version,
    about = "Analyze 2D steady Euler flows: bracket residuals, critical sets, \
             vorticity profiles, symmetry detection, and tube counterexamples"
)]
struct Cli {
    /// Omit the timestamp so identical runs emit byte-identical reports.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Poisson bracket norms between a field and a second field.
    Bracket {
        /// Field spec: `name=...; params={...}` or a bare catalog name.
        #[arg(long)]
        field: String,
        /// Second field; defaults to the Laplacian of the first.
        #[arg(long)]
        with: Option<String>,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Steadiness residual ‖{ψ, Δψ}‖ of a field.
    Residual {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Critical components, degrees, and the region decomposition.
    CriticalSet {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 192)]
        resolution: usize,
    },
    /// Vorticity profile extraction with endpoint expansions.
    Flux {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        /// Ramification search cap for the endpoint fits.
        #[arg(long, default_value_t = 4)]
        k0_max: usize,
    },
    /// Manufacture a steady state by solving Δψ = F(ψ).
    Solve {
        /// Problem file: `flux={kind:...}; mode=radial-shoot|disk-newton; ...`.
        #[arg(long)]
        problem: PathBuf,
        /// Write the solution sampled on a Cartesian grid.
        #[arg(long)]
        out_grid: Option<PathBuf>,
        #[arg(long, default_value_t = 192)]
        grid_resolution: usize,
    },
    /// Moving-plane symmetry sweep.
    MovingPlane {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 16)]
        directions: usize,
        /// `domain` sweeps the field's domain; `auto` prefers the innermost
        /// traced critical loop when one exists.
        #[arg(long, default_value = "domain")]
        region: String,
        #[arg(long, default_value_t = 256)]
        lambda_count: usize,
    },
    /// Build the tube flow around a Jordan curve.
    Counterexample {
        /// circle | ellipse | fourier:FILE
        #[arg(long, default_value = "ellipse")]
        curve: String,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        /// Truncation orders `Nn,Ns`.
        #[arg(long, default_value = "16,64")]
        orders: String,
        /// Ellipse semi-axes (ignored for other curves).
        #[arg(long, default_value_t = 1.3)]
        a: f64,
        #[arg(long, default_value_t = 0.8)]
        b: f64,
        /// Prefix for the grid CSV and the coefficient CSV.
        #[arg(long)]
        out_prefix: Option<PathBuf>,
        #[arg(long, default_value_t = 192)]
        grid_resolution: usize,
    },
    /// Full pipeline: residual, critical set, flux, moving plane, verdict.
    Analyze {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        #[arg(long, default_value_t = 16)]
        directions: usize,
        /// Run downstream stages even when the field is not steady.
        #[arg(long)]
        force: bool,
    },
    /// Grid-operator convergence order probe.
    Probe {
        #[arg(long)]
        field: String,
        /// laplacian | bracket
        #[arg(long, default_value = "laplacian")]
        operator: String,
        /// Comma-separated resolutions.
        #[arg(long, default_value = "32,64,128")]
        resolutions: String,
    },
}

#[derive(Serialize)]
struct Meta {
    tool: &'static str,
    version: &'static str,
    spec_hash: String,
    resolution: Option<usize>,
    timestamp_unix: Option<u64>,
}

fn meta(spec_text: &str, resolution: Option<usize>, no_timestamp: bool) -> Meta {
    let mut hasher = Sha256::new();
    hasher.update(spec_text.as_bytes());
    let hash = format!("{:x}", hasher.finalize());
    Meta {
        tool: "steady2d",
        version: env!("CARGO_PKG_VERSION"),
        spec_hash: hash[..16].to_string(),
        resolution,
        timestamp_unix: if no_timestamp {
            None
        } else {
            Some(
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            )
        },
    }
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            std::fs::write(path, json.as_bytes())?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(json.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn load_field(text: &str) -> Result<(FieldRef, String)> {
    let parsed = spec::parse_field_spec(text)?;
    let field = spec::build_field(&parsed)?;
    Ok((field, parsed.raw))
}

fn critical_values_of(field: &FieldRef, resolution: usize) -> Vec<f64> {
    match analyze_critical_set(field.as_ref(), resolution.min(160)) {
        Ok(a) => {
            let mut v: Vec<f64> = a.components.iter().map(|c| c.level).collect();
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            v.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
            v
        }
        Err(_) => vec![],
    }
}

fn main() {
    // usage problems (unknown subcommand, missing flags) exit with code 1
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            let is_help = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            std::process::exit(if is_help { 0 } else { 1 });
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    let no_ts = cli.no_timestamp;
    let out = cli.out.clone();
    match cli.command {
        Command::Bracket { field, with, resolution } => {
            let (f, raw) = load_field(&field)?;
            let report = match with {
                Some(g_spec) => {
                    let (g, _) = load_field(&g_spec)?;
                    bracket_residual(&f, &g, resolution)?
                }
                None => {
                    let lap = laplacian(&f);
                    bracket_residual(&f, &lap, resolution)?
                }
            };
            #[derive(Serialize)]
            struct Out {
                meta: Meta,
                #[serde(flatten)]
                report: steady2d::calculus::ResidualReport,
            }
            emit(&out, &Out { meta: meta(&raw, Some(resolution), no_ts), report })?;
            Ok(0)
        }
        Command::Residual { field, resolution } => {
            let (f, raw) = load_field(&field)?;
            let report = steady_residual(&f, resolution);
            #[derive(Serialize)]
            struct Out {
                meta: Meta,
                #[serde(flatten)]
                report: steady2d::calculus::ResidualReport,
            }
            emit(&out, &Out { meta: meta(&raw, Some(resolution), no_ts), report })?;
            Ok(0)
        }
        Command::CriticalSet { field, resolution } => {
            let (f, raw) = load_field(&field)?;
            let analysis = analyze_critical_set(f.as_ref(), resolution)?;
            let decomposition = innermost_loop(&analysis, f.domain()).ok();
            let radiality = decomposition
                .as_ref()
                .map(|d| detect_local_radiality(f.as_ref(), &analysis, d));
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta,
                components: &'a [steady2d::critical::CriticalComponent],
                decomposition: &'a Option<steady2d::critical::RegionDecomposition>,
                radiality: &'a Option<Vec<steady2d::critical::CellRadiality>>,
            }
            emit(
                &out,
                &Out {
                    meta: meta(&raw, Some(resolution), no_ts),
                    components: &analysis.components,
                    decomposition: &decomposition,
                    radiality: &radiality,
                },
            )?;
            Ok(0)
        }
        Command::Flux { field, resolution, k0_max } => {
            let (f, raw) = load_field(&field)?;
            let steady = steady_residual(&f, resolution.min(128));
            let critical_values = critical_values_of(&f, resolution);
            let (samples, flux) =
                analyze_flux(&f, resolution, &critical_values, steady.sup_residual)?;
            let residual = verify_flux_residual(&f, &flux, resolution).ok();
            let pmin = fit_puiseux(&flux, EndpointSide::Min, k0_max).ok();
            let pmax = fit_puiseux(&flux, EndpointSide::Max, k0_max).ok();
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta,
                relation: &'a steady2d::flux::FluxRelation,
                levels_skipped: usize,
                residual: Option<steady2d::flux::FluxResidualReport>,
                puiseux_min: Option<&'a steady2d::flux::PuiseuxSeries>,
                puiseux_max: Option<&'a steady2d::flux::PuiseuxSeries>,
            }
            emit(
                &out,
                &Out {
                    meta: meta(&raw, Some(resolution), no_ts),
                    relation: &flux,
                    levels_skipped: samples.skipped.len(),
                    residual,
                    puiseux_min: pmin.as_ref(),
                    puiseux_max: pmax.as_ref(),
                },
            )?;
            Ok(0)
        }
        Command::Solve { problem, out_grid, grid_resolution } => {
            let text = std::fs::read_to_string(&problem)
                .with_context(|| format!("reading problem {problem:?}"))?;
            let prob = spec::parse_problem(&text)?;
            let profile = spec::build_profile(&prob.flux_kind, &prob.flux_params)?;
            #[derive(Serialize)]
            struct Out {
                meta: Meta,
                mode: String,
                radial: Option<steady2d::elliptic::RadialProfileSolution>,
                disk_report: Option<steady2d::elliptic::DiskSolveReport>,
            }
            let mut radial = None;
            let mut disk_report = None;
            match prob.mode.as_str() {
                "radial-shoot" => {
                    radial =
                        Some(solve_radial(profile.as_ref(), prob.psi0, prob.radius, prob.nr)?);
                }
                "disk-newton" => {
                    let psi0 = prob.psi0;
                    let radius = prob.radius;
                    let sol = solve_disk_newton(
                        profile.as_ref(),
                        radius,
                        prob.boundary_value,
                        &move |x: f64, y: f64| {
                            let r2 = (x * x + y * y) / (radius * radius);
                            psi0 * (1.0 - r2)
                        },
                        prob.nr,
                        prob.ntheta,
                    )?;
                    disk_report = Some(sol.report.clone());
                    if let Some(path) = &out_grid {
                        write_disk_grid(&sol, grid_resolution, radius, path)?;
                    }
                }
                other => anyhow::bail!("unknown mode `{other}`"),
            }
            emit(
                &out,
                &Out {
                    meta: meta(&prob.raw, None, no_ts),
                    mode: prob.mode.clone(),
                    radial,
                    disk_report,
                },
            )?;
            Ok(0)
        }
        Command::MovingPlane { field, directions, region, lambda_count } => {
            let (f, raw) = load_field(&field)?;
            let sweep_region = match region.as_str() {
                "domain" => SweepRegion::from_domain(f.domain())?,
                "auto" => {
                    let analysis = analyze_critical_set(f.as_ref(), 192)?;
                    let dec = innermost_loop(&analysis, f.domain())?;
                    match dec.innermost_component {
                        Some(ci) if analysis.components[ci].closed => {
                            SweepRegion::from_polyline(analysis.components[ci].polyline.clone())
                        }
                        _ => SweepRegion::from_domain(f.domain())?,
                    }
                }
                other => anyhow::bail!("unknown region choice `{other}`"),
            };
            let report = symmetry_verdict(&f, &sweep_region, directions, lambda_count)?;
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta,
                #[serde(flatten)]
                report: &'a steady2d::moving_plane::MovingPlaneReport,
            }
            emit(&out, &Out { meta: meta(&raw, None, no_ts), report: &report })?;
            Ok(0)
        }
        Command::Counterexample {
            curve,
            delta,
            orders,
            a,
            b,
            out_prefix,
            grid_resolution,
        } => {
            let (nn, ns) = {
                let (x, y) = orders
                    .split_once(',')
                    .ok_or_else(|| anyhow::anyhow!("--orders expects `Nn,Ns`"))?;
                (x.trim().parse::<usize>()?, y.trim().parse::<usize>()?)
            };
            let mut params = BTreeMap::new();
            params.insert("a".to_string(), a.to_string());
            params.insert("b".to_string(), b.to_string());
            let jordan = spec::build_curve(&curve, &params)?;
            let chart = build_fermi_chart(jordan, delta)?;
            let solution = Arc::new(solve_tube_series(&chart, (nn, ns))?);
            let field = export_field(solution.clone());
            if let Some(prefix) = &out_prefix {
                let grid = sample_grid(&field, (grid_resolution, grid_resolution))?;
                let mut file = std::fs::File::create(prefix.with_extension("grid.csv"))?;
                grid.write_csv(&mut file)?;
                // coefficient CSV: k, then Fourier coefficients a0, a1, b1, ...
                let mut rows = String::from("# k, a0, a1, b1, a2, b2, ...\n");
                for (k, cs) in solution.coeff_series.iter().enumerate() {
                    let mut row = vec![k.to_string()];
                    row.push(format!("{:.17e}", cs.cos[0]));
                    for m in 1..=solution.s_modes.min(cs.cos.len() - 1) {
                        row.push(format!("{:.17e}", cs.cos[m]));
                        row.push(format!("{:.17e}", cs.sin[m]));
                    }
                    rows.push_str(&row.join(","));
                    rows.push('\n');
                }
                std::fs::write(prefix.with_extension("coeffs.csv"), rows)?;
            }
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta,
                curve: String,
                delta: f64,
                orders: (usize, usize),
                curve_length: f64,
                kappa_sup: f64,
                residual: &'a steady2d::tube::TubeResidualReport,
            }
            let spec_text = format!("curve={curve}; delta={delta}; orders={nn},{ns}");
            emit(
                &out,
                &Out {
                    meta: meta(&spec_text, Some(grid_resolution), no_ts),
                    curve,
                    delta,
                    orders: (nn, ns),
                    curve_length: chart.curve.length,
                    kappa_sup: chart.curve.kappa_sup,
                    residual: &solution.residual,
                },
            )?;
            Ok(0)
        }
        Command::Analyze { field, resolution, directions, force } => {
            let (f, raw) = load_field(&field)?;
            let opts = AnalyzeOptions { resolution, directions, force, ..Default::default() };
            let mut report = run_analyze(&f, &opts)?;
            let m = meta(&raw, Some(resolution), no_ts);
            report.meta.spec_hash = Some(m.spec_hash.clone());
            report.meta.timestamp_unix = m.timestamp_unix;
            emit(&out, &report)?;
            Ok(report.exit_code())
        }
        Command::Probe { field, operator, resolutions } => {
            let (f, raw) = load_field(&field)?;
            let op = match operator.as_str() {
                "laplacian" => ProbeOperator::Laplacian,
                "bracket" => ProbeOperator::Bracket,
                other => anyhow::bail!("unknown operator `{other}`"),
            };
            let res: Vec<usize> = resolutions
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()?;
            let report = convergence_probe(op, &f, &res)?;
            #[derive(Serialize)]
            struct Out {
                meta: Meta,
                #[serde(flatten)]
                report: steady2d::calculus::ProbeReport,
            }
            emit(&out, &Out { meta: meta(&raw, None, no_ts), report })?;
            Ok(0)
        }
    }
}

fn write_disk_grid(
    sol: &steady2d::elliptic::DiskSolution,
    n: usize,
    radius: f64,
    path: &PathBuf,
) -> Result<()> {
    let d = 2.0 * radius / (n - 1) as f64;
    let mut rows = String::new();
    rows.push_str(&format!("# {n} {n} {} {} {d} {d}\n", -radius, -radius));
    for iy in 0..n {
        let y = -radius + d * iy as f64;
        let line: Vec<String> = (0..n)
            .map(|ix| {
                let x = -radius + d * ix as f64;
                match sol.interp(x, y) {
                    Some(v) => format!("{v:.17e}"),
                    None => "nan".to_string(),
                }
            })
            .collect();
        rows.push_str(&line.join(","));
        rows.push('\n');
    }
    std::fs::write(path, rows)?;
    Ok(())
}
