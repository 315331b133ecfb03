use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gkiso::galerkin::{assemble, default_quadrature, sample_points, Point};
use gkiso::gluing::check_gk;
use gkiso::io::{field_csv, reports_csv, surface_csv, surface_obj, ComplexFile, FieldRecord};
use gkiso::isogeo::{lemma_check, IsoGeoElement};
use gkiso::space::{build_complex, build_gsmooth_space, GSmoothSpace, Layout};
use gkiso::{Error, Result};

#[derive(Parser)]
#[command(name = "gkiso", version, about = "G^k multipatch caps and iso-geometric smoothness checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a cap of n patches around one vertex, with geometry and a random field.
    BuildCap {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check G^k of geometry and fields and the smoothness of every element.
    Check {
        file: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 25)]
        samples: usize,
        #[arg(long, default_value_t = gkiso::gluing::VERIFY_TOL)]
        tol: f64,
        /// Per-sample report CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Galerkin projection or reaction-diffusion solve on the cap.
    Solve {
        file: PathBuf,
        problem: Problem,
        #[arg(long)]
        quadrature: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        resolution: usize,
        /// Solution samples as `x,y,u` CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export sampled geometry, a field, or the smoothness report.
    Export {
        file: PathBuf,
        what: What,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, default_value_t = 10)]
        resolution: usize,
        #[arg(long, default_value_t = 25)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Project,
    Reaction,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Surface,
    Field,
    Report,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Obj,
}

/// Verdict of a command that ran to completion.
enum Outcome {
    Pass,
    Fail,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_cap(n: usize, degree: usize, k: usize, seed: u64, out: &Path) -> Result<Outcome> {
    if n < 3 {
        return Err(Error::Contract(format!("n must be at least 3, got {n}")));
    }
    let complex = build_complex(n, (degree, degree))?;
    let mut space = build_gsmooth_space(&complex, k)?;
    let audit = space.make_geometry(Layout::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..space.dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let file = ComplexFile::from_space(&space, vec![FieldRecord { name: "f0".into(), coeffs }]);
    file.write(out)?;
    println!("n={n}");
    println!("bidegree={degree},{degree}");
    println!("k={k}");
    println!("dimension={}", space.dimension());
    println!("constraint_residual={:e}", space.constraint_residual);
    println!("min_det={:e}", audit.min_det);
    println!("out={}", out.display());
    Ok(Outcome::Pass)
}

fn edge_label(space: &GSmoothSpace, i: usize) -> String {
    let e = &space.complex.edges[i];
    format!("edge {i} (patch {} {} | patch {} {})", e.patch_a, e.edge_a, e.patch_b, e.edge_b)
}

fn check(file: &Path, k: Option<usize>, samples: usize, tol: f64, out: Option<&Path>) -> Result<Outcome> {
    let cf = ComplexFile::read(file)?;
    let space = cf.to_space()?;
    let k = k.unwrap_or(space.k);
    let geometry = space.geometry()?;
    let mut reports = Vec::new();
    let mut all_pass = true;
    let mut record = |name: String, i: usize, rep: gkiso::SmoothnessReport, reports: &mut Vec<_>| {
        println!("{} {name}: {} max={:e}", edge_label(&space, i), rep.verdict(), rep.max_mismatch);
        all_pass &= rep.pass;
        reports.push((name, i, rep));
    };
    for (i, e) in space.complex.edges.iter().enumerate() {
        let rep = check_gk(&geometry[e.patch_a], &geometry[e.patch_b], &e.rho, k, samples, tol)?;
        record(format!("geometry-G{k}"), i, rep, &mut reports);
    }
    for f in &cf.fields {
        let patches = space.sample_field(&f.coeffs)?;
        let elements: Vec<IsoGeoElement> = geometry
            .iter()
            .zip(&patches)
            .enumerate()
            .map(|(i, (g, p))| IsoGeoElement::new(g.clone(), p.clone(), i))
            .collect::<Result<_>>()?;
        for (i, e) in space.complex.edges.iter().enumerate() {
            let rep = check_gk(&patches[e.patch_a], &patches[e.patch_b], &e.rho, k, samples, tol)?;
            record(format!("{}-G{k}", f.name), i, rep, &mut reports);
            let mut rep = lemma_check(&elements[e.patch_a], &elements[e.patch_b], &e.rho, k, samples)?;
            rep.tolerance = tol;
            rep.pass = rep.max_mismatch < tol;
            record(format!("{}-C{k}", f.name), i, rep, &mut reports);
        }
    }
    if let Some(p) = out {
        emit(&reports_csv(&reports), Some(p))?;
    }
    println!("result={}", if all_pass { "pass" } else { "fail" });
    Ok(if all_pass { Outcome::Pass } else { Outcome::Fail })
}

fn solve(file: &Path, problem: Problem, quadrature: Option<usize>, seed: u64, resolution: usize, out: Option<&Path>) -> Result<Outcome> {
    let cf = ComplexFile::read(file)?;
    let space = cf.to_space()?;
    let g = quadrature.unwrap_or_else(|| default_quadrature(&space));
    let mut pb = assemble(&space, g)?;
    let mut summary = String::new();
    let coeffs = match problem {
        Problem::Project => {
            let c = pb.l2_project(|_| 1.0)?;
            writeln!(summary, "l2_error={:e}", pb.l2_error(&c, |_| 1.0)?).expect("string write");
            c
        }
        Problem::Reaction => {
            let exact = match cf.field("f0") {
                Some(f) => f.coeffs.clone(),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..space.dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect()
                }
            };
            let fields = space.sample_field(&exact)?;
            let source = pb.clone();
            let f_src = source.manufactured_source(&fields, 1.0);
            let bd = |pt: &Point| fields[pt.patch].eval(pt.param).map(|v| v[0]).unwrap_or(f64::NAN);
            let c = pb.solve_reaction(f_src, bd)?;
            let cerr = c.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let exact_fields = fields.clone();
            let l2 = pb.l2_error(&c, |pt: &Point| exact_fields[pt.patch].eval(pt.param).map(|v| v[0]).unwrap_or(f64::NAN))?;
            writeln!(summary, "coefficient_error={cerr:e}").expect("string write");
            writeln!(summary, "l2_error={l2:e}").expect("string write");
            c
        }
    };
    let patches = space.sample_field(&coeffs)?;
    let mut csv = String::from("x,y,u\n");
    for pt in sample_points(&space, resolution)? {
        let u = patches[pt.patch].eval(pt.param)?[0];
        writeln!(csv, "{},{},{u}", pt.x[0], pt.x[1]).expect("string write");
    }
    let geometry = space.geometry()?;
    let elements: Vec<IsoGeoElement> = geometry
        .iter()
        .zip(&patches)
        .enumerate()
        .map(|(i, (g, p))| IsoGeoElement::new(g.clone(), p.clone(), i))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for e in &space.complex.edges {
        let rep = lemma_check(&elements[e.patch_a], &elements[e.patch_b], &e.rho, 1, 25)?;
        worst = worst.max(rep.max_mismatch);
    }
    writeln!(summary, "quadrature={g}").expect("string write");
    writeln!(summary, "dimension={}", space.dimension()).expect("string write");
    writeln!(summary, "area={:e}", pb.area()).expect("string write");
    writeln!(summary, "solution_c1_mismatch={worst:e}").expect("string write");
    match out {
        Some(p) => {
            emit(&csv, Some(p))?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    Ok(Outcome::Pass)
}

fn export(file: &Path, what: What, format: Format, resolution: usize, samples: usize, out: Option<&Path>) -> Result<Outcome> {
    let cf = ComplexFile::read(file)?;
    let space = cf.to_space()?;
    let geometry = space.geometry()?;
    let first_field = || -> Result<Vec<gkiso::TensorPatch>> {
        let f = cf.fields.first().ok_or_else(|| Error::Contract("file has no field".into()))?;
        space.sample_field(&f.coeffs)
    };
    let text = match (what, format) {
        (What::Surface, Format::Csv) => surface_csv(geometry, resolution)?,
        (What::Surface, Format::Obj) => surface_obj(geometry, None, resolution)?,
        (What::Field, Format::Csv) => field_csv(geometry, &first_field()?, resolution)?,
        (What::Field, Format::Obj) => surface_obj(geometry, Some(&first_field()?), resolution)?,
        (What::Report, Format::Csv) => {
            let patches = first_field()?;
            let mut reports = Vec::new();
            for (i, e) in space.complex.edges.iter().enumerate() {
                let a = IsoGeoElement::new(geometry[e.patch_a].clone(), patches[e.patch_a].clone(), e.patch_a)?;
                let b = IsoGeoElement::new(geometry[e.patch_b].clone(), patches[e.patch_b].clone(), e.patch_b)?;
                reports.push(("lemma".to_string(), i, lemma_check(&a, &b, &e.rho, space.k, samples)?));
            }
            reports_csv(&reports)
        }
        (What::Report, Format::Obj) => return Err(Error::Contract("reports export only as csv".into())),
    };
    emit(&text, out)?;
    Ok(Outcome::Pass)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::BuildCap { n, degree, k, seed, out } => build_cap(n, degree, k, seed, &out),
        Command::Check { file, k, samples, tol, out } => check(&file, k, samples, tol, out.as_deref()),
        Command::Solve { file, problem, quadrature, seed, resolution, out } => {
            solve(&file, problem, quadrature, seed, resolution, out.as_deref())
        }
        Command::Export { file, what, format, resolution, samples, out } => {
            export(&file, what, format, resolution, samples, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
