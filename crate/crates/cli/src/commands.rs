use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use oseen_core::analysis::{
    check_complex_exactness_with, compute_errors, describe_solve, dof_comparison, run_convergence_study_with, solve_level, ConvergenceTable,
    ExactnessOptions, CSV_HEADER,
};
use oseen_core::fe_space::{build_pressure_space, build_velocity_space, VelocityOptions};
use oseen_core::mesh::mesh_metrics;
use oseen_core::solver::{estimate_infsup, estimate_infsup_sparse, DENSE_INFSUP_CAP};
use oseen_core::Error;

use crate::config::RunConfig;

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) | Error::Parse(m) => Failure::Config(m),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

/// Prints `text` and, with `--out`, also writes it there.
fn emit(cfg: &RunConfig, text: &str) -> Result<(), Failure> {
    print!("{text}");
    if let Some(p) = &cfg.out {
        write_out(p, text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveFile<'a> {
    config: &'a RunConfig,
    residual: f64,
    n_velocity: usize,
    n_pressure: usize,
    divergence_l2: f64,
    errors: Option<[f64; 6]>,
    /// Raw velocity coefficients, boundary values included.
    velocity: &'a [f64],
    /// Pressure coefficients in the orthonormal DG basis.
    pressure: &'a [f64],
}

pub fn solve(cfg: &RunConfig) -> Result<(), Failure> {
    let study = cfg.study();
    let s = solve_level(&study, cfg.level)?;
    let asm = s.assembler(&study.params)?;
    let (_, divu, _) = oseen_core::analysis::velocity_errors(&s.mesh, &s.vspace, &s.velocity, None, study.params.volume_degree)?;
    let errors = match s.problem.exact {
        Some(_) => Some(compute_errors(&asm, &s.qspace, &s.velocity, &s.solution.p)?),
        None => None,
    };
    let mut text = cfg.header();
    let m = mesh_metrics(&s.mesh);
    writeln!(
        text,
        "mesh: level {}, {} vertices, {} edges, {} triangles, h {:.4e}",
        cfg.level,
        s.mesh.num_vertices(),
        s.mesh.num_facets(),
        s.mesh.num_triangles(),
        m.h
    )
    .unwrap();
    writeln!(text, "solve: {}", describe_solve(&s.solution.report)).unwrap();
    writeln!(text, "residual: {:.3e}", s.solution.report.residual).unwrap();
    writeln!(text, "divergence_l2: {divu:.3e}").unwrap();
    if let Some(e) = &errors {
        writeln!(
            text,
            "errors: energy {:.6e}, l2u {:.6e}, divu {:.6e}, linfu {:.6e}, l2p {:.6e}, l2p_proj {:.6e}",
            e.energy, e.l2u, e.divu, e.linfu, e.l2p, e.l2p_proj
        )
        .unwrap();
    }
    print!("{text}");
    if let Some(p) = &cfg.out {
        let file = SolveFile {
            config: cfg,
            residual: s.solution.report.residual,
            n_velocity: s.solution.report.n_velocity,
            n_pressure: s.solution.report.n_pressure,
            divergence_l2: divu,
            errors: errors.map(|e| e.values()),
            velocity: &s.velocity,
            pressure: &s.solution.p,
        };
        write_out(p, &serde_json::to_string_pretty(&file).expect("solution serializes"))?;
    }
    Ok(())
}

fn run_study(cfg: &RunConfig, delta0: f64) -> Result<ConvergenceTable, Failure> {
    let mut study = cfg.study();
    study.params.delta0 = delta0;
    let result = run_convergence_study_with(&study, |row| {
        eprintln!(
            "delta0 {delta0:.1e} level {}: h {:.4e}, energy {:.4e}, l2u {:.4e}, residual {:.2e}",
            row.level, row.h, row.errors.energy, row.errors.l2u, row.residual
        );
    });
    match result {
        Ok(t) => Ok(t),
        Err(Error::StudyAborted { level, reason, partial }) => {
            let mut text = cfg.header();
            writeln!(text, "# aborted at level {level}: {reason}").unwrap();
            text.push_str(&partial.to_csv());
            emit(cfg, &text)?;
            Err(Failure::Numeric(format!("study aborted at level {level}: {reason}")))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn study(cfg: &RunConfig) -> Result<(), Failure> {
    let mut text = cfg.header();
    if cfg.delta0_sweep.is_empty() {
        text.push_str(&run_study(cfg, cfg.delta0)?.to_csv());
    } else {
        writeln!(text, "delta0,{CSV_HEADER}").unwrap();
        for &d in &cfg.delta0_sweep {
            let csv = run_study(cfg, d)?.to_csv();
            for line in csv.lines().skip(1) {
                writeln!(text, "{d:e},{line}").unwrap();
            }
        }
    }
    emit(cfg, &text)
}

pub fn audit(cfg: &RunConfig) -> Result<(), Failure> {
    let study = cfg.study();
    let mut text = cfg.header();
    let options = ExactnessOptions {
        velocity: VelocityOptions {
            drop_interior: cfg.drop_interior,
        },
        force_sparse: false,
    };
    writeln!(text, "level,dim_v,dim_z,dim_q,rank_b,rank_curl,max_b_curl,exact,beta,beta_method").unwrap();
    let mut betas = Vec::new();
    let mut all_exact = true;
    for level in 1..=cfg.levels {
        let mesh = study.mesh(level)?;
        let r = check_complex_exactness_with(&mesh, cfg.k, options)?;
        all_exact &= r.exact();
        let beta = if cfg.drop_interior {
            None
        } else {
            let v = build_velocity_space(&mesh, cfg.k)?;
            let q = build_pressure_space(&mesh, cfg.k - 1)?;
            let rep = if v.num_free() <= DENSE_INFSUP_CAP {
                estimate_infsup(&mesh, &v, &q)?
            } else {
                estimate_infsup_sparse(&mesh, &v, &q)?
            };
            betas.push(rep.beta);
            Some(rep)
        };
        writeln!(
            text,
            "{level},{},{},{},{},{},{:.3e},{},{},{}",
            r.dim_v,
            r.dim_z,
            r.dim_q,
            r.rank_b,
            r.rank_curl,
            r.max_b_curl,
            r.exact(),
            beta.as_ref().map_or("".into(), |b| format!("{:.6}", b.beta)),
            beta.as_ref().map_or("".into(), |b| format!("{:?}", b.method)),
        )
        .unwrap();
    }
    writeln!(text, "# exactness verdict: {}", if all_exact { "exact" } else { "NOT exact" }).unwrap();
    if !betas.is_empty() {
        let (mn, mx) = betas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        writeln!(
            text,
            "# inf-sup: min {mn:.6}, max {mx:.6}, ratio {:.4} ({})",
            mx / mn,
            if mn > 0.0 && mx / mn < 2.0 { "ok" } else { "FAIL" }
        )
        .unwrap();
    }
    emit(cfg, &text)
}

pub fn dofs(cfg: &RunConfig) -> Result<(), Failure> {
    let study = cfg.study();
    let mut text = cfg.header();
    writeln!(text, "mesh,nv,ne,nt,stenberg_velocity,bdm_velocity,pressure,stenberg_total,bdm_total,ratio").unwrap();
    let mut rows: Vec<(String, [usize; 3])> = Vec::new();
    if let Some(s) = cfg.stats {
        rows.push(("given".into(), s));
    } else {
        for level in 1..=cfg.levels {
            let m = study.mesh(level)?;
            rows.push((format!("level{level}"), [m.num_vertices(), m.num_facets(), m.num_triangles()]));
        }
    }
    for (name, [nv, ne, nt]) in rows {
        let d = dof_comparison(nv, ne, nt, cfg.k)?;
        writeln!(
            text,
            "{name},{nv},{ne},{nt},{},{},{},{},{},{:.4}",
            d.stenberg,
            d.bdm,
            d.pressure,
            d.stenberg_total(),
            d.bdm_total(),
            d.stenberg_total() as f64 / d.bdm_total() as f64
        )
        .unwrap();
    }
    emit(cfg, &text)
}
