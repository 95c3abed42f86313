//! End-to-end convergence studies: build, assemble, solve and measure over a
//! range of mesh levels and perturbation parameters, then emit tables.

use crate::analysis::{self, AnalysisError, ErrorBreakdown};
use crate::element::{ElementError, FeFunction, MorleySpace, ScalarField, Smooth};
use crate::forms::{build_system, FormsError, MethodKind, MethodParams, QuadratureDegrees};
use crate::mesh::{unit_cube_uniform, unit_square_uniform, MeshError, SimplexMesh};
use crate::num::{lit, Real};
use crate::problems::{layer_rhs, smooth_rhs, SinSquaredProduct, SineProduct};
use crate::solver::{solve_spd, SolverError};
use nalgebra::SVector;
use std::io::{self, Write};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error("solve failed at epsilon {epsilon}, level {level}: {source}")]
    Solve {
        epsilon: f64,
        level: usize,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// The three benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleId {
    /// 2D, smooth manufactured solution `(sin pi x sin pi y)^2`.
    Smooth2d,
    /// 2D, fixed Poisson load; errors measured against the Poisson solution,
    /// which the discrete solution approaches through boundary layers.
    Layer2d,
    /// 3D, smooth manufactured solution.
    Smooth3d,
}

impl ExampleId {
    pub fn from_number(n: usize) -> Option<Self> {
        match n {
            1 => Some(ExampleId::Smooth2d),
            2 => Some(ExampleId::Layer2d),
            3 => Some(ExampleId::Smooth3d),
            _ => None,
        }
    }

    pub fn number(self) -> usize {
        match self {
            ExampleId::Smooth2d => 1,
            ExampleId::Layer2d => 2,
            ExampleId::Smooth3d => 3,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ExampleId::Smooth3d => 3,
            _ => 2,
        }
    }

    /// The perturbation strengths each benchmark sweeps by default.
    pub fn default_eps<R: Real>(self) -> Vec<R> {
        match self {
            ExampleId::Layer2d => vec![lit(1e-6)],
            _ => vec![
                R::one(),
                lit(1e-1),
                lit(1e-2),
                lit(1e-3),
                lit(1e-4),
                lit(1e-5),
                R::zero(),
            ],
        }
    }
}

/// Full description of one convergence sweep.
#[derive(Debug, Clone)]
pub struct BenchConfig<R> {
    pub example: ExampleId,
    pub method: MethodKind,
    pub eps_list: Vec<R>,
    /// Mesh levels: level `l` uses grid spacing `2^-l`.
    pub min_level: usize,
    pub max_level: usize,
    pub sigma: R,
    pub p: R,
    pub sigma1: R,
    pub sigma2: R,
    /// Polynomial degree of the oscillation projection.
    pub proj_degree: usize,
    pub quad_assembly: usize,
    pub quad_error: usize,
    pub tol: R,
}

impl<R: Real> BenchConfig<R> {
    pub fn new(example: ExampleId, method: MethodKind) -> Self {
        BenchConfig {
            example,
            method,
            eps_list: example.default_eps(),
            min_level: 2,
            max_level: 5,
            sigma: lit(5.0),
            p: R::one(),
            sigma1: lit(5.0),
            sigma2: lit(5.0),
            proj_degree: 2,
            quad_assembly: 4,
            quad_error: 6,
            tol: lit(1e-10),
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let fail = |msg: String| Err(StudyError::InvalidConfig(msg));
        if self.min_level < 1 {
            return fail("min level must be at least 1".into());
        }
        if self.max_level < self.min_level {
            return fail(format!(
                "level range [{}, {}] is empty",
                self.min_level, self.max_level
            ));
        }
        if self.eps_list.is_empty() {
            return fail("need at least one epsilon".into());
        }
        for &eps in &self.eps_list {
            if eps < R::zero() {
                return fail(format!("epsilon must be nonnegative, got {eps}"));
            }
        }
        if !(self.p > R::zero() && self.p <= R::one()) {
            return fail(format!("p must lie in (0, 1], got {}", self.p));
        }
        if !(self.tol > R::zero()) {
            return fail(format!("solver tolerance must be positive, got {}", self.tol));
        }
        Ok(())
    }

    fn params(&self, epsilon: R) -> MethodParams<R> {
        MethodParams {
            method: self.method,
            epsilon,
            sigma: self.sigma,
            p: self.p,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
        }
    }
}

/// One (epsilon, level) measurement.
#[derive(Debug, Clone)]
pub struct StudyRow<R> {
    pub epsilon: R,
    pub level: usize,
    /// Grid spacing `2^-level`.
    pub h: R,
    /// Number of unknowns actually solved for.
    pub ndof: usize,
    pub errors: ErrorBreakdown<R>,
    pub rate_energy: Option<R>,
    pub rate_l2: Option<R>,
    pub rate_h1: Option<R>,
    pub solver_iterations: usize,
}

/// Rows ordered by (epsilon in request order, level ascending).
#[derive(Debug, Clone)]
pub struct StudyTable<R> {
    pub example: ExampleId,
    pub method: MethodKind,
    pub dim: usize,
    pub rows: Vec<StudyRow<R>>,
}

impl<R: Real> StudyTable<R> {
    /// Rows of one epsilon, level-ascending.
    pub fn rows_for(&self, epsilon: R) -> Vec<&StudyRow<R>> {
        self.rows.iter().filter(|r| r.epsilon == epsilon).collect()
    }
}

/// Runs the configured sweep: for every epsilon and level, build the mesh,
/// assemble, solve, and measure errors against the problem's reference.
pub fn run_convergence_study<R: Real>(
    config: &BenchConfig<R>,
) -> Result<StudyTable<R>, StudyError> {
    config.validate()?;
    match config.example {
        ExampleId::Smooth2d => {
            let reference = SinSquaredProduct;
            run_impl::<R, 2>(config, unit_square_uniform, reference, |eps| {
                Box::new(smooth_rhs::<R, 2>(eps))
            })
        }
        ExampleId::Layer2d => {
            let reference = SineProduct;
            run_impl::<R, 2>(config, unit_square_uniform, reference, |_eps| {
                Box::new(layer_rhs::<R, 2>())
            })
        }
        ExampleId::Smooth3d => {
            let reference = SinSquaredProduct;
            run_impl::<R, 3>(config, unit_cube_uniform, reference, |eps| {
                Box::new(smooth_rhs::<R, 3>(eps))
            })
        }
    }
}

#[allow(clippy::type_complexity)]
fn run_impl<R: Real, const D: usize>(
    config: &BenchConfig<R>,
    build_mesh: fn(usize) -> Result<SimplexMesh<R, D>, MeshError>,
    reference: impl ScalarField<R, D> + Copy,
    rhs: impl Fn(R) -> Box<dyn Fn(&SVector<R, D>) -> R>,
) -> Result<StudyTable<R>, StudyError> {
    let levels: Vec<usize> = (config.min_level..=config.max_level).collect();
    let meshes = levels
        .iter()
        .map(|&l| build_mesh(1 << l))
        .collect::<Result<Vec<_>, _>>()?;
    let spaces = meshes
        .iter()
        .map(MorleySpace::build)
        .collect::<Result<Vec<_>, _>>()?;
    let degrees = QuadratureDegrees { assembly: config.quad_assembly, load: config.quad_error };

    let mut rows = Vec::new();
    for &epsilon in &config.eps_list {
        let f = rhs(epsilon);
        let mut eps_rows = Vec::with_capacity(levels.len());
        for (li, &level) in levels.iter().enumerate() {
            let space = &spaces[li];
            let system = build_system(space, config.params(epsilon), degrees, &f)?;
            let max_iter = 50 * (system.n_unknowns() as f64).sqrt() as usize + 1000;
            let report = solve_spd(&system, config.tol, max_iter).map_err(|source| {
                StudyError::Solve { epsilon: epsilon.to_f64_lossy(), level, source }
            })?;
            let full = FeFunction { coeffs: system.expand(&report.x) };
            let p_opt =
                (config.method == MethodKind::SuperPenalty).then_some(config.p);
            let mut errors = analysis::error_norms(
                space.mesh,
                &Smooth(reference),
                &space.field(&full),
                epsilon,
                p_opt,
                config.quad_error,
            )?;
            errors.osc =
                analysis::oscillation(space.mesh, &f, config.proj_degree, config.quad_error)?;
            eps_rows.push(StudyRow {
                epsilon,
                level,
                h: lit::<R>(0.5).powi(level as i32),
                ndof: system.n_unknowns(),
                errors,
                rate_energy: None,
                rate_l2: None,
                rate_h1: None,
                solver_iterations: report.iterations,
            });
        }
        let energy: Vec<R> = eps_rows.iter().map(|r| r.errors.energy).collect();
        let l2: Vec<R> = eps_rows.iter().map(|r| r.errors.l2).collect();
        let h1: Vec<R> = eps_rows.iter().map(|r| r.errors.h1_broken).collect();
        let rate_energy = analysis::convergence_rates(&energy)?;
        let rate_l2 = analysis::convergence_rates(&l2)?;
        let rate_h1 = analysis::convergence_rates(&h1)?;
        for (i, row) in eps_rows.iter_mut().enumerate() {
            row.rate_energy = rate_energy[i];
            row.rate_l2 = rate_l2[i];
            row.rate_h1 = rate_h1[i];
        }
        rows.extend(eps_rows);
    }

    Ok(StudyTable {
        example: config.example,
        method: config.method,
        dim: config.example.dim(),
        rows,
    })
}

/// Output formats of [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// Writes the study table in the requested format.
pub fn emit_table<R: Real, W: Write>(
    table: &StudyTable<R>,
    format: TableFormat,
    out: &mut W,
) -> io::Result<()> {
    match format {
        TableFormat::Csv => write_csv(table, out),
        TableFormat::Markdown => write_markdown(table, out),
    }
}

const CSV_HEADER: &str =
    "method,dim,epsilon,level,h,ndof,err_l2,err_h1b,err_h2b,err_triple,err_energy,rate_energy,osc";

fn write_csv<R: Real, W: Write>(table: &StudyTable<R>, out: &mut W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &table.rows {
        let rate = row
            .rate_energy
            .map(|r| format!("{r:.2}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e}",
            table.method.name(),
            table.dim,
            row.epsilon,
            row.level,
            row.h,
            row.ndof,
            row.errors.l2,
            row.errors.h1_broken,
            row.errors.h2_broken,
            row.errors.triple,
            row.errors.energy,
            rate,
            row.errors.osc,
        )?;
    }
    Ok(())
}

fn write_markdown<R: Real, W: Write>(table: &StudyTable<R>, out: &mut W) -> io::Result<()> {
    // Paper-style layout: one epsilon per block of two rows (error, rate),
    // one column per mesh level.
    let mut levels: Vec<usize> = table.rows.iter().map(|r| r.level).collect();
    levels.sort_unstable();
    levels.dedup();
    let mut eps_order: Vec<R> = Vec::new();
    for row in &table.rows {
        if !eps_order.contains(&row.epsilon) {
            eps_order.push(row.epsilon);
        }
    }

    writeln!(
        out,
        "## {} energy error, example {} ({}D)",
        table.method.name(),
        table.example.number(),
        table.dim
    )?;
    writeln!(out)?;
    let mut header = String::from("| eps \\ h |");
    let mut rule = String::from("|---|");
    for l in &levels {
        header.push_str(&format!(" 2^-{l} |"));
        rule.push_str("---|");
    }
    writeln!(out, "{header}")?;
    writeln!(out, "{rule}")?;
    for &eps in &eps_order {
        let rows = table.rows_for(eps);
        let mut err_line = format!("| {eps} |");
        let mut rate_line = String::from("| rate |");
        for l in &levels {
            match rows.iter().find(|r| r.level == *l) {
                Some(row) => {
                    err_line.push_str(&format!(" {:.3E} |", row.errors.energy));
                    match row.rate_energy {
                        Some(rate) => rate_line.push_str(&format!(" {rate:.2} |")),
                        None => rate_line.push_str(" - |"),
                    }
                }
                None => {
                    err_line.push_str(" |");
                    rate_line.push_str(" |");
                }
            }
        }
        writeln!(out, "{err_line}")?;
        writeln!(out, "{rate_line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_config() -> BenchConfig<f64> {
        let mut cfg = BenchConfig::new(ExampleId::Smooth2d, MethodKind::InteriorPenalty);
        cfg.eps_list = vec![1.0, 0.0];
        cfg.min_level = 2;
        cfg.max_level = 3;
        cfg
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_config();
        cfg.min_level = 0;
        assert!(matches!(cfg.validate(), Err(StudyError::InvalidConfig(_))));
        let mut cfg = tiny_config();
        cfg.eps_list = vec![-1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.p = 1.5;
        assert!(cfg.validate().is_err());
        assert!(tiny_config().validate().is_ok());
    }

    #[test]
    fn study_produces_ordered_rows_and_rates() {
        let table = run_convergence_study(&tiny_config()).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert_eq!(table.rows[0].level, 2);
        assert_eq!(table.rows[1].level, 3);
        assert!(table.rows[0].rate_energy.is_none());
        assert!(table.rows[1].rate_energy.is_some());
        // Free dof count at level l: (2 * 2^l - 1)^2.
        assert_eq!(table.rows[0].ndof, 49);
        assert_eq!(table.rows[1].ndof, 225);
        assert_relative_eq!(table.rows[1].h, 0.125);
        // Errors decrease under refinement.
        assert!(table.rows[1].errors.energy < table.rows[0].errors.energy);
    }

    #[test]
    fn study_is_deterministic() {
        let cfg = tiny_config();
        let t1 = run_convergence_study(&cfg).unwrap();
        let t2 = run_convergence_study(&cfg).unwrap();
        let mut b1 = Vec::new();
        let mut b2 = Vec::new();
        emit_table(&t1, TableFormat::Csv, &mut b1).unwrap();
        emit_table(&t2, TableFormat::Csv, &mut b2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn csv_round_trip_rates() {
        let table = run_convergence_study(&tiny_config()).unwrap();
        let mut buf = Vec::new();
        emit_table(&table, TableFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);

        // Recompute the rates from the emitted energy errors per epsilon.
        let mut by_eps: Vec<(String, Vec<(f64, String)>)> = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 13);
            let eps = cols[2].to_string();
            let energy: f64 = cols[10].parse().unwrap();
            let rate = cols[11].to_string();
            match by_eps.iter_mut().find(|(e, _)| *e == eps) {
                Some((_, rows)) => rows.push((energy, rate)),
                None => by_eps.push((eps, vec![(energy, rate)])),
            }
        }
        for (_, rows) in &by_eps {
            assert_eq!(rows[0].1, "");
            for w in rows.windows(2) {
                let recomputed = (w[0].0 / w[1].0).log2();
                assert_eq!(w[1].1, format!("{recomputed:.2}"));
            }
        }
    }

    #[test]
    fn markdown_mirrors_block_layout() {
        let mut cfg = tiny_config();
        cfg.eps_list = vec![1.0, 1e-2, 0.0];
        let table = run_convergence_study(&cfg).unwrap();
        let mut buf = Vec::new();
        emit_table(&table, TableFormat::Markdown, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // Title, blank, header, rule, then two lines per epsilon.
        assert!(lines[0].starts_with("## ipmwx"));
        assert!(lines[2].starts_with("| eps \\ h | 2^-2 | 2^-3 |"));
        assert_eq!(lines.len(), 4 + 2 * 3);
        let rate_rows = lines.iter().filter(|l| l.starts_with("| rate |")).count();
        assert_eq!(rate_rows, 3);
        for l in &lines[4..] {
            assert_eq!(l.matches('|').count(), 4);
        }
    }

    #[test]
    fn two_level_table_leaves_first_rate_blank() {
        let mut cfg = tiny_config();
        cfg.eps_list = vec![1.0];
        let table = run_convergence_study(&cfg).unwrap();
        let mut buf = Vec::new();
        emit_table(&table, TableFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(data.len(), 2);
        assert_eq!(data[0].split(',').nth(11).unwrap(), "");
        assert_ne!(data[1].split(',').nth(11).unwrap(), "");
    }
}
