//! Benchmark runners. Each returns a table of plot-ready rows.

use loopseries::bp::{find_fixed_point, init_messages, log_bp_partition, normalize_fixed_point, BpFixedPoint};
use loopseries::lattice::{build_double_layer, DoubleLayerCell, LatticeSpec, PepsCell};
use loopseries::loops::{enumerate_excitations, ExcitationCatalog, LatticeVacuum};
use loopseries::models::{aklt_peps, kagome_to_hex, max_spin_projector, product_peps, random_peps};
use loopseries::observables::{
    density_matrix_series, expectation, free_energy_multi, free_energy_single, transfer_matrix_series, OpenCatalog,
};
use loopseries::reference::{
    boundary_mps, periodic_torus_free_energy, relative_frobenius, strip_free_energy, trace_norm_distance, BoundaryMps,
    ReferenceMethod, ReferenceResult,
};
use loopseries::{Tensor, TensorNetwork, C64};
use serde_json::Value;

use crate::config::{ExperimentConfig, GeometryName, ModelConfig, ReferenceConfig, ReferenceMethodName};
use crate::error::{CliError, CliResult};
use crate::formats::catalog_rows;
use crate::table::{num, Table};

pub fn peps_cell(cfg: &ExperimentConfig) -> CliResult<PepsCell> {
    let spec = LatticeSpec::from_geometry(cfg.geometry.geometry());
    Ok(match &cfg.model {
        ModelConfig::Aklt => aklt_peps(&spec)?,
        ModelConfig::Random { d, m, seed } => random_peps(&spec, *d, *m, *seed)?,
        ModelConfig::Product { amplitudes } => {
            let v: Vec<C64> = amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect();
            product_peps(&spec, &v)?
        }
    })
}

/// Norm network of the configured model on the lattice the series runs on.
pub fn double_layer(cfg: &ExperimentConfig) -> CliResult<DoubleLayerCell> {
    let peps = peps_cell(cfg)?;
    Ok(match cfg.geometry {
        GeometryName::Kagome => kagome_to_hex(&peps, cfg.kagome_cutoff)?.double_layer()?,
        _ => build_double_layer(&peps)?,
    })
}

/// Model, BP vacuum and evaluated catalog.
pub struct Prepared {
    pub cell: DoubleLayerCell,
    pub vacuum: LatticeVacuum,
    pub catalog: ExcitationCatalog,
}

pub fn prepare(cfg: &ExperimentConfig) -> CliResult<Prepared> {
    cfg.validate()?;
    let cell = double_layer(cfg)?;
    let vacuum = solve_vacuum(cfg, &cell)?;
    let mut catalog = enumerate_excitations(&cell.spec, cfg.max_degree)?;
    vacuum.evaluate_catalog(&mut catalog)?;
    Ok(Prepared { cell, vacuum, catalog })
}

fn solve_vacuum(cfg: &ExperimentConfig, cell: &DoubleLayerCell) -> CliResult<LatticeVacuum> {
    Ok(LatticeVacuum::solve(
        cell,
        cfg.bp.init.strategy(),
        cfg.bp.damping,
        cfg.bp.tol,
        cfg.bp.max_sweeps,
    )?)
}

pub fn run_reference(cell: &DoubleLayerCell, r: &ReferenceConfig) -> CliResult<ReferenceResult> {
    Ok(match r.method {
        ReferenceMethodName::BoundaryMps => loopseries::reference::boundary_mps_free_energy(cell, r.resolution)?,
        ReferenceMethodName::Strip => strip_free_energy(cell, r.resolution)?,
        ReferenceMethodName::Torus => periodic_torus_free_energy(cell, r.resolution)?,
    })
}

fn primary_reference(cfg: &ExperimentConfig) -> CliResult<&ReferenceConfig> {
    cfg.references
        .first()
        .ok_or_else(|| CliError::Config("at least one reference is required".into()))
}

fn method_name(m: ReferenceMethod) -> &'static str {
    match m {
        ReferenceMethod::ExactPatch => "torus",
        ReferenceMethod::Strip => "strip",
        ReferenceMethod::BoundaryMps => "boundary-mps",
    }
}

/// Degree cutoffs reported: 0 (pure BP) and every degree in the catalog.
fn cutoffs(catalog: &ExcitationCatalog) -> Vec<usize> {
    let mut v = vec![0];
    v.extend(catalog.degrees());
    v
}

/// Converged single/multi series of a prepared run at each cutoff.
pub struct SeriesRow {
    pub degree: usize,
    pub f_single: f64,
    pub f_multi: f64,
    pub iterations: usize,
    pub imaginary_part: f64,
}

pub fn series_rows(cfg: &ExperimentConfig, p: &Prepared) -> CliResult<Vec<SeriesRow>> {
    let bethe = p.vacuum.bethe_per_site;
    let mut rows = Vec::new();
    for k in cutoffs(&p.catalog) {
        let cat = p.catalog.truncated(k);
        let s = free_energy_single(&cat)?;
        let m = free_energy_multi(&cat, cfg.series.tol, cfg.series.max_iter)?;
        rows.push(SeriesRow {
            degree: k,
            f_single: bethe + s.f,
            f_multi: bethe + m.f,
            iterations: m.iterations,
            imaginary_part: m.imaginary_part,
        });
    }
    Ok(rows)
}

pub const FREE_ENERGY_COLUMNS: [&str; 8] = [
    "degree_cutoff",
    "f_single",
    "f_multi",
    "f_reference",
    "abs_error_single",
    "abs_error_multi",
    "bp_error",
    "iterations",
];

pub fn run_free_energy(cfg: &ExperimentConfig) -> CliResult<Table> {
    let p = prepare(cfg)?;
    let reference = run_reference(&p.cell, primary_reference(cfg)?)?;
    let rows = series_rows(cfg, &p)?;
    let bp_error = (p.vacuum.bethe_per_site - reference.value).abs();
    let mut t = Table::new(&FREE_ENERGY_COLUMNS, &cfg.hash());
    for r in rows {
        if r.imaginary_part.abs() > 1e-10 {
            eprintln!(
                "{}",
                serde_json::json!({"warning": "complex free energy", "degree": r.degree, "imaginary_part": r.imaginary_part})
            );
        }
        t.push(vec![
            Value::from(r.degree),
            num(r.f_single),
            num(r.f_multi),
            num(reference.value),
            num((r.f_single - reference.value).abs()),
            num((r.f_multi - reference.value).abs()),
            num(bp_error),
            Value::from(r.iterations),
        ]);
    }
    Ok(t)
}

pub fn run_counting_comparison(cfg: &ExperimentConfig) -> CliResult<Table> {
    let p = prepare(cfg)?;
    let reference = run_reference(&p.cell, primary_reference(cfg)?)?;
    let mut t = Table::new(&["degree", "error_single", "error_multi"], &cfg.hash());
    for r in series_rows(cfg, &p)? {
        t.push(vec![
            Value::from(r.degree),
            num((r.f_single - reference.value).abs()),
            num((r.f_multi - reference.value).abs()),
        ]);
    }
    Ok(t)
}

/// Boundary-MPS environment for matrix references.
fn environment_reference(cfg: &ExperimentConfig, cell: &DoubleLayerCell) -> CliResult<BoundaryMps> {
    let r = cfg
        .references
        .iter()
        .find(|r| r.method == ReferenceMethodName::BoundaryMps)
        .ok_or_else(|| CliError::Config("matrix references need a boundary-mps reference".into()))?;
    if cfg.bond != 0 || cell.spec.geometry != loopseries::lattice::Geometry::Hexagonal || cell.impurity.is_none() {
        return Err(loopseries::Error::UnsupportedGeometry.into());
    }
    Ok(boundary_mps(cell, r.resolution)?)
}

fn unit_trace(m: &Tensor) -> Tensor {
    let n = m.dims()[0];
    let tr: C64 = (0..n).map(|i| m.get(&[i, i])).sum();
    m.scale(tr.inv())
}

fn hermiticity_defect(m: &Tensor) -> f64 {
    let n = m.dims()[0];
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m.get(&[i, j]) - m.get(&[j, i]).conj()).norm());
        }
    }
    worst
}

/// Series and reference matrices across one bond.
pub struct MatrixRows {
    pub degrees: Vec<usize>,
    pub transfer: Vec<Tensor>,
    pub density: Vec<Tensor>,
    pub transfer_reference: Tensor,
    pub density_reference: Tensor,
}

pub fn matrix_rows(cfg: &ExperimentConfig) -> CliResult<MatrixRows> {
    let p = prepare(cfg)?;
    let env = environment_reference(cfg, &p.cell)?;
    let f = free_energy_multi(&p.catalog, cfg.series.tol, cfg.series.max_iter)?.f;
    let open = OpenCatalog::new(&p.cell.spec, cfg.bond, cfg.max_degree)?;
    let tr = transfer_matrix_series(&p.vacuum, f, &open)?;
    let rho = density_matrix_series(&p.vacuum, f, &open)?;
    let degrees: Vec<usize> = tr.per_degree.keys().copied().collect();
    let mut transfer = Vec::new();
    let mut density = Vec::new();
    for &k in &degrees {
        transfer.push(unit_trace(&tr.up_to(k)?));
        density.push(rho.up_to(k)?);
    }
    Ok(MatrixRows {
        degrees,
        transfer,
        density,
        transfer_reference: env.transfer_matrix()?,
        density_reference: env.density_matrix()?,
    })
}

pub fn run_transfer_and_density(cfg: &ExperimentConfig) -> CliResult<Table> {
    let m = matrix_rows(cfg)?;
    let mut t = Table::new(
        &["degree_cutoff", "frobenius_error_T", "trace_norm_error_rho"],
        &cfg.hash(),
    );
    for (i, &k) in m.degrees.iter().enumerate() {
        t.push(vec![
            Value::from(k),
            num(relative_frobenius(&m.transfer[i], &m.transfer_reference)?),
            num(trace_norm_distance(&m.density[i], &m.density_reference)?),
        ]);
    }
    Ok(t)
}

pub fn run_density(cfg: &ExperimentConfig) -> CliResult<Table> {
    let m = matrix_rows(cfg)?;
    let d2 = m.density_reference.dims()[0];
    let d = (0..=d2).find(|x| x * x == d2).unwrap_or(1);
    let proj = max_spin_projector(d);
    let mut t = Table::new(
        &[
            "degree_cutoff",
            "trace_norm_error_rho",
            "hermiticity_defect",
            "max_spin_expectation",
            "rho",
        ],
        &cfg.hash(),
    );
    for (i, &k) in m.degrees.iter().enumerate() {
        let rho = &m.density[i];
        let entries: Vec<Value> = rho
            .data()
            .iter()
            .map(|z| Value::from(vec![num(z.re), num(z.im)]))
            .collect();
        t.push(vec![
            Value::from(k),
            num(trace_norm_distance(rho, &m.density_reference)?),
            num(hermiticity_defect(rho)),
            num(expectation(rho, &proj)?.re),
            Value::Array(entries),
        ]);
    }
    Ok(t)
}

const BP_COLUMNS: [&str; 5] = [
    "sweeps",
    "residual",
    "log_z_re",
    "log_z_im",
    "bethe_free_energy_per_site",
];

fn bp_row(t: &mut Table, fp: &BpFixedPoint, per_site: f64) -> CliResult<()> {
    let log_z = log_bp_partition(fp)?;
    t.push(vec![
        Value::from(fp.sweeps),
        num(fp.residual),
        num(log_z.re),
        num(log_z.im),
        num(per_site),
    ]);
    Ok(())
}

/// BP on the configured lattice cell. Returns the normalized unit-cell
/// network with its fixed point.
pub fn run_bp(cfg: &ExperimentConfig) -> CliResult<(Table, TensorNetwork, BpFixedPoint)> {
    cfg.validate()?;
    let cell = double_layer(cfg)?;
    let vac = solve_vacuum(cfg, &cell)?;
    let mut t = Table::new(&BP_COLUMNS, &cfg.hash());
    bp_row(&mut t, &vac.fp, vac.bethe_per_site)?;
    Ok((t, vac.net, vac.fp))
}

/// BP on an arbitrary closed network.
pub fn run_bp_network(cfg: &ExperimentConfig, net: &TensorNetwork) -> CliResult<(Table, TensorNetwork, BpFixedPoint)> {
    let init = init_messages(net, cfg.bp.init.strategy())?;
    let fp = find_fixed_point(net, &init, cfg.bp.damping, cfg.bp.tol, cfg.bp.max_sweeps)?;
    let (out, nfp) = normalize_fixed_point(net, &fp)?;
    let mut t = Table::new(&BP_COLUMNS, &cfg.hash());
    let per_site = -log_bp_partition(&nfp)?.re / net.num_nodes().max(1) as f64;
    bp_row(&mut t, &nfp, per_site)?;
    Ok((t, out, nfp))
}

pub fn run_catalog(cfg: &ExperimentConfig) -> CliResult<Table> {
    let p = prepare(cfg)?;
    let mut t = Table::new(
        &["degree", "edges", "l_numerator", "l_denominator", "s", "weight"],
        &cfg.hash(),
    );
    for r in catalog_rows(&p.catalog) {
        t.push(vec![
            Value::from(r.degree),
            serde_json::to_value(&r.edges)?,
            Value::from(r.l[0]),
            Value::from(r.l[1]),
            Value::from(r.s),
            r.weight
                .map_or(Value::Null, |w| Value::from(vec![num(w[0]), num(w[1])])),
        ]);
    }
    Ok(t)
}

pub fn run_oracle(cfg: &ExperimentConfig) -> CliResult<Table> {
    cfg.validate()?;
    let cell = double_layer(cfg)?;
    let mut t = Table::new(&["method", "resolution", "f", "error_estimate"], &cfg.hash());
    for r in &cfg.references {
        let res = run_reference(&cell, r)?;
        t.push(vec![
            Value::from(method_name(res.method)),
            Value::from(res.resolution),
            num(res.value),
            num(res.error_estimate),
        ]);
    }
    Ok(t)
}
