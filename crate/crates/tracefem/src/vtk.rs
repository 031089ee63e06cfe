//! Legacy VTK export of `Γ_h` with the discrete and exact fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use tracefem_core::fem::FeFunction;
use tracefem_core::manufactured::SphereProblem;
use tracefem_core::study::LevelSolution;

use crate::CliError;

/// Writes the mapped interface triangles (vertices duplicated per triangle)
/// with `u_h`, `u*`, `|u* − u_h|` and, for the multiplier method, `λ_h`.
pub fn write_surface(path: &Path, sol: &LevelSolution) -> Result<(), CliError> {
    let disc = &sol.disc;
    let problem = SphereProblem;
    let u = FeFunction::from_coeffs(&disc.velocity, 3, sol.u.clone())?;
    let lam = match (&disc.multiplier, &sol.lambda) {
        (Some(m), Some(l)) => Some(FeFunction::from_coeffs(m, 1, l.clone())?),
        _ => None,
    };
    let mut xs = Vec::new();
    let mut uh = Vec::new();
    let mut ue = Vec::new();
    let mut lh = Vec::new();
    for e in 0..disc.n_elements() {
        let ce = &disc.cut.elements[e];
        for tri in ce.triangles() {
            for p in tri.points {
                let xi = ce.to_reference(p);
                let g = disc.deformation.geometry(e, xi)?;
                let v = u.eval_reference(e, xi, &g.finv_t).value;
                xs.push(g.x);
                uh.push([v[0], v[1], v[2]]);
                ue.push(problem.u_ext(g.x)?.0);
                if let Some(l) = &lam {
                    lh.push(l.eval_reference(e, xi, &g.finv_t).value[0]);
                }
            }
        }
    }
    let n = xs.len();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "discrete surface, level {}", disc.mesh.level)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {n} double")?;
    for x in &xs {
        writeln!(w, "{:.12e} {:.12e} {:.12e}", x[0], x[1], x[2])?;
    }
    writeln!(w, "POLYGONS {} {}", n / 3, 4 * (n / 3))?;
    for t in 0..n / 3 {
        writeln!(w, "3 {} {} {}", 3 * t, 3 * t + 1, 3 * t + 2)?;
    }
    writeln!(w, "POINT_DATA {n}")?;
    for (name, data) in [("u_h", &uh), ("u_exact", &ue)] {
        writeln!(w, "VECTORS {name} double")?;
        for v in data.iter() {
            writeln!(w, "{:.12e} {:.12e} {:.12e}", v[0], v[1], v[2])?;
        }
    }
    writeln!(w, "SCALARS error double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for (a, b) in uh.iter().zip(&ue) {
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        writeln!(w, "{d:.12e}")?;
    }
    if !lh.is_empty() {
        writeln!(w, "SCALARS lambda_h double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in &lh {
            writeln!(w, "{v:.12e}")?;
        }
    }
    w.flush()?;
    Ok(())
}
