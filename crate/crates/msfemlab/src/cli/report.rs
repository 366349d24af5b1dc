//! CSV and report emission. All numbers are written with 17 significant
//! digits so files round-trip to the exact doubles.

use std::path::Path;

use crate::analysis::{ErrorRow, HomogRow};
use crate::error::Result;
use crate::fem::FeFunction;
use crate::offline::EffectiveTensor;

pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_errors_csv(path: &Path, rows: &[ErrorRow]) -> Result<()> {
    let mut out = String::from("H_over_eps,err_G_ref,err_G_PG,err_PG_ref,err_P1_ref\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_g17(row.h_over_eps),
            fmt_g17(row.err_g_ref),
            fmt_g17(row.err_g_pg),
            fmt_g17(row.err_pg_ref),
            fmt_g17(row.err_p1_ref),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_tensors_csv(path: &Path, tensors: &EffectiveTensor) -> Result<()> {
    let mut out = String::from("element_id,a11,a12,a21,a22\n");
    for (k, t) in tensors.per_element.iter().enumerate() {
        out.push_str(&format!(
            "{k},{},{},{},{}\n",
            fmt_g17(t.a[0][0]),
            fmt_g17(t.a[0][1]),
            fmt_g17(t.a[1][0]),
            fmt_g17(t.a[1][1]),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_solution_csv(path: &Path, u: &FeFunction) -> Result<()> {
    let mut out = String::from("vertex_id,x,y,value\n");
    for (v, p) in u.mesh.points.iter().enumerate() {
        out.push_str(&format!(
            "{v},{},{},{}\n",
            fmt_g17(p.x),
            fmt_g17(p.y),
            fmt_g17(u.values[v])
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_homog_csv(path: &Path, rows: &[HomogRow]) -> Result<()> {
    let mut out = String::from("epsilon,level,max_dev,a11,a22,target11,target22\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_g17(row.epsilon),
            row.level,
            fmt_g17(row.max_dev),
            fmt_g17(row.sample.a[0][0]),
            fmt_g17(row.sample.a[1][1]),
            fmt_g17(row.target.a[0][0]),
            fmt_g17(row.target.a[1][1]),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
