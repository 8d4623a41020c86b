//! CSV and JSON emitters. Floats are written with 17 significant digits so
//! output round-trips and is byte-stable.

use std::io::{self, Write};

use serde::Serialize;

use crate::charts::{ecc_sq_in_chart, ChartId};
use crate::integrator::Trajectory;
use crate::model::{reduced_ecc_sq, reduced_energy, ReducedState};
use crate::sweep::RegimeDiagram;

pub const REDUCED_HEADER: &str = "t,r,p,l,theta,ecc_sq,energy";
pub const CHART_HEADER: &str = "tau,t,theta,c1,c2,c3,ecc_sq";
pub const DIAGRAM_HEADER: &str = "alpha,beta,delta,gamma,predicted,observed,agree,flags";

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn row<W: Write>(w: &mut W, xs: &[f64]) -> io::Result<()> {
    let line: Vec<String> = xs.iter().map(|&x| fmt_num(x)).collect();
    writeln!(w, "{}", line.join(","))
}

/// Reduced-coordinate samples `(t, [r, p, l, θ, t])`.
pub fn write_reduced_csv<W: Write>(w: &mut W, traj: &Trajectory<f64, 5>) -> io::Result<()> {
    writeln!(w, "{REDUCED_HEADER}")?;
    for (t, y) in &traj.samples {
        let s = ReducedState::from_array(y);
        row(w, &[*t, s.r, s.p, s.l, s.theta, reduced_ecc_sq(&s), reduced_energy(&s)])?;
    }
    Ok(())
}

/// Chart samples `(τ, [c1, c2, c3, θ, t])`.
pub fn write_chart_csv<W: Write>(w: &mut W, chart: ChartId, traj: &Trajectory<f64, 5>) -> io::Result<()> {
    writeln!(w, "{CHART_HEADER}")?;
    for (tau, y) in &traj.samples {
        row(w, &[*tau, y[4], y[3], y[0], y[1], y[2], ecc_sq_in_chart(chart, &[y[0], y[1], y[2]])])?;
    }
    Ok(())
}

/// One row per grid point; flags are `;`-separated.
pub fn write_diagram_csv<W: Write>(w: &mut W, d: &RegimeDiagram) -> io::Result<()> {
    writeln!(w, "{DIAGRAM_HEADER}")?;
    for e in &d.grid {
        let observed = e.observed.map_or("Undetermined", |r| r.name());
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_num(e.alpha),
            fmt_num(e.beta),
            fmt_num(e.delta),
            fmt_num(e.gamma),
            e.predicted,
            observed,
            e.agree,
            e.flags.join(";").replace(',', " ")
        )?;
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}
