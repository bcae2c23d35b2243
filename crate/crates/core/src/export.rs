//! Report serialization: JSON with every float at 17 significant digits, and
//! CSV tables for per-grid and per-trajectory arrays.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::guidance::TrajectoryRun;
use crate::quantum::Outcome;
use crate::real::Real;
use crate::solver::{DensityCurrent, SpinorField};

/// Round-trip float text, `d.dddddddddddddddde±x`; non-finite values become `null`.
pub fn sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::from("null")
    }
}

struct Sig17Formatter<'a> {
    pretty: PrettyFormatter<'a>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.pretty.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for Sig17Formatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// Pretty JSON with 17-significant-digit floats and a trailing newline.
pub fn to_json<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = Sig17Formatter {
        pretty: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// One row per grid point: `x, Re ψ↑, Im ψ↑, Re ψ↓, Im ψ↓, ρ, J, v`.
pub fn snapshot_csv<T: Real>(field: &SpinorField<T>, current: &DensityCurrent<T>) -> String {
    let mut out = String::from("x,re_up,im_up,re_down,im_down,rho,j,v\n");
    for i in 0..field.grid.len() {
        let cols = [
            field.grid.x(i),
            field.psi_up[i].re,
            field.psi_up[i].im,
            field.psi_down[i].re,
            field.psi_down[i].im,
            current.rho[i],
            current.j[i],
            current.v[i],
        ];
        let line: Vec<String> = cols.iter().map(|c| sig17(c.to_f64_lossy())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// `sample_id, t, x` for every recorded point of every path.
pub fn trajectory_csv<T: Real>(run: &TrajectoryRun<T>) -> String {
    let mut out = String::from("sample_id,t,x\n");
    for traj in &run.trajectories {
        for (t, x) in &traj.path {
            let _ = writeln!(out, "{},{},{}", traj.id, sig17(t.to_f64_lossy()), sig17(x.to_f64_lossy()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub sample_id: usize,
    pub x0: f64,
    pub x_final: f64,
    pub outcome: Outcome,
    pub final_sigma: Option<f64>,
    pub escaped: bool,
}

pub fn trajectory_summaries<T: Real>(run: &TrajectoryRun<T>) -> Vec<TrajectorySummary> {
    run.trajectories
        .iter()
        .zip(&run.spin)
        .map(|(t, s)| TrajectorySummary {
            sample_id: t.id,
            x0: t.x0.to_f64_lossy(),
            x_final: t.final_position().to_f64_lossy(),
            outcome: t.outcome,
            final_sigma: s.terminal().map(Real::to_f64_lossy),
            escaped: t.escaped,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        let s = to_json(&serde_json::json!({"p": 0.75, "v": [1.0, f64::NAN], "n": 3})).unwrap();
        assert!(s.contains("7.5000000000000000e-1"), "{s}");
        assert!(s.contains("null"));
        assert!(s.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["p"].as_f64(), Some(0.75));
    }

    #[test]
    fn sig17_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
        }
    }
}
