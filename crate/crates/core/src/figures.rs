//! Data behind the regime, system-SAT, layering and diversity plots, as
//! plain numeric tables. Defaults reproduce the captions' parameters.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{delay_error, worst_case_rate_error};
use crate::error::{domain, Error, Result};
use crate::optimize::{
    compare_layered, dess_tradeoff_curve, sweep_regimes, LayeredProblem, TradeoffConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Delayed reaction versus advanced planning.
    F5,
    /// System SAT under the simulated component SAT `T = (R - 5) / 20`.
    F6A,
    /// Optimal layered composition as the warning grows.
    F7,
    /// Diverse versus uniform system-SAT frontiers.
    F8,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f5" | "5" => Ok(Figure::F5),
            "f6a" | "6a" => Ok(Figure::F6A),
            "f7" | "7" => Ok(Figure::F7),
            "f8" | "8" => Ok(Figure::F8),
            other => Err(Error::Parse(format!("unknown figure {other:?}; expected f5, f6a, f7 or f8"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct F5Params {
    pub lambda: f64,
    pub net_delay_min: f64,
    pub net_delay_max: f64,
    pub step: f64,
}

impl Default for F5Params {
    fn default() -> Self {
        Self { lambda: 0.1, net_delay_min: -20.0, net_delay_max: 20.0, step: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct F6aParams {
    pub rate_min: f64,
    pub rate_max: f64,
    pub step: f64,
}

impl Default for F6aParams {
    fn default() -> Self {
        Self { rate_min: 1.0, rate_max: 7.0, step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct F7Params {
    pub lambda_l: f64,
    pub lambda_h: f64,
    pub internal_delay: f64,
    pub warning_min: f64,
    pub warning_max: f64,
    pub epsilon: f64,
}

impl Default for F7Params {
    fn default() -> Self {
        Self { lambda_l: 0.1, lambda_h: 0.1, internal_delay: 10.0, warning_min: 1.0, warning_max: 20.0, epsilon: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F8Setting {
    pub name: String,
    pub internal_delay: f64,
    pub warning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct F8Params {
    pub lambda: f64,
    pub epsilon: f64,
    pub delay_step: f64,
    pub delay_max: f64,
    pub n_abscissae: usize,
    pub settings: Vec<F8Setting>,
}

impl Default for F8Params {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            epsilon: 1.0,
            delay_step: 0.25,
            delay_max: 150.0,
            n_abscissae: 60,
            settings: vec![
                F8Setting { name: "visual".into(), internal_delay: 10.0, warning: 10.0 },
                F8Setting { name: "trail".into(), internal_delay: 0.0, warning: 100.0 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FigureParams {
    pub f5: F5Params,
    pub f6a: F6aParams,
    pub f7: F7Params,
    pub f8: F8Params,
}

impl FigureParams {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

/// One CSV panel: named columns of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FigureTable {
    fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// `f64` display is the shortest string that parses back to the same
    /// bits, so tables survive a round trip exactly.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(name: impl Into<String>, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { name: name.into(), header, rows })
    }
}

fn range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(domain(format!("bad range {lo}..{hi} step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

pub fn figure_data(fig: Figure, params: &FigureParams) -> Result<Vec<FigureTable>> {
    match fig {
        Figure::F5 => f5(&params.f5),
        Figure::F6A => f6a(&params.f6a),
        Figure::F7 => f7(&params.f7),
        Figure::F8 => f8(&params.f8),
    }
}

fn f5(p: &F5Params) -> Result<Vec<FigureTable>> {
    let nets = range(p.net_delay_min, p.net_delay_max, p.step)?;
    let mut t = FigureTable::new(
        "f5",
        &["net_delay", "t_s_opt", "t_opt", "r_opt", "delay_error", "rate_error", "total_error"],
    );
    for q in sweep_regimes(p.lambda, &nets)? {
        let d = q.decomposition;
        t.rows.push(vec![q.net_delay, q.t_s_opt, q.t_opt, q.r_opt, d.delay_error, d.rate_error, d.total]);
    }
    Ok(vec![t])
}

fn f6a(p: &F6aParams) -> Result<Vec<FigureTable>> {
    let mut t = FigureTable::new("f6a", &["rate", "delay_seconds", "delay_error", "rate_error", "total_error"]);
    for r in range(p.rate_min, p.rate_max, p.step)? {
        let delay = (r - 5.0) / 20.0;
        let (de, re) = (delay_error(delay), worst_case_rate_error(r));
        t.rows.push(vec![r, delay, de, re, de + re]);
    }
    Ok(vec![t])
}

fn f7(p: &F7Params) -> Result<Vec<FigureTable>> {
    let mut a = FigureTable::new(
        "f7a",
        &["warning", "reflex_delay", "reflex_rate", "planning_delay", "planning_rate", "feasible"],
    );
    let mut b = FigureTable::new(
        "f7b",
        &["warning", "diverse_total", "uniform_total", "uniform_delay", "uniform_rate", "relative_gain"],
    );
    for w in range(p.warning_min, p.warning_max, 1.0)? {
        let prob = LayeredProblem::new(p.lambda_l, p.lambda_h, p.internal_delay, w, p.epsilon)?;
        let c = compare_layered(&prob)?;
        let d = &c.diverse;
        a.rows.push(vec![
            w,
            d.reflex.delay,
            d.reflex.rate,
            d.planning.delay,
            d.planning.rate,
            if d.feasible { 1.0 } else { 0.0 },
        ]);
        b.rows.push(vec![w, d.total, c.uniform.total, c.uniform.planning.delay, c.uniform.planning.rate, c.relative_gain()]);
    }
    Ok(vec![a, b])
}

fn f8(p: &F8Params) -> Result<Vec<FigureTable>> {
    let cfg = TradeoffConfig::regular(p.delay_step, p.delay_max, p.n_abscissae);
    let mut out = Vec::new();
    for s in &p.settings {
        let prob = LayeredProblem::new(p.lambda, p.lambda, s.internal_delay, s.warning, p.epsilon)?;
        let curve = dess_tradeoff_curve(&prob, &cfg)?;
        let mut t = FigureTable::new(
            format!("f8_{}", s.name),
            &["rate_error_sum", "diverse_delay_error_sum", "uniform_delay_error_sum"],
        );
        for (i, x) in curve.abscissae.iter().enumerate() {
            t.rows.push(vec![*x, curve.diverse_frontier[i], curve.uniform_frontier[i]]);
        }
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f6a_matches_caption_curves() {
        let t = &figure_data(Figure::F6A, &FigureParams::default()).unwrap()[0];
        for row in &t.rows {
            let r = row[0];
            assert!((row[1] - (r - 5.0) / 20.0).abs() < 1e-15);
            assert_eq!(row[2], row[1].max(0.0));
            assert!((row[3] - 1.0 / (2f64.powf(r) - 1.0)).abs() < 1e-14);
            assert_eq!(row[4], row[2] + row[3]);
        }
        assert_eq!(t.rows.first().unwrap()[0], 1.0);
        assert!((t.rows.last().unwrap()[0] - 7.0).abs() < 1e-9);
    }

    #[test]
    fn f5_and_f7_shapes() {
        let p = FigureParams::default();
        let f5 = &figure_data(Figure::F5, &p).unwrap()[0];
        assert_eq!(f5.rows.len(), 161);
        for r in &f5.rows {
            assert!((r[3] - 0.1 * r[1]).abs() < 1e-9);
        }
        let f7 = figure_data(Figure::F7, &p).unwrap();
        assert_eq!(f7[0].rows.len(), 20);
        for (a, b) in f7[0].rows.iter().zip(&f7[1].rows) {
            assert!(b[1] <= b[2] + 1e-12);
            assert!(a[3] < a[0]);
        }
    }

    #[test]
    fn f8_frontiers_and_round_trip() {
        let p = FigureParams::default();
        let tables = figure_data(Figure::F8, &p).unwrap();
        assert_eq!(tables.len(), 2);
        for t in &tables {
            for r in &t.rows {
                assert!(r[1] <= r[2]);
            }
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back = FigureTable::read_csv(t.name.clone(), buf.as_slice()).unwrap();
            assert_eq!(&back, t);
        }
    }

    #[test]
    fn params_file_overrides() {
        let p = FigureParams::parse("[f5]\nlambda = 0.2\n[f8]\nn_abscissae = 5").unwrap();
        assert_eq!(p.f5.lambda, 0.2);
        assert_eq!(p.f5.step, 0.25);
        assert_eq!(p.f8.n_abscissae, 5);
        assert_eq!(p.f8.settings.len(), 2);
        assert!("f9".parse::<Figure>().is_err());
        assert_eq!("F6A".parse::<Figure>().unwrap(), Figure::F6A);
    }
}
