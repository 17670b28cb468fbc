//! Parameter sweeps over paired seeds, run in parallel and emitted as CSV.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use super::runner::run_scheme;
use super::Scheme;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    M,
    PM,
    PA,
    K,
    PRmax,
}

impl SweepParam {
    pub fn id(self) -> &'static str {
        match self {
            SweepParam::M => "M",
            SweepParam::PM => "P_M",
            SweepParam::PA => "P_A",
            SweepParam::K => "K",
            SweepParam::PRmax => "P_Rmax",
        }
    }

    /// Copy of `base` with this parameter set to `value` (dBm for powers).
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidArgument(format!("{} must be a non-negative integer, got {v}", self.id())))
            }
        };
        let mut cfg = base.clone();
        match self {
            SweepParam::M => cfg.m = count(value)?,
            SweepParam::PM => cfg.p_m_dbm = value,
            SweepParam::PA => cfg.p_a_dbm = value,
            SweepParam::K => cfg = cfg.with_k(count(value)?),
            SweepParam::PRmax => cfg.p_rmax_dbm = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "").as_str() {
            "m" => Ok(SweepParam::M),
            "pm" => Ok(SweepParam::PM),
            "pa" => Ok(SweepParam::PA),
            "k" => Ok(SweepParam::K),
            "prmax" => Ok(SweepParam::PRmax),
            _ => Err(Error::InvalidArgument(format!("unknown sweep parameter '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub seeds: usize,
    pub schemes: Vec<Scheme>,
    /// When false, `wall_ms` is written as zero so replays are byte-identical.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub param: SweepParam,
    pub value: f64,
    pub seed: u64,
    pub sr: f64,
    pub iters: usize,
    pub wall_ms: f64,
    pub feasible: bool,
    pub error: Option<String>,
}

/// Rows ordered by value, then scheme, then seed. Seed `j` of every point is
/// `base.seed + j`, so schemes are compared on the same draws.
pub fn run_sweep(spec: &SweepSpec, base: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() {
        return Err(Error::InvalidArgument("sweep value list is empty".into()));
    }
    if spec.seeds == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one seed".into()));
    }
    if spec.schemes.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one scheme".into()));
    }
    let mut tasks = vec![];
    for &value in &spec.values {
        let cfg = spec.param.apply(base, value)?;
        for &scheme in &spec.schemes {
            for j in 0..spec.seeds {
                let mut c = cfg.clone();
                c.seed = base.seed.wrapping_add(j as u64);
                tasks.push((scheme, value, c));
            }
        }
    }
    Ok(tasks
        .into_par_iter()
        .map(|(scheme, value, cfg)| {
            let seed = cfg.seed;
            match run_scheme(&cfg, scheme) {
                Ok(r) => SweepRow {
                    scheme,
                    param: spec.param,
                    value,
                    seed,
                    sr: r.sr,
                    iters: r.iterations,
                    wall_ms: if spec.timing { r.wall_ms } else { 0.0 },
                    feasible: r.feasible(),
                    error: r.failure,
                },
                Err(e) => SweepRow {
                    scheme,
                    param: spec.param,
                    value,
                    seed,
                    sr: f64::NAN,
                    iters: 0,
                    wall_ms: 0.0,
                    feasible: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// C-style `%.12e`: mantissa with 12 decimals, signed exponent of at least
/// two digits.
pub fn fmt_e12(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

pub const CSV_HEADER: &str = "scheme,param,value,seed,sr,iters,wall_ms,feasible";

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scheme,
            r.param,
            fmt_e12(r.value),
            r.seed,
            fmt_e12(r.sr),
            r.iters,
            fmt_e12(r.wall_ms),
            r.feasible
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponent() {
        assert_eq!(fmt_e12(1.0), "1.000000000000e+00");
        assert_eq!(fmt_e12(-0.00123), "-1.230000000000e-03");
        assert_eq!(fmt_e12(2.5e123), "2.500000000000e+123");
        assert_eq!(fmt_e12(0.0), "0.000000000000e+00");
        assert_eq!(fmt_e12(f64::NAN), "nan");
    }

    #[test]
    fn params_parse_and_apply() {
        assert_eq!("P_Rmax".parse::<SweepParam>().unwrap(), SweepParam::PRmax);
        assert_eq!("pm".parse::<SweepParam>().unwrap(), SweepParam::PM);
        assert!("Q".parse::<SweepParam>().is_err());
        let base = ScenarioConfig::default();
        let c = SweepParam::K.apply(&base, 5.0).unwrap();
        assert_eq!(c.k(), 5);
        assert!(SweepParam::K.apply(&base, 1.5).is_err());
        assert_eq!(SweepParam::PA.apply(&base, 40.0).unwrap().p_a_dbm, 40.0);
    }

    #[test]
    fn empty_values_rejected() {
        let spec = SweepSpec {
            param: SweepParam::M,
            values: vec![],
            seeds: 1,
            schemes: vec![Scheme::None],
            timing: false,
        };
        assert!(run_sweep(&spec, &ScenarioConfig::default()).is_err());
    }

    #[test]
    fn header_and_row_layout() {
        let rows = vec![SweepRow {
            scheme: Scheme::PassiveBoost,
            param: SweepParam::M,
            value: 10.0,
            seed: 3,
            sr: 0.5,
            iters: 7,
            wall_ms: 0.0,
            feasible: true,
            error: None,
        }];
        let mut buf = vec![];
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "scheme,param,value,seed,sr,iters,wall_ms,feasible\n\
             passive_boost,M,1.000000000000e+01,3,5.000000000000e-01,7,0.000000000000e+00,true\n"
        );
    }
}
