//! Scenario parameters and the flat `key=value` config format.
//!
//! ```text
//! # comments start with '#'
//! p_a_dbm=30
//! m=40
//! active_set=1,2
//! bob_pos=300,0
//! ```
//!
//! Powers are given in dBm and converted with `10^(dBm/10)` (milliwatts).
//! `active_set` is 1-based in the file and 0-based in memory. Setting `k`
//! without `active_set` selects the first `k` elements.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::channel::{ArraySizes, Geometry, NodeAxes, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub p_a_dbm: f64,
    pub p_m_dbm: f64,
    pub p_rmax_dbm: f64,
    pub beta: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub n_m: usize,
    pub m: usize,
    /// 0-based active element indices, sorted.
    pub active_set: Vec<usize>,
    pub sigma_b_dbm: f64,
    pub sigma_m_dbm: f64,
    pub sigma_r_dbm: f64,
    pub geometry: Geometry,
    pub loss_const: f64,
    /// Outer convergence threshold.
    pub epsilon: f64,
    pub solver_tol: f64,
    pub seed: u64,
    /// Gaussian randomization trials.
    pub trials: usize,
    pub outer_cap: usize,
    pub dinkelbach_cap: usize,
    pub inner_cap: usize,
    /// Residual self-interference factor of Mallory. Not used by the bounds.
    pub rho: f64,
    /// Number of Mallory's jamming antennas. Not used by the bounds.
    pub n_j: usize,
    /// Extra linear power (mW) added to Alice's budget; used by the boosted
    /// passive benchmark.
    pub p_a_extra_mw: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            p_a_dbm: 30.0,
            p_m_dbm: 20.0,
            p_rmax_dbm: 20.0,
            beta: 0.9,
            n_a: 5,
            n_b: 5,
            n_m: 5,
            m: 40,
            active_set: vec![0, 1],
            sigma_b_dbm: -40.0,
            sigma_m_dbm: -40.0,
            sigma_r_dbm: -40.0,
            geometry: Geometry::default(),
            loss_const: 1e-2,
            epsilon: 1e-10,
            solver_tol: 1e-8,
            seed: 1,
            trials: 100,
            outer_cap: 200,
            dinkelbach_cap: 200,
            inner_cap: 50,
            rho: 0.0,
            n_j: 5,
            p_a_extra_mw: 0.0,
        }
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

impl ScenarioConfig {
    pub fn k(&self) -> usize {
        self.active_set.len()
    }
    pub fn p_a(&self) -> f64 {
        dbm_to_mw(self.p_a_dbm) + self.p_a_extra_mw
    }
    pub fn p_m(&self) -> f64 {
        dbm_to_mw(self.p_m_dbm)
    }
    pub fn p_rmax(&self) -> f64 {
        dbm_to_mw(self.p_rmax_dbm)
    }
    pub fn sigma_b2(&self) -> f64 {
        dbm_to_mw(self.sigma_b_dbm)
    }
    pub fn sigma_m2(&self) -> f64 {
        dbm_to_mw(self.sigma_m_dbm)
    }
    pub fn sigma_r2(&self) -> f64 {
        dbm_to_mw(self.sigma_r_dbm)
    }
    pub fn sizes(&self) -> ArraySizes {
        ArraySizes {
            n_a: self.n_a,
            n_b: self.n_b,
            n_m: self.n_m,
            m: self.m,
        }
    }

    /// Active set `{0, .., k-1}`.
    pub fn with_k(mut self, k: usize) -> Self {
        self.active_set = (0..k).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta = {} must lie in [0, 1]", self.beta));
        }
        if self.n_a == 0 || self.n_b == 0 || self.n_m == 0 || self.m == 0 {
            return bad("array sizes must be positive".into());
        }
        if self.k() > self.m {
            return bad(format!("K = {} exceeds M = {}", self.k(), self.m));
        }
        for w in self.active_set.windows(2) {
            if w[0] >= w[1] {
                return bad("active_set must be strictly increasing".into());
            }
        }
        if self.active_set.iter().any(|&i| i >= self.m) {
            return bad("active_set index exceeds M".into());
        }
        for (name, v) in [
            ("p_a_dbm", self.p_a_dbm),
            ("p_m_dbm", self.p_m_dbm),
            ("p_rmax_dbm", self.p_rmax_dbm),
            ("sigma_b_dbm", self.sigma_b_dbm),
            ("sigma_m_dbm", self.sigma_m_dbm),
            ("sigma_r_dbm", self.sigma_r_dbm),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.loss_const > 0.0) || !(self.geometry.spacing > 0.0) {
            return bad("loss_const and spacing must be positive".into());
        }
        if !(self.epsilon > 0.0) || !(self.solver_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.p_a_extra_mw >= 0.0) {
            return bad("p_a_extra_mw must be nonnegative".into());
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let g = &self.geometry;
        let pt = |p: Point| format!("{},{}", p[0], p[1]);
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("p_a_dbm", self.p_a_dbm.to_string());
        put("p_m_dbm", self.p_m_dbm.to_string());
        put("p_rmax_dbm", self.p_rmax_dbm.to_string());
        put("beta", self.beta.to_string());
        put("n_a", self.n_a.to_string());
        put("n_b", self.n_b.to_string());
        put("n_m", self.n_m.to_string());
        put("m", self.m.to_string());
        put(
            "active_set",
            self.active_set.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(","),
        );
        put("sigma_b_dbm", self.sigma_b_dbm.to_string());
        put("sigma_m_dbm", self.sigma_m_dbm.to_string());
        put("sigma_r_dbm", self.sigma_r_dbm.to_string());
        put("alice_pos", pt(g.alice));
        put("irs_pos", pt(g.irs));
        put("bob_pos", pt(g.bob));
        put("mallory_pos", pt(g.mallory));
        put("alice_axis", pt(g.axes.alice));
        put("irs_axis", pt(g.axes.irs));
        put("bob_axis", pt(g.axes.bob));
        put("mallory_axis", pt(g.axes.mallory));
        put("spacing", g.spacing.to_string());
        put("loss_const", self.loss_const.to_string());
        put("epsilon", self.epsilon.to_string());
        put("solver_tol", self.solver_tol.to_string());
        put("seed", self.seed.to_string());
        put("trials", self.trials.to_string());
        put("outer_cap", self.outer_cap.to_string());
        put("dinkelbach_cap", self.dinkelbach_cap.to_string());
        put("inner_cap", self.inner_cap.to_string());
        put("rho", self.rho.to_string());
        put("n_j", self.n_j.to_string());
        put("p_a_extra_mw", self.p_a_extra_mw.to_string());
        out
    }

    /// Hex SHA-256 of the canonical `key=value` rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_kv().as_bytes()))
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let k = k.trim().to_ascii_lowercase();
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", lineno + 1)));
            }
        }
        let mut cfg = ScenarioConfig::default();
        let mut k_override = None;
        let mut has_active = false;
        for (k, v) in &map {
            let f = || -> Result<f64> {
                v.parse::<f64>().map_err(|_| Error::Config(format!("{k}: cannot parse '{v}' as a number")))
            };
            let u = || -> Result<usize> {
                v.parse::<usize>().map_err(|_| Error::Config(format!("{k}: cannot parse '{v}' as a count")))
            };
            let p = || -> Result<Point> { parse_point(k, v) };
            let g = &mut cfg.geometry;
            match k.as_str() {
                "p_a_dbm" => cfg.p_a_dbm = f()?,
                "p_m_dbm" => cfg.p_m_dbm = f()?,
                "p_rmax_dbm" => cfg.p_rmax_dbm = f()?,
                "beta" => cfg.beta = f()?,
                "n_a" => cfg.n_a = u()?,
                "n_b" => cfg.n_b = u()?,
                "n_m" => cfg.n_m = u()?,
                "m" => cfg.m = u()?,
                "k" => k_override = Some(u()?),
                "active_set" => {
                    has_active = true;
                    cfg.active_set = parse_index_list(k, v)?;
                }
                "sigma_b_dbm" => cfg.sigma_b_dbm = f()?,
                "sigma_m_dbm" => cfg.sigma_m_dbm = f()?,
                "sigma_r_dbm" => cfg.sigma_r_dbm = f()?,
                "alice_pos" => g.alice = p()?,
                "irs_pos" => g.irs = p()?,
                "bob_pos" => g.bob = p()?,
                "mallory_pos" => g.mallory = p()?,
                "alice_axis" => g.axes.alice = p()?,
                "irs_axis" => g.axes.irs = p()?,
                "bob_axis" => g.axes.bob = p()?,
                "mallory_axis" => g.axes.mallory = p()?,
                "array_axis" => g.axes = NodeAxes::uniform(p()?),
                "spacing" => g.spacing = f()?,
                "loss_const" => cfg.loss_const = f()?,
                "epsilon" => cfg.epsilon = f()?,
                "solver_tol" => cfg.solver_tol = f()?,
                "seed" => {
                    cfg.seed = v
                        .parse()
                        .map_err(|_| Error::Config(format!("seed: cannot parse '{v}'")))?
                }
                "trials" => cfg.trials = u()?,
                "outer_cap" => cfg.outer_cap = u()?,
                "dinkelbach_cap" => cfg.dinkelbach_cap = u()?,
                "inner_cap" => cfg.inner_cap = u()?,
                "rho" => cfg.rho = f()?,
                "n_j" => cfg.n_j = u()?,
                "p_a_extra_mw" => cfg.p_a_extra_mw = f()?,
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        match (k_override, has_active) {
            (Some(k), false) => cfg.active_set = (0..k).collect(),
            (Some(k), true) if k != cfg.active_set.len() => {
                return Err(Error::Config(format!(
                    "k = {k} disagrees with active_set of size {}",
                    cfg.active_set.len()
                )))
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_point(key: &str, v: &str) -> Result<Point> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("{key}: expected 'x,y', got '{v}'")));
    }
    let x = parts[0].parse::<f64>();
    let y = parts[1].parse::<f64>();
    match (x, y) {
        (Ok(x), Ok(y)) => Ok([x, y]),
        _ => Err(Error::Config(format!("{key}: cannot parse '{v}'"))),
    }
}

fn parse_index_list(key: &str, v: &str) -> Result<Vec<usize>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for part in v.split(',') {
        let i: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse '{part}' as an index")))?;
        if i == 0 {
            return Err(Error::Config(format!("{key}: indices are 1-based")));
        }
        out.push(i - 1);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
