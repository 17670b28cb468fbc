//! Line-of-sight geometry: steering vectors, rank-one channels and path loss.
//!
//! Every channel field of [`ChannelSet`] is stored in forward form
//! (receive dimension x transmit dimension), i.e. the conjugate-transposed
//! matrices `H^H` that multiply the transmitted vector.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::numerics::{CMat, CVec, C64};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct NodeAxes {
    pub alice: Point,
    pub irs: Point,
    pub bob: Point,
    pub mallory: Point,
}

impl NodeAxes {
    pub fn uniform(axis: Point) -> Self {
        Self {
            alice: axis,
            irs: axis,
            bob: axis,
            mallory: axis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub alice: Point,
    pub irs: Point,
    pub bob: Point,
    pub mallory: Point,
    /// Element spacing over wavelength.
    pub spacing: f64,
    pub axes: NodeAxes,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            alice: [0.0, 0.0],
            irs: [280.0, 20.0],
            bob: [300.0, 0.0],
            mallory: [150.0, -20.0],
            spacing: 0.5,
            axes: NodeAxes::uniform([0.0, 1.0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArraySizes {
    pub n_a: usize,
    pub n_b: usize,
    pub n_m: usize,
    pub m: usize,
}

/// Normalized ULA response; entry `n` (1-based) has phase
/// `-2 pi (n - (N+1)/2) spacing cos(theta)`.
pub fn steering_vector(theta: f64, n: usize, spacing: f64) -> Result<CVec> {
    steering_from_cos(theta.cos(), n, spacing)
}

fn steering_from_cos(cos_theta: f64, n: usize, spacing: f64) -> Result<CVec> {
    if n == 0 {
        return Err(Error::InvalidArgument("steering vector needs at least one element".into()));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument(format!("element spacing {spacing} must be positive")));
    }
    let amp = 1.0 / (n as f64).sqrt();
    let mid = (n as f64 + 1.0) / 2.0;
    Ok(CVec::from_fn(n, |i, _| {
        let psi = -((i + 1) as f64 - mid) * spacing * cos_theta;
        C64::from_polar(amp, TAU * psi)
    }))
}

/// `h(theta_r) h(theta_t)^H`.
pub fn los_channel(theta_r: f64, theta_t: f64, n_r: usize, n_t: usize, spacing: f64) -> Result<CMat> {
    let hr = steering_vector(theta_r, n_r, spacing)?;
    let ht = steering_vector(theta_t, n_t, spacing)?;
    Ok(&hr * ht.adjoint())
}

pub fn path_loss(distance: f64, loss_const: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidArgument(format!("distance {distance} must be positive")));
    }
    Ok(loss_const / (distance * distance))
}

/// Rank-one link `rx tx^H` in factored form, with its path-loss gain.
#[derive(Debug, Clone)]
pub struct LosLink {
    pub rx: CVec,
    pub tx: CVec,
    pub gain: f64,
}

impl LosLink {
    pub fn matrix(&self) -> CMat {
        &self.rx * self.tx.adjoint()
    }
}

#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Alice -> IRS, `H_AI^H` (M x N_A).
    pub ai: CMat,
    /// IRS -> Bob, `H_IB^H` (N_B x M).
    pub ib: CMat,
    /// Alice -> Bob, `H_AB^H` (N_B x N_A).
    pub ab: CMat,
    /// Mallory -> IRS, `H_MI^H` (M x N_M).
    pub mi: CMat,
    /// Mallory -> Bob, `H_MB^H` (N_B x N_M).
    pub mb: CMat,
    /// IRS -> Mallory, `H_IM^H` (N_M x M).
    pub im: CMat,
    /// Alice -> Mallory, `H_AM^H` (N_M x N_A).
    pub am: CMat,
    /// Receive steering of Mallory toward the IRS (N_M).
    pub h_im_r: CVec,
    /// Transmit steering of the IRS toward Mallory (M).
    pub h_im_t: CVec,
    /// Receive steering of the IRS from Mallory (M).
    pub h_mi_r: CVec,
    pub g_ai: f64,
    pub g_ib: f64,
    pub g_ab: f64,
    pub g_mi: f64,
    pub g_mb: f64,
    pub g_im: f64,
    pub g_am: f64,
    pub sizes: ArraySizes,
}

impl ChannelSet {
    pub fn g_aib(&self) -> f64 {
        self.g_ai * self.g_ib
    }
    pub fn g_mib(&self) -> f64 {
        self.g_mi * self.g_ib
    }
    pub fn g_aim(&self) -> f64 {
        self.g_ai * self.g_im
    }
}

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Cosine of the angle between `to - from` and the array axis.
fn direction_cos(from: Point, to: Point, axis: Point) -> f64 {
    let d = [to[0] - from[0], to[1] - from[1]];
    let nd = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let na = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
    ((d[0] * axis[0] + d[1] * axis[1]) / (nd * na)).clamp(-1.0, 1.0)
}

/// Link angle at a node looking toward `other`, in `[0, pi]`.
pub fn link_angle(node: Point, other: Point, axis: Point) -> f64 {
    direction_cos(node, other, axis).acos()
}

fn link(
    tx: (Point, Point, usize),
    rx: (Point, Point, usize),
    spacing: f64,
    loss_const: f64,
) -> Result<LosLink> {
    let (tx_pos, tx_axis, n_t) = tx;
    let (rx_pos, rx_axis, n_r) = rx;
    let d = distance(tx_pos, rx_pos);
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coincident node positions {tx_pos:?} and {rx_pos:?}"
        )));
    }
    let theta_t = link_angle(tx_pos, rx_pos, tx_axis);
    let theta_r = link_angle(rx_pos, tx_pos, rx_axis);
    Ok(LosLink {
        rx: steering_vector(theta_r, n_r, spacing)?,
        tx: steering_vector(theta_t, n_t, spacing)?,
        gain: path_loss(d, loss_const)?,
    })
}

pub fn build_channels(geom: &Geometry, sizes: ArraySizes, loss_const: f64) -> Result<ChannelSet> {
    let g = geom;
    let ax = &g.axes;
    for axis in [ax.alice, ax.irs, ax.bob, ax.mallory] {
        if !(axis[0].hypot(axis[1]) > 0.0) {
            return Err(Error::InvalidArgument("array axis must be nonzero".into()));
        }
    }
    let alice = (g.alice, ax.alice, sizes.n_a);
    let irs = (g.irs, ax.irs, sizes.m);
    let bob = (g.bob, ax.bob, sizes.n_b);
    let mallory = (g.mallory, ax.mallory, sizes.n_m);
    let s = g.spacing;

    let ai = link(alice, irs, s, loss_const)?;
    let ib = link(irs, bob, s, loss_const)?;
    let ab = link(alice, bob, s, loss_const)?;
    let mi = link(mallory, irs, s, loss_const)?;
    let mb = link(mallory, bob, s, loss_const)?;
    let im = link(irs, mallory, s, loss_const)?;
    let am = link(alice, mallory, s, loss_const)?;

    Ok(ChannelSet {
        ai: ai.matrix(),
        ib: ib.matrix(),
        ab: ab.matrix(),
        mi: mi.matrix(),
        mb: mb.matrix(),
        am: am.matrix(),
        im: im.matrix(),
        h_im_r: im.rx.clone(),
        h_im_t: im.tx.clone(),
        h_mi_r: mi.rx.clone(),
        g_ai: ai.gain,
        g_ib: ib.gain,
        g_ab: ab.gain,
        g_mi: mi.gain,
        g_mb: mb.gain,
        g_im: im.gain,
        g_am: am.gain,
        sizes,
    })
}
