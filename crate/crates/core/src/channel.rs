//! Scenario geometry and Rayleigh-faded channels with distance path loss.

use nalgebra::Vector2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::model::{ChannelSet, SystemDims};

pub type Point = Vector2<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub bs_pos: Point,
    pub ris_pos: Point,
    pub user_center_x: f64,
    pub user_radius: f64,
    pub user_pos: Vec<Point>,
}

impl Geometry {
    pub fn user_center(&self) -> Point {
        Point::new(self.user_center_x, 0.0)
    }

    /// Users drawn uniformly in the disk around `(center_x, 0)`.
    pub fn random(k: usize, bs_pos: Point, ris_pos: Point, center_x: f64, radius: f64, rng: &mut impl Rng) -> Self {
        let center = Point::new(center_x, 0.0);
        let user_pos = (0..k)
            .map(|_| {
                let r = radius * rng.random::<f64>().sqrt();
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                center + Point::new(r * phi.cos(), r * phi.sin())
            })
            .collect();
        Self {
            bs_pos,
            ris_pos,
            user_center_x: center_x,
            user_radius: radius,
            user_pos,
        }
    }

    /// BS at the origin, RIS at (0, 50 m), users within 10 m of (x, 0).
    pub fn standard(k: usize, center_x: f64, rng: &mut impl Rng) -> Self {
        Self::random(k, Point::zeros(), Point::new(0.0, 50.0), center_x, 10.0, rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLossParams {
    /// Linear gain at the reference distance.
    pub c0: f64,
    pub d0: f64,
    pub iota_d: f64,
    pub iota_g: f64,
    pub iota_r: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            c0: 1e-3,
            d0: 1.0,
            iota_d: 3.8,
            iota_g: 2.5,
            iota_r: 2.8,
        }
    }
}

/// `C0·(d0/d)^ι`
pub fn path_loss(d: f64, iota: f64, plp: &PathLossParams) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(plp.c0 * (plp.d0 / d).powf(iota))
}

/// i.i.d. CN(0, gain) entries.
pub fn sample_rayleigh(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> CMatrix {
    let s = (gain / 2.0).sqrt();
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

fn sample_vector(n: usize, gain: f64, rng: &mut impl Rng) -> CVector {
    sample_rayleigh(n, 1, gain, rng).column(0).into_owned()
}

pub fn generate_channels(
    dims: &SystemDims,
    geom: &Geometry,
    plp: &PathLossParams,
    rng: &mut impl Rng,
) -> Result<ChannelSet> {
    if geom.user_pos.len() != dims.k {
        return Err(Error::Dimension(format!(
            "geometry has {} users, dims expect {}",
            geom.user_pos.len(),
            dims.k
        )));
    }
    let g_gain = path_loss((geom.bs_pos - geom.ris_pos).norm(), plp.iota_g, plp)?;
    let g = sample_rayleigh(dims.m, dims.n, g_gain, rng);
    let mut h_d = Vec::with_capacity(dims.k);
    let mut h_r = Vec::with_capacity(dims.k);
    for u in &geom.user_pos {
        let d_gain = path_loss((geom.bs_pos - u).norm(), plp.iota_d, plp)?;
        let r_gain = path_loss((geom.ris_pos - u).norm(), plp.iota_r, plp)?;
        h_d.push(sample_vector(dims.n, d_gain, rng));
        h_r.push(sample_vector(dims.m, r_gain, rng));
    }
    Ok(ChannelSet { h_d, g, h_r })
}

/// Independent generator for `(seed, stream)`; parallel trials that use
/// distinct streams produce the same draws regardless of scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
