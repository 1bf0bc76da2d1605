//! Node topology, path loss and seeded Rayleigh block fading.
//!
//! Every link `u -> v` is drawn as `CN(0, d_uv^-beta)`. Sampling uses one
//! ChaCha8 stream per link, keyed by the trial seed, so a realization is a
//! pure function of `(topology, antennas, seed)` and the first `N` entries of
//! a vector link do not depend on how many antennas were requested. Growing
//! the array therefore only appends new coefficients.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// The five links of the two-group network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    S1D1,
    S1R,
    S2R,
    S2D2,
    RD2,
}

impl Link {
    pub const ALL: [Link; 5] = [Link::S1D1, Link::S1R, Link::S2R, Link::S2D2, Link::RD2];

    fn stream(self) -> u64 {
        match self {
            Link::S1D1 => 1,
            Link::S1R => 2,
            Link::S2R => 3,
            Link::S2D2 => 4,
            Link::RD2 => 5,
        }
    }
}

/// Variance of a Rayleigh-faded coefficient at distance `d`: `d^-beta`.
pub fn path_loss_variance(d: f64, beta: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return domain(format!("distance must be positive and finite, got {d}"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return domain(format!("path-loss exponent must be positive, got {beta}"));
    }
    Ok(d.powf(-beta))
}

/// Pairwise link distances (meters) plus the path-loss exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyFields", into = "TopologyFields")]
pub struct Topology {
    d_s1d1: f64,
    d_s1r: f64,
    d_s2r: f64,
    d_s2d2: f64,
    d_rd2: f64,
    beta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TopologyFields {
    d_s1d1: f64,
    d_s1r: f64,
    d_s2r: f64,
    d_s2d2: f64,
    d_rd2: f64,
    path_loss_exponent: f64,
}

impl TryFrom<TopologyFields> for Topology {
    type Error = Error;

    fn try_from(f: TopologyFields) -> Result<Self> {
        Topology::new(f.d_s1d1, f.d_s1r, f.d_s2r, f.d_s2d2, f.d_rd2, f.path_loss_exponent)
    }
}

impl From<Topology> for TopologyFields {
    fn from(t: Topology) -> Self {
        TopologyFields {
            d_s1d1: t.d_s1d1,
            d_s1r: t.d_s1r,
            d_s2r: t.d_s2r,
            d_s2d2: t.d_s2d2,
            d_rd2: t.d_rd2,
            path_loss_exponent: t.beta,
        }
    }
}

impl Topology {
    pub fn new(d_s1d1: f64, d_s1r: f64, d_s2r: f64, d_s2d2: f64, d_rd2: f64, beta: f64) -> Result<Self> {
        let topo = Topology { d_s1d1, d_s1r, d_s2r, d_s2d2, d_rd2, beta };
        for link in Link::ALL {
            let d = topo.distance(link);
            if !(d > 0.0) || !d.is_finite() {
                return domain(format!("{link:?} distance must be positive and finite, got {d}"));
            }
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return domain(format!("path-loss exponent must be positive, got {beta}"));
        }
        Ok(topo)
    }

    /// Default distances of the numerical study: a weak 100 m direct link for
    /// group 2 and the relay 2 m from S1.
    pub fn standard() -> Self {
        Topology::new(9.0, 2.0, 10.0, 100.0, 20.0, 4.0).expect("valid constants")
    }

    pub fn distance(&self, link: Link) -> f64 {
        match link {
            Link::S1D1 => self.d_s1d1,
            Link::S1R => self.d_s1r,
            Link::S2R => self.d_s2r,
            Link::S2D2 => self.d_s2d2,
            Link::RD2 => self.d_rd2,
        }
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.beta
    }

    pub fn variance(&self, link: Link) -> f64 {
        self.distance(link).powf(-self.beta)
    }
}

/// Planar node positions used by the relay-placement study.
pub mod layout {
    pub const S2: (f64, f64) = (0.0, 0.0);
    pub const D2: (f64, f64) = (10.0, 0.0);
    pub const S1: (f64, f64) = (10.0, 10.0);
    /// The layout text places "D2" at (20, 10) a second time; read as D1.
    pub const D1: (f64, f64) = (20.0, 10.0);
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Topology for the relay-placement study with the relay at `(relay_x, relay_y)`.
///
/// The relay may not coincide with any other node.
pub fn figure_topology(relay_x: f64, relay_y: f64) -> Result<Topology> {
    figure_topology_with_exponent(relay_x, relay_y, 4.0)
}

pub fn figure_topology_with_exponent(relay_x: f64, relay_y: f64, beta: f64) -> Result<Topology> {
    let r = (relay_x, relay_y);
    Topology::new(
        euclid(layout::S1, layout::D1),
        euclid(layout::S1, r),
        euclid(layout::S2, r),
        euclid(layout::S2, layout::D2),
        euclid(r, layout::D2),
        beta,
    )
}

/// One fading block: complex coefficients for the five links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h_s1d1: Vec<Complex64>,
    pub h_s1r: Vec<Complex64>,
    pub h_s2r: Complex64,
    pub h_s2d2: Complex64,
    pub h_rd2: Complex64,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.h_s1d1.len()
    }

    /// Builds a realization from explicit coefficients, checking shapes.
    pub fn from_parts(
        h_s1d1: Vec<Complex64>,
        h_s1r: Vec<Complex64>,
        h_s2r: Complex64,
        h_s2d2: Complex64,
        h_rd2: Complex64,
    ) -> Result<Self> {
        if h_s1d1.is_empty() || h_s1d1.len() != h_s1r.len() {
            return domain("S1 channel vectors must be nonempty and of equal length");
        }
        let all_finite = h_s1d1
            .iter()
            .chain(h_s1r.iter())
            .chain([&h_s2r, &h_s2d2, &h_rd2])
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !all_finite {
            return domain("channel coefficients must be finite");
        }
        Ok(ChannelRealization { h_s1d1, h_s1r, h_s2r, h_s2d2, h_rd2, seed: 0 })
    }
}

fn link_rng(seed: u64, link: Link) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(link.stream());
    rng
}

fn draw(rng: &mut ChaCha8Rng, sigma: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sigma * re, sigma * im)
}

fn draw_vec(seed: u64, link: Link, variance: f64, n: usize) -> Vec<Complex64> {
    let sigma = (variance / 2.0).sqrt();
    let mut rng = link_rng(seed, link);
    (0..n).map(|_| draw(&mut rng, sigma)).collect()
}

/// Draws one block-fading realization.
pub fn sample_channels(topology: &Topology, n_antennas: usize, seed: u64) -> Result<ChannelRealization> {
    if n_antennas == 0 {
        return domain("antenna count must be at least 1");
    }
    let scalar = |link| draw_vec(seed, link, topology.variance(link), 1)[0];
    Ok(ChannelRealization {
        h_s1d1: draw_vec(seed, Link::S1D1, topology.variance(Link::S1D1), n_antennas),
        h_s1r: draw_vec(seed, Link::S1R, topology.variance(Link::S1R), n_antennas),
        h_s2r: scalar(Link::S2R),
        h_s2d2: scalar(Link::S2D2),
        h_rd2: scalar(Link::RD2),
        seed,
    })
}
